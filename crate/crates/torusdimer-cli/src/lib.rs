//! The `torusdimer` command line.
//!
//! [`run`] parses arguments, dispatches to a subcommand and writes JSON (or
//! CSV) to the given writer. Exit status: 0 on success, 2 for bad input or
//! domain errors, 3 when a numerical classification fails.

mod commands;
pub mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use torusdimer::charpoly::NodeOptions;
use torusdimer::error::Error;
use torusdimer::lattice::{self, FundamentalDomain, Weights};
use torusdimer::torus::TorusSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Domain(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Domain(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "torusdimer", version, about = "Dimer partition functions and finite-size corrections on tori")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutFormat::Json, global = true)]
    pub out: OutFormat,
    /// Worker threads (falls back to TORUSDIMER_THREADS, then the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub tol: TolArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Json,
    Csv,
}

/// Overrides for the node search.
#[derive(Args, Debug, Clone)]
pub struct TolArgs {
    /// Grid points per axis of the initial zero scan.
    #[arg(long, global = true, default_value_t = NodeOptions::default().grid)]
    pub node_grid: usize,
    /// Grid minima below this fraction of max P are refined.
    #[arg(long, global = true, default_value_t = NodeOptions::default().candidate_tol)]
    pub candidate_tol: f64,
    /// A refined point counts as a zero when P is below this fraction of max P.
    #[arg(long, global = true, default_value_t = NodeOptions::default().node_tol)]
    pub node_tol: f64,
}

impl TolArgs {
    fn options(&self) -> CliResult<NodeOptions> {
        for (name, v) in [("candidate-tol", self.candidate_tol), ("node-tol", self.node_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Domain(format!("--{name} must be positive, got {v}")));
            }
        }
        if self.node_grid < 8 {
            return Err(CliError::Domain("--node-grid must be at least 8".into()));
        }
        Ok(NodeOptions { grid: self.node_grid, candidate_tol: self.candidate_tol, node_tol: self.node_tol })
    }
}

/// Lattice selection shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct LatticeArgs {
    /// Built-in lattice name or path to a lattice JSON file.
    #[arg(long)]
    pub lattice: String,
    /// Edge weights of a built-in lattice, e.g. `a=1,b=2.5`.
    #[arg(long)]
    pub weights: Option<String>,
}

/// Torus selection: `E = [[u, v], [x, y]]`.
#[derive(Args, Debug, Clone)]
pub struct TorusArgs {
    /// Torus matrix entries `u,v,x,y` (rows `(u,v)` and `(x,y)`).
    #[arg(long = "E", allow_hyphen_values = true)]
    pub e: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Dense,
    Fast,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Partition function of one torus.
    Partition {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        torus: TorusArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        /// Also report the predicted `det E f0 + fsc`.
        #[arg(long)]
        predict: bool,
        /// Dump the dense K_E(1,1) as (row, col, value) triplets.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Homology-sector partition functions and Pfaffians of one torus.
    Sectors {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        torus: TorusArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        /// Dump the dense K_E(1,1) as (row, col, value) triplets.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Exact winding distribution against the predicted discrete Gaussian.
    Winding {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        torus: TorusArgs,
        /// Half-width of the window around the predicted centre.
        #[arg(long, default_value_t = 6)]
        window: i64,
        /// Fourier grid size per axis.
        #[arg(long, default_value_t = 32)]
        dft: usize,
        /// Evaluate twisted determinants densely instead of by the product formula.
        #[arg(long)]
        dense: bool,
    },
    /// Criticality class, nodes and free energy of a lattice.
    Criticality {
        #[command(flatten)]
        lattice: LatticeArgs,
    },
    /// Limiting finite-size correction curves over the log aspect ratio.
    FscCurve {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Torus family; only the near-rectilinear `(m,n)-grid` is available.
        #[arg(long, default_value = "(m,n)-grid")]
        family: String,
        /// `lo:hi:count` samples of log rho, rho = Im tau.
        #[arg(long, default_value = "-2:2:41", allow_hyphen_values = true)]
        range: String,
    },
    /// Orientation check and brute-force cross-check on small tori.
    Verify {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Largest |entry| of E in the sweep.
        #[arg(long, default_value_t = 2)]
        max_entry: i64,
        /// Largest det E in the sweep.
        #[arg(long, default_value_t = 4)]
        max_det: i64,
        /// Largest lifted vertex count enumerated.
        #[arg(long, default_value_t = 20)]
        max_vertices: usize,
        /// Relative tolerance between enumeration and Pfaffians.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Ising criticality through Fisher weights.
    Ising {
        /// Couplings `beta_a,beta_b,beta_c` (default: critical Onsager lattice).
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
        /// Fisher tori to check `Z = 2 Z^{rs}` on; repeatable (default 2,0,0,2 and 4,0,0,4).
        #[arg(long = "E", allow_hyphen_values = true)]
        e: Vec<String>,
    },
}

pub(crate) fn parse_floats(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Domain(format!("{what}: `{p}` is not a number"))))
        .collect()
}

pub(crate) fn parse_torus(s: &str) -> CliResult<TorusSpec> {
    let v: Vec<i64> = s
        .split(',')
        .map(|p| p.trim().parse::<i64>().map_err(|_| CliError::Domain(format!("--E: `{p}` is not an integer"))))
        .collect::<CliResult<_>>()?;
    let [u, v, x, y] = v[..] else {
        return Err(CliError::Domain(format!("--E needs four entries u,v,x,y, got {}", v.len())));
    };
    Ok(TorusSpec::from_entries(u, v, x, y)?)
}

pub(crate) fn parse_weights(s: Option<&str>) -> CliResult<Weights> {
    let mut w = Weights::new();
    let Some(s) = s else { return Ok(w) };
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Domain(format!("--weights: `{part}` is not name=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| CliError::Domain(format!("--weights: `{v}` is not a number")))?;
        w.insert(k.trim().to_string(), v);
    }
    Ok(w)
}

impl LatticeArgs {
    pub(crate) fn load(&self) -> CliResult<FundamentalDomain> {
        if lattice::BUILTIN_NAMES.contains(&self.lattice.as_str()) {
            return Ok(lattice::builtin(&self.lattice, &parse_weights(self.weights.as_deref())?)?);
        }
        if self.weights.is_some() {
            return Err(CliError::Domain("--weights applies to built-in lattices; a lattice file carries its own".into()));
        }
        let text = std::fs::read_to_string(&self.lattice).map_err(|e| {
            CliError::Domain(format!(
                "`{}` is neither a built-in lattice ({}) nor a readable file: {e}",
                self.lattice,
                lattice::BUILTIN_NAMES.join(", ")
            ))
        })?;
        Ok(lattice::from_json(&text)?)
    }
}

fn thread_count(cli: &Cli) -> CliResult<Option<usize>> {
    if let Some(n) = cli.threads {
        return if n == 0 { Err(CliError::Domain("--threads must be positive".into())) } else { Ok(Some(n)) };
    }
    match std::env::var("TORUSDIMER_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Domain(format!("TORUSDIMER_THREADS=`{s}` is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Run the command line `argv` (program name first), writing results to `out`
/// and diagnostics to `err`. Returns the exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_DOMAIN } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    if let Some(n) = thread_count(cli)? {
        // the global pool can only be sized once per process; later calls keep it
        let _ = torusdimer::par::configure_threads(n);
    }
    let opts = cli.tol.options()?;
    let report = commands::dispatch(&cli.command, &opts)?;
    let written = match cli.out {
        OutFormat::Json => output::write_json(&report.json, out),
        OutFormat::Csv => match &report.table {
            Some(t) => t.write_csv(out),
            None => output::flatten(&report.json).write_csv(out),
        },
    };
    match written {
        // a closed pipe (`| head`) is not an error of ours
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            return Err(CliError::Domain(format!("write failed: {e}")));
        }
        _ => {}
    }
    if report.failed {
        return Err(CliError::Numerical("verification failed".into()));
    }
    Ok(())
}
