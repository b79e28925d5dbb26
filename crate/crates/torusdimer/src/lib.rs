//! Exact dimer partition functions on tori, and their finite-size corrections.
//!
//! A periodic planar graph is given by a [`lattice::FundamentalDomain`] and a
//! torus by an integer matrix [`torus::TorusSpec`]. From there:
//!
//! - [`kasteleyn`] builds the twisted Kasteleyn matrices and turns their four
//!   Pfaffians into the homology-sector partition functions, either densely or
//!   through the product formula over the characteristic polynomial.
//! - [`charpoly`] computes `P(z, w)` (and `Q` for bipartite domains), locates its
//!   zeros on the unit torus, classifies criticality and evaluates the free energy.
//! - [`fsc`] predicts `log Z = det E f0 + fsc` from theta-function kernels in
//!   [`special_fn`], and the winding-number law on bipartite lattices.
//!
//! [`par`] switches the data-parallel kernels between rayon and a sequential path.
//!
//! ```
//! use torusdimer::{kasteleyn, lattice, torus::TorusSpec};
//! let d = lattice::builtin("hexagonal", &Default::default()).unwrap();
//! let t = TorusSpec::from_entries(3, 0, 0, 3).unwrap();
//! let st = kasteleyn::sector_table(&d, &t, kasteleyn::Method::Dense).unwrap();
//! assert!(st.z.value() > 0.0);
//! ```

pub mod charpoly;
pub mod error;
pub mod fsc;
pub mod kasteleyn;
pub mod lattice;
pub mod laurent;
pub mod linalg;
pub mod par;
pub mod special_fn;
pub mod torus;
