//! Ordered data-parallel maps.
//!
//! With the `parallel` feature the maps run on the rayon pool; without it, or
//! while [`set_sequential`] is in force, they run in a plain loop. Results are
//! always returned in index order and every reduction in the crate sums them
//! sequentially afterwards, so output does not depend on the thread count.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential path at runtime (used by the benches to compare).
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

/// Whether maps currently fan out over threads.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// Size the global pool. Only the first call has any effect.
pub fn configure_threads(n: usize) -> std::result::Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Ok(())
    }
}

/// `(0..n).map(f)` collected in order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// `xs.iter().map(f)` collected in order.
pub fn map_slice<A, T, F>(xs: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return xs.par_iter().map(f).collect();
    }
    xs.iter().map(f).collect()
}

/// Apply `f(row_index, row)` to consecutive rows of a row-major buffer.
pub fn for_each_row_mut<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    for (i, row) in data.chunks_mut(row_len).enumerate() {
        f(i, row);
    }
}
