//! Feature-gated execution of index-parallel loops.
//!
//! `map_indexed(n, f)` evaluates `f(0..n)` and collects the results in
//! index order. With the `parallel` feature the map runs on rayon; without
//! it the same closures run sequentially. Callers must make `f` depend only
//! on its index (per-index derived seeds, no shared mutable state) so that
//! both paths produce identical output.

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Chunked map over `0..n`: `f` receives `(chunk_start, chunk_len)` and
/// returns one partial result per chunk, collected in chunk order. Used
/// where per-index results would allocate too much (gradient accumulation).
pub(crate) fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync + Send,
{
    let n_chunks = n.div_ceil(chunk.max(1));
    map_indexed(n_chunks, |k| {
        let start = k * chunk;
        let len = chunk.min(n - start);
        f(start, len)
    })
}
