//! Thin layer over rayon. Without the `parallel` feature every helper runs
//! sequentially with identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sum of `f(i)` over `0..n`, reduced in `chunk`-sized blocks so the result
/// does not depend on thread scheduling.
pub fn sum_range<F>(n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunk = chunk.max(1);
    let blocks = n.div_ceil(chunk);
    map_range(blocks, |b| {
        let lo = b * chunk;
        let hi = (lo + chunk).min(n);
        (lo..hi).map(&f).sum::<f64>()
    })
    .into_iter()
    .sum()
}

/// Counts indices in `0..n` satisfying `pred`.
pub fn count_range<F>(n: u64, pred: F) -> u64
where
    F: Fn(u64) -> bool + Sync + Send,
{
    const CHUNK: u64 = 1 << 14;
    let blocks = n.div_ceil(CHUNK) as usize;
    map_range(blocks, |b| {
        let lo = b as u64 * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).filter(|&i| pred(i)).count() as u64
    })
    .into_iter()
    .sum()
}

/// True when any `f(i)` is true. Evaluates all indices in the sequential build.
pub fn any_range<F>(n: usize, f: F) -> bool
where
    F: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().any(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).any(f)
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
