//! Data-parallel helpers. With the `parallel` feature these run on the
//! current rayon pool; without it they are plain sequential loops.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`
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

/// Like [`map_range`] with per-worker scratch state.
pub fn map_range_init<T, S, I, F>(n: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map_init(init, f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = init();
        (0..n).map(|i| f(&mut s, i)).collect()
    }
}

/// True when `f` holds for every index.
pub fn all_init<S, I, F>(n: usize, init: I, f: F) -> bool
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map_init(init, f).all(|b| b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = init();
        (0..n).all(|i| f(&mut s, i))
    }
}

/// Smallest index in `0..n` for which `f` returns `Some`, with its payload.
pub fn find_first_init<T, S, I, F>(n: u64, init: I, f: F) -> Option<(u64, T)>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, u64) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .map_init(init, |s, i| f(s, i).map(|t| (i, t)))
            .find_first(|r| r.is_some())
            .flatten()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = init();
        (0..n).find_map(|i| f(&mut s, i).map(|t| (i, t)))
    }
}

/// Runs `f` on disjoint mutable chunks of `data` of length `chunk`.
pub fn for_each_chunk<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Runs `f` on the current pool restricted to `workers` threads.
/// `workers == 0` means the global default.
pub fn with_workers<R: Send, F: FnOnce() -> R + Send>(workers: usize, f: F) -> R {
    #[cfg(feature = "parallel")]
    {
        if workers == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

/// Number of threads the helpers will use.
pub fn current_workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers_agree_with_sequential() {
        assert_eq!(map_range(10, |i| i * i), (0..10).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(find_first_init(1000, || (), |_, i| (i % 37 == 36).then_some(i * 2)), Some((36, 72)));
        assert!(find_first_init(10, || (), |_, _| None::<()>).is_none());
        assert!(all_init(100, || 0, |_, i| i < 100));
        let mut v = vec![0usize; 10];
        for_each_chunk(&mut v, 3, |k, c| c.iter_mut().for_each(|x| *x = k));
        assert_eq!(v, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3]);
        assert_eq!(with_workers(2, || map_range(3, |i| i).len()), 3);
    }
}
