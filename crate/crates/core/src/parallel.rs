//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature, indexed maps run on the rayon pool unless the
//! process-wide switch selects sequential execution. Results are always
//! collected in index order, and every task draws from its own RNG substream,
//! so output does not depend on the mode or on the number of threads.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Rayon,
}

static MODE: AtomicU8 = AtomicU8::new(1);

pub fn set_parallelism(mode: Parallelism) {
    MODE.store(
        match mode {
            Parallelism::Sequential => 0,
            Parallelism::Rayon => 1,
        },
        Ordering::Relaxed,
    );
}

/// Effective mode: always `Sequential` when built without `parallel`.
pub fn parallelism() -> Parallelism {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == 1 {
        Parallelism::Rayon
    } else {
        Parallelism::Sequential
    }
}

pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism() == Parallelism::Rayon && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Like [`map_indexed`] but stops at the first error (by index order).
pub fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let expect: Vec<usize> = (0..1000).map(|i| i * i).collect();
        set_parallelism(Parallelism::Sequential);
        assert_eq!(map_indexed(1000, |i| i * i), expect);
        set_parallelism(Parallelism::Rayon);
        assert_eq!(map_indexed(1000, |i| i * i), expect);
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<usize>, usize> =
            try_map_indexed(10, |i| if i % 4 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }
}
