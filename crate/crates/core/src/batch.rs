//! Data-parallel batch evaluation.
//!
//! Every batch entry point takes an [`Execution`] mode. `Parallel` fans out over
//! rayon's global pool when the `parallel` feature is enabled and degrades to the
//! sequential path otherwise. Results are always returned in input order, so the
//! two modes are observationally identical.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run batches concurrently.
    pub fn is_concurrent(self) -> bool {
        self == Execution::Parallel && cfg!(feature = "parallel")
    }
}

pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// True iff `pred` holds for every item; stops early in both modes.
pub fn all<T, F>(exec: Execution, items: &[T], pred: F) -> bool
where
    T: Sync,
    F: Fn(&T) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().all(pred);
    }
    let _ = exec;
    items.iter().all(pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let xs: Vec<u64> = (0..500).collect();
        let seq = map(Execution::Sequential, &xs, |x| x * x);
        let par = map(Execution::Parallel, &xs, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(map_range(Execution::Parallel, 5, |i| i + 1), vec![1, 2, 3, 4, 5]);
        assert!(all(Execution::Parallel, &xs, |x| *x < 500));
        assert!(!all(Execution::Sequential, &xs, |x| *x < 499));
    }
}
