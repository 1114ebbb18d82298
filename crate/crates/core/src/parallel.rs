//! Independent-task parallelism for folds, grid points and evaluation.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it every helper runs sequentially in input order. Results are
//! always returned in input order, so outputs do not depend on scheduling.

/// Whether work is actually spread across threads.
pub const ENABLED: bool = cfg!(feature = "parallel");

/// Applies `f` to every item, at most `jobs` at a time (`None`: one per
/// core), and returns the results in input order.
pub fn map_ordered<I, O, F>(items: Vec<I>, jobs: Option<usize>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if jobs != Some(1) && items.len() > 1 {
            use rayon::prelude::*;
            let run = || items.into_par_iter().map(&f).collect();
            return match jobs {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .expect("thread pool")
                    .install(run),
                None => run(),
            };
        }
    }
    let _ = jobs;
    items.into_iter().map(f).collect()
}

/// Sequential reference path of [`map_ordered`].
pub fn map_sequential<I, O, F: Fn(I) -> O>(items: Vec<I>, f: F) -> Vec<O> {
    items.into_iter().map(f).collect()
}
