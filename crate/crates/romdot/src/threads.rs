use std::num::NonZeroUsize;

use romdot_core::rom::BatchRunner;
use romdot_core::Result;

/// Runs independent column jobs on scoped threads. Results are returned in
/// job order, so output does not depend on the thread count.
#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    threads: usize,
}

impl Threaded {
    pub fn new(threads: usize) -> Self {
        Self {
            threads: threads.max(1),
        }
    }

    /// Thread count from `ROMDOT_THREADS`, else the available parallelism.
    pub fn from_env() -> Self {
        let n = std::env::var("ROMDOT_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, NonZeroUsize::get));
        Self::new(n)
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

impl BatchRunner for Threaded {
    fn run(&self, n: usize, job: &(dyn Fn(usize) -> Result<Vec<f64>> + Sync)) -> Result<Vec<Vec<f64>>> {
        let workers = self.threads.min(n);
        if workers <= 1 {
            return (0..n).map(job).collect();
        }
        let mut slots: Vec<Option<Result<Vec<f64>>>> = (0..n).map(|_| None).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| s.spawn(move || (w..n).step_by(workers).map(|i| (i, job(i))).collect::<Vec<_>>()))
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("worker thread panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|r| r.expect("every job ran")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let job = |i: usize| -> Result<Vec<f64>> { Ok(vec![i as f64; 2]) };
        for t in [1, 3, 8] {
            let out = Threaded::new(t).run(7, &job).unwrap();
            assert_eq!(out.len(), 7);
            assert!(out.iter().enumerate().all(|(i, v)| v[0] == i as f64));
        }
    }

    #[test]
    fn first_error_in_order_wins() {
        let job = |i: usize| -> Result<Vec<f64>> {
            if i % 2 == 1 {
                Err(romdot_core::Error::Singular)
            } else {
                Ok(vec![])
            }
        };
        assert!(Threaded::new(4).run(6, &job).is_err());
    }
}
