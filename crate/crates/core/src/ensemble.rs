//! Independent replicate runs on a worker pool.
//!
//! Run `i` gets the stream `stream_seed(master, i)`, and results come back in
//! run order, so the output does not depend on how work was scheduled.

use rayon::prelude::*;

use crate::error::SimError;
use crate::rng::stream_seed;
use crate::table::SampleTable;

pub const THREADS_ENV: &str = "HYBRIDKINETICS_THREADS";

/// Worker count: `HYBRIDKINETICS_THREADS` if set to a positive integer,
/// otherwise the number of available cores.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Calls `run(i, seed_i)` for `i in 0..runs` and returns results by index.
pub fn run_ensemble<T, F>(runs: usize, master_seed: u64, run: F) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T, SimError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| SimError::Precondition(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| run(i, stream_seed(master_seed, i as u64)))
            .collect()
    })
}

/// Pointwise statistics over runs sampled on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub columns: Vec<String>,
    pub times: Vec<f64>,
    pub runs: usize,
    /// Row-major, `times.len() x columns.len()`.
    pub mean: Vec<f64>,
    /// Unbiased (n - 1) variance; zero for a single run.
    pub variance: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl EnsembleSummary {
    pub fn from_tables(tables: &[SampleTable]) -> Result<Self, SimError> {
        let first = tables
            .first()
            .ok_or_else(|| SimError::Precondition("empty ensemble".into()))?;
        if tables
            .iter()
            .any(|t| t.columns != first.columns || t.times != first.times)
        {
            return Err(SimError::Precondition(
                "ensemble members use different grids or species".into(),
            ));
        }
        let len = first.values.len();
        let n = tables.len() as f64;
        let mut mean = vec![0.0; len];
        let mut m2 = vec![0.0; len];
        let mut min = vec![f64::INFINITY; len];
        let mut max = vec![f64::NEG_INFINITY; len];
        for (k, table) in tables.iter().enumerate() {
            for (j, &v) in table.values.iter().enumerate() {
                let delta = v - mean[j];
                mean[j] += delta / (k + 1) as f64;
                m2[j] += delta * (v - mean[j]);
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let variance = if tables.len() > 1 {
            m2.iter().map(|s| (s / (n - 1.0)).max(0.0)).collect()
        } else {
            vec![0.0; len]
        };
        Ok(EnsembleSummary {
            columns: first.columns.clone(),
            times: first.times.clone(),
            runs: tables.len(),
            mean,
            variance,
            min,
            max,
        })
    }

    /// Mean of column `name` at grid point `i`.
    pub fn mean_at(&self, i: usize, name: &str) -> Option<f64> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.mean.get(i * self.columns.len() + j).copied()
    }

    pub fn variance_at(&self, i: usize, name: &str) -> Option<f64> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.variance.get(i * self.columns.len() + j).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(values: Vec<f64>) -> SampleTable {
        SampleTable {
            columns: vec!["A".into()],
            times: (0..values.len()).map(|i| i as f64).collect(),
            values,
        }
    }

    #[test]
    fn summary_statistics() {
        let s = EnsembleSummary::from_tables(&[table(vec![1.0, 2.0]), table(vec![3.0, 2.0])])
            .unwrap();
        assert_eq!(s.mean, vec![2.0, 2.0]);
        assert_eq!(s.variance, vec![2.0, 0.0]);
        assert_eq!(s.min, vec![1.0, 2.0]);
        assert_eq!(s.max, vec![3.0, 2.0]);
        assert_eq!(s.mean_at(0, "A"), Some(2.0));
    }

    #[test]
    fn results_in_index_order() {
        let out = run_ensemble(64, 9, |i, seed| Ok((i, seed))).unwrap();
        for (k, &(i, seed)) in out.iter().enumerate() {
            assert_eq!(i, k);
            assert_eq!(seed, stream_seed(9, k as u64));
        }
    }

    #[test]
    fn mismatched_grids_rejected() {
        let mut b = table(vec![1.0]);
        b.times = vec![5.0];
        assert!(EnsembleSummary::from_tables(&[table(vec![1.0]), b]).is_err());
    }
}
