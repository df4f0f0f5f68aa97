//! Sampling grids and the tabular form every engine's output reduces to.

use crate::error::SimError;

/// `samples` equally spaced points on `[0, t_max]`; a single sample is `{0}`.
pub fn uniform_grid(t_max: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n)
            .map(|i| {
                if i == n - 1 {
                    t_max
                } else {
                    t_max * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

pub(crate) fn check_grid(grid: &[f64], t_max: f64) -> Result<(), SimError> {
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(SimError::Precondition(format!(
            "horizon must be finite and nonnegative, got {t_max}"
        )));
    }
    if grid.iter().any(|&t| !(0.0..=t_max).contains(&t)) {
        return Err(SimError::Precondition(format!(
            "sample grid must lie inside [0, {t_max}]"
        )));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(SimError::Precondition(
            "sample grid must be nondecreasing".into(),
        ));
    }
    Ok(())
}

/// Real-valued samples on a time grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub columns: Vec<String>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampleTable {
    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some((0..self.n_rows()).map(|i| self.row(i)[j]).collect())
    }
}
