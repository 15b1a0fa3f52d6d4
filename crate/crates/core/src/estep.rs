//! Outputs of an E-step: closed-form conditional moments or an n-by-K sample matrix.

/// Per-observation conditional expectations for the closed-form E-step.
///
/// `mean[i] = E[Z_i]` always; `second[i] = E[Z_i^2]` is filled only when the
/// model's M-step needs it (normal).
#[derive(Debug, Clone, PartialEq)]
pub struct EStepMoments {
    pub mean: Vec<f64>,
    pub second: Option<Vec<f64>>,
}

/// Row-major `n x K` matrix of quantile or Monte Carlo draws, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(rows * cols, values.len(), "sample matrix shape mismatch");
        Self { rows, cols, values }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged sample rows");
            values.extend_from_slice(r.as_ref());
        }
        Self::from_vec(rows.len(), cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols.max(1))
    }

    /// Row averages of `z` and `z^2`, turning samples into [`EStepMoments`].
    pub fn row_moments(&self, with_second: bool) -> EStepMoments {
        let k = self.cols as f64;
        let mean = self.iter_rows().map(|r| r.iter().sum::<f64>() / k).collect();
        let second = with_second.then(|| {
            self.iter_rows()
                .map(|r| r.iter().map(|z| z * z).sum::<f64>() / k)
                .collect()
        });
        EStepMoments { mean, second }
    }
}

/// What an E-step strategy hands to the M-step.
#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    Moments(EStepMoments),
    Samples(SampleMatrix),
}
