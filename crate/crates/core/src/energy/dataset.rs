use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::Scalar;

/// State-transition features drawn from the expert, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDataset<T> {
    features: Array2<T>,
}

impl<T: Scalar> ExpertDataset<T> {
    pub fn new(features: Array2<T>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::Empty("expert dataset"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("expert dataset".into()));
        }
        Ok(ExpertDataset { features })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("expert dataset"))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::dim("expert transition", dim, bad.len()));
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        ExpertDataset::new(Array2::from_shape_vec((rows.len(), dim), flat).expect("sized"))
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, T> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.features.row(i)
    }

    pub fn select(&self, indices: &[usize]) -> Array2<T> {
        self.features.select(Axis(0), indices)
    }

    pub fn mean(&self) -> Array1<T> {
        self.features.mean_axis(Axis(0)).expect("nonempty")
    }
}
