use crate::learner::LabeledBatch;

use super::DataError;

/// Row-major feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    class_count: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        dim: usize,
        class_count: usize,
    ) -> Result<Self, DataError> {
        let ds = Self::new_unchecked_len(features, labels, dim, class_count)?;
        if ds.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        Ok(ds)
    }

    /// Like `new` but allows zero rows; used for client slices.
    pub(crate) fn new_unchecked_len(
        features: Vec<f64>,
        labels: Vec<usize>,
        dim: usize,
        class_count: usize,
    ) -> Result<Self, DataError> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(DataError::DimensionMismatch(format!(
                "{} feature values for {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(DataError::LabelOutOfRange {
                label: bad,
                class_count,
            });
        }
        Ok(Dataset {
            features,
            labels,
            dim,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn batch(&self) -> LabeledBatch<'_> {
        LabeledBatch::new(&self.features, &self.labels, self.dim)
            .expect("dataset shape is validated on construction")
    }

    /// Copies the listed rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            dim: self.dim,
            class_count: self.class_count,
        }
    }

    /// Count of rows per class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices grouped by class.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }
}
