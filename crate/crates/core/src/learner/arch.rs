use serde::{Deserialize, Serialize};

use super::LearnerError;

/// Shape shared by every client's model: a softmax-linear classifier, or a
/// one-hidden-layer ReLU network when `hidden_dim` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub input_dim: usize,
    pub hidden_dim: Option<usize>,
    pub num_classes: usize,
}

impl ArchitectureSpec {
    pub fn new(
        input_dim: usize,
        hidden_dim: Option<usize>,
        num_classes: usize,
    ) -> Result<Self, LearnerError> {
        let arch = ArchitectureSpec {
            input_dim,
            hidden_dim,
            num_classes,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn linear(input_dim: usize, num_classes: usize) -> Result<Self, LearnerError> {
        Self::new(input_dim, None, num_classes)
    }

    pub fn mlp(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
    ) -> Result<Self, LearnerError> {
        Self::new(input_dim, Some(hidden_dim), num_classes)
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.input_dim == 0 {
            return Err(LearnerError::InvalidArchitecture(
                "input_dim must be at least 1".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(LearnerError::InvalidArchitecture(
                "num_classes must be at least 2".into(),
            ));
        }
        if self.hidden_dim == Some(0) {
            return Err(LearnerError::InvalidArchitecture(
                "hidden_dim must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Layers as `(fan_in, fan_out)` pairs.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        match self.hidden_dim {
            None => vec![(self.input_dim, self.num_classes)],
            Some(h) => vec![(self.input_dim, h), (h, self.num_classes)],
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|&(i, o)| i * o + o).sum()
    }
}
