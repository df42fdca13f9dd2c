use std::io::{self, Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ArchitectureSpec, LearnerError};

/// Flat model parameters together with the architecture that lays them out.
///
/// The length always equals `arch.param_count()` and every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub(super) arch: ArchitectureSpec,
    pub(super) values: Vec<f64>,
}

impl ParamVector {
    pub fn new(arch: ArchitectureSpec, values: Vec<f64>) -> Result<Self, LearnerError> {
        arch.validate()?;
        if values.len() != arch.param_count() {
            return Err(LearnerError::DimensionMismatch {
                expected: arch.param_count(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LearnerError::NonFiniteParameters);
        }
        Ok(ParamVector { arch, values })
    }

    pub fn zeros(arch: ArchitectureSpec) -> Self {
        ParamVector {
            values: vec![0.0; arch.param_count()],
            arch,
        }
    }

    pub fn arch(&self) -> &ArchitectureSpec {
        &self.arch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Checkpoint encoding: `input_dim`, `hidden_dim` (0 for none) and
    /// `num_classes` as little-endian u32, then the values as little-endian
    /// f64.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header = [
            self.arch.input_dim,
            self.arch.hidden_dim.unwrap_or(0),
            self.arch.num_classes,
        ];
        for dim in header {
            let dim = u32::try_from(dim).map_err(|_| {
                io::Error::new(io::ErrorKind::InvalidInput, "dimension exceeds u32")
            })?;
            out.write_all(&dim.to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(12 + 8 * self.values.len());
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, LearnerError> {
        let mut word = [0u8; 4];
        let mut header = [0usize; 3];
        for slot in &mut header {
            input
                .read_exact(&mut word)
                .map_err(|_| LearnerError::TruncatedCheckpoint)?;
            *slot = u32::from_le_bytes(word) as usize;
        }
        let hidden = (header[1] != 0).then_some(header[1]);
        let arch = ArchitectureSpec::new(header[0], hidden, header[2])?;
        let mut values = Vec::with_capacity(arch.param_count());
        let mut buf = [0u8; 8];
        for _ in 0..arch.param_count() {
            input
                .read_exact(&mut buf)
                .map_err(|_| LearnerError::TruncatedCheckpoint)?;
            values.push(f64::from_le_bytes(buf));
        }
        ParamVector::new(arch, values)
    }
}

/// How `param_distance` measures the gap between two models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// Euclidean norm of the difference.
    #[default]
    L2,
    /// Squared Euclidean norm.
    L2Sq,
}

fn check_same_arch<'a>(
    mut members: impl Iterator<Item = &'a ParamVector>,
) -> Result<ArchitectureSpec, LearnerError> {
    let first = members.next().ok_or(LearnerError::EmptyCoalition)?;
    if members.any(|m| m.arch != first.arch) {
        return Err(LearnerError::ArchMismatch);
    }
    Ok(first.arch)
}

/// Sums terms in ascending order so the result does not depend on the
/// order members were supplied in.
fn ordered_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Elementwise arithmetic mean.
pub fn average_params(members: &[&ParamVector]) -> Result<ParamVector, LearnerError> {
    let arch = check_same_arch(members.iter().copied())?;
    if members.len() == 1 {
        return Ok(members[0].clone());
    }
    let count = members.len() as f64;
    let mut terms = vec![0.0; members.len()];
    let values = (0..arch.param_count())
        .map(|k| {
            for (t, m) in terms.iter_mut().zip(members) {
                *t = m.values[k];
            }
            ordered_sum(&mut terms) / count
        })
        .collect();
    Ok(ParamVector { arch, values })
}

/// Elementwise `sum_j w_j * theta_j`; weights must be non-negative and sum
/// to one.
pub fn weighted_aggregate(members: &[(&ParamVector, f64)]) -> Result<ParamVector, LearnerError> {
    let arch = check_same_arch(members.iter().map(|(p, _)| *p))?;
    let total: f64 = members.iter().map(|(_, w)| w).sum();
    if members.iter().any(|(_, w)| !(*w >= 0.0)) || (total - 1.0).abs() >= 1e-9 {
        return Err(LearnerError::WeightsNotNormalized { sum: total });
    }
    let mut terms = vec![0.0; members.len()];
    let values = (0..arch.param_count())
        .map(|k| {
            for (t, (m, w)) in terms.iter_mut().zip(members) {
                *t = w * m.values[k];
            }
            ordered_sum(&mut terms)
        })
        .collect();
    Ok(ParamVector { arch, values })
}

pub fn param_distance(
    a: &ParamVector,
    b: &ParamVector,
    metric: DistanceMetric,
) -> Result<f64, LearnerError> {
    if a.arch != b.arch {
        return Err(LearnerError::ArchMismatch);
    }
    let sq: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(match metric {
        DistanceMetric::L2 => sq.sqrt(),
        DistanceMetric::L2Sq => sq,
    })
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every coordinate.
pub fn add_gaussian_noise<R: Rng + ?Sized>(
    params: &ParamVector,
    sigma: f64,
    rng: &mut R,
) -> Result<ParamVector, LearnerError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(LearnerError::InvalidHyperparameter(format!(
            "noise sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(params.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated above");
    let values = params
        .values
        .iter()
        .map(|v| v + normal.sample(rng))
        .collect();
    ParamVector::new(params.arch, values)
}
