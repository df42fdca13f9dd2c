use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{DataError, Dataset};

/// Gaussian blobs: one center per class drawn uniformly in the unit
/// hypercube, `per_class` points around each with isotropic noise of std
/// `spread`. Rows are class-major. Each feature is then min-max rescaled to
/// `[0, 1]` over the whole dataset.
pub fn synth_blobs<R: Rng + ?Sized>(
    num_classes: usize,
    dim: usize,
    per_class: usize,
    spread: f64,
    rng: &mut R,
) -> Result<Dataset, DataError> {
    if num_classes < 2 {
        return Err(DataError::InvalidParameter(
            "blobs need at least 2 classes".into(),
        ));
    }
    if dim == 0 || per_class == 0 {
        return Err(DataError::InvalidParameter(
            "dim and per_class must be at least 1".into(),
        ));
    }
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(DataError::InvalidParameter(format!(
            "spread must be positive, got {spread}"
        )));
    }
    let centers: Vec<f64> = (0..num_classes * dim)
        .map(|_| rng.random::<f64>())
        .collect();
    let noise = Normal::new(0.0, spread).expect("spread validated above");

    let mut features = Vec::with_capacity(num_classes * per_class * dim);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for class in 0..num_classes {
        let center = &centers[class * dim..(class + 1) * dim];
        for _ in 0..per_class {
            features.extend(center.iter().map(|c| c + noise.sample(rng)));
            labels.push(class);
        }
    }
    rescale_unit(&mut features, dim);
    Dataset::new(features, labels, dim, num_classes)
}

fn rescale_unit(features: &mut [f64], dim: usize) {
    for d in 0..dim {
        let column = features.iter().skip(d).step_by(dim);
        let (lo, hi) = column.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let span = hi - lo;
        for v in features.iter_mut().skip(d).step_by(dim) {
            *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
        }
    }
}
