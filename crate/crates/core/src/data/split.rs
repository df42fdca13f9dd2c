use rand::seq::SliceRandom;
use rand::Rng;

use super::{DataError, Dataset};

/// A client's local data: training rows, the validation rows used to value
/// coalitions, and held-out test rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientSplit {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Row counts `(train, validation, test)` for a slice of `n` rows.
///
/// Fractions round down; validation and test keep at least one row each,
/// and training keeps at least one.
pub fn split_sizes(
    n: usize,
    val_frac: f64,
    test_frac: f64,
) -> Result<(usize, usize, usize), DataError> {
    if !(val_frac > 0.0) || !(test_frac > 0.0) || !(val_frac + test_frac < 1.0) {
        return Err(DataError::InvalidParameter(format!(
            "validation/test fractions must be positive and sum below 1, got {val_frac}/{test_frac}"
        )));
    }
    if n < 3 {
        return Err(DataError::SliceTooSmall(n));
    }
    let mut val = ((n as f64 * val_frac).floor() as usize).max(1);
    let mut test = ((n as f64 * test_frac).floor() as usize).max(1);
    while val + test > n - 1 {
        if val >= test {
            val -= 1;
        } else {
            test -= 1;
        }
    }
    Ok((n - val - test, val, test))
}

/// Shuffles `slice` and cuts it into train/validation/test.
pub fn split_client<R: Rng + ?Sized>(
    slice: &Dataset,
    val_frac: f64,
    test_frac: f64,
    rng: &mut R,
) -> Result<ClientSplit, DataError> {
    let (train, val, _) = split_sizes(slice.len(), val_frac, test_frac)?;
    let mut order: Vec<usize> = (0..slice.len()).collect();
    order.shuffle(rng);
    Ok(ClientSplit {
        train: slice.subset(&order[..train]),
        validation: slice.subset(&order[train..train + val]),
        test: slice.subset(&order[train + val..]),
    })
}
