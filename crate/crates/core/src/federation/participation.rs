use rand::seq::index;
use rand::Rng;

/// Uniformly random `ceil(fraction * n)` distinct client ids, ascending.
pub fn client_participation_sampler<R: Rng + ?Sized>(
    n: usize,
    fraction: f64,
    rng: &mut R,
) -> Vec<usize> {
    assert!(
        fraction > 0.0 && fraction <= 1.0,
        "participation fraction must be in (0, 1]"
    );
    // tolerate representation error such as 0.1 * 30 = 3.0000000000000004
    let count = ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1.min(n), n);
    if count == n {
        return (0..n).collect();
    }
    let mut ids = index::sample(rng, n, count).into_vec();
    ids.sort_unstable();
    ids
}
