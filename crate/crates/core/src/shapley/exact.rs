use super::{Coalition, CoalitionGame, ShapleyError, ShapleyMethod, ShapleyResult};

/// Player bound for join-order enumeration (m! orders).
pub const PERMUTATION_PLAYER_LIMIT: usize = 10;
/// Player bound for the subset-weighted sum (m * 2^(m-1) terms).
pub const SUBSET_PLAYER_LIMIT: usize = 16;

fn check_limit(m: usize, limit: usize) -> Result<(), ShapleyError> {
    if m > limit {
        Err(ShapleyError::PlayerLimitExceeded { players: m, limit })
    } else {
        Ok(())
    }
}

/// Averages each player's marginal contribution over all `m!` join orders.
pub fn exact_shapley_permutation(game: &CoalitionGame<'_>) -> Result<ShapleyResult, ShapleyError> {
    let m = game.num_players();
    check_limit(m, PERMUTATION_PLAYER_LIMIT)?;
    let before = game.utility_eval_count();
    let table = game.utility_table();

    let mut totals = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut scan = |order: &[usize]| {
        let mut prefix = Coalition::EMPTY;
        let mut prev = 0.0;
        for &p in order {
            prefix = prefix.with(p);
            let cur = table[prefix.bits() as usize];
            totals[p] += cur - prev;
            prev = cur;
        }
    };

    // Heap's algorithm, iterative form.
    scan(&order);
    let mut counters = vec![0usize; m];
    let mut i = 1;
    let mut orders = 1u64;
    while i < m {
        if counters[i] < i {
            if i % 2 == 0 {
                order.swap(0, i);
            } else {
                order.swap(counters[i], i);
            }
            scan(&order);
            orders += 1;
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }

    let count = orders as f64;
    Ok(ShapleyResult {
        values: totals.into_iter().map(|t| t / count).collect(),
        method: ShapleyMethod::ExactPermutation,
        samples_used: 0,
        utility_evaluations: game.utility_eval_count() - before,
    })
}

/// Weighted sum over subsets: `sum_S |S|!(m-|S|-1)!/m! [v(S+i) - v(S)]`.
pub fn exact_shapley_subset(game: &CoalitionGame<'_>) -> Result<ShapleyResult, ShapleyError> {
    let m = game.num_players();
    check_limit(m, SUBSET_PLAYER_LIMIT)?;
    let before = game.utility_eval_count();
    let table = game.utility_table();

    // weight[s] = s!(m-s-1)!/m! = 1 / (m * C(m-1, s))
    let weights: Vec<f64> = (0..m)
        .map(|s| 1.0 / (m as f64 * binomial(m - 1, s)))
        .collect();

    let values = (0..m)
        .map(|player| {
            let bit = 1u64 << player;
            let mut total = 0.0;
            for bits in 0..(1u64 << m) {
                if bits & bit != 0 {
                    continue;
                }
                let size = bits.count_ones() as usize;
                let gain = table[(bits | bit) as usize] - table[bits as usize];
                total += weights[size] * gain;
            }
            total
        })
        .collect();

    Ok(ShapleyResult {
        values,
        method: ShapleyMethod::ExactSubset,
        samples_used: 0,
        utility_evaluations: game.utility_eval_count() - before,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Independent oracle: recursive enumeration of join orders on plain
    /// vectors, without bitmasks or the cache.
    fn brute_force(m: usize, v: &dyn Fn(&[usize]) -> f64) -> Vec<f64> {
        fn rec(
            prefix: &mut Vec<usize>,
            rest: &mut Vec<usize>,
            v: &dyn Fn(&[usize]) -> f64,
            acc: &mut [f64],
            count: &mut f64,
        ) {
            if rest.is_empty() {
                *count += 1.0;
                let mut set: Vec<usize> = Vec::new();
                let mut prev = 0.0;
                for &p in prefix.iter() {
                    set.push(p);
                    let cur = v(&set);
                    acc[p] += cur - prev;
                    prev = cur;
                }
                return;
            }
            for idx in 0..rest.len() {
                let p = rest.remove(idx);
                prefix.push(p);
                rec(prefix, rest, v, acc, count);
                prefix.pop();
                rest.insert(idx, p);
            }
        }
        let mut acc = vec![0.0; m];
        let mut count = 0.0;
        rec(
            &mut Vec::new(),
            &mut (0..m).collect(),
            v,
            &mut acc,
            &mut count,
        );
        acc.iter().map(|a| a / count).collect()
    }

    fn table_lookup(table: &[f64]) -> impl Fn(&[usize]) -> f64 + '_ {
        move |set: &[usize]| table[set.iter().map(|&p| 1usize << p).sum::<usize>()]
    }

    fn random_table(m: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut t: Vec<f64> = (0..1usize << m).map(|_| rng.random::<f64>()).collect();
        t[0] = 0.0;
        t
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    fn unanimity_pair() -> CoalitionGame<'static> {
        CoalitionGame::from_table(vec![0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn majority3() -> CoalitionGame<'static> {
        CoalitionGame::new(vec![0, 1, 2], |c| if c.len() >= 2 { 1.0 } else { 0.0 }).unwrap()
    }

    fn asymmetric_pair() -> CoalitionGame<'static> {
        CoalitionGame::from_table(vec![0.0, 1.0, 0.0, 2.0]).unwrap()
    }

    #[test]
    fn permutation_form_on_small_games() {
        let r = exact_shapley_permutation(&unanimity_pair()).unwrap();
        assert_close(&r.values, &[0.5, 0.5], 1e-15);
        let r = exact_shapley_permutation(&majority3()).unwrap();
        assert_close(&r.values, &[1.0 / 3.0; 3], 1e-15);
        // orders (1,2): 1 adds 1, 2 adds 1; (2,1): 2 adds 0, 1 adds 2
        let r = exact_shapley_permutation(&asymmetric_pair()).unwrap();
        assert_close(&r.values, &[1.5, 0.5], 1e-15);
        assert_eq!(r.method, ShapleyMethod::ExactPermutation);
        assert_eq!(r.samples_used, 0);
    }

    #[test]
    fn subset_form_matches_on_small_games() {
        for game in [unanimity_pair(), majority3(), asymmetric_pair()] {
            let a = exact_shapley_permutation(&game).unwrap();
            let b = exact_shapley_subset(&game).unwrap();
            assert_close(&a.values, &b.values, 1e-12);
        }
    }

    #[test]
    fn null_player_gets_exactly_zero() {
        // asymmetric pair plus player 2 that never changes the value
        let game = CoalitionGame::new(vec![0, 1, 2], |c| {
            let base = c.without(2).bits() as usize;
            [0.0, 1.0, 0.0, 2.0][base]
        })
        .unwrap();
        let r = exact_shapley_subset(&game).unwrap();
        assert_eq!(r.values[2], 0.0);
        assert_close(&r.values[..2], &[1.5, 0.5], 1e-12);
    }

    #[test]
    fn random_five_player_games_match_brute_force() {
        let mut rng = crate::rng::seeded(11);
        for _ in 0..20 {
            let table = random_table(5, &mut rng);
            let oracle = brute_force(5, &table_lookup(&table));
            let game = CoalitionGame::from_table(table.clone()).unwrap();
            let perm = exact_shapley_permutation(&game).unwrap();
            let sub = exact_shapley_subset(&game).unwrap();
            assert_close(&perm.values, &oracle, 1e-12);
            assert_close(&sub.values, &oracle, 1e-12);
        }
    }

    #[test]
    fn limits_are_enforced() {
        let game = CoalitionGame::new((0..11).collect(), |c| c.len() as f64).unwrap();
        assert_eq!(
            exact_shapley_permutation(&game),
            Err(ShapleyError::PlayerLimitExceeded {
                players: 11,
                limit: 10
            })
        );
        let game = CoalitionGame::new((0..17).collect(), |c| c.len() as f64).unwrap();
        assert!(matches!(
            exact_shapley_subset(&game),
            Err(ShapleyError::PlayerLimitExceeded { limit: 16, .. })
        ));
    }

    #[test]
    fn subset_form_handles_sixteen_players() {
        // additive game: each player's value is its own weight
        let game = CoalitionGame::new((0..16).collect(), |c| {
            c.positions().map(|p| p as f64 + 1.0).sum()
        })
        .unwrap();
        let r = exact_shapley_subset(&game).unwrap();
        for (p, v) in r.values.iter().enumerate() {
            assert!((v - (p as f64 + 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn eval_count_bounded_by_subsets() {
        let game = majority3();
        assert_eq!(game.utility_eval_count(), 0);
        let r = exact_shapley_subset(&game).unwrap();
        assert!(game.utility_eval_count() <= 8);
        assert_eq!(r.utility_evaluations, 7);
        // second pass is all cache hits
        let r = exact_shapley_permutation(&game).unwrap();
        assert_eq!(r.utility_evaluations, 0);
    }

    #[test]
    fn single_player_gets_full_value() {
        let game = CoalitionGame::from_table(vec![0.0, 0.7]).unwrap();
        assert_eq!(exact_shapley_permutation(&game).unwrap().values, vec![0.7]);
        assert_eq!(exact_shapley_subset(&game).unwrap().values, vec![0.7]);
    }
}
