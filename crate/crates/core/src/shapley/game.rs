use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::ShapleyError;

/// Largest player count a bitmask key can address.
pub const MAX_PLAYERS: usize = 63;

/// A subset of a game's players, as a bitmask over the ordered player list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_bits(bits: u64) -> Self {
        Coalition(bits)
    }

    /// The coalition holding every one of `m` players.
    pub fn full(m: usize) -> Self {
        debug_assert!(m <= MAX_PLAYERS);
        Coalition((1u64 << m) - 1)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, position: usize) -> bool {
        self.0 & (1 << position) != 0
    }

    pub fn with(self, position: usize) -> Self {
        Coalition(self.0 | (1 << position))
    }

    pub fn without(self, position: usize) -> Self {
        Coalition(self.0 & !(1 << position))
    }

    /// Player positions in ascending order.
    pub fn positions(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let p = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(p)
            }
        })
    }
}

/// Memoized utility values keyed by coalition bitmask.
///
/// Each entry is computed at most once even under concurrent access: a
/// missing key installs a `OnceLock` that the first caller fills.
#[derive(Debug, Default)]
pub struct UtilityCache {
    entries: Mutex<HashMap<u64, Arc<OnceLock<f64>>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl UtilityCache {
    fn get_or_compute(&self, key: u64, compute: impl FnOnce() -> f64) -> f64 {
        let cell = {
            let mut entries = self.entries.lock().expect("utility cache poisoned");
            Arc::clone(entries.entry(key).or_default())
        };
        let mut computed = false;
        let value = *cell.get_or_init(|| {
            computed = true;
            compute()
        });
        if computed {
            self.misses.fetch_add(1, Ordering::Relaxed);
        } else {
            self.hits.fetch_add(1, Ordering::Relaxed);
        }
        value
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("utility cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Computed entries sorted by key.
    pub fn snapshot(&self) -> Vec<(u64, f64)> {
        let entries = self.entries.lock().expect("utility cache poisoned");
        let mut out: Vec<(u64, f64)> = entries
            .iter()
            .filter_map(|(&k, cell)| cell.get().map(|&v| (k, v)))
            .collect();
        out.sort_unstable_by_key(|&(k, _)| k);
        out
    }
}

type UtilityFn<'a> = dyn Fn(Coalition) -> f64 + Send + Sync + 'a;

/// A cooperative game: an ordered player list and a utility over subsets.
///
/// The empty coalition is worth exactly 0 and is never passed to the
/// utility callback. The callback must be deterministic.
pub struct CoalitionGame<'a> {
    players: Vec<usize>,
    utility: Box<UtilityFn<'a>>,
    cache: UtilityCache,
}

impl std::fmt::Debug for CoalitionGame<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoalitionGame")
            .field("players", &self.players)
            .field("cache", &self.cache)
            .finish_non_exhaustive()
    }
}

impl<'a> CoalitionGame<'a> {
    pub fn new<F>(players: Vec<usize>, utility: F) -> Result<Self, ShapleyError>
    where
        F: Fn(Coalition) -> f64 + Send + Sync + 'a,
    {
        if players.is_empty() {
            return Err(ShapleyError::NoPlayers);
        }
        if players.len() > MAX_PLAYERS {
            return Err(ShapleyError::PlayerLimitExceeded {
                players: players.len(),
                limit: MAX_PLAYERS,
            });
        }
        Ok(CoalitionGame {
            players,
            utility: Box::new(utility),
            cache: UtilityCache::default(),
        })
    }

    /// Game with players `0..m` whose utility is read from a dense table
    /// indexed by coalition bits. Entry 0 is ignored.
    pub fn from_table(table: Vec<f64>) -> Result<Self, ShapleyError> {
        let m = table.len().trailing_zeros() as usize;
        if table.len() < 2 || !table.len().is_power_of_two() {
            return Err(ShapleyError::NoPlayers);
        }
        CoalitionGame::new((0..m).collect(), move |c| table[c.bits() as usize])
    }

    pub fn players(&self) -> &[usize] {
        &self.players
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    /// Player ids belonging to `coalition`.
    pub fn members_of(&self, coalition: Coalition) -> Vec<usize> {
        coalition.positions().map(|p| self.players[p]).collect()
    }

    pub fn value(&self, coalition: Coalition) -> f64 {
        if coalition.is_empty() {
            return 0.0;
        }
        self.cache
            .get_or_compute(coalition.bits(), || (self.utility)(coalition))
    }

    /// Evaluates every listed coalition, possibly in parallel.
    pub fn prefetch(&self, coalitions: &[Coalition]) {
        coalitions.par_iter().for_each(|&c| {
            self.value(c);
        });
    }

    /// Dense table of all `2^m` utilities, indexed by coalition bits.
    pub fn utility_table(&self) -> Vec<f64> {
        let size = 1usize << self.players.len();
        (0..size as u64)
            .into_par_iter()
            .map(|bits| self.value(Coalition(bits)))
            .collect()
    }

    /// Distinct utility computations performed so far (cache misses).
    pub fn utility_eval_count(&self) -> u64 {
        self.cache.misses()
    }

    pub fn cache(&self) -> &UtilityCache {
        &self.cache
    }

    /// Writes `subset_mask,utility` rows for every cached coalition.
    pub fn write_cache_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "subset_mask,utility")?;
        for (mask, value) in self.cache.snapshot() {
            writeln!(out, "{mask},{value}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    #[test]
    fn empty_coalition_never_reaches_callback() {
        let calls = AtomicUsize::new(0);
        let game = CoalitionGame::new(vec![0, 1], |c| {
            assert!(!c.is_empty());
            calls.fetch_add(1, Ordering::SeqCst);
            c.len() as f64
        })
        .unwrap();
        assert_eq!(game.value(Coalition::EMPTY), 0.0);
        assert_eq!(calls.load(Ordering::SeqCst), 0);
        assert_eq!(game.utility_eval_count(), 0);
    }

    #[test]
    fn each_subset_computed_once() {
        let calls = AtomicUsize::new(0);
        let game = CoalitionGame::new((0..4).collect(), |c| {
            calls.fetch_add(1, Ordering::SeqCst);
            c.bits() as f64
        })
        .unwrap();
        for _ in 0..3 {
            game.utility_table();
        }
        assert_eq!(calls.load(Ordering::SeqCst), 15);
        assert_eq!(game.utility_eval_count(), 15);
        assert!(game.cache().len() <= 16);
    }

    #[test]
    fn positions_iterate_ascending() {
        let c = Coalition::from_bits(0b1011_0010);
        assert_eq!(c.positions().collect::<Vec<_>>(), vec![1, 4, 5, 7]);
        assert_eq!(c.len(), 4);
        assert!(c.contains(4) && !c.contains(3));
        assert_eq!(c.without(4).with(3).bits(), 0b1010_1010);
    }

    #[test]
    fn cache_dump_is_sorted_csv() {
        let game = CoalitionGame::from_table(vec![0.0, 0.5, 0.25, 1.0]).unwrap();
        game.value(Coalition::from_bits(3));
        game.value(Coalition::from_bits(1));
        let mut buf = Vec::new();
        game.write_cache_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "subset_mask,utility\n1,0.5\n3,1\n"
        );
    }

    #[test]
    fn rejects_empty_player_list() {
        assert!(matches!(
            CoalitionGame::new(vec![], |_| 0.0),
            Err(ShapleyError::NoPlayers)
        ));
    }
}
