//! Comparison policies: static popularity caching, frame-cadence LFU, and
//! VIP control restricted to coordinated transmission.

use serde::{Deserialize, Serialize};

use crate::traffic::{ArrivalBatch, Catalog};
use crate::virtual_plane::{CacheState, ModeSet, Placement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Proposed,
    Offline,
    Lfu,
    VipSingle,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Proposed, Policy::Offline, Policy::Lfu, Policy::VipSingle];

    pub fn modes(self) -> ModeSet {
        match self {
            Policy::VipSingle => ModeSet::CoordinatedOnly,
            _ => ModeSet::Both,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Policy::Proposed => "proposed",
            Policy::Offline => "offline",
            Policy::Lfu => "lfu",
            Policy::VipSingle => "vip-single",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy '{s}'"))
    }
}

/// Indices of the `count` largest values, lowest index first on ties.
pub fn top_indices(values: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(count.min(values.len()));
    idx.sort_unstable();
    idx
}

/// Most popular objects by aggregate arrival rate, identical at every BS.
pub fn offline_placement(catalog: &Catalog, lambda: f64, n_bs: usize, capacity: usize) -> Vec<Vec<usize>> {
    let top = top_indices(&catalog.aggregate_rates(lambda), capacity);
    vec![top; n_bs]
}

/// Request counts seen by each BS from its own users.
#[derive(Debug, Clone, PartialEq)]
pub struct LfuCounters {
    pub objects: usize,
    pub counts: Vec<u64>,
    pub reset_every: Option<u64>,
    frames: u64,
}

impl LfuCounters {
    pub fn new(n_bs: usize, objects: usize, reset_every: Option<u64>) -> Self {
        Self {
            objects,
            counts: vec![0; n_bs * objects],
            reset_every,
            frames: 0,
        }
    }

    pub fn record(&mut self, arrivals: &ArrivalBatch, serving: &[usize]) {
        for &(j, k, c) in &arrivals.entries {
            self.counts[serving[j] * self.objects + k] += c as u64;
        }
    }

    fn count(&self, n: usize, k: usize) -> u64 {
        self.counts[n * self.objects + k]
    }

    /// Frame-boundary update of every BS cache. Frequently requested objects
    /// fill free space, then displace the least requested cached object while
    /// strictly more popular.
    pub fn step(&mut self, cache: &CacheState) -> Placement {
        let mut targets = Vec::with_capacity(cache.n_bs);
        for n in 0..cache.n_bs {
            let mut held: Vec<usize> = cache.contents(n);
            let mut outside: Vec<usize> = (0..cache.objects).filter(|&k| !cache.is_cached(n, k)).collect();
            // Most requested first, lowest index on ties.
            outside.sort_by(|&a, &b| self.count(n, b).cmp(&self.count(n, a)).then(a.cmp(&b)));
            let mut candidates = outside.into_iter().peekable();
            while held.len() < cache.capacity {
                match candidates.next_if(|&k| self.count(n, k) > 0) {
                    Some(k) => held.push(k),
                    None => break,
                }
            }
            for k in candidates {
                let Some(pos) = (0..held.len()).min_by(|&a, &b| {
                    self.count(n, held[a])
                        .cmp(&self.count(n, held[b]))
                        .then(held[a].cmp(&held[b]))
                }) else {
                    break;
                };
                if self.count(n, k) <= self.count(n, held[pos]) {
                    break;
                }
                held[pos] = k;
            }
            targets.push(held);
        }
        self.frames += 1;
        if self.reset_every.is_some_and(|e| e > 0 && self.frames % e == 0) {
            self.counts.iter_mut().for_each(|c| *c = 0);
        }
        Placement::towards(cache, &targets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RngStreams;

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("lru".parse::<Policy>().is_err());
        assert_eq!(Policy::VipSingle.modes(), ModeSet::CoordinatedOnly);
    }

    #[test]
    fn identical_preferences_give_identical_caches() {
        let cat = Catalog::generate(&RngStreams::new(1), 3, 50, 20, 0.8, true).unwrap();
        let p = offline_placement(&cat, 0.3, 3, 5);
        let mut expected = cat.catalogs[0][..5].to_vec();
        expected.sort_unstable();
        assert!(p.iter().all(|c| c == &expected));
    }

    #[test]
    fn disjoint_catalogs_follow_aggregate_sort() {
        let cat = Catalog::from_catalogs(6, 1.0, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let agg = cat.aggregate_rates(1.0);
        let mut order: Vec<usize> = (0..6).collect();
        order.sort_by(|&a, &b| agg[b].partial_cmp(&agg[a]).unwrap().then(a.cmp(&b)));
        let mut expected = order[..3].to_vec();
        expected.sort_unstable();
        assert_eq!(offline_placement(&cat, 1.0, 2, 3)[1], expected);
        assert_eq!(expected, vec![0, 1, 3]);
    }

    #[test]
    fn full_capacity_caches_everything() {
        let cat = Catalog::generate(&RngStreams::new(2), 2, 10, 10, 0.5, false).unwrap();
        assert_eq!(offline_placement(&cat, 1.0, 2, 10)[0], (0..10).collect::<Vec<_>>());
    }

    fn cache_with(objects: usize, cap: usize, held: &[usize]) -> CacheState {
        let mut c = CacheState::empty(1, objects, cap);
        for &k in held {
            c.stored[k] = true;
        }
        c
    }

    #[test]
    fn lfu_ties_do_not_swap() {
        let cache = cache_with(3, 1, &[0]);
        let mut lfu = LfuCounters::new(1, 3, None);
        lfu.counts = vec![4, 4, 4];
        assert_eq!(lfu.step(&cache).total_adds(), 0);
    }

    #[test]
    fn lfu_surge_replaces_minimum() {
        let cache = cache_with(4, 2, &[0, 1]);
        let mut lfu = LfuCounters::new(1, 4, None);
        lfu.counts = vec![5, 2, 3, 1];
        let p = lfu.step(&cache);
        assert_eq!(p.actions, vec![0, -1, 1, 0]);
    }

    #[test]
    fn lfu_fills_free_space_with_requested_objects() {
        let cache = cache_with(4, 3, &[]);
        let mut lfu = LfuCounters::new(1, 4, None);
        lfu.counts = vec![0, 2, 0, 1];
        assert_eq!(lfu.step(&cache).actions, vec![0, 1, 0, 1]);
    }

    #[test]
    fn lfu_counts_only_own_users() {
        let mut lfu = LfuCounters::new(2, 2, None);
        lfu.record(
            &ArrivalBatch {
                slot: 1,
                entries: vec![(0, 1, 3), (1, 0, 2)],
            },
            &[0, 1],
        );
        assert_eq!(lfu.counts, vec![0, 3, 2, 0]);
    }

    #[test]
    fn lfu_reset_epoch_clears_counts() {
        let cache = cache_with(2, 1, &[]);
        let mut lfu = LfuCounters::new(1, 2, Some(2));
        lfu.counts = vec![3, 1];
        lfu.step(&cache);
        assert_eq!(lfu.counts, vec![3, 1]);
        lfu.step(&cache);
        assert_eq!(lfu.counts, vec![0, 0]);
    }

    #[test]
    fn lfu_converges_to_popular_set() {
        use crate::traffic::TrafficModel;
        let cat = Catalog::from_catalogs(30, 1.0, vec![(0..30).rev().collect()]).unwrap();
        let model = TrafficModel::new(cat, 1.0).unwrap();
        let streams = RngStreams::new(4);
        let mut cache = CacheState::empty(1, 30, 5);
        let mut lfu = LfuCounters::new(1, 30, None);
        for frame in 0..400u64 {
            for s in 0..25u64 {
                lfu.record(&model.generate(&streams, frame * 25 + s + 1), &[0]);
            }
            let p = lfu.step(&cache);
            cache.apply(&p, 1.0).unwrap();
        }
        assert_eq!(cache.contents(0), vec![25, 26, 27, 28, 29]);
    }
}
