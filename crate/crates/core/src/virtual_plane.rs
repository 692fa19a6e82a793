//! Virtual interest counters, frame-level cache placement and slot-level
//! mode selection / rate allocation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phy::RatePair;
use crate::traffic::ArrivalBatch;

/// VIP counters of users and BSs, one per object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VipState {
    pub n_users: usize,
    pub n_bs: usize,
    pub objects: usize,
    /// Indexed `j * objects + k`.
    pub user: Vec<f64>,
    /// Indexed `n * objects + k`.
    pub bs: Vec<f64>,
}

impl VipState {
    pub fn new(n_users: usize, n_bs: usize, objects: usize) -> Self {
        Self {
            n_users,
            n_bs,
            objects,
            user: vec![0.0; n_users * objects],
            bs: vec![0.0; n_bs * objects],
        }
    }

    pub fn user_row(&self, j: usize) -> &[f64] {
        &self.user[j * self.objects..(j + 1) * self.objects]
    }

    pub fn bs_row(&self, n: usize) -> &[f64] {
        &self.bs[n * self.objects..(n + 1) * self.objects]
    }

    pub fn total_backlog(&self) -> f64 {
        self.user.iter().sum::<f64>() + self.bs.iter().sum::<f64>()
    }
}

/// Cache contents of every BS plus the actions of the latest frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheState {
    pub n_bs: usize,
    pub objects: usize,
    pub capacity: usize,
    /// Indexed `n * objects + k`.
    pub stored: Vec<bool>,
    pub frame: u64,
    pub last_actions: Vec<i8>,
    pub cumulative_cost: f64,
}

impl CacheState {
    pub fn empty(n_bs: usize, objects: usize, capacity: usize) -> Self {
        Self {
            n_bs,
            objects,
            capacity,
            stored: vec![false; n_bs * objects],
            frame: 0,
            last_actions: vec![0; n_bs * objects],
            cumulative_cost: 0.0,
        }
    }

    pub fn is_cached(&self, n: usize, k: usize) -> bool {
        self.stored[n * self.objects + k]
    }

    pub fn occupancy(&self, n: usize) -> usize {
        self.stored[n * self.objects..(n + 1) * self.objects]
            .iter()
            .filter(|&&s| s)
            .count()
    }

    pub fn contents(&self, n: usize) -> Vec<usize> {
        (0..self.objects).filter(|&k| self.is_cached(n, k)).collect()
    }

    /// Applies `p`, checking redundancy and capacity; returns the frame's placement cost.
    pub fn apply(&mut self, p: &Placement, gamma: f64) -> Result<f64> {
        if p.actions.len() != self.stored.len() {
            return Err(Error::InvalidPlacement("placement shape mismatch".into()));
        }
        for (i, (&a, &s)) in p.actions.iter().zip(&self.stored).enumerate() {
            if (a == 1 && s) || (a == -1 && !s) || !(-1..=1).contains(&a) {
                return Err(Error::InvalidPlacement(format!(
                    "redundant action {a} on bs {} object {}",
                    i / self.objects,
                    i % self.objects
                )));
            }
        }
        let mut next = self.stored.clone();
        for (s, &a) in next.iter_mut().zip(&p.actions) {
            match a {
                1 => *s = true,
                -1 => *s = false,
                _ => {}
            }
        }
        for n in 0..self.n_bs {
            let used = next[n * self.objects..(n + 1) * self.objects]
                .iter()
                .filter(|&&s| s)
                .count();
            if used > self.capacity {
                return Err(Error::InvalidPlacement(format!(
                    "bs {n} holds {used} objects, capacity {}",
                    self.capacity
                )));
            }
        }
        self.stored = next;
        self.last_actions = p.actions.clone();
        self.frame += 1;
        let cost = p.cost(gamma);
        self.cumulative_cost += cost;
        Ok(cost)
    }
}

/// Per-frame actions `p_n^k` in {-1, 0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub objects: usize,
    pub actions: Vec<i8>,
}

impl Placement {
    pub fn none(n_bs: usize, objects: usize) -> Self {
        Self {
            objects,
            actions: vec![0; n_bs * objects],
        }
    }

    /// Actions that move `cache` to the target contents of every BS.
    pub fn towards(cache: &CacheState, targets: &[Vec<usize>]) -> Self {
        let mut p = Self::none(cache.n_bs, cache.objects);
        for (n, target) in targets.iter().enumerate() {
            let mut want = vec![false; cache.objects];
            for &k in target {
                want[k] = true;
            }
            for (k, &w) in want.iter().enumerate() {
                let have = cache.is_cached(n, k);
                p.actions[n * cache.objects + k] = (w as i8) - (have as i8);
            }
        }
        p
    }

    pub fn adds(&self, n: usize) -> usize {
        self.actions[n * self.objects..(n + 1) * self.objects]
            .iter()
            .filter(|&&a| a == 1)
            .count()
    }

    pub fn total_adds(&self) -> usize {
        self.actions.iter().filter(|&&a| a == 1).count()
    }

    pub fn cost(&self, gamma: f64) -> f64 {
        gamma * self.total_adds() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementParams {
    pub w: f64,
    pub frame_slots: u64,
    pub gamma: f64,
    pub read_rates: Vec<f64>,
    pub capacity: usize,
}

impl PlacementParams {
    pub fn threshold(&self) -> f64 {
        self.w / (2.0 * self.frame_slots as f64) * self.gamma
    }
}

/// Placement-dependent part of the frame drift bound; smaller is better.
pub fn drift_upper_bound(vip: &VipState, prev: &CacheState, p: &Placement, params: &PlacementParams) -> f64 {
    let k_total = vip.objects;
    let mut adds = 0usize;
    let mut served = 0.0;
    for n in 0..vip.n_bs {
        let r = params.read_rates[n];
        for k in 0..k_total {
            let i = n * k_total + k;
            let a = p.actions[i];
            if a == 1 {
                adds += 1;
            }
            let s_next = prev.stored[i] as i8 + a;
            if s_next != 0 {
                served += vip.bs[i] * r * s_next as f64;
            }
        }
    }
    params.w * params.gamma * adds as f64 - 2.0 * params.frame_slots as f64 * served
}

fn by_value_desc(v: &[f64], a: usize, b: usize) -> std::cmp::Ordering {
    v[b].total_cmp(&v[a]).then(a.cmp(&b))
}

/// Greedy add/swap placement for every BS from the frame-start VIP snapshot.
pub fn place_cache(vip: &VipState, cache: &CacheState, params: &PlacementParams) -> Placement {
    let mut p = Placement::none(cache.n_bs, cache.objects);
    let threshold = params.threshold();
    for n in 0..cache.n_bs {
        let v = vip.bs_row(n);
        let r = params.read_rates[n];
        let mut ranked: Vec<usize> = (0..cache.objects).collect();
        ranked.sort_by(|&a, &b| by_value_desc(v, a, b));
        ranked.truncate(params.capacity.min(cache.objects));
        let mut in_top = vec![false; cache.objects];
        for &k in &ranked {
            in_top[k] = true;
        }
        // `ranked` is already descending, so the filter keeps that order.
        let incoming: Vec<usize> = ranked.iter().copied().filter(|&k| !cache.is_cached(n, k)).collect();
        let mut outgoing: Vec<usize> = cache.contents(n).into_iter().filter(|&k| !in_top[k]).collect();
        outgoing.sort_by(|&a, &b| by_value_desc(v, b, a));

        let free = incoming.len().saturating_sub(outgoing.len());
        for (i, &k_new) in incoming.iter().enumerate() {
            if i < free {
                if v[k_new] * r >= threshold {
                    p.actions[n * cache.objects + k_new] = 1;
                }
            } else {
                let k_old = outgoing[i - free];
                if (v[k_new] - v[k_old]) * r >= threshold {
                    p.actions[n * cache.objects + k_new] = 1;
                    p.actions[n * cache.objects + k_old] = -1;
                }
            }
        }
    }
    p
}

/// Which PHY modes the controller may pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModeSet {
    Both,
    CoordinatedOnly,
}

/// Slot decision: the mode, each user's served object and rate in that mode,
/// and each BS's backhaul object and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub comp: bool,
    pub service: Vec<Option<(usize, f64)>>,
    pub backhaul: Vec<Option<(usize, f64)>>,
}

impl ControlDecision {
    pub fn idle(n_users: usize, n_bs: usize) -> Self {
        Self {
            comp: true,
            service: vec![None; n_users],
            backhaul: vec![None; n_bs],
        }
    }

    /// CoMP rate of user `j` for object `k`.
    pub fn mu_a(&self, j: usize, k: usize) -> f64 {
        match self.service[j] {
            Some((obj, rate)) if self.comp && obj == k => rate,
            _ => 0.0,
        }
    }

    /// Coordinated rate of user `j` for object `k`.
    pub fn mu_b(&self, j: usize, k: usize) -> f64 {
        match self.service[j] {
            Some((obj, rate)) if !self.comp && obj == k => rate,
            _ => 0.0,
        }
    }
}

/// Argmax with lowest-index tie-breaking.
fn argmax(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best
}

/// Sum of BS counters of object `k`, in BS order.
fn bs_sum(vip: &VipState, k: usize) -> f64 {
    (0..vip.n_bs).map(|n| vip.bs[n * vip.objects + k]).sum()
}

/// Backhaul, weighted allocation in each mode and the mode rule.
pub fn fast_control(
    vip: &VipState,
    rates: &RatePair,
    backhaul_rates: &[f64],
    serving: &[usize],
    modes: ModeSet,
) -> ControlDecision {
    let k_total = vip.objects;
    let backhaul = (0..vip.n_bs)
        .map(|n| {
            let r_d = backhaul_rates[n];
            if r_d > 0.0 {
                argmax(vip.bs_row(n).iter().copied()).map(|(k, _)| (k, r_d))
            } else {
                None
            }
        })
        .collect();

    let sums: Vec<f64> = (0..k_total).map(|k| bs_sum(vip, k)).collect();
    let mut pick_a = Vec::with_capacity(vip.n_users);
    let mut pick_b = Vec::with_capacity(vip.n_users);
    let (mut delta_a, mut delta_b) = (0.0, 0.0);
    for j in 0..vip.n_users {
        let vj = vip.user_row(j);
        let vn = vip.bs_row(serving[j]);
        let best_a = argmax((0..k_total).map(|k| vj[k] - sums[k]));
        let best_b = argmax((0..k_total).map(|k| vj[k] - vn[k]));
        let c_a = rates.comp.get(j).copied().unwrap_or(0.0);
        let c_b = rates.coord.get(j).copied().unwrap_or(0.0);
        pick_a.push(match best_a {
            Some((k, w)) if w > 0.0 && c_a > 0.0 => {
                delta_a += c_a * w;
                Some((k, c_a))
            }
            _ => None,
        });
        pick_b.push(match best_b {
            Some((k, w)) if w > 0.0 && c_b > 0.0 => {
                delta_b += c_b * w;
                Some((k, c_b))
            }
            _ => None,
        });
    }
    let comp = modes == ModeSet::Both && delta_a >= delta_b;
    ControlDecision {
        comp,
        service: if comp { pick_a } else { pick_b },
        backhaul,
    }
}

/// Decision-dependent part of the one-slot drift bound; smaller is better.
pub fn one_step_objective(vip: &VipState, dec: &ControlDecision, serving: &[usize]) -> f64 {
    let mut total = 0.0;
    for (j, s) in dec.service.iter().enumerate() {
        if let Some((k, rate)) = *s {
            let vj = vip.user[j * vip.objects + k];
            let other = if dec.comp {
                bs_sum(vip, k)
            } else {
                vip.bs[serving[j] * vip.objects + k]
            };
            total += rate * (other - vj);
        }
    }
    for (n, b) in dec.backhaul.iter().enumerate() {
        if let Some((k, rate)) = *b {
            total -= vip.bs[n * vip.objects + k] * rate;
        }
    }
    total
}

/// One slot of the VIP recursions using the decision's rates and the
/// pre-update state.
pub fn update_vip_queues(
    vip: &mut VipState,
    dec: &ControlDecision,
    arrivals: &ArrivalBatch,
    cache: &CacheState,
    read_rates: &[f64],
    serving: &[usize],
) {
    let k_total = vip.objects;
    // Inflow to BS counters, from the old user state's decision.
    let mut inflow = vec![0.0; vip.n_bs * k_total];
    for (j, s) in dec.service.iter().enumerate() {
        if let Some((k, rate)) = *s {
            let i = j * k_total + k;
            vip.user[i] = (vip.user[i] - rate).max(0.0);
            if dec.comp {
                for n in 0..vip.n_bs {
                    inflow[n * k_total + k] += rate;
                }
            } else {
                inflow[serving[j] * k_total + k] += rate;
            }
        }
    }
    for &(j, k, count) in &arrivals.entries {
        vip.user[j * k_total + k] += count as f64;
    }

    let mut drained = vec![0.0; vip.n_bs * k_total];
    for (n, b) in dec.backhaul.iter().enumerate() {
        if let Some((k, rate)) = *b {
            drained[n * k_total + k] = rate;
        }
    }
    for n in 0..vip.n_bs {
        for k in 0..k_total {
            let i = n * k_total + k;
            let cache_drain = if cache.stored[i] { read_rates[n] } else { 0.0 };
            vip.bs[i] = ((vip.bs[i] - drained[i]).max(0.0) + inflow[i] - cache_drain).max(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vip_with_bs(values: &[f64]) -> VipState {
        let mut v = VipState::new(1, 1, values.len());
        v.bs.copy_from_slice(values);
        v
    }

    fn params(threshold_gamma: f64, cap: usize) -> PlacementParams {
        // W / 2T = 1, so the threshold equals gamma.
        PlacementParams {
            w: 2.0,
            frame_slots: 1,
            gamma: threshold_gamma,
            read_rates: vec![1.0],
            capacity: cap,
        }
    }

    #[test]
    fn user_counter_clamps_then_adds() {
        let mut v = VipState::new(1, 1, 1);
        v.user[0] = 2.0;
        let dec = ControlDecision {
            comp: true,
            service: vec![Some((0, 5.0))],
            backhaul: vec![None],
        };
        let arrivals = ArrivalBatch {
            slot: 1,
            entries: vec![(0, 0, 1)],
        };
        let cache = CacheState::empty(1, 1, 1);
        update_vip_queues(&mut v, &dec, &arrivals, &cache, &[0.0], &[0]);
        assert_eq!(v.user[0], 1.0);
    }

    #[test]
    fn bs_counter_outer_clamp() {
        // Two users in CoMP feed one object; backhaul drains 1, cache drains 4.
        let mut v = VipState::new(2, 1, 1);
        v.bs[0] = 3.0;
        v.user = vec![5.0, 5.0];
        let dec = ControlDecision {
            comp: true,
            service: vec![Some((0, 1.0)), Some((0, 1.0))],
            backhaul: vec![Some((0, 1.0))],
        };
        let mut cache = CacheState::empty(1, 1, 1);
        cache.stored[0] = true;
        update_vip_queues(&mut v, &dec, &ArrivalBatch::default(), &cache, &[4.0], &[0, 0]);
        assert_eq!(v.bs[0], 0.0);
        // Without the cache drain the inner clamp alone would leave 2 + 2.
        let mut w = VipState::new(2, 1, 1);
        w.bs[0] = 3.0;
        w.user = vec![5.0, 5.0];
        update_vip_queues(
            &mut w,
            &dec,
            &ArrivalBatch::default(),
            &CacheState::empty(1, 1, 1),
            &[4.0],
            &[0, 0],
        );
        assert_eq!(w.bs[0], 4.0);
    }

    #[test]
    fn idle_update_is_fixed_point() {
        let mut v = VipState::new(2, 2, 3);
        v.user = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        v.bs = vec![0.5; 6];
        let before = v.clone();
        update_vip_queues(
            &mut v,
            &ControlDecision {
                comp: false,
                service: vec![None; 2],
                backhaul: vec![None; 2],
            },
            &ArrivalBatch::default(),
            &CacheState::empty(2, 3, 1),
            &[1.0, 1.0],
            &[0, 1],
        );
        assert_eq!(v, before);
    }

    #[test]
    fn placement_swaps_when_benefit_clears_threshold() {
        let vip = vip_with_bs(&[5.0, 3.0, 1.0]);
        let mut cache = CacheState::empty(1, 3, 1);
        cache.stored[1] = true;
        let p = place_cache(&vip, &cache, &params(1.0, 1));
        assert_eq!(p.actions, vec![1, -1, 0]);
    }

    #[test]
    fn placement_equal_benefit_swaps() {
        let vip = vip_with_bs(&[4.0, 3.0, 1.0]);
        let mut cache = CacheState::empty(1, 3, 1);
        cache.stored[1] = true;
        assert_eq!(place_cache(&vip, &cache, &params(1.0, 1)).actions, vec![1, -1, 0]);
        assert_eq!(
            place_cache(&vip, &cache, &params(1.0 + 1e-12, 1)).actions,
            vec![0, 0, 0]
        );
    }

    #[test]
    fn placement_idle_on_zero_backlog() {
        let vip = vip_with_bs(&[0.0; 4]);
        let cache = CacheState::empty(1, 4, 2);
        assert_eq!(place_cache(&vip, &cache, &params(0.5, 2)).total_adds(), 0);
    }

    #[test]
    fn placement_fills_free_slots_first() {
        let vip = vip_with_bs(&[9.0, 1.0, 7.0, 0.5]);
        let mut cache = CacheState::empty(1, 4, 3);
        cache.stored[3] = true;
        let p = place_cache(&vip, &cache, &params(0.8, 3));
        // Two free slots take objects 0 and 2; object 1 swaps with 3 (benefit 0.5 < 0.8).
        assert_eq!(p.actions, vec![1, 0, 1, 0]);
    }

    #[test]
    fn drift_bound_single_add() {
        let vip = vip_with_bs(&[3.0, 0.0]);
        let cache = CacheState::empty(1, 2, 1);
        let pr = PlacementParams {
            w: 10.0,
            frame_slots: 5,
            gamma: 2.0,
            read_rates: vec![0.5],
            capacity: 1,
        };
        let none = drift_upper_bound(&vip, &cache, &Placement::none(1, 2), &pr);
        let add = Placement {
            objects: 2,
            actions: vec![1, 0],
        };
        assert_eq!(none, 0.0);
        assert_eq!(
            drift_upper_bound(&vip, &cache, &add, &pr),
            10.0 * 2.0 - 2.0 * 5.0 * 3.0 * 0.5
        );
    }

    #[test]
    fn backhaul_takes_longest_queue() {
        let mut vip = VipState::new(1, 1, 3);
        vip.bs = vec![5.0, 3.0, 1.0];
        let rates = RatePair {
            comp: vec![1.0],
            coord: vec![1.0],
            scheduled: vec![0],
        };
        let dec = fast_control(&vip, &rates, &[2.0], &[0], ModeSet::Both);
        assert_eq!(dec.backhaul, vec![Some((0, 2.0))]);
    }

    #[test]
    fn zero_vips_pick_comp_and_serve_nothing() {
        let vip = VipState::new(2, 2, 3);
        let rates = RatePair {
            comp: vec![1.0, 1.0],
            coord: vec![0.5, 0.5],
            scheduled: vec![0, 1],
        };
        let dec = fast_control(&vip, &rates, &[1.0, 1.0], &[0, 1], ModeSet::Both);
        assert!(dec.comp);
        assert!(dec.service.iter().all(Option::is_none));
    }

    #[test]
    fn two_user_mode_choice_by_hand() {
        let mut vip = VipState::new(2, 2, 2);
        vip.user = vec![10.0, 0.0, 0.0, 8.0];
        vip.bs = vec![1.0; 4];
        let rates = RatePair {
            comp: vec![1.0, 1.0],
            coord: vec![0.5, 0.5],
            scheduled: vec![0, 1],
        };
        let dec = fast_control(&vip, &rates, &[0.0, 0.0], &[0, 1], ModeSet::Both);
        assert!(dec.comp);
        assert_eq!(dec.service, vec![Some((0, 1.0)), Some((1, 1.0))]);
        // Objective is minus the CoMP weight sum: 8 + 6.
        assert_eq!(one_step_objective(&vip, &dec, &[0, 1]), -14.0);
        let coord = fast_control(&vip, &rates, &[0.0, 0.0], &[0, 1], ModeSet::CoordinatedOnly);
        assert!(!coord.comp);
        assert_eq!(one_step_objective(&vip, &coord, &[0, 1]), -8.0);
    }

    #[test]
    fn apply_rejects_redundant_and_oversized() {
        let mut cache = CacheState::empty(1, 3, 1);
        cache.stored[0] = true;
        let redundant = Placement {
            objects: 3,
            actions: vec![1, 0, 0],
        };
        assert!(cache.apply(&redundant, 1.0).is_err());
        let oversize = Placement {
            objects: 3,
            actions: vec![0, 1, 0],
        };
        assert!(cache.apply(&oversize, 1.0).is_err());
        let swap = Placement {
            objects: 3,
            actions: vec![-1, 1, 0],
        };
        assert_eq!(cache.apply(&swap, 2.5).unwrap(), 2.5);
        assert_eq!(cache.contents(0), vec![1]);
    }

    proptest! {
        #[test]
        fn updates_keep_counters_nonnegative(
            users in proptest::collection::vec(0.0f64..10.0, 6),
            bs in proptest::collection::vec(0.0f64..10.0, 6),
            serve in proptest::collection::vec((0usize..3, 0.0f64..20.0), 2),
            back in proptest::collection::vec((0usize..3, 0.0f64..20.0), 2),
            comp in any::<bool>(),
            stored in proptest::collection::vec(any::<bool>(), 6),
            read in 0.0f64..5.0,
        ) {
            let mut v = VipState::new(2, 2, 3);
            v.user = users;
            v.bs = bs;
            let dec = ControlDecision {
                comp,
                service: serve.into_iter().map(Some).collect(),
                backhaul: back.into_iter().map(Some).collect(),
            };
            let mut cache = CacheState::empty(2, 3, 3);
            cache.stored = stored;
            update_vip_queues(&mut v, &dec, &ArrivalBatch::default(), &cache, &[read, read], &[0, 1]);
            prop_assert!(v.user.iter().chain(&v.bs).all(|&x| x >= 0.0));
        }

        #[test]
        fn placement_respects_cache_invariants(
            values in proptest::collection::vec(0.0f64..100.0, 8),
            stored in proptest::collection::vec(any::<bool>(), 8),
            cap in 0usize..5,
            gamma in 0.0f64..50.0,
        ) {
            let vip = vip_with_bs(&values);
            let mut cache = CacheState::empty(1, 8, cap);
            let mut held = 0;
            for (k, s) in stored.into_iter().enumerate() {
                if s && held < cap {
                    cache.stored[k] = true;
                    held += 1;
                }
            }
            let p = place_cache(&vip, &cache, &params(gamma, cap));
            prop_assert!(cache.apply(&p, gamma).is_ok());
            prop_assert!(cache.occupancy(0) <= cap);
        }

        #[test]
        fn decisions_use_one_mode(
            users in proptest::collection::vec(0.0f64..10.0, 6),
            bs in proptest::collection::vec(0.0f64..10.0, 6),
        ) {
            let mut v = VipState::new(2, 2, 3);
            v.user = users;
            v.bs = bs;
            let rates = RatePair { comp: vec![1.0, 0.7], coord: vec![0.6, 0.9], scheduled: vec![0, 1] };
            let dec = fast_control(&v, &rates, &[1.0, 1.0], &[0, 1], ModeSet::Both);
            for j in 0..2 {
                for k in 0..3 {
                    if dec.comp {
                        prop_assert_eq!(dec.mu_b(j, k), 0.0);
                    } else {
                        prop_assert_eq!(dec.mu_a(j, k), 0.0);
                    }
                }
            }
        }
    }
}
