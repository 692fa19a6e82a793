//! Exhaustive minimizers of the frame-level and slot-level drift bounds,
//! for checking the greedy controllers on small instances.

use crate::error::{Error, Result};
use crate::phy::RatePair;
use crate::virtual_plane::{
    drift_upper_bound, one_step_objective, CacheState, ControlDecision, ModeSet, Placement, PlacementParams, VipState,
};

pub const CACHE_ORACLE_MAX_OBJECTS: usize = 12;
pub const CACHE_ORACLE_MAX_CAPACITY: usize = 4;
pub const CONTROL_ORACLE_MAX_USERS: usize = 3;
pub const CONTROL_ORACLE_MAX_OBJECTS: usize = 5;

/// Every subset of `0..k` with at most `max` elements, as bit masks.
fn small_subsets(k: usize, max: usize) -> Vec<u32> {
    (0u32..(1 << k)).filter(|m| m.count_ones() as usize <= max).collect()
}

/// Minimizes the frame drift bound over every feasible cache content. BSs are
/// independent, so each is searched alone and the winners are combined.
pub fn brute_force_cache_oracle(
    vip: &VipState,
    prev: &CacheState,
    params: &PlacementParams,
) -> Result<(Placement, f64)> {
    let k = prev.objects;
    if k > CACHE_ORACLE_MAX_OBJECTS || params.capacity > CACHE_ORACLE_MAX_CAPACITY {
        return Err(Error::InstanceTooLarge(format!(
            "cache oracle supports K <= {CACHE_ORACLE_MAX_OBJECTS}, L_C <= {CACHE_ORACLE_MAX_CAPACITY}; got K = {k}, L_C = {}",
            params.capacity
        )));
    }
    let subsets = small_subsets(k, params.capacity);
    let mut full = Placement::none(prev.n_bs, k);
    for n in 0..prev.n_bs {
        let mut best: Option<(f64, Vec<i8>)> = None;
        for &mask in &subsets {
            let mut trial = Placement::none(prev.n_bs, k);
            for obj in 0..k {
                let want = (mask >> obj) & 1 == 1;
                trial.actions[n * k + obj] = want as i8 - prev.is_cached(n, obj) as i8;
            }
            let value = drift_upper_bound(vip, prev, &trial, params);
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, trial.actions[n * k..(n + 1) * k].to_vec()));
            }
        }
        let (_, actions) = best.expect("the empty set is always feasible");
        full.actions[n * k..(n + 1) * k].copy_from_slice(&actions);
    }
    let value = drift_upper_bound(vip, prev, &full, params);
    Ok((full, value))
}

/// Minimizes the slot objective over mode, each user's served object at its
/// full rate (or nothing), and each BS's backhaul object at full rate (or nothing).
pub fn brute_force_control_oracle(
    vip: &VipState,
    rates: &RatePair,
    backhaul_rates: &[f64],
    serving: &[usize],
    modes: ModeSet,
) -> Result<(ControlDecision, f64)> {
    let (n_users, n_bs, k) = (vip.n_users, vip.n_bs, vip.objects);
    if n_users > CONTROL_ORACLE_MAX_USERS || n_bs > CONTROL_ORACLE_MAX_USERS || k > CONTROL_ORACLE_MAX_OBJECTS {
        return Err(Error::InstanceTooLarge(format!(
            "control oracle supports N <= {CONTROL_ORACLE_MAX_USERS}, K <= {CONTROL_ORACLE_MAX_OBJECTS}; got N = {n_users}, K = {k}"
        )));
    }
    let choices = k + 1;
    let user_combos = choices.pow(n_users as u32);
    let bs_combos = choices.pow(n_bs as u32);
    let mode_options: &[bool] = match modes {
        ModeSet::Both => &[true, false],
        ModeSet::CoordinatedOnly => &[false],
    };

    let decode = |mut code: usize, count: usize, rate: &dyn Fn(usize) -> f64| -> Vec<Option<(usize, f64)>> {
        (0..count)
            .map(|i| {
                let c = code % choices;
                code /= choices;
                (c > 0).then(|| (c - 1, rate(i)))
            })
            .collect()
    };

    let mut best: Option<(ControlDecision, f64)> = None;
    for &comp in mode_options {
        let mode_rates = if comp { &rates.comp } else { &rates.coord };
        for u in 0..user_combos {
            let service = decode(u, n_users, &|j| mode_rates.get(j).copied().unwrap_or(0.0));
            for b in 0..bs_combos {
                let backhaul = decode(b, n_bs, &|n| backhaul_rates[n]);
                let dec = ControlDecision {
                    comp,
                    service: service.clone(),
                    backhaul,
                };
                let value = one_step_objective(vip, &dec, serving);
                if best.as_ref().is_none_or(|(_, v)| value < *v) {
                    best = Some((dec, value));
                }
            }
        }
    }
    Ok(best.expect("at least one mode is enumerated"))
}
