//! Randomized equivalence checks between the controllers and their
//! exhaustive oracles, the closed-form DoF and its grid search, and the ZF
//! precoders' nulling and power properties.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::dof::{grid_alpha_oracle, max_sum_dof, RegionParams};
use crate::analysis::oracles::{brute_force_cache_oracle, brute_force_control_oracle};
use crate::error::Result;
use crate::model::{RngStreams, UnitContext};
use crate::phy::{comp_zf_rates, coordinated_zf_rates, sample_schedule, ChannelModel, RatePair};
use crate::traffic::zipf_popularity;
use crate::virtual_plane::{
    drift_upper_bound, fast_control, one_step_objective, place_cache, CacheState, ModeSet, PlacementParams, VipState,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest discrepancy seen, in the suite's own units.
    pub worst: f64,
    pub elapsed_s: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn finish(name: &'static str, start: Instant, outcomes: Vec<(bool, f64)>) -> SuiteResult {
    SuiteResult {
        name,
        trials: outcomes.len(),
        failures: outcomes.iter().filter(|o| !o.0).count(),
        worst: outcomes.iter().map(|o| o.1).fold(0.0, f64::max),
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

/// A random small placement instance: VIPs uniform on [0, 100], random prior
/// cache, weight and price.
pub fn random_cache_instance(rng: &mut ChaCha8Rng) -> (VipState, CacheState, PlacementParams) {
    let n = rng.random_range(1..=3);
    let k = rng.random_range(1..=10);
    let cap = rng.random_range(0..=3usize.min(k));
    let mut vip = VipState::new(n, n, k);
    for v in vip.bs.iter_mut() {
        *v = rng.random_range(0.0..100.0);
    }
    let mut cache = CacheState::empty(n, k, cap);
    for bs in 0..n {
        let held = rng.random_range(0..=cap);
        for obj in rand::seq::index::sample(rng, k, held) {
            cache.stored[bs * k + obj] = true;
        }
    }
    let params = PlacementParams {
        w: 10f64.powf(rng.random_range(-1.0..3.0)),
        frame_slots: rng.random_range(1..=100),
        gamma: rng.random_range(0.0..50.0),
        read_rates: (0..n).map(|_| rng.random_range(0.01..2.0)).collect(),
        capacity: cap,
    };
    (vip, cache, params)
}

/// A random small control instance with random VIPs and rate points.
pub fn random_control_instance(rng: &mut ChaCha8Rng) -> (VipState, RatePair, Vec<f64>, Vec<usize>) {
    let n = rng.random_range(1..=3);
    let k = rng.random_range(1..=5);
    let mut vip = VipState::new(n, n, k);
    for v in vip.user.iter_mut().chain(vip.bs.iter_mut()) {
        *v = rng.random_range(0.0..100.0);
    }
    let scheduled = sample_schedule(rng, n, 2);
    let comp: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    let coord: Vec<f64> = (0..n)
        .map(|j| {
            if scheduled.contains(&j) {
                rng.random_range(0.0..2.0)
            } else {
                0.0
            }
        })
        .collect();
    let backhaul = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    (vip, RatePair { comp, coord, scheduled }, backhaul, (0..n).collect())
}

pub fn cache_oracle_suite(trials: usize, seed: u64) -> Result<SuiteResult> {
    let start = Instant::now();
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let (vip, cache, params) = random_cache_instance(&mut rng);
            let greedy = drift_upper_bound(&vip, &cache, &place_cache(&vip, &cache, &params), &params);
            let (_, best) = brute_force_cache_oracle(&vip, &cache, &params)?;
            Ok((greedy == best, (greedy - best).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish("cache placement vs exhaustive search", start, outcomes))
}

pub fn control_oracle_suite(trials: usize, seed: u64) -> Result<SuiteResult> {
    let start = Instant::now();
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let (vip, rates, backhaul, serving) = random_control_instance(&mut rng);
            let dec = fast_control(&vip, &rates, &backhaul, &serving, ModeSet::Both);
            let fast = one_step_objective(&vip, &dec, &serving);
            let (_, best) = brute_force_control_oracle(&vip, &rates, &backhaul, &serving, ModeSet::Both)?;
            Ok((fast == best, (fast - best).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish("slot control vs exhaustive search", start, outcomes))
}

/// Random region parameters: N in 2..=7, skewness in [0, 2], any cache size,
/// backhaul log-uniform around the full-CoMP threshold.
pub fn random_region(rng: &mut ChaCha8Rng) -> RegionParams {
    let n = rng.random_range(2..=7);
    let k = rng.random_range(2..=40);
    let cache_size = rng.random_range(0..=k);
    let popularity = zipf_popularity(k, rng.random_range(0.0..2.0)).expect("valid zipf");
    let tail: f64 = popularity[cache_size..].iter().sum();
    let scale = if tail > 0.0 { n as f64 * tail } else { 1.0 };
    RegionParams {
        n,
        cache_size,
        popularity,
        backhaul: scale * 10f64.powf(rng.random_range(-3.0..1.0)),
        read_rate: 2.0 * n as f64,
        d_a: 1.0,
        d_b: rng.random_range(0.05..=1.0),
    }
}

pub fn dof_suite(draws: usize, seed: u64) -> Result<SuiteResult> {
    let start = Instant::now();
    let outcomes = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let p = random_region(&mut rng);
            let closed = max_sum_dof(&p)?.d_star;
            let (grid, _) = grid_alpha_oracle(&p, 1e-4)?;
            let gap = (closed - grid).abs();
            Ok((gap <= 1e-3, gap))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish("closed-form DoF vs grid search", start, outcomes))
}

/// Relative interference leakage and power overshoot of both precoders over random channels.
pub fn zf_suite(channels: usize, seed: u64) -> Result<SuiteResult> {
    let start = Instant::now();
    let units = UnitContext::default();
    let n = 3;
    let model = ChannelModel::unit(n, 2, 1);
    let streams = RngStreams::new(seed);
    let serving: Vec<usize> = (0..n).collect();
    let power = 1e4;
    let mut outcomes = Vec::with_capacity(channels);
    for t in 1..=channels as u64 {
        let ch = model.sample(&streams, t);
        let comp = comp_zf_rates(&ch, power, &units)?;
        let eff = ch.composite() * &comp.precoder;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in (0..n).filter(|&k| k != j) {
                worst = worst.max(eff[(j, k)].norm() / eff[(j, j)].norm());
            }
        }
        let peak = comp.bs_powers(2).into_iter().fold(0.0, f64::max);
        worst = worst.max((peak - power).abs() / power);
        let scheduled = sample_schedule(&mut streams.slot_rng(crate::model::Stream::Scheduling, t), n, 2);
        let coord = coordinated_zf_rates(&ch, &serving, &scheduled, power, &units)?;
        for &j in &scheduled {
            let beam = coord.beams[j].as_ref().expect("scheduled beam");
            let own = (ch.link(j, serving[j]) * beam)[(0, 0)].norm();
            for &o in scheduled.iter().filter(|&&o| o != j) {
                let leak = (ch.link(o, serving[j]) * beam)[(0, 0)].norm();
                worst = worst.max(leak / own.max(f64::MIN_POSITIVE));
            }
            worst = worst.max((beam.norm() - 1.0).abs());
        }
        outcomes.push((worst <= 1e-9, worst));
    }
    Ok(finish("zero-forcing leakage and power", start, outcomes))
}

/// All suites with their default sizes.
pub fn run_all(trials: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        cache_oracle_suite(trials, seed)?,
        control_oracle_suite(trials, seed)?,
        dof_suite((trials / 5).max(1), seed)?,
        zf_suite((trials / 10).max(1), seed)?,
    ])
}
