//! One-axis parameter sweeps across all policies with shared seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::Policy;
use crate::error::{Error, Result};
use crate::harness::config::SimConfig;
use crate::harness::sim::run_simulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Per-user arrival rate in Mbps.
    Lambda,
    CacheSize,
    Skew,
    W,
    /// Backhaul rate per BS in Mbps.
    Backhaul,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(Axis::Lambda),
            "cache_size" | "cache-size" => Ok(Axis::CacheSize),
            "skew" | "skewness" => Ok(Axis::Skew),
            "w" | "W" => Ok(Axis::W),
            "backhaul" => Ok(Axis::Backhaul),
            other => Err(Error::Config(format!(
                "unknown axis '{other}' (expected lambda, cache_size, skew, w or backhaul)"
            ))),
        }
    }
}

impl Axis {
    /// Sets the axis parameter; `config` is left untouched when the result is invalid.
    pub fn apply(self, config: &mut SimConfig, value: f64) -> Result<()> {
        let mut next = config.clone();
        let c = &mut next;
        match self {
            Axis::Lambda => c.traffic.lambda_mbps = value,
            Axis::CacheSize => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("cache size must be a whole number, got {value}")));
                }
                c.cache.capacity = value as usize;
            }
            Axis::Skew => c.traffic.skewness = value,
            Axis::W => c.cache.w = value,
            Axis::Backhaul => c.backhaul.rate_mbps = value,
        }
        next.validate()?;
        *config = next;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: f64,
    pub policy: Policy,
    pub seed: u64,
    pub mean_delay_slots: f64,
    pub mean_vip_backlog: f64,
    pub mean_placement_cost: f64,
    pub comp_fraction: f64,
    pub mean_dp_queue: f64,
    pub cache_hit_fraction: f64,
}

/// Runs every (value, policy, seed) combination in parallel; rows come back
/// ordered by value, then policy, then seed.
pub fn sweep(
    base: &SimConfig,
    axis: Axis,
    values: &[f64],
    policies: &[Policy],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    let mut jobs = Vec::new();
    for &value in values {
        for &policy in policies {
            for &seed in seeds {
                let mut c = base.clone();
                axis.apply(&mut c, value)?;
                c.policy = policy;
                c.seed = seed;
                jobs.push((value, c));
            }
        }
    }
    jobs.par_iter()
        .map(|(value, c)| {
            let r = run_simulation(c)?.report;
            Ok(SweepRow {
                axis,
                value: *value,
                policy: c.policy,
                seed: c.seed,
                mean_delay_slots: r.mean_delay_slots,
                mean_vip_backlog: r.mean_vip_backlog,
                mean_placement_cost: r.mean_placement_cost,
                comp_fraction: r.comp_fraction,
                mean_dp_queue: r.mean_dp_queue,
                cache_hit_fraction: r.cache_hit_fraction,
            })
        })
        .collect()
}
