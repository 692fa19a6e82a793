use serde::Serialize;

use crate::actual_plane::DelaySample;

/// Steady-state summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub policy: String,
    pub seed: u64,
    pub lambda_objects_per_slot: f64,
    pub frames: u64,
    pub warmup_frames: u64,
    pub slot_s: f64,
    pub delay_samples: u64,
    pub mean_delay_slots: f64,
    pub mean_delay_s: f64,
    pub p50_delay_slots: f64,
    pub p95_delay_slots: f64,
    pub p99_delay_slots: f64,
    pub mean_vip_backlog: f64,
    pub mean_dp_queue: f64,
    pub mean_placement_cost: f64,
    pub comp_fraction: f64,
    pub cache_hit_fraction: f64,
    pub cache_miss_fraction: f64,
    pub arrived_objects: u64,
    pub fulfilled_chunks: u64,
    pub outstanding_chunks: u64,
    pub final_vip_backlog: f64,
    pub max_abs_virtual_comp: f64,
}

/// Averages over one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRecord {
    pub frame: u64,
    pub vip_backlog: f64,
    pub dp_queue: f64,
    pub placement_cost: f64,
    pub placements: u64,
    pub comp_fraction: f64,
    pub arrivals: u64,
    pub fulfilled_chunks: u64,
    pub mean_delay_slots: f64,
}

/// Nearest-rank percentile of sorted values.
pub fn percentile(sorted: &[u64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1] as f64
}

/// Mean and percentiles of the delays of requests created after `after_slot`.
pub fn delay_stats(samples: &[DelaySample], after_slot: u64) -> (u64, f64, [f64; 3]) {
    let mut delays: Vec<u64> = samples
        .iter()
        .filter(|s| s.created > after_slot)
        .map(DelaySample::delay)
        .collect();
    if delays.is_empty() {
        return (0, 0.0, [0.0; 3]);
    }
    delays.sort_unstable();
    let mean = delays.iter().sum::<u64>() as f64 / delays.len() as f64;
    (
        delays.len() as u64,
        mean,
        [
            percentile(&delays, 0.5),
            percentile(&delays, 0.95),
            percentile(&delays, 0.99),
        ],
    )
}

/// Mean and standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
