//! Per-cache-state flow balance of the actual-plane queues.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::actual_plane::FlowCounters;
use crate::error::{Error, Result};

/// Flow totals of one frame together with the cache state that held during it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameFlows {
    pub cache_key: String,
    pub flows: FlowCounters,
}

/// Compact label of a cache state: contents per BS, `|`-separated.
pub fn cache_key(contents: &[Vec<usize>]) -> String {
    contents
        .iter()
        .map(|c| c.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("|")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueBalance {
    pub class: &'static str,
    pub queue: usize,
    pub arrival_rate: f64,
    pub service_rate: f64,
    pub slack: f64,
    pub std_error: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateBalance {
    pub cache_key: String,
    pub frames: usize,
    pub probability: f64,
    pub queues: Vec<QueueBalance>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowBalanceReport {
    pub frames: usize,
    pub states: Vec<StateBalance>,
    /// States seen in fewer frames than the threshold, with their frame counts.
    pub excluded: Vec<(String, usize)>,
    pub violations: usize,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Groups frames by cache state and compares conditional average arrival and
/// offered service of every queue. A positive slack beyond `z` standard
/// errors is a violation.
pub fn check_conditional_flow_balance(trace: &[FrameFlows], min_frames: usize, z: f64) -> Result<FlowBalanceReport> {
    if trace.is_empty() {
        return Err(Error::Input("flow-balance audit needs at least one frame".into()));
    }
    let mut groups: BTreeMap<&str, Vec<&FlowCounters>> = BTreeMap::new();
    for f in trace {
        groups.entry(f.cache_key.as_str()).or_default().push(&f.flows);
    }
    let total = trace.len();
    let mut states = Vec::new();
    let mut excluded = Vec::new();
    let mut violations = 0;
    for (key, frames) in groups {
        if frames.len() < min_frames {
            log::warn!(
                "cache state excluded from audit: {} frames < {min_frames}",
                frames.len()
            );
            excluded.push((key.to_string(), frames.len()));
            continue;
        }
        let mut queues = Vec::new();
        type Pick = fn(&FlowCounters) -> (&[f64], &[f64]);
        let classes: [(&'static str, Pick); 3] = [
            ("server", |f| (&f.server_in, &f.server_out)),
            ("coordinated", |f| (&f.coord_in, &f.coord_out)),
            ("comp", |f| (&f.comp_in, &f.comp_out)),
        ];
        for (class, pick) in classes {
            let width = pick(frames[0]).0.len();
            for q in 0..width {
                let arrivals: Vec<f64> = frames.iter().map(|f| pick(f).0[q] / f.slots.max(1) as f64).collect();
                let service: Vec<f64> = frames.iter().map(|f| pick(f).1[q] / f.slots.max(1) as f64).collect();
                let diffs: Vec<f64> = arrivals.iter().zip(&service).map(|(a, c)| a - c).collect();
                let (slack, std_error) = mean_se(&diffs);
                let violation = slack > z * std_error && slack > 1e-12;
                violations += violation as usize;
                queues.push(QueueBalance {
                    class,
                    queue: q,
                    arrival_rate: mean_se(&arrivals).0,
                    service_rate: mean_se(&service).0,
                    slack,
                    std_error,
                    violation,
                });
            }
        }
        states.push(StateBalance {
            cache_key: key.to_string(),
            frames: frames.len(),
            probability: frames.len() as f64 / total as f64,
            queues,
        });
    }
    Ok(FlowBalanceReport {
        frames: total,
        states,
        excluded,
        violations,
    })
}
