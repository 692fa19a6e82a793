use phycache::baselines::Policy;
use phycache::harness::output::{summary_json, write_run, DELAYS_FILE, SUMMARY_FILE, TIMESERIES_FILE};
use phycache::harness::{run_simulation, SimConfig};

fn short(policy: Policy, seed: u64) -> SimConfig {
    let mut c = SimConfig::desk();
    c.timing.frames = 120;
    c.policy = policy;
    c.seed = seed;
    c
}

#[test]
fn same_seed_gives_identical_summary() {
    let c = short(Policy::Proposed, 9);
    let a = summary_json(&run_simulation(&c).unwrap().report).unwrap();
    let b = summary_json(&run_simulation(&c).unwrap().report).unwrap();
    assert_eq!(a, b);
    let other = summary_json(&run_simulation(&short(Policy::Proposed, 10)).unwrap().report).unwrap();
    assert_ne!(a, other);
}

#[test]
fn idle_network_stays_empty() {
    let mut c = short(Policy::Proposed, 1);
    c.traffic.lambda_mbps = 0.0;
    let out = run_simulation(&c).unwrap();
    assert_eq!(out.report.arrived_objects, 0);
    assert_eq!(out.report.delay_samples, 0);
    assert_eq!(out.report.final_vip_backlog, 0.0);
    assert_eq!(out.report.mean_placement_cost, 0.0);
    assert!(out.frames.iter().all(|f| f.dp_queue == 0.0 && f.placements == 0));
}

#[test]
fn every_chunk_is_delivered_or_outstanding() {
    for policy in Policy::ALL {
        let c = short(policy, 3);
        let out = run_simulation(&c).unwrap();
        let r = &out.report;
        let created = r.arrived_objects * c.traffic.chunks_per_object as u64;
        assert_eq!(r.fulfilled_chunks + r.outstanding_chunks, created, "{policy}");
        assert_eq!(out.delays.len() as u64, r.fulfilled_chunks);
        assert!(out.delays.iter().all(|d| d.fulfilled > d.created));
    }
}

#[test]
fn policies_see_the_same_requests() {
    let arrivals: Vec<u64> = Policy::ALL
        .iter()
        .map(|&p| run_simulation(&short(p, 5)).unwrap().report.arrived_objects)
        .collect();
    assert!(arrivals.windows(2).all(|w| w[0] == w[1]), "{arrivals:?}");
}

#[test]
fn single_mode_never_uses_comp() {
    let out = run_simulation(&short(Policy::VipSingle, 2)).unwrap();
    assert_eq!(out.report.comp_fraction, 0.0);
    assert!(out.delays.iter().all(|d| !d.comp));
}

#[test]
fn offline_pays_only_for_the_initial_fill() {
    let c = short(Policy::Offline, 4);
    let out = run_simulation(&c).unwrap();
    let first = &out.frames[0];
    assert_eq!(first.placements as usize, c.cache.capacity * c.topology.n_pairs);
    assert!(out.frames[1..].iter().all(|f| f.placements == 0));
}

#[test]
fn run_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_simulation(&short(Policy::Lfu, 6)).unwrap();
    write_run(dir.path(), &out).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["policy"], "lfu");
    let series = std::fs::read_to_string(dir.path().join(TIMESERIES_FILE)).unwrap();
    assert!(series.starts_with("frame,vip_backlog,"));
    assert_eq!(series.lines().count(), 121);
    let delays = std::fs::read_to_string(dir.path().join(DELAYS_FILE)).unwrap();
    assert_eq!(delays.lines().count() as u64, out.report.fulfilled_chunks + 1);
}
