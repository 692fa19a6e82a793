//! Slot/frame loop tying the planes together.

use crate::actual_plane::{select_ip_modes, DelaySample, PacketLedger, VirtualCompQueues};
use crate::analysis::flow_balance::{cache_key, FrameFlows};
use crate::baselines::{offline_placement, LfuCounters, Policy};
use crate::error::Result;
use crate::harness::config::SimConfig;
use crate::harness::metrics::{delay_stats, FrameRecord, MetricsReport};
use crate::model::{build_topology, RngStreams};
use crate::phy::{ChannelModel, Phy};
use crate::traffic::{Catalog, TrafficModel};
use crate::virtual_plane::{
    fast_control, place_cache, update_vip_queues, CacheState, Placement, PlacementParams, VipState,
};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: MetricsReport,
    pub frames: Vec<FrameRecord>,
    pub delays: Vec<DelaySample>,
    /// Flow totals per frame, tagged with the cache state of that frame.
    pub flows: Vec<FrameFlows>,
    pub catalog: Catalog,
    pub final_cache: CacheState,
}

pub fn run_simulation(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let streams = RngStreams::new(config.seed);
    let units = config.units()?;
    let topology = build_topology(&config.topology, &streams)?;
    let n = topology.n_pairs();
    let serving = topology.serving.clone();
    let channels = if config.phy.unit_gain {
        ChannelModel::unit(n, topology.tx_antennas, topology.rx_antennas)
    } else {
        ChannelModel::from_topology(&topology)
    };
    let phy = Phy {
        channels,
        serving: serving.clone(),
        power: 10f64.powf(config.phy.tx_snr_db / 10.0),
        coordinated_users: config.phy.coordinated_users,
        units,
    };

    let tr = &config.traffic;
    let catalog = Catalog::generate(
        &streams,
        n,
        tr.library_size,
        tr.catalog_size,
        tr.skewness,
        tr.identical_preferences,
    )?;
    let lambda = config.lambda_objects()?;
    let traffic = TrafficModel::new(catalog.clone(), lambda)?;
    let k = tr.library_size;

    let frame_slots = config.timing.frame_slots;
    let backhaul_total = config.backhaul_objects()?;
    let read_rate = config.read_rate_objects()?;
    let read_rates = vec![read_rate; n];
    let params = PlacementParams {
        w: config.cache.w,
        frame_slots,
        gamma: config.cache.gamma,
        read_rates: read_rates.clone(),
        capacity: config.cache.capacity,
    };
    let modes = config.policy.modes();
    let warmup_frames = config.warmup_frames();
    let warmup_slots = warmup_frames * frame_slots;

    let mut vip = VipState::new(n, n, k);
    let mut cache = CacheState::empty(n, k, config.cache.capacity);
    let mut u = VirtualCompQueues::new(n, k);
    let mut ledger = PacketLedger::new(serving.clone(), n, tr.chunks_per_object, read_rates.clone());
    let mut lfu = LfuCounters::new(n, k, config.cache.lfu_reset_frames);
    let offline = offline_placement(&catalog, lambda, n, config.cache.capacity);

    let mut frames = Vec::with_capacity(config.timing.frames as usize);
    let mut flows = Vec::with_capacity(config.timing.frames as usize);
    let mut delays: Vec<DelaySample> = Vec::new();
    let mut backhaul = vec![backhaul_total; n];

    let (mut steady_vip, mut steady_dp, mut steady_cost) = (0.0, 0.0, 0.0);
    let mut steady_comp = 0u64;
    let mut steady_slots = 0u64;
    let mut steady_frames = 0u64;
    let (mut hits_before, mut misses_before) = (0u64, 0u64);
    let mut arrived = 0u64;

    for frame in 1..=config.timing.frames {
        let placement = match config.policy {
            Policy::Proposed | Policy::VipSingle => place_cache(&vip, &cache, &params),
            Policy::Offline if frame == 1 => Placement::towards(&cache, &offline),
            Policy::Offline => Placement::none(n, k),
            Policy::Lfu => lfu.step(&cache),
        };
        let cost = cache.apply(&placement, config.cache.gamma)?;
        ledger.reroute_cached(&cache);
        for (bs, rate) in backhaul.iter_mut().enumerate() {
            let reserved = (placement.adds(bs) as f64 / frame_slots as f64)
                .min(config.backhaul.placement_share_cap * backhaul_total);
            *rate = backhaul_total - reserved;
        }
        if frame == warmup_frames + 1 {
            hits_before = ledger.cache_hits;
            misses_before = ledger.cache_misses;
        }

        let (mut f_vip, mut f_dp) = (0.0, 0.0);
        let mut f_comp = 0u64;
        let mut f_arrivals = 0u64;
        let (mut f_fulfilled, mut f_delay_sum) = (0u64, 0u64);
        for s in 0..frame_slots {
            let t = (frame - 1) * frame_slots + s + 1;
            let rates = phy.rates(&streams, t)?;
            let arrivals = traffic.generate(&streams, t);
            f_arrivals += arrivals.total();
            if config.policy == Policy::Lfu {
                lfu.record(&arrivals, &serving);
            }
            let dec = fast_control(&vip, &rates, &backhaul, &serving, modes);
            update_vip_queues(&mut vip, &dec, &arrivals, &cache, &read_rates, &serving);
            let ip_modes = select_ip_modes(&mut u, &arrivals, &dec);
            let c_ng: Vec<f64> = dec.backhaul.iter().map(|b| b.map_or(0.0, |x| x.1)).collect();
            ledger.route_packets(t, &cache, &ip_modes, &arrivals, &c_ng);
            let delivery = ledger.delivery_decision(config.phy.delivery, &dec, &rates, modes);
            let samples = ledger.deliver_phy(t, &delivery);

            f_vip += vip.total_backlog();
            f_dp += ledger.snapshot().total();
            f_comp += dec.comp as u64;
            f_fulfilled += samples.len() as u64;
            f_delay_sum += samples.iter().map(DelaySample::delay).sum::<u64>();
            delays.extend(samples);
        }
        arrived += f_arrivals;
        let slots = frame_slots as f64;
        frames.push(FrameRecord {
            frame,
            vip_backlog: f_vip / slots,
            dp_queue: f_dp / slots,
            placement_cost: cost,
            placements: placement.total_adds() as u64,
            comp_fraction: f_comp as f64 / slots,
            arrivals: f_arrivals,
            fulfilled_chunks: f_fulfilled,
            mean_delay_slots: if f_fulfilled > 0 {
                f_delay_sum as f64 / f_fulfilled as f64
            } else {
                0.0
            },
        });
        let contents: Vec<Vec<usize>> = (0..n).map(|bs| cache.contents(bs)).collect();
        flows.push(FrameFlows {
            cache_key: cache_key(&contents),
            flows: ledger.reset_flows(),
        });
        if frame > warmup_frames {
            steady_vip += f_vip;
            steady_dp += f_dp;
            steady_cost += cost;
            steady_comp += f_comp;
            steady_slots += frame_slots;
            steady_frames += 1;
        }
    }

    let (samples, mean_delay, [p50, p95, p99]) = delay_stats(&delays, warmup_slots);
    let hits = ledger.cache_hits - hits_before;
    let misses = ledger.cache_misses - misses_before;
    let lookups = hits + misses;
    let per = |x: f64, d: u64| if d > 0 { x / d as f64 } else { 0.0 };
    let report = MetricsReport {
        policy: config.policy.name().to_string(),
        seed: config.seed,
        lambda_objects_per_slot: lambda,
        frames: config.timing.frames,
        warmup_frames,
        slot_s: config.timing.slot_s,
        delay_samples: samples,
        mean_delay_slots: mean_delay,
        mean_delay_s: mean_delay * config.timing.slot_s,
        p50_delay_slots: p50,
        p95_delay_slots: p95,
        p99_delay_slots: p99,
        mean_vip_backlog: per(steady_vip, steady_slots),
        mean_dp_queue: per(steady_dp, steady_slots),
        mean_placement_cost: per(steady_cost, steady_frames),
        comp_fraction: per(steady_comp as f64, steady_slots),
        cache_hit_fraction: per(hits as f64, lookups),
        cache_miss_fraction: if lookups > 0 {
            misses as f64 / lookups as f64
        } else {
            0.0
        },
        arrived_objects: arrived,
        fulfilled_chunks: ledger.fulfilled_chunks,
        outstanding_chunks: ledger.outstanding_chunks(),
        final_vip_backlog: vip.total_backlog(),
        max_abs_virtual_comp: u.max_abs(),
    };
    Ok(SimOutput {
        report,
        frames,
        delays,
        flows,
        catalog,
        final_cache: cache,
    })
}
