//! The real network: IP mode marking, fluid DP queues at the server and BSs,
//! PHY delivery and per-chunk delay accounting.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::phy::RatePair;
use crate::traffic::ArrivalBatch;
use crate::virtual_plane::{CacheState, ControlDecision, ModeSet};

/// Fluid residue below which a segment counts as fully transferred.
const DUST: f64 = 1e-12;

/// Signed counters tracking virtual CoMP service not yet matched by CoMP-marked demand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VirtualCompQueues {
    pub objects: usize,
    /// Indexed `j * objects + k`.
    pub u: Vec<f64>,
}

impl VirtualCompQueues {
    pub fn new(n_users: usize, objects: usize) -> Self {
        Self {
            objects,
            u: vec![0.0; n_users * objects],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Marks every arrival entry CoMP (`true`) or coordinated. All requests of one
/// (user, object) pair in a slot share a mode.
pub fn select_ip_modes(u: &mut VirtualCompQueues, arrivals: &ArrivalBatch, dec: &ControlDecision) -> Vec<bool> {
    if dec.comp {
        for (j, s) in dec.service.iter().enumerate() {
            if let Some((k, rate)) = *s {
                u.u[j * u.objects + k] += rate;
            }
        }
    }
    arrivals
        .entries
        .iter()
        .map(|&(j, k, count)| {
            let i = j * u.objects + k;
            let comp = u.u[i] > 0.0;
            if comp {
                u.u[i] -= count as f64;
            }
            comp
        })
        .collect()
}

/// How the real PHY turns the slot decision into per-user delivery rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeliveryRule {
    /// Every user gets the full ZF rate of the selected mode; the precoder
    /// transmits to all of them regardless of the VIP allocation.
    #[default]
    RatePoint,
    /// Only users holding a positive VIP allocation are served, at that rate.
    Allocation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    request: u64,
    amount: f64,
    user: usize,
    comp: bool,
}

#[derive(Debug, Clone, Default)]
struct FluidQueue {
    segments: VecDeque<Segment>,
    total: f64,
}

impl FluidQueue {
    fn push(&mut self, seg: Segment) {
        self.total += seg.amount;
        self.segments.push_back(seg);
    }

    /// Removes up to `amount` from the head, returning the pieces in order.
    fn drain(&mut self, amount: f64, out: &mut Vec<Segment>) -> f64 {
        let mut left = amount;
        while left > DUST {
            let Some(head) = self.segments.front_mut() else { break };
            if head.amount <= left + DUST {
                left -= head.amount;
                out.push(*head);
                self.segments.pop_front();
            } else {
                head.amount -= left;
                out.push(Segment { amount: left, ..*head });
                left = 0.0;
            }
        }
        let moved = amount - left.max(0.0);
        if self.segments.is_empty() {
            self.total = 0.0;
        } else {
            self.total = (self.total - moved).max(0.0);
        }
        moved.min(amount)
    }

    fn len(&self) -> f64 {
        self.total
    }
}

#[derive(Debug, Clone)]
struct Request {
    user: usize,
    object: usize,
    created: u64,
    comp: bool,
    delivered: Vec<f64>,
    next_chunk: u32,
}

/// One fulfilled chunk request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelaySample {
    pub user: usize,
    pub object: usize,
    pub chunk: u32,
    pub created: u64,
    pub fulfilled: u64,
    pub comp: bool,
}

impl DelaySample {
    pub fn delay(&self) -> u64 {
        self.fulfilled - self.created
    }
}

/// Arrival and offered service totals per queue, accumulated until reset.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FlowCounters {
    pub slots: u64,
    /// Server-side queues, per BS.
    pub server_in: Vec<f64>,
    pub server_out: Vec<f64>,
    /// Coordinated buffers, per BS.
    pub coord_in: Vec<f64>,
    pub coord_out: Vec<f64>,
    /// CoMP buffers, indexed `n * n_users + j`.
    pub comp_in: Vec<f64>,
    pub comp_out: Vec<f64>,
}

impl FlowCounters {
    fn new(n_bs: usize, n_users: usize) -> Self {
        Self {
            slots: 0,
            server_in: vec![0.0; n_bs],
            server_out: vec![0.0; n_bs],
            coord_in: vec![0.0; n_bs],
            coord_out: vec![0.0; n_bs],
            comp_in: vec![0.0; n_bs * n_users],
            comp_out: vec![0.0; n_bs * n_users],
        }
    }
}

/// Queue lengths in objects.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct QueueSnapshot {
    pub server: f64,
    pub cache_read: f64,
    pub coord: f64,
    pub comp: f64,
}

impl QueueSnapshot {
    pub fn total(&self) -> f64 {
        self.server + self.cache_read + self.coord + self.comp
    }
}

/// All actual-plane queues and the outstanding request records.
#[derive(Debug, Clone)]
pub struct PacketLedger {
    n_bs: usize,
    n_users: usize,
    chunks: u32,
    serving: Vec<usize>,
    read_rates: Vec<f64>,
    server: Vec<FluidQueue>,
    cache_read: Vec<FluidQueue>,
    coord: Vec<FluidQueue>,
    comp: Vec<FluidQueue>,
    /// Pieces leaving the server queues or the cache this slot, by BS.
    staging: Vec<Vec<Segment>>,
    requests: HashMap<u64, Request>,
    next_id: u64,
    pub created_fluid: f64,
    pub delivered_fluid: f64,
    pub created_chunks: u64,
    pub fulfilled_chunks: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub flows: FlowCounters,
}

impl PacketLedger {
    pub fn new(serving: Vec<usize>, n_bs: usize, chunks: u32, read_rates: Vec<f64>) -> Self {
        let n_users = serving.len();
        Self {
            n_bs,
            n_users,
            chunks,
            serving,
            read_rates,
            server: vec![FluidQueue::default(); n_bs],
            cache_read: vec![FluidQueue::default(); n_bs],
            coord: vec![FluidQueue::default(); n_bs],
            comp: vec![FluidQueue::default(); n_bs * n_users],
            staging: vec![Vec::new(); n_bs],
            requests: HashMap::new(),
            next_id: 0,
            created_fluid: 0.0,
            delivered_fluid: 0.0,
            created_chunks: 0,
            fulfilled_chunks: 0,
            cache_hits: 0,
            cache_misses: 0,
            flows: FlowCounters::new(n_bs, n_users),
        }
    }

    pub fn snapshot(&self) -> QueueSnapshot {
        let sum = |qs: &[FluidQueue]| qs.iter().map(FluidQueue::len).sum::<f64>();
        let staged: f64 = self.staging.iter().flatten().map(|s| s.amount).sum();
        QueueSnapshot {
            server: sum(&self.server),
            cache_read: sum(&self.cache_read),
            coord: sum(&self.coord) + staged,
            comp: sum(&self.comp),
        }
    }

    pub fn server_queue(&self, n: usize) -> f64 {
        self.server[n].len()
    }

    pub fn coord_queue(&self, n: usize) -> f64 {
        self.coord[n].len()
    }

    pub fn comp_queue(&self, n: usize, j: usize) -> f64 {
        self.comp[n * self.n_users + j].len()
    }

    pub fn outstanding_requests(&self) -> usize {
        self.requests.len()
    }

    pub fn reset_flows(&mut self) -> FlowCounters {
        std::mem::replace(&mut self.flows, FlowCounters::new(self.n_bs, self.n_users))
    }

    /// Amount each mode could deliver this slot at the given rate point.
    fn deliverable(&self, rates: &RatePair) -> (f64, f64) {
        let comp = (0..self.n_users)
            .map(|j| {
                let floor = (0..self.n_bs)
                    .map(|n| self.comp[n * self.n_users + j].len())
                    .fold(f64::INFINITY, f64::min);
                rates.comp.get(j).copied().unwrap_or(0.0).min(floor)
            })
            .sum();
        let coord = (0..self.n_bs)
            .filter_map(|n| self.serving.iter().position(|&b| b == n))
            .map(|j| {
                rates
                    .coord
                    .get(j)
                    .copied()
                    .unwrap_or(0.0)
                    .min(self.coord[self.serving[j]].len())
            })
            .sum();
        (comp, coord)
    }

    /// The decision `deliver_phy` should act on under `rule`. Backhaul is
    /// kept. Under `RatePoint` a slot where the virtual plane serves nobody,
    /// and so every mode is equally good for it, goes to the mode that can
    /// deliver more buffered data.
    pub fn delivery_decision(
        &self,
        rule: DeliveryRule,
        dec: &ControlDecision,
        rates: &RatePair,
        modes: ModeSet,
    ) -> ControlDecision {
        if rule == DeliveryRule::Allocation {
            return dec.clone();
        }
        let mut comp = dec.comp;
        if modes == ModeSet::Both && dec.service.iter().all(Option::is_none) {
            let (a, b) = self.deliverable(rates);
            if a != b {
                comp = a > b;
            }
        }
        let point = if comp { &rates.comp } else { &rates.coord };
        ControlDecision {
            comp,
            service: point
                .iter()
                .enumerate()
                .map(|(j, &r)| (r > 0.0).then(|| (dec.service[j].map_or(0, |s| s.0), r)))
                .collect(),
            backhaul: dec.backhaul.clone(),
        }
    }

    /// Moves data still waiting for backhaul onto the cache-read path of any
    /// BS that now stores its object, as the virtual cache drain does for the
    /// backlog counted before the placement. Returns the amount moved.
    pub fn reroute_cached(&mut self, cache: &CacheState) -> f64 {
        let mut moved = 0.0;
        for n in 0..self.n_bs {
            let mut keep = FluidQueue::default();
            for seg in std::mem::take(&mut self.server[n].segments) {
                let object = self.requests.get(&seg.request).map(|r| r.object);
                if object.is_some_and(|k| cache.is_cached(n, k)) {
                    moved += seg.amount;
                    self.flows.server_out[n] += seg.amount;
                    self.cache_read[n].push(seg);
                } else {
                    keep.push(seg);
                }
            }
            self.server[n] = keep;
        }
        moved
    }

    /// Backhaul and cache reads move data towards the BS buffers; new demand
    /// enters the cache-read path where cached and the server queue otherwise.
    pub fn route_packets(
        &mut self,
        t: u64,
        cache: &CacheState,
        modes: &[bool],
        arrivals: &ArrivalBatch,
        backhaul: &[f64],
    ) {
        for n in 0..self.n_bs {
            self.flows.server_out[n] += backhaul[n];
            let mut out = std::mem::take(&mut self.staging[n]);
            self.server[n].drain(backhaul[n], &mut out);
            self.staging[n] = out;
        }

        for (&(j, k, count), &comp) in arrivals.entries.iter().zip(modes) {
            for _ in 0..count {
                let id = self.next_id;
                self.next_id += 1;
                let copies = if comp { self.n_bs } else { 1 };
                self.requests.insert(
                    id,
                    Request {
                        user: j,
                        object: k,
                        created: t,
                        comp,
                        delivered: vec![0.0; copies],
                        next_chunk: 0,
                    },
                );
                self.created_fluid += copies as f64;
                self.created_chunks += self.chunks as u64;
                let targets: Vec<usize> = if comp {
                    (0..self.n_bs).collect()
                } else {
                    vec![self.serving[j]]
                };
                for n in targets {
                    let seg = Segment {
                        request: id,
                        amount: 1.0,
                        user: j,
                        comp,
                    };
                    if cache.is_cached(n, k) {
                        self.cache_hits += 1;
                        self.cache_read[n].push(seg);
                    } else {
                        self.cache_misses += 1;
                        self.flows.server_in[n] += 1.0;
                        self.server[n].push(seg);
                    }
                }
            }
        }

        for n in 0..self.n_bs {
            let mut out = std::mem::take(&mut self.staging[n]);
            self.cache_read[n].drain(self.read_rates[n], &mut out);
            self.staging[n] = out;
        }
    }

    /// Drains the BS buffers with the slot's PHY rates, then appends the data
    /// staged by `route_packets`. Returns the chunks fulfilled this slot.
    pub fn deliver_phy(&mut self, t: u64, dec: &ControlDecision) -> Vec<DelaySample> {
        let mut delivered: Vec<(Segment, usize)> = Vec::new();
        let mut pieces = Vec::new();
        if dec.comp {
            for j in 0..self.n_users {
                let rate = dec.service[j].map_or(0.0, |s| s.1);
                for n in 0..self.n_bs {
                    self.flows.comp_out[n * self.n_users + j] += rate;
                }
                if rate <= 0.0 {
                    continue;
                }
                let floor = (0..self.n_bs)
                    .map(|n| self.comp[n * self.n_users + j].len())
                    .fold(f64::INFINITY, f64::min);
                let x = rate.min(floor);
                if x <= 0.0 {
                    continue;
                }
                for n in 0..self.n_bs {
                    pieces.clear();
                    self.comp[n * self.n_users + j].drain(x, &mut pieces);
                    delivered.extend(pieces.iter().map(|&s| (s, n)));
                }
            }
        } else {
            for n in 0..self.n_bs {
                let j = self
                    .serving
                    .iter()
                    .position(|&b| b == n)
                    .expect("every BS has an associated user");
                let rate = dec.service[j].map_or(0.0, |s| s.1);
                self.flows.coord_out[n] += rate;
                if rate > 0.0 {
                    pieces.clear();
                    self.coord[n].drain(rate, &mut pieces);
                    delivered.extend(pieces.iter().map(|&s| (s, n)));
                }
            }
        }

        for n in 0..self.n_bs {
            for seg in std::mem::take(&mut self.staging[n]) {
                if seg.comp {
                    self.flows.comp_in[n * self.n_users + seg.user] += seg.amount;
                    self.comp[n * self.n_users + seg.user].push(seg);
                } else {
                    self.flows.coord_in[n] += seg.amount;
                    self.coord[n].push(seg);
                }
            }
        }
        self.flows.slots += 1;

        let mut samples = Vec::new();
        for (seg, n) in delivered {
            self.delivered_fluid += seg.amount;
            let Some(req) = self.requests.get_mut(&seg.request) else {
                continue;
            };
            let copy = if req.comp { n } else { 0 };
            req.delivered[copy] += seg.amount;
            let covered = req.delivered.iter().copied().fold(f64::INFINITY, f64::min);
            while req.next_chunk < self.chunks && covered * self.chunks as f64 + 1e-9 >= (req.next_chunk + 1) as f64 {
                samples.push(DelaySample {
                    user: req.user,
                    object: req.object,
                    chunk: req.next_chunk,
                    created: req.created,
                    fulfilled: t,
                    comp: req.comp,
                });
                req.next_chunk += 1;
            }
            if req.next_chunk == self.chunks {
                self.requests.remove(&seg.request);
            }
        }
        self.fulfilled_chunks += samples.len() as u64;
        samples
    }

    /// Chunks still owed to users.
    pub fn outstanding_chunks(&self) -> u64 {
        self.requests
            .values()
            .map(|r| (self.chunks - r.next_chunk) as u64)
            .sum()
    }
}
