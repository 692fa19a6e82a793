//! Network topology, unit conversions, the slot/frame clock and seeded
//! random streams shared by every other module.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell layout used to place base stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Hexagonal cells; with exactly seven cells the cluster is wrapped around.
    Hex,
    /// Base stations on a line, one inter-site distance apart.
    Line,
}

/// Where each user sits inside its own cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserPlacement {
    /// Uniform over the hexagonal cell, excluding a disc of `min_user_distance_m`.
    Uniform,
    /// Uniform angle at exactly `user_offset_m` from the serving BS.
    FixedOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub n_pairs: usize,
    pub layout: Layout,
    /// Hexagon circumradius in meters.
    pub cell_radius_m: f64,
    pub user_placement: UserPlacement,
    pub user_offset_m: f64,
    pub min_user_distance_m: f64,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            n_pairs: 3,
            layout: Layout::Hex,
            cell_radius_m: 250.0,
            user_placement: UserPlacement::Uniform,
            user_offset_m: 150.0,
            min_user_distance_m: 35.0,
            tx_antennas: 2,
            rx_antennas: 1,
        }
    }
}

/// BS-user pairs with identity pairing: user `j` is served by BS `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub bs_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    /// `serving[j]` is the BS serving user `j`.
    pub serving: Vec<usize>,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    /// Effective distance in meters, indexed `[user][bs]`.
    pub distances_m: Vec<Vec<f64>>,
}

impl Topology {
    pub fn n_pairs(&self) -> usize {
        self.bs_positions.len()
    }

    /// The user associated with BS `n`.
    pub fn associated_user(&self, n: usize) -> usize {
        self.serving
            .iter()
            .position(|&bs| bs == n)
            .expect("serving map is a bijection")
    }

    /// Builds a topology from an explicit distance matrix (`[user][bs]`, meters).
    pub fn from_distances(distances_m: Vec<Vec<f64>>, tx_antennas: usize, rx_antennas: usize) -> Result<Self> {
        let n = distances_m.len();
        if n == 0 || distances_m.iter().any(|row| row.len() != n) {
            return Err(Error::Config("distance matrix must be square and non-empty".into()));
        }
        if distances_m.iter().flatten().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Config("all distances must be finite and positive".into()));
        }
        Ok(Self {
            bs_positions: vec![[0.0, 0.0]; n],
            user_positions: vec![[0.0, 0.0]; n],
            serving: (0..n).collect(),
            tx_antennas,
            rx_antennas,
            distances_m,
        })
    }
}

fn rotate(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Hex cell centers in spiral order: origin, then rings outward.
fn hex_centers(count: usize, spacing: f64) -> Vec<[f64; 2]> {
    // Axial directions of a hexagonal lattice.
    let dirs: Vec<[f64; 2]> = (0..6)
        .map(|k| rotate([spacing, 0.0], k as f64 * std::f64::consts::FRAC_PI_3))
        .collect();
    let mut centers = vec![[0.0, 0.0]];
    let mut ring = 1;
    while centers.len() < count {
        // Start at ring * dir[4] and walk the six sides.
        let mut p = [dirs[4][0] * ring as f64, dirs[4][1] * ring as f64];
        for side in 0..6 {
            for _ in 0..ring {
                centers.push(p);
                p = [p[0] + dirs[side][0], p[1] + dirs[side][1]];
            }
        }
        ring += 1;
    }
    centers.truncate(count);
    centers
}

/// Translation vectors of the six mirrored images of a 7-cell cluster.
fn wrap_images(spacing: f64) -> Vec<[f64; 2]> {
    let a1 = [spacing, 0.0];
    let a2 = rotate(a1, std::f64::consts::FRAC_PI_3);
    let shift = [2.0 * a1[0] + a2[0], 2.0 * a1[1] + a2[1]];
    (0..6)
        .map(|k| rotate(shift, k as f64 * std::f64::consts::FRAC_PI_3))
        .collect()
}

fn inside_hexagon(p: [f64; 2], radius: f64) -> bool {
    // Pointy-top hexagon: neighbours sit along the x axis.
    let (x, y) = (p[0].abs(), p[1].abs());
    x <= radius * 3f64.sqrt() / 2.0 && x + 3f64.sqrt() * y <= 3f64.sqrt() * radius
}

/// Places base stations and users. Deterministic for a given config and seed.
pub fn build_topology(config: &TopologyConfig, streams: &RngStreams) -> Result<Topology> {
    let n = config.n_pairs;
    if n == 0 {
        return Err(Error::Config("n_pairs must be >= 1".into()));
    }
    if !(config.cell_radius_m > 0.0) {
        return Err(Error::Config("cell_radius_m must be > 0".into()));
    }
    if config.tx_antennas == 0 || config.rx_antennas == 0 {
        return Err(Error::Config("antenna counts must be >= 1".into()));
    }
    let spacing = 3f64.sqrt() * config.cell_radius_m;
    let bs_positions = match config.layout {
        Layout::Hex => hex_centers(n, spacing),
        Layout::Line => (0..n).map(|i| [i as f64 * spacing, 0.0]).collect(),
    };

    let mut rng = streams.rng(Stream::Topology);
    let min_d = config.min_user_distance_m.max(1e-3);
    let mut user_positions = Vec::with_capacity(n);
    for bs in &bs_positions {
        let offset = match config.user_placement {
            UserPlacement::FixedOffset => {
                if !(config.user_offset_m > 0.0) {
                    return Err(Error::Config("user_offset_m must be > 0".into()));
                }
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                rotate([config.user_offset_m, 0.0], angle)
            }
            UserPlacement::Uniform => {
                if min_d >= config.cell_radius_m * 3f64.sqrt() / 2.0 {
                    return Err(Error::Config("min_user_distance_m exceeds cell inradius".into()));
                }
                loop {
                    let r = config.cell_radius_m;
                    let p = [rng.random_range(-r..r), rng.random_range(-r..r)];
                    if inside_hexagon(p, r) && dist(p, [0.0, 0.0]) >= min_d {
                        break p;
                    }
                }
            }
        };
        user_positions.push([bs[0] + offset[0], bs[1] + offset[1]]);
    }

    let wrap = config.layout == Layout::Hex && n == 7;
    let images = if wrap { wrap_images(spacing) } else { Vec::new() };
    let distances_m: Vec<Vec<f64>> = user_positions
        .iter()
        .map(|&u| {
            bs_positions
                .iter()
                .map(|&b| {
                    images.iter().fold(dist(u, b), |best, img| {
                        best.min(dist(u, [b[0] + img[0], b[1] + img[1]]))
                    })
                })
                .collect()
        })
        .collect();
    if distances_m.iter().flatten().any(|&d| !(d > 0.0)) {
        return Err(Error::Config("a user coincides with a base station".into()));
    }

    Ok(Topology {
        bs_positions,
        user_positions,
        serving: (0..n).collect(),
        tx_antennas: config.tx_antennas,
        rx_antennas: config.rx_antennas,
        distances_m,
    })
}

/// Global slot/frame clock. Slots and frames are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clock {
    pub slot: u64,
    pub slots_per_frame: u64,
}

impl Clock {
    pub fn new(slots_per_frame: u64) -> Result<Self> {
        if slots_per_frame == 0 {
            return Err(Error::Config("slots_per_frame must be >= 1".into()));
        }
        Ok(Self {
            slot: 1,
            slots_per_frame,
        })
    }

    /// `ceil(t / T)`.
    pub fn frame(&self) -> u64 {
        self.slot.div_ceil(self.slots_per_frame)
    }

    pub fn is_frame_start(&self) -> bool {
        (self.slot - 1) % self.slots_per_frame == 0
    }

    pub fn advance(&mut self) {
        self.slot += 1;
    }
}

/// Bits, chunks and time base used to express every rate in objects/slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitContext {
    pub object_bits: f64,
    pub chunks_per_object: u32,
    pub bandwidth_hz: f64,
    pub slot_duration_s: f64,
}

impl UnitContext {
    pub fn new(object_bits: f64, chunks_per_object: u32, bandwidth_hz: f64, slot_duration_s: f64) -> Result<Self> {
        if !(object_bits > 0.0) || chunks_per_object == 0 || !(bandwidth_hz > 0.0) || !(slot_duration_s > 0.0) {
            return Err(Error::Config("unit context values must be positive".into()));
        }
        Ok(Self {
            object_bits,
            chunks_per_object,
            bandwidth_hz,
            slot_duration_s,
        })
    }

    pub fn chunk_bits(&self) -> f64 {
        self.object_bits / self.chunks_per_object as f64
    }

    /// bits/s to data objects/slot.
    pub fn convert_rate(&self, bps: f64) -> f64 {
        bps * self.slot_duration_s / self.object_bits
    }

    pub fn mbps_to_objects(&self, mbps: f64) -> f64 {
        self.convert_rate(mbps * 1e6)
    }
}

impl Default for UnitContext {
    fn default() -> Self {
        Self {
            object_bits: 8e6,
            chunks_per_object: 20,
            bandwidth_hz: 10e6,
            slot_duration_s: 0.002,
        }
    }
}

/// Independent randomness sources fanned out from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Topology,
    Catalogs,
    Channels,
    Arrivals,
    Scheduling,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Topology => 1,
            Stream::Catalogs => 2,
            Stream::Channels => 3,
            Stream::Arrivals => 4,
            Stream::Scheduling => 5,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    pub seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Setup-time stream (topology, catalogs).
    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ splitmix64(stream.id())))
    }

    /// Per-slot stream; the draw for slot `t` does not depend on any other slot.
    pub fn slot_rng(&self, stream: Stream, t: u64) -> ChaCha8Rng {
        let key = splitmix64(self.seed ^ splitmix64(stream.id())) ^ splitmix64(t.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        ChaCha8Rng::seed_from_u64(splitmix64(key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex7_layout_has_seven_distinct_sites() {
        let cfg = TopologyConfig {
            n_pairs: 7,
            ..Default::default()
        };
        let topo = build_topology(&cfg, &RngStreams::new(1)).unwrap();
        assert_eq!(topo.n_pairs(), 7);
        let spacing = 3f64.sqrt() * 250.0;
        for b in &topo.bs_positions[1..] {
            assert!((dist(*b, [0.0, 0.0]) - spacing).abs() < 1e-9);
        }
        for j in 0..7 {
            assert_eq!(topo.serving[j], j);
            assert_eq!(topo.associated_user(j), j);
            // own BS is never farther than the cell circumradius
            assert!(topo.distances_m[j][j] <= 250.0 + 1e-9);
        }
    }

    #[test]
    fn wraparound_shortens_far_links() {
        let cfg = TopologyConfig {
            n_pairs: 7,
            ..Default::default()
        };
        let topo = build_topology(&cfg, &RngStreams::new(3)).unwrap();
        let spacing = 3f64.sqrt() * 250.0;
        // With wrap-around, every BS is within roughly one ring of every user.
        let worst = topo.distances_m.iter().flatten().cloned().fold(0.0, f64::max);
        assert!(worst < 2.0 * spacing, "worst {worst}");
    }

    #[test]
    fn single_pair_at_configured_offset() {
        let cfg = TopologyConfig {
            n_pairs: 1,
            user_placement: UserPlacement::FixedOffset,
            user_offset_m: 120.0,
            ..Default::default()
        };
        let topo = build_topology(&cfg, &RngStreams::new(9)).unwrap();
        assert_eq!(topo.bs_positions, vec![[0.0, 0.0]]);
        assert!((topo.distances_m[0][0] - 120.0).abs() < 1e-9);
    }

    #[test]
    fn topology_is_deterministic_per_seed() {
        let cfg = TopologyConfig {
            n_pairs: 3,
            ..Default::default()
        };
        let a = build_topology(&cfg, &RngStreams::new(42)).unwrap();
        let b = build_topology(&cfg, &RngStreams::new(42)).unwrap();
        assert_eq!(a, b);
        let c = build_topology(&cfg, &RngStreams::new(43)).unwrap();
        assert_ne!(a.user_positions, c.user_positions);
    }

    #[test]
    fn rejects_bad_config() {
        let s = RngStreams::new(0);
        let zero = TopologyConfig {
            n_pairs: 0,
            ..Default::default()
        };
        assert!(matches!(build_topology(&zero, &s), Err(Error::Config(_))));
        let radius = TopologyConfig {
            cell_radius_m: -1.0,
            ..Default::default()
        };
        assert!(matches!(build_topology(&radius, &s), Err(Error::Config(_))));
    }

    #[test]
    fn clock_frame_index_is_ceiling() {
        let mut clock = Clock::new(4).unwrap();
        let mut frames = Vec::new();
        for _ in 0..9 {
            frames.push((clock.slot, clock.frame(), clock.is_frame_start()));
            clock.advance();
        }
        assert_eq!(frames[0], (1, 1, true));
        assert_eq!(frames[3], (4, 1, false));
        assert_eq!(frames[4], (5, 2, true));
        assert_eq!(frames[8], (9, 3, true));
    }

    #[test]
    fn rate_conversion() {
        let ctx = UnitContext::default();
        assert!((ctx.convert_rate(30e6) - 0.0075).abs() < 1e-15);
        assert_eq!(ctx.convert_rate(0.0), 0.0);
        // 1 MB object in 20 chunks of 50 KB
        assert_eq!(ctx.chunk_bits(), 4e5);
        assert_eq!(ctx.chunk_bits() * ctx.chunks_per_object as f64, ctx.object_bits);
    }

    #[test]
    fn slot_streams_are_independent_of_call_order() {
        let s = RngStreams::new(5);
        let a: u64 = s.slot_rng(Stream::Channels, 10).random();
        let _: u64 = s.slot_rng(Stream::Channels, 11).random();
        let b: u64 = s.slot_rng(Stream::Channels, 10).random();
        assert_eq!(a, b);
        let c: u64 = s.slot_rng(Stream::Arrivals, 10).random();
        assert_ne!(a, c);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn convert_rate_is_linear(a in 0.0f64..1e9, b in 0.0f64..1e9) {
                let ctx = UnitContext::default();
                let lhs = ctx.convert_rate(a + b);
                let rhs = ctx.convert_rate(a) + ctx.convert_rate(b);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            }
        }
    }
}
