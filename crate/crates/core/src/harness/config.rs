//! Run configuration. One JSON document; every field has a default and
//! unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actual_plane::DeliveryRule;
use crate::baselines::Policy;
use crate::error::{Error, Result};
use crate::model::{Layout, TopologyConfig, UnitContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyConfig {
    /// Per-BS transmit power over receiver noise power, in dB.
    pub tx_snr_db: f64,
    pub bandwidth_hz: f64,
    /// Users served per slot in coordinated mode.
    pub coordinated_users: usize,
    /// Skip pathloss and use unit-gain Rayleigh links.
    pub unit_gain: bool,
    /// Per-user rates used by the real PHY.
    pub delivery: DeliveryRule,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            // 46 dBm transmit power against a -95 dBm noise floor.
            tx_snr_db: 141.0,
            bandwidth_hz: 10e6,
            coordinated_users: 1,
            unit_gain: false,
            delivery: DeliveryRule::RatePoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    pub slot_s: f64,
    pub frame_slots: u64,
    pub frames: u64,
    /// Leading share of frames left out of steady-state metrics.
    pub warmup_fraction: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            slot_s: 0.002,
            frame_slots: 50,
            frames: 2000,
            warmup_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Total request rate of each user.
    pub lambda_mbps: f64,
    pub library_size: usize,
    pub catalog_size: usize,
    pub skewness: f64,
    pub object_bits: f64,
    pub chunks_per_object: u32,
    /// All users share one catalog.
    pub identical_preferences: bool,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            lambda_mbps: 20.0,
            library_size: 100,
            catalog_size: 30,
            skewness: 0.5,
            object_bits: 8e6,
            chunks_per_object: 20,
            identical_preferences: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    pub capacity: usize,
    /// Price of fetching one object into a cache.
    pub gamma: f64,
    /// Weight of placement cost against backlog.
    pub w: f64,
    /// Storage read rate of every BS.
    pub read_rate_mbps: f64,
    /// LFU counters are cleared every this many frames; never when absent.
    pub lfu_reset_frames: Option<u64>,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            capacity: 8,
            gamma: 1.0,
            w: 10.0,
            read_rate_mbps: 2000.0,
            lfu_reset_frames: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackhaulConfig {
    pub rate_mbps: f64,
    /// Largest share of the backhaul reserved for cache fills in a frame.
    pub placement_share_cap: f64,
}

impl Default for BackhaulConfig {
    fn default() -> Self {
        Self {
            rate_mbps: 30.0,
            placement_share_cap: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub topology: TopologyConfig,
    pub phy: PhyConfig,
    pub timing: TimingConfig,
    pub traffic: TrafficConfig,
    pub cache: CacheConfig,
    pub backhaul: BackhaulConfig,
    pub policy: Policy,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl SimConfig {
    /// Three cells, 100 objects; the whole acceptance suite runs in minutes.
    /// Coordinated mode serves one user per slot, keeping its share of users
    /// close to the seven-cell case with two.
    pub fn desk() -> Self {
        Self {
            topology: TopologyConfig::default(),
            phy: PhyConfig::default(),
            timing: TimingConfig::default(),
            traffic: TrafficConfig::default(),
            cache: CacheConfig::default(),
            backhaul: BackhaulConfig::default(),
            policy: Policy::Proposed,
            seed: 1,
        }
    }

    /// Seven wrapped hexagonal cells with a 1000-object library.
    pub fn hex7() -> Self {
        let mut c = Self::desk();
        c.topology.n_pairs = 7;
        c.topology.layout = Layout::Hex;
        c.phy.coordinated_users = 2;
        c.timing.frame_slots = 250;
        c.timing.frames = 400;
        c.traffic.library_size = 1000;
        c.traffic.catalog_size = 100;
        c.cache.capacity = 80;
        c
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "hex7" => Ok(Self::hex7()),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected desk or hex7)"
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn units(&self) -> Result<UnitContext> {
        UnitContext::new(
            self.traffic.object_bits,
            self.traffic.chunks_per_object,
            self.phy.bandwidth_hz,
            self.timing.slot_s,
        )
    }

    /// Per-user arrival rate in objects/slot.
    pub fn lambda_objects(&self) -> Result<f64> {
        Ok(self.units()?.mbps_to_objects(self.traffic.lambda_mbps))
    }

    /// Sets the per-user arrival rate from objects/slot.
    pub fn set_lambda_objects(&mut self, objects_per_slot: f64) -> Result<()> {
        let units = self.units()?;
        self.traffic.lambda_mbps = objects_per_slot / units.mbps_to_objects(1.0);
        Ok(())
    }

    pub fn backhaul_objects(&self) -> Result<f64> {
        Ok(self.units()?.mbps_to_objects(self.backhaul.rate_mbps))
    }

    pub fn read_rate_objects(&self) -> Result<f64> {
        Ok(self.units()?.mbps_to_objects(self.cache.read_rate_mbps))
    }

    pub fn warmup_frames(&self) -> u64 {
        (self.timing.frames as f64 * self.timing.warmup_fraction).floor() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        let t = &self.topology;
        if t.n_pairs == 0 || t.tx_antennas == 0 || t.rx_antennas == 0 {
            return bad("topology needs at least one pair and one antenna per side");
        }
        if self.phy.coordinated_users == 0 || self.phy.coordinated_users > t.tx_antennas {
            return bad("coordinated_users must be between 1 and tx_antennas");
        }
        if !self.phy.tx_snr_db.is_finite() {
            return bad("tx_snr_db must be finite");
        }
        self.units()?;
        if self.timing.frame_slots == 0 || self.timing.frames == 0 {
            return bad("timing needs at least one frame of one slot");
        }
        if !(0.0..1.0).contains(&self.timing.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1)");
        }
        let tr = &self.traffic;
        if !(tr.lambda_mbps >= 0.0) || !tr.lambda_mbps.is_finite() {
            return bad("lambda_mbps must be finite and non-negative");
        }
        if tr.catalog_size == 0 || tr.catalog_size > tr.library_size {
            return bad("catalog_size must be between 1 and library_size");
        }
        if !(tr.skewness >= 0.0) {
            return bad("skewness must be non-negative");
        }
        let c = &self.cache;
        if c.capacity > tr.library_size {
            return bad("cache capacity exceeds the library");
        }
        if !(c.gamma >= 0.0) || !(c.w > 0.0) || !(c.read_rate_mbps >= 0.0) {
            return bad("cache gamma and read rate must be non-negative, w positive");
        }
        let b = &self.backhaul;
        if !(b.rate_mbps >= 0.0) || !(0.0..=1.0).contains(&b.placement_share_cap) {
            return bad("backhaul rate must be non-negative and the placement share in [0, 1]");
        }
        Ok(())
    }
}
