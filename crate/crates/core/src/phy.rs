//! Channel realizations and zero-forcing rate points for the two PHY modes.
//!
//! Noise is unit-variance AWGN per receive antenna, so the per-BS power `P`
//! is a transmit SNR. All rate functions require single-antenna users.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{RngStreams, Stream, Topology, UnitContext};

/// Relative residual under which a projected beam is treated as null.
const RANK_TOL: f64 = 1e-10;

/// 3GPP macro pathloss in dB with distance in kilometers.
pub fn pathloss_db(distance_km: f64) -> f64 {
    140.7 + 36.7 * distance_km.log10()
}

/// Amplitude gain for a power loss expressed in dB.
pub fn amplitude_gain(pathloss_db: f64) -> f64 {
    10f64.powf(-pathloss_db / 20.0)
}

/// Large-scale gains of every user/BS link; small-scale fading is drawn per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub n: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    /// Amplitude gain indexed `j * n + bs`.
    pub gains: Vec<f64>,
}

impl ChannelModel {
    pub fn from_topology(topology: &Topology) -> Self {
        let n = topology.n_pairs();
        let gains = topology
            .distances_m
            .iter()
            .flat_map(|row| row.iter().map(|&d| amplitude_gain(pathloss_db(d / 1000.0))))
            .collect();
        Self {
            n,
            tx_antennas: topology.tx_antennas,
            rx_antennas: topology.rx_antennas,
            gains,
        }
    }

    /// Unit large-scale gain on every link (pure Rayleigh fading).
    pub fn unit(n: usize, tx_antennas: usize, rx_antennas: usize) -> Self {
        Self {
            n,
            tx_antennas,
            rx_antennas,
            gains: vec![1.0; n * n],
        }
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R, slot: u64) -> ChannelState {
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let h = self
            .gains
            .iter()
            .map(|&g| {
                DMatrix::from_fn(self.rx_antennas, self.tx_antennas, |_, _| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * scale * g, im * scale * g)
                })
            })
            .collect();
        ChannelState {
            slot,
            n: self.n,
            tx_antennas: self.tx_antennas,
            rx_antennas: self.rx_antennas,
            h,
        }
    }

    /// Channel realization of slot `t`; identical for identical (seed, t).
    pub fn sample(&self, streams: &RngStreams, t: u64) -> ChannelState {
        self.sample_with(&mut streams.slot_rng(Stream::Channels, t), t)
    }

    fn resample(&self, streams: &RngStreams, t: u64) -> ChannelState {
        self.sample_with(&mut streams.slot_rng(Stream::Channels, t ^ (1 << 63)), t)
    }
}

/// Quasi-static channel of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub slot: u64,
    pub n: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    /// `L_R x L_T` matrices indexed `j * n + bs`.
    pub h: Vec<DMatrix<Complex64>>,
}

impl ChannelState {
    pub fn link(&self, user: usize, bs: usize) -> &DMatrix<Complex64> {
        &self.h[user * self.n + bs]
    }

    /// Composite `N x N*L_T` matrix; row `j` stacks user `j`'s links to all BSs.
    pub fn composite(&self) -> DMatrix<Complex64> {
        let lt = self.tx_antennas;
        DMatrix::from_fn(self.n, self.n * lt, |j, col| self.link(j, col / lt)[(0, col % lt)])
    }

    fn require_single_rx(&self) -> Result<()> {
        if self.rx_antennas != 1 {
            return Err(Error::UnsupportedAntennas(format!(
                "zero-forcing rates need single-antenna users, got L_R = {}",
                self.rx_antennas
            )));
        }
        Ok(())
    }
}

/// Achievable rate points of both modes for one slot, in objects/slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatePair {
    pub comp: Vec<f64>,
    pub coord: Vec<f64>,
    pub scheduled: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CompZf {
    /// Columns are the per-user composite beams `V_j^A`.
    pub precoder: DMatrix<Complex64>,
    pub xi: f64,
    pub rates_bps: Vec<f64>,
    pub rates: Vec<f64>,
}

impl CompZf {
    /// Transmit power of each BS, `Tr(X_n X_n^H)/N_c` with unit-power symbols.
    pub fn bs_powers(&self, tx_antennas: usize) -> Vec<f64> {
        bs_powers(&self.precoder, tx_antennas)
    }
}

fn bs_powers(v: &DMatrix<Complex64>, lt: usize) -> Vec<f64> {
    (0..v.nrows() / lt)
        .map(|n| v.rows(n * lt, lt).iter().map(|c| c.norm_sqr()).sum())
        .collect()
}

/// Joint ZF precoding over all BSs; the scalar `xi` makes the busiest BS use exactly `power`.
pub fn comp_zf_rates(ch: &ChannelState, power: f64, ctx: &UnitContext) -> Result<CompZf> {
    ch.require_single_rx()?;
    let h = ch.composite();
    let gram = &h * h.adjoint();
    let inv = gram
        .clone()
        .try_inverse()
        .ok_or(Error::SingularChannel { slot: ch.slot })?;
    let unscaled = h.adjoint() * inv;
    // Rank check: H * V must reproduce the identity.
    let residual = (&h * &unscaled - DMatrix::<Complex64>::identity(ch.n, ch.n)).norm();
    if !residual.is_finite() || residual > 1e-6 {
        return Err(Error::SingularChannel { slot: ch.slot });
    }
    let peak = bs_powers(&unscaled, ch.tx_antennas).into_iter().fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::SingularChannel { slot: ch.slot });
    }
    let xi = (power / peak).sqrt();
    let precoder = unscaled * Complex64::new(xi, 0.0);

    let eff = &h * &precoder;
    let rates_bps: Vec<f64> = (0..ch.n)
        .map(|j| {
            let signal = eff[(j, j)].norm_sqr();
            let interference: f64 = (0..ch.n).filter(|&k| k != j).map(|k| eff[(j, k)].norm_sqr()).sum();
            ctx.bandwidth_hz * (1.0 + signal / (1.0 + interference)).log2()
        })
        .collect();
    let rates = rates_bps.iter().map(|&r| ctx.convert_rate(r)).collect();
    Ok(CompZf {
        precoder,
        xi,
        rates_bps,
        rates,
    })
}

#[derive(Debug, Clone)]
pub struct CoordZf {
    /// Unit-norm beam of each scheduled user, at its serving BS.
    pub beams: Vec<Option<DVector<Complex64>>>,
    pub rates_bps: Vec<f64>,
    pub rates: Vec<f64>,
}

/// Per-cell ZF: each scheduled user's beam is its own channel projected
/// away from the other scheduled users' channels from the same BS.
pub fn coordinated_zf_rates(
    ch: &ChannelState,
    serving: &[usize],
    scheduled: &[usize],
    power: f64,
    ctx: &UnitContext,
) -> Result<CoordZf> {
    ch.require_single_rx()?;
    if scheduled.len() > ch.tx_antennas {
        return Err(Error::InfeasibleSchedule {
            requested: scheduled.len(),
            antennas: ch.tx_antennas,
        });
    }
    let row_h = |user: usize, bs: usize| -> DVector<Complex64> {
        // Column vector h^H so that H * v = <h^H, v>.
        ch.link(user, bs).row(0).adjoint()
    };

    let mut beams: Vec<Option<DVector<Complex64>>> = vec![None; ch.n];
    for &j in scheduled {
        let bs = serving[j];
        let own = row_h(j, bs);
        // Orthonormal basis of the other users' directions (modified Gram-Schmidt).
        let mut basis: Vec<DVector<Complex64>> = Vec::new();
        for &other in scheduled.iter().filter(|&&o| o != j) {
            let mut u = row_h(other, bs);
            for b in &basis {
                let c = b.dotc(&u);
                u -= b * c;
            }
            let norm = u.norm();
            if norm > RANK_TOL * row_h(other, bs).norm() {
                basis.push(u / Complex64::new(norm, 0.0));
            }
        }
        let mut v = own.clone();
        for b in &basis {
            let c = b.dotc(&v);
            v -= b * c;
        }
        let norm = v.norm();
        if !(norm > RANK_TOL * own.norm()) {
            return Err(Error::SingularChannel { slot: ch.slot });
        }
        beams[j] = Some(v / Complex64::new(norm, 0.0));
    }

    let gain = |user: usize, tx_user: usize| -> f64 {
        let beam = beams[tx_user].as_ref().expect("scheduled user has a beam");
        let bs = serving[tx_user];
        (ch.link(user, bs) * beam)[(0, 0)].norm_sqr() * power
    };
    let rates_bps: Vec<f64> = (0..ch.n)
        .map(|j| {
            if beams[j].is_none() {
                return 0.0;
            }
            let signal = gain(j, j);
            let interference: f64 = scheduled.iter().filter(|&&o| o != j).map(|&o| gain(j, o)).sum();
            ctx.bandwidth_hz * (1.0 + signal / (1.0 + interference)).log2()
        })
        .collect();
    let rates = rates_bps.iter().map(|&r| ctx.convert_rate(r)).collect();
    Ok(CoordZf {
        beams,
        rates_bps,
        rates,
    })
}

/// Uniformly random subset of `size` users, sorted ascending.
pub fn sample_schedule<R: Rng>(rng: &mut R, n_users: usize, size: usize) -> Vec<usize> {
    let mut users = rand::seq::index::sample(rng, n_users, size.min(n_users)).into_vec();
    users.sort_unstable();
    users
}

/// Symmetric per-user DoF of the two ZF schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofSummary {
    pub d_a: f64,
    pub d_b: f64,
}

/// CoMP ZF serves all `n` users with one stream each; coordinated ZF serves
/// `scheduled` of them per slot.
pub fn dof_summary(n_users: usize, scheduled: usize) -> DofSummary {
    DofSummary {
        d_a: 1.0,
        d_b: scheduled.min(n_users) as f64 / n_users as f64,
    }
}

/// Slot-level PHY: channel sampling, scheduling and both rate points.
#[derive(Debug, Clone)]
pub struct Phy {
    pub channels: ChannelModel,
    pub serving: Vec<usize>,
    pub power: f64,
    pub coordinated_users: usize,
    pub units: UnitContext,
}

impl Phy {
    fn rates_for(&self, ch: &ChannelState, scheduled: &[usize]) -> Result<RatePair> {
        let comp = comp_zf_rates(ch, self.power, &self.units)?;
        let coord = coordinated_zf_rates(ch, &self.serving, scheduled, self.power, &self.units)?;
        Ok(RatePair {
            comp: comp.rates,
            coord: coord.rates,
            scheduled: scheduled.to_vec(),
        })
    }

    /// Rate points of slot `t`. A singular draw is resampled once.
    pub fn rates(&self, streams: &RngStreams, t: u64) -> Result<RatePair> {
        let scheduled = sample_schedule(
            &mut streams.slot_rng(Stream::Scheduling, t),
            self.channels.n,
            self.coordinated_users,
        );
        match self.rates_for(&self.channels.sample(streams, t), &scheduled) {
            Err(Error::SingularChannel { .. }) => {
                log::debug!("singular channel at slot {t}, resampling");
                self.rates_for(&self.channels.resample(streams, t), &scheduled)
            }
            other => other,
        }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits average sum rate (bps) against log2(P) for both modes and returns
/// the slopes divided by the bandwidth, i.e. the empirical sum DoF.
pub fn fit_sum_dof(
    model: &ChannelModel,
    serving: &[usize],
    coordinated_users: usize,
    powers_db: &[f64],
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let units = UnitContext::default();
    let streams = RngStreams::new(seed);
    let mut log_p = Vec::new();
    let mut comp_sum = Vec::new();
    let mut coord_sum = Vec::new();
    for &db in powers_db {
        let power = 10f64.powf(db / 10.0);
        let phy = Phy {
            channels: model.clone(),
            serving: serving.to_vec(),
            power,
            coordinated_users,
            units,
        };
        let (mut a, mut b) = (0.0, 0.0);
        for t in 1..=trials as u64 {
            let ch = model.sample(&streams, t);
            let scheduled = sample_schedule(&mut streams.slot_rng(Stream::Scheduling, t), model.n, coordinated_users);
            let comp = comp_zf_rates(&ch, phy.power, &units)?;
            let coord = coordinated_zf_rates(&ch, serving, &scheduled, phy.power, &units)?;
            a += comp.rates_bps.iter().sum::<f64>();
            b += coord.rates_bps.iter().sum::<f64>();
        }
        log_p.push(power.log2());
        comp_sum.push(a / trials as f64);
        coord_sum.push(b / trials as f64);
    }
    Ok((
        fit_slope(&log_p, &comp_sum) / units.bandwidth_hz,
        fit_slope(&log_p, &coord_sum) / units.bandwidth_hz,
    ))
}
