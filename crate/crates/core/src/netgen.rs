//! Random D2D layouts and the geometry-to-gain conversion.
//!
//! Transmitters are dropped uniformly in a square; each receiver is placed
//! around its own transmitter at a uniformly drawn angle and a uniformly drawn
//! radius in `[d_min, d_max]`. Gains follow the line-of-sight ITU-1411 short
//! range model with a two-slope breakpoint and no fading.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{LuvaError, Result};
use crate::seeding::{self, derive_seed, STREAM_WEIGHTS};

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub antenna_height_m: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub d_min_m: f64,
    pub d_max_m: f64,
    pub area_side_m: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            carrier_hz: 2.4e9,
            antenna_height_m: 1.5,
            tx_power_dbm: 20.0,
            noise_psd_dbm_hz: -174.0,
            d_min_m: 2.0,
            d_max_m: 65.0,
            area_side_m: 500.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.bandwidth_hz,
            self.carrier_hz,
            self.antenna_height_m,
            self.tx_power_dbm,
            self.noise_psd_dbm_hz,
            self.d_min_m,
            self.d_max_m,
            self.area_side_m,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(LuvaError::NonFinite("system parameters"));
        }
        if !(self.d_min_m > 0.0 && self.d_min_m < self.d_max_m) {
            return Err(LuvaError::InvalidArgument(format!(
                "need 0 < d_min ({}) < d_max ({})",
                self.d_min_m, self.d_max_m
            )));
        }
        if self.area_side_m <= 0.0 || self.bandwidth_hz <= 0.0 {
            return Err(LuvaError::InvalidArgument(
                "area side and bandwidth must be positive".into(),
            ));
        }
        if self.carrier_hz <= 0.0 || self.antenna_height_m <= 0.0 {
            return Err(LuvaError::InvalidArgument(
                "carrier frequency and antenna height must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Breakpoint distance `4 h^2 / lambda`.
    pub fn breakpoint_m(&self) -> f64 {
        4.0 * self.antenna_height_m * self.antenna_height_m / self.wavelength_m()
    }

    /// Basic transmission loss at the breakpoint, in dB.
    pub fn breakpoint_loss_db(&self) -> f64 {
        let lambda = self.wavelength_m();
        let h2 = self.antenna_height_m * self.antenna_height_m;
        (20.0 * (lambda * lambda / (8.0 * PI * h2)).log10()).abs()
    }

    pub fn tx_power_mw(&self) -> f64 {
        10f64.powf(self.tx_power_dbm / 10.0)
    }
}

/// Median line-of-sight pathloss in dB at distance `d_m`.
pub fn pathloss_db(d_m: f64, params: &SystemParams) -> Result<f64> {
    if !(d_m > 0.0) || !d_m.is_finite() {
        return Err(LuvaError::Domain(format!(
            "pathloss distance must be > 0, got {d_m}"
        )));
    }
    let r_bp = params.breakpoint_m();
    let l_bp = params.breakpoint_loss_db();
    let slope = if d_m <= r_bp { 20.0 } else { 40.0 };
    Ok(l_bp + 6.0 + slope * (d_m / r_bp).log10())
}

/// Thermal noise power over the band, in mW.
pub fn noise_power_mw(params: &SystemParams) -> f64 {
    10f64.powf((params.noise_psd_dbm_hz + 10.0 * params.bandwidth_hz.log10()) / 10.0)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Row-major `K x K` matrix with `G[i][j]` the power received at `Rx_i` from
/// `Tx_j` transmitting at full power.
pub fn gains_from_geometry(
    tx_pos: &[[f64; 2]],
    rx_pos: &[[f64; 2]],
    params: &SystemParams,
) -> Result<Vec<f64>> {
    if tx_pos.len() != rx_pos.len() {
        return Err(LuvaError::InvalidArgument(format!(
            "{} transmitters but {} receivers",
            tx_pos.len(),
            rx_pos.len()
        )));
    }
    let k = tx_pos.len();
    let p = params.tx_power_mw();
    let mut gain = Vec::with_capacity(k * k);
    for rx in rx_pos {
        for tx in tx_pos {
            let d = distance(*tx, *rx);
            if d <= 0.0 {
                return Err(LuvaError::Domain(
                    "transmitter and receiver coincide".into(),
                ));
            }
            gain.push(p * 10f64.powf(-pathloss_db(d, params)? / 10.0));
        }
    }
    Ok(gain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    pub seed: u64,
    pub k: usize,
    pub params: SystemParams,
    pub tx_pos: Vec<[f64; 2]>,
    pub rx_pos: Vec<[f64; 2]>,
    /// Row-major linear gains in mW.
    pub gain: Vec<f64>,
    pub noise_power: f64,
}

impl NetworkInstance {
    /// Builds an instance directly from a gain matrix, without geometry.
    pub fn from_gain_matrix(rows: &[Vec<f64>], noise_power: f64) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(LuvaError::InvalidArgument("empty gain matrix".into()));
        }
        if rows.iter().any(|r| r.len() != k) {
            return Err(LuvaError::InvalidArgument(
                "gain matrix must be square".into(),
            ));
        }
        let gain: Vec<f64> = rows.iter().flatten().copied().collect();
        if gain.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(LuvaError::InvalidArgument(
                "gains must be finite and non-negative".into(),
            ));
        }
        if !(noise_power > 0.0) || !noise_power.is_finite() {
            return Err(LuvaError::InvalidArgument(
                "noise power must be positive".into(),
            ));
        }
        Ok(Self {
            seed: 0,
            k,
            params: SystemParams::default(),
            tx_pos: Vec::new(),
            rx_pos: Vec::new(),
            gain,
            noise_power,
        })
    }

    #[inline]
    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.gain[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.gain[i * self.k..(i + 1) * self.k]
    }

    /// Relabels links so that new link `n` is old link `perm[n]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.k;
        let mut gain = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                gain[i * k + j] = self.g(perm[i], perm[j]);
            }
        }
        let pick = |v: &Vec<[f64; 2]>| {
            if v.is_empty() {
                Vec::new()
            } else {
                perm.iter().map(|&p| v[p]).collect()
            }
        };
        Self {
            gain,
            tx_pos: pick(&self.tx_pos),
            rx_pos: pick(&self.rx_pos),
            ..self.clone()
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let net: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if net.gain.len() != net.k * net.k || net.k == 0 {
            return Err(LuvaError::InvalidArgument(format!(
                "layout {}: gain has {} entries for k = {}",
                path.display(),
                net.gain.len(),
                net.k
            )));
        }
        Ok(net)
    }
}

/// Draws a layout; bit-identical for identical `(params, k, seed)`.
pub fn sample_layout(params: &SystemParams, k: usize, seed: u64) -> Result<NetworkInstance> {
    if k == 0 {
        return Err(LuvaError::InvalidArgument("k must be at least 1".into()));
    }
    params.validate()?;
    let mut rng = seeding::rng(seed);
    let side = params.area_side_m;
    let mut tx_pos = Vec::with_capacity(k);
    let mut rx_pos = Vec::with_capacity(k);
    for _ in 0..k {
        let tx = [rng.gen::<f64>() * side, rng.gen::<f64>() * side];
        let theta = rng.gen::<f64>() * 2.0 * PI;
        let r = params.d_min_m + rng.gen::<f64>() * (params.d_max_m - params.d_min_m);
        tx_pos.push(tx);
        rx_pos.push([tx[0] + r * theta.cos(), tx[1] + r * theta.sin()]);
    }
    let gain = gains_from_geometry(&tx_pos, &rx_pos, params)?;
    Ok(NetworkInstance {
        seed,
        k,
        params: *params,
        tx_pos,
        rx_pos,
        gain,
        noise_power: noise_power_mw(params),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDist {
    Uniform01,
    AllOnes,
}

impl std::str::FromStr for WeightDist {
    type Err = LuvaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "uniform01" => Ok(Self::Uniform01),
            "ones" | "all_ones" => Ok(Self::AllOnes),
            other => Err(LuvaError::InvalidArgument(format!(
                "unknown weight distribution {other}"
            ))),
        }
    }
}

pub fn sample_weights(k: usize, dist: WeightDist, seed: u64) -> Vec<f64> {
    match dist {
        WeightDist::AllOnes => vec![1.0; k],
        WeightDist::Uniform01 => {
            let mut rng = seeding::rng(seed);
            (0..k).map(|_| rng.gen::<f64>()).collect()
        }
    }
}

/// A network together with its link weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub net: NetworkInstance,
    pub w: Vec<f64>,
}

/// Draws sample `index` of stream `stream` under base seed `seed`.
pub fn sample_at(
    params: &SystemParams,
    k: usize,
    dist: WeightDist,
    seed: u64,
    stream: u64,
    index: u64,
) -> Result<Sample> {
    let s = derive_seed(seed, stream, index);
    let net = sample_layout(params, k, s)?;
    let w = sample_weights(k, dist, derive_seed(s, STREAM_WEIGHTS, 0));
    Ok(Sample { net, w })
}

pub fn sample_set(
    params: &SystemParams,
    k: usize,
    dist: WeightDist,
    seed: u64,
    stream: u64,
    n: usize,
) -> Result<Vec<Sample>> {
    (0..n as u64)
        .map(|i| sample_at(params, k, dist, seed, stream, i))
        .collect()
}
