//! Benchmark evaluation: performance ratios against a reference solver,
//! summary statistics, empirical CDFs and generalization sweeps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LuvaError, Result};
use crate::netgen::{noise_power_mw, pathloss_db, sample_set, Sample, SystemParams, WeightDist};
use crate::rates::weighted_sum_rate;
use crate::seeding::STREAM_TEST;
use crate::wsrm::WsrmSolver;

pub const DEFAULT_TEST_SIZE: usize = 200;
pub const DEFAULT_BIN_WIDTH: f64 = 0.01;

/// `sum_i w_i R_i(x_hat) / sum_i w_i R_i(x_ref)`.
pub fn performance_ratio(
    net: &crate::netgen::NetworkInstance,
    w: &[f64],
    x_hat: &[f64],
    x_ref: &[f64],
) -> Result<f64> {
    let den = weighted_sum_rate(x_ref, w, net);
    if !(den > 0.0) {
        return Err(LuvaError::Domain(format!(
            "reference weighted sum rate is {den}, ratio undefined"
        )));
    }
    Ok(weighted_sum_rate(x_hat, w, net) / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedInstance {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ratios: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub histogram: Vec<HistBin>,
    pub cdf: Vec<(f64, f64)>,
    pub count_at_least_one: usize,
    pub fraction_at_least_one: f64,
    pub skipped: Vec<SkippedInstance>,
}

impl EvalReport {
    pub fn from_ratios(ratios: Vec<f64>, skipped: Vec<SkippedInstance>) -> Result<Self> {
        if ratios.is_empty() {
            return Err(LuvaError::InvalidArgument("no ratios to summarise".into()));
        }
        let (mean, std) = mean_std(&ratios);
        let count_at_least_one = ratios.iter().filter(|r| **r >= 1.0).count();
        Ok(Self {
            histogram: histogram(&ratios, DEFAULT_BIN_WIDTH),
            cdf: cdf_points(&ratios)?,
            fraction_at_least_one: count_at_least_one as f64 / ratios.len() as f64,
            count_at_least_one,
            mean,
            std,
            ratios,
            skipped,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fixed-width bins aligned to multiples of `width`; empty bins are omitted.
pub fn histogram(values: &[f64], width: f64) -> Vec<HistBin> {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for v in values {
        *bins.entry((v / width).floor() as i64).or_default() += 1;
    }
    bins.into_iter()
        .map(|(i, count)| HistBin {
            lo: i as f64 * width,
            hi: (i + 1) as f64 * width,
            count,
        })
        .collect()
}

/// Empirical CDF evaluated at the distinct sample values.
pub fn cdf_points(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(LuvaError::InvalidArgument("cdf of an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(LuvaError::NonFinite("cdf sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    if let Some(last) = out.last_mut() {
        last.1 = 1.0;
    }
    Ok(out)
}

/// Median of the empirical distribution (lower median for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[(sorted.len() - 1) / 2]
}

/// Runs both solvers once per instance and summarises `a / b` ratios.
pub fn evaluate(test_set: &[Sample], a: &WsrmSolver, b: &WsrmSolver) -> Result<EvalReport> {
    if test_set.is_empty() {
        return Err(LuvaError::InvalidArgument("empty test set".into()));
    }
    let per: Vec<Result<std::result::Result<f64, String>>> = test_set
        .par_iter()
        .map(|s| {
            let xa = a.solve(&s.net, &s.w)?;
            let xb = b.solve(&s.net, &s.w)?;
            Ok(
                performance_ratio(&s.net, &s.w, xa.as_slice(), xb.as_slice())
                    .map_err(|e| e.to_string()),
            )
        })
        .collect();
    let mut ratios = Vec::with_capacity(per.len());
    let mut skipped = Vec::new();
    for (index, r) in per.into_iter().enumerate() {
        match r? {
            Ok(v) => ratios.push(v),
            Err(reason) => skipped.push(SkippedInstance { index, reason }),
        }
    }
    EvalReport::from_ratios(ratios, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    KFixedArea,
    KFixedDensity,
    SnrOffset,
    DMin,
    DMax,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::KFixedArea => "k_fixed_area",
            SweepAxis::KFixedDensity => "k_fixed_density",
            SweepAxis::SnrOffset => "snr_offset",
            SweepAxis::DMin => "d_min",
            SweepAxis::DMax => "d_max",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = LuvaError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "k_fixed_area" => Self::KFixedArea,
            "k_fixed_density" => Self::KFixedDensity,
            "snr_offset" => Self::SnrOffset,
            "d_min" => Self::DMin,
            "d_max" => Self::DMax,
            other => {
                return Err(LuvaError::InvalidArgument(format!(
                    "unknown sweep axis {other}"
                )))
            }
        })
    }
}

/// Baseline setting a sweep perturbs along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepBase {
    pub params: SystemParams,
    pub k: usize,
    pub n_test: usize,
    pub seed: u64,
    pub weight_dist: WeightDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub setting: f64,
    pub k: usize,
    pub area_side_m: f64,
    /// Single-link SNR at `d_max` without interference, in dB.
    pub snr_label_db: f64,
    pub mean: f64,
    pub std: f64,
    pub skipped: usize,
}

/// Link count that keeps the base density on a square of side `side`.
pub fn density_scaled_k(k_base: usize, base_side: f64, side: f64) -> usize {
    ((k_base as f64) * (side / base_side).powi(2))
        .round()
        .max(1.0) as usize
}

pub fn snr_label_db(params: &SystemParams) -> Result<f64> {
    let noise_dbm = 10.0 * noise_power_mw(params).log10();
    Ok(params.tx_power_dbm - pathloss_db(params.d_max_m, params)? - noise_dbm)
}

/// Setting of one grid point: parameters and link count.
pub fn sweep_setting(
    base: &SweepBase,
    axis: SweepAxis,
    value: f64,
) -> Result<(SystemParams, usize)> {
    let mut p = base.params;
    let mut k = base.k;
    match axis {
        SweepAxis::KFixedArea => {
            if !(value >= 1.0) || value.fract() != 0.0 {
                return Err(LuvaError::InvalidArgument(format!("link count {value}")));
            }
            k = value as usize;
        }
        SweepAxis::KFixedDensity => {
            k = density_scaled_k(base.k, base.params.area_side_m, value);
            p.area_side_m = value;
        }
        SweepAxis::SnrOffset => p.tx_power_dbm += value,
        SweepAxis::DMin => p.d_min_m = value.min(nudge_below(p.d_max_m)),
        SweepAxis::DMax => p.d_max_m = value.max(nudge_above(p.d_min_m)),
    }
    p.validate()?;
    Ok((p, k))
}

// A grid end that collapses the distance range is evaluated on a
// vanishingly thin annulus instead.
fn nudge_below(v: f64) -> f64 {
    v * (1.0 - 1e-9)
}

fn nudge_above(v: f64) -> f64 {
    v * (1.0 + 1e-9)
}

pub fn sweep_generalization(
    solver: &WsrmSolver,
    reference: &WsrmSolver,
    base: &SweepBase,
    axis: SweepAxis,
    grid: &[f64],
) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|&value| {
            let (params, k) = sweep_setting(base, axis, value)?;
            let set = sample_set(
                &params,
                k,
                base.weight_dist,
                base.seed,
                STREAM_TEST,
                base.n_test,
            )?;
            let report = evaluate(&set, solver, reference)?;
            Ok(SweepRow {
                axis,
                setting: value,
                k,
                area_side_m: params.area_side_m,
                snr_label_db: snr_label_db(&params)?,
                mean: report.mean,
                std: report.std,
                skipped: report.skipped.len(),
            })
        })
        .collect()
}
