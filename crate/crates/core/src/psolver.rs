//! Primal-dual iteration for the Utopian-point Pascoletti-Serafini
//! scalarization of the weighted-sum-rate problem over the weighted cone.
//!
//! One layer maps `(t, x, lambda)` to
//!
//! ```text
//! t'      = t - a1 (1 - lambda w.r)
//! g       = J(x)^T w
//! x'      = clamp01(x + (a2 / |g|) lambda g)
//! lambda' = max(0, lambda - a3 w.(a + t' r + R(x')))
//! ```
//!
//! With a constant step schedule this is the untrained solver (VIVA); with a
//! learned per-layer schedule it is the unfolded solver (LUVA). `Plain` mode
//! drops the gradient normalisation and the dual projection and exists only
//! for the oscillation ablation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LuvaError, Result};
use crate::netgen::NetworkInstance;
use crate::rates::{dot, norm2, PowerAllocation, RateEval, ScalarizationFrame};

pub const DEFAULT_STEP: f64 = 0.003;
pub const ABLATION_STEPS: [f64; 4] = [0.001, 0.003, 0.006, 0.009];
pub const DEFAULT_X0: f64 = 0.01;
pub const DEFAULT_LAMBDA0: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub n_layers: usize,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub alpha3: Vec<f64>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl StepSchedule {
    pub fn constant(n_layers: usize, step: f64) -> Self {
        Self {
            n_layers,
            alpha1: vec![step; n_layers],
            alpha2: vec![step; n_layers],
            alpha3: vec![step; n_layers],
            metadata: serde_json::Value::Null,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(LuvaError::InvalidArgument(
                "schedule needs at least one layer".into(),
            ));
        }
        let n = self.n_layers;
        if self.alpha1.len() != n || self.alpha2.len() != n || self.alpha3.len() != n {
            return Err(LuvaError::InvalidArgument(format!(
                "schedule vectors must all have length {n}"
            )));
        }
        if self.params().any(|a| !a.is_finite()) {
            return Err(LuvaError::NonFinite("step schedule"));
        }
        Ok(())
    }

    fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.alpha1
            .iter()
            .chain(&self.alpha2)
            .chain(&self.alpha3)
            .copied()
    }

    pub fn param_count(&self) -> usize {
        3 * self.n_layers
    }

    /// Flat `[alpha1; alpha2; alpha3]` parameter vector.
    pub fn to_flat(&self) -> Vec<f64> {
        self.params().collect()
    }

    pub fn from_flat(n_layers: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != 3 * n_layers {
            return Err(LuvaError::InvalidArgument(format!(
                "expected {} parameters, got {}",
                3 * n_layers,
                flat.len()
            )));
        }
        let s = Self {
            n_layers,
            alpha1: flat[..n_layers].to_vec(),
            alpha2: flat[n_layers..2 * n_layers].to_vec(),
            alpha3: flat[2 * n_layers..].to_vec(),
            metadata: serde_json::Value::Null,
        };
        s.validate()?;
        Ok(s)
    }

    /// The first `k` layers.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.n_layers);
        Self {
            n_layers: k,
            alpha1: self.alpha1[..k].to_vec(),
            alpha2: self.alpha2[..k].to_vec(),
            alpha3: self.alpha3[..k].to_vec(),
            metadata: serde_json::Value::Null,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        s.validate()?;
        Ok(s)
    }
}

/// Constant schedule `alpha1 = alpha2 = alpha3 = 0.003` for every layer.
pub fn viva_defaults(n_layers: usize) -> StepSchedule {
    StepSchedule::constant(n_layers, DEFAULT_STEP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    #[default]
    Normalized,
    Plain,
}

impl std::str::FromStr for SolverMode {
    type Err = LuvaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Self::Normalized),
            "plain" => Ok(Self::Plain),
            other => Err(LuvaError::InvalidArgument(format!(
                "unknown solver mode {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceLevel {
    #[default]
    Full,
    FinalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub mode: SolverMode,
    /// Initial power level applied to every link.
    pub x0: f64,
    pub lambda0: f64,
    pub t0: f64,
    pub trace: TraceLevel,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mode: SolverMode::Normalized,
            x0: DEFAULT_X0,
            lambda0: DEFAULT_LAMBDA0,
            t0: 0.0,
            trace: TraceLevel::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub x: Vec<f64>,
    pub lambda: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub lambda: f64,
    pub weighted_sum_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
}

impl SolverTrace {
    pub fn wsr_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.weighted_sum_rate).collect()
    }
}

pub fn init_state(net: &NetworkInstance, _frame: &ScalarizationFrame) -> SolverState {
    init_state_with(net.k, &SolverOptions::default())
}

pub fn init_state_with(k: usize, opts: &SolverOptions) -> SolverState {
    SolverState {
        t: opts.t0,
        x: vec![opts.x0.clamp(0.0, 1.0); k],
        lambda: opts.lambda0,
        k: 0,
    }
}

fn check_finite(state: &SolverState, alphas: [f64; 3]) -> Result<()> {
    if !state.t.is_finite() || !state.lambda.is_finite() || state.x.iter().any(|v| !v.is_finite()) {
        return Err(LuvaError::NonFinite("solver state"));
    }
    if alphas.iter().any(|a| !a.is_finite()) {
        return Err(LuvaError::NonFinite("step sizes"));
    }
    Ok(())
}

/// One layer, reusing `eval` (the rate evaluation at `state.x`). Returns the
/// next state and the rate evaluation at the new `x`.
fn step_cached(
    state: &SolverState,
    eval: &RateEval,
    frame: &ScalarizationFrame,
    net: &NetworkInstance,
    alphas: [f64; 3],
    mode: SolverMode,
) -> Result<(SolverState, RateEval)> {
    check_finite(state, alphas)?;
    let [a1, a2, a3] = alphas;
    let w = &frame.weights;
    let s = frame.w_dot_direction();
    let lambda = state.lambda;

    let t = state.t - a1 * (1.0 - lambda * s);

    let g = eval.jacobian_t_w(net, w);
    let scale = match mode {
        SolverMode::Normalized => {
            let n = norm2(&g);
            if n > 0.0 {
                Some(a2 / n)
            } else {
                None
            }
        }
        SolverMode::Plain => Some(a2),
    };
    let x: Vec<f64> = match scale {
        Some(c) => state
            .x
            .iter()
            .zip(&g)
            .map(|(xi, gi)| (xi + c * lambda * gi).clamp(0.0, 1.0))
            .collect(),
        None => state.x.clone(),
    };

    let next_eval = RateEval::new(&x, net);
    let slack = frame.w_dot_reference() + t * s + dot(w, &next_eval.rates);
    let raw = lambda - a3 * slack;
    let lambda = match mode {
        SolverMode::Normalized => raw.max(0.0),
        SolverMode::Plain => raw,
    };
    let next = SolverState {
        t,
        x,
        lambda,
        k: state.k + 1,
    };
    if !next.t.is_finite() || !next.lambda.is_finite() {
        return Err(LuvaError::NonFinite("solver update"));
    }
    Ok((next, next_eval))
}

/// A single primal-dual layer with step sizes `(a1, a2, a3)`.
pub fn pd_step(
    state: &SolverState,
    frame: &ScalarizationFrame,
    net: &NetworkInstance,
    alphas: [f64; 3],
    mode: SolverMode,
) -> Result<SolverState> {
    if state.x.len() != net.k {
        return Err(LuvaError::InvalidArgument(
            "state dimension does not match network".into(),
        ));
    }
    check_finite(state, alphas)?;
    let eval = RateEval::new(&state.x, net);
    step_cached(state, &eval, frame, net, alphas, mode).map(|(s, _)| s)
}

/// Runs every layer of `schedule` from the default initial state.
pub fn run(
    net: &NetworkInstance,
    w: &[f64],
    schedule: &StepSchedule,
    mode: SolverMode,
) -> Result<(PowerAllocation, SolverTrace)> {
    run_with(
        net,
        w,
        schedule,
        &SolverOptions {
            mode,
            ..Default::default()
        },
    )
}

pub fn run_with(
    net: &NetworkInstance,
    w: &[f64],
    schedule: &StepSchedule,
    opts: &SolverOptions,
) -> Result<(PowerAllocation, SolverTrace)> {
    schedule.validate()?;
    let frame = ScalarizationFrame::new(net, w)?;
    let mut state = init_state_with(net.k, opts);
    let mut eval = RateEval::new(&state.x, net);
    let mut trace = SolverTrace::default();
    let record = |state: &SolverState, eval: &RateEval| TraceRecord {
        k: state.k,
        t: state.t,
        x: state.x.clone(),
        lambda: state.lambda,
        weighted_sum_rate: eval.weighted_sum(w),
    };
    if opts.trace == TraceLevel::Full {
        trace.records.push(record(&state, &eval));
    }
    for layer in 0..schedule.n_layers {
        let alphas = [
            schedule.alpha1[layer],
            schedule.alpha2[layer],
            schedule.alpha3[layer],
        ];
        let (next, next_eval) = step_cached(&state, &eval, &frame, net, alphas, opts.mode)?;
        state = next;
        eval = next_eval;
        if opts.trace == TraceLevel::Full {
            trace.records.push(record(&state, &eval));
        }
    }
    if opts.trace == TraceLevel::FinalOnly {
        trace.records.push(record(&state, &eval));
    }
    Ok((PowerAllocation::clamped(state.x), trace))
}

/// Final allocation only, for batch evaluation.
pub fn solve(
    net: &NetworkInstance,
    w: &[f64],
    schedule: &StepSchedule,
    x0: f64,
) -> Result<PowerAllocation> {
    let opts = SolverOptions {
        x0,
        trace: TraceLevel::FinalOnly,
        ..Default::default()
    };
    run_with(net, w, schedule, &opts).map(|(x, _)| x)
}
