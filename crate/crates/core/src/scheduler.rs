//! Virtual-queue drift-plus-penalty (DPP) fairness scheduler.
//!
//! Per slot: pick auxiliary arrivals `a` from the utility's auxiliary
//! problem, solve the weighted-sum-rate problem with the queue lengths as
//! weights, then push `a` into and drain the achieved rates out of the
//! queues. Both auxiliary problems are solved in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{LuvaError, Result};
use crate::netgen::NetworkInstance;
use crate::rates::{utopian_point, RateEval};
use crate::wsrm::WsrmSolver;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub q: Vec<f64>,
    pub t_slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    ProportionalFair,
    WeightedMaxMin,
}

impl UtilityKind {
    pub fn default_v(&self) -> f64 {
        match self {
            UtilityKind::ProportionalFair => 10.0,
            UtilityKind::WeightedMaxMin => 40.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            UtilityKind::ProportionalFair => "pf",
            UtilityKind::WeightedMaxMin => "maxmin",
        }
    }
}

impl std::str::FromStr for UtilityKind {
    type Err = LuvaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pf" | "proportional_fair" => Ok(Self::ProportionalFair),
            "maxmin" | "weighted_max_min" => Ok(Self::WeightedMaxMin),
            other => Err(LuvaError::InvalidArgument(format!(
                "unknown utility {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    pub v: f64,
    pub a_max: f64,
}

impl UtilitySpec {
    /// `a_max` is the largest Utopian component of `net`.
    pub fn for_network(kind: UtilityKind, v: f64, net: &NetworkInstance) -> Result<Self> {
        if !(v > 0.0) {
            return Err(LuvaError::InvalidArgument(format!(
                "V must be positive, got {v}"
            )));
        }
        let a_max = utopian_point(net).into_iter().fold(0.0, f64::max);
        if !(a_max > 0.0) {
            return Err(LuvaError::DegenerateNetwork);
        }
        Ok(Self { kind, v, a_max })
    }
}

/// `q'_i = max(0, q_i - r_i) + a_i`.
pub fn queue_update(q: &QueueState, r: &[f64], a: &[f64]) -> QueueState {
    QueueState {
        q: q.q
            .iter()
            .zip(r)
            .zip(a)
            .map(|((qi, ri), ai)| (qi - ri).max(0.0) + ai)
            .collect(),
        t_slot: q.t_slot + 1,
    }
}

/// Maximiser of `V log a_i - q_i a_i` on `[0, a_max]`: `min(a_max, V / q_i)`.
pub fn aux_proportional(q: &[f64], v: f64, a_max: f64) -> Vec<f64> {
    q.iter()
        .map(|&qi| {
            if qi <= 0.0 {
                a_max
            } else {
                (v / qi).min(a_max)
            }
        })
        .collect()
}

/// Maximiser of `V min_i a_i / u_i - sum_i q_i a_i` on `[0, a_max]^K`.
///
/// The optimum is `a = m u`; the objective is linear in `m` with slope
/// `V - sum_i q_i u_i`, so `m` is 1 when the slope is non-negative and 0
/// otherwise.
pub fn aux_maxmin(q: &[f64], v: f64, u: &[f64], a_max: f64) -> Vec<f64> {
    let cost: f64 = q.iter().zip(u).map(|(qi, ui)| qi * ui).sum();
    let m = if v >= cost { 1.0 } else { 0.0 };
    u.iter().map(|ui| (m * ui).min(a_max)).collect()
}

/// `(prod r_i)^(1/K)`, evaluated in log space.
pub fn geometric_mean(r: &[f64]) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    if r.iter().any(|v| *v <= 0.0) {
        return 0.0;
    }
    (r.iter().map(|v| v.ln()).sum::<f64>() / r.len() as f64).exp()
}

pub fn utility(kind: UtilityKind, rbar: &[f64], u: &[f64]) -> f64 {
    match kind {
        UtilityKind::ProportionalFair => rbar.iter().map(|r| r.ln()).sum(),
        UtilityKind::WeightedMaxMin => rbar
            .iter()
            .zip(u)
            .map(|(r, ui)| r / ui)
            .fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DppConfig {
    pub t_total: usize,
    pub t_avg: usize,
    pub q0: f64,
}

impl Default for DppConfig {
    fn default() -> Self {
        Self {
            t_total: 1000,
            t_avg: 500,
            q0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DppOutcome {
    pub throughput: Vec<f64>,
    /// Queue lengths at the start of every slot, plus the final state.
    pub queue_trace: Vec<Vec<f64>>,
    pub rate_trace: Vec<Vec<f64>>,
    pub utility: f64,
    pub spec: UtilitySpec,
}

impl DppOutcome {
    pub fn final_queues(&self) -> &[f64] {
        self.queue_trace.last().map(|q| q.as_slice()).unwrap_or(&[])
    }

    /// `max_i Q_i(T) / T`.
    pub fn queue_growth(&self) -> f64 {
        let t = (self.queue_trace.len() - 1).max(1) as f64;
        self.final_queues().iter().fold(0.0, |a: f64, b| a.max(*b)) / t
    }
}

pub fn dpp_run(
    net: &NetworkInstance,
    solver: &WsrmSolver,
    kind: UtilityKind,
    v: f64,
    cfg: &DppConfig,
) -> Result<DppOutcome> {
    if cfg.t_avg == 0 || cfg.t_avg > cfg.t_total {
        return Err(LuvaError::InvalidArgument(format!(
            "need 1 <= t_avg ({}) <= t_total ({})",
            cfg.t_avg, cfg.t_total
        )));
    }
    let spec = UtilitySpec::for_network(kind, v, net)?;
    let u = utopian_point(net);
    let mut state = QueueState {
        q: vec![cfg.q0; net.k],
        t_slot: 0,
    };
    let mut queue_trace = Vec::with_capacity(cfg.t_total + 1);
    let mut rate_trace = Vec::with_capacity(cfg.t_total);
    for _ in 0..cfg.t_total {
        queue_trace.push(state.q.clone());
        let a = match kind {
            UtilityKind::ProportionalFair => aux_proportional(&state.q, v, spec.a_max),
            UtilityKind::WeightedMaxMin => aux_maxmin(&state.q, v, &u, spec.a_max),
        };
        let weights = match solver {
            WsrmSolver::Unfolded { .. } => {
                let m = state.q.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
                if m > 0.0 {
                    state.q.iter().map(|q| q / m).collect()
                } else {
                    state.q.clone()
                }
            }
            WsrmSolver::Fplinq { .. } => state.q.clone(),
        };
        let x = solver.solve(net, &weights)?;
        let rates = RateEval::new(x.as_slice(), net).rates;
        state = queue_update(&state, &rates, &a);
        rate_trace.push(rates);
    }
    queue_trace.push(state.q.clone());
    let tail = &rate_trace[cfg.t_total - cfg.t_avg..];
    let throughput: Vec<f64> = (0..net.k)
        .map(|i| tail.iter().map(|r| r[i]).sum::<f64>() / cfg.t_avg as f64)
        .collect();
    let utility = utility(kind, &throughput, &u);
    Ok(DppOutcome {
        throughput,
        queue_trace,
        rate_trace,
        utility,
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psolver::StepSchedule;

    fn qs(q: &[f64]) -> QueueState {
        QueueState {
            q: q.to_vec(),
            t_slot: 0,
        }
    }

    #[test]
    fn queue_update_examples() {
        assert_eq!(queue_update(&qs(&[5.0]), &[2.0], &[1.0]).q, vec![4.0]);
        assert_eq!(queue_update(&qs(&[1.0]), &[3.0], &[0.5]).q, vec![0.5]);
        assert_eq!(queue_update(&qs(&[100.0]), &[2.5], &[2.5]).q, vec![100.0]);
        assert_eq!(queue_update(&qs(&[1.0]), &[0.0], &[0.0]).t_slot, 1);
    }

    #[test]
    fn aux_proportional_examples() {
        assert_eq!(aux_proportional(&[5.0, 2.0], 10.0, 4.0), vec![2.0, 4.0]);
        assert_eq!(aux_proportional(&[0.0], 10.0, 4.0), vec![4.0]);
        let small = aux_proportional(&[1.0, 3.0], 1e-9, 4.0);
        assert!(small.iter().all(|a| *a > 0.0 && *a < 1e-8));
    }

    #[test]
    fn aux_maxmin_examples() {
        assert_eq!(
            aux_maxmin(&[1.0, 1.0], 10.0, &[2.0, 3.0], 3.0),
            vec![2.0, 3.0]
        );
        assert_eq!(
            aux_maxmin(&[1.0, 1.0], 4.0, &[2.0, 3.0], 3.0),
            vec![0.0, 0.0]
        );
        assert_eq!(
            aux_maxmin(&[0.0, 0.0], 4.0, &[2.0, 3.0], 3.0),
            vec![2.0, 3.0]
        );
    }

    #[test]
    fn geometric_mean_examples() {
        assert!((geometric_mean(&[1.0, 4.0]) - 2.0).abs() < 1e-15);
        assert_eq!(geometric_mean(&[3.0, 0.0, 2.0]), 0.0);
        assert!(
            (geometric_mean(&[2.0, 5.0, 7.0]) - geometric_mean(&[7.0, 2.0, 5.0])).abs() < 1e-15
        );
    }

    #[test]
    fn single_link_runs_at_full_power() {
        let net = NetworkInstance::from_gain_matrix(&[vec![4.0]], 1.0).unwrap();
        let u1 = 5f64.ln();
        let solvers = [
            WsrmSolver::fplinq_default(),
            WsrmSolver::unfolded(StepSchedule::constant(2, 1.0)),
        ];
        for solver in &solvers {
            for kind in [UtilityKind::ProportionalFair, UtilityKind::WeightedMaxMin] {
                let cfg = DppConfig {
                    t_total: 100,
                    t_avg: 50,
                    q0: 1.0,
                };
                let out = dpp_run(&net, solver, kind, kind.default_v(), &cfg).unwrap();
                for (q, r) in out.queue_trace.iter().zip(&out.rate_trace) {
                    if q[0] > 0.0 {
                        assert!((r[0] - u1).abs() < 1e-12);
                    }
                }
                assert!((out.throughput[0] - u1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_links_share_equally() {
        let net = NetworkInstance::from_gain_matrix(&[vec![1e-6, 1e-8], vec![1e-8, 1e-6]], 1e-10)
            .unwrap();
        let out = dpp_run(
            &net,
            &WsrmSolver::fplinq_default(),
            UtilityKind::ProportionalFair,
            10.0,
            &DppConfig::default(),
        )
        .unwrap();
        let r = &out.throughput;
        assert!((r[0] - r[1]).abs() / r[0] < 0.05, "{r:?}");
    }

    #[test]
    fn rejects_bad_averaging_window() {
        let net = NetworkInstance::from_gain_matrix(&[vec![4.0]], 1.0).unwrap();
        let cfg = DppConfig {
            t_total: 10,
            t_avg: 20,
            q0: 1.0,
        };
        assert!(dpp_run(
            &net,
            &WsrmSolver::fplinq_default(),
            UtilityKind::ProportionalFair,
            10.0,
            &cfg
        )
        .is_err());
        assert!(UtilitySpec::for_network(UtilityKind::ProportionalFair, 0.0, &net).is_err());
    }
}
