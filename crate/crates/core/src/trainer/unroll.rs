//! Forward pass with a tape through the unrolled primal-dual layers, and the
//! reverse pass that turns `d loss / d x^(k)` into step-size gradients.
//!
//! Subgradients: the box clamp passes gradient only where the pre-clamp value
//! is strictly inside `(0, 1)`, and `max(0, .)` only where its argument is
//! strictly positive. The `1 / |J^T w|` normalisation is differentiated
//! through, which needs the Hessian-vector product of `x -> J(x)^T w`.

use crate::error::{LuvaError, Result};
use crate::netgen::NetworkInstance;
use crate::psolver::StepSchedule;
use crate::rates::{dot, norm2, RateEval, ScalarizationFrame};

/// Which step sizes receive gradient when the loss is taken at layer `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSet {
    /// `{alpha1^(k-1), alpha2^(k), alpha3^(k-1)}`
    CurrentLayer,
    /// Every step size of layers `1..=k` that can influence `x^(k)`.
    AllSeen,
}

/// Flat indices (layout `[alpha1; alpha2; alpha3]`) of the active set for the
/// loss at 1-based layer `k` of an `n`-layer schedule.
pub fn active_indices(n: usize, k: usize, set: ParamSet) -> Vec<usize> {
    assert!(k >= 1 && k <= n, "layer {k} out of range 1..={n}");
    match set {
        ParamSet::CurrentLayer => {
            let mut idx = Vec::with_capacity(3);
            if k >= 2 {
                idx.push(k - 2);
            }
            idx.push(n + k - 1);
            if k >= 2 {
                idx.push(2 * n + k - 2);
            }
            idx
        }
        ParamSet::AllSeen => {
            let mut idx: Vec<usize> = (0..k - 1).collect();
            idx.extend(n..n + k);
            idx.extend(2 * n..2 * n + k - 1);
            idx
        }
    }
}

struct LayerTape {
    lambda_prev: f64,
    prev_eval: RateEval,
    g: Vec<f64>,
    norm: f64,
    /// Pre-clamp primal value; `None` when the update was skipped.
    pre_clamp: Option<Vec<f64>>,
    eval: RateEval,
    slack: f64,
    dual_raw: f64,
}

pub struct Tape {
    layers: Vec<LayerTape>,
    pub x: Vec<f64>,
}

impl Tape {
    pub fn output_eval(&self) -> Option<&RateEval> {
        self.layers.last().map(|l| &l.eval)
    }
}

/// Runs the first `k` normalized layers from `x0 * 1`, `t = 0`, `lambda = 1`.
pub fn forward(
    net: &NetworkInstance,
    frame: &ScalarizationFrame,
    schedule: &StepSchedule,
    k: usize,
    x0: f64,
) -> Tape {
    let w = &frame.weights;
    let s = frame.w_dot_direction();
    let wa = frame.w_dot_reference();
    let mut x = vec![x0; net.k];
    let mut t = 0.0;
    let mut lambda = crate::psolver::DEFAULT_LAMBDA0;
    let mut eval = RateEval::new(&x, net);
    let mut layers = Vec::with_capacity(k);
    for l in 0..k {
        let (a1, a2, a3) = (schedule.alpha1[l], schedule.alpha2[l], schedule.alpha3[l]);
        let t_next = t - a1 * (1.0 - lambda * s);
        let g = eval.jacobian_t_w(net, w);
        let norm = norm2(&g);
        let (x_next, pre_clamp) = if norm > 0.0 {
            let c = a2 / norm * lambda;
            let u: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + c * gi).collect();
            (u.iter().map(|v| v.clamp(0.0, 1.0)).collect(), Some(u))
        } else {
            (x.clone(), None)
        };
        let next_eval = RateEval::new(&x_next, net);
        let slack = wa + t_next * s + next_eval.weighted_sum(w);
        let dual_raw = lambda - a3 * slack;
        layers.push(LayerTape {
            lambda_prev: lambda,
            prev_eval: std::mem::replace(&mut eval, next_eval.clone()),
            g,
            norm,
            pre_clamp,
            eval: next_eval,
            slack,
            dual_raw,
        });
        x = x_next;
        t = t_next;
        lambda = dual_raw.max(0.0);
    }
    Tape { layers, x }
}

/// `H v` where `H` is the (symmetric) Jacobian of `x -> J(x)^T w`.
fn hessian_vec(net: &NetworkInstance, eval: &RateEval, w: &[f64], v: &[f64]) -> Vec<f64> {
    let k = net.k;
    let mut out = vec![0.0; k];
    for i in 0..k {
        let row = net.row(i);
        let gv: f64 = row.iter().zip(v).map(|(g, vi)| g * vi).sum();
        let gtv = gv - row[i] * v[i];
        let d = eval.total[i];
        let e = eval.interference[i];
        let coef_d = -w[i] * gv / (d * d);
        let coef_e = w[i] * gtv / (e * e);
        for (j, o) in out.iter_mut().enumerate() {
            *o += row[j] * (coef_d + coef_e);
        }
        out[i] -= row[i] * coef_e;
    }
    out
}

/// Reverse pass. `x_bar` is `d loss / d x^(k)`; returns the full-length
/// flat gradient (entries outside any active set are whatever the chain rule
/// gives, and are exactly zero for `alpha1^(k)`, `alpha3^(k)` and later).
pub fn backward(
    tape: &Tape,
    net: &NetworkInstance,
    frame: &ScalarizationFrame,
    schedule: &StepSchedule,
    x_bar: Vec<f64>,
) -> Vec<f64> {
    let n = schedule.n_layers;
    let w = &frame.weights;
    let s = frame.w_dot_direction();
    let mut grad = vec![0.0; 3 * n];
    let mut x_bar = x_bar;
    let mut t_bar = 0.0;
    let mut lambda_bar = 0.0;
    for (l, rec) in tape.layers.iter().enumerate().rev() {
        let (a1, a2, a3) = (schedule.alpha1[l], schedule.alpha2[l], schedule.alpha3[l]);

        // lambda^(l+1) = max(0, lambda^(l) - a3 * slack)
        let v_bar = if rec.dual_raw > 0.0 { lambda_bar } else { 0.0 };
        let mut lambda_prev_bar = v_bar;
        if v_bar != 0.0 {
            grad[2 * n + l] -= v_bar * rec.slack;
            t_bar -= v_bar * a3 * s;
            let jw = rec.eval.jacobian_t_w(net, w);
            for (xb, j) in x_bar.iter_mut().zip(&jw) {
                *xb -= v_bar * a3 * j;
            }
        }

        // x^(l+1) = clamp(x^(l) + (a2 / |g|) lambda^(l) g)
        if let Some(u) = &rec.pre_clamp {
            let u_bar: Vec<f64> = x_bar
                .iter()
                .zip(u)
                .map(|(xb, ui)| if *ui > 0.0 && *ui < 1.0 { *xb } else { 0.0 })
                .collect();
            let c = a2 / rec.norm;
            let lam = rec.lambda_prev;
            let q = dot(&u_bar, &rec.g);
            lambda_prev_bar += c * q;
            let c_bar = lam * q;
            grad[n + l] += c_bar / rec.norm;
            let norm_bar = -c_bar * a2 / (rec.norm * rec.norm);
            let g_bar: Vec<f64> = u_bar
                .iter()
                .zip(&rec.g)
                .map(|(ub, gi)| c * lam * ub + norm_bar * gi / rec.norm)
                .collect();
            let hv = hessian_vec(net, &rec.prev_eval, w, &g_bar);
            x_bar = u_bar.iter().zip(&hv).map(|(a, b)| a + b).collect();
        }

        // t^(l+1) = t^(l) - a1 (1 - lambda^(l) s)
        grad[l] -= t_bar * (1.0 - rec.lambda_prev * s);
        lambda_prev_bar += t_bar * a1 * s;
        lambda_bar = lambda_prev_bar;
    }
    grad
}

/// Loss `-w^T R(x^(k))` and its gradient with respect to every step size.
pub fn loss_and_grad(
    net: &NetworkInstance,
    frame: &ScalarizationFrame,
    schedule: &StepSchedule,
    k: usize,
    x0: f64,
) -> Result<(f64, Vec<f64>)> {
    if k == 0 || k > schedule.n_layers {
        return Err(LuvaError::InvalidArgument(format!(
            "layer cutoff {k} outside 1..={}",
            schedule.n_layers
        )));
    }
    let tape = forward(net, frame, schedule, k, x0);
    let out = tape.output_eval().expect("k >= 1 layers recorded");
    let loss = -out.weighted_sum(&frame.weights);
    let x_bar: Vec<f64> = out
        .jacobian_t_w(net, &frame.weights)
        .iter()
        .map(|v| -v)
        .collect();
    let grad = backward(&tape, net, frame, schedule, x_bar);
    Ok((loss, grad))
}

/// Smallest distance of any kink argument (pre-clamp primal value to the box
/// edges, dual argument to zero) along the forward pass; finite differences
/// are only meaningful when this exceeds the perturbation size.
pub fn kink_margin(tape: &Tape) -> f64 {
    let mut margin = f64::INFINITY;
    for rec in &tape.layers {
        if let Some(u) = &rec.pre_clamp {
            for v in u {
                margin = margin.min(v.abs()).min((v - 1.0).abs());
            }
        }
        margin = margin.min(rec.dual_raw.abs());
    }
    margin
}
