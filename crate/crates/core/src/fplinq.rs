//! Fractional-programming power control (FPLinQ) with the quadratic
//! transform. Each iteration updates the SINR auxiliaries, the quadratic
//! transform auxiliaries and then the powers in closed form; the weighted
//! sum rate is non-decreasing along the iterates.

use crate::error::{LuvaError, Result};
use crate::netgen::NetworkInstance;
use crate::rates::{sinr, PowerAllocation};

pub const DEFAULT_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct FpState {
    pub x: Vec<f64>,
    pub gamma: Vec<f64>,
    pub y: Vec<f64>,
}

impl FpState {
    pub fn full_power(k: usize) -> Self {
        Self {
            x: vec![1.0; k],
            gamma: vec![0.0; k],
            y: vec![0.0; k],
        }
    }
}

pub fn fp_step(state: &FpState, net: &NetworkInstance, w: &[f64]) -> FpState {
    let k = net.k;
    let x = &state.x;
    let gamma: Vec<f64> = (0..k).map(|i| sinr(x, net, i)).collect();
    let y: Vec<f64> = (0..k)
        .map(|i| {
            let received: f64 = net.row(i).iter().zip(x).map(|(g, v)| g * v).sum();
            (w[i] * (1.0 + gamma[i]) * net.g(i, i) * x[i]).sqrt() / (net.noise_power + received)
        })
        .collect();
    let x_next: Vec<f64> = (0..k)
        .map(|i| {
            let num = y[i] * y[i] * w[i] * (1.0 + gamma[i]) * net.g(i, i);
            let den: f64 = (0..k).map(|j| y[j] * y[j] * net.g(j, i)).sum::<f64>();
            if num <= 0.0 {
                0.0
            } else {
                (num / (den * den)).min(1.0)
            }
        })
        .collect();
    FpState {
        x: x_next,
        gamma,
        y,
    }
}

/// Runs `iters` FP iterations from full power.
pub fn fplinq(net: &NetworkInstance, w: &[f64], iters: usize) -> Result<PowerAllocation> {
    fplinq_trace(net, w, iters, |_| {})
}

/// As [`fplinq`], invoking `observe` on every iterate (including the start).
pub fn fplinq_trace(
    net: &NetworkInstance,
    w: &[f64],
    iters: usize,
    mut observe: impl FnMut(&FpState),
) -> Result<PowerAllocation> {
    if iters == 0 {
        return Err(LuvaError::InvalidArgument(
            "fplinq needs at least one iteration".into(),
        ));
    }
    if w.len() != net.k || w.iter().any(|v| !(*v >= 0.0)) {
        return Err(LuvaError::InvalidArgument(
            "weights must be >= 0, one per link".into(),
        ));
    }
    let mut state = FpState::full_power(net.k);
    observe(&state);
    for _ in 0..iters {
        state = fp_step(&state, net, w);
        observe(&state);
    }
    Ok(PowerAllocation::clamped(state.x))
}
