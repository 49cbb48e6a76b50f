//! SINR, per-link rates (natural log, nats), the rate Jacobian and the
//! Utopian-point scalarization frame.
//!
//! Everything here is `O(K^2)` per call: one pass over the gain matrix builds
//! the two matrix-vector products `Gx` and `G~x` (`G~` is `G` with its
//! diagonal zeroed), and both the rates and the Jacobian are read off them.

use serde::{Deserialize, Serialize};

use crate::error::{LuvaError, Result};
use crate::netgen::NetworkInstance;

/// Fraction of maximum transmit power per link, each entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(LuvaError::InvalidArgument(
                "power allocation entries must lie in [0, 1]".into(),
            ));
        }
        Ok(Self(x))
    }

    pub fn uniform(k: usize, level: f64) -> Self {
        Self(vec![level.clamp(0.0, 1.0); k])
    }

    /// Componentwise projection onto the unit box.
    pub fn clamped(x: Vec<f64>) -> Self {
        Self(x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for PowerAllocation {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn sinr(x: &[f64], net: &NetworkInstance, i: usize) -> f64 {
    let row = net.row(i);
    let interference: f64 = row
        .iter()
        .zip(x)
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, (g, xj))| g * xj)
        .sum();
    row[i] * x[i] / (net.noise_power + interference)
}

/// `R_i = ln(1 + SINR_i)`.
pub fn rate_vector(x: &[f64], net: &NetworkInstance) -> Vec<f64> {
    (0..net.k).map(|i| sinr(x, net, i).ln_1p()).collect()
}

/// `R_i = ln(s + (Gx)_i) - ln(s + (G~x)_i)`, the difference-of-logs form.
pub fn rate_vector_difference_form(x: &[f64], net: &NetworkInstance) -> Vec<f64> {
    let eval = RateEval::new(x, net);
    eval.total
        .iter()
        .zip(&eval.interference)
        .map(|(d, e)| d.ln() - e.ln())
        .collect()
}

pub fn weighted_sum_rate(x: &[f64], w: &[f64], net: &NetworkInstance) -> f64 {
    RateEval::new(x, net).weighted_sum(w)
}

/// Cached matrix-vector products for one `(x, G)` pair.
#[derive(Debug, Clone)]
pub struct RateEval {
    /// `s + (Gx)_i`
    pub total: Vec<f64>,
    /// `s + (G~x)_i`
    pub interference: Vec<f64>,
    pub rates: Vec<f64>,
}

impl RateEval {
    pub fn new(x: &[f64], net: &NetworkInstance) -> Self {
        let k = net.k;
        let mut total = Vec::with_capacity(k);
        let mut interference = Vec::with_capacity(k);
        let mut rates = Vec::with_capacity(k);
        for i in 0..k {
            let row = net.row(i);
            let cross: f64 = row
                .iter()
                .zip(x)
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, (g, v))| g * v)
                .sum();
            let signal = row[i] * x[i];
            let e = net.noise_power + cross;
            total.push(e + signal);
            interference.push(e);
            rates.push((signal / e).ln_1p());
        }
        Self {
            total,
            interference,
            rates,
        }
    }

    pub fn weighted_sum(&self, w: &[f64]) -> f64 {
        self.rates.iter().zip(w).map(|(r, w)| r * w).sum()
    }

    /// `J_ij = G_ij / D_i - G~_ij / E_i`, row-major.
    pub fn jacobian(&self, net: &NetworkInstance) -> Vec<f64> {
        let k = net.k;
        let mut jac = vec![0.0; k * k];
        for i in 0..k {
            let row = net.row(i);
            let inv_d = 1.0 / self.total[i];
            let inv_e = 1.0 / self.interference[i];
            for j in 0..k {
                jac[i * k + j] = if i == j {
                    row[j] * inv_d
                } else {
                    row[j] * (inv_d - inv_e)
                };
            }
        }
        jac
    }

    /// `J^T w` without materialising `J`.
    pub fn jacobian_t_w(&self, net: &NetworkInstance, w: &[f64]) -> Vec<f64> {
        let k = net.k;
        let mut out = vec![0.0; k];
        for i in 0..k {
            let row = net.row(i);
            let inv_d = 1.0 / self.total[i];
            let inv_e = 1.0 / self.interference[i];
            let off = w[i] * (inv_d - inv_e);
            for (j, o) in out.iter_mut().enumerate() {
                *o += row[j] * off;
            }
            out[i] += row[i] * w[i] * inv_e;
        }
        out
    }
}

/// Rates and Jacobian at `x`, sharing one evaluation of `Gx` and `G~x`.
pub fn rate_jacobian(x: &[f64], net: &NetworkInstance) -> (Vec<f64>, Vec<f64>) {
    let eval = RateEval::new(x, net);
    let jac = eval.jacobian(net);
    (eval.rates, jac)
}

/// `u_i = ln(1 + G_ii / s)`: link `i` alone at full power.
pub fn utopian_point(net: &NetworkInstance) -> Vec<f64> {
    (0..net.k)
        .map(|i| (net.g(i, i) / net.noise_power).ln_1p())
        .collect()
}

/// Reference `a = -u`, direction `r = u / |u|`, and the link weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarizationFrame {
    pub utopian: Vec<f64>,
    pub reference: Vec<f64>,
    pub direction: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ScalarizationFrame {
    pub fn new(net: &NetworkInstance, w: &[f64]) -> Result<Self> {
        if w.len() != net.k {
            return Err(LuvaError::InvalidArgument(format!(
                "{} weights for {} links",
                w.len(),
                net.k
            )));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(LuvaError::InvalidArgument(
                "weights must be finite and >= 0".into(),
            ));
        }
        let utopian = utopian_point(net);
        let norm = utopian.iter().map(|u| u * u).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(LuvaError::DegenerateNetwork);
        }
        Ok(Self {
            reference: utopian.iter().map(|u| -u).collect(),
            direction: utopian.iter().map(|u| u / norm).collect(),
            utopian,
            weights: w.to_vec(),
        })
    }

    /// `w^T r`
    pub fn w_dot_direction(&self) -> f64 {
        dot(&self.weights, &self.direction)
    }

    /// `w^T a`
    pub fn w_dot_reference(&self) -> f64 {
        dot(&self.weights, &self.reference)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{sample_layout, SystemParams};

    fn single() -> NetworkInstance {
        NetworkInstance::from_gain_matrix(&[vec![4.0]], 1.0).unwrap()
    }

    fn symmetric() -> NetworkInstance {
        NetworkInstance::from_gain_matrix(&[vec![2.0, 1.0], vec![1.0, 2.0]], 1.0).unwrap()
    }

    #[test]
    fn sinr_examples() {
        assert_eq!(sinr(&[1.0], &single(), 0), 4.0);
        let net = symmetric();
        assert_eq!(sinr(&[0.0, 0.0], &net, 0), 0.0);
        assert_eq!(sinr(&[1.0, 1.0], &net, 0), 1.0);
        assert_eq!(sinr(&[1.0, 1.0], &net, 1), 1.0);
    }

    #[test]
    fn rate_examples() {
        assert!((rate_vector(&[1.0], &single())[0] - 5f64.ln()).abs() < 1e-15);
        let r = rate_vector(&[1.0, 1.0], &symmetric());
        assert!((r[0] - 2f64.ln()).abs() < 1e-15 && (r[1] - 2f64.ln()).abs() < 1e-15);
        assert_eq!(rate_vector(&[0.0, 0.0], &symmetric()), vec![0.0, 0.0]);
        let eval = RateEval::new(&[1.0, 1.0], &symmetric());
        assert!((eval.rates[0] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn weighted_sum_examples() {
        let net = symmetric();
        let x = [0.3, 0.8];
        assert_eq!(weighted_sum_rate(&x, &[0.0, 0.0], &net), 0.0);
        assert!(
            (weighted_sum_rate(&x, &[1.0, 0.0], &net) - rate_vector(&x, &net)[0]).abs() < 1e-15
        );
        assert!(
            (weighted_sum_rate(&[1.0, 1.0], &[1.0, 1.0], &net) - 2.0 * 2f64.ln()).abs() < 1e-15
        );
    }

    #[test]
    fn jacobian_single_link() {
        let (_, j) = rate_jacobian(&[0.0], &single());
        assert_eq!(j, vec![4.0]);
        let (_, j) = rate_jacobian(&[1.0], &single());
        assert!((j[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn jacobian_t_w_matches_dense_product() {
        let net = sample_layout(&SystemParams::default(), 6, 5).unwrap();
        let x = [0.1, 0.5, 0.9, 0.3, 0.7, 0.2];
        let w = [0.4, 1.0, 0.2, 0.9, 0.5, 0.1];
        let eval = RateEval::new(&x, &net);
        let jac = eval.jacobian(&net);
        let g = eval.jacobian_t_w(&net, &w);
        for j in 0..6 {
            let dense: f64 = (0..6).map(|i| jac[i * 6 + j] * w[i]).sum();
            assert!((dense - g[j]).abs() <= 1e-10 * dense.abs().max(1.0));
        }
    }

    #[test]
    fn utopian_examples() {
        assert!((utopian_point(&single())[0] - 5f64.ln()).abs() < 1e-15);
        let u = utopian_point(&symmetric());
        assert!((u[0] - 3f64.ln()).abs() < 1e-15 && (u[1] - 3f64.ln()).abs() < 1e-15);
        // R(e_i) attains u_i exactly at component i.
        let net = sample_layout(&SystemParams::default(), 5, 1).unwrap();
        let u = utopian_point(&net);
        for i in 0..5 {
            let mut e = vec![0.0; 5];
            e[i] = 1.0;
            assert_eq!(rate_vector(&e, &net)[i], u[i]);
        }
    }

    #[test]
    fn frame_examples() {
        let f = ScalarizationFrame::new(&single(), &[1.0]).unwrap();
        assert!((f.reference[0] + 5f64.ln()).abs() < 1e-15);
        assert!((f.direction[0] - 1.0).abs() < 1e-15);
        let net = sample_layout(&SystemParams::default(), 7, 2).unwrap();
        let f = ScalarizationFrame::new(&net, &[1.0; 7]).unwrap();
        assert!((norm2(&f.direction) - 1.0).abs() < 1e-12);
        for (a, u) in f.reference.iter().zip(&f.utopian) {
            assert_eq!(*a, -u);
        }
    }

    #[test]
    fn frame_permutes_with_links() {
        let net = sample_layout(&SystemParams::default(), 4, 8).unwrap();
        let w = [0.1, 0.2, 0.3, 0.4];
        let perm = [2, 0, 3, 1];
        let f = ScalarizationFrame::new(&net, &w).unwrap();
        let pw: Vec<f64> = perm.iter().map(|&p| w[p]).collect();
        let fp = ScalarizationFrame::new(&net.permuted(&perm), &pw).unwrap();
        for (n, &p) in perm.iter().enumerate() {
            assert!((fp.direction[n] - f.direction[p]).abs() < 1e-15);
            assert_eq!(fp.reference[n], f.reference[p]);
        }
    }

    #[test]
    fn degenerate_network_rejected() {
        let net =
            NetworkInstance::from_gain_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]], 1.0).unwrap();
        assert!(matches!(
            ScalarizationFrame::new(&net, &[1.0, 1.0]),
            Err(LuvaError::DegenerateNetwork)
        ));
        assert!(ScalarizationFrame::new(&single(), &[-1.0]).is_err());
    }

    #[test]
    fn power_allocation_bounds() {
        assert!(PowerAllocation::new(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(PowerAllocation::new(vec![1.1]).is_err());
        assert_eq!(
            PowerAllocation::clamped(vec![-1.0, 2.0, 0.5]).as_slice(),
            &[0.0, 1.0, 0.5]
        );
    }
}
