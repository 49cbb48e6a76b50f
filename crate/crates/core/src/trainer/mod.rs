//! Layer-wise deep-unfolding trainer.
//!
//! For each layer `k` the trainer runs three stages against the loss at the
//! layer-`k` output: the current layer's step sizes at the base rate, then
//! all step sizes seen so far at the two refinement rates. Every training
//! iteration draws a fresh batch of networks and weights; a fixed validation
//! set tracks the mean weighted sum rate.

mod adam;
mod unroll;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};
pub use unroll::{active_indices, backward, forward, kink_margin, loss_and_grad, ParamSet, Tape};

use crate::error::{LuvaError, Result};
use crate::netgen::{sample_at, sample_set, NetworkInstance, Sample, SystemParams, WeightDist};
use crate::psolver::{self, StepSchedule};
use crate::rates::{weighted_sum_rate, ScalarizationFrame};
use crate::seeding::{derive_seed, STREAM_TRAIN, STREAM_VALIDATION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_layers: usize,
    pub n_train: usize,
    pub max_iter: usize,
    pub base_rate: f64,
    pub refinement_factors: (f64, f64),
    pub weight_dist: WeightDist,
    pub validation_size: usize,
    pub seed: u64,
    /// Early stop when the windowed validation loss improves by less than
    /// `tolerance` (relative) over `patience` iterations.
    pub patience: usize,
    pub tolerance: f64,
    pub eval_every: usize,
    pub x0: f64,
    /// Constant step size the schedule starts from.
    pub init_step: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_layers: 10,
            n_train: 50,
            max_iter: 20_000,
            base_rate: 1e-3,
            refinement_factors: (1e-1, 1e-2),
            weight_dist: WeightDist::Uniform01,
            validation_size: 500,
            seed: 0,
            patience: 500,
            tolerance: 1e-4,
            eval_every: 100,
            x0: psolver::DEFAULT_X0,
            init_step: psolver::DEFAULT_STEP,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (f1, f2) = self.refinement_factors;
        let ok = self.n_layers >= 1
            && self.n_train >= 1
            && self.max_iter >= 1
            && self.base_rate > 0.0
            && 0.0 < f2
            && f2 < f1
            && f1 < 1.0
            && self.validation_size >= 1
            && self.eval_every >= 1
            && (0.0..=1.0).contains(&self.x0);
        if ok {
            Ok(())
        } else {
            Err(LuvaError::InvalidArgument(format!(
                "invalid training config: {self:?}"
            )))
        }
    }
}

/// `-sum_i w_i R_i(x)`.
pub fn loss(x: &[f64], w: &[f64], net: &NetworkInstance) -> f64 {
    -weighted_sum_rate(x, w, net)
}

/// Gradient of the layer-`k` loss (1-based) with respect to the step sizes
/// in `set`; full `3N` layout with zeros outside the set.
pub fn grad_schedule(
    net: &NetworkInstance,
    w: &[f64],
    schedule: &StepSchedule,
    k: usize,
    set: ParamSet,
    x0: f64,
) -> Result<Vec<f64>> {
    schedule.validate()?;
    let frame = ScalarizationFrame::new(net, w)?;
    let (_, full) = loss_and_grad(net, &frame, schedule, k, x0)?;
    let mut out = vec![0.0; full.len()];
    for i in active_indices(schedule.n_layers, k, set) {
        out[i] = full[i];
    }
    Ok(out)
}

/// Mean loss and mean gradient over a batch. Per-sample work runs in
/// parallel; the reduction is sequential in sample order.
pub fn batch_loss_and_grad(
    batch: &[(Sample, ScalarizationFrame)],
    schedule: &StepSchedule,
    k: usize,
    x0: f64,
) -> Result<(f64, Vec<f64>)> {
    let per: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_iter()
        .map(|(s, frame)| loss_and_grad(&s.net, frame, schedule, k, x0))
        .collect();
    let mut total = 0.0;
    let mut grad = vec![0.0; schedule.param_count()];
    for r in per {
        let (l, g) = r?;
        total += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Layer,
    Refine1,
    Refine2,
}

impl StageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StageKind::Layer => "layer",
            StageKind::Refine1 => "refine1",
            StageKind::Refine2 => "refine2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub stage: usize,
    pub layer: usize,
    pub kind: StageKind,
    pub iteration: usize,
    pub val_mean_wsr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub layer: usize,
    pub kind: StageKind,
    pub rate: f64,
    pub iterations: usize,
    pub start_wsr: f64,
    pub end_wsr: f64,
    pub early_stopped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub schedule: StepSchedule,
    pub history: Vec<HistoryPoint>,
    pub stages: Vec<StageRecord>,
}

impl TrainOutcome {
    /// Validation mean WSR at the end of the last stage of layer `k` (1-based).
    pub fn wsr_after_layer(&self, k: usize) -> Option<f64> {
        self.stages
            .iter()
            .rev()
            .find(|s| s.layer == k)
            .map(|s| s.end_wsr)
    }

    /// Jumps in validation WSR between the end of one layer's training and
    /// the first evaluation of the next layer.
    pub fn layer_boundary_jumps(&self) -> Vec<f64> {
        (1..self.schedule.n_layers)
            .filter_map(|k| {
                let end = self.wsr_after_layer(k)?;
                let next = self.stages.iter().find(|s| s.layer == k + 1)?;
                Some(next.start_wsr - end)
            })
            .collect()
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("stage,layer,kind,iteration,val_mean_wsr\n");
        for h in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                h.stage,
                h.layer,
                h.kind.as_str(),
                h.iteration,
                h.val_mean_wsr
            ));
        }
        out
    }
}

fn frames_for(samples: Vec<Sample>) -> Result<Vec<(Sample, ScalarizationFrame)>> {
    samples
        .into_iter()
        .map(|s| {
            let f = ScalarizationFrame::new(&s.net, &s.w)?;
            Ok((s, f))
        })
        .collect()
}

/// Mean WSR of the layer-`k` output over a sample set.
pub fn mean_wsr_at_layer(
    set: &[(Sample, ScalarizationFrame)],
    schedule: &StepSchedule,
    k: usize,
    x0: f64,
) -> f64 {
    let vals: Vec<f64> = set
        .par_iter()
        .map(|(s, frame)| {
            let tape = forward(&s.net, frame, schedule, k, x0);
            weighted_sum_rate(&tape.x, &s.w, &s.net)
        })
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

fn should_stop(losses: &[f64], window: usize, tol: f64) -> bool {
    if window == 0 || losses.len() < 2 * window {
        return false;
    }
    let n = losses.len();
    let cur: f64 = losses[n - window..].iter().sum::<f64>() / window as f64;
    let prev: f64 = losses[n - 2 * window..n - window].iter().sum::<f64>() / window as f64;
    (prev - cur) < tol * prev.abs()
}

/// Layer-wise training; see the module docs for the stage structure.
pub fn train_layerwise(
    config: &TrainConfig,
    params: &SystemParams,
    k_links: usize,
) -> Result<TrainOutcome> {
    train_layerwise_with(config, params, k_links, |_| {})
}

/// As [`train_layerwise`], calling `on_stage` after every finished stage.
pub fn train_layerwise_with(
    config: &TrainConfig,
    params: &SystemParams,
    k_links: usize,
    mut on_stage: impl FnMut(&StageRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    params.validate()?;
    let n = config.n_layers;
    let validation = frames_for(sample_set(
        params,
        k_links,
        config.weight_dist,
        config.seed,
        STREAM_VALIDATION,
        config.validation_size,
    )?)?;

    let mut schedule = StepSchedule::constant(n, config.init_step);
    let mut flat = schedule.to_flat();
    let mut history = Vec::new();
    let mut stages = Vec::new();
    let mut batch_counter: u64 = 0;
    let window = config.patience / config.eval_every;
    let (f1, f2) = config.refinement_factors;

    for k in 1..=n {
        let plan = [
            (StageKind::Layer, config.base_rate, ParamSet::CurrentLayer),
            (StageKind::Refine1, config.base_rate * f1, ParamSet::AllSeen),
            (StageKind::Refine2, config.base_rate * f2, ParamSet::AllSeen),
        ];
        for (kind, rate, set) in plan {
            let stage = stages.len();
            let active = active_indices(n, k, set);
            let mut adam = AdamState::new(active.len());
            let start_wsr = mean_wsr_at_layer(&validation, &schedule, k, config.x0);
            history.push(HistoryPoint {
                stage,
                layer: k,
                kind,
                iteration: 0,
                val_mean_wsr: start_wsr,
            });
            let mut val_losses = vec![-start_wsr];
            let mut end_wsr = start_wsr;
            let mut iterations = 0;
            let mut early_stopped = false;

            for it in 1..=config.max_iter {
                let batch_seed = derive_seed(config.seed, STREAM_TRAIN, batch_counter);
                batch_counter += 1;
                let batch = frames_for(
                    (0..config.n_train as u64)
                        .into_par_iter()
                        .map(|j| {
                            sample_at(
                                params,
                                k_links,
                                config.weight_dist,
                                batch_seed,
                                STREAM_TRAIN,
                                j,
                            )
                        })
                        .collect::<Result<Vec<_>>>()?,
                )?;
                let (batch_loss, grad) = batch_loss_and_grad(&batch, &schedule, k, config.x0)?;
                if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(LuvaError::TrainingAborted(format!(
                        "non-finite loss or gradient at layer {k}, stage {}, iteration {it}",
                        kind.as_str()
                    )));
                }
                let mut sub: Vec<f64> = active.iter().map(|&i| flat[i]).collect();
                let sub_grad: Vec<f64> = active.iter().map(|&i| grad[i]).collect();
                adam_step(&mut sub, &sub_grad, &mut adam, rate);
                for (&i, v) in active.iter().zip(&sub) {
                    flat[i] = *v;
                }
                schedule = StepSchedule::from_flat(n, &flat)?;
                iterations = it;

                if it % config.eval_every == 0 || it == config.max_iter {
                    let wsr = mean_wsr_at_layer(&validation, &schedule, k, config.x0);
                    if !wsr.is_finite() {
                        return Err(LuvaError::TrainingAborted(format!(
                            "non-finite validation WSR at layer {k}, iteration {it}"
                        )));
                    }
                    history.push(HistoryPoint {
                        stage,
                        layer: k,
                        kind,
                        iteration: it,
                        val_mean_wsr: wsr,
                    });
                    end_wsr = wsr;
                    val_losses.push(-wsr);
                    if should_stop(&val_losses, window, config.tolerance) {
                        early_stopped = true;
                        break;
                    }
                }
            }
            let record = StageRecord {
                stage,
                layer: k,
                kind,
                rate,
                iterations,
                start_wsr,
                end_wsr,
                early_stopped,
            };
            on_stage(&record);
            stages.push(record);
        }
    }

    schedule.metadata = serde_json::json!({
        "k_links": k_links,
        "system_params": params,
        "train_config": config,
    });
    Ok(TrainOutcome {
        schedule,
        history,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::sample_layout;

    #[test]
    fn loss_examples() {
        let net =
            NetworkInstance::from_gain_matrix(&[vec![2.0, 1.0], vec![1.0, 2.0]], 1.0).unwrap();
        assert_eq!(loss(&[1.0, 1.0], &[0.0, 0.0], &net), 0.0);
        assert!((loss(&[1.0, 1.0], &[1.0, 1.0], &net) + 2.0 * 2f64.ln()).abs() < 1e-15);
        let x = [0.3, 0.6];
        assert_eq!(
            loss(&x, &[0.4, 0.7], &net),
            -weighted_sum_rate(&x, &[0.4, 0.7], &net)
        );
    }

    #[test]
    fn grad_schedule_masks_to_active_set() {
        let net = sample_layout(&SystemParams::default(), 4, 3).unwrap();
        let w = [0.2, 0.4, 0.6, 0.8];
        let sched = psolver::viva_defaults(6);
        let g = grad_schedule(&net, &w, &sched, 1, ParamSet::CurrentLayer, 0.01).unwrap();
        let nz: Vec<usize> = (0..18).filter(|&i| g[i] != 0.0).collect();
        assert_eq!(nz, vec![6]);
        let g = grad_schedule(&net, &w, &sched, 4, ParamSet::CurrentLayer, 0.01).unwrap();
        assert!((0..18)
            .filter(|&i| g[i] != 0.0)
            .all(|i| [2, 9, 14].contains(&i)));
        assert!(g[9] != 0.0);
    }

    #[test]
    fn early_stop_rule() {
        assert!(!should_stop(&[1.0, 0.9, 0.8], 5, 1e-4));
        let flat = vec![-10.0; 10];
        assert!(should_stop(&flat, 5, 1e-4));
        let improving: Vec<f64> = (0..10).map(|i| -10.0 - i as f64).collect();
        assert!(!should_stop(&improving, 5, 1e-4));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            refinement_factors: (0.01, 0.1),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            max_iter: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            n_layers: 3,
            n_train: 4,
            max_iter: 1,
            validation_size: 8,
            seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn one_iteration_per_stage_gives_3n_records() {
        let out = train_layerwise(&tiny_config(), &SystemParams::default(), 4).unwrap();
        assert_eq!(out.stages.len(), 9);
        assert_eq!(out.schedule.param_count(), 9);
        assert!(out.stages.iter().all(|s| s.iterations == 1));
        assert!(out
            .history_csv()
            .starts_with("stage,layer,kind,iteration,val_mean_wsr\n"));
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig {
            max_iter: 5,
            ..tiny_config()
        };
        let a = train_layerwise(&cfg, &SystemParams::default(), 4).unwrap();
        let b = train_layerwise(&cfg, &SystemParams::default(), 4).unwrap();
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.history, b.history);
    }
}
