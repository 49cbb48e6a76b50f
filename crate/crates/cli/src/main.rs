//! `luva`: command-line front end for layout generation, the power-control
//! solvers, training, benchmark evaluation and fairness scheduling.
//!
//! Every tabular output is CSV with a header row. Layouts and schedules are
//! JSON. Runs with the same `--seed` produce byte-identical files.

mod config;
mod table;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use luva::fplinq::{fplinq_trace, DEFAULT_ITERS};
use luva::harness::{self, cdf_points, evaluate, SweepAxis, SweepBase, DEFAULT_TEST_SIZE};
use luva::netgen::{sample_set, Sample, WeightDist};
use luva::psolver::{run_with, viva_defaults, SolverOptions, DEFAULT_X0};
use luva::rates::weighted_sum_rate;
use luva::scheduler::{dpp_run, geometric_mean, DppConfig, UtilityKind};
use luva::seeding::STREAM_TEST;
use luva::trainer::train_layerwise_with;
use luva::wsrm::WsrmSolver;
use luva::{NetworkInstance, SolverMode, StepSchedule};

use config::RunConfig;
use table::{floats, indexed, read_weights, sink, write_weights};

#[derive(Parser)]
#[command(
    name = "luva",
    version,
    about = "Weighted-sum-rate power control for D2D networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Base seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when omitted) or directory, depending on the command.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with `system` and `train` sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn seed(&self, cfg: &RunConfig) -> u64 {
        self.seed.unwrap_or(cfg.train.seed)
    }
}

#[derive(Args)]
struct Problem {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    weights: PathBuf,
}

impl Problem {
    fn load(&self) -> Result<(NetworkInstance, Vec<f64>)> {
        let net = NetworkInstance::load(&self.layout)?;
        let w = read_weights(&self.weights)?;
        if w.len() != net.k {
            bail!("{} weights for a {}-link layout", w.len(), net.k);
        }
        Ok((net, w))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample random layouts and weights.
    Generate {
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value = "uniform")]
        weights: WeightDist,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Untrained primal-dual iteration with constant step sizes.
    Viva {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long, default_value = "normalized")]
        mode: SolverMode,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        x0: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Primal-dual iteration with a trained schedule.
    Luva {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        params_file: PathBuf,
        #[arg(long)]
        x0: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Fractional-programming baseline.
    Fplinq {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, default_value_t = DEFAULT_ITERS)]
        iters: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Layer-wise training of the step-size schedule.
    Train {
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        weights: Option<WeightDist>,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        validation_size: Option<usize>,
        /// Training history CSV; defaults next to the schedule.
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Performance ratio of a schedule against the baseline on a test set.
    Evaluate {
        /// Trained schedule; the untrained defaults are used when omitted.
        #[arg(long)]
        params_file: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        layers: usize,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_TEST_SIZE)]
        n_test: usize,
        #[arg(long, default_value = "uniform")]
        weights: WeightDist,
        #[arg(long, default_value_t = DEFAULT_ITERS)]
        fp_iters: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Generalization sweep along one axis without retraining.
    Sweep {
        #[arg(long)]
        params_file: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        layers: usize,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_TEST_SIZE)]
        n_test: usize,
        #[arg(long, default_value = "uniform")]
        weights: WeightDist,
        #[arg(long, default_value_t = DEFAULT_ITERS)]
        fp_iters: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Drift-plus-penalty fairness scheduling over fixed networks.
    Schedule {
        /// Layout files; random networks are drawn when none are given.
        #[arg(long, num_args = 1..)]
        layout: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value = "fplinq")]
        solver: String,
        #[arg(long)]
        params_file: Option<PathBuf>,
        #[arg(long, default_value = "pf")]
        utility: UtilityKind,
        #[arg(long)]
        v: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        slots: usize,
        /// Averaging window at the end of the run; half the slots by default.
        #[arg(long)]
        avg_slots: Option<usize>,
        /// Empirical CDF of the per-network geometric mean throughput.
        #[arg(long)]
        cdf_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate {
            k,
            count,
            weights,
            out_dir,
            common,
        } => generate(k, count, weights, &out_dir, &common),
        Command::Viva {
            problem,
            iters,
            mode,
            step,
            x0,
            common,
        } => {
            let schedule = match step {
                Some(a) => StepSchedule::constant(iters, a),
                None => viva_defaults(iters),
            };
            trace_solver(&problem, &schedule, mode, x0.unwrap_or(DEFAULT_X0), &common)
        }
        Command::Luva {
            problem,
            params_file,
            x0,
            common,
        } => {
            let schedule = StepSchedule::load(&params_file)?;
            let x0 = x0.unwrap_or_else(|| trained_x0(&schedule));
            trace_solver(&problem, &schedule, SolverMode::Normalized, x0, &common)
        }
        Command::Fplinq {
            problem,
            iters,
            common,
        } => fplinq_cmd(&problem, iters, &common),
        Command::Train {
            k,
            layers,
            n_train,
            max_iter,
            rate,
            weights,
            x0,
            validation_size,
            history,
            common,
        } => {
            let cfg = RunConfig::load(common.config.as_deref())?;
            let mut tc = cfg.train.clone();
            tc.seed = common.seed(&cfg);
            tc.n_layers = layers.unwrap_or(tc.n_layers);
            tc.n_train = n_train.unwrap_or(tc.n_train);
            tc.max_iter = max_iter.unwrap_or(tc.max_iter);
            tc.base_rate = rate.unwrap_or(tc.base_rate);
            tc.weight_dist = weights.unwrap_or(tc.weight_dist);
            tc.x0 = x0.unwrap_or(tc.x0);
            tc.validation_size = validation_size.unwrap_or(tc.validation_size);
            let Some(out) = common.out.clone() else {
                bail!("train needs --out for the schedule file");
            };
            let outcome = train_layerwise_with(&tc, &cfg.system, k, |s| {
                eprintln!(
                    "layer {:>2} {:<8} rate {:.1e} iters {:>5} wsr {:.5} -> {:.5}{}",
                    s.layer,
                    s.kind.as_str(),
                    s.rate,
                    s.iterations,
                    s.start_wsr,
                    s.end_wsr,
                    if s.early_stopped { " (early stop)" } else { "" }
                )
            })?;
            outcome.schedule.save(&out)?;
            let history = history.unwrap_or_else(|| out.with_extension("history.csv"));
            fs::write(&history, outcome.history_csv())
                .with_context(|| format!("writing {}", history.display()))?;
            Ok(())
        }
        Command::Evaluate {
            params_file,
            layers,
            x0,
            k,
            n_test,
            weights,
            fp_iters,
            common,
        } => {
            let cfg = RunConfig::load(common.config.as_deref())?;
            let solver = unfolded(params_file.as_deref(), layers, x0)?;
            let set = sample_set(
                &cfg.system,
                k,
                weights,
                common.seed(&cfg),
                STREAM_TEST,
                n_test,
            )?;
            let report = evaluate(&set, &solver, &WsrmSolver::Fplinq { iters: fp_iters })?;
            let Some(dir) = &common.out else {
                bail!("evaluate needs --out for the report directory");
            };
            write_report(dir, &report)
        }
        Command::Sweep {
            params_file,
            layers,
            x0,
            axis,
            grid,
            k,
            n_test,
            weights,
            fp_iters,
            common,
        } => {
            let cfg = RunConfig::load(common.config.as_deref())?;
            let solver = unfolded(params_file.as_deref(), layers, x0)?;
            let base = SweepBase {
                params: cfg.system,
                k,
                n_test,
                seed: common.seed(&cfg),
                weight_dist: weights,
            };
            let rows = harness::sweep_generalization(
                &solver,
                &WsrmSolver::Fplinq { iters: fp_iters },
                &base,
                axis,
                &grid,
            )?;
            let mut out = sink(common.out.as_deref())?;
            out.write_record([
                "axis",
                "setting",
                "k",
                "area_side_m",
                "snr_label_db",
                "mean",
                "std",
                "skipped",
            ])?;
            for r in rows {
                out.write_record([
                    r.axis.as_str().to_string(),
                    r.setting.to_string(),
                    r.k.to_string(),
                    r.area_side_m.to_string(),
                    r.snr_label_db.to_string(),
                    r.mean.to_string(),
                    r.std.to_string(),
                    r.skipped.to_string(),
                ])?;
            }
            out.flush()?;
            Ok(())
        }
        Command::Schedule {
            layout,
            k,
            count,
            solver,
            params_file,
            utility,
            v,
            slots,
            avg_slots,
            cdf_out,
            common,
        } => {
            let cfg = RunConfig::load(common.config.as_deref())?;
            let nets: Vec<NetworkInstance> = if layout.is_empty() {
                sample_set(
                    &cfg.system,
                    k,
                    WeightDist::AllOnes,
                    common.seed(&cfg),
                    STREAM_TEST,
                    count,
                )?
                .into_iter()
                .map(|s| s.net)
                .collect()
            } else {
                layout
                    .iter()
                    .map(|p| NetworkInstance::load(p))
                    .collect::<luva::Result<_>>()?
            };
            let solver = match solver.as_str() {
                "fplinq" => WsrmSolver::fplinq_default(),
                "luva" => {
                    let Some(p) = params_file else {
                        bail!("--solver luva needs --params-file");
                    };
                    unfolded(Some(&p), 0, None)?
                }
                other => bail!("unknown solver {other}; expected luva or fplinq"),
            };
            let dpp = DppConfig {
                t_total: slots,
                t_avg: avg_slots.unwrap_or(slots / 2),
                q0: 1.0,
            };
            let v = v.unwrap_or(utility.default_v());
            schedule_cmd(
                &nets,
                &solver,
                utility,
                v,
                &dpp,
                &common,
                cdf_out.as_deref(),
            )
        }
    }
}

fn trained_x0(schedule: &StepSchedule) -> f64 {
    schedule
        .metadata
        .pointer("/train_config/x0")
        .and_then(|v| v.as_f64())
        .unwrap_or(DEFAULT_X0)
}

fn unfolded(params_file: Option<&Path>, layers: usize, x0: Option<f64>) -> Result<WsrmSolver> {
    let schedule = match params_file {
        Some(p) => StepSchedule::load(p)?,
        None => viva_defaults(layers),
    };
    let x0 = x0.unwrap_or_else(|| trained_x0(&schedule));
    Ok(WsrmSolver::Unfolded { schedule, x0 })
}

fn generate(k: usize, count: usize, dist: WeightDist, dir: &Path, common: &Common) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let set: Vec<Sample> = sample_set(&cfg.system, k, dist, common.seed(&cfg), STREAM_TEST, count)?;
    let mut manifest = sink(Some(&dir.join("manifest.csv")))?;
    manifest.write_record(["index", "layout", "weights"])?;
    for (i, s) in set.iter().enumerate() {
        let layout = format!("layout_{i:04}.json");
        let weights = format!("weights_{i:04}.csv");
        s.net.save(&dir.join(&layout))?;
        write_weights(&dir.join(&weights), &s.w)?;
        manifest.write_record([i.to_string(), layout, weights])?;
    }
    manifest.flush()?;
    Ok(())
}

fn trace_solver(
    problem: &Problem,
    schedule: &StepSchedule,
    mode: SolverMode,
    x0: f64,
    common: &Common,
) -> Result<()> {
    let (net, w) = problem.load()?;
    let opts = SolverOptions {
        mode,
        x0,
        ..Default::default()
    };
    let (_, trace) = run_with(&net, &w, schedule, &opts)?;
    let mut out = sink(common.out.as_deref())?;
    let mut header = vec![
        "layer".to_string(),
        "t".into(),
        "lambda".into(),
        "wsr".into(),
    ];
    header.extend(indexed("x", net.k));
    out.write_record(&header)?;
    for r in &trace.records {
        let mut row = vec![
            r.k.to_string(),
            r.t.to_string(),
            r.lambda.to_string(),
            r.weighted_sum_rate.to_string(),
        ];
        row.extend(floats(&r.x));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn fplinq_cmd(problem: &Problem, iters: usize, common: &Common) -> Result<()> {
    let (net, w) = problem.load()?;
    let mut rows = Vec::with_capacity(iters + 1);
    fplinq_trace(&net, &w, iters, |state| {
        let x = &state.x;
        let mut row = vec![
            rows.len().to_string(),
            weighted_sum_rate(x, &w, &net).to_string(),
        ];
        row.extend(floats(x));
        rows.push(row);
    })?;
    let mut out = sink(common.out.as_deref())?;
    let mut header = vec!["iter".to_string(), "wsr".into()];
    header.extend(indexed("x", net.k));
    out.write_record(&header)?;
    for row in rows {
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn write_report(dir: &Path, report: &harness::EvalReport) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut ratios = sink(Some(&dir.join("ratios.csv")))?;
    ratios.write_record(["index", "ratio"])?;
    for (i, r) in report.ratios.iter().enumerate() {
        ratios.write_record([i.to_string(), r.to_string()])?;
    }
    ratios.flush()?;

    let mut summary = sink(Some(&dir.join("summary.csv")))?;
    summary.write_record([
        "n",
        "mean",
        "std",
        "count_at_least_one",
        "fraction_at_least_one",
        "skipped",
    ])?;
    summary.write_record([
        report.ratios.len().to_string(),
        report.mean.to_string(),
        report.std.to_string(),
        report.count_at_least_one.to_string(),
        report.fraction_at_least_one.to_string(),
        report.skipped.len().to_string(),
    ])?;
    summary.flush()?;

    let mut hist = sink(Some(&dir.join("histogram.csv")))?;
    hist.write_record(["lo", "hi", "count"])?;
    for b in &report.histogram {
        hist.write_record([b.lo.to_string(), b.hi.to_string(), b.count.to_string()])?;
    }
    hist.flush()?;

    write_cdf(&dir.join("cdf.csv"), &report.cdf)?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    Ok(())
}

fn write_cdf(path: &Path, cdf: &[(f64, f64)]) -> Result<()> {
    let mut out = sink(Some(path))?;
    out.write_record(["value", "fraction"])?;
    for (v, f) in cdf {
        out.write_record([v.to_string(), f.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

fn schedule_cmd(
    nets: &[NetworkInstance],
    solver: &WsrmSolver,
    utility: UtilityKind,
    v: f64,
    dpp: &DppConfig,
    common: &Common,
    cdf_out: Option<&Path>,
) -> Result<()> {
    use rayon::prelude::*;
    let outcomes = nets
        .par_iter()
        .map(|n| dpp_run(n, solver, utility, v, dpp))
        .collect::<luva::Result<Vec<_>>>()?;
    let mut out = sink(common.out.as_deref())?;
    out.write_record([
        "network",
        "link",
        "throughput",
        "utility",
        "geometric_mean",
        "queue_growth",
    ])?;
    let mut gms = Vec::with_capacity(outcomes.len());
    for (i, o) in outcomes.iter().enumerate() {
        let gm = geometric_mean(&o.throughput);
        gms.push(gm);
        for (link, r) in o.throughput.iter().enumerate() {
            out.write_record([
                i.to_string(),
                link.to_string(),
                r.to_string(),
                o.utility.to_string(),
                gm.to_string(),
                o.queue_growth().to_string(),
            ])?;
        }
    }
    out.flush()?;
    if let Some(p) = cdf_out {
        write_cdf(p, &cdf_points(&gms)?)?;
    }
    Ok(())
}
