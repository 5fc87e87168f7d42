use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::build::{build_scenario, Prepared};
use super::config::{ExperimentConfig, ExperimentKind};
use crate::analysis::{
    batch_optimum, certify_switching_chain, estimate_contraction, regret, stability_series, write_regret_csv,
    ChainReport, ContractionEstimate, GdBudget, Optimum, RegretReport, Replay, Sampling, Stability,
};
use crate::domain::Parameter;
use crate::error::{Result, SolaError};
use crate::fusion::{fmt_f64, run_observed, FusionMode, RunOutput, RunTrace};
use crate::models::{MlpProblem, MlpShape};
use crate::rng::{stream, Component};
use crate::switching::{is_admissible, Admissibility, DwellParams, SelectingSignal};

/// Test-set evaluation at event `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRow {
    pub k: usize,
    pub accuracy: f64,
    pub loss: f64,
}

/// Everything an experiment produced.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    pub config_digest: String,
    pub trace: RunTrace,
    pub signal: Option<SelectingSignal>,
    /// Set when the run stopped early; `trace` then holds the partial run.
    pub failure: Option<String>,
    pub final_x: Option<Parameter>,
    pub optimum: Option<Optimum>,
    pub eval: Vec<EvalRow>,
    pub regret: Option<(RegretReport, Stability)>,
    pub contraction: Option<ContractionEstimate>,
    pub dwell: Option<DwellParams>,
    pub admissibility: Option<Admissibility>,
    pub chain: Option<ChainReport>,
}

impl ExperimentOutcome {
    /// `‖x(K) − x*‖` when `x*` is known.
    pub fn final_error(&self) -> Option<f64> {
        Some(self.final_x.as_ref()?.distance(&self.optimum.as_ref()?.x))
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.eval.last().map(|e| e.accuracy)
    }

    pub fn switches(&self) -> usize {
        self.signal.as_ref().map_or(0, SelectingSignal::total_switches)
    }
}

/// Runs the configured experiment and its analyses. Setup problems are
/// errors; a divergent run is reported through [`ExperimentOutcome::failure`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let Prepared {
        scenario,
        test,
        generator: _,
    } = build_scenario(cfg)?;
    let problem = scenario.problem.clone();
    let mlp = matches!(cfg.kind, ExperimentKind::Mnist);

    let optimum = if !mlp || cfg.analysis.regret {
        let pooled = scenario.pooled_data()?;
        let budget = cfg.mnist.as_ref().map_or(GdBudget::default(), |m| GdBudget {
            epochs: m.reference_epochs,
            learning_rate: m.reference_learning_rate,
        });
        Some(batch_optimum(&pooled, problem.as_ref(), budget, Some(scenario.initial_parameter()))?)
    } else {
        None
    };

    let eval_every = cfg.mnist.as_ref().map_or(1, |m| m.eval_every);
    let classifier = match (&test, &cfg.mnist) {
        (Some(t), Some(m)) => Some(MlpProblem::new(MlpShape {
            input: t.dim().unwrap_or(784),
            hidden: m.hidden,
            output: 10,
        })),
        _ => None,
    };
    let mut eval = Vec::new();
    let mut final_x = None;
    let horizon = scenario.schedule.len();
    let result = run_observed(&scenario, |view| {
        let k = view.record.k;
        if let (Some(test), Some(p)) = (test.as_ref(), classifier.as_ref()) {
            if k % eval_every == 0 || k == horizon {
                let model = p.model(view.x);
                eval.push(EvalRow {
                    k,
                    accuracy: model.accuracy(test),
                    loss: model.loss(test),
                });
            }
        }
        if k == horizon {
            final_x = Some(view.x.clone());
        }
        Ok(())
    });

    let mut outcome = ExperimentOutcome {
        kind: cfg.kind,
        config_digest: cfg.digest(),
        trace: RunTrace::default(),
        signal: None,
        failure: None,
        final_x: None,
        optimum,
        eval,
        regret: None,
        contraction: None,
        dwell: None,
        admissibility: None,
        chain: None,
    };
    let RunOutput { mut trace, events, signal } = match result {
        Ok(out) => out,
        Err(f) => {
            outcome.trace = f.partial;
            outcome.trace.config_digest = Some(outcome.config_digest.clone());
            outcome.failure = Some(f.error.to_string());
            return Ok(outcome);
        }
    };
    trace.config_digest = Some(outcome.config_digest.clone());
    if let Some(o) = &outcome.optimum {
        trace.set_err_to_opt(&o.x);
    }
    outcome.final_x = final_x;

    if cfg.analysis.regret {
        if let Some(o) = &outcome.optimum {
            let r = regret(&trace, &o.x, problem.as_ref(), Replay::new(&scenario, &events))?;
            let s = stability_series(&trace.losses());
            outcome.regret = Some((r, s));
        }
    }

    if cfg.analysis.contraction || cfg.analysis.mu_bar.is_some() {
        let finals = Replay::new(&scenario, &events).finish()?;
        let mut est = if cfg.analysis.contraction {
            let agents: Vec<_> = finals
                .iter()
                .filter(|(_, (_, d))| !d.is_empty())
                .map(|(id, (alg, d))| (*id, alg, vec![d.clone()]))
                .collect();
            let mut rng = stream(cfg.seed, Component::Analysis, 0);
            let mut sampling = Sampling::default().with_samples(cfg.analysis.samples);
            if mlp {
                sampling.center = outcome.final_x.clone();
            }
            estimate_contraction(&agents, problem.as_ref(), &sampling, &mut rng)?
        } else {
            ContractionEstimate::analytic(1.0, 1.0)
        };
        if let Some(mu) = cfg.analysis.mu_bar {
            est.mu_bar = mu;
        }
        if let Some(beta) = cfg.analysis.beta_bar {
            est.beta_bar = beta;
        }
        outcome.dwell = DwellParams::from_contraction(cfg.analysis.n0, est.mu_bar, est.beta_bar).ok();
        outcome.admissibility = outcome.dwell.map(|p| is_admissible(&signal, &p));
        if cfg.analysis.chain && cfg.mode == FusionMode::Naive && trace.params().is_some() {
            let mut rng = stream(cfg.seed, Component::Analysis, 1);
            outcome.chain = Some(certify_switching_chain(
                &trace,
                &signal,
                Replay::new(&scenario, &events),
                problem.as_ref(),
                &est,
                cfg.analysis.chain_directions,
                &mut rng,
            )?);
        }
        outcome.contraction = Some(est);
    }

    outcome.trace = trace;
    outcome.signal = Some(signal);
    Ok(outcome)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| SolaError::io(path, e))
}

fn finish(mut w: BufWriter<File>, name: &str) -> Result<()> {
    w.flush().map_err(|e| SolaError::io(name, e))
}

/// Writes `trace.csv`, `summary.txt` and, when computed, `regret.csv`,
/// `contraction.csv`, `err.csv` (regression) and `eval.csv` (classification).
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SolaError::io(dir, e))?;
    let mut w = create(dir, "trace.csv")?;
    outcome.trace.write_csv(&mut w)?;
    finish(w, "trace.csv")?;

    if let Some((r, s)) = &outcome.regret {
        let mut w = create(dir, "regret.csv")?;
        write_regret_csv(r, s, &mut w)?;
        finish(w, "regret.csv")?;
    }
    if let Some(c) = &outcome.contraction {
        let mut w = create(dir, "contraction.csv")?;
        write_contraction_csv(c, outcome.dwell.as_ref(), outcome.chain.as_ref(), &mut w)?;
        finish(w, "contraction.csv")?;
    }
    let io = |name: &'static str| move |e| SolaError::io(name, e);
    match outcome.kind {
        ExperimentKind::Mnist => {
            let mut w = create(dir, "eval.csv")?;
            writeln!(w, "k,test_accuracy,test_loss").map_err(io("eval.csv"))?;
            for e in &outcome.eval {
                writeln!(w, "{},{},{}", e.k, fmt_f64(e.accuracy), fmt_f64(e.loss)).map_err(io("eval.csv"))?;
            }
            finish(w, "eval.csv")?;
        }
        _ => {
            let mut w = create(dir, "err.csv")?;
            writeln!(w, "k,err_to_opt").map_err(io("err.csv"))?;
            for r in &outcome.trace.records {
                if let Some(e) = r.err_to_opt {
                    writeln!(w, "{},{}", r.k, fmt_f64(e)).map_err(io("err.csv"))?;
                }
            }
            finish(w, "err.csv")?;
        }
    }
    let mut w = create(dir, "summary.txt")?;
    w.write_all(summary(outcome).as_bytes()).map_err(io("summary.txt"))?;
    finish(w, "summary.txt")
}

/// `contraction.csv`: `item,estimate,samples,violations`.
pub fn write_contraction_csv(
    c: &ContractionEstimate,
    dwell: Option<&DwellParams>,
    chain: Option<&ChainReport>,
    mut w: impl Write,
) -> Result<()> {
    let io = |e| SolaError::io("contraction.csv", e);
    writeln!(w, "item,estimate,samples,violations").map_err(io)?;
    for (id, b) in &c.betas {
        writeln!(w, "beta:{id},{},{},", fmt_f64(b.beta), b.samples).map_err(io)?;
    }
    for ((i, j), mu) in &c.mus {
        writeln!(w, "mu:{i}>{j},{},{},", fmt_f64(*mu), c.samples).map_err(io)?;
    }
    writeln!(w, "beta_bar,{},{},", fmt_f64(c.beta_bar), c.samples).map_err(io)?;
    writeln!(w, "mu_bar,{},{},", fmt_f64(c.mu_bar), c.samples).map_err(io)?;
    if let Some(d) = dwell {
        writeln!(w, "tau,{},,", fmt_f64(d.tau)).map_err(io)?;
    }
    if let Some(ch) = chain {
        writeln!(w, "chain,{},{},{}", fmt_f64(ch.max_ratio), ch.directions, ch.violations).map_err(io)?;
    }
    Ok(())
}

/// Human-readable `key: value` lines.
pub fn summary(o: &ExperimentOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "config_digest: {}", o.config_digest);
    let _ = writeln!(s, "seed: {}", o.trace.seed);
    let _ = writeln!(s, "events: {}", o.trace.len());
    let _ = writeln!(s, "status: {}", o.failure.as_deref().unwrap_or("ok"));
    if let Some(e) = o.final_error() {
        let _ = writeln!(s, "final_error: {e:.6e}");
    }
    if let Some(opt) = &o.optimum {
        let _ = writeln!(
            s,
            "optimum: {}{}",
            if opt.approximate { "budgeted reference" } else { "exact" },
            if opt.regularized { " (ridge)" } else { "" }
        );
    }
    if let Some(e) = o.eval.last() {
        let _ = writeln!(s, "final_test_accuracy: {:.4}", e.accuracy);
        let _ = writeln!(s, "final_test_loss: {:.6}", e.loss);
    }
    if let Some(last) = o.trace.records.last() {
        let _ = writeln!(s, "final_loss: {:.6e}", last.loss);
    }
    let _ = writeln!(s, "switches: {}", o.switches());
    if let Some(sig) = &o.signal {
        let _ = writeln!(s, "forced_selections: {}", sig.forced_count());
    }
    let _ = writeln!(s, "max_step: {:.6e}", o.trace.max_step());
    if let Some((r, st)) = &o.regret {
        let _ = writeln!(s, "regret: {:.6e}", r.last());
        let _ = writeln!(s, "regret_over_K: {:.6e}", r.average().last().copied().unwrap_or(0.0));
        match st.tail_slope {
            Some(v) => {
                let _ = writeln!(s, "stability_tail_slope: {v:.6e}");
            }
            None => {
                let _ = writeln!(s, "stability_tail_slope: n/a");
            }
        }
    }
    if let Some(c) = &o.contraction {
        let _ = writeln!(s, "beta_bar: {:.6}", c.beta_bar);
        let _ = writeln!(s, "mu_bar: {:.6}", c.mu_bar);
    }
    match (&o.dwell, &o.admissibility) {
        (Some(d), Some(a)) => {
            let _ = writeln!(s, "n0: {}", d.n0);
            let _ = writeln!(s, "tau: {:.6}", d.tau);
            let _ = writeln!(s, "admissible: {}", a.admissible);
            if let Some((k1, k2)) = a.first_violation {
                let _ = writeln!(s, "first_violation: ({k1}, {k2})");
            }
        }
        _ if o.contraction.is_some() => {
            let _ = writeln!(s, "tau: n/a (needs mu_bar > 1 and 0 < beta_bar < 1)");
        }
        _ => {}
    }
    if let Some(ch) = &o.chain {
        let _ = writeln!(s, "chain_violations: {}", ch.violations);
        let _ = writeln!(s, "chain_max_ratio: {:.6}", ch.max_ratio);
    }
    s
}
