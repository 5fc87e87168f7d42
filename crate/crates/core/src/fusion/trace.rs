use std::io::Write;

use crate::domain::{AgentId, Parameter};
use crate::error::{Result, SolaError};

/// One fusion event.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub time: f64,
    pub sigma: AgentId,
    pub alpha: f64,
    /// `F(x(k), D^{σ(k)}(k))`
    pub loss: f64,
    pub p_new: f64,
    pub p_prev: f64,
    pub param_norm: f64,
    /// `‖x(k) − x(k−1)‖`
    pub step_norm: f64,
    /// `‖x(k⁺) − x(k−1)‖`
    pub proposal_norm: f64,
    pub err_to_opt: Option<f64>,
    pub forced: bool,
    pub x: Option<Parameter>,
    pub x_plus: Option<Parameter>,
}

/// Per-event records of a run plus the metadata needed to reproduce it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub x0: Option<Parameter>,
    pub seed: u64,
    pub config_digest: Option<String>,
}

pub const TRACE_HEADER: &str = "k,t,sigma,alpha,loss,p_new,p_prev,param_norm,err_to_opt,forced";

/// Full-precision float formatting shared by every CSV writer.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.alpha).collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn sigma(&self) -> Vec<AgentId> {
        self.records.iter().map(|r| r.sigma).collect()
    }

    /// `max_k ‖x(k) − x(k−1)‖`
    pub fn max_step(&self) -> f64 {
        self.records.iter().map(|r| r.step_norm).fold(0.0, f64::max)
    }

    pub fn last_param(&self) -> Option<&Parameter> {
        self.records.last().and_then(|r| r.x.as_ref())
    }

    /// `x(k)` for `k = 0..=K` when parameters were retained.
    pub fn params(&self) -> Option<Vec<&Parameter>> {
        let mut out = vec![self.x0.as_ref()?];
        for r in &self.records {
            out.push(r.x.as_ref()?);
        }
        Some(out)
    }

    /// Fills `err_to_opt = ‖x(k) − x*‖` from retained parameters.
    pub fn set_err_to_opt(&mut self, x_star: &Parameter) {
        for r in &mut self.records {
            r.err_to_opt = r.x.as_ref().map(|x| x.distance(x_star));
        }
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let io = |e| SolaError::io("trace.csv", e);
        writeln!(w, "{TRACE_HEADER}").map_err(io)?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.k,
                fmt_f64(r.time),
                r.sigma,
                fmt_f64(r.alpha),
                fmt_f64(r.loss),
                fmt_f64(r.p_new),
                fmt_f64(r.p_prev),
                fmt_f64(r.param_norm),
                r.err_to_opt.map(fmt_f64).unwrap_or_default(),
                u8::from(r.forced),
            )
            .map_err(io)?;
        }
        Ok(())
    }
}
