//! Precoder optimization: the projected objective maximized with L-BFGS, and
//! the softmax reparametrization alternative.

pub mod lbfgs;
pub mod objective;
pub mod projection;
pub mod softmax;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::baselines::{arzf, rzf, BaselineConfig, BaselineKind};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::quality::PrecodingMatrix;

pub use lbfgs::{Ascent, IterationRecord, LbfgsSettings, LineSearch, Termination};
pub use objective::{irc_se, ObjectiveKind, ObjectiveSpec};
pub use projection::project;
pub use softmax::{softmax_maximize, SoftmaxParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StartPoint {
    Rzf,
    Arzf,
    #[serde(skip)]
    Custom(CMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    #[serde(flatten)]
    pub lbfgs: LbfgsSettings,
    pub start: StartPoint,
    /// Evaluate the MMSE-IRC spectral efficiency of every accepted iterate.
    pub record_irc: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lbfgs: LbfgsSettings::default(),
            start: StartPoint::Arzf,
            record_irc: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub se_irc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
    pub evaluations: usize,
}

impl OptimizationTrace {
    fn from_records(records: Vec<IterationRecord>, termination: Termination, evaluations: usize) -> Self {
        OptimizationTrace {
            records: records
                .into_iter()
                .map(|r| TraceRecord {
                    iteration: r.iteration,
                    objective: r.objective,
                    grad_norm: r.grad_norm,
                    step: r.step,
                    se_irc: r.monitor,
                })
                .collect(),
            termination,
            evaluations,
        }
    }

    /// Accepted iterations, not counting the start.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn start_value(&self) -> f64 {
        self.records[0].objective
    }

    pub fn final_value(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].objective >= w[0].objective)
    }
}

/// Interleaved `(re, im)` pairs in row-major order.
pub fn embed(w: &CMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * w.len());
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            out.push(w[(i, j)].re);
            out.push(w[(i, j)].im);
        }
    }
    out
}

pub fn unembed(x: &[f64], rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        Complex64::new(x[k], x[k + 1])
    })
}

/// The starting precoder named by `start`.
pub fn start_precoder(spec: &ObjectiveSpec<'_>, start: &StartPoint) -> Result<CMatrix> {
    let dims = &spec.channel.dims;
    match start {
        StartPoint::Rzf => Ok(rzf(spec.channel, &BaselineConfig::new(BaselineKind::Rzf, spec.params))?.w),
        StartPoint::Arzf => Ok(arzf(spec.channel, &BaselineConfig::new(BaselineKind::Arzf, spec.params))?.w),
        StartPoint::Custom(w) => {
            if w.shape() != (dims.antennas, dims.total_layers()) {
                return Err(Error::Dimension(format!(
                    "custom start is {:?}, expected ({}, {})",
                    w.shape(),
                    dims.antennas,
                    dims.total_layers()
                )));
            }
            Ok(w.clone())
        }
    }
}

struct Projected<'a> {
    spec: ObjectiveSpec<'a>,
    rows: usize,
    cols: usize,
}

impl Ascent for Projected<'_> {
    fn dim(&self) -> usize {
        2 * self.rows * self.cols
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.spec.value(&unembed(x, self.rows, self.cols))
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.spec.value_and_gradient(&unembed(x, self.rows, self.cols))?;
        Ok((v, embed(&g)))
    }
}

/// Maximizes `S(proj(W))` from the configured start; returns the projected
/// final iterate.
pub fn lbfgs_maximize(
    spec: &ObjectiveSpec<'_>,
    cfg: &OptimizerConfig,
) -> Result<(PrecodingMatrix, OptimizationTrace)> {
    let w0 = start_precoder(spec, &cfg.start)?;
    let (rows, cols) = w0.shape();
    let objective = Projected {
        spec: *spec,
        rows,
        cols,
    };
    let power = spec.params.power;
    let channel = spec.channel;
    let params = spec.params;
    let outcome = lbfgs::maximize(&objective, embed(&w0), &cfg.lbfgs, |x| {
        cfg.record_irc
            .then(|| irc_se(&project(&unembed(x, rows, cols), power), channel, &params).ok())
            .flatten()
    })?;
    let w = project(&unembed(&outcome.x, rows, cols), power);
    Ok((
        PrecodingMatrix::new(w),
        OptimizationTrace::from_records(outcome.records, outcome.termination, outcome.evaluations),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::channels::{generate_channels, iid_matrix, ChannelModel};
    use crate::model::{SystemDims, SystemParams};

    #[test]
    fn embedding_round_trip() {
        let w = iid_matrix(3, 2, 1, 0);
        assert_eq!(unembed(&embed(&w), 3, 2), w);
    }

    #[test]
    fn improves_on_start_and_stays_feasible() {
        let dims = SystemDims::uniform(8, 2, 2, 1).unwrap();
        let set = generate_channels(&dims, 17, ChannelModel::IidGaussian).unwrap();
        let noise = crate::model::noise_from_susinr(&set, 1.0, 10.0).unwrap();
        let params = SystemParams::new(1.0, noise, 2).unwrap();
        for kind in [ObjectiveKind::Cd, ObjectiveKind::Irc] {
            let spec = ObjectiveSpec::new(kind, &set, params);
            let cfg = OptimizerConfig {
                lbfgs: LbfgsSettings {
                    max_iters: 50,
                    ..Default::default()
                },
                record_irc: true,
                ..Default::default()
            };
            let (w, trace) = lbfgs_maximize(&spec, &cfg).unwrap();
            assert!(w.is_feasible(1.0, 1e-12));
            assert!(trace.is_monotone());
            assert!(spec.value(&w.w).unwrap() >= trace.start_value());
            assert!(trace.records.iter().all(|r| r.se_irc.is_some()));
        }
    }

    #[test]
    fn custom_start_shape_checked() {
        let dims = SystemDims::uniform(4, 1, 2, 1).unwrap();
        let set = generate_channels(&dims, 1, ChannelModel::IidGaussian).unwrap();
        let params = SystemParams::new(1.0, 0.1, 1).unwrap();
        let spec = ObjectiveSpec::new(ObjectiveKind::Cd, &set, params);
        let cfg = OptimizerConfig {
            start: StartPoint::Custom(CMatrix::zeros(3, 1)),
            ..Default::default()
        };
        assert!(lbfgs_maximize(&spec, &cfg).is_err());
    }
}
