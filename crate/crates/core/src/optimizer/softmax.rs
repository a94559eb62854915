//! Softmax reparametrization: every real parameter vector decodes to a
//! feasible precoder, so the problem becomes unconstrained.
//!
//! `ρ_ij² = softmax_j(θ_i)·σ(α_i)·P/T`, `φ_ij = 2π·σ(η_ij)`,
//! `w_ij = ρ_ij·e^{iφ_ij}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::lbfgs::{self, Ascent};
use super::{irc_se, start_precoder, ObjectiveSpec, OptimizationTrace, OptimizerConfig};
use crate::error::Result;
use crate::linalg::CMatrix;
use crate::quality::PrecodingMatrix;

const CLAMP: f64 = 1e-6;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxParams {
    /// `T × L` amplitude logits.
    pub theta: DMatrix<f64>,
    /// `T × L` phase pre-activations.
    pub eta: DMatrix<f64>,
    /// Per-antenna power pre-activations.
    pub alpha: DVector<f64>,
}

impl SoftmaxParams {
    /// Parameters that decode approximately back to `w0`.
    pub fn from_precoder(w0: &CMatrix, power: f64) -> Self {
        let (t, l) = w0.shape();
        let theta = DMatrix::from_fn(t, l, |i, j| (w0[(i, j)].norm_sqr() + 1e-12).ln());
        let eta = DMatrix::from_fn(t, l, |i, j| {
            let turn = w0[(i, j)].arg().rem_euclid(2.0 * PI) / (2.0 * PI);
            logit(turn.clamp(CLAMP, 1.0 - CLAMP))
        });
        let alpha = DVector::from_fn(t, |i, _| {
            let row: f64 = w0.row(i).iter().map(|z| z.norm_sqr()).sum();
            logit((t as f64 * row / power).clamp(CLAMP, 1.0 - CLAMP))
        });
        SoftmaxParams { theta, eta, alpha }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.theta.shape()
    }

    /// Flattened as `θ` (row-major), `η` (row-major), `α`.
    pub fn to_vec(&self) -> Vec<f64> {
        let (t, l) = self.shape();
        let mut out = Vec::with_capacity(2 * t * l + t);
        for m in [&self.theta, &self.eta] {
            for i in 0..t {
                for j in 0..l {
                    out.push(m[(i, j)]);
                }
            }
        }
        out.extend(self.alpha.iter());
        out
    }

    pub fn from_vec(x: &[f64], t: usize, l: usize) -> Self {
        let n = t * l;
        SoftmaxParams {
            theta: DMatrix::from_row_slice(t, l, &x[..n]),
            eta: DMatrix::from_row_slice(t, l, &x[n..2 * n]),
            alpha: DVector::from_column_slice(&x[2 * n..2 * n + t]),
        }
    }

    /// Row-wise softmax weights, per-antenna power fraction `σ(α_i)`, and the
    /// decoded precoder.
    fn decode_parts(&self, power: f64) -> (DMatrix<f64>, Vec<f64>, CMatrix) {
        let (t, l) = self.shape();
        let budget = power / t as f64;
        let mut weights = DMatrix::zeros(t, l);
        let mut fractions = Vec::with_capacity(t);
        let mut w = CMatrix::zeros(t, l);
        for i in 0..t {
            let max = self.theta.row(i).max();
            let mut sum = 0.0;
            for j in 0..l {
                let e = (self.theta[(i, j)] - max).exp();
                weights[(i, j)] = e;
                sum += e;
            }
            let frac = sigmoid(self.alpha[i]);
            fractions.push(frac);
            for j in 0..l {
                weights[(i, j)] /= sum;
                let rho = (weights[(i, j)] * frac * budget).sqrt();
                let phi = 2.0 * PI * sigmoid(self.eta[(i, j)]);
                w[(i, j)] = Complex64::from_polar(rho, phi);
            }
        }
        (weights, fractions, w)
    }

    pub fn decode(&self, power: f64) -> CMatrix {
        self.decode_parts(power).2
    }

    /// Chains an ascent gradient `2·∂S/∂W̄` at the decoded precoder back to
    /// `(θ, η, α)`, flattened like [`to_vec`](Self::to_vec).
    pub fn pull_back(&self, grad_w: &CMatrix, power: f64) -> Vec<f64> {
        let (t, l) = self.shape();
        let (weights, fractions, w) = self.decode_parts(power);
        let mut d_theta = vec![0.0; t * l];
        let mut d_eta = vec![0.0; t * l];
        let mut d_alpha = vec![0.0; t];
        for i in 0..t {
            // r_ij = ∂S/∂(ρ_ij²)·ρ_ij² = ½ ρ_ij ∂S/∂ρ_ij
            let mut r = vec![0.0; l];
            for j in 0..l {
                let z = w[(i, j)];
                let g = grad_w[(i, j)];
                let rho = z.norm();
                let d_rho = if rho > 0.0 { (g.conj() * z).re / rho } else { 0.0 };
                r[j] = 0.5 * rho * d_rho;
                let d_phi = -(g.conj() * z).im;
                let s = sigmoid(self.eta[(i, j)]);
                d_eta[i * l + j] = d_phi * 2.0 * PI * s * (1.0 - s);
            }
            let r_sum: f64 = r.iter().sum();
            for j in 0..l {
                d_theta[i * l + j] = r[j] - weights[(i, j)] * r_sum;
            }
            d_alpha[i] = (1.0 - fractions[i]) * r_sum;
        }
        d_theta.extend(d_eta);
        d_theta.extend(d_alpha);
        d_theta
    }
}

struct Reparametrized<'a> {
    spec: ObjectiveSpec<'a>,
    t: usize,
    l: usize,
}

impl Ascent for Reparametrized<'_> {
    fn dim(&self) -> usize {
        2 * self.t * self.l + self.t
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let p = SoftmaxParams::from_vec(x, self.t, self.l);
        self.spec.value_at(&p.decode(self.spec.params.power))
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = SoftmaxParams::from_vec(x, self.t, self.l);
        let power = self.spec.params.power;
        let (v, g) = self.spec.value_and_gradient(&p.decode(power))?;
        Ok((v, p.pull_back(&g, power)))
    }
}

/// Maximizes the objective over the softmax parameters, initialized from the
/// configured start precoder.
pub fn softmax_maximize(
    spec: &ObjectiveSpec<'_>,
    cfg: &OptimizerConfig,
) -> Result<(PrecodingMatrix, OptimizationTrace)> {
    let w0 = start_precoder(spec, &cfg.start)?;
    let (t, l) = w0.shape();
    let power = spec.params.power;
    let start = SoftmaxParams::from_precoder(&w0, power);
    let objective = Reparametrized { spec: *spec, t, l };
    let channel = spec.channel;
    let params = spec.params;
    let outcome = lbfgs::maximize(&objective, start.to_vec(), &cfg.lbfgs, |x| {
        cfg.record_irc
            .then(|| irc_se(&SoftmaxParams::from_vec(x, t, l).decode(power), channel, &params).ok())
            .flatten()
    })?;
    let w = SoftmaxParams::from_vec(&outcome.x, t, l).decode(power);
    Ok((
        PrecodingMatrix::new(w),
        OptimizationTrace::from_records(outcome.records, outcome.termination, outcome.evaluations),
    ))
}
