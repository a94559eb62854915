//! Limited-memory BFGS maximization over a real parameter vector with an
//! Armijo backtracking line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A smooth function to be maximized.
pub trait Ascent {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Value and ascent gradient.
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearch {
    pub initial_step: f64,
    pub contraction: f64,
    /// Sufficient-increase constant.
    pub c1: f64,
    pub max_trials: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            initial_step: 1.0,
            contraction: 0.5,
            c1: 1e-4,
            max_trials: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsSettings {
    pub max_iters: usize,
    /// Stop once the largest gradient component is at most this.
    pub tol_grad: f64,
    /// Stop once both the objective change and the largest parameter change
    /// are at most this.
    pub tol_change: f64,
    pub memory: usize,
    pub line_search: LineSearch,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings {
            max_iters: 200,
            tol_grad: 1e-5,
            tol_change: 1e-9,
            memory: 10,
            line_search: LineSearch::default(),
        }
    }
}

impl LbfgsSettings {
    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if self.max_iters == 0 || self.memory == 0 {
            return Err(Error::Config("max_iters and memory must be >= 1".into()));
        }
        if !(self.tol_grad > 0.0 && self.tol_change > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(ls.initial_step > 0.0 && ls.contraction > 0.0 && ls.contraction < 1.0)
            || !(ls.c1 > 0.0 && ls.c1 < 1.0)
            || ls.max_trials == 0
        {
            return Err(Error::Config("invalid line-search parameters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    ChangeTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    /// Accepted step length; zero for the starting point.
    pub step: f64,
    /// Extra per-iterate metric supplied by the caller's monitor.
    pub monitor: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// Objective evaluations including those inside gradient calls.
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct History {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    memory: usize,
}

impl History {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>, sy: f64) {
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion. `y` stores differences of the gradient of the
    /// negated objective, so applying the inverse-Hessian estimate to the
    /// ascent gradient yields an ascent direction.
    fn direction(&self, grad: &[f64]) -> Vec<f64> {
        let mut q = grad.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q
    }
}

fn steepest(grad: &[f64]) -> Vec<f64> {
    let norm = dot(grad, grad).sqrt();
    let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    grad.iter().map(|g| g * scale).collect()
}

/// Maximizes `f` from `x0`. `monitor` is called on every accepted iterate and
/// its result stored in the trace.
pub fn maximize<F: Ascent>(
    f: &F,
    x0: Vec<f64>,
    settings: &LbfgsSettings,
    mut monitor: impl FnMut(&[f64]) -> Option<f64>,
) -> Result<LbfgsOutcome> {
    settings.validate()?;
    if x0.len() != f.dim() {
        return Err(Error::Dimension(format!(
            "start has {} parameters, objective expects {}",
            x0.len(),
            f.dim()
        )));
    }
    let ls = settings.line_search;
    let mut x = x0;
    let (mut value, mut grad) = f.value_grad(&x)?;
    let mut evaluations = 1;
    check_finite(value, &grad, 0)?;

    let mut records = vec![IterationRecord {
        iteration: 0,
        objective: value,
        grad_norm: inf_norm(&grad),
        step: 0.0,
        monitor: monitor(&x),
    }];
    let mut history = History {
        pairs: VecDeque::with_capacity(settings.memory),
        memory: settings.memory,
    };

    let mut termination = Termination::MaxIterations;
    for iteration in 1..=settings.max_iters {
        if inf_norm(&grad) <= settings.tol_grad {
            termination = Termination::GradientTolerance;
            break;
        }

        let mut direction = if history.pairs.is_empty() {
            steepest(&grad)
        } else {
            history.direction(&grad)
        };
        let mut slope = dot(&grad, &direction);
        if !(slope > 0.0) {
            history.pairs.clear();
            direction = steepest(&grad);
            slope = dot(&grad, &direction);
        }

        let mut accepted = None;
        for attempt in 0..2 {
            let mut step = ls.initial_step;
            for _ in 0..ls.max_trials {
                let trial: Vec<f64> = x.iter().zip(&direction).map(|(xi, di)| xi + step * di).collect();
                let trial_value = f.value(&trial);
                evaluations += 1;
                if let Ok(v) = trial_value {
                    if v.is_finite() && v >= value + ls.c1 * step * slope {
                        accepted = Some((trial, step));
                        break;
                    }
                }
                step *= ls.contraction;
            }
            if accepted.is_some() || attempt == 1 || history.pairs.is_empty() {
                break;
            }
            // quasi-Newton direction failed: retry once from steepest ascent
            history.pairs.clear();
            direction = steepest(&grad);
            slope = dot(&grad, &direction);
        }

        let Some((x_new, step)) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };

        let (value_new, grad_new) = f.value_grad(&x_new)?;
        evaluations += 1;
        check_finite(value_new, &grad_new, iteration)?;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad.iter().zip(&grad_new).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            history.push(s.clone(), y, sy);
        } else {
            history.pairs.clear();
        }

        let delta_value = (value_new - value).abs();
        let delta_x = inf_norm(&s);
        x = x_new;
        value = value_new;
        grad = grad_new;
        records.push(IterationRecord {
            iteration,
            objective: value,
            grad_norm: inf_norm(&grad),
            step,
            monitor: monitor(&x),
        });

        if delta_value <= settings.tol_change && delta_x <= settings.tol_change {
            termination = Termination::ChangeTolerance;
            break;
        }
    }

    Ok(LbfgsOutcome {
        x,
        value,
        records,
        termination,
        evaluations,
    })
}

fn check_finite(value: f64, grad: &[f64], iteration: usize) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::Numerical {
            iteration,
            reason: format!("objective value {value}"),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical {
            iteration,
            reason: "non-finite gradient".into(),
        });
    }
    Ok(())
}
