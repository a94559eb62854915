//! Closed-form precoders (MRT, ZF, RZF, ARZF), each scaled so that the
//! strongest antenna row sits exactly on the per-antenna budget.

use log::warn;
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_condition, hermitian_solve, CMatrix};
use crate::model::{ChannelSet, SystemParams};
use crate::quality::{row_powers, PrecodingMatrix};

const ZF_CONDITION_WARNING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    Mrt,
    Zf,
    Rzf,
    Arzf,
}

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    /// Diagonal of the `L × L` power-allocation matrix.
    pub power_alloc: Option<Vec<f64>>,
    pub params: SystemParams,
}

impl BaselineConfig {
    pub fn new(kind: BaselineKind, params: SystemParams) -> Self {
        BaselineConfig {
            kind,
            power_alloc: None,
            params,
        }
    }

    pub fn with_power_alloc(mut self, diag: Vec<f64>) -> Self {
        self.power_alloc = Some(diag);
        self
    }

    fn alloc(&self, layers: usize) -> Result<Vec<f64>> {
        match &self.power_alloc {
            None => Ok(vec![1.0; layers]),
            Some(d) if d.len() != layers => Err(Error::Dimension(format!(
                "power allocation has {} entries, expected {layers}",
                d.len()
            ))),
            Some(d) if d.iter().any(|&p| !(p > 0.0)) => {
                Err(Error::Config("power allocation entries must be positive".into()))
            }
            Some(d) => Ok(d.clone()),
        }
    }
}

/// Scales `w_raw` by `sqrt(P/T) / max_m ‖w^m‖`.
pub fn normalize_power(w_raw: &CMatrix, power: f64) -> Result<PrecodingMatrix> {
    let max_row = row_powers(w_raw).into_iter().fold(0.0, f64::max).sqrt();
    if !(max_row > 0.0) {
        return Err(Error::ZeroPrecoder);
    }
    let target = (power / w_raw.nrows() as f64).sqrt();
    Ok(PrecodingMatrix::new(w_raw * Complex64::new(target / max_row, 0.0)))
}

pub fn precode(channel: &ChannelSet, cfg: &BaselineConfig) -> Result<PrecodingMatrix> {
    match cfg.kind {
        BaselineKind::Mrt => mrt(channel, cfg),
        BaselineKind::Zf => zf(channel, cfg),
        BaselineKind::Rzf => rzf(channel, cfg),
        BaselineKind::Arzf => arzf(channel, cfg),
    }
}

fn scale_columns(mut m: CMatrix, diag: &[f64]) -> CMatrix {
    for (j, &p) in diag.iter().enumerate() {
        m.column_mut(j).scale_mut(p);
    }
    m
}

/// `Ṽ^H P_alloc`, normalized.
pub fn mrt(channel: &ChannelSet, cfg: &BaselineConfig) -> Result<PrecodingMatrix> {
    let alloc = cfg.alloc(channel.dims.total_layers())?;
    normalize_power(
        &scale_columns(channel.v_trunc.adjoint(), &alloc),
        cfg.params.power,
    )
}

/// Unnormalized `Ṽ^H (ṼṼ^H + diag(reg))^{-1} P_alloc`.
pub fn regularized_inverse(
    channel: &ChannelSet,
    reg: &[f64],
    alloc: &[f64],
    context: &'static str,
) -> Result<CMatrix> {
    let v = &channel.v_trunc;
    let mut gram = v * v.adjoint();
    for (i, &r) in reg.iter().enumerate() {
        gram[(i, i)] += r;
    }
    let rhs = CMatrix::from_diagonal(&DVector::from_iterator(
        alloc.len(),
        alloc.iter().map(|&p| Complex64::new(p, 0.0)),
    ));
    let x = hermitian_solve(gram, &rhs, context)?;
    Ok(v.adjoint() * x)
}

/// `Ṽ^H (ṼṼ^H)^{-1} P_alloc`, normalized.
pub fn zf(channel: &ChannelSet, cfg: &BaselineConfig) -> Result<PrecodingMatrix> {
    let layers = channel.dims.total_layers();
    let alloc = cfg.alloc(layers)?;
    let gram = &channel.v_trunc * channel.v_trunc.adjoint();
    let cond = hermitian_condition(&gram);
    if cond > ZF_CONDITION_WARNING {
        warn!("ZF: singular-vector Gram matrix condition number {cond:e}");
    }
    let raw = regularized_inverse(channel, &vec![0.0; layers], &alloc, "ZF Gram matrix")?;
    normalize_power(&raw, cfg.params.power)
}

/// Scalar regularization `R = (σ²L/P)·I`.
pub fn rzf(channel: &ChannelSet, cfg: &BaselineConfig) -> Result<PrecodingMatrix> {
    let layers = channel.dims.total_layers();
    let alloc = cfg.alloc(layers)?;
    let raw = regularized_inverse(
        channel,
        &vec![cfg.params.lambda; layers],
        &alloc,
        "RZF Gram matrix",
    )?;
    normalize_power(&raw, cfg.params.power)
}

/// Diagonal regularization `λ S̃^{-2}` with `λ = σ²L/P`.
pub fn arzf(channel: &ChannelSet, cfg: &BaselineConfig) -> Result<PrecodingMatrix> {
    let layers = channel.dims.total_layers();
    let alloc = cfg.alloc(layers)?;
    let mut reg = Vec::with_capacity(layers);
    for (l, &s) in channel.s_trunc.iter().enumerate() {
        if !(s > 0.0) {
            return Err(Error::DegenerateChannel {
                user: channel.dims.user_of_layer(l),
                reason: format!("singular value of symbol {l} is zero"),
            });
        }
        reg.push(cfg.params.lambda / (s * s));
    }
    let raw = regularized_inverse(channel, &reg, &alloc, "ARZF Gram matrix")?;
    normalize_power(&raw, cfg.params.power)
}
