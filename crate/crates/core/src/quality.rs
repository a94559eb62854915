//! Quality functions: per-symbol SINR, effective (geometric-mean) user SINR,
//! Spectral Efficiency, SUSINR and the conjugate-detection approximation
//! SE^C.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::detection::DetectionSet;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{susinr_gain, ChannelSet};

/// A `T × L` precoder. Columns are per-symbol beams, rows are per-antenna
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    pub w: CMatrix,
}

impl PrecodingMatrix {
    pub fn new(w: CMatrix) -> Self {
        PrecodingMatrix { w }
    }

    pub fn antennas(&self) -> usize {
        self.w.nrows()
    }

    pub fn layers(&self) -> usize {
        self.w.ncols()
    }

    /// `‖w^m‖²` for every antenna row.
    pub fn row_powers(&self) -> Vec<f64> {
        row_powers(&self.w)
    }

    pub fn max_row_power(&self) -> f64 {
        self.row_powers().into_iter().fold(0.0, f64::max)
    }

    /// Every row within `P/T + tol`.
    pub fn is_feasible(&self, power: f64, tol: f64) -> bool {
        let budget = power / self.antennas() as f64;
        self.row_powers().iter().all(|&p| p <= budget + tol)
    }
}

pub(crate) fn row_powers(w: &CMatrix) -> Vec<f64> {
    w.row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub per_symbol: Vec<f64>,
    pub per_user_effective: Vec<f64>,
    pub se_bits: f64,
    /// Users whose effective SINR collapsed to zero; they contribute nothing.
    pub zero_sinr_users: Vec<usize>,
}

/// `log2(1 + x)`, accurate for small `x`.
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

/// SINR of symbol `l` received by a user with channel `h_k` and detector row
/// `g_l` (`1 × R_k`).
pub fn symbol_sinr(
    w: &CMatrix,
    h_k: &CMatrix,
    g_l: &CMatrix,
    noise: f64,
    power: f64,
    l: usize,
) -> Result<f64> {
    let f = g_l * h_k * w;
    let noise_term = g_l.iter().map(|z| z.norm_sqr()).sum::<f64>() * noise / power;
    sinr_from_row(f.row(0).iter().map(|z| z.norm_sqr()), l, noise_term)
}

fn sinr_from_row(energies: impl Iterator<Item = f64>, l: usize, noise_term: f64) -> Result<f64> {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, e) in energies.enumerate() {
        if i == l {
            signal = e;
        } else {
            interference += e;
        }
    }
    let denom = interference + noise_term;
    if denom <= 0.0 {
        return Err(Error::UndefinedSinr { symbol: l });
    }
    Ok(signal / denom)
}

/// Geometric mean, evaluated as `exp(mean(ln x))`. Any zero gives zero.
pub fn effective_sinr(per_symbol: &[f64]) -> f64 {
    if per_symbol.is_empty() || per_symbol.iter().any(|&x| x <= 0.0) {
        return 0.0;
    }
    let mean_log = per_symbol.iter().map(|x| x.ln()).sum::<f64>() / per_symbol.len() as f64;
    mean_log.exp()
}

/// `Σ_k L_k log2(1 + SINR_k^eff)` with the detector `g` applied per user.
pub fn spectral_efficiency(
    w: &CMatrix,
    channel: &ChannelSet,
    g: &DetectionSet,
    noise: f64,
    power: f64,
) -> Result<SinrReport> {
    let dims = &channel.dims;
    if w.nrows() != dims.antennas || w.ncols() != dims.total_layers() {
        return Err(Error::Dimension(format!(
            "precoder is {}x{}, expected {}x{}",
            w.nrows(),
            w.ncols(),
            dims.antennas,
            dims.total_layers()
        )));
    }
    g.check_dims(dims)?;

    let mut per_symbol = Vec::with_capacity(dims.total_layers());
    let mut per_user = Vec::with_capacity(dims.users());
    let mut zero_users = Vec::new();
    let mut se = 0.0;
    for (k, user) in channel.users.iter().enumerate() {
        let gk = &g.blocks[k];
        let f = gk * (&user.h * w);
        let offset = dims.layer_offset(k);
        let start = per_symbol.len();
        for i in 0..dims.layers[k] {
            let noise_term = gk.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>() * noise / power;
            let sinr = sinr_from_row(f.row(i).iter().map(|z| z.norm_sqr()), offset + i, noise_term)?;
            per_symbol.push(sinr);
        }
        let eff = effective_sinr(&per_symbol[start..]);
        if eff == 0.0 {
            zero_users.push(k);
        }
        se += dims.layers[k] as f64 * log2_1p(eff);
        per_user.push(eff);
    }
    Ok(SinrReport {
        per_symbol,
        per_user_effective: per_user,
        se_bits: se,
        zero_sinr_users: zero_users,
    })
}

/// Single-user SINR of the channel set, in dB.
pub fn susinr(channel: &ChannelSet, noise: f64, power: f64) -> Result<f64> {
    if noise <= 0.0 {
        return Err(Error::InfiniteSusinr);
    }
    let gain = susinr_gain(channel)?;
    Ok(10.0 * (power / noise * gain).log10())
}

/// SINR of symbol `l` under conjugate detection, where only the right
/// singular vector `v_l` (`1 × T`) and singular value `s_l` matter.
pub fn sinr_conjugate(
    w: &CMatrix,
    v_l: &CMatrix,
    s_l: f64,
    noise: f64,
    power: f64,
    l: usize,
) -> Result<f64> {
    if !(s_l > 0.0) {
        return Err(Error::DegenerateChannel {
            user: usize::MAX,
            reason: format!("singular value of symbol {l} is zero"),
        });
    }
    let a = v_l * w;
    sinr_from_row(
        a.row(0).iter().map(|z| z.norm_sqr()),
        l,
        noise / power / (s_l * s_l),
    )
}

/// SE^C in its two-sum log form:
/// `Σ_l log2(Σ_i |ṽ_l w_i|² + n_l) − Σ_l log2(Σ_{i≠l} |ṽ_l w_i|² + n_l)`
/// with `n_l = s_l^{-2} σ²/P`.
pub fn se_conjugate(
    w: &CMatrix,
    v_trunc: &CMatrix,
    s_trunc: &[f64],
    noise: f64,
    power: f64,
) -> f64 {
    let a = v_trunc * w;
    let mut total = 0.0;
    let mut interf = 0.0;
    for l in 0..a.nrows() {
        let n_l = noise / power / (s_trunc[l] * s_trunc[l]);
        let row: f64 = a.row(l).iter().map(|z| z.norm_sqr()).sum();
        let own = a[(l, l)].norm_sqr();
        total += (row + n_l).log2();
        interf += (row - own + n_l).log2();
    }
    total - interf
}
