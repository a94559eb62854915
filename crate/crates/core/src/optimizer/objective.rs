//! The composed objectives `S(proj(W))` and their analytic ascent gradients.
//!
//! Gradients follow the Wirtinger convention `2·∂S/∂W̄`: the real part is the
//! derivative with respect to `Re W`, the imaginary part the derivative with
//! respect to `Im W`.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::projection::{project, pull_back};
use crate::detection::DetectionSet;
use crate::error::{Error, Result};
use crate::linalg::{gram_shifted, hermitian_solve, is_finite, CMatrix};
use crate::model::{ChannelSet, SystemParams};
use crate::quality::{effective_sinr, se_conjugate, spectral_efficiency};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveKind {
    /// SE^C, assuming conjugate detection.
    Cd,
    /// SE with the MMSE-IRC detector recomputed for the current precoder.
    Irc,
}

#[derive(Debug, Clone, Copy)]
pub struct ObjectiveSpec<'a> {
    pub kind: ObjectiveKind,
    pub channel: &'a ChannelSet,
    pub params: SystemParams,
}

impl<'a> ObjectiveSpec<'a> {
    pub fn new(kind: ObjectiveKind, channel: &'a ChannelSet, params: SystemParams) -> Self {
        ObjectiveSpec {
            kind,
            channel,
            params,
        }
    }

    fn check_shape(&self, w: &CMatrix) -> Result<()> {
        let dims = &self.channel.dims;
        if w.shape() != (dims.antennas, dims.total_layers()) {
            return Err(Error::Dimension(format!(
                "precoder is {:?}, expected ({}, {})",
                w.shape(),
                dims.antennas,
                dims.total_layers()
            )));
        }
        Ok(())
    }

    /// `S(proj(W))`.
    pub fn value(&self, w: &CMatrix) -> Result<f64> {
        self.check_shape(w)?;
        let p = project(w, self.params.power);
        self.value_at(&p)
    }

    /// `S` at an already feasible precoder, without projecting.
    pub fn value_at(&self, p: &CMatrix) -> Result<f64> {
        match self.kind {
            ObjectiveKind::Cd => Ok(se_conjugate(
                p,
                &self.channel.v_trunc,
                &self.channel.s_trunc,
                self.params.noise,
                self.params.power,
            )),
            ObjectiveKind::Irc => irc_se(p, self.channel, &self.params),
        }
    }

    /// Ascent gradient of `S(proj(W))` with respect to `W`.
    pub fn gradient(&self, w: &CMatrix) -> Result<CMatrix> {
        Ok(self.value_and_gradient(w)?.1)
    }

    pub fn value_and_gradient(&self, w: &CMatrix) -> Result<(f64, CMatrix)> {
        self.check_shape(w)?;
        let p = project(w, self.params.power);
        let (value, grad_p) = match self.kind {
            ObjectiveKind::Cd => se_conjugate_gradient(&p, self.channel, &self.params),
            ObjectiveKind::Irc => (
                irc_se(&p, self.channel, &self.params)?,
                irc_gradient(&p, self.channel, &self.params)?,
            ),
        };
        let grad = pull_back(w, &grad_p, self.params.power);
        if !is_finite(&grad) {
            return Err(Error::Numerical {
                iteration: 0,
                reason: "non-finite objective gradient".into(),
            });
        }
        Ok((value, grad))
    }
}

/// SE scored with MMSE-IRC detection, the reporting metric.
pub fn irc_se(w: &CMatrix, channel: &ChannelSet, params: &SystemParams) -> Result<f64> {
    let g = DetectionSet::mmse_irc(channel, w, params.detection_noise())?;
    Ok(spectral_efficiency(w, channel, &g, params.noise, params.power)?.se_bits)
}

/// SE^C and its gradient. With `A = ṼW`, `D_l = Σ_i |A_li|² + n_l` and
/// `E_l = D_l − |A_ll|²`, the gradient is `(2/ln 2)·Ṽ^H C` where
/// `C_li = A_li (1/D_l − [i≠l]/E_l)`.
pub fn se_conjugate_gradient(
    w: &CMatrix,
    channel: &ChannelSet,
    params: &SystemParams,
) -> (f64, CMatrix) {
    let v = &channel.v_trunc;
    let a = v * w;
    let layers = a.nrows();
    let mut coeff = a.clone();
    let mut value = 0.0;
    for l in 0..layers {
        let s = channel.s_trunc[l];
        let n_l = params.noise / params.power / (s * s);
        let row: f64 = a.row(l).iter().map(|z| z.norm_sqr()).sum();
        let d = row + n_l;
        let e = d - a[(l, l)].norm_sqr();
        value += d.log2() - e.log2();
        for i in 0..a.ncols() {
            let factor = if i == l { 1.0 / d } else { 1.0 / d - 1.0 / e };
            coeff[(l, i)] *= factor;
        }
    }
    let grad = v.adjoint() * coeff * Complex64::new(2.0 / LN_2, 0.0);
    (value, grad)
}

/// Gradient of the MMSE-IRC spectral efficiency, differentiating through the
/// detector.
///
/// For symbol `l` of user `k`, with `B = H_k W`, `M = B B^H + (σ²/P) I` and
/// `τ_l = b_l^H M^{-1} b_l`, the MMSE-IRC output SINR equals
/// `τ_l / (1 − τ_l)`. Then `2·∂τ_l/∂W̄ = 2(u_l e_lᵀ − u_l u_l^H W)` with
/// `u_l = H_k^H M^{-1} b_l`, and the outer derivative of
/// `L_k log2(1 + geomean)` is `γ_k / (ln2 (1+γ_k) τ_l (1−τ_l))`.
pub fn irc_gradient(w: &CMatrix, channel: &ChannelSet, params: &SystemParams) -> Result<CMatrix> {
    let dims = &channel.dims;
    let noise_ratio = params.detection_noise();
    let mut grad = CMatrix::zeros(w.nrows(), w.ncols());
    let mut outer = CMatrix::zeros(w.nrows(), w.nrows());
    for (k, user) in channel.users.iter().enumerate() {
        let range = dims.layer_range(k);
        let b = &user.h * w;
        let own = b.columns(range.start, range.len()).into_owned();
        let m = gram_shifted(&b, noise_ratio);
        let z = hermitian_solve(m, &own, "MMSE-IRC gradient")?;

        let tau: Vec<f64> = (0..range.len())
            .map(|i| own.column(i).dotc(&z.column(i)).re)
            .collect();
        let sinr: Vec<f64> = tau.iter().map(|&t| t / (1.0 - t)).collect();
        let gamma = effective_sinr(&sinr);
        if gamma == 0.0 {
            // geometric mean pinned at zero; take the zero subgradient
            continue;
        }
        let u = user.h.adjoint() * z;
        let mut weighted = u.clone();
        for (i, &t) in tau.iter().enumerate() {
            let c = gamma / (LN_2 * (1.0 + gamma) * t * (1.0 - t));
            weighted.column_mut(i).scale_mut(2.0 * c);
            let mut target = grad.column_mut(range.start + i);
            target += weighted.column(i);
        }
        outer += &weighted * u.adjoint();
    }
    grad -= outer * w;
    Ok(grad)
}
