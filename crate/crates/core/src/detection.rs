//! Linear detectors applied by each user: MMSE, MMSE-IRC and Conjugate
//! Detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diagonal, gram_shifted, hermitian_solve, CMatrix};
use crate::model::{ChannelSet, SystemDims, UserChannel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectionKind {
    Mmse,
    MmseIrc,
    Conjugate,
}

/// Per-user detector blocks `G_k` (`L_k × R_k`).
#[derive(Debug, Clone)]
pub struct DetectionSet {
    pub blocks: Vec<CMatrix>,
    pub kind: DetectionKind,
}

impl DetectionSet {
    pub fn conjugate(channel: &ChannelSet) -> Result<Self> {
        let blocks = channel
            .users
            .iter()
            .enumerate()
            .map(|(k, u)| conjugate_user(u, k))
            .collect::<Result<_>>()?;
        Ok(DetectionSet {
            blocks,
            kind: DetectionKind::Conjugate,
        })
    }

    /// MMSE-IRC detectors for precoder `w` with noise-to-signal ratio
    /// `noise_ratio = σ²/P`.
    pub fn mmse_irc(channel: &ChannelSet, w: &CMatrix, noise_ratio: f64) -> Result<Self> {
        let blocks = channel
            .users
            .iter()
            .enumerate()
            .map(|(k, u)| mmse_irc(&u.h, w, channel.dims.layer_range(k), noise_ratio))
            .collect::<Result<_>>()?;
        Ok(DetectionSet {
            blocks,
            kind: DetectionKind::MmseIrc,
        })
    }

    /// Plain MMSE, each user ignoring the other users' beams.
    pub fn mmse(channel: &ChannelSet, w: &CMatrix, noise_ratio: f64) -> Result<Self> {
        let blocks = channel
            .users
            .iter()
            .enumerate()
            .map(|(k, u)| {
                let r = channel.dims.layer_range(k);
                let a = &u.h * w.columns(r.start, r.len());
                mmse(&a, noise_ratio)
            })
            .collect::<Result<_>>()?;
        Ok(DetectionSet {
            blocks,
            kind: DetectionKind::Mmse,
        })
    }

    pub fn check_dims(&self, dims: &SystemDims) -> Result<()> {
        if self.blocks.len() != dims.users() {
            return Err(Error::Dimension(format!(
                "{} detector blocks for {} users",
                self.blocks.len(),
                dims.users()
            )));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if b.shape() != (dims.layers[k], dims.rx[k]) {
                return Err(Error::Dimension(format!(
                    "detector block {k} is {:?}, expected ({}, {})",
                    b.shape(),
                    dims.layers[k],
                    dims.rx[k]
                )));
            }
        }
        Ok(())
    }

    /// Block-diagonal `L × R` detector.
    pub fn assemble(&self) -> CMatrix {
        block_diagonal(&self.blocks)
    }
}

/// `A^H (A A^H + λ I)^{-1}` for `A = H_k W_k`.
///
/// For `λ > 0` and a tall `A` the equivalent `(A^H A + λ I)^{-1} A^H` is
/// solved instead; it has the smaller Gram matrix and stays well conditioned
/// as `λ → 0`.
pub fn mmse(a: &CMatrix, noise_ratio: f64) -> Result<CMatrix> {
    if noise_ratio > 0.0 && a.ncols() < a.nrows() {
        let ah = a.adjoint();
        let m = gram_shifted(&ah, noise_ratio);
        return hermitian_solve(m, &ah, "MMSE detector");
    }
    let m = gram_shifted(a, noise_ratio);
    Ok(hermitian_solve(m, a, "MMSE detector")?.adjoint())
}

/// MMSE-IRC detector of one user in the form
/// `(H_k W_k)^H (H_k W (H_k W)^H + λ I)^{-1}`, where `layers` selects the
/// user's own columns of `W`.
pub fn mmse_irc(
    h_k: &CMatrix,
    w: &CMatrix,
    layers: std::ops::Range<usize>,
    noise_ratio: f64,
) -> Result<CMatrix> {
    let b = h_k * w;
    let a = b.columns(layers.start, layers.len()).into_owned();
    let m = gram_shifted(&b, noise_ratio);
    let g = hermitian_solve(m, &a, "MMSE-IRC detector")?.adjoint();
    debug_assert!(
        crate::linalg::rel_error(
            &g,
            &mmse_irc_covariance(h_k, w, layers, noise_ratio).unwrap_or_else(|_| g.clone())
        ) < 1e-6,
        "MMSE-IRC forms disagree"
    );
    Ok(g)
}

/// MMSE-IRC through the explicit interference covariance
/// `R_uu = H_k (W W^H − W_k W_k^H) H_k^H`.
pub fn mmse_irc_covariance(
    h_k: &CMatrix,
    w: &CMatrix,
    layers: std::ops::Range<usize>,
    noise_ratio: f64,
) -> Result<CMatrix> {
    let wk = w.columns(layers.start, layers.len());
    let a = h_k * wk;
    let r_uu = h_k * (w * w.adjoint() - wk * wk.adjoint()) * h_k.adjoint();
    let mut m = &a * a.adjoint() + r_uu;
    for i in 0..m.nrows() {
        m[(i, i)] += noise_ratio;
    }
    // R_uu is Hermitian only up to rounding
    let m = (&m + m.adjoint()) * num_complex::Complex64::new(0.5, 0.0);
    Ok(hermitian_solve(m, &a, "MMSE-IRC covariance form")?.adjoint())
}

/// `S̃_k^{-1} Ũ_k`.
pub fn conjugate_user(user: &UserChannel, index: usize) -> Result<CMatrix> {
    let mut g = user.u_trunc();
    for (i, &s) in user.s_trunc().iter().enumerate() {
        if !(s > 0.0) {
            return Err(Error::DegenerateChannel {
                user: index,
                reason: format!("leading singular value {i} is zero"),
            });
        }
        g.row_mut(i).scale_mut(1.0 / s);
    }
    Ok(g)
}
