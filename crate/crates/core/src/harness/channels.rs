//! Synthetic Rayleigh channels.
//!
//! Every draw comes from a ChaCha20 generator seeded with the scenario seed;
//! user `k` reads stream `k`, so adding users never perturbs the draws of
//! earlier users.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{ChannelSet, SystemDims};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelModel {
    #[default]
    IidGaussian,
    /// Kronecker model with exponential correlation `ρ^{|i−j|}` at both ends.
    ExpCorrelated { rho: f64 },
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `rows × cols` matrix of unit-variance circular complex Gaussians, row-major
/// draw order.
pub fn iid_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> CMatrix {
    let mut rng = stream_rng(seed, stream);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = Complex64::new(re * scale, im * scale);
        }
    }
    m
}

/// Symmetric square root of the exponential correlation matrix.
fn exp_correlation_sqrt(n: usize, rho: f64) -> CMatrix {
    let c = DMatrix::<f64>::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()));
    let eig = c.symmetric_eigen();
    let mut q = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        q.column_mut(j).scale_mut(lam.max(0.0).sqrt());
    }
    let root = q * eig.eigenvectors.transpose();
    root.map(|x| Complex64::new(x, 0.0))
}

/// Raw per-user channel matrices for one seed.
pub fn generate_raw(dims: &SystemDims, seed: u64, model: ChannelModel) -> Result<Vec<CMatrix>> {
    dims.validate()?;
    let t = dims.antennas;
    let tx_root = match model {
        ChannelModel::IidGaussian | ChannelModel::ExpCorrelated { rho: 0.0 } => None,
        ChannelModel::ExpCorrelated { rho } => {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::Config(format!("correlation rho={rho} outside [0, 1)")));
            }
            Some((exp_correlation_sqrt(t, rho), rho))
        }
    };
    Ok(dims
        .rx
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let h = iid_matrix(r, t, seed, k as u64);
            match &tx_root {
                None => h,
                Some((ct, rho)) => exp_correlation_sqrt(r, *rho) * h * ct,
            }
        })
        .collect())
}

/// Draws and decomposes a channel set.
pub fn generate_channels(dims: &SystemDims, seed: u64, model: ChannelModel) -> Result<ChannelSet> {
    let raw = generate_raw(dims, seed, model)?;
    ChannelSet::from_channels(&raw, &dims.layers)
}
