//! System dimensions, per-user channels with their reduced SVD, and the
//! stacked multi-user decomposition `H = U^H S V`.

use nalgebra::SVD;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diagonal, vstack, CMatrix};

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    /// Transmit antennas at the base station.
    pub antennas: usize,
    /// Receive antennas per user.
    pub rx: Vec<usize>,
    /// Transmitted layers (symbols) per user.
    pub layers: Vec<usize>,
}

impl SystemDims {
    pub fn new(antennas: usize, rx: Vec<usize>, layers: Vec<usize>) -> Result<Self> {
        let dims = SystemDims {
            antennas,
            rx,
            layers,
        };
        dims.validate()?;
        Ok(dims)
    }

    /// `users` identical users with `rx` antennas and `layers` layers each.
    pub fn uniform(antennas: usize, users: usize, rx: usize, layers: usize) -> Result<Self> {
        Self::new(antennas, vec![rx; users], vec![layers; users])
    }

    pub fn validate(&self) -> Result<()> {
        if self.rx.is_empty() {
            return Err(Error::Dimension("at least one user is required".into()));
        }
        if self.rx.len() != self.layers.len() {
            return Err(Error::Dimension(format!(
                "{} receive-antenna counts but {} layer counts",
                self.rx.len(),
                self.layers.len()
            )));
        }
        for (k, (&r, &l)) in self.rx.iter().zip(&self.layers).enumerate() {
            if !(1 <= l && l <= r && r <= self.antennas) {
                return Err(Error::Dimension(format!(
                    "user {k}: need 1 <= L_k <= R_k <= T, got L_k={l}, R_k={r}, T={}",
                    self.antennas
                )));
            }
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.rx.len()
    }

    pub fn total_rx(&self) -> usize {
        self.rx.iter().sum()
    }

    pub fn total_layers(&self) -> usize {
        self.layers.iter().sum()
    }

    /// First row of user `k` in the stacked `R`-dimensional receive space.
    pub fn rx_offset(&self, k: usize) -> usize {
        self.rx[..k].iter().sum()
    }

    /// First symbol index of user `k`.
    pub fn layer_offset(&self, k: usize) -> usize {
        self.layers[..k].iter().sum()
    }

    pub fn layer_range(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.layer_offset(k);
        start..start + self.layers[k]
    }

    /// User that owns symbol `l`.
    pub fn user_of_layer(&self, l: usize) -> usize {
        let mut acc = 0;
        for (k, &lk) in self.layers.iter().enumerate() {
            acc += lk;
            if l < acc {
                return k;
            }
        }
        panic!("layer index {l} out of range");
    }
}

/// Total power and noise. The detection noise scalar is `σ²/P`, the
/// precoder regularizer is `λ = σ²L/P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub power: f64,
    pub noise: f64,
    pub lambda: f64,
}

impl SystemParams {
    pub fn new(power: f64, noise: f64, total_layers: usize) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::Config(format!("power must be positive, got {power}")));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Config(format!("noise must be >= 0, got {noise}")));
        }
        Ok(SystemParams {
            power,
            noise,
            lambda: noise * total_layers as f64 / power,
        })
    }

    /// Per-symbol noise-to-signal ratio used by the detectors.
    pub fn detection_noise(&self) -> f64 {
        self.noise / self.power
    }

    /// Per-antenna power budget `P/T`.
    pub fn antenna_budget(&self, antennas: usize) -> f64 {
        self.power / antennas as f64
    }
}

/// One user's channel `H_k = U_k^H S_k V_k` with the leading-`L_k`
/// truncation.
#[derive(Debug, Clone)]
pub struct UserChannel {
    pub h: CMatrix,
    /// `R_k × R_k` unitary.
    pub u: CMatrix,
    /// Descending, nonnegative.
    pub s: Vec<f64>,
    /// `R_k × T` with orthonormal rows.
    pub v: CMatrix,
    pub layers: usize,
}

impl UserChannel {
    pub fn rx(&self) -> usize {
        self.h.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.h.ncols()
    }

    /// `Ũ_k`, the leading `L_k` rows of `U_k`.
    pub fn u_trunc(&self) -> CMatrix {
        self.u.rows(0, self.layers).into_owned()
    }

    /// `S̃_k` as a vector.
    pub fn s_trunc(&self) -> &[f64] {
        &self.s[..self.layers]
    }

    /// `Ṽ_k`, the leading `L_k` rows of `V_k`.
    pub fn v_trunc(&self) -> CMatrix {
        self.v.rows(0, self.layers).into_owned()
    }

    /// `U_k^H diag(S_k) V_k`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut sv = self.v.clone();
        for (i, &s) in self.s.iter().enumerate() {
            sv.row_mut(i).scale_mut(s);
        }
        self.u.adjoint() * sv
    }
}

/// Reduced SVD of one user channel, sorted descending with the phase of each
/// right singular vector fixed so its largest-magnitude entry is real
/// positive.
///
/// `user` only labels errors.
pub fn decompose_user(h: &CMatrix, layers: usize, user: usize) -> Result<UserChannel> {
    let (rx, antennas) = h.shape();
    if rx == 0 || rx > antennas {
        return Err(Error::Dimension(format!(
            "user {user}: channel is {rx}x{antennas}, need 1 <= R_k <= T"
        )));
    }
    if layers == 0 || layers > rx {
        return Err(Error::Dimension(format!(
            "user {user}: L_k={layers} must satisfy 1 <= L_k <= R_k={rx}"
        )));
    }
    if !h.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Dimension(format!("user {user}: non-finite channel entry")));
    }

    let svd = SVD::try_new_unordered(h.clone(), true, true, 1e-15, 0).ok_or_else(|| {
        Error::DegenerateChannel {
            user,
            reason: "SVD failed to converge".into(),
        }
    })?;
    let left = svd.u.expect("requested U");
    let right = svd.v_t.expect("requested V^T");
    let values = svd.singular_values;

    let mut order: Vec<usize> = (0..rx).collect();
    // stable: ties keep the backend order
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("NaN singular value"));

    let mut u = CMatrix::zeros(rx, rx);
    let mut v = CMatrix::zeros(rx, antennas);
    let mut s = Vec::with_capacity(rx);
    for (row, &src) in order.iter().enumerate() {
        let mut vrow = right.row(src).into_owned();
        let pivot = vrow
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, z)| {
                let m = z.norm();
                if m > best.1 {
                    (i, m)
                } else {
                    best
                }
            })
            .0;
        let p = vrow[pivot];
        let phase = if p.norm() > 0.0 {
            p.conj() / p.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        vrow *= phase;
        vrow[pivot] = Complex64::new(p.norm(), 0.0);
        // H = Σ s u_col v_row; scaling v_row by `phase` requires u_col by conj(phase),
        // and U_k row = conj(u_col)^T, i.e. scaled by `phase`.
        let urow = left.column(src).adjoint() * phase;
        v.row_mut(row).copy_from(&vrow);
        u.row_mut(row).copy_from(&urow);
        s.push(values[src]);
    }

    let s_max = s[0];
    if let Some(l) = (0..layers).find(|&l| !(s[l] > RANK_THRESHOLD * s_max) || s_max == 0.0) {
        return Err(Error::DegenerateChannel {
            user,
            reason: format!(
                "rank below L_k={layers}: singular value {l} is {:e} (max {:e})",
                s[l], s_max
            ),
        });
    }

    Ok(UserChannel {
        h: h.clone(),
        u,
        s,
        v,
        layers,
    })
}

/// All users stacked in user order.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub dims: SystemDims,
    pub users: Vec<UserChannel>,
    /// `R × T`.
    pub h: CMatrix,
    /// Diagonal of `S`, length `R`.
    pub s: Vec<f64>,
    /// `R × R` block-diagonal unitary.
    pub u: CMatrix,
    /// `R × T`.
    pub v: CMatrix,
    /// `L × T`.
    pub v_trunc: CMatrix,
    /// Diagonal of `S̃`, length `L`.
    pub s_trunc: Vec<f64>,
    /// `L × R` block-diagonal.
    pub u_trunc: CMatrix,
}

pub fn stack(users: Vec<UserChannel>) -> Result<ChannelSet> {
    let first = users
        .first()
        .ok_or_else(|| Error::Dimension("no users to stack".into()))?;
    let antennas = first.antennas();
    if let Some((k, u)) = users
        .iter()
        .enumerate()
        .find(|(_, u)| u.antennas() != antennas)
    {
        return Err(Error::Dimension(format!(
            "user {k} has T={} but user 0 has T={antennas}",
            u.antennas()
        )));
    }
    let dims = SystemDims::new(
        antennas,
        users.iter().map(|u| u.rx()).collect(),
        users.iter().map(|u| u.layers).collect(),
    )?;

    let hs: Vec<CMatrix> = users.iter().map(|u| u.h.clone()).collect();
    let vs: Vec<CMatrix> = users.iter().map(|u| u.v.clone()).collect();
    let us: Vec<CMatrix> = users.iter().map(|u| u.u.clone()).collect();
    let vts: Vec<CMatrix> = users.iter().map(|u| u.v_trunc()).collect();
    let uts: Vec<CMatrix> = users.iter().map(|u| u.u_trunc()).collect();

    Ok(ChannelSet {
        h: vstack(&hs),
        s: users.iter().flat_map(|u| u.s.iter().copied()).collect(),
        u: block_diagonal(&us),
        v: vstack(&vs),
        v_trunc: vstack(&vts),
        s_trunc: users.iter().flat_map(|u| u.s_trunc().iter().copied()).collect(),
        u_trunc: block_diagonal(&uts),
        dims,
        users,
    })
}

impl ChannelSet {
    /// Decomposes and stacks raw per-user channel matrices.
    pub fn from_channels(channels: &[CMatrix], layers: &[usize]) -> Result<Self> {
        if channels.len() != layers.len() {
            return Err(Error::Dimension(format!(
                "{} channels but {} layer counts",
                channels.len(),
                layers.len()
            )));
        }
        let users = channels
            .iter()
            .zip(layers)
            .enumerate()
            .map(|(k, (h, &l))| decompose_user(h, l, k))
            .collect::<Result<Vec<_>>>()?;
        stack(users)
    }

    pub fn antennas(&self) -> usize {
        self.dims.antennas
    }

    /// `U^H diag(S) V`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut sv = self.v.clone();
        for (i, &s) in self.s.iter().enumerate() {
            sv.row_mut(i).scale_mut(s);
        }
        self.u.adjoint() * sv
    }

    /// Copy with every truncated singular value replaced by `value`. The
    /// singular vectors are kept, so `H` changes accordingly.
    pub fn with_truncated_singular_values(&self, value: f64) -> Result<Self> {
        let users = self
            .users
            .iter()
            .map(|u| {
                let mut u = u.clone();
                for s in u.s.iter_mut().take(u.layers) {
                    *s = value;
                }
                u.h = u.reconstruct();
                u
            })
            .collect();
        stack(users)
    }
}

/// The channel-gain factor inside the SUSINR expression:
/// `(∏_k (1/L_k)·(∏_{l∈L_k} s_l²)^{1/L_k})^{1/K}`, computed in the log domain.
pub(crate) fn susinr_gain(channel: &ChannelSet) -> Result<f64> {
    let dims = &channel.dims;
    let mut log_sum = 0.0;
    for k in 0..dims.users() {
        let lk = dims.layers[k] as f64;
        let mut log_prod = 0.0;
        for (i, &s) in channel.s_trunc[dims.layer_range(k)].iter().enumerate() {
            if !(s > 0.0) {
                return Err(Error::DegenerateChannel {
                    user: k,
                    reason: format!("truncated singular value {i} is zero"),
                });
            }
            log_prod += 2.0 * s.ln();
        }
        log_sum += log_prod / lk - lk.ln();
    }
    Ok((log_sum / dims.users() as f64).exp())
}

/// Noise power that puts the channel at the requested SUSINR (in dB).
pub fn noise_from_susinr(channel: &ChannelSet, power: f64, target_db: f64) -> Result<f64> {
    if !(power > 0.0) {
        return Err(Error::Config(format!("power must be positive, got {power}")));
    }
    let gain = susinr_gain(channel)?;
    Ok(power * gain / 10f64.powf(target_db / 10.0))
}
