//! Row-wise projection onto the per-antenna power ball and its
//! vector-Jacobian product.

use num_complex::Complex64;

use crate::linalg::CMatrix;

fn row_power<'a>(row: impl Iterator<Item = &'a Complex64>) -> f64 {
    row.map(|z| z.norm_sqr()).sum()
}

/// Rows with `‖w^m‖² ≤ P/T` are kept, the others are rescaled to norm
/// `sqrt(P/T)`. A rescaled row whose computed power still rounds above the
/// budget is shrunk by single ulps until it does not, so the result is
/// feasible and a fixed point.
pub fn project(w: &CMatrix, power: f64) -> CMatrix {
    let budget = power / w.nrows() as f64;
    let radius = budget.sqrt();
    let mut out = w.clone();
    for mut row in out.row_iter_mut() {
        let sq = row_power(row.iter());
        if sq > budget {
            let scale = radius / sq.sqrt();
            row.iter_mut().for_each(|z| *z *= scale);
            while row_power(row.iter()) > budget {
                row.iter_mut().for_each(|z| *z *= 1.0 - f64::EPSILON);
            }
        }
    }
    out
}

/// Pulls an ascent gradient taken at `project(w)` back to `w`.
///
/// Interior and boundary rows pass through unchanged. For an exterior row
/// the real-embedded Jacobian of `w ↦ r·w/‖w‖` is
/// `(r/‖w‖)(I − û ûᵀ)`, which is symmetric, so the pulled-back row is
/// `(r/‖w‖)(g − û·Re⟨û, g⟩)`.
pub fn pull_back(w: &CMatrix, grad_at_projection: &CMatrix, power: f64) -> CMatrix {
    let budget = power / w.nrows() as f64;
    let radius = budget.sqrt();
    let mut out = grad_at_projection.clone();
    for m in 0..w.nrows() {
        let row = w.row(m);
        let sq = row_power(row.iter());
        if sq <= budget {
            continue;
        }
        let norm = sq.sqrt();
        let g = grad_at_projection.row(m);
        let radial: f64 = row
            .iter()
            .zip(g.iter())
            .map(|(wi, gi)| (wi.conj() * gi).re)
            .sum::<f64>()
            / norm;
        let scale = radius / norm;
        for j in 0..w.ncols() {
            let u = row[j] / norm;
            out[(m, j)] = (g[j] - u * Complex64::new(radial, 0.0)) * scale;
        }
    }
    out
}
