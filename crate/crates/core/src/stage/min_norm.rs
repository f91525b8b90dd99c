//! Minimum-norm preimage of a simplex point under `[Q_J | I_K]`.
//!
//! With `x = (w, t)` and `Φ x = Q_J w + t = y`, the tail is `t = y - Q_J w`,
//! so the problem reduces to the strictly convex QP
//!
//! ```text
//! minimize    ||w||² + ||y - Q_J w||²
//! subject to  w >= 0,  Q_J w <= y
//! ```
//!
//! solved with the Goldfarb-Idnani dual active-set method. It starts from the
//! unconstrained minimizer and adds violated constraints one at a time; each
//! full step strictly raises the dual objective, so degenerate vertices (zero
//! targets, repeated columns) cannot make it cycle.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Constraint violations below this (relative to O(1) data) are accepted.
const FEASIBILITY_TOL: f64 = 1e-13;
/// A step direction this short relative to the constraint normal means the
/// new constraint is dependent on the active ones.
const DEPENDENCE_TOL: f64 = 1e-12;
/// Violations this small on a dependent constraint come from rounding in the
/// active-set solves, not from the data.
const ROUNDING_TOL: f64 = 1e-9;

/// Returns `w` minimizing `||w||² + ||y - Q w||²` over `{w >= 0, Q w <= y}`.
/// `q` is `K x n` with simplex columns and `y` is non-negative.
pub(crate) fn min_norm_weights(q: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    // A zero target row forces every weight it touches to zero, and the row
    // then drops out of the objective. Removing both up front avoids the
    // heavily degenerate vertex they would otherwise create.
    let rows: Vec<usize> = (0..q.rows()).filter(|&r| y[r] > 0.0).collect();
    let cols: Vec<usize> = (0..q.cols())
        .filter(|&j| (0..q.rows()).all(|r| y[r] > 0.0 || q.get(r, j) == 0.0))
        .collect();
    let mut w = vec![0.0; q.cols()];
    if cols.is_empty() {
        return Ok(w);
    }
    let qm = DMatrix::from_fn(rows.len(), cols.len(), |r, c| q.get(rows[r], cols[c]));
    let y: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    for (c, v) in cols.iter().zip(reduced_min_norm(&qm, &y)?) {
        w[*c] = v;
    }
    Ok(w)
}

/// The same problem after zero target rows have been removed.
fn reduced_min_norm(qm: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (k, n) = qm.shape();
    let yv = DVector::from_column_slice(y);
    // Objective ½ wᵀ H w + gᵀ w; keep H⁻¹ since every step needs it.
    let h = (DMatrix::identity(n, n) + qm.transpose() * qm) * 2.0;
    let h_inv = h
        .cholesky()
        .ok_or(Error::Solver("objective is not positive definite"))?
        .inverse();

    // Constraints a_cᵀ w >= b_c: first w_j >= 0, then -q_r w >= -y_r.
    let normals: Vec<DVector<f64>> = (0..n)
        .map(|j| {
            let mut a = DVector::zeros(n);
            a[j] = 1.0;
            a
        })
        .chain((0..k).map(|r| -qm.row(r).transpose()))
        .collect();
    let bounds: Vec<f64> = std::iter::repeat_n(0.0, n).chain(y.iter().map(|v| -v)).collect();
    let slack = |c: usize, w: &DVector<f64>| normals[c].dot(w) - bounds[c];

    let mut w = &h_inv * (qm.transpose() * &yv) * 2.0;
    // Constraints found dependent on the active set with only a rounding-level
    // violation are treated as satisfied.
    let mut settled: Vec<usize> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut multipliers: Vec<f64> = Vec::new();
    let max_iter = 50 * (n + k) + 100;

    for _ in 0..max_iter {
        let violated = (0..n + k)
            .filter(|c| !active.contains(c) && !settled.contains(c))
            .map(|c| (c, slack(c, &w)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let (p, s_p) = match violated {
            Some((p, s)) if s < -FEASIBILITY_TOL => (p, s),
            _ => return Ok(w.iter().map(|&x| x.max(0.0)).collect()),
        };
        let mut u_p = 0.0;
        let mut s_p = s_p;

        // Add `p`, dropping active constraints whose multipliers would turn
        // negative on the way (partial steps).
        loop {
            let (z, r) = step_directions(&h_inv, &normals, &active, &normals[p])?;
            let blocking = r
                .iter()
                .enumerate()
                .filter(|(_, &r_i)| r_i > 0.0)
                .map(|(i, &r_i)| (i, multipliers[i] / r_i))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let curvature = z.dot(&normals[p]);
            let full = if curvature > DEPENDENCE_TOL * normals[p].norm_squared() {
                Some(-s_p / curvature)
            } else {
                None
            };
            let (t, drop) = match (full, blocking) {
                (Some(t2), Some((i, t1))) if t1 < t2 => (t1, Some(i)),
                (Some(t2), _) => (t2, None),
                (None, Some((i, t1))) => (t1, Some(i)),
                (None, None) if s_p >= -ROUNDING_TOL => {
                    settled.push(p);
                    break;
                }
                // Dependent on the active set with nothing to release: the
                // constraints are inconsistent.
                (None, None) => return Err(Error::Solver("inconsistent constraints")),
            };
            if full.is_some() {
                w += &z * t;
            }
            for (u, r_i) in multipliers.iter_mut().zip(r.iter()) {
                *u -= t * r_i;
            }
            u_p += t;
            match drop {
                None => {
                    active.push(p);
                    multipliers.push(u_p);
                    break;
                }
                Some(i) => {
                    active.remove(i);
                    multipliers.remove(i);
                    s_p = slack(p, &w);
                    if s_p >= -FEASIBILITY_TOL {
                        break;
                    }
                }
            }
        }
    }

    let tail: Vec<f64> = (0..k).map(|r| y[r] - qm.row(r).dot(&w.transpose())).collect();
    let residual = tail.iter().filter(|t| **t < 0.0).map(|t| t * t).sum();
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
        last: w.iter().copied().chain(tail).collect(),
    })
}

/// Primal direction `z` and dual direction `r` for adding normal `a` to the
/// active set `N`: `r = (NᵀH⁻¹N)⁻¹ NᵀH⁻¹a` and `z = H⁻¹(a - N r)`.
fn step_directions(
    h_inv: &DMatrix<f64>,
    normals: &[DVector<f64>],
    active: &[usize],
    a: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let ha = h_inv * a;
    if active.is_empty() {
        return Ok((ha, DVector::zeros(0)));
    }
    let n_mat = DMatrix::from_columns(&active.iter().map(|&c| normals[c].clone()).collect::<Vec<_>>());
    let hn = h_inv * &n_mat;
    let m = n_mat.transpose() * &hn;
    let r = m
        .cholesky()
        .ok_or(Error::Solver("active constraints are dependent"))?
        .solve(&(n_mat.transpose() * &ha));
    let z = ha - hn * &r;
    Ok((z, r))
}
