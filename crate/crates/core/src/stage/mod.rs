//! Per-stage subproblems of the sequential estimator.
//!
//! Stage 1 (the null message) has the closed form `q̂_1 = mean_n p_1(n)`.
//! Stage `i > 1` fits `p̄_i ≈ Φ̂_i x` with `Φ̂_i = [q̂_j for j in J_i | I_K]`
//! over the probability simplex, where `x = (w_{i,J_i}, s · q_i)` and
//! `s = 1 - Σ_j w_{i,j}`. The weights and `q̂_i` are then read back from `x̂`.
//!
//! Because every column of `Φ̂_i` lies on the simplex and the identity block
//! contributes all its vertices, `Φ̂_i` maps the simplex onto the simplex. The
//! best attainable fit is therefore the projection of `p̄_i` onto the simplex
//! (zero residual whenever `p̄_i` is a distribution), and the remaining
//! freedom is resolved by returning the minimum-norm `x̂` among all optima.

mod min_norm;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::AttributeLattice;
use crate::linalg::{project_to_simplex, squared_residual, Matrix, SimplexVector};
use crate::model::ChoiceDataset;

/// `1 - Σŵ` at or below this marks a stage whose `q̂_i` is unidentified.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Numeric drift allowed before a stage-1 mean is re-projected.
const MEAN_DRIFT_TOL: f64 = 1e-12;

/// Closed-form stage-1 estimate: the bin mean of first rows.
pub fn solve_stage1(data: &ChoiceDataset) -> Result<SimplexVector> {
    if data.num_bins() == 0 {
        return Err(Error::EmptyData);
    }
    let mean = data.mean_row(1);
    let drift = (mean.iter().sum::<f64>() - 1.0).abs();
    if drift > MEAN_DRIFT_TOL || mean.iter().any(|&x| x < 0.0) {
        return project_to_simplex(&mean);
    }
    Ok(SimplexVector::new_unchecked(mean))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageProblem {
    stage: usize,
    support: Vec<usize>,
    coefficients: Matrix,
    target: SimplexVector,
}

impl StageProblem {
    /// Assembles a problem from prior estimates (columns for `support`, in
    /// order) and a mean target.
    pub fn new(stage: usize, support: Vec<usize>, columns: &[&[f64]], target: SimplexVector) -> Result<Self> {
        let k = target.dim();
        if columns.len() != support.len() {
            return Err(Error::shape(format!("{} columns", support.len()), columns.len()));
        }
        let width = support.len() + k;
        let mut coefficients = Matrix::zeros(k, width);
        for (c, col) in columns.iter().enumerate() {
            SimplexVector::new(col.to_vec())?;
            if col.len() != k {
                return Err(Error::shape(format!("{k} rows"), col.len()));
            }
            for (r, &v) in col.iter().enumerate() {
                coefficients.set(r, c, v);
            }
        }
        for r in 0..k {
            coefficients.set(r, support.len() + r, 1.0);
        }
        Ok(StageProblem {
            stage,
            support,
            coefficients,
            target,
        })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Stages `J_i` whose estimates form the leading columns.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `Φ̂_i`, a `K x (|J_i| + K)` matrix.
    pub fn coefficients(&self) -> &Matrix {
        &self.coefficients
    }

    /// `p̄_i`.
    pub fn target(&self) -> &SimplexVector {
        &self.target
    }

    pub fn choices(&self) -> usize {
        self.target.dim()
    }

    /// `||Φ̂ x - p̄||²`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        squared_residual(&self.coefficients, x, &self.target)
    }

    /// The `K x |J_i|` block of prior estimates.
    fn prior_block(&self) -> Matrix {
        let k = self.choices();
        let j = self.support.len();
        let mut m = Matrix::zeros(k, j);
        for r in 0..k {
            m.row_mut(r).copy_from_slice(&self.coefficients.row(r)[..j]);
        }
        m
    }
}

/// Builds the stage-`i` problem. `estimates[j - 1]` holds `q̂_j` once stage
/// `j` is solved; every stage in `J_i` must be present.
pub fn build_stage_problem(
    stage: usize,
    estimates: &[Option<SimplexVector>],
    data: &ChoiceDataset,
    lattice: &AttributeLattice,
) -> Result<StageProblem> {
    if stage < 2 {
        return Err(Error::Index {
            index: stage,
            max: lattice.len(),
        });
    }
    let support = lattice.sub_support(stage)?;
    let columns = support
        .iter()
        .map(|&j| {
            estimates
                .get(j - 1)
                .and_then(Option::as_ref)
                .map(|q| q.as_slice())
                .ok_or(Error::Dependency { stage, missing: j })
        })
        .collect::<Result<Vec<_>>>()?;
    let target = SimplexVector::new(data.mean_row(stage))?;
    StageProblem::new(stage, support, &columns, target)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexLsSolution {
    pub x: SimplexVector,
    pub residual: f64,
}

/// Unconstrained minimum-norm least-squares point `Φ̂⁺ p̄`. `Φ̂` has full row
/// rank (identity block), so `Φ̂⁺ = Φ̂ᵀ (Φ̂ Φ̂ᵀ)⁻¹`.
pub fn pseudo_inverse_point(problem: &StageProblem) -> Vec<f64> {
    let phi = &problem.coefficients;
    let a = DMatrix::from_row_slice(phi.rows(), phi.cols(), phi.data());
    let gram = &a * a.transpose();
    let b = DVector::from_column_slice(problem.target());
    let z = gram.cholesky().expect("Φ̂Φ̂ᵀ = I + QQᵀ is positive definite").solve(&b);
    (a.transpose() * z).iter().copied().collect()
}

/// Minimizes `||Φ̂ x - p̄||²` over the simplex and returns the minimum-norm
/// minimizer.
///
/// When `Φ̂⁺ p̄` is non-negative it is already that point. Otherwise the
/// optimal fit `y = proj(p̄)` is fixed and the weights are found by an
/// active-set QP over `{w >= 0, Q_J w <= y}`.
pub fn solve_simplex_ls(problem: &StageProblem) -> Result<SimplexLsSolution> {
    let pinv = pseudo_inverse_point(problem);
    if pinv.iter().all(|&v| v >= 0.0) {
        let residual = problem.objective(&pinv);
        return Ok(SimplexLsSolution {
            x: SimplexVector::new_unchecked(pinv),
            residual,
        });
    }

    let fit = project_to_simplex(problem.target())?;
    let prior = problem.prior_block();
    let weights = min_norm::min_norm_weights(&prior, &fit)?;
    let mut x = weights.clone();
    for r in 0..problem.choices() {
        let explained: f64 = prior.row(r).iter().zip(&weights).map(|(q, w)| q * w).sum();
        x.push((fit[r] - explained).max(0.0));
    }
    let residual = problem.objective(&x);
    Ok(SimplexLsSolution {
        x: SimplexVector::new_unchecked(x),
        residual,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extracted {
    pub weights: Vec<f64>,
    pub q: SimplexVector,
    pub degenerate: bool,
}

/// Splits `x̂` into weights on `J_i` and `q̂_i = tail / (1 - Σŵ)`.
///
/// If `1 - Σŵ <= tol` the stage is flagged degenerate: `q̂_i` is set to the
/// uniform distribution and the weights are rescaled to sum to one.
pub fn extract_estimates(x: &[f64], support_len: usize, choices: usize, tol: f64) -> Result<Extracted> {
    if x.len() != support_len + choices {
        return Err(Error::shape(support_len + choices, x.len()));
    }
    let (head, tail) = x.split_at(support_len);
    let mass: f64 = head.iter().sum();
    let self_weight = 1.0 - mass;
    if self_weight > tol {
        return Ok(Extracted {
            weights: head.to_vec(),
            q: SimplexVector::new_unchecked(tail.iter().map(|t| t / self_weight).collect()),
            degenerate: false,
        });
    }
    Ok(Extracted {
        weights: head.iter().map(|w| w / mass).collect(),
        q: SimplexVector::uniform(choices),
        degenerate: true,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageSolution {
    pub stage: usize,
    pub x: SimplexVector,
    pub residual: f64,
    pub weights: Vec<f64>,
    pub q: SimplexVector,
    pub degenerate: bool,
}

pub fn solve_stage(problem: &StageProblem) -> Result<StageSolution> {
    let SimplexLsSolution { x, residual } = solve_simplex_ls(problem)?;
    let Extracted { weights, q, degenerate } =
        extract_estimates(&x, problem.support.len(), problem.choices(), DEGENERACY_TOL)?;
    Ok(StageSolution {
        stage: problem.stage,
        x,
        residual,
        weights,
        q,
        degenerate,
    })
}
