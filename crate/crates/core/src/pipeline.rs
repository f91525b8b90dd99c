//! The full sequential estimator: stage 1, then every remaining stage in
//! lattice order, assembled into `(Ŵ, Q̂)`.
//!
//! A stage only reads estimates of strict subsets of its attribute set, all
//! of which live on lower cardinality levels. Stages within a level are
//! therefore independent and run concurrently under [`Execution::Parallel`];
//! levels act as barriers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lattice::AttributeLattice;
use crate::linalg::{frobenius_distance, mean_squared_deviation, Matrix, SimplexVector, StochasticMatrix};
use crate::model::{forward, ChoiceDataset, GroundTruth, StructuredWeightMatrix};
use crate::stage::{build_stage_problem, solve_stage, solve_stage1, StageSolution};

/// Tie-break label written alongside estimates.
pub const TIE_BREAK: &str = "minimum-norm optimum";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EstimatesFile", into = "EstimatesFile")]
pub struct EstimationResult {
    pub w_hat: StructuredWeightMatrix,
    pub q_hat: StochasticMatrix,
    /// Mean-target residual `||Φ̂_i x̂_i - p̄_i||²` per stage, stage 1 first.
    pub residuals: Vec<f64>,
    pub avg_deviation: f64,
    /// 1-based stages whose self-weight vanished.
    pub degenerate_stages: Vec<usize>,
}

impl EstimationResult {
    /// `P̂ = ŴQ̂`.
    pub fn fitted(&self) -> StochasticMatrix {
        forward(&self.w_hat, &self.q_hat).expect("estimates have matching shapes")
    }
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
struct EstimatesFile {
    K: usize,
    L: usize,
    W_hat: Matrix,
    Q_hat: StochasticMatrix,
    residuals: Vec<f64>,
    degenerate_stages: Vec<usize>,
    avg_deviation: f64,
    tie_break: String,
}

impl TryFrom<EstimatesFile> for EstimationResult {
    type Error = Error;

    fn try_from(f: EstimatesFile) -> Result<Self> {
        let w_hat = StructuredWeightMatrix::new(AttributeLattice::new(f.L)?, f.W_hat)?;
        if f.Q_hat.shape() != (w_hat.rows(), f.K) {
            return Err(Error::shape(
                format!("{}x{}", w_hat.rows(), f.K),
                format!("{}x{}", f.Q_hat.rows(), f.Q_hat.cols()),
            ));
        }
        Ok(EstimationResult {
            w_hat,
            q_hat: f.Q_hat,
            residuals: f.residuals,
            avg_deviation: f.avg_deviation,
            degenerate_stages: f.degenerate_stages,
        })
    }
}

impl From<EstimationResult> for EstimatesFile {
    fn from(r: EstimationResult) -> Self {
        EstimatesFile {
            K: r.q_hat.cols(),
            L: r.w_hat.lattice().attributes(),
            W_hat: r.w_hat.as_matrix().clone(),
            Q_hat: r.q_hat,
            residuals: r.residuals,
            degenerate_stages: r.degenerate_stages,
            avg_deviation: r.avg_deviation,
            tie_break: TIE_BREAK.to_string(),
        }
    }
}

pub fn estimate(data: &ChoiceDataset, lattice: &AttributeLattice) -> Result<EstimationResult> {
    estimate_with(data, lattice, Execution::default())
}

/// Runs all stages level by level; stages inside a level go through `exec`.
pub fn estimate_with(data: &ChoiceDataset, lattice: &AttributeLattice, exec: Execution) -> Result<EstimationResult> {
    let mut state = Stages::start(data, lattice)?;
    for level in lattice.levels().iter().skip(1) {
        let solved = exec.try_map(level, |&stage| state.solve(stage))?;
        for sol in solved {
            state.record(sol);
        }
    }
    state.finish()
}

/// Runs stages one at a time in `order`, which must list every stage once
/// with each stage after all of its subsets. Used to check that results do
/// not depend on the schedule.
pub fn estimate_in_order(
    data: &ChoiceDataset,
    lattice: &AttributeLattice,
    order: &[usize],
) -> Result<EstimationResult> {
    let m = lattice.len();
    let mut seen = vec![false; m];
    for &stage in order {
        if stage == 0 || stage > m || seen[stage - 1] {
            return Err(Error::Parameter(format!("stage order is not a permutation of 1..={m}")));
        }
        for j in lattice.sub_support(stage)? {
            if !seen[j - 1] {
                return Err(Error::Dependency { stage, missing: j });
            }
        }
        seen[stage - 1] = true;
    }
    if order.len() != m {
        return Err(Error::Parameter(format!("stage order is not a permutation of 1..={m}")));
    }

    let mut state = Stages::start(data, lattice)?;
    for &stage in order.iter().filter(|&&s| s != 1) {
        let sol = state.solve(stage)?;
        state.record(sol);
    }
    state.finish()
}

struct Stages<'a> {
    data: &'a ChoiceDataset,
    lattice: &'a AttributeLattice,
    q: Vec<Option<SimplexVector>>,
    weights: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    degenerate: Vec<bool>,
}

impl<'a> Stages<'a> {
    fn start(data: &'a ChoiceDataset, lattice: &'a AttributeLattice) -> Result<Self> {
        if data.lattice().attributes() != lattice.attributes() {
            return Err(Error::shape(format!("{} messages", lattice.len()), data.messages()));
        }
        let m = lattice.len();
        let q1 = solve_stage1(data)?;
        let mut residuals = vec![0.0; m];
        residuals[0] = crate::linalg::squared_distance(&q1, &data.mean_row(1));
        let mut q = vec![None; m];
        q[0] = Some(q1);
        Ok(Stages {
            data,
            lattice,
            q,
            weights: vec![Vec::new(); m],
            residuals,
            degenerate: vec![false; m],
        })
    }

    fn solve(&self, stage: usize) -> Result<StageSolution> {
        build_stage_problem(stage, &self.q, self.data, self.lattice)
            .and_then(|p| solve_stage(&p))
            .map_err(|e| Error::Stage {
                stage,
                source: Box::new(e),
            })
    }

    fn record(&mut self, sol: StageSolution) {
        let i = sol.stage - 1;
        self.q[i] = Some(sol.q);
        self.weights[i] = sol.weights;
        self.residuals[i] = sol.residual;
        self.degenerate[i] = sol.degenerate;
    }

    fn finish(self) -> Result<EstimationResult> {
        let k = self.data.choices();
        let m = self.lattice.len();
        let mut q_hat = Matrix::zeros(m, k);
        for (i, q) in self.q.iter().enumerate() {
            let q = q.as_ref().ok_or(Error::Dependency {
                stage: m,
                missing: i + 1,
            })?;
            q_hat.row_mut(i).copy_from_slice(q);
        }
        let q_hat = StochasticMatrix::new(q_hat)?;
        let w_hat = StructuredWeightMatrix::from_support_weights(self.lattice.clone(), &self.weights)?;
        let fitted = forward(&w_hat, &q_hat)?;
        let avg_deviation = mean_squared_deviation(&fitted, self.data.bins())?;
        Ok(EstimationResult {
            w_hat,
            q_hat,
            residuals: self.residuals,
            avg_deviation,
            degenerate_stages: (1..=m).filter(|&s| self.degenerate[s - 1]).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub avg_deviation: f64,
    pub p_err: f64,
    pub q_err: f64,
    pub w_err: f64,
    pub samples_per_bin: Option<usize>,
    pub seed: Option<u64>,
}

/// Average deviation plus the Frobenius errors of `P̂ = ŴQ̂`, `Q̂` and `Ŵ`
/// against the ground truth.
pub fn compute_metrics(truth: &GroundTruth, result: &EstimationResult, data: &ChoiceDataset) -> Result<MetricRecord> {
    let avg_deviation = crate::linalg::average_deviation(&result.w_hat, &result.q_hat, data)?;
    let fitted = forward(&result.w_hat, &result.q_hat)?;
    Ok(MetricRecord {
        avg_deviation,
        p_err: frobenius_distance(&truth.p, &fitted)?,
        q_err: frobenius_distance(&truth.q, &result.q_hat)?,
        w_err: frobenius_distance(&truth.w, &result.w_hat)?,
        samples_per_bin: data.samples_per_bin(),
        seed: data.seed(),
    })
}
