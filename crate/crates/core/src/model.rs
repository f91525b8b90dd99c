//! The choice model `P = WQ`: structured weight matrices, ground-truth
//! generation, and binned sampling of empirical choice frequencies.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lattice::AttributeLattice;
use crate::linalg::{check_stochastic, Matrix, StochasticMatrix, STOCHASTIC_TOL};
use crate::seed::{substream, TAG_Q, TAG_SAMPLE, TAG_W};

/// Largest attribute count accepted when generating ground truth.
pub const MAX_GENERATED_ATTRIBUTES: usize = 10;

/// Row-stochastic `M x M` weight matrix with `w[i][j] = 0` unless
/// `A_j ⊆ A_i`. Row `i` is supported on the strict subsets of `A_i` plus the
/// diagonal, and row 1 is `[1, 0, ..., 0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredWeightMatrix {
    lattice: AttributeLattice,
    matrix: Matrix,
}

impl StructuredWeightMatrix {
    pub fn new(lattice: AttributeLattice, matrix: Matrix) -> Result<Self> {
        let m = lattice.len();
        if matrix.shape() != (m, m) {
            return Err(Error::shape(
                format!("{m}x{m}"),
                format!("{}x{}", matrix.rows(), matrix.cols()),
            ));
        }
        check_stochastic(&matrix)?;
        let subsets = lattice.subsets();
        for i in 0..m {
            for j in 0..m {
                if i != j && !subsets[j].is_subset(subsets[i]) && matrix.get(i, j) != 0.0 {
                    return Err(Error::NotStochastic(format!(
                        "w[{}][{}] must be zero ({} is not a subset of {})",
                        i + 1,
                        j + 1,
                        subsets[j],
                        subsets[i]
                    )));
                }
            }
        }
        if (matrix.get(0, 0) - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::NotStochastic("null-message row must be [1, 0, ..., 0]".into()));
        }
        Ok(StructuredWeightMatrix { lattice, matrix })
    }

    /// Builds the matrix from per-stage off-diagonal weights: `rows[i - 1]`
    /// holds `w[i][j]` for `j` in `sub_support(i)`. Diagonals are set to
    /// `1 - sum(row)`.
    pub fn from_support_weights(lattice: AttributeLattice, rows: &[Vec<f64>]) -> Result<Self> {
        let m = lattice.len();
        if rows.len() != m {
            return Err(Error::shape(format!("{m} rows"), rows.len()));
        }
        let mut matrix = Matrix::zeros(m, m);
        for (i, weights) in rows.iter().enumerate() {
            let support = lattice.sub_support(i + 1)?;
            if support.len() != weights.len() {
                return Err(Error::shape(
                    format!("{} weights for stage {}", support.len(), i + 1),
                    weights.len(),
                ));
            }
            for (&j, &w) in support.iter().zip(weights) {
                matrix.set(i, j - 1, w);
            }
            matrix.set(i, i, 1.0 - weights.iter().sum::<f64>());
        }
        Self::new(lattice, matrix)
    }

    pub fn identity(lattice: AttributeLattice) -> Self {
        let m = lattice.len();
        StructuredWeightMatrix {
            lattice,
            matrix: Matrix::identity(m),
        }
    }

    pub fn lattice(&self) -> &AttributeLattice {
        &self.lattice
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Off-diagonal weights of stage `i` (1-based) on its sub-support.
    pub fn support_weights(&self, stage: usize) -> Result<Vec<f64>> {
        Ok(self
            .lattice
            .sub_support(stage)?
            .into_iter()
            .map(|j| self.matrix.get(stage - 1, j - 1))
            .collect())
    }
}

impl std::ops::Deref for StructuredWeightMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.matrix
    }
}

/// `P = WQ`.
pub fn forward(w: &StructuredWeightMatrix, q: &StochasticMatrix) -> Result<StochasticMatrix> {
    let m = w.lattice().len();
    if q.rows() != m {
        return Err(Error::shape(format!("{m} rows in Q"), q.rows()));
    }
    Ok(StochasticMatrix::new_unchecked(w.as_matrix().matmul(q)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TruthFile", into = "TruthFile")]
pub struct GroundTruth {
    pub w: StructuredWeightMatrix,
    pub q: StochasticMatrix,
    pub p: StochasticMatrix,
    pub seed: u64,
}

impl GroundTruth {
    pub fn from_factors(w: StructuredWeightMatrix, q: StochasticMatrix, seed: u64) -> Result<Self> {
        let p = forward(&w, &q)?;
        Ok(GroundTruth { w, q, p, seed })
    }

    pub fn choices(&self) -> usize {
        self.q.cols()
    }

    pub fn attributes(&self) -> usize {
        self.w.lattice().attributes()
    }

    pub fn lattice(&self) -> &AttributeLattice {
        self.w.lattice()
    }
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
struct TruthFile {
    K: usize,
    L: usize,
    seed: u64,
    W: Matrix,
    Q: StochasticMatrix,
    P: StochasticMatrix,
}

impl TryFrom<TruthFile> for GroundTruth {
    type Error = Error;

    fn try_from(f: TruthFile) -> Result<Self> {
        let lattice = AttributeLattice::new(f.L)?;
        let w = StructuredWeightMatrix::new(lattice, f.W)?;
        if f.Q.cols() != f.K || f.P.cols() != f.K {
            return Err(Error::shape(format!("{} columns", f.K), f.Q.cols()));
        }
        let p = forward(&w, &f.Q)?;
        if p.data().iter().zip(f.P.data()).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::NotStochastic("P does not equal WQ".into()));
        }
        Ok(GroundTruth {
            w,
            q: f.Q,
            p: f.P,
            seed: f.seed,
        })
    }
}

impl From<GroundTruth> for TruthFile {
    fn from(t: GroundTruth) -> Self {
        TruthFile {
            K: t.choices(),
            L: t.attributes(),
            seed: t.seed,
            W: t.w.matrix,
            Q: t.q,
            P: t.p,
        }
    }
}

/// Flat-Dirichlet draw of dimension `dim` from normalized standard exponentials.
fn uniform_simplex<R: rand::Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Draws Q with uniform-simplex rows and W with uniform-simplex rows on each
/// stage's support, then sets `P = WQ`. Deterministic in `seed`.
pub fn sample_ground_truth(choices: usize, attributes: usize, seed: u64) -> Result<GroundTruth> {
    if choices < 2 {
        return Err(Error::Parameter(format!("need at least 2 choices, got {choices}")));
    }
    if attributes > MAX_GENERATED_ATTRIBUTES {
        return Err(Error::Parameter(format!(
            "at most {MAX_GENERATED_ATTRIBUTES} attributes, got {attributes}"
        )));
    }
    let lattice = AttributeLattice::new(attributes)?;
    let m = lattice.len();

    let mut q = Matrix::zeros(m, choices);
    for i in 0..m {
        let mut rng = substream(seed, TAG_Q, i as u64, 0);
        q.row_mut(i).copy_from_slice(&uniform_simplex(&mut rng, choices));
    }

    let mut weights = Vec::with_capacity(m);
    for i in 1..=m {
        let support = lattice.sub_support(i)?.len();
        let mut rng = substream(seed, TAG_W, i as u64, 0);
        let mut row = uniform_simplex(&mut rng, support + 1);
        // last coordinate is the diagonal; from_support_weights recomputes it
        row.pop();
        weights.push(row);
    }
    let w = StructuredWeightMatrix::from_support_weights(lattice, &weights)?;
    GroundTruth::from_factors(w, StochasticMatrix::new(q)?, seed)
}

/// N empirical choice-frequency matrices, one per bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetFile", into = "DatasetFile")]
pub struct ChoiceDataset {
    lattice: AttributeLattice,
    choices: usize,
    bins: Vec<StochasticMatrix>,
    total_samples: Option<usize>,
    seed: Option<u64>,
}

impl ChoiceDataset {
    /// Wraps externally supplied bins (not necessarily sampled frequencies).
    pub fn from_bins(lattice: AttributeLattice, bins: Vec<StochasticMatrix>) -> Result<Self> {
        let first = bins.first().ok_or(Error::EmptyData)?;
        let choices = first.cols();
        for b in &bins {
            if b.shape() != (lattice.len(), choices) {
                return Err(Error::shape(
                    format!("{}x{choices}", lattice.len()),
                    format!("{}x{}", b.rows(), b.cols()),
                ));
            }
        }
        Ok(ChoiceDataset {
            lattice,
            choices,
            bins,
            total_samples: None,
            seed: None,
        })
    }

    pub fn lattice(&self) -> &AttributeLattice {
        &self.lattice
    }

    pub fn bins(&self) -> &[StochasticMatrix] {
        &self.bins
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn choices(&self) -> usize {
        self.choices
    }

    pub fn messages(&self) -> usize {
        self.lattice.len()
    }

    /// Samples per message across all bins, when the data was sampled.
    pub fn total_samples(&self) -> Option<usize> {
        self.total_samples
    }

    pub fn samples_per_bin(&self) -> Option<usize> {
        self.total_samples.map(|c| c / self.bins.len())
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Bin mean of row `i` (1-based).
    pub fn mean_row(&self, stage: usize) -> Vec<f64> {
        let n = self.bins.len() as f64;
        let mut mean = vec![0.0; self.choices];
        for b in &self.bins {
            for (m, x) in mean.iter_mut().zip(b.row(stage - 1)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
struct DatasetFile {
    K: usize,
    L: usize,
    N: usize,
    C: Option<usize>,
    seed: Option<u64>,
    bins: Vec<StochasticMatrix>,
}

impl TryFrom<DatasetFile> for ChoiceDataset {
    type Error = Error;

    fn try_from(f: DatasetFile) -> Result<Self> {
        if f.bins.len() != f.N {
            return Err(Error::shape(format!("{} bins", f.N), f.bins.len()));
        }
        let mut data = ChoiceDataset::from_bins(AttributeLattice::new(f.L)?, f.bins)?;
        if data.choices != f.K {
            return Err(Error::shape(format!("{} columns", f.K), data.choices));
        }
        if let Some(c) = f.C {
            check_partition(c, f.N)?;
            let per_bin = (c / f.N) as f64;
            for b in &data.bins {
                if b.data()
                    .iter()
                    .any(|x| ((x * per_bin) - (x * per_bin).round()).abs() > 1e-6)
                {
                    return Err(Error::NotStochastic(format!(
                        "bin entries are not multiples of 1/{per_bin}"
                    )));
                }
            }
        }
        data.total_samples = f.C;
        data.seed = f.seed;
        Ok(data)
    }
}

impl From<ChoiceDataset> for DatasetFile {
    fn from(d: ChoiceDataset) -> Self {
        DatasetFile {
            K: d.choices,
            L: d.lattice.attributes(),
            N: d.bins.len(),
            C: d.total_samples,
            seed: d.seed,
            bins: d.bins,
        }
    }
}

fn check_partition(total: usize, bins: usize) -> Result<usize> {
    if bins == 0 {
        return Err(Error::Parameter("bin count must be at least 1".into()));
    }
    if !total.is_multiple_of(bins) {
        return Err(Error::Partition { total, bins });
    }
    if total / bins == 0 {
        return Err(Error::EmptyBin);
    }
    Ok(total / bins)
}

pub fn sample_dataset(truth: &GroundTruth, total: usize, bins: usize, seed: u64) -> Result<ChoiceDataset> {
    sample_dataset_with(truth, total, bins, seed, Execution::default())
}

/// Draws `total / bins` categorical samples from each row of `truth.p` for
/// every bin and stores the empirical frequencies. Each (message, bin) cell
/// has its own substream, so the result does not depend on `exec`.
pub fn sample_dataset_with(
    truth: &GroundTruth,
    total: usize,
    bins: usize,
    seed: u64,
    exec: Execution,
) -> Result<ChoiceDataset> {
    let per_bin = check_partition(total, bins)?;
    let m = truth.p.rows();
    let k = truth.p.cols();
    let rows: Vec<WeightedIndex<f64>> = (0..m)
        .map(|i| {
            WeightedIndex::new(truth.p.row(i).iter().map(|&x| x.max(0.0)))
                .map_err(|e| Error::NotStochastic(format!("row {}: {e}", i + 1)))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..bins).flat_map(|n| (0..m).map(move |i| (n, i))).collect();
    let freqs = exec.map(&cells, |&(n, i)| {
        let mut rng = substream(seed, TAG_SAMPLE, i as u64, n as u64);
        let mut counts = vec![0usize; k];
        for _ in 0..per_bin {
            counts[rows[i].sample(&mut rng)] += 1;
        }
        counts
            .into_iter()
            .map(|c| c as f64 / per_bin as f64)
            .collect::<Vec<f64>>()
    });

    let mut out = Vec::with_capacity(bins);
    for chunk in freqs.chunks(m) {
        let mut mat = Matrix::zeros(m, k);
        for (i, row) in chunk.iter().enumerate() {
            mat.row_mut(i).copy_from_slice(row);
        }
        out.push(StochasticMatrix::new(mat)?);
    }
    Ok(ChoiceDataset {
        lattice: truth.lattice().clone(),
        choices: k,
        bins: out,
        total_samples: Some(total),
        seed: Some(seed),
    })
}
