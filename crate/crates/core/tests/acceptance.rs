//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqsmf::bench::median_curves;
use seqsmf::linalg::{entrywise_mean, squared_distance};
use seqsmf::{
    enumerate_subsets, estimate, estimate_in_order, estimate_with, run_benchmark, sample_dataset, sample_ground_truth,
    solve_simplex_ls, AttributeLattice, BenchConfig, ChoiceDataset, Execution, GroundTruth, Matrix, SimplexVector,
    StageProblem, StochasticMatrix, StructuredWeightMatrix,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Reference sweep: K=5, L=2, N=5, 100 runs over {20, 100, 500, 2500}.
fn sample_size_trends() -> Outcome {
    let start = Instant::now();
    let config = BenchConfig::reference(2024);
    let records = run_benchmark(&config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(records.len() == 400, || format!("{} records", records.len()))?;

    let curves = median_curves(&records, &config.sample_sweep);
    let f: Vec<f64> = curves.iter().map(|c| c[0]).collect();
    let p: Vec<f64> = curves.iter().map(|c| c[1]).collect();
    let last = curves.last().unwrap();
    ensure(f.windows(2).all(|w| w[1] < w[0]), || {
        format!("median f not decreasing: {f:?}")
    })?;
    ensure(p.windows(2).all(|w| w[1] < w[0]), || {
        format!("median p_err not decreasing: {p:?}")
    })?;
    ensure(f[0] / f[3] >= 10.0, || format!("f drop only {:.2}x", f[0] / f[3]))?;
    ensure(last[2] > 1e-3, || format!("median q_err {} at 2500", last[2]))?;
    ensure(last[3] > 1e-3, || format!("median w_err {} at 2500", last[3]))?;
    ensure(elapsed <= Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "median f {:.3e} -> {:.3e} ({:.0}x), p_err {:.3e} -> {:.3e}, q_err {:.3e}, w_err {:.3e} at 2500, {:.1?}",
        f[0],
        f[3],
        f[0] / f[3],
        p[0],
        p[3],
        last[2],
        last[3],
        elapsed
    ))
}

/// f(Ŵ, Q̂) equals the within-bin spread around the bin mean.
fn variance_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for instance in 0..50u64 {
        let k = rng.random_range(2..=5);
        let l = rng.random_range(0..=3);
        let n = rng.random_range(1..=8);
        let per_bin = rng.random_range(1..=200);
        let truth = sample_ground_truth(k, l, 500 + instance).map_err(|e| e.to_string())?;
        let data = sample_dataset(&truth, per_bin * n, n, instance).map_err(|e| e.to_string())?;
        let result = estimate(&data, truth.lattice()).map_err(|e| e.to_string())?;
        let mean = entrywise_mean(data.bins()).map_err(|e| e.to_string())?;
        let spread = data
            .bins()
            .iter()
            .map(|b| squared_distance(b.data(), mean.data()))
            .sum::<f64>()
            / n as f64;
        let gap = (result.avg_deviation - spread).abs();
        worst = worst.max(gap);
        ensure(gap <= 1e-6, || {
            format!(
                "instance {instance} (K={k}, L={l}, N={n}): f={} spread={spread}",
                result.avg_deviation
            )
        })?;
    }
    Ok(format!("50 instances, max |f - spread| = {worst:.2e}"))
}

/// Bins equal to the exact P give zero deviation and q̂_1 = p_1.
fn noise_free_exactness() -> Outcome {
    let mut worst_f = 0.0f64;
    for seed in 0..40u64 {
        let k = 2 + (seed as usize % 4);
        let l = seed as usize % 4;
        let truth = sample_ground_truth(k, l, seed).map_err(|e| e.to_string())?;
        let bins = vec![truth.p.clone(); 1 + seed as usize % 5];
        let data = ChoiceDataset::from_bins(truth.lattice().clone(), bins).map_err(|e| e.to_string())?;
        let r = estimate(&data, truth.lattice()).map_err(|e| e.to_string())?;
        worst_f = worst_f.max(r.avg_deviation);
        ensure(r.avg_deviation <= 1e-8, || {
            format!("seed {seed}: f = {}", r.avg_deviation)
        })?;
        for (a, b) in r.q_hat.row(0).iter().zip(truth.p.row(0)) {
            ensure((a - b).abs() <= 1e-12, || format!("seed {seed}: q̂_1 {a} vs p_1 {b}"))?;
        }
    }
    Ok(format!("40 truths, max f = {worst_f:.2e}"))
}

/// Grid oracle for Φ = [q | I_2]: smallest ||x||² among x on the simplex
/// with Φx = p, scanning the single weight coordinate.
fn grid_min_norm(q: [f64; 2], p: [f64; 2], steps: usize) -> [f64; 3] {
    let mut best = (f64::INFINITY, [0.0; 3]);
    for s in 0..=steps {
        let w = s as f64 / steps as f64;
        let t = [p[0] - w * q[0], p[1] - w * q[1]];
        if t[0] < 0.0 || t[1] < 0.0 {
            continue;
        }
        let norm = w * w + t[0] * t[0] + t[1] * t[1];
        if norm < best.0 {
            best = (norm, [w, t[0], t[1]]);
        }
    }
    best.1
}

fn hand_computed_case() -> Outcome {
    let lattice = AttributeLattice::new(1).map_err(|e| e.to_string())?;
    let w = StructuredWeightMatrix::new(lattice.clone(), Matrix::from_rows(&[[1.0, 0.0], [0.5, 0.5]]).unwrap())
        .map_err(|e| e.to_string())?;
    let q = StochasticMatrix::from_rows(&[[0.4, 0.6], [0.8, 0.2]]).unwrap();
    let truth = GroundTruth::from_factors(w, q, 0).map_err(|e| e.to_string())?;
    let data = ChoiceDataset::from_bins(lattice.clone(), vec![truth.p.clone(); 5]).map_err(|e| e.to_string())?;
    let r = estimate(&data, &lattice).map_err(|e| e.to_string())?;

    let oracle = grid_min_norm([0.4, 0.6], [0.6, 0.4], 1_000_000);
    let oracle_w = oracle[0];
    let oracle_q = [oracle[1] / (1.0 - oracle_w), oracle[2] / (1.0 - oracle_w)];
    let w21 = r.w_hat.get(1, 0);
    let q2 = [r.q_hat.get(1, 0), r.q_hat.get(1, 1)];
    ensure((w21 - 6.0 / 19.0).abs() <= 1e-6, || format!("ŵ_21 = {w21}"))?;
    ensure(
        (q2[0] - 9.0 / 13.0).abs() <= 1e-6 && (q2[1] - 4.0 / 13.0).abs() <= 1e-6,
        || format!("q̂_2 = {q2:?}"),
    )?;
    ensure((w21 - oracle_w).abs() <= 1e-5, || {
        format!("grid oracle ŵ_21 = {oracle_w}")
    })?;
    ensure((q2[0] - oracle_q[0]).abs() <= 1e-5, || {
        format!("grid oracle q̂_2 = {oracle_q:?}")
    })?;
    ensure(r.w_hat.get(1, 0) != 0.5, || {
        "recovered the truth, expected a different optimum".into()
    })?;
    Ok(format!("ŵ_21 = {w21:.9}, q̂_2 = [{:.9}, {:.9}]", q2[0], q2[1]))
}

/// Exhaustive minimum of ||Φx - p||² over the simplex grid of step 1/steps.
fn grid_objective(phi: &Matrix, p: &[f64], steps: usize) -> f64 {
    let dim = phi.cols();
    let mut counts = vec![0usize; dim];
    let mut best = f64::INFINITY;
    fn recurse(
        phi: &Matrix,
        p: &[f64],
        steps: usize,
        pos: usize,
        left: usize,
        counts: &mut Vec<usize>,
        best: &mut f64,
    ) {
        let dim = counts.len();
        if pos == dim - 1 {
            counts[pos] = left;
            let h = 1.0 / steps as f64;
            let mut obj = 0.0;
            for (row, &target) in phi.row_iter().zip(p) {
                let fit: f64 = row.iter().zip(counts.iter()).map(|(a, &c)| a * c as f64 * h).sum();
                obj += (fit - target) * (fit - target);
            }
            if obj < *best {
                *best = obj;
            }
            return;
        }
        for c in 0..=left {
            counts[pos] = c;
            recurse(phi, p, steps, pos + 1, left - c, counts, best);
        }
    }
    recurse(phi, p, steps, 0, steps, &mut counts, &mut best);
    best
}

fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let instances: Vec<(usize, Vec<Vec<f64>>, Vec<f64>)> = (0..100)
        .map(|i| {
            let support = i % 3;
            let cols = (0..support).map(|_| random_simplex(&mut rng, 2)).collect();
            (support, cols, random_simplex(&mut rng, 2))
        })
        .collect();
    let mut worst = 0.0f64;
    let gaps: Vec<Result<f64, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = instances
            .chunks(10)
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|(support, cols, target)| {
                            let col_refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
                            let problem = StageProblem::new(
                                2,
                                (1..=*support).collect(),
                                &col_refs,
                                SimplexVector::new(target.clone()).map_err(|e| e.to_string())?,
                            )
                            .map_err(|e| e.to_string())?;
                            let sol = solve_simplex_ls(&problem).map_err(|e| e.to_string())?;
                            let grid = grid_objective(problem.coefficients(), target, 1000);
                            Ok((sol.residual - grid).abs())
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    for (i, gap) in gaps.into_iter().enumerate() {
        let gap = gap?;
        worst = worst.max(gap);
        ensure(gap <= 1e-5, || format!("instance {i}: |solver - grid| = {gap:e}"))?;
    }
    Ok(format!("100 problems, max |solver - grid| = {worst:.2e}"))
}

fn structure_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut degenerate = 0;
    for run in 0..1000u64 {
        let k = rng.random_range(2..=6);
        let l = rng.random_range(0..=3);
        let n = rng.random_range(1..=6);
        let per_bin = rng.random_range(1..=60);
        let truth = sample_ground_truth(k, l, run).map_err(|e| e.to_string())?;
        let data = sample_dataset(&truth, per_bin * n, n, run + 1).map_err(|e| e.to_string())?;
        let lattice = truth.lattice();
        let r = estimate_with(&data, lattice, Execution::Parallel).map_err(|e| e.to_string())?;
        degenerate += r.degenerate_stages.len();

        let subsets = lattice.subsets();
        let m = lattice.len();
        for i in 0..m {
            let row = r.w_hat.row(i);
            for j in 0..m {
                if i != j && !subsets[j].is_subset(subsets[i]) {
                    ensure(row[j] == 0.0, || {
                        format!("run {run}: ŵ[{}][{}] = {}", i + 1, j + 1, row[j])
                    })?;
                }
            }
            let off: f64 = (0..m).filter(|&j| j != i).map(|j| row[j]).sum();
            ensure((row[i] - (1.0 - off)).abs() <= 1e-9, || {
                format!("run {run}: diagonal {}", i + 1)
            })?;
            ensure((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9, || {
                format!("run {run}: W row {}", i + 1)
            })?;
            ensure(row.iter().all(|&x| x >= -1e-9), || {
                format!("run {run}: negative W entry")
            })?;
            let qrow = r.q_hat.row(i);
            ensure(
                qrow.iter().all(|&x| x >= -1e-9) && (qrow.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
                || format!("run {run}: Q̂ row {} off the simplex", i + 1),
            )?;
        }
        ensure(r.w_hat.get(0, 0) == 1.0, || {
            format!("run {run}: ŵ_11 = {}", r.w_hat.get(0, 0))
        })?;

        let mut order = Vec::new();
        for mut level in lattice.levels() {
            level.shuffle(&mut rng);
            order.extend(level);
        }
        let permuted = estimate_in_order(&data, lattice, &order).map_err(|e| e.to_string())?;
        ensure(permuted == r, || {
            format!("run {run}: order {order:?} changed the estimates")
        })?;
        let sequential = estimate_with(&data, lattice, Execution::Sequential).map_err(|e| e.to_string())?;
        ensure(sequential == r, || format!("run {run}: sequential and parallel differ"))?;
    }
    Ok(format!("1000 runs, {degenerate} degenerate stages"))
}

fn brute_force_power_set(l: usize) -> Vec<Vec<usize>> {
    fn go(next: usize, l: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if next > l {
            out.push(current.clone());
            return;
        }
        go(next + 1, l, current, out);
        current.push(next);
        go(next + 1, l, current, out);
        current.pop();
    }
    let mut out = Vec::new();
    go(1, l, &mut Vec::new(), &mut out);
    out
}

fn lattice_oracle() -> Outcome {
    for l in 0..=8 {
        let lattice = enumerate_subsets(l).map_err(|e| e.to_string())?;
        let mut expected = brute_force_power_set(l);
        let mask = |s: &Vec<usize>| s.iter().map(|a| 1u32 << (a - 1)).sum::<u32>();
        expected.sort_by_key(|s| (s.len(), mask(s)));
        let got: Vec<Vec<usize>> = lattice.subsets().iter().map(|s| s.members()).collect();
        ensure(got == expected, || format!("L = {l}: ordering differs"))?;
        ensure(lattice.len() == 1 << l, || {
            format!("L = {l}: {} subsets", lattice.len())
        })?;
    }
    Ok("L = 0..=8 match brute force".into())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("sample-size-trends", sample_size_trends),
        ("variance-identity", variance_identity),
        ("noise-free-exactness", noise_free_exactness),
        ("hand-computed-L1", hand_computed_case),
        ("solver-grid-oracle", solver_oracle),
        ("structure-suite", structure_suite),
        ("lattice-oracle", lattice_oracle),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
