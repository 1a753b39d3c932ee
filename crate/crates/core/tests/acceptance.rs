use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use visuomotor::controllers::ControllerKind;
use visuomotor::elm::{ElmConfig, ElmState, TrainingPair};
use visuomotor::harness::{median, run_comparison, run_experiment, Comparison, ExperimentConfig};
use visuomotor::linalg::{pseudo_inverse, DenseMatrix};
use visuomotor::world::{MotorCommand, NoiseModel};

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn rel_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    inf_norm(&(a - b)) / inf_norm(b).max(1.0)
}

fn random_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    rank: Option<usize>,
) -> DMatrix<f64> {
    match rank {
        None => DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)),
        Some(k) => {
            let l = DMatrix::from_fn(rows, k, |_, _| rng.random_range(-1.0..1.0));
            let r = DMatrix::from_fn(k, cols, |_, _| rng.random_range(-1.0..1.0));
            l * r
        }
    }
}

fn comparison_grid() -> (Comparison, Duration) {
    let base = ExperimentConfig::default();
    let seeds: Vec<u64> = (1..=10).collect();
    let start = Instant::now();
    let cmp = run_comparison(&base, &ControllerKind::ALL, &seeds).expect("comparison grid");
    (cmp, start.elapsed())
}

fn per_kind(
    cmp: &Comparison,
    kind: ControllerKind,
    f: impl Fn(&visuomotor::harness::Metrics) -> f64,
) -> f64 {
    let values: Vec<f64> = cmp
        .cells
        .iter()
        .filter(|c| c.kind == kind)
        .map(|c| f(&c.completed().expect("completed run").metrics))
        .collect();
    assert_eq!(values.len(), cmp.seeds.len(), "{kind} has failed cells");
    median(&values)
}

fn criterion_ordering(cmp: &Comparison) -> Outcome {
    use ControllerKind::*;
    let err = |k| per_kind(cmp, k, |m| m.final_error);
    let (minpe, maxlp, maxpe, rm) = (err(MinPe), err(MaxLp), err(MaxPe), err(Rm));
    let mut lowest_minpe = 0;
    let mut highest_rm = 0;
    for &seed in &cmp.seeds {
        let errors: Vec<(ControllerKind, f64)> = ControllerKind::ALL
            .iter()
            .map(|&k| {
                let run = cmp.cell(k, seed).and_then(|c| c.completed()).expect("cell");
                (k, run.metrics.final_error)
            })
            .collect();
        let lo = errors.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        let hi = errors.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        lowest_minpe += usize::from(lo == MinPe);
        highest_rm += usize::from(hi == Rm);
    }
    let median_order = minpe < maxlp && maxlp < maxpe && maxpe < rm;
    let min_lowest = [maxlp, maxpe, rm].iter().all(|&v| minpe < v);
    let rm_highest = [minpe, maxlp, maxpe].iter().all(|&v| rm > v);
    Outcome {
        id: 1,
        name: "error ordering MinPE < MaxLP < MaxPE < RM",
        passed: median_order && min_lowest && rm_highest && highest_rm >= 8,
        detail: format!(
            "medians minpe={minpe:.3e} maxlp={maxlp:.3e} maxpe={maxpe:.3e} rm={rm:.3e}; \
             minpe lowest in {lowest_minpe}/10 seeds, rm highest in {highest_rm}/10 seeds"
        ),
    }
}

fn criterion_exploration(cmp: &Comparison) -> Outcome {
    use ControllerKind::*;
    let uniq = |k| per_kind(cmp, k, |m| m.unique_positions as f64);
    let bbox = |k| per_kind(cmp, k, |m| m.bbox_area as f64);
    let (u_maxpe, u_rm) = (uniq(MaxPe), uniq(Rm));
    let (b_maxpe, b_minpe) = (bbox(MaxPe), bbox(MinPe));
    Outcome {
        id: 2,
        name: "MaxPE explores more than RM and MinPE",
        passed: u_maxpe >= 2.0 * u_rm && b_maxpe > b_minpe,
        detail: format!("unique maxpe={u_maxpe} rm={u_rm}; bbox maxpe={b_maxpe} minpe={b_minpe}"),
    }
}

fn criterion_homeostasis(cmp: &Comparison) -> Outcome {
    let stay = per_kind(cmp, ControllerKind::MinPe, |m| m.stay_fraction());
    Outcome {
        id: 3,
        name: "MinPE stays more than the random rate",
        passed: stay > 0.2,
        detail: format!("median stay fraction {stay:.3}"),
    }
}

fn criterion_runtime() -> Outcome {
    let start = Instant::now();
    let run = run_experiment(&ExperimentConfig::default()).expect("default run");
    let elapsed = start.elapsed();
    Outcome {
        id: 4,
        name: "single default run within 30 s",
        passed: run.is_complete() && run.trace.len() == 5000 && elapsed <= Duration::from_secs(30),
        detail: format!(
            "{} steps in {:.2} s",
            run.trace.len(),
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_penrose() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut deficient = 0;
    for i in 0..100 {
        let rows = rng.random_range(1..=20);
        let cols = rng.random_range(1..=30);
        let full = rows.min(cols);
        let a = if i % 3 == 0 {
            deficient += 1;
            match full {
                1 => DMatrix::zeros(rows, cols),
                _ => {
                    let rank = rng.random_range(1..full);
                    random_matrix(&mut rng, rows, cols, Some(rank))
                }
            }
        } else {
            random_matrix(&mut rng, rows, cols, None)
        };
        let ap = pseudo_inverse(&DenseMatrix::from_matrix(a.clone()).unwrap(), 0.0)
            .unwrap()
            .into_matrix();
        let c1 = rel_gap(&(&a * &ap * &a), &a);
        let c2 = rel_gap(&(&ap * &a * &ap), &ap);
        let aap = &a * &ap;
        let apa = &ap * &a;
        let c3 = rel_gap(&aap.transpose(), &aap);
        let c4 = rel_gap(&apa.transpose(), &apa);
        worst = worst.max(c1).max(c2).max(c3).max(c4);
    }
    Outcome {
        id: 5,
        name: "pseudo-inverse satisfies the Penrose conditions",
        passed: deficient >= 20 && worst <= 1e-8,
        detail: format!("100 matrices, {deficient} rank-deficient, worst residual {worst:.2e}"),
    }
}

fn random_elm(rng: &mut ChaCha8Rng, n: usize, p: usize, hidden: usize, delta: f64) -> ElmState {
    let mut cfg = ElmConfig::new(n, p, hidden);
    cfg.online_init_scale = delta;
    cfg.seed = rng.random();
    ElmState::init(&cfg).unwrap()
}

fn random_pairs(rng: &mut ChaCha8Rng, count: usize, n: usize, p: usize) -> Vec<TrainingPair> {
    (0..count)
        .map(|_| {
            TrainingPair::new(
                (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
                (0..p).map(|_| rng.random_range(0.0..1.0)).collect(),
            )
        })
        .collect()
}

fn frobenius_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn criterion_online_batch() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (n, p) = (32 * 32 + 2, 32 * 32);
        let pairs = random_pairs(&mut rng, 200, n, p);
        let mut online = random_elm(&mut rng, n, p, 30, 1e-8);
        let mut batch = online.clone();
        for pair in &pairs {
            online.update_online(pair).unwrap();
        }
        batch.fit_batch(&pairs).unwrap();
        worst = worst.max(frobenius_gap(online.readout(), batch.readout()));
    }
    Outcome {
        id: 6,
        name: "online readout matches batch readout",
        passed: worst <= 1e-4,
        detail: format!("20 instances, worst relative Frobenius gap {worst:.2e}"),
    }
}

fn criterion_min_norm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_residual: f64 = 0.0;
    for _ in 0..10 {
        let (n, p) = (6, 4);
        let pairs = random_pairs(&mut rng, 3, n, p);
        let mut elm = random_elm(&mut rng, n, p, 10, 1e-8);
        elm.fit_batch(&pairs).unwrap();

        // Hidden matrix with one column per sample and targets likewise.
        let h = DMatrix::from_fn(10, 3, |i, j| {
            elm.hidden_activations(&pairs[j].x).unwrap()[i]
        });
        let y = DMatrix::from_fn(p, 3, |i, j| pairs[j].y[i]);
        let gram = (h.transpose() * &h).cholesky().expect("full column rank");
        let oracle = &y * gram.inverse() * h.transpose();

        let beta = elm.readout().as_matrix();
        worst_residual = worst_residual.max((beta * &h - &y).amax());
        worst_excess = worst_excess.max(beta.norm() - oracle.norm());

        // Any other exact solution adds a component orthogonal to the data.
        let z = DMatrix::from_fn(p, 10, |_, _| rng.random_range(-1.0..1.0));
        let proj = DMatrix::identity(10, 10) - &h * gram.inverse() * h.transpose();
        let other = &oracle + z * proj;
        assert!((&other * &h - &y).amax() < 1e-8);
        assert!(oracle.norm() <= other.norm() + 1e-12);
    }
    Outcome {
        id: 7,
        name: "batch readout has minimum norm",
        passed: worst_excess <= 1e-8 && worst_residual <= 1e-8,
        detail: format!(
            "10 instances, worst norm excess {worst_excess:.2e}, worst residual {worst_residual:.2e}"
        ),
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_visuomotor");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let status = Command::new(bin)
            .args(["run", "--seed", "42", "--out"])
            .arg(dir.path())
            .status()
            .expect("spawn binary");
        assert!(status.success(), "run exited with {status}");
    }
    let a = read_dir_sorted(dirs[0].path());
    let b = read_dir_sorted(dirs[1].path());
    let names: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    let has_csv = names.iter().any(|n| n.ends_with(".csv"));
    let has_pgm = names.iter().any(|n| n.ends_with(".pgm"));
    Outcome {
        id: 8,
        name: "repeated seeded runs are byte-identical",
        passed: has_csv && has_pgm && a == b,
        detail: format!("compared {} files: {}", names.len(), names.join(" ")),
    }
}

fn criterion_noise_free() -> Outcome {
    let cfg = ExperimentConfig {
        steps: 50,
        noise: NoiseModel::new(0.0).unwrap(),
        forced_command: Some(MotorCommand::Stay),
        ..ExperimentConfig::default()
    };
    let run = run_experiment(&cfg).expect("noise-free run");
    let first_small = run.trace.iter().find(|r| r.error < 1e-6).map(|r| r.t);
    Outcome {
        id: 9,
        name: "noise-free Stay run becomes predictable",
        passed: run.trace.len() == 50 && first_small.is_some(),
        detail: match first_small {
            Some(t) => format!(
                "error below 1e-6 from step {t}, last {:.2e}",
                run.trace[49].error
            ),
            None => format!(
                "no step below 1e-6, minimum {:.2e}",
                run.trace
                    .iter()
                    .map(|r| r.error)
                    .fold(f64::INFINITY, f64::min)
            ),
        },
    }
}

#[test]
fn acceptance() {
    let mut outcomes = vec![
        criterion_runtime(),
        criterion_penrose(),
        criterion_online_batch(),
        criterion_min_norm(),
        criterion_determinism(),
        criterion_noise_free(),
    ];
    let (cmp, elapsed) = comparison_grid();
    eprintln!("comparison grid: 40 runs in {:.1} s", elapsed.as_secs_f64());
    outcomes.push(criterion_ordering(&cmp));
    outcomes.push(criterion_exploration(&cmp));
    outcomes.push(criterion_homeostasis(&cmp));
    outcomes.sort_by_key(|o| o.id);

    for o in &outcomes {
        println!(
            "criterion {} {}: {} ({})",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    let failed: Vec<u32> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn penrose_oracle_detects_wrong_inverse() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let wrong = DMatrix::identity(2, 2);
    assert!(rel_gap(&(&wrong * &a * &wrong), &wrong) > 1e-8);
    let right = pseudo_inverse(&DenseMatrix::from_matrix(a.clone()).unwrap(), 0.0)
        .unwrap()
        .into_matrix();
    assert!(rel_gap(&(&right * &a * &right), &right) < 1e-12);
}
