//! Self-checks behind the `validate` subcommand. Each check runs on small,
//! seeded instances and finishes in well under a second.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controllers::{self, ControllerConfig, ControllerKind, ErrorHistory};
use crate::elm::{ElmConfig, ElmState, TrainingPair};
use crate::harness::{run_experiment, ExperimentConfig, ImageSource};
use crate::linalg::{pseudo_inverse, DenseMatrix};
use crate::world::{apply_motor, CameraState, MotorCommand, NoiseModel, WorldImage};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: std::result::Result<String, String>) -> Check {
    match result {
        Ok(detail) => Check {
            name,
            passed: true,
            detail,
        },
        Err(detail) => Check {
            name,
            passed: false,
            detail,
        },
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        check("penrose-conditions", penrose_conditions()),
        check("online-matches-batch", online_matches_batch()),
        check("minimum-norm-readout", minimum_norm()),
        check("camera-stays-in-bounds", camera_bounds()),
        check("window-policies", window_policies()),
        check("run-determinism", run_determinism()),
        check("noise-free-stay", noise_free_stay()),
    ]
}

fn rel_inf(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rank: usize) -> DMatrix<f64> {
    let l = DMatrix::from_fn(rows, rank, |_, _| rng.random_range(-1.0..1.0));
    let r = DMatrix::from_fn(rank, cols, |_, _| rng.random_range(-1.0..1.0));
    l * r
}

fn penrose_conditions() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for i in 0..30 {
        let rows = rng.random_range(1..=20);
        let cols = rng.random_range(1..=30);
        let full = rows.min(cols);
        let rank = if i % 2 == 0 {
            full
        } else {
            rng.random_range(1..=full)
        };
        let a = random_matrix(&mut rng, rows, cols, rank);
        let p = pseudo_inverse(
            &DenseMatrix::from_matrix(a.clone()).map_err(|e| e.to_string())?,
            0.0,
        )
        .map_err(|e| e.to_string())?;
        let p = p.as_matrix();
        let ap = &a * p;
        let pa = p * &a;
        for r in [
            rel_inf(&(&ap * &a), &a),
            rel_inf(&(&pa * p), p),
            rel_inf(&ap.transpose(), &ap),
            rel_inf(&pa.transpose(), &pa),
        ] {
            worst = worst.max(r);
        }
    }
    if worst <= 1e-8 {
        Ok(format!("worst residual {worst:.2e}"))
    } else {
        Err(format!("residual {worst:.2e} exceeds 1e-8"))
    }
}

fn online_matches_batch() -> std::result::Result<String, String> {
    let cfg = ElmConfig {
        seed: 3,
        ..ElmConfig::new(12, 6, 8)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pairs: Vec<TrainingPair> = (0..200)
        .map(|_| {
            TrainingPair::new(
                (0..12).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..6).map(|_| rng.random::<f64>()).collect(),
            )
        })
        .collect();
    let mut online = ElmState::init(&cfg).map_err(|e| e.to_string())?;
    for p in &pairs {
        online.update_online(p).map_err(|e| e.to_string())?;
    }
    let mut batch = online.clone();
    batch.fit_batch(&pairs).map_err(|e| e.to_string())?;
    let gap = (online.readout().as_matrix() - batch.readout().as_matrix()).norm()
        / batch.readout().as_matrix().norm();
    if gap <= 1e-4 {
        Ok(format!("relative gap {gap:.2e}"))
    } else {
        Err(format!("relative gap {gap:.2e} exceeds 1e-4"))
    }
}

fn minimum_norm() -> std::result::Result<String, String> {
    let cfg = ElmConfig {
        seed: 11,
        ..ElmConfig::new(5, 4, 10)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pairs: Vec<TrainingPair> = (0..3)
        .map(|_| {
            TrainingPair::new(
                (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..4).map(|_| rng.random::<f64>()).collect(),
            )
        })
        .collect();
    let mut state = ElmState::init(&cfg).map_err(|e| e.to_string())?;
    state.fit_batch(&pairs).map_err(|e| e.to_string())?;

    // Minimum-norm exact solution Y (H'H)^-1 H' from the normal equations.
    let h = DMatrix::from_fn(10, 3, |i, j| {
        state
            .hidden_activations(&pairs[j].x)
            .map(|v| v[i])
            .unwrap_or(f64::NAN)
    });
    let y = DMatrix::from_fn(4, 3, |i, j| pairs[j].y[i]);
    let gram = h.transpose() * &h;
    let inv = gram
        .cholesky()
        .ok_or("Gram matrix not positive definite")?
        .inverse();
    let oracle = y * inv * h.transpose();
    let (got, want) = (state.readout().as_matrix().norm(), oracle.norm());
    if got <= want + 1e-8 {
        Ok(format!("norm {got:.6} vs oracle {want:.6}"))
    } else {
        Err(format!("norm {got:.6} exceeds oracle {want:.6}"))
    }
}

fn camera_bounds() -> std::result::Result<String, String> {
    let world = WorldImage::new(40, 30, vec![0.0; 1200]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut cam = CameraState::centered(&world, 8, 8).map_err(|e| e.to_string())?;
    for i in 0..10_000 {
        let cmd = MotorCommand::ALL[rng.random_range(0..5)];
        cam = apply_motor(&world, &cam, cmd);
        if !cam.fits(&world) {
            return Err(format!("out of bounds at step {i}: {cam:?}"));
        }
    }
    Ok("10000 random commands".into())
}

fn window_policies() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let len: usize = rng.random_range(1..40);
        let entries: Vec<(MotorCommand, f64)> = (0..len)
            .map(|_| {
                (
                    MotorCommand::ALL[rng.random_range(0..5)],
                    rng.random_range(0..20) as f64,
                )
            })
            .collect();
        let history = ErrorHistory::from_errors(&entries).map_err(|e| e.to_string())?;
        let cfg = ControllerConfig {
            epsilon: 0.0,
            ..ControllerConfig::new(ControllerKind::MinPe)
        };
        let window = &entries[len.saturating_sub(cfg.window)..];
        // Latest record holding the extreme value.
        let lo = window.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        let hi = window.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        let brute_min = window.iter().rev().find(|e| e.1 == lo).map(|e| e.0);
        let brute_max = window.iter().rev().find(|e| e.1 == hi).map(|e| e.0);
        let got_min = controllers::choose_minpe(&history, &cfg, &mut rng);
        let got_max = controllers::choose_maxpe(&history, &cfg, &mut rng);
        if Some(got_min) != brute_min || Some(got_max) != brute_max {
            return Err(format!("policy disagrees with scan on {entries:?}"));
        }
    }
    Ok("1000 random histories".into())
}

fn tiny_config() -> ExperimentConfig {
    ExperimentConfig {
        steps: 200,
        image: ImageSource::Synthetic {
            width: 48,
            height: 48,
            seed: 5,
        },
        ..ExperimentConfig::default()
    }
    .with_camera(8, 8)
    .with_kind(ControllerKind::MaxLp)
    .with_seed(42)
}

fn run_determinism() -> std::result::Result<String, String> {
    let a = run_experiment(&tiny_config()).map_err(|e| e.to_string())?;
    let b = run_experiment(&tiny_config()).map_err(|e| e.to_string())?;
    if a.trace == b.trace && a.elm == b.elm {
        Ok("identical traces and models".into())
    } else {
        Err("repeated run diverged".into())
    }
}

fn noise_free_stay() -> std::result::Result<String, String> {
    let mut cfg = tiny_config();
    cfg.steps = 50;
    cfg.noise = NoiseModel::new(0.0).map_err(|e| e.to_string())?;
    cfg.forced_command = Some(MotorCommand::Stay);
    let run = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let last = run.trace.last().map(|r| r.error).unwrap_or(f64::NAN);
    if last < 1e-6 {
        Ok(format!("error after 50 steps {last:.2e}"))
    } else {
        Err(format!("error after 50 steps {last:.2e}"))
    }
}
