//! Fits an ELM readout in one batch and checks it on held-out points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use visuomotor::elm::{prediction_error, ElmConfig, ElmState, TrainingPair};

fn target(x: &[f64]) -> Vec<f64> {
    vec![(3.0 * x[0]).sin() * x[1], x[0] * x[0] - x[1]]
}

fn main() -> visuomotor::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut sample = |n: usize| -> Vec<TrainingPair> {
        (0..n)
            .map(|_| {
                let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let y = target(&x);
                TrainingPair::new(x, y)
            })
            .collect()
    };
    let train = sample(400);
    let test = sample(100);

    for hidden in [5, 20, 80] {
        let mut cfg = ElmConfig::new(2, 2, hidden);
        cfg.seed = 7;
        cfg.weight_init_low = -3.0;
        cfg.weight_init_high = 3.0;
        let mut elm = ElmState::init(&cfg)?;
        elm.fit_batch(&train)?;
        let mut total = 0.0;
        for p in &test {
            total += prediction_error(&elm.predict_input(&p.x)?, &p.y)?;
        }
        println!(
            "hidden={hidden:3}  test mse={:.3e}",
            total / test.len() as f64
        );
    }
    Ok(())
}
