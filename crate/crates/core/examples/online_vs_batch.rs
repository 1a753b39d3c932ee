//! Streams samples through the recursive update and compares the readout
//! with a batch fit over the same data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use visuomotor::elm::{ElmConfig, ElmState, TrainingPair};

fn main() -> visuomotor::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, p) = (66, 64);
    let data: Vec<TrainingPair> = (0..300)
        .map(|_| {
            TrainingPair::new(
                (0..n).map(|_| rng.random::<f64>()).collect(),
                (0..p).map(|_| rng.random::<f64>()).collect(),
            )
        })
        .collect();

    let mut cfg = ElmConfig::new(n, p, 30);
    cfg.seed = 11;
    let mut online = ElmState::init(&cfg)?;
    let mut batch = online.clone();

    for (i, pair) in data.iter().enumerate() {
        online.update_online(pair)?;
        if [10, 30, 100, 300].contains(&(i + 1)) {
            batch.fit_batch(&data[..=i])?;
            let gap = (online.readout().as_matrix() - batch.readout().as_matrix()).norm()
                / batch.readout().as_matrix().norm();
            println!("after {:3} samples: relative gap {gap:.2e}", i + 1);
        }
    }
    Ok(())
}
