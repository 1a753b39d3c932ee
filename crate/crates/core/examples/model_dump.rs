//! Trains a small predictor, saves it in the ELM1 format and loads it back.

use visuomotor::controllers::ControllerKind;
use visuomotor::elm::{Activation, ElmState};
use visuomotor::harness::{run_experiment, ExperimentConfig};

fn main() -> visuomotor::Result<()> {
    let mut config = ExperimentConfig::default()
        .with_kind(ControllerKind::MaxLp)
        .with_seed(5)
        .with_camera(16, 16);
    config.steps = 1000;
    let run = run_experiment(&config)?;

    let mut bytes = Vec::new();
    run.elm.write_dump(&mut bytes)?;
    println!("dump: {} bytes", bytes.len());

    let loaded = ElmState::read_dump(bytes.as_slice(), Activation::Logistic, 1e-8)?;
    let probe = vec![0.5; loaded.input_dim()];
    let a = run.elm.predict_input(&probe)?;
    let b = loaded.predict_input(&probe)?;
    println!(
        "n={} p={} hidden={}; predictions identical: {}",
        loaded.input_dim(),
        loaded.output_dim(),
        loaded.hidden_count(),
        a == b
    );
    Ok(())
}
