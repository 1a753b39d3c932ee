//! Shows which command each policy picks for a hand-written error history.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use visuomotor::controllers::{
    choose_action, learning_progress, ControllerConfig, ControllerKind, ErrorHistory,
};
use visuomotor::world::MotorCommand::*;

fn main() -> visuomotor::Result<()> {
    let history = ErrorHistory::from_errors(&[
        (Right, 0.40),
        (Right, 0.35),
        (Stay, 0.05),
        (Up, 0.60),
        (Left, 0.20),
        (Stay, 0.05),
        (Down, 0.10),
    ])?;

    for r in history.records() {
        let lp = learning_progress(&history, r.t, 3)
            .map(|v| format!("{v:+.3}"))
            .unwrap_or_else(|| "   n/a".into());
        println!(
            "t={} cmd={} error={:.2} lp(w_e=3)={lp}",
            r.t, r.cmd, r.error
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for kind in ControllerKind::ALL {
        let cfg = ControllerConfig {
            epsilon: 0.0,
            em_window: 3,
            ..ControllerConfig::new(kind)
        };
        println!(
            "{:>5} -> {}",
            kind.name(),
            choose_action(&history, &cfg, &mut rng)
        );
    }
    Ok(())
}
