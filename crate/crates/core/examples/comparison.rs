//! Runs all four controllers over several seeds and prints the medians.
//!
//! Usage: cargo run --release --example comparison [SEEDS] [STEPS]

use visuomotor::controllers::ControllerKind;
use visuomotor::harness::{run_comparison, ExperimentConfig};

fn main() -> visuomotor::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args
        .next()
        .map_or(Ok(4), |s| s.parse())
        .expect("seed count");
    let steps: usize = args
        .next()
        .map_or(Ok(2000), |s| s.parse())
        .expect("step count");

    let base = ExperimentConfig {
        steps,
        ..ExperimentConfig::default()
    };
    let seeds: Vec<u64> = (1..=seeds).collect();
    let cmp = run_comparison(&base, &ControllerKind::ALL, &seeds)?;

    println!(
        "{:<6} {:>12} {:>8} {:>8} {:>6}",
        "", "final err", "unique", "bbox", "stay"
    );
    for s in &cmp.summaries {
        println!(
            "{:<6} {:>12.4e} {:>8} {:>8} {:>6.3}",
            s.kind.name(),
            s.median_final_error,
            s.median_unique_positions,
            s.median_bbox_area,
            s.median_stay_fraction
        );
    }
    for r in &cmp.rankings {
        let order: Vec<&str> = r.order.iter().map(|k| k.name()).collect();
        println!("seed {:2}: {}", r.seed, order.join(" < "));
    }
    Ok(())
}
