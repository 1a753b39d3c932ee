//! One seeded experiment: trace, metrics and rendered frames.
//!
//! Usage: cargo run --release --example single_run [minpe|maxpe|maxlp|rm] [OUT_DIR]

use std::path::PathBuf;

use visuomotor::cli::{render_frames, write_trace_csv};
use visuomotor::controllers::ControllerKind;
use visuomotor::harness::{run_experiment, ExperimentConfig};

fn main() -> visuomotor::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: ControllerKind = args.next().as_deref().unwrap_or("minpe").parse()?;
    let out = PathBuf::from(args.next().unwrap_or_else(|| "single_run_out".into()));
    std::fs::create_dir_all(&out)?;

    let config = ExperimentConfig::default().with_kind(kind).with_seed(42);
    let run = run_experiment(&config)?;
    let m = &run.metrics;
    println!("controller       {kind}");
    println!("final error      {:.4e}", m.final_error);
    println!("unique positions {}", m.unique_positions);
    println!("bbox area        {}", m.bbox_area);
    println!("stay fraction    {:.3}", m.stay_fraction());
    for step in [99, 999, 4999] {
        println!(
            "mean error @{:4}  {:.4e}",
            step + 1,
            m.mean_error_curve[step]
        );
    }

    write_trace_csv(&run, &out.join("trace.csv"))?;
    let world = config.image.load()?;
    render_frames(
        &world,
        &run.final_camera,
        &run.final_prediction,
        &out.join("frame"),
    )?;
    println!("wrote {}", out.display());
    Ok(())
}
