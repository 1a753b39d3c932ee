//! Command-line front end and the file writers it uses.
//!
//! ```text
//! visuomotor run --controller maxlp --seed 1 --out out/
//! visuomotor compare --seeds 1,2,3 --out out/
//! visuomotor validate
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::controllers::ControllerKind;
use crate::error::{Error, Result};
use crate::harness::{self, Comparison, ExperimentConfig, ImageSource, RunResult, StepRecord};
use crate::pgm;
use crate::world::{CameraState, MotorCommand, WorldImage};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "VISUOMOTOR_OUT";

#[derive(Parser, Debug)]
#[command(
    name = "visuomotor",
    version,
    about = "Learn to predict a moving camera's next frame"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write its trace, frames and model.
    Run {
        #[arg(long, value_parser = parse_kind)]
        controller: Option<ControllerKind>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a controller x seed grid and write summary tables.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', value_parser = parse_kind, default_value = "rm,minpe,maxpe,maxlp")]
        controllers: Vec<ControllerKind>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the built-in invariant checks.
    Validate,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// TOML file of `key = value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` setting; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// PGM path, or `synthetic`.
    #[arg(long)]
    image: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long = "em-window")]
    em_window: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> std::result::Result<ControllerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubcommandKind {
    Run,
    Compare {
        seeds: Vec<u64>,
        kinds: Vec<ControllerKind>,
    },
    Validate,
}

/// Parsed command line. Every setting, whether given as a dedicated flag or
/// through `--set`, ends up in `overrides` in the order it is applied.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub subcommand: SubcommandKind,
    pub config_path: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
    pub out_dir: PathBuf,
}

pub fn parse_args<I, T>(argv: I) -> Result<CliConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Usage(e.to_string()))?;
    let mut overrides = Vec::new();
    let (subcommand, common) = match cli.command {
        Command::Run { controller, common } => {
            if let Some(k) = controller {
                overrides.push(("controller".to_string(), k.name().to_string()));
            }
            (SubcommandKind::Run, common)
        }
        Command::Compare {
            seeds,
            controllers,
            common,
        } => {
            if seeds.is_empty() || controllers.is_empty() {
                return Err(Error::Usage("compare needs seeds and controllers".into()));
            }
            (
                SubcommandKind::Compare {
                    seeds,
                    kinds: controllers,
                },
                common,
            )
        }
        Command::Validate => (SubcommandKind::Validate, CommonArgs::default()),
    };

    let mut flag = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            overrides.push((key.to_string(), v));
        }
    };
    flag("steps", common.steps.map(|v| v.to_string()));
    flag("seed", common.seed.map(|v| v.to_string()));
    flag("image", common.image);
    flag("sigma", common.sigma.map(|v| v.to_string()));
    flag("epsilon", common.epsilon.map(|v| v.to_string()));
    flag("hidden", common.hidden.map(|v| v.to_string()));
    flag("window", common.window.map(|v| v.to_string()));
    flag("em_window", common.em_window.map(|v| v.to_string()));
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("expected KEY=VALUE, got {kv:?}")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }

    let out_dir = common
        .out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let config = CliConfig {
        subcommand,
        config_path: common.config,
        overrides,
        out_dir,
    };
    // Reject unknown keys and bad values before any work starts.
    config.experiment_config()?;
    Ok(config)
}

impl CliConfig {
    /// Defaults, then the config file, then overrides.
    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config_path {
            let text = fs::read_to_string(path)?;
            for (key, value) in parse_config_file(&text)? {
                apply_override(&mut cfg, &key, &value)?;
            }
        }
        for (key, value) in &self.overrides {
            apply_override(&mut cfg, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Flattens a TOML table of scalars into `(key, value)` strings.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Usage(format!("config file: {e}")))?;
    table
        .into_iter()
        .map(|(k, v)| {
            let value = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => {
                    return Err(Error::Usage(format!(
                        "config key {k}: unsupported value {other}"
                    )))
                }
            };
            Ok((k, value))
        })
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Usage(format!("bad value {value:?} for {key}")))
}

/// Applies one named setting. Unknown keys are a usage error.
pub fn apply_override(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "controller" => {
            cfg.controller.kind = value
                .parse()
                .map_err(|e: Error| Error::Usage(e.to_string()))?
        }
        "steps" => cfg.steps = parse_value(key, value)?,
        "seed" => cfg.master_seed = parse_value(key, value)?,
        "sigma" => cfg.noise.sigma = parse_value(key, value)?,
        "epsilon" => cfg.controller.epsilon = parse_value(key, value)?,
        "window" => cfg.controller.window = parse_value(key, value)?,
        "em_window" => cfg.controller.em_window = parse_value(key, value)?,
        "hidden" => cfg.elm.hidden_count = parse_value(key, value)?,
        "delta" => cfg.elm.online_init_scale = parse_value(key, value)?,
        "weight_low" => cfg.elm.weight_init_low = parse_value(key, value)?,
        "weight_high" => cfg.elm.weight_init_high = parse_value(key, value)?,
        "bias_low" => cfg.elm.bias_init_low = parse_value(key, value)?,
        "bias_high" => cfg.elm.bias_init_high = parse_value(key, value)?,
        "activation" => {
            cfg.elm.activation = match value {
                "logistic" => crate::elm::Activation::Logistic,
                "tanh" => crate::elm::Activation::Tanh,
                _ => return Err(Error::Usage(format!("unknown activation {value:?}"))),
            }
        }
        "image" => {
            cfg.image = if value == "synthetic" {
                ImageSource::default()
            } else {
                ImageSource::Path(PathBuf::from(value))
            }
        }
        "image_seed" => match &mut cfg.image {
            ImageSource::Synthetic { seed, .. } => *seed = parse_value(key, value)?,
            ImageSource::Path(_) => {
                return Err(Error::Usage(
                    "image_seed applies only to the synthetic image".into(),
                ))
            }
        },
        "camera" => {
            let (w, h) = value
                .split_once('x')
                .ok_or_else(|| Error::Usage(format!("camera expects WxH, got {value:?}")))?;
            let (w, h) = (parse_value(key, w)?, parse_value(key, h)?);
            *cfg = cfg.clone().with_camera(w, h);
        }
        "start" => {
            cfg.start = if value == "center" {
                None
            } else {
                let (x, y) = value
                    .split_once(',')
                    .ok_or_else(|| Error::Usage(format!("start expects X,Y, got {value:?}")))?;
                Some((parse_value(key, x)?, parse_value(key, y)?))
            }
        }
        "forced_command" => {
            cfg.forced_command = if value == "none" {
                None
            } else {
                Some(
                    value
                        .parse::<MotorCommand>()
                        .map_err(|e| Error::Usage(e.to_string()))?,
                )
            }
        }
        "final_window" => cfg.final_window = parse_value(key, value)?,
        _ => return Err(Error::Usage(format!("unknown setting {key:?}"))),
    }
    Ok(())
}

/// Float formatting shared by the CSV writers: 9 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes `t,cam_center_x,cam_center_y,cmd,error`, one row per step.
pub fn write_trace_csv(result: &RunResult, path: &Path) -> Result<()> {
    let (w, h) = result.config.camera;
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "t,cam_center_x,cam_center_y,cmd,error")?;
    for r in &result.trace {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.t,
            r.cam_x + w / 2,
            r.cam_y + h / 2,
            r.cmd.code(),
            format_float(r.error)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a trace CSV written by [`write_trace_csv`] back into step records.
/// `camera` is the window size used to convert centers to top-left corners.
pub fn read_trace_csv(text: &str, camera: (usize, usize)) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("t,cam_center_x,cam_center_y,cmd,error") => {}
        _ => return Err(Error::Usage("trace CSV header missing".into())),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Usage(format!("trace CSV row {}: {line:?}", i + 1));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad());
            }
            let cx: usize = fields[1].parse().map_err(|_| bad())?;
            let cy: usize = fields[2].parse().map_err(|_| bad())?;
            let mut code = fields[3].chars();
            let cmd = match (code.next(), code.next()) {
                (Some(c), None) => MotorCommand::from_code(c).ok_or_else(bad)?,
                _ => return Err(bad()),
            };
            Ok(StepRecord {
                t: fields[0].parse().map_err(|_| bad())?,
                cam_x: cx.checked_sub(camera.0 / 2).ok_or_else(bad)?,
                cam_y: cy.checked_sub(camera.1 / 2).ok_or_else(bad)?,
                cmd,
                error: fields[4].parse().map_err(|_| bad())?,
                random: false,
            })
        })
        .collect()
}

/// Per-controller medians: final error, unique positions, bounding-box area
/// and fraction of Stay commands.
pub fn write_summary(comparison: &Comparison, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(
        out,
        "controller,runs,median_final_error,median_unique_positions,median_bbox_area,median_stay_fraction"
    )?;
    for s in &comparison.summaries {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.kind,
            s.runs,
            format_float(s.median_final_error),
            s.median_unique_positions,
            s.median_bbox_area,
            format_float(s.median_stay_fraction)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// One row per seed: controllers from lowest to highest final error.
pub fn write_ranking(comparison: &Comparison, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let ranks: Vec<String> = (1..=comparison.kinds.len())
        .map(|i| format!("rank{i}"))
        .collect();
    writeln!(out, "seed,{}", ranks.join(","))?;
    for r in &comparison.rankings {
        let names: Vec<&str> = r.order.iter().map(|k| k.name()).collect();
        writeln!(out, "{},{}", r.seed, names.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `<prefix>_actual.pgm` (noise-free camera window) and
/// `<prefix>_predicted.pgm` (network output clamped to `[0, 1]`).
pub fn render_frames(
    world: &WorldImage,
    cam: &CameraState,
    predicted: &[f64],
    path_prefix: &Path,
) -> Result<(PathBuf, PathBuf)> {
    if predicted.len() != cam.pixel_count() {
        return Err(Error::dimension(
            "predicted frame",
            cam.pixel_count(),
            predicted.len(),
        ));
    }
    let with_suffix = |suffix: &str| {
        let mut name = path_prefix.as_os_str().to_owned();
        name.push(suffix);
        PathBuf::from(name)
    };
    let actual_path = with_suffix("_actual.pgm");
    let predicted_path = with_suffix("_predicted.pgm");
    fs::write(
        &actual_path,
        pgm::encode_p5(cam.width, cam.height, &world.window(cam))?,
    )?;
    fs::write(
        &predicted_path,
        pgm::encode_p5(cam.width, cam.height, predicted)?,
    )?;
    Ok((actual_path, predicted_path))
}

/// Writes the whole image with the final camera window outlined in white.
pub fn render_overview(world: &WorldImage, cam: &CameraState, path: &Path) -> Result<()> {
    let mut pixels = world.pixels().to_vec();
    let (x1, y1) = (cam.x + cam.width - 1, cam.y + cam.height - 1);
    for x in cam.x..=x1 {
        pixels[cam.y * world.width() + x] = 1.0;
        pixels[y1 * world.width() + x] = 1.0;
    }
    for y in cam.y..=y1 {
        pixels[y * world.width() + cam.x] = 1.0;
        pixels[y * world.width() + x1] = 1.0;
    }
    fs::write(
        path,
        pgm::encode_p5(world.width(), world.height(), &pixels)?,
    )?;
    Ok(())
}

fn run_single(cli: &CliConfig) -> Result<()> {
    let cfg = cli.experiment_config()?;
    let world = cfg.image.load()?;
    let result = harness::run_experiment_in(&world, &cfg)?;
    fs::create_dir_all(&cli.out_dir)?;
    write_trace_csv(&result, &cli.out_dir.join("trace.csv"))?;
    render_frames(
        &world,
        &result.final_camera,
        &result.final_prediction,
        &cli.out_dir.join("frame"),
    )?;
    render_overview(
        &world,
        &result.final_camera,
        &cli.out_dir.join("overview.pgm"),
    )?;
    result.elm.write_dump(BufWriter::new(fs::File::create(
        cli.out_dir.join("model.elm"),
    )?))?;

    let m = &result.metrics;
    println!("controller        {}", cfg.controller.kind);
    println!("steps             {}", result.trace.len());
    println!("final error       {}", format_float(m.final_error));
    println!("unique positions  {}", m.unique_positions);
    println!("bbox area         {}", m.bbox_area);
    println!("stay fraction     {:.3}", m.stay_fraction());
    println!("output            {}", cli.out_dir.display());
    if let Some(reason) = &result.aborted {
        return Err(Error::Numeric(format!("run aborted: {reason}")));
    }
    Ok(())
}

fn run_compare(cli: &CliConfig, seeds: &[u64], kinds: &[ControllerKind]) -> Result<()> {
    let cfg = cli.experiment_config()?;
    let comparison = harness::run_comparison(&cfg, kinds, seeds)?;
    fs::create_dir_all(&cli.out_dir)?;
    for cell in &comparison.cells {
        match &cell.outcome {
            Ok(result) => write_trace_csv(
                result,
                &cli.out_dir
                    .join(format!("trace_{}_seed{}.csv", cell.kind, cell.seed)),
            )?,
            Err(e) => eprintln!("{} seed {}: {e}", cell.kind, cell.seed),
        }
    }
    write_summary(&comparison, &cli.out_dir.join("summary.csv"))?;
    write_ranking(&comparison, &cli.out_dir.join("ranking.csv"))?;

    println!("controller  runs  final_error      unique  bbox      stay");
    for s in &comparison.summaries {
        println!(
            "{:<10}  {:>4}  {}  {:>6}  {:>8}  {:.3}",
            s.kind.name(),
            s.runs,
            format_float(s.median_final_error),
            s.median_unique_positions,
            s.median_bbox_area,
            s.median_stay_fraction
        );
    }
    println!("output      {}", cli.out_dir.display());
    Ok(())
}

fn run_validate() -> Result<()> {
    let checks = crate::validate::run_all();
    let mut failed = 0;
    for c in &checks {
        println!(
            "[{}] {} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Error::Numeric(format!(
            "{failed} of {} checks failed",
            checks.len()
        )));
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn execute(cli: &CliConfig) -> Result<()> {
    match &cli.subcommand {
        SubcommandKind::Run => run_single(cli),
        SubcommandKind::Compare { seeds, kinds } => run_compare(cli, seeds, kinds),
        SubcommandKind::Validate => run_validate(),
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    if let Err(e) = Cli::try_parse_from(&argv) {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            let _ = e.print();
            return 0;
        }
    }
    match parse_args(argv).and_then(|cli| execute(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
