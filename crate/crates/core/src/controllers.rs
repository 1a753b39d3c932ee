//! Autonomous motor control policies.
//!
//! Every policy sees only the agent's own past: which command was issued at
//! each step and the prediction error that followed. The three error-driven
//! policies reuse the command from a past step inside a lookback window,
//! picked by minimal error, maximal error, or maximal learning progress. With
//! probability `epsilon` they babble instead.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::world::MotorCommand;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKind {
    /// Random movement (motor babbling).
    Rm,
    /// Minimise prediction error.
    MinPe,
    /// Maximise prediction error.
    MaxPe,
    /// Maximise learning progress.
    MaxLp,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::Rm,
        ControllerKind::MinPe,
        ControllerKind::MaxPe,
        ControllerKind::MaxLp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Rm => "rm",
            ControllerKind::MinPe => "minpe",
            ControllerKind::MaxPe => "maxpe",
            ControllerKind::MaxLp => "maxlp",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown controller {s:?}, expected rm|minpe|maxpe|maxlp"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    /// Lookback `w` in records.
    pub window: usize,
    /// Probability of a uniformly random command.
    pub epsilon: f64,
    /// Width of the sliding error mean used for learning progress.
    pub em_window: usize,
    pub seed: u64,
}

impl ControllerConfig {
    /// `w = 20`, `w_e = 10`, `epsilon = 0.2`; RM always babbles.
    pub fn new(kind: ControllerKind) -> Self {
        ControllerConfig {
            kind,
            window: 20,
            epsilon: 0.2,
            em_window: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.em_window == 0 {
            return Err(Error::Config("controller windows must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Records a history must retain for this controller to see its full
    /// lookback.
    pub fn history_capacity(&self) -> usize {
        self.window + self.em_window + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRecord {
    pub t: u64,
    pub cmd: MotorCommand,
    pub error: f64,
}

/// Bounded, time-ordered log of `(t, command, error)`.
#[derive(Clone, Debug)]
pub struct ErrorHistory {
    records: VecDeque<ErrorRecord>,
    capacity: usize,
}

impl ErrorHistory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "history capacity must be positive");
        ErrorHistory {
            records: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    /// Builds a history from `(cmd, error)` pairs at timesteps `1, 2, ...`.
    pub fn from_errors(entries: &[(MotorCommand, f64)]) -> Result<Self> {
        let mut h = ErrorHistory::new(entries.len().max(1));
        for (i, &(cmd, error)) in entries.iter().enumerate() {
            h.push(i as u64 + 1, cmd, error)?;
        }
        Ok(h)
    }

    /// Appends a record, evicting the oldest one when full.
    pub fn push(&mut self, t: u64, cmd: MotorCommand, error: f64) -> Result<()> {
        if !(error >= 0.0 && error.is_finite()) {
            return Err(Error::Range(format!(
                "error {error} must be finite and >= 0"
            )));
        }
        if let Some(last) = self.records.back() {
            if t <= last.t {
                return Err(Error::Range(format!(
                    "timestep {t} not after last recorded {}",
                    last.t
                )));
            }
        }
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(ErrorRecord { t, cmd, error });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn records(&self) -> impl DoubleEndedIterator<Item = &ErrorRecord> + ExactSizeIterator {
        self.records.iter()
    }

    /// The most recent `n` records, oldest first.
    pub fn recent(&self, n: usize) -> impl Iterator<Item = &ErrorRecord> {
        self.records
            .iter()
            .skip(self.records.len().saturating_sub(n))
    }
}

/// Mean error over records with timestep in `(tau - em_window, tau]`.
pub fn sliding_mean_error(history: &ErrorHistory, tau: u64, em_window: usize) -> Result<f64> {
    let lower = i128::from(tau) - em_window as i128;
    let (sum, count) = history
        .records()
        .filter(|r| i128::from(r.t) > lower && r.t <= tau)
        .fold((0.0, 0usize), |(s, c), r| (s + r.error, c + 1));
    if count == 0 {
        return Err(Error::Range(format!(
            "no errors recorded in ({lower}, {tau}]"
        )));
    }
    Ok(sum / count as f64)
}

/// Uniform draw over the five commands.
pub fn choose_random<R: Rng + ?Sized>(rng: &mut R) -> MotorCommand {
    MotorCommand::ALL[rng.random_range(0..MotorCommand::ALL.len())]
}

/// Outcome of one control decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub command: MotorCommand,
    /// `true` when the command came from the random arm or a fallback.
    pub random: bool,
}

impl Decision {
    fn policy(command: MotorCommand) -> Self {
        Decision {
            command,
            random: false,
        }
    }

    fn babble<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Decision {
            command: choose_random(rng),
            random: true,
        }
    }
}

fn explore<R: Rng + ?Sized>(cfg: &ControllerConfig, rng: &mut R) -> bool {
    cfg.epsilon > 0.0 && rng.random_bool(cfg.epsilon)
}

// Scan the window oldest to newest; `better(candidate, best)` is non-strict
// so the latest of equal records wins.
fn scan_window(
    history: &ErrorHistory,
    window: usize,
    better: impl Fn(f64, f64) -> bool,
) -> Option<MotorCommand> {
    let mut best: Option<&ErrorRecord> = None;
    for r in history.recent(window) {
        if best.is_none_or(|b| better(r.error, b.error)) {
            best = Some(r);
        }
    }
    best.map(|r| r.cmd)
}

pub fn decide_minpe<R: Rng + ?Sized>(
    history: &ErrorHistory,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Decision {
    if explore(cfg, rng) {
        return Decision::babble(rng);
    }
    match scan_window(history, cfg.window, |e, best| e <= best) {
        Some(cmd) => Decision::policy(cmd),
        None => Decision::babble(rng),
    }
}

pub fn decide_maxpe<R: Rng + ?Sized>(
    history: &ErrorHistory,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Decision {
    if explore(cfg, rng) {
        return Decision::babble(rng);
    }
    match scan_window(history, cfg.window, |e, best| e >= best) {
        Some(cmd) => Decision::policy(cmd),
        None => Decision::babble(rng),
    }
}

/// Learning progress credited to the command issued at `tau`:
/// `em(tau - 1) - em(tau)`.
pub fn learning_progress(history: &ErrorHistory, tau: u64, em_window: usize) -> Option<f64> {
    let before = sliding_mean_error(history, tau.checked_sub(1)?, em_window).ok()?;
    let now = sliding_mean_error(history, tau, em_window).ok()?;
    Some(before - now)
}

pub fn decide_maxlp<R: Rng + ?Sized>(
    history: &ErrorHistory,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Decision {
    if explore(cfg, rng) {
        return Decision::babble(rng);
    }
    let mut best: Option<(f64, MotorCommand)> = None;
    for r in history.recent(cfg.window) {
        if let Some(lp) = learning_progress(history, r.t, cfg.em_window) {
            if best.is_none_or(|(b, _)| lp >= b) {
                best = Some((lp, r.cmd));
            }
        }
    }
    match best {
        Some((_, cmd)) => Decision::policy(cmd),
        None => Decision::babble(rng),
    }
}

/// Dispatches to the policy named by `cfg.kind`.
pub fn decide<R: Rng + ?Sized>(
    history: &ErrorHistory,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Decision {
    match cfg.kind {
        ControllerKind::Rm => Decision::babble(rng),
        ControllerKind::MinPe => decide_minpe(history, cfg, rng),
        ControllerKind::MaxPe => decide_maxpe(history, cfg, rng),
        ControllerKind::MaxLp => decide_maxlp(history, cfg, rng),
    }
}

pub fn choose_minpe<R: Rng + ?Sized>(
    history: &ErrorHistory,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> MotorCommand {
    decide_minpe(history, cfg, rng).command
}

pub fn choose_maxpe<R: Rng + ?Sized>(
    history: &ErrorHistory,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> MotorCommand {
    decide_maxpe(history, cfg, rng).command
}

pub fn choose_maxlp<R: Rng + ?Sized>(
    history: &ErrorHistory,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> MotorCommand {
    decide_maxlp(history, cfg, rng).command
}

pub fn choose_action<R: Rng + ?Sized>(
    history: &ErrorHistory,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> MotorCommand {
    decide(history, cfg, rng).command
}
