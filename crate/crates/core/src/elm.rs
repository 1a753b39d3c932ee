//! Extreme Learning Machine used as the visuomotor predictor.
//!
//! The hidden layer `h = g(W x + b)` is drawn once at random and never
//! changes. Only the linear readout `beta` is learned, either in one shot from
//! a batch of samples (`beta = Y H+`) or sample by sample with recursive least
//! squares over the fixed hidden features.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, DenseMatrix};

const DUMP_MAGIC: &[u8; 4] = b"ELM1";

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    /// `1 / (1 + e^-z)`
    #[default]
    Logistic,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElmConfig {
    /// Input width `n`; for visuomotor prediction this is frame size plus 2.
    pub input_dim: usize,
    /// Output width, the frame size `p`.
    pub output_dim: usize,
    pub hidden_count: usize,
    pub activation: Activation,
    pub weight_init_low: f64,
    pub weight_init_high: f64,
    pub bias_init_low: f64,
    pub bias_init_high: f64,
    /// `delta` in `P_0 = I / delta` for the online trainer.
    pub online_init_scale: f64,
    pub seed: u64,
}

impl ElmConfig {
    /// Logistic activation, `W ~ U[-a, a]` with `a = 1/sqrt(input_dim)`,
    /// `b ~ U[0, 1]`, `delta = 1e-8`.
    pub fn new(input_dim: usize, output_dim: usize, hidden_count: usize) -> Self {
        let a = 1.0 / (input_dim.max(1) as f64).sqrt();
        ElmConfig {
            input_dim,
            output_dim,
            hidden_count,
            activation: Activation::Logistic,
            weight_init_low: -a,
            weight_init_high: a,
            bias_init_low: 0.0,
            bias_init_high: 1.0,
            online_init_scale: 1e-8,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_count == 0 {
            return Err(Error::Config(format!(
                "ELM dimensions must be positive (n={}, p={}, hidden={})",
                self.input_dim, self.output_dim, self.hidden_count
            )));
        }
        let finite = [
            self.weight_init_low,
            self.weight_init_high,
            self.bias_init_low,
            self.bias_init_high,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("ELM init ranges must be finite".into()));
        }
        if self.weight_init_low >= self.weight_init_high {
            return Err(Error::Config(format!(
                "weight range [{}, {}] is empty",
                self.weight_init_low, self.weight_init_high
            )));
        }
        if self.bias_init_low > self.bias_init_high {
            return Err(Error::Config(format!(
                "bias range [{}, {}] is empty",
                self.bias_init_low, self.bias_init_high
            )));
        }
        if !(self.online_init_scale > 0.0 && self.online_init_scale.is_finite()) {
            return Err(Error::Config(format!(
                "online init scale must be positive, got {}",
                self.online_init_scale
            )));
        }
        Ok(())
    }
}

/// One supervised sample: `x = [s_t; m_t]`, `y = s_{t+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TrainingPair {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        TrainingPair { x, y }
    }

    /// Concatenates a frame and a motor velocity into the network input.
    pub fn from_frame(frame: &[f64], velocity: [f64; 2], next: &[f64]) -> Self {
        TrainingPair {
            x: concat_input(frame, velocity),
            y: next.to_vec(),
        }
    }
}

pub fn concat_input(frame: &[f64], velocity: [f64; 2]) -> Vec<f64> {
    let mut x = Vec::with_capacity(frame.len() + 2);
    x.extend_from_slice(frame);
    x.extend_from_slice(&velocity);
    x
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElmState {
    activation: Activation,
    weights: DenseMatrix,
    bias: DVector<f64>,
    readout: DenseMatrix,
    inverse_correlation: DenseMatrix,
    samples_seen: u64,
}

impl ElmState {
    /// Draws the random hidden layer and zeroes the readout.
    pub fn init(config: &ElmConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (hidden, n, p) = (config.hidden_count, config.input_dim, config.output_dim);

        // Row-major draw order so the layout of W does not depend on storage.
        let mut w = Vec::with_capacity(hidden * n);
        for _ in 0..hidden * n {
            w.push(rng.random_range(config.weight_init_low..config.weight_init_high));
        }
        let bias = DVector::from_fn(hidden, |_, _| {
            if config.bias_init_low == config.bias_init_high {
                config.bias_init_low
            } else {
                rng.random_range(config.bias_init_low..config.bias_init_high)
            }
        });

        Ok(ElmState {
            activation: config.activation,
            weights: DenseMatrix::from_row_slice(hidden, n, &w)?,
            bias,
            readout: DenseMatrix::zeros(p, hidden),
            inverse_correlation: DenseMatrix::from_matrix(
                DMatrix::identity(hidden, hidden) / config.online_init_scale,
            )?,
            samples_seen: 0,
        })
    }

    /// Builds a state from explicit parameters. The online accumulator is set
    /// to `I / online_init_scale`.
    pub fn from_parts(
        activation: Activation,
        weights: DenseMatrix,
        bias: Vec<f64>,
        readout: DenseMatrix,
        online_init_scale: f64,
    ) -> Result<Self> {
        let hidden = weights.rows();
        if bias.len() != hidden {
            return Err(Error::dimension("hidden bias", hidden, bias.len()));
        }
        if readout.cols() != hidden {
            return Err(Error::dimension("readout columns", hidden, readout.cols()));
        }
        if bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("hidden bias has non-finite entries".into()));
        }
        if !(online_init_scale > 0.0 && online_init_scale.is_finite()) {
            return Err(Error::Config("online init scale must be positive".into()));
        }
        Ok(ElmState {
            activation,
            weights,
            bias: DVector::from_vec(bias),
            readout,
            inverse_correlation: DenseMatrix::from_matrix(
                DMatrix::identity(hidden, hidden) / online_init_scale,
            )?,
            samples_seen: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.readout.rows()
    }

    pub fn hidden_count(&self) -> usize {
        self.weights.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        self.bias.as_slice()
    }

    pub fn readout(&self) -> &DenseMatrix {
        &self.readout
    }

    pub fn inverse_correlation(&self) -> &DenseMatrix {
        &self.inverse_correlation
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    /// `g(W x + b)`.
    pub fn hidden_activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.hidden_vector(x)?.data.into())
    }

    fn hidden_vector(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dimension("network input", self.input_dim(), x.len()));
        }
        let x = DVector::from_column_slice(x);
        let mut h = self.weights.as_matrix() * x + &self.bias;
        let g = self.activation;
        h.apply(|z| *z = g.apply(*z));
        Ok(h)
    }

    /// `beta g(W [s; m] + b)` for a frame and a motor velocity. The output is
    /// the raw linear readout, not clipped to the pixel range.
    pub fn predict(&self, frame: &[f64], velocity: [f64; 2]) -> Result<Vec<f64>> {
        if frame.len() + 2 != self.input_dim() {
            return Err(Error::dimension(
                "sensor frame",
                self.input_dim() - 2,
                frame.len(),
            ));
        }
        self.predict_input(&concat_input(frame, velocity))
    }

    /// Readout for an already concatenated input vector.
    pub fn predict_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.hidden_vector(x)?;
        Ok((self.readout.as_matrix() * h).data.into())
    }

    /// Replaces the readout with the minimum-norm least-squares solution
    /// `beta = Y H+` over `pairs`. Hidden weights and the online accumulator
    /// are left untouched.
    pub fn fit_batch(&mut self, pairs: &[TrainingPair]) -> Result<()> {
        if pairs.is_empty() {
            return Err(Error::Usage(
                "fit_batch needs at least one training pair".into(),
            ));
        }
        let (hidden, p) = (self.hidden_count(), self.output_dim());
        let mut h = DMatrix::zeros(hidden, pairs.len());
        let mut y = DMatrix::zeros(p, pairs.len());
        for (j, pair) in pairs.iter().enumerate() {
            if pair.y.len() != p {
                return Err(Error::dimension("training target", p, pair.y.len()));
            }
            h.set_column(j, &self.hidden_vector(&pair.x)?);
            y.set_column(j, &DVector::from_column_slice(&pair.y));
        }
        let h = DenseMatrix::from_matrix(h)?;
        let y = DenseMatrix::from_matrix(y)?;
        let h_pinv = pseudo_inverse(&h, 0.0)?;
        self.readout = DenseMatrix::from_matrix(y.as_matrix() * h_pinv.as_matrix())?;
        Ok(())
    }

    /// One recursive least-squares step on the fixed hidden features.
    ///
    /// ```text
    /// k    = P h / (1 + h' P h)
    /// beta = beta + (y - beta h) k'
    /// P    = P - k h' P
    /// ```
    ///
    /// On failure the state is left unchanged.
    pub fn update_online(&mut self, pair: &TrainingPair) -> Result<()> {
        let p = self.output_dim();
        if pair.y.len() != p {
            return Err(Error::dimension("training target", p, pair.y.len()));
        }
        let h = self.hidden_vector(&pair.x)?;
        let ph = self.inverse_correlation.as_matrix() * &h;
        let denom = 1.0 + h.dot(&ph);
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::Numeric(format!(
                "online update denominator is {denom} after {} samples",
                self.samples_seen
            )));
        }
        let gain = ph.unscale(denom);
        let y = DVector::from_column_slice(&pair.y);
        let innovation = y - self.readout.as_matrix() * &h;

        let mut readout = self.readout.as_matrix().clone();
        readout.ger(1.0, &innovation, &gain, 1.0);
        // P symmetric, so h' P = (P h)'.
        let mut pm = self.inverse_correlation.as_matrix().clone();
        pm.ger(-1.0, &gain, &ph, 1.0);
        let pm = (&pm + pm.transpose()) * 0.5;

        if readout.iter().chain(pm.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "online update produced non-finite values after {} samples",
                self.samples_seen
            )));
        }
        *self.readout.as_matrix_mut() = readout;
        *self.inverse_correlation.as_matrix_mut() = pm;
        self.samples_seen += 1;
        Ok(())
    }

    /// Writes `W`, `b` and `beta` in the `ELM1` binary layout: magic, then
    /// `n`, `p`, hidden count as little-endian `u64`, then the three arrays as
    /// little-endian `f64` in row-major order.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(DUMP_MAGIC)?;
        for dim in [self.input_dim(), self.output_dim(), self.hidden_count()] {
            out.write_all(&(dim as u64).to_le_bytes())?;
        }
        let values = self
            .weights
            .to_row_major()
            .into_iter()
            .chain(self.bias.iter().copied())
            .chain(self.readout.to_row_major());
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads an `ELM1` dump. The online accumulator restarts at
    /// `I / online_init_scale` and the sample count at zero.
    pub fn read_dump<R: Read>(
        mut input: R,
        activation: Activation,
        online_init_scale: f64,
    ) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut reader = DumpReader {
            bytes: &bytes,
            pos: 0,
        };

        if reader.take(4)? != DUMP_MAGIC {
            return Err(Error::Parse {
                offset: 0,
                message: "missing ELM1 magic".into(),
            });
        }
        let n = reader.dim()?;
        let p = reader.dim()?;
        let hidden = reader.dim()?;
        if n == 0 || p == 0 || hidden == 0 {
            return Err(Error::Parse {
                offset: 4,
                message: "zero dimension in header".into(),
            });
        }
        let weights = reader.floats(hidden * n)?;
        let bias = reader.floats(hidden)?;
        let readout = reader.floats(p * hidden)?;
        if reader.pos != bytes.len() {
            return Err(Error::Parse {
                offset: reader.pos,
                message: "trailing bytes after model payload".into(),
            });
        }
        Self::from_parts(
            activation,
            DenseMatrix::from_row_slice(hidden, n, &weights)?,
            bias,
            DenseMatrix::from_row_slice(p, hidden, &readout)?,
            online_init_scale,
        )
    }
}

struct DumpReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> DumpReader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(Error::Parse {
                offset: self.pos,
                message: format!("truncated model dump, wanted {len} more bytes"),
            }),
        }
    }

    fn dim(&mut self) -> Result<usize> {
        let at = self.pos;
        let raw = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(raw)
            .ok()
            .filter(|&d| d <= 1 << 32)
            .ok_or(Error::Parse {
                offset: at,
                message: format!("implausible dimension {raw}"),
            })
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let len = count.checked_mul(8).ok_or(Error::Parse {
            offset: self.pos,
            message: "payload size overflows".into(),
        })?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Mean-square prediction error `(1/p) * ||predicted - actual||^2`.
pub fn prediction_error(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::dimension(
            "prediction",
            actual.len(),
            predicted.len(),
        ));
    }
    if actual.is_empty() {
        return Err(Error::Usage("prediction error of empty vectors".into()));
    }
    let sum: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / actual.len() as f64)
}
