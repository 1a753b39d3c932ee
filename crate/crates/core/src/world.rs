//! The simulated environment: a static grayscale image, a camera window that
//! moves over it one pixel at a time, and additive sensor noise.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pgm;

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl WorldImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config("image dimensions must be positive".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::dimension(
                "image pixels",
                width * height,
                pixels.len(),
            ));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(WorldImage {
            width,
            height,
            pixels,
        })
    }

    /// Parses PGM bytes (`P2` or `P5`).
    pub fn load(bytes: &[u8]) -> Result<Self> {
        pgm::parse_pgm(bytes)
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::load(&std::fs::read(path)?)
    }

    /// Smooth test scene: a normalized mixture of oriented sinusoids with
    /// wavelengths between 48 and 192 pixels.
    pub fn synthetic(width: usize, height: usize, seed: u64) -> Result<Self> {
        const COMPONENTS: usize = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves: Vec<(f64, f64, f64, f64)> = (0..COMPONENTS)
            .map(|_| {
                let amplitude = rng.random_range(0.5..1.0);
                let wavelength: f64 = rng.random_range(48.0..192.0);
                let angle = rng.random_range(0.0..PI);
                let phase = rng.random_range(0.0..2.0 * PI);
                let k = 2.0 * PI / wavelength;
                (amplitude, k * angle.cos(), k * angle.sin(), phase)
            })
            .collect();

        let mut raw = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (xf, yf) = (x as f64, y as f64);
                let v: f64 = waves
                    .iter()
                    .map(|&(a, kx, ky, phi)| a * (kx * xf + ky * yf + phi).sin())
                    .sum();
                raw.push(v);
            }
        }
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let pixels = raw
            .into_iter()
            .map(|v| ((v - lo) / span).clamp(0.0, 1.0))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Noise-free copy of the camera window, row-major.
    pub fn window(&self, cam: &CameraState) -> Vec<f64> {
        let mut out = Vec::with_capacity(cam.width * cam.height);
        for row in cam.y..cam.y + cam.height {
            let start = row * self.width + cam.x;
            out.extend_from_slice(&self.pixels[start..start + cam.width]);
        }
        out
    }
}

/// The camera window, located by its top-left pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CameraState {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl CameraState {
    pub fn new(
        world: &WorldImage,
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let cam = CameraState {
            x,
            y,
            width,
            height,
        };
        if width == 0 || height == 0 {
            return Err(Error::Config("camera window must be non-empty".into()));
        }
        if !cam.fits(world) {
            return Err(Error::Config(format!(
                "camera {width}x{height} at ({x}, {y}) does not fit a {}x{} image",
                world.width, world.height
            )));
        }
        Ok(cam)
    }

    /// Window of the given size placed in the middle of the image.
    pub fn centered(world: &WorldImage, width: usize, height: usize) -> Result<Self> {
        if width > world.width || height > world.height {
            return Err(Error::Config(format!(
                "camera {width}x{height} larger than {}x{} image",
                world.width, world.height
            )));
        }
        Self::new(
            world,
            (world.width - width) / 2,
            (world.height - height) / 2,
            width,
            height,
        )
    }

    pub fn fits(&self, world: &WorldImage) -> bool {
        self.x + self.width <= world.width && self.y + self.height <= world.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Window center in image coordinates.
    pub fn center(&self) -> (usize, usize) {
        (self.x + self.width / 2, self.y + self.height / 2)
    }
}

/// The five discrete camera movements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MotorCommand {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl MotorCommand {
    pub const ALL: [MotorCommand; 5] = [
        MotorCommand::Up,
        MotorCommand::Down,
        MotorCommand::Left,
        MotorCommand::Right,
        MotorCommand::Stay,
    ];

    /// Pixel velocity `(vx, vy)`; `y` grows downward.
    pub fn velocity(self) -> (i32, i32) {
        match self {
            MotorCommand::Up => (0, -1),
            MotorCommand::Down => (0, 1),
            MotorCommand::Left => (-1, 0),
            MotorCommand::Right => (1, 0),
            MotorCommand::Stay => (0, 0),
        }
    }

    /// Velocity as network input.
    pub fn motor_input(self) -> [f64; 2] {
        let (vx, vy) = self.velocity();
        [f64::from(vx), f64::from(vy)]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> char {
        match self {
            MotorCommand::Up => 'U',
            MotorCommand::Down => 'D',
            MotorCommand::Left => 'L',
            MotorCommand::Right => 'R',
            MotorCommand::Stay => 'S',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        MotorCommand::ALL.into_iter().find(|m| m.code() == c)
    }
}

impl fmt::Display for MotorCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl FromStr for MotorCommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let cmd = match lower.as_str() {
            "u" | "up" => MotorCommand::Up,
            "d" | "down" => MotorCommand::Down,
            "l" | "left" => MotorCommand::Left,
            "r" | "right" => MotorCommand::Right,
            "s" | "stay" => MotorCommand::Stay,
            _ => return Err(Error::Config(format!("unknown motor command {s:?}"))),
        };
        Ok(cmd)
    }
}

/// Moves the camera by the command's velocity, clamping so the window stays
/// inside the image.
pub fn apply_motor(world: &WorldImage, cam: &CameraState, cmd: MotorCommand) -> CameraState {
    let (vx, vy) = cmd.velocity();
    let max_x = (world.width - cam.width) as i64;
    let max_y = (world.height - cam.height) as i64;
    CameraState {
        x: (cam.x as i64 + i64::from(vx)).clamp(0, max_x) as usize,
        y: (cam.y as i64 + i64::from(vy)).clamp(0, max_y) as usize,
        ..*cam
    }
}

/// Additive white Gaussian sensor noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(NoiseModel { sigma })
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { sigma: 0.01 }
    }
}

/// Flattened camera reading.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorFrame(pub Vec<f64>);

impl SensorFrame {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Reads the camera window, adds `N(0, sigma^2)` noise per pixel and clamps to
/// `[0, 1]`. With `sigma == 0` no random numbers are drawn.
pub fn observe<R: Rng + ?Sized>(
    world: &WorldImage,
    cam: &CameraState,
    noise: &NoiseModel,
    rng: &mut R,
) -> SensorFrame {
    let mut values = world.window(cam);
    if noise.sigma > 0.0 {
        let normal = Normal::new(0.0, noise.sigma).expect("sigma validated non-negative");
        for v in &mut values {
            *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
        }
    }
    SensorFrame(values)
}
