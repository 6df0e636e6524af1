use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::image::Image;
use super::ops::{gaussian_blur, gaussian_noise, image_shift, ImageShiftParams};
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftFamily {
    GaussianNoise,
    GaussianBlur,
    ImageShift,
}

impl ShiftFamily {
    pub const ALL: [ShiftFamily; 3] = [
        ShiftFamily::GaussianNoise,
        ShiftFamily::GaussianBlur,
        ShiftFamily::ImageShift,
    ];
}

impl fmt::Display for ShiftFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShiftFamily::GaussianNoise => "gaussian_noise",
            ShiftFamily::GaussianBlur => "gaussian_blur",
            ShiftFamily::ImageShift => "image_shift",
        })
    }
}

impl FromStr for ShiftFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_noise" | "gn" => Ok(ShiftFamily::GaussianNoise),
            "gaussian_blur" | "gb" => Ok(ShiftFamily::GaussianBlur),
            "image_shift" | "is" => Ok(ShiftFamily::ImageShift),
            other => Err(Error::input(format!("unknown shift kind '{other}'"))),
        }
    }
}

/// A shift family with explicit parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftKind {
    GaussianNoise { sigma: f64 },
    GaussianBlur { sigma: f64 },
    ImageShift(ImageShiftParams),
}

impl ShiftKind {
    pub fn family(&self) -> ShiftFamily {
        match self {
            ShiftKind::GaussianNoise { .. } => ShiftFamily::GaussianNoise,
            ShiftKind::GaussianBlur { .. } => ShiftFamily::GaussianBlur,
            ShiftKind::ImageShift(_) => ShiftFamily::ImageShift,
        }
    }

    fn magnitudes(&self) -> Vec<f64> {
        match self {
            ShiftKind::GaussianNoise { sigma } | ShiftKind::GaussianBlur { sigma } => vec![*sigma],
            ShiftKind::ImageShift(p) => vec![
                p.max_rotation_deg,
                p.max_translate_frac,
                p.max_zoom_frac,
                p.max_shear_deg,
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.magnitudes().iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::config(format!("shift parameters must be finite and >= 0: {self}")))
        }
    }
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShiftKind::GaussianNoise { sigma } => write!(f, "gaussian_noise(sigma={sigma})"),
            ShiftKind::GaussianBlur { sigma } => write!(f, "gaussian_blur(sigma={sigma})"),
            ShiftKind::ImageShift(p) => write!(
                f,
                "image_shift(rot={},trans={},zoom={},shear={})",
                p.max_rotation_deg, p.max_translate_frac, p.max_zoom_frac, p.max_shear_deg
            ),
        }
    }
}

/// Intensity level I..VI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Intensity(u8);

impl Intensity {
    pub const COUNT: usize = 6;
    const NAMES: [&'static str; 6] = ["I", "II", "III", "IV", "V", "VI"];

    pub fn new(level: u8) -> Result<Self> {
        if (1..=6).contains(&level) {
            Ok(Intensity(level))
        } else {
            Err(Error::input(format!("intensity level {level} outside I..VI")))
        }
    }

    pub fn all() -> impl Iterator<Item = Intensity> {
        (1..=6).map(Intensity)
    }

    /// 1-based level.
    pub fn level(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(Self::NAMES[self.0 as usize - 1])
    }
}

impl FromStr for Intensity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(pos) = Self::NAMES.iter().position(|n| n.eq_ignore_ascii_case(t)) {
            return Ok(Intensity(pos as u8 + 1));
        }
        match t.parse::<u8>() {
            Ok(v) => Intensity::new(v),
            Err(_) => Err(Error::input(format!("unknown intensity level '{s}'"))),
        }
    }
}

impl TryFrom<String> for Intensity {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Intensity> for String {
    fn from(i: Intensity) -> String {
        i.to_string()
    }
}

/// Six parameter settings per shift family, from barely visible to severe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityLadder {
    pub gaussian_noise: Vec<f64>,
    pub gaussian_blur: Vec<f64>,
    pub image_shift: Vec<ImageShiftParams>,
}

fn is(rot: f64, trans: f64, zoom: f64, shear: f64) -> ImageShiftParams {
    ImageShiftParams {
        max_rotation_deg: rot,
        max_translate_frac: trans,
        max_zoom_frac: zoom,
        max_shear_deg: shear,
    }
}

impl IntensityLadder {
    /// Pinned defaults for 28x28 grayscale digits.
    pub fn mnist() -> Self {
        IntensityLadder {
            gaussian_noise: vec![0.02, 0.05, 0.1, 0.2, 0.3, 0.45],
            gaussian_blur: vec![0.3, 0.5, 0.7, 0.9, 1.2, 1.5],
            image_shift: vec![
                is(2.0, 0.01, 0.01, 2.0),
                is(5.0, 0.03, 0.03, 5.0),
                is(10.0, 0.05, 0.05, 10.0),
                is(15.0, 0.08, 0.08, 15.0),
                is(25.0, 0.12, 0.12, 25.0),
                is(40.0, 0.2, 0.2, 40.0),
            ],
        }
    }

    /// Built-in ladder for a dataset name.
    pub fn for_dataset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "mnist" | "fmnist" | "fashion_mnist" => Ok(IntensityLadder::mnist()),
            other => Err(Error::config(format!("no built-in intensity ladder for '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lens = [
            self.gaussian_noise.len(),
            self.gaussian_blur.len(),
            self.image_shift.len(),
        ];
        if lens.iter().any(|&l| l != Intensity::COUNT) {
            return Err(Error::config(format!(
                "every ladder needs {} levels, got {lens:?}",
                Intensity::COUNT
            )));
        }
        for family in ShiftFamily::ALL {
            for level in Intensity::all() {
                self.params(family, level).validate()?;
            }
        }
        Ok(())
    }

    pub fn params(&self, family: ShiftFamily, level: Intensity) -> ShiftKind {
        let k = level.level() as usize - 1;
        match family {
            ShiftFamily::GaussianNoise => ShiftKind::GaussianNoise {
                sigma: self.gaussian_noise[k],
            },
            ShiftFamily::GaussianBlur => ShiftKind::GaussianBlur {
                sigma: self.gaussian_blur[k],
            },
            ShiftFamily::ImageShift => ShiftKind::ImageShift(self.image_shift[k]),
        }
    }
}

/// Explicit parameters of `family` at `level` for the named dataset's built-in ladder.
pub fn intensity_ladder(family: ShiftFamily, level: Intensity, dataset: &str) -> Result<ShiftKind> {
    Ok(IntensityLadder::for_dataset(dataset)?.params(family, level))
}

/// A fully specified dataset corruption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    pub intensity: Option<Intensity>,
    /// Fraction of images that are corrupted.
    pub delta: f64,
    pub seed: u64,
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::config(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        self.kind.validate()
    }

    /// `round_half_even(delta * n)`.
    pub fn shifted_count(&self, n: usize) -> usize {
        (self.delta * n as f64).round_ties_even() as usize
    }

    fn transform(&self, img: &Image, index: u64) -> Image {
        let mut rng = substream(self.seed, Domain::ShiftImage, index);
        match &self.kind {
            ShiftKind::GaussianNoise { sigma } => gaussian_noise(img, *sigma, &mut rng),
            ShiftKind::GaussianBlur { sigma } => gaussian_blur(img, *sigma),
            ShiftKind::ImageShift(p) => image_shift(img, p, &mut rng),
        }
    }
}

impl fmt::Display for ShiftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(level) = self.intensity {
            write!(f, "@{level}")?;
        }
        write!(f, ",delta={},seed={}", self.delta, self.seed)
    }
}

/// Indices of the images that `spec` corrupts, in increasing order.
pub fn shifted_indices(n: usize, spec: &ShiftSpec) -> Vec<usize> {
    let count = spec.shifted_count(n).min(n);
    let mut rng = substream(spec.seed, Domain::ShiftSelect, 0);
    let mut idx = index::sample(&mut rng, n, count).into_vec();
    idx.sort_unstable();
    idx
}

/// Corrupts a seeded random subset of `round_half_even(delta * N)` images.
/// Other images are returned untouched; order is preserved.
pub fn apply_shift(dataset: &[Image], spec: &ShiftSpec) -> Result<Vec<Image>> {
    spec.validate()?;
    let mut selected = vec![false; dataset.len()];
    for i in shifted_indices(dataset.len(), spec) {
        selected[i] = true;
    }
    Ok(dataset
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            if selected[i] {
                spec.transform(img, i as u64)
            } else {
                img.clone()
            }
        })
        .collect())
}
