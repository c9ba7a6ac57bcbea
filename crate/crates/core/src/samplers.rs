//! Samplers for three group-invariant benchmark distributions.
//!
//! * `wss1d:r=R`: on [0, 1): x = ξ^{1/3}/R + η, η uniform on {0, 1/R, …}.
//!   Invariant under translation by 1/R mod 1.
//! * `mog8:std=S`: mixture of 8 isotropic Gaussians centred on the 8th roots
//!   of unity. Invariant under rotation by 2π/8.
//! * `disk:l=L`: on the unit disk: radius √ξ, angle (2π/L)θ^{1/3} + 2πk/L,
//!   k uniform on {0, …, L−1}. Invariant under rotation by 2π/L.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

pub const DEFAULT_MOG_STD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplerKind {
    Wss1D { r: usize },
    MixtureOfGaussians8 { std: f64 },
    Disk { l: usize },
}

impl SamplerKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplerKind::Wss1D { r: 0 } => Err(Error::arg("wss1d needs r >= 1")),
            SamplerKind::Disk { l: 0 } => Err(Error::arg("disk needs l >= 1")),
            SamplerKind::MixtureOfGaussians8 { std } if !(std > 0.0 && std.is_finite()) => {
                Err(Error::arg("mog8 needs a positive finite std"))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SamplerKind::Wss1D { .. } => 1,
            _ => 2,
        }
    }

    /// Draw `n` points from the given stream.
    pub fn sample_with(&self, n: usize, rng: &mut StreamRng) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::arg("sample size must be at least 1"));
        }
        Ok(match *self {
            SamplerKind::Wss1D { r } => (0..n).map(|_| vec![wss1d_point(r, rng)]).collect(),
            SamplerKind::MixtureOfGaussians8 { std } => {
                (0..n).map(|_| mog8_point(std, rng)).collect()
            }
            SamplerKind::Disk { l } => (0..n).map(|_| disk_point(l, rng)).collect(),
        })
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerKind::Wss1D { r } => write!(f, "wss1d:r={r}"),
            SamplerKind::MixtureOfGaussians8 { std } => write!(f, "mog8:std={std}"),
            SamplerKind::Disk { l } => write!(f, "disk:l={l}"),
        }
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    /// Parses `wss1d:r=4`, `mog8:std=0.05` (or bare `mog8`), `disk:l=16`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let param = |key: &str| -> Result<Option<&str>> {
            if params.is_empty() {
                return Ok(None);
            }
            match params.split_once('=') {
                Some((k, v)) if k.trim() == key => Ok(Some(v.trim())),
                _ => Err(Error::arg(format!("expected '{key}=<value>' in '{s}'"))),
            }
        };
        let bad = |what: &str| Error::arg(format!("invalid {what} in '{s}'"));
        let kind = match name {
            "wss1d" => SamplerKind::Wss1D {
                r: param("r")?
                    .ok_or_else(|| bad("r"))?
                    .parse()
                    .map_err(|_| bad("r"))?,
            },
            "mog8" => SamplerKind::MixtureOfGaussians8 {
                std: match param("std")? {
                    Some(v) => v.parse().map_err(|_| bad("std"))?,
                    None => DEFAULT_MOG_STD,
                },
            },
            "disk" => SamplerKind::Disk {
                l: param("l")?
                    .ok_or_else(|| bad("l"))?
                    .parse()
                    .map_err(|_| bad("l"))?,
            },
            _ => return Err(Error::arg(format!("unknown distribution '{name}'"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// A distribution together with the seed of its stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn new(kind: SamplerKind, seed: u64) -> Self {
        SamplerSpec { kind, seed }
    }

    pub fn sample(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        self.kind.sample_with(n, &mut rng::stream(self.seed, 0))
    }
}

pub fn sample_wss1d(r: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    SamplerSpec::new(SamplerKind::Wss1D { r }, seed).sample(n)
}

pub fn sample_mog8(n: usize, std: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    SamplerSpec::new(SamplerKind::MixtureOfGaussians8 { std }, seed).sample(n)
}

pub fn sample_disk(l: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    SamplerSpec::new(SamplerKind::Disk { l }, seed).sample(n)
}

/// Largest double below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

fn wss1d_point(r: usize, rng: &mut StreamRng) -> f64 {
    let xi = rng::uniform(rng);
    let eta = rng::uniform_index(rng, r);
    let x = (xi.cbrt() + eta as f64) / r as f64;
    x.min(BELOW_ONE)
}

fn mog8_point(std: f64, rng: &mut StreamRng) -> Vec<f64> {
    let k = rng::uniform_index(rng, 8);
    let angle = TAU * k as f64 / 8.0;
    let zx: f64 = StandardNormal.sample(rng);
    let zy: f64 = StandardNormal.sample(rng);
    vec![angle.cos() + std * zx, angle.sin() + std * zy]
}

fn disk_point(l: usize, rng: &mut StreamRng) -> Vec<f64> {
    let xi = rng::uniform(rng);
    let theta = rng::uniform(rng);
    let k = rng::uniform_index(rng, l);
    let sector = TAU / l as f64;
    let angle = sector * theta.cbrt() + sector * k as f64;
    let radius = xi.sqrt();
    vec![radius * angle.cos(), radius * angle.sin()]
}
