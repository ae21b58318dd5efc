//! RIS phase vectors and the discrete phase grid.

use std::f64::consts::TAU;

use rand::Rng;
use serde::Serialize;

use crate::config::wrap_angle;
use crate::error::{Error, Result};

/// Phase constraint at the RIS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhaseRegime {
    Continuous,
    /// `2^B` uniformly spaced phases.
    Discrete(u32),
}

impl std::fmt::Display for PhaseRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhaseRegime::Continuous => write!(f, "continuous"),
            PhaseRegime::Discrete(b) => write!(f, "{b}"),
        }
    }
}

/// RIS phase shifts, every entry in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseVector {
    theta: Vec<f64>,
    regime: PhaseRegime,
}

impl PhaseVector {
    /// Continuous phases; inputs are wrapped into `[0, 2π)`.
    pub fn continuous(theta: impl IntoIterator<Item = f64>) -> Self {
        Self {
            theta: theta.into_iter().map(wrap_angle).collect(),
            regime: PhaseRegime::Continuous,
        }
    }

    /// Discrete phases given as grid indices `m` (value `2πm/2^B`).
    pub fn from_grid_indices(indices: &[u64], bits: u32) -> Result<Self> {
        let levels = grid_levels(bits)?;
        let theta = indices
            .iter()
            .map(|&m| {
                if m >= levels {
                    Err(Error::Domain(format!("grid index {m} >= 2^{bits}")))
                } else {
                    Ok(grid_value(m, levels))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { theta, regime: PhaseRegime::Discrete(bits) })
    }

    pub fn zeros(n: usize) -> Self {
        Self::continuous(vec![0.0; n])
    }

    /// Uniform random continuous phases.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        Self::continuous((0..n).map(|_| rng.random::<f64>() * TAU))
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn regime(&self) -> PhaseRegime {
        self.regime
    }

    /// Adds `offset` to every phase, keeping the regime.
    pub fn rotated(&self, offset: f64) -> Self {
        Self {
            theta: self.theta.iter().map(|t| wrap_angle(t + offset)).collect(),
            regime: self.regime,
        }
    }
}

fn grid_levels(bits: u32) -> Result<u64> {
    if bits == 0 || bits > 32 {
        return Err(Error::Domain(format!("phase bits must be in 1..=32 (got {bits})")));
    }
    Ok(1u64 << bits)
}

fn grid_value(m: u64, levels: u64) -> f64 {
    TAU * m as f64 / levels as f64
}

/// Maps every phase onto the nearest point of `{2πm/2^B}` in circular
/// distance. Ties go to the smaller grid value.
pub fn project_discrete(phases: &PhaseVector, bits: u32) -> Result<PhaseVector> {
    let levels = grid_levels(bits)?;
    let step = TAU / levels as f64;
    let indices: Vec<u64> = phases
        .as_slice()
        .iter()
        .map(|&t| {
            let t = wrap_angle(t);
            let lo = ((t / step).floor() as u64).min(levels - 1);
            let hi = (lo + 1) % levels;
            let d_lo = circular_distance(t, grid_value(lo, levels));
            let d_hi = circular_distance(t, grid_value(hi, levels));
            if (d_lo - d_hi).abs() <= 1e-12 * TAU {
                lo.min(hi)
            } else if d_lo < d_hi {
                lo
            } else {
                hi
            }
        })
        .collect();
    PhaseVector::from_grid_indices(&indices, bits)
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}
