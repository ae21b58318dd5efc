//! MRT precoding and the additive quantization noise model for the DACs.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::channel::complex_normal;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// DAC resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DacBits {
    Finite(u32),
    /// Perfect converter.
    Infinite,
}

impl std::fmt::Display for DacBits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DacBits::Finite(b) => write!(f, "{b}"),
            DacBits::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for DacBits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Distortion factors for 1..=5 bits.
const RHO_TABLE: [f64; 5] = [0.3646, 0.1175, 0.03454, 0.009497, 0.002499];

/// Inverse signal-to-quantization-noise ratio of a `b`-bit converter.
///
/// Tabulated for `b <= 5`, `(√3 π / 2) 2^(-2b)` above, zero for a perfect DAC.
pub fn rho_of_bits(bits: DacBits) -> Result<f64> {
    match bits {
        DacBits::Infinite => Ok(0.0),
        DacBits::Finite(0) => Err(Error::Domain("DAC bits must be >= 1".into())),
        DacBits::Finite(b @ 1..=5) => Ok(RHO_TABLE[b as usize - 1]),
        DacBits::Finite(b) => Ok(3f64.sqrt() * PI / 2.0 * 2f64.powi(-2 * b as i32)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DacModel {
    pub bits: DacBits,
    pub rho: f64,
    /// `1 - rho`.
    pub alpha: f64,
}

impl DacModel {
    pub fn new(bits: DacBits) -> Result<Self> {
        let rho = rho_of_bits(bits)?;
        Ok(Self { bits, rho, alpha: 1.0 - rho })
    }

    pub fn perfect() -> Self {
        Self { bits: DacBits::Infinite, rho: 0.0, alpha: 1.0 }
    }

    /// `α(1-α)`, the quantization noise scale.
    pub fn distortion(&self) -> f64 {
        self.alpha * (1.0 - self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    /// M x K, column k serves user k.
    pub w: CMatrix,
    /// `Tr(F^H F)`.
    pub trace_norm: f64,
}

/// `W = F^H / sqrt(Tr(F^H F))` for a K x M cascaded channel.
pub fn mrt_precoder(f: &CMatrix) -> Result<Precoder> {
    let trace_norm = f.frobenius_sq();
    if !(trace_norm > 0.0) || !trace_norm.is_finite() {
        return Err(Error::DegenerateChannel(format!("Tr(F^H F) = {trace_norm}")));
    }
    Ok(Precoder { w: f.adjoint().scale(1.0 / trace_norm.sqrt()), trace_norm })
}

/// Diagonal of `α(1-α) diag(W W^H)`.
pub fn quantization_noise_covariance(precoder: &Precoder, dac: &DacModel) -> Vec<f64> {
    let s = dac.distortion();
    (0..precoder.w.rows())
        .map(|m| s * precoder.w.row(m).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect()
}

/// `α x + n_q` with `n_q ~ CN(0, diag(noise_diag))`.
pub fn apply_aqnm(x: &[Complex64], dac: &DacModel, noise_diag: &[f64], rng: &mut impl Rng) -> Result<Vec<Complex64>> {
    if x.len() != noise_diag.len() {
        return Err(Error::InvalidDimension(format!(
            "signal has {} entries, covariance {}",
            x.len(),
            noise_diag.len()
        )));
    }
    if let Some(v) = noise_diag.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidCovariance(format!("negative diagonal entry {v}")));
    }
    if dac.alpha == 1.0 {
        return Ok(x.to_vec());
    }
    Ok(x.iter()
        .zip(noise_diag)
        .map(|(xi, v)| xi * dac.alpha + complex_normal(rng) * v.sqrt())
        .collect())
}
