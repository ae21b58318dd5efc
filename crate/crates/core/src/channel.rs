//! Rician channel draws and the cascaded BS-RIS-user channel.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::{los_components, LinkGains, LosComponents};
use crate::linalg::CMatrix;
use crate::phases::PhaseVector;

/// `(K/(K+1), 1/(K+1))`, the LoS and scattered power fractions of a Rician
/// factor. An infinite factor is pure LoS.
pub fn rician_split(factor: f64) -> (f64, f64) {
    if factor.is_infinite() {
        (1.0, 0.0)
    } else {
        (factor / (factor + 1.0), 1.0 / (factor + 1.0))
    }
}

/// Circularly-symmetric `CN(0, 1)` sample.
pub fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// One draw of `G` (N x M) and `H = [h_1 .. h_K]` (N x K).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g: CMatrix,
    pub h: CMatrix,
}

/// Samples channels for a fixed scenario; the LoS parts and Rician weights
/// are computed once.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    los: LosComponents,
    g_los: f64,
    g_nlos: f64,
    h_los: Vec<f64>,
    h_nlos: Vec<f64>,
}

impl ChannelSampler {
    pub fn new(config: &ScenarioConfig, gains: &LinkGains) -> Result<Self> {
        config.validate()?;
        if gains.beta.len() != config.k {
            return Err(Error::InvalidDimension(format!(
                "{} path losses for K = {} users",
                gains.beta.len(),
                config.k
            )));
        }
        let los = los_components(config)?;
        let (a, b) = rician_split(config.k_g);
        let se = gains.epsilon.sqrt();
        let (h_los, h_nlos) = config
            .k_users
            .iter()
            .zip(&gains.beta)
            .map(|(&kk, &beta)| {
                let (c, d) = rician_split(kk);
                (beta.sqrt() * c.sqrt(), beta.sqrt() * d.sqrt())
            })
            .unzip();
        Ok(Self {
            los,
            g_los: se * a.sqrt(),
            g_nlos: se * b.sqrt(),
            h_los,
            h_nlos,
        })
    }

    pub fn los(&self) -> &LosComponents {
        &self.los
    }

    pub fn sample(&self, rng: &mut impl Rng) -> ChannelRealization {
        let gb = &self.los.g_bar;
        let g = CMatrix::from_fn(gb.rows(), gb.cols(), |n, m| {
            let s = complex_normal(rng);
            gb[(n, m)] * self.g_los + s * self.g_nlos
        });
        let hb = &self.los.h_bar;
        let h = CMatrix::from_fn(hb.rows(), hb.cols(), |n, k| {
            let s = complex_normal(rng);
            hb[(n, k)] * self.h_los[k] + s * self.h_nlos[k]
        });
        ChannelRealization { g, h }
    }
}

/// Single Rician draw of both hops.
pub fn sample_channel(config: &ScenarioConfig, gains: &LinkGains, rng: &mut impl Rng) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(config, gains)?.sample(rng))
}

/// `F = H^H Φ G` (K x M) with unit-amplitude reflection.
pub fn cascaded_channel(realization: &ChannelRealization, phases: &PhaseVector) -> Result<CMatrix> {
    let (g, h) = (&realization.g, &realization.h);
    let n = g.rows();
    if h.rows() != n || phases.len() != n {
        return Err(Error::InvalidDimension(format!(
            "G has {} rows, H has {}, phase vector has {}",
            n,
            h.rows(),
            phases.len()
        )));
    }
    let rotation: Vec<Complex64> = phases.as_slice().iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
    let mut f = CMatrix::zeros(h.cols(), g.cols());
    for k in 0..h.cols() {
        let row = f.row_mut(k);
        for (nn, rot) in rotation.iter().enumerate() {
            let u = h[(nn, k)].conj() * rot;
            for (acc, gv) in row.iter_mut().zip(g.row(nn)) {
                *acc += u * gv;
            }
        }
    }
    Ok(f)
}
