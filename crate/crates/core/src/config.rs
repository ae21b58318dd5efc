//! Physical and system parameters of one scenario.

use std::f64::consts::TAU;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phases::PhaseRegime;
use crate::precoding::DacBits;
use crate::rng::{substream, Stream};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// All scenario parameters in linear units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    /// BS antennas.
    pub m: usize,
    /// RIS elements.
    pub n: usize,
    /// Users.
    pub k: usize,
    /// Transmit power, watts.
    pub power_w: f64,
    /// Noise power, watts.
    pub noise_w: f64,
    /// Rician factor of the BS-RIS link.
    pub k_g: f64,
    /// Rician factor of each RIS-user link.
    pub k_users: Vec<f64>,
    /// AoA at the RIS.
    pub phi_r: f64,
    /// AoD at the BS.
    pub phi_t: f64,
    /// User AoDs at the RIS.
    pub phi_users: Vec<f64>,
    pub d_over_lambda: f64,
    pub bs_pos: [f64; 2],
    pub ris_pos: [f64; 2],
    pub user_center: [f64; 2],
    pub user_radius: f64,
    pub pl0_db: f64,
    pub d0: f64,
    pub kappa_bi: f64,
    pub kappa_iu: f64,
    pub dac: DacBits,
    pub ris: PhaseRegime,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Reference scenario: BS at the origin, RIS at (5, 2), six users on a
    /// 4 m disk around (400, 0), M = 64, N = 16, 30 dBm, -104 dBm noise,
    /// K_G = 1, K_k = 10, 1-bit DACs, 2-bit RIS phases.
    ///
    /// The RIS AoA and BS AoD default to the geometric line of sight between
    /// the two arrays. User AoDs are drawn once from the seed.
    pub fn reference(seed: u64) -> Self {
        let (dx, dy) = (5.0, 2.0);
        let mut cfg = Self {
            m: 64,
            n: 16,
            k: 6,
            power_w: dbm_to_watts(30.0),
            noise_w: dbm_to_watts(-104.0),
            k_g: 1.0,
            k_users: vec![10.0; 6],
            phi_r: wrap_angle(f64::atan2(-dy, -dx)),
            phi_t: wrap_angle(f64::atan2(dy, dx)),
            phi_users: Vec::new(),
            d_over_lambda: 0.5,
            bs_pos: [0.0, 0.0],
            ris_pos: [dx, dy],
            user_center: [400.0, 0.0],
            user_radius: 4.0,
            pl0_db: -30.0,
            d0: 1.0,
            kappa_bi: 2.8,
            kappa_iu: 2.8,
            dac: DacBits::Finite(1),
            ris: PhaseRegime::Discrete(2),
            seed,
        };
        cfg.phi_users = draw_user_angles(seed, cfg.k);
        cfg
    }

    /// Changes the number of users; AoDs are redrawn from the seed and the
    /// per-user Rician factors take the value of the first user.
    pub fn with_users(mut self, k: usize) -> Self {
        let factor = self.k_users.first().copied().unwrap_or(10.0);
        self.k = k;
        self.k_users = vec![factor; k];
        self.phi_users = draw_user_angles(self.seed, k);
        self
    }

    pub fn with_ris_elements(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_antennas(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_power_dbm(mut self, dbm: f64) -> Self {
        self.power_w = dbm_to_watts(dbm);
        self
    }

    pub fn with_dac(mut self, dac: DacBits) -> Self {
        self.dac = dac;
        self
    }

    pub fn with_rician(mut self, k_g: f64, k_user: f64) -> Self {
        self.k_g = k_g;
        self.k_users = vec![k_user; self.k];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.m == 0 {
            return bad("M must be >= 1".into());
        }
        if self.n == 0 {
            return bad("N must be >= 1".into());
        }
        if self.k == 0 {
            return bad("K must be >= 1".into());
        }
        if !(self.power_w > 0.0) || !self.power_w.is_finite() {
            return bad(format!("P must be > 0 (got {} W)", self.power_w));
        }
        if !(self.noise_w > 0.0) || !self.noise_w.is_finite() {
            return bad(format!("sigma2 must be > 0 (got {} W)", self.noise_w));
        }
        if !(self.k_g >= 0.0) {
            return bad(format!("K_G must be >= 0 (got {})", self.k_g));
        }
        if self.k_users.len() != self.k {
            return bad(format!("K_k has {} entries, expected K = {}", self.k_users.len(), self.k));
        }
        if let Some(x) = self.k_users.iter().find(|x| !(**x >= 0.0)) {
            return bad(format!("K_k entries must be >= 0 (got {x})"));
        }
        if self.phi_users.len() != self.k {
            return bad(format!("phi_kt has {} entries, expected K = {}", self.phi_users.len(), self.k));
        }
        let angles = [self.phi_r, self.phi_t].into_iter().chain(self.phi_users.iter().copied());
        for a in angles {
            if !(0.0..TAU).contains(&a) {
                return bad(format!("angle {a} outside [0, 2pi)"));
            }
        }
        if !(self.d_over_lambda > 0.0) {
            return bad(format!("d_over_lambda must be > 0 (got {})", self.d_over_lambda));
        }
        if !(self.d0 > 0.0) {
            return bad(format!("d0 must be > 0 (got {})", self.d0));
        }
        if !(self.user_radius >= 0.0) {
            return bad(format!("user_radius must be >= 0 (got {})", self.user_radius));
        }
        if let DacBits::Finite(0) = self.dac {
            return bad("b must be >= 1 or inf".into());
        }
        if let PhaseRegime::Discrete(0) = self.ris {
            return bad("B must be >= 1 or continuous".into());
        }
        Ok(())
    }
}

/// User AoDs at the RIS, uniform on `[0, 2π)`, frozen per seed.
pub fn draw_user_angles(seed: u64, k: usize) -> Vec<f64> {
    let mut rng = substream(seed, Stream::Angles, 0);
    (0..k).map(|_| wrap_angle(rng.random::<f64>() * TAU)).collect()
}
