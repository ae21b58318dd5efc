//! Scene geometry: ULA responses, path loss, user drops and LoS components.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng::{substream, SimRng, Stream};

/// Large-scale gains of the two hops.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkGains {
    /// BS-RIS path loss, linear.
    pub epsilon: f64,
    /// RIS-user path losses, linear.
    pub beta: Vec<f64>,
}

/// One user drop: positions and the resulting gains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    pub gains: LinkGains,
    pub user_positions: Vec<[f64; 2]>,
}

/// Response of an `x`-element ULA: entry `i` is `exp(j 2π (d/λ) i sin(angle))`.
pub fn array_response(x: usize, angle: f64, d_over_lambda: f64) -> Result<Vec<Complex64>> {
    if x == 0 {
        return Err(Error::InvalidDimension("array size must be >= 1".into()));
    }
    let step = TAU * d_over_lambda * angle.sin();
    Ok((0..x)
        .map(|i| {
            if i == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, step * i as f64)
            }
        })
        .collect())
}

/// `10^(pl0_db/10) (D/d0)^(-kappa)`.
pub fn path_loss(distance: f64, pl0_db: f64, d0: f64, kappa: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("link distance must be > 0 (got {distance})")));
    }
    if !(d0 > 0.0) {
        return Err(Error::Domain(format!("reference distance must be > 0 (got {d0})")));
    }
    Ok(10f64.powf(pl0_db / 10.0) * (distance / d0).powf(-kappa))
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Drops users uniformly on the configured disk and computes the gains.
pub fn build_scene(config: &ScenarioConfig, rng: &mut SimRng) -> Result<Scene> {
    let user_positions: Vec<[f64; 2]> = (0..config.k)
        .map(|_| {
            let r = config.user_radius * rng.random::<f64>().sqrt();
            let a = TAU * rng.random::<f64>();
            [config.user_center[0] + r * a.cos(), config.user_center[1] + r * a.sin()]
        })
        .collect();
    let epsilon = path_loss(
        distance(config.bs_pos, config.ris_pos),
        config.pl0_db,
        config.d0,
        config.kappa_bi,
    )?;
    let beta = user_positions
        .iter()
        .map(|&p| path_loss(distance(config.ris_pos, p), config.pl0_db, config.d0, config.kappa_iu))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scene { gains: LinkGains { epsilon, beta }, user_positions })
}

/// Scene for drop `drop` of the configured seed.
pub fn scene_for_drop(config: &ScenarioConfig, drop: u64) -> Result<Scene> {
    build_scene(config, &mut substream(config.seed, Stream::Scene, drop))
}

/// LoS parts of both hops.
#[derive(Debug, Clone)]
pub struct LosComponents {
    /// `a_N(φ_r) a_M^H(φ_t)`, N x M.
    pub g_bar: CMatrix,
    /// Column k is `a_N(φ_kt)`, N x K.
    pub h_bar: CMatrix,
}

pub fn los_components(config: &ScenarioConfig) -> Result<LosComponents> {
    let a_r = array_response(config.n, config.phi_r, config.d_over_lambda)?;
    let a_t = array_response(config.m, config.phi_t, config.d_over_lambda)?;
    let g_bar = CMatrix::from_fn(config.n, config.m, |n, m| a_r[n] * a_t[m].conj());
    let cols = config
        .phi_users
        .iter()
        .map(|&phi| array_response(config.n, phi, config.d_over_lambda))
        .collect::<Result<Vec<_>>>()?;
    let h_bar = CMatrix::from_fn(config.n, config.k, |n, k| cols[k][n]);
    Ok(LosComponents { g_bar, h_bar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn array_response_examples() {
        assert_eq!(array_response(1, 0.3, 0.7).unwrap(), vec![Complex64::new(1.0, 0.0)]);
        let flat = array_response(4, 0.0, 0.5).unwrap();
        assert!(flat.iter().all(|z| close(*z, Complex64::new(1.0, 0.0))));
        let broadside = array_response(3, PI / 2.0, 0.5).unwrap();
        let expect = [1.0, -1.0, 1.0];
        for (z, e) in broadside.iter().zip(expect) {
            assert!(close(*z, Complex64::new(e, 0.0)));
        }
        assert!(matches!(array_response(0, 0.0, 0.5), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn path_loss_examples() {
        assert!((path_loss(1.0, -30.0, 1.0, 3.3).unwrap() - 1e-3).abs() < 1e-18);
        let d = 29f64.sqrt();
        let expect = 1e-3 * 29f64.powf(-1.4);
        assert!((path_loss(d, -30.0, 1.0, 2.8).unwrap() / expect - 1.0).abs() < 1e-12);
        assert!((path_loss(100.0, -30.0, 1.0, 2.0).unwrap() / 1e-7 - 1.0).abs() < 1e-12);
        assert!(path_loss(0.0, -30.0, 1.0, 2.0).is_err());
        assert!(path_loss(-1.0, -30.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn scene_reference_epsilon_and_determinism() {
        let cfg = ScenarioConfig::reference(11);
        let s1 = scene_for_drop(&cfg, 0).unwrap();
        let s2 = scene_for_drop(&cfg, 0).unwrap();
        assert_eq!(s1, s2);
        let expect = 1e-3 * 29f64.powf(-1.4);
        assert!((s1.gains.epsilon / expect - 1.0).abs() < 1e-12);
        for (p, b) in s1.user_positions.iter().zip(&s1.gains.beta) {
            assert!(distance(*p, cfg.user_center) <= cfg.user_radius + 1e-9);
            assert!(*b > 0.0 && *b <= 1.0);
        }
        assert_ne!(s1, scene_for_drop(&cfg, 1).unwrap());
    }

    #[test]
    fn zero_radius_puts_everyone_at_center() {
        let cfg = ScenarioConfig { user_radius: 0.0, ..ScenarioConfig::reference(2) };
        let s = scene_for_drop(&cfg, 0).unwrap();
        assert!(s.user_positions.iter().all(|p| *p == cfg.user_center));
        assert!(s.gains.beta.iter().all(|b| *b == s.gains.beta[0]));
    }

    #[test]
    fn los_components_shape_and_modulus() {
        let mut cfg = ScenarioConfig::reference(5).with_users(3).with_ris_elements(6).with_antennas(4);
        cfg.phi_users[1] = cfg.phi_r;
        let los = los_components(&cfg).unwrap();
        assert_eq!((los.g_bar.rows(), los.g_bar.cols()), (6, 4));
        assert!(close(los.g_bar[(0, 0)], Complex64::new(1.0, 0.0)));
        assert!(los.g_bar.as_slice().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        // rank one: every 2x2 minor vanishes
        let g = &los.g_bar;
        for r in 1..6 {
            for c in 1..4 {
                let minor = g[(0, 0)] * g[(r, c)] - g[(0, c)] * g[(r, 0)];
                assert!(minor.norm() < 1e-12);
            }
        }
        let a_r = array_response(6, cfg.phi_r, 0.5).unwrap();
        let aligned = crate::linalg::inner(&los.h_bar.column(1), &a_r);
        assert!(close(aligned, Complex64::new(6.0, 0.0)));
    }
}
