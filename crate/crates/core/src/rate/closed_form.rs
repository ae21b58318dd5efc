use std::f64::consts::TAU;

use num_complex::Complex64;

use super::exact::{ExactMoments, UserLos};
use super::{MomentModel, RateBreakdown};
use crate::channel::rician_split;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::LinkGains;
use crate::phases::PhaseVector;
use crate::precoding::DacModel;

/// Array gain of the RIS towards user `c`:
/// `Σ_n exp(j 2π (d/λ) n (sin φ_ct - sin φ_r) - j θ_n)`, n counted from 0.
pub fn psi(phases: &PhaseVector, phi_ct: f64, phi_r: f64, d_over_lambda: f64) -> Complex64 {
    let step = TAU * d_over_lambda * (phi_ct.sin() - phi_r.sin());
    phases
        .as_slice()
        .iter()
        .enumerate()
        .map(|(n, t)| Complex64::from_polar(1.0, step * n as f64 - t))
        .sum()
}

/// `ε β_c / ((K_G + 1)(K_c + 1))`.
pub fn delta(epsilon: f64, beta_c: f64, k_g: f64, k_c: f64) -> f64 {
    epsilon * beta_c / ((k_g + 1.0) * (k_c + 1.0))
}

/// `h̄_k^H h̄_i` for ULA responses at the RIS.
pub fn los_inner_product(phi_kt: f64, phi_it: f64, n: usize, d_over_lambda: f64) -> Complex64 {
    let step = TAU * d_over_lambda * (phi_it.sin() - phi_kt.sin());
    (0..n).map(|i| Complex64::from_polar(1.0, step * i as f64)).sum()
}

/// The four expectation terms for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTerms {
    /// `E‖f_k‖⁴`.
    pub signal: Vec<f64>,
    /// `E|f_k^H f_i|²`, zero on the diagonal.
    pub interference: Vec<Vec<f64>>,
    /// `E{T_r f_k^H R f_k}`, includes `α(1-α)`.
    pub dac: Vec<f64>,
    /// `E{T_r}`.
    pub noise: f64,
    pub clamped: usize,
}

/// Closed-form rate evaluator for one scenario and user drop.
///
/// Everything that does not depend on the phases (steering offsets, the
/// LoS inner products, δ_k) is computed once, so evaluating a phase vector
/// costs `O(KN + K²)`.
#[derive(Debug, Clone)]
pub struct AnalyticRates {
    m: usize,
    n: usize,
    k_g: f64,
    k_users: Vec<f64>,
    epsilon: f64,
    beta: Vec<f64>,
    delta: Vec<f64>,
    /// Per-user increment of the steering phase along the RIS.
    steer: Vec<f64>,
    /// `h̄_k^H h̄_i`.
    los_inner: Vec<Vec<Complex64>>,
    power: f64,
    noise: f64,
    dac: DacModel,
    model: MomentModel,
}

impl AnalyticRates {
    pub fn new(config: &ScenarioConfig, gains: &LinkGains, model: MomentModel) -> Result<Self> {
        config.validate()?;
        if gains.beta.len() != config.k {
            return Err(Error::InvalidDimension(format!(
                "{} path losses for K = {} users",
                gains.beta.len(),
                config.k
            )));
        }
        if !(gains.epsilon > 0.0) || gains.beta.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::DegenerateScenario("path losses must be positive".into()));
        }
        if model == MomentModel::Simplified
            && (!config.k_g.is_finite() || config.k_users.iter().any(|k| !k.is_finite()))
        {
            return Err(Error::DegenerateScenario(
                "the simplified moment model needs finite Rician factors".into(),
            ));
        }
        let d = config.d_over_lambda;
        let k = config.k;
        let los_inner = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| los_inner_product(config.phi_users[a], config.phi_users[b], config.n, d))
                    .collect()
            })
            .collect();
        Ok(Self {
            m: config.m,
            n: config.n,
            k_g: config.k_g,
            k_users: config.k_users.clone(),
            epsilon: gains.epsilon,
            beta: gains.beta.clone(),
            delta: (0..k).map(|c| delta(gains.epsilon, gains.beta[c], config.k_g, config.k_users[c])).collect(),
            steer: config
                .phi_users
                .iter()
                .map(|p| TAU * d * (p.sin() - config.phi_r.sin()))
                .collect(),
            los_inner,
            power: config.power_w,
            noise: config.noise_w,
            dac: DacModel::new(config.dac)?,
            model,
        })
    }

    pub fn users(&self) -> usize {
        self.k_users.len()
    }

    pub fn elements(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> MomentModel {
        self.model
    }

    pub fn dac(&self) -> DacModel {
        self.dac
    }

    /// Copy with a different DAC, power or moment model.
    pub fn with_dac(&self, dac: DacModel) -> Self {
        Self { dac, ..self.clone() }
    }

    pub fn with_power(&self, power_w: f64) -> Self {
        Self { power: power_w, ..self.clone() }
    }

    pub fn with_model(&self, model: MomentModel) -> Self {
        Self { model, ..self.clone() }
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn los_inner(&self, k: usize, i: usize) -> Complex64 {
        self.los_inner[k][i]
    }

    /// `ψ_k` for every user.
    pub fn psi_all(&self, theta: &[f64]) -> Vec<Complex64> {
        self.steer
            .iter()
            .map(|&step| {
                theta
                    .iter()
                    .enumerate()
                    .map(|(n, t)| Complex64::from_polar(1.0, step * n as f64 - t))
                    .sum()
            })
            .collect()
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n {
            return Err(Error::InvalidDimension(format!(
                "phase vector has {} entries, RIS has {}",
                theta.len(),
                self.n
            )));
        }
        Ok(())
    }

    pub(crate) fn exact_moments(&self) -> ExactMoments {
        let (los, nlos) = rician_split(self.k_g);
        ExactMoments::new(self.m, self.n, los, nlos)
    }

    pub(crate) fn user_los(&self, psi: &[Complex64]) -> Vec<UserLos> {
        self.k_users
            .iter()
            .zip(&self.beta)
            .zip(psi)
            .map(|((&kk, &beta), &p)| {
                let (los, nlos) = rician_split(kk);
                UserLos { psi: p, los, nlos, scale: self.epsilon * beta }
            })
            .collect()
    }

    /// `E{|f_km|²}`, the same for every antenna m.
    pub fn entry_power(&self, psi: &[Complex64]) -> Vec<f64> {
        match self.model {
            MomentModel::Exact => {
                let em = self.exact_moments();
                self.user_los(psi).iter().map(|u| em.entry2(u)).collect()
            }
            MomentModel::Simplified => (0..self.users()).map(|k| self.simplified_entry2(k, psi)).collect(),
        }
    }

    pub(crate) fn simplified_entry2(&self, k: usize, psi: &[Complex64]) -> f64 {
        let (kg, kk, n) = (self.k_g, self.k_users[k], self.n as f64);
        self.delta[k] * (kg * kk * psi[k].norm_sqr() + n * (kg + kk + 1.0))
    }

    /// Simplified `E{|f_km|⁴}`.
    pub(crate) fn simplified_entry4(&self, k: usize, psi: &[Complex64]) -> f64 {
        let (kg, kk, n) = (self.k_g, self.k_users[k], self.n as f64);
        let p2 = psi[k].norm_sqr();
        self.delta[k].powi(2)
            * ((kg * kk * p2).powi(2)
                + 2.0 * n * n * (kg + kk + 1.0).powi(2)
                + 4.0 * kg * kk * n * p2 * (kg + kk + 1.0)
                + n / 2.0 * (3.0 * (kg + kk) + 4.0))
    }

    fn simplified_signal(&self, k: usize, psi: &[Complex64]) -> f64 {
        let (kg, kk, m, n) = (self.k_g, self.k_users[k], self.m as f64, self.n as f64);
        let p2 = psi[k].norm_sqr();
        m * self.delta[k].powi(2)
            * (m * (kg * kk).powi(2) * p2 * p2
                + 2.0 * kg * kk * p2 * (2.0 * m * n * kg + m * n * kk + m * n + n * kk + n - 2.0)
                + m * n * n * (2.0 * kg * kg + kk * kk + 2.0 * kg + 2.0 * kk + 1.0)
                + n * n * (kg * kg + 2.0 * kg * kk + 2.0 * kg + 1.0)
                + m * n * (2.0 * kk - 0.25 * kg * kg)
                + n * (2.0 * kg + 2.0 - 0.25 * (kg * kg + 2.0 * kg + 2.0 * kk)))
    }

    fn simplified_interference(&self, k: usize, i: usize, psi: &[Complex64]) -> f64 {
        let (kg, kk, ki) = (self.k_g, self.k_users[k], self.k_users[i]);
        let (m, n) = (self.m as f64, self.n as f64);
        let (pk, pi) = (psi[k].norm_sqr(), psi[i].norm_sqr());
        let l = self.los_inner[k][i];
        m * self.delta[k]
            * self.delta[i]
            * (m * kg * kg * kk * ki * pk * pi
                + kg * kk * pk * (kg * m * n + n * ki + n + 2.0 * m)
                // the quoted form carries |ψ_k|² on this term as well
                + kg * ki * pk * (kg * m * n + n * kk + n + 2.0 * m)
                + n * n * (m * kg * kg + kg * (kk + ki + 2.0) + (kk + 1.0) * (ki + 1.0))
                + m * n * (2.0 * kg + kk + ki + 1.0)
                + m * kk * ki * l.norm_sqr()
                + 2.0 * m * kg * kk * ki * (psi[k].conj() * psi[i] * l).re)
    }

    fn simplified_dac(&self, k: usize, psi: &[Complex64]) -> f64 {
        let (kg, kk, n) = (self.k_g, self.k_users[k], self.n as f64);
        let pk = psi[k].norm_sqr();
        let own = self.delta[k].powi(2)
            * ((kg * kk * pk).powi(2)
                + 4.0 * kg * kk * n * pk * (kg + kk + 1.0)
                + 2.0 * n * n * (kg + kk + 1.0).powi(2)
                + 2.0 * n * (0.75 * (kg + kk) + 1.0));
        let others: f64 = (0..self.users())
            .filter(|&i| i != k)
            .map(|i| {
                let ki = self.k_users[i];
                let pi = psi[i].norm_sqr();
                self.delta[k]
                    * self.delta[i]
                    * (kg * kg * pk * pi
                        + n * kg * kk * pk * (kg + ki + 1.0)
                        + n * kg * ki * pi * (kg + kk + 1.0)
                        + n * n * (kg * kg + kg * kk + kg * ki + kk * ki + 2.0 * kg + kk + ki + 1.0))
            })
            .sum();
        self.dac.distortion() * self.m as f64 * (own + others)
    }

    /// All four expectation terms at `theta`.
    pub fn terms(&self, theta: &[f64]) -> Result<MomentTerms> {
        self.check_len(theta)?;
        let psi = self.psi_all(theta);
        Ok(self.terms_from_psi(&psi))
    }

    fn terms_from_psi(&self, psi: &[Complex64]) -> MomentTerms {
        let k = self.users();
        let m = self.m as f64;
        let mut clamped = 0;
        let mut clamp = |x: f64, what: &str| {
            if x < 0.0 {
                clamped += 1;
                log::warn!("negative {what} term {x:e} clamped to zero");
                0.0
            } else {
                x
            }
        };
        let (signal, interference, dac, noise) = match self.model {
            MomentModel::Exact => {
                let em = self.exact_moments();
                let users = self.user_los(psi);
                let signal: Vec<f64> = users.iter().map(|u| em.norm4(u)).collect();
                let mut interference = vec![vec![0.0; k]; k];
                let mut dac = vec![0.0; k];
                for a in 0..k {
                    let mut cross = em.entry4(&users[a]);
                    for b in 0..k {
                        if a != b {
                            let l = self.los_inner[a][b];
                            interference[a][b] = em.inner2(&users[a], &users[b], l);
                            cross += em.entry_cross(&users[a], &users[b], l);
                        }
                    }
                    dac[a] = self.dac.distortion() * m * cross;
                }
                let noise = m * users.iter().map(|u| em.entry2(u)).sum::<f64>();
                (signal, interference, dac, noise)
            }
            MomentModel::Simplified => {
                let signal = (0..k).map(|a| self.simplified_signal(a, psi)).collect();
                let interference = (0..k)
                    .map(|a| {
                        (0..k)
                            .map(|b| if a == b { 0.0 } else { self.simplified_interference(a, b, psi) })
                            .collect()
                    })
                    .collect();
                let dac = (0..k).map(|a| self.simplified_dac(a, psi)).collect();
                let noise = m * (0..k).map(|a| self.simplified_entry2(a, psi)).sum::<f64>();
                (signal, interference, dac, noise)
            }
        };
        let signal = signal.into_iter().map(|x| clamp(x, "signal")).collect();
        let interference = interference
            .into_iter()
            .map(|row| row.into_iter().map(|x| clamp(x, "interference")).collect())
            .collect();
        let dac = dac.into_iter().map(|x| clamp(x, "quantization")).collect();
        let noise = clamp(noise, "noise");
        MomentTerms { signal, interference, dac, noise, clamped }
    }

    /// Per-user rates from the four expectation terms.
    pub fn rates(&self, theta: &[f64]) -> Result<RateBreakdown> {
        let t = self.terms(theta)?;
        let a2p = self.dac.alpha.powi(2) * self.power;
        let k = self.users();
        let mut sinr = Vec::with_capacity(k);
        for a in 0..k {
            let num = a2p * t.signal[a];
            let den = a2p * t.interference[a].iter().sum::<f64>() + self.power * t.dac[a] + self.noise * t.noise;
            if !(den > 0.0) || !den.is_finite() || !num.is_finite() {
                return Err(Error::DegenerateScenario(format!(
                    "user {a}: SINR numerator {num:e}, denominator {den:e}"
                )));
            }
            sinr.push(num / den);
        }
        let rates: Vec<f64> = sinr.iter().map(|g| (1.0 + g).log2()).collect();
        Ok(RateBreakdown {
            signal: t.signal,
            interference: t.interference,
            dac: t.dac,
            noise: vec![t.noise; k],
            sinr,
            sum_rate: rates.iter().sum(),
            rates,
            rate_stderr: None,
            sum_rate_stderr: None,
            clamped_terms: t.clamped,
        })
    }

    /// Sum rate at `theta`; the optimizer's objective.
    pub fn sum_rate(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.rates(theta)?.sum_rate)
    }
}

/// `E‖f_k‖⁴`.
pub fn signal_term(
    k: usize,
    config: &ScenarioConfig,
    gains: &LinkGains,
    phases: &PhaseVector,
    model: MomentModel,
) -> Result<f64> {
    let ev = AnalyticRates::new(config, gains, model)?;
    user_index(k, ev.users())?;
    Ok(ev.terms(phases.as_slice())?.signal[k])
}

/// `E|f_k^H f_i|²` for `i ≠ k`.
pub fn interference_term(
    k: usize,
    i: usize,
    config: &ScenarioConfig,
    gains: &LinkGains,
    phases: &PhaseVector,
    model: MomentModel,
) -> Result<f64> {
    if k == i {
        return Err(Error::InvalidPair(k));
    }
    let ev = AnalyticRates::new(config, gains, model)?;
    user_index(k, ev.users())?;
    user_index(i, ev.users())?;
    Ok(ev.terms(phases.as_slice())?.interference[k][i])
}

/// `E{T_r f_k^H R f_k}`, zero for a perfect DAC.
pub fn dac_term(
    k: usize,
    config: &ScenarioConfig,
    gains: &LinkGains,
    phases: &PhaseVector,
    model: MomentModel,
) -> Result<f64> {
    let ev = AnalyticRates::new(config, gains, model)?;
    user_index(k, ev.users())?;
    Ok(ev.terms(phases.as_slice())?.dac[k])
}

/// `E{T_r}`, shared by all users.
pub fn noise_term(config: &ScenarioConfig, gains: &LinkGains, phases: &PhaseVector, model: MomentModel) -> Result<f64> {
    Ok(AnalyticRates::new(config, gains, model)?.terms(phases.as_slice())?.noise)
}

pub fn closed_form_rates(
    config: &ScenarioConfig,
    gains: &LinkGains,
    phases: &PhaseVector,
    model: MomentModel,
) -> Result<RateBreakdown> {
    AnalyticRates::new(config, gains, model)?.rates(phases.as_slice())
}

fn user_index(k: usize, users: usize) -> Result<()> {
    if k >= users {
        return Err(Error::InvalidDimension(format!("user {k} out of range (K = {users})")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::geometry::array_response;
    use crate::precoding::DacBits;
    use crate::rng::{substream, Stream};
    use proptest::prelude::*;
    use rand::Rng;

    const MODELS: [MomentModel; 2] = [MomentModel::Exact, MomentModel::Simplified];

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn small(k: usize, n: usize, m: usize) -> ScenarioConfig {
        ScenarioConfig::reference(3).with_users(k).with_ris_elements(n).with_antennas(m)
    }

    fn gains(k: usize) -> LinkGains {
        LinkGains { epsilon: 2.0e-3, beta: (0..k).map(|i| 1.0e-7 * (1.0 + 0.5 * i as f64)).collect() }
    }

    fn random_phases(n: usize, seed: u64) -> PhaseVector {
        PhaseVector::random(n, &mut substream(seed, Stream::Phases, 0))
    }

    fn aligned(n: usize, phi_c: f64, phi_r: f64, d: f64) -> PhaseVector {
        let step = TAU * d * (phi_c.sin() - phi_r.sin());
        PhaseVector::continuous((0..n).map(|i| step * i as f64))
    }

    #[test]
    fn psi_examples() {
        let p = psi(&aligned(9, 0.7, 2.1, 0.5), 0.7, 2.1, 0.5);
        assert!((p - Complex64::new(9.0, 0.0)).norm() < 1e-12);

        let one = PhaseVector::continuous([1.3]);
        assert!((psi(&one, 0.4, 0.9, 0.5) - Complex64::from_polar(1.0, -1.3)).norm() < 1e-15);

        // a_N^H(φ_r) Φ^H a_N(φ_c) with Φ = diag(e^{jθ})
        let th = random_phases(4, 11);
        let (pc, pr) = (1.1, 4.0);
        let ar = array_response(4, pr, 0.5).unwrap();
        let ac = array_response(4, pc, 0.5).unwrap();
        let oracle: Complex64 = (0..4)
            .map(|n| ar[n].conj() * Complex64::from_polar(1.0, -th.as_slice()[n]) * ac[n])
            .sum();
        assert!((psi(&th, pc, pr, 0.5) - oracle).norm() < 1e-12);
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(3.0, 0.5, 0.0, 0.0), 1.5);
        assert!(rel(delta(1.0, 1.0, 1.0, 10.0), 1.0 / 22.0) < 1e-15);
    }

    #[test]
    fn los_inner_product_examples() {
        assert!((los_inner_product(0.3, 0.3, 7, 0.5) - Complex64::new(7.0, 0.0)).norm() < 1e-12);
        // sin difference of one: 1 + e^{jπ}
        assert!(los_inner_product(0.0, std::f64::consts::FRAC_PI_2, 2, 0.5).norm() < 1e-15);
        let (a, b) = (0.8, 5.1);
        let ha = array_response(5, a, 0.5).unwrap();
        let hb = array_response(5, b, 0.5).unwrap();
        let dot: Complex64 = ha.iter().zip(&hb).map(|(x, y)| x.conj() * y).sum();
        assert!((los_inner_product(a, b, 5, 0.5) - dot).norm() < 1e-12);
    }

    #[test]
    fn rayleigh_limits_of_the_quoted_forms() {
        let cfg = small(2, 8, 8).with_rician(0.0, 0.0);
        let g = gains(2);
        let th = random_phases(8, 1);
        let (m, n) = (8.0, 8.0);
        let d: Vec<f64> = (0..2).map(|c| delta(g.epsilon, g.beta[c], 0.0, 0.0)).collect();
        let model = MomentModel::Simplified;

        let s = signal_term(0, &cfg, &g, &th, model).unwrap();
        assert!(rel(s, m * d[0] * d[0] * (m * n * n + n * n + 2.0 * n)) < 1e-10);
        let i = interference_term(0, 1, &cfg, &g, &th, model).unwrap();
        assert!(rel(i, m * d[0] * d[1] * (n * n + m * n)) < 1e-10);

        // the exact moments under pure scattering
        let s = signal_term(0, &cfg, &g, &th, MomentModel::Exact).unwrap();
        assert!(rel(s, m * (m + 1.0) * n * (n + 1.0) * d[0] * d[0]) < 1e-10);
        let i = interference_term(0, 1, &cfg, &g, &th, MomentModel::Exact).unwrap();
        assert!(rel(i, m * n * (m + n) * d[0] * d[1]) < 1e-10);

        for model in MODELS {
            let e = noise_term(&cfg, &g, &th, model).unwrap();
            assert!(rel(e, m * n * (d[0] + d[1])) < 1e-10);
        }
    }

    #[test]
    fn strong_line_of_sight_is_dominated_by_the_array_gain() {
        let (kf, n, m) = (1.0e4, 8usize, 8usize);
        let mut cfg = small(1, n, m).with_rician(kf, kf);
        cfg.phi_users = vec![0.9];
        let g = gains(1);
        let th = aligned(n, 0.9, cfg.phi_r, cfg.d_over_lambda);
        let d = delta(g.epsilon, g.beta[0], kf, kf);
        let lead = (m * m) as f64 * d * d * (kf * kf).powi(2) * (n as f64).powi(4);
        for model in MODELS {
            let s = signal_term(0, &cfg, &g, &th, model).unwrap();
            assert!(rel(s, lead) < 1e-2, "{model}: {s} vs {lead}");
        }
    }

    #[test]
    fn pair_errors_and_symmetry() {
        let mut cfg = small(3, 6, 4);
        cfg.phi_users = vec![1.0, 1.0, 2.5];
        let g = LinkGains { epsilon: 1e-3, beta: vec![2e-7; 3] };
        let th = random_phases(6, 2);
        for model in MODELS {
            assert!(matches!(interference_term(1, 1, &cfg, &g, &th, model), Err(Error::InvalidPair(1))));
            let a = interference_term(0, 1, &cfg, &g, &th, model).unwrap();
            let b = interference_term(1, 0, &cfg, &g, &th, model).unwrap();
            assert!(rel(a, b) < 1e-12, "{model}");
        }
    }

    #[test]
    fn dac_term_examples() {
        let cfg = small(2, 8, 8).with_dac(DacBits::Infinite);
        let th = random_phases(8, 3);
        for model in MODELS {
            assert_eq!(dac_term(0, &cfg, &gains(2), &th, model).unwrap(), 0.0);
        }

        // single user: only the own-entry block remains
        let cfg = small(1, 8, 8);
        let g = gains(1);
        let th = random_phases(8, 4);
        let (kg, kk, n, m) = (cfg.k_g, cfg.k_users[0], 8.0, 8.0);
        let p2 = psi(&th, cfg.phi_users[0], cfg.phi_r, cfg.d_over_lambda).norm_sqr();
        let d = delta(g.epsilon, g.beta[0], kg, kk);
        let dac = DacModel::new(cfg.dac).unwrap();
        let want = dac.alpha
            * (1.0 - dac.alpha)
            * m
            * d
            * d
            * ((kg * kk * p2).powi(2)
                + 4.0 * kg * kk * n * p2 * (kg + kk + 1.0)
                + 2.0 * n * n * (kg + kk + 1.0).powi(2)
                + 2.0 * n * (0.75 * (kg + kk) + 1.0));
        let got = dac_term(0, &cfg, &g, &th, MomentModel::Simplified).unwrap();
        assert!(rel(got, want) < 1e-10);
    }

    #[test]
    fn noise_term_single_aligned_user() {
        let mut cfg = small(1, 10, 6);
        cfg.phi_users = vec![2.2];
        let g = gains(1);
        let th = aligned(10, 2.2, cfg.phi_r, cfg.d_over_lambda);
        let (kg, k1, n, m) = (cfg.k_g, cfg.k_users[0], 10.0, 6.0);
        let d = delta(g.epsilon, g.beta[0], kg, k1);
        for model in MODELS {
            let e = noise_term(&cfg, &g, &th, model).unwrap();
            assert!(rel(e, m * d * (kg * k1 * n * n + n * (kg + k1 + 1.0))) < 1e-10, "{model}");
        }
    }

    #[test]
    fn single_user_perfect_dac_rate() {
        let cfg = small(1, 8, 16).with_dac(DacBits::Infinite);
        let g = gains(1);
        let th = random_phases(8, 5);
        for model in MODELS {
            let r = closed_form_rates(&cfg, &g, &th, model).unwrap();
            let want = (1.0 + cfg.power_w * r.signal[0] / (cfg.noise_w * r.noise[0])).log2();
            assert!(rel(r.rates[0], want) < 1e-12);
            assert_eq!(r.dac[0], 0.0);
        }
    }

    #[test]
    fn perfect_dac_equals_unit_gain_converter() {
        let cfg = small(3, 8, 16);
        let g = gains(3);
        let th = random_phases(8, 6);
        for model in MODELS {
            let ideal = AnalyticRates::new(&cfg.clone().with_dac(DacBits::Infinite), &g, model).unwrap();
            let unit = AnalyticRates::new(&cfg, &g, model)
                .unwrap()
                .with_dac(DacModel { bits: DacBits::Finite(1), rho: 0.0, alpha: 1.0 });
            assert_eq!(ideal.rates(th.as_slice()).unwrap(), unit.rates(th.as_slice()).unwrap());
        }
    }

    #[test]
    fn common_phase_offset_leaves_rates_unchanged() {
        let cfg = small(4, 12, 16);
        let g = gains(4);
        let th = random_phases(12, 7);
        for model in MODELS {
            let ev = AnalyticRates::new(&cfg, &g, model).unwrap();
            let a = ev.rates(th.as_slice()).unwrap();
            let b = ev.rates(th.rotated(1.234).as_slice()).unwrap();
            for (x, y) in a.rates.iter().zip(&b.rates) {
                assert!(rel(*x, *y) < 1e-10, "{model}");
            }
        }
    }

    #[test]
    fn rates_grow_with_power_and_vanish_without_it() {
        let cfg = ScenarioConfig::reference(1);
        let g = gains(6);
        let th = random_phases(16, 8);
        for model in MODELS {
            let ev = AnalyticRates::new(&cfg, &g, model).unwrap();
            let mut prev = vec![0.0; 6];
            for p_dbm in (-40..=40).step_by(5) {
                let r = ev.with_power(crate::config::dbm_to_watts(p_dbm as f64)).rates(th.as_slice()).unwrap();
                for (a, b) in r.rates.iter().zip(&prev) {
                    assert!(*a >= *b, "{model} at {p_dbm} dBm");
                }
                prev = r.rates;
            }
            let tiny = ev.with_power(1e-30).sum_rate(th.as_slice()).unwrap();
            assert!(tiny < 1e-12, "{model}: {tiny}");
        }
    }

    #[test]
    fn sum_rate_is_the_sum_of_user_rates() {
        let cfg = ScenarioConfig::reference(2);
        let r = closed_form_rates(&cfg, &gains(6), &random_phases(16, 9), MomentModel::Exact).unwrap();
        assert!(rel(r.sum_rate, r.rates.iter().sum()) < 1e-15);
    }

    #[test]
    fn wrong_lengths_are_rejected() {
        let cfg = small(2, 8, 8);
        let ev = AnalyticRates::new(&cfg, &gains(2), MomentModel::Exact).unwrap();
        assert!(matches!(ev.rates(&[0.0; 7]), Err(Error::InvalidDimension(_))));
        assert!(matches!(AnalyticRates::new(&cfg, &gains(3), MomentModel::Exact), Err(Error::InvalidDimension(_))));
        let inf = cfg.with_rician(f64::INFINITY, 1.0);
        assert!(AnalyticRates::new(&inf, &gains(2), MomentModel::Exact).is_ok());
        assert!(matches!(AnalyticRates::new(&inf, &gains(2), MomentModel::Simplified), Err(Error::DegenerateScenario(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn terms_are_nonnegative(
            k in 1usize..5,
            n in 1usize..20,
            m in 1usize..20,
            k_g in 0.0f64..50.0,
            k_u in 0.0f64..50.0,
            seed in 0u64..1000,
            bits in 1u32..8,
        ) {
            let mut rng = substream(seed, Stream::Phases, 1);
            let mut cfg = ScenarioConfig::reference(seed)
                .with_users(k)
                .with_ris_elements(n)
                .with_antennas(m)
                .with_rician(k_g, k_u)
                .with_dac(DacBits::Finite(bits));
            cfg.phi_r = rng.random::<f64>() * TAU;
            let g = LinkGains { epsilon: rng.random_range(1e-6..1e-2), beta: (0..k).map(|_| rng.random_range(1e-10..1e-5)).collect() };
            let th = PhaseVector::random(n, &mut rng);
            for model in MODELS {
                let t = AnalyticRates::new(&cfg, &g, model).unwrap().terms(th.as_slice()).unwrap();
                prop_assert!(t.signal.iter().chain(t.dac.iter()).all(|x| *x >= 0.0 && x.is_finite()));
                prop_assert!(t.interference.iter().flatten().all(|x| *x >= 0.0 && x.is_finite()));
                prop_assert!(t.noise > 0.0);
            }
        }
    }
}
