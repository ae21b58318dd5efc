//! Ergodic rates and channel moments by simulation.
//!
//! Trial `t` draws its channel from substream `(seed, Channel, t)`. Trials are
//! evaluated in parallel in fixed-size blocks and folded in trial order, so
//! the result does not depend on the worker count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::closed_form::AnalyticRates;
use super::{MomentModel, RateBreakdown};
use crate::channel::{cascaded_channel, complex_normal, ChannelSampler};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::LinkGains;
use crate::phases::PhaseVector;
use crate::precoding::DacModel;
use crate::rng::{substream, Stream};

const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McOptions {
    pub trials: usize,
    /// Draw `n_q` explicitly instead of using its conditional covariance.
    pub sample_quantization_noise: bool,
    /// Substream index of the first trial; separates independent batches.
    pub first_trial: u64,
}

impl McOptions {
    pub fn trials(trials: usize) -> Self {
        Self { trials, sample_quantization_noise: false, first_trial: 0 }
    }
}

/// Quantities measured on one channel draw.
struct Trial {
    rates: Vec<f64>,
    sinr: Vec<f64>,
    norm4: Vec<f64>,
    inner2: Vec<Vec<f64>>,
    /// `Σ_m |f_km|² Σ_i |f_im|²` = `T_r f_k^H R f_k / (α(1-α))`.
    quant: Vec<f64>,
    trace: f64,
    /// Antenna averages of `|f_km|²` and `|f_km|⁴`.
    entry2: Vec<f64>,
    entry4: Vec<f64>,
}

struct Context<'a> {
    sampler: ChannelSampler,
    phases: &'a PhaseVector,
    dac: DacModel,
    power: f64,
    noise: f64,
    seed: u64,
    sample_nq: bool,
    first_trial: u64,
}

impl Context<'_> {
    fn new<'a>(config: &ScenarioConfig, gains: &LinkGains, phases: &'a PhaseVector, options: &McOptions) -> Result<Context<'a>> {
        if phases.len() != config.n {
            return Err(Error::InvalidDimension(format!(
                "phase vector has {} entries, RIS has {}",
                phases.len(),
                config.n
            )));
        }
        Ok(Context {
            sampler: ChannelSampler::new(config, gains)?,
            phases,
            dac: DacModel::new(config.dac)?,
            power: config.power_w,
            noise: config.noise_w,
            seed: config.seed,
            sample_nq: options.sample_quantization_noise,
            first_trial: options.first_trial,
        })
    }

    fn trial(&self, t: usize) -> Trial {
        let index = self.first_trial + t as u64;
        let mut rng = substream(self.seed, Stream::Channel, index);
        let real = self.sampler.sample(&mut rng);
        let f = cascaded_channel(&real, self.phases).expect("dimensions checked");
        let (k, m) = (f.rows(), f.cols());

        let power: Vec<Vec<f64>> = (0..k).map(|a| f.row(a).iter().map(|z| z.norm_sqr()).collect()).collect();
        let norm2: Vec<f64> = power.iter().map(|p| p.iter().sum()).collect();
        let trace: f64 = norm2.iter().sum();
        let column: Vec<f64> = (0..m).map(|j| power.iter().map(|p| p[j]).sum()).collect();
        let quant: Vec<f64> = power.iter().map(|p| p.iter().zip(&column).map(|(a, b)| a * b).sum()).collect();
        let inner2: Vec<Vec<f64>> = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| {
                        if a == b {
                            0.0
                        } else {
                            f.row(a).iter().zip(f.row(b)).map(|(x, y)| x * y.conj()).sum::<Complex64>().norm_sqr()
                        }
                    })
                    .collect()
            })
            .collect();

        let a2p = self.dac.alpha * self.dac.alpha * self.power;
        let quant_power: Vec<f64> = if self.sample_nq && self.dac.alpha < 1.0 {
            // n_q ~ CN(0, α(1-α) diag(F^H F) / T_r)
            let mut qrng = substream(self.seed, Stream::Quantization, index);
            let nq: Vec<Complex64> = column
                .iter()
                .map(|c| complex_normal(&mut qrng) * (self.dac.distortion() * c / trace).sqrt())
                .collect();
            (0..k)
                .map(|a| trace * f.row(a).iter().zip(&nq).map(|(x, n)| x * n).sum::<Complex64>().norm_sqr())
                .collect()
        } else {
            quant.iter().map(|q| self.dac.distortion() * q).collect()
        };
        let sinr: Vec<f64> = (0..k)
            .map(|a| {
                let num = a2p * norm2[a] * norm2[a];
                let den = a2p * inner2[a].iter().sum::<f64>() + self.power * quant_power[a] + self.noise * trace;
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            })
            .collect();
        Trial {
            rates: sinr.iter().map(|g| (1.0 + g).log2()).collect(),
            sinr,
            norm4: norm2.iter().map(|x| x * x).collect(),
            inner2,
            quant,
            trace,
            entry2: power.iter().map(|p| p.iter().sum::<f64>() / m as f64).collect(),
            entry4: power.iter().map(|p| p.iter().map(|x| x * x).sum::<f64>() / m as f64).collect(),
        }
    }

    /// Folds `trials` trials in index order.
    fn run(&self, trials: usize, mut fold: impl FnMut(Trial)) {
        let mut start = 0;
        while start < trials {
            let end = (start + BLOCK).min(trials);
            let block: Vec<Trial> = (start..end).into_par_iter().map(|t| self.trial(t)).collect();
            block.into_iter().for_each(&mut fold);
            start = end;
        }
    }
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

/// Ergodic per-user rates `E log2(1 + γ_k)` over `options.trials` draws.
pub fn monte_carlo_rates(
    config: &ScenarioConfig,
    gains: &LinkGains,
    phases: &PhaseVector,
    options: &McOptions,
) -> Result<RateBreakdown> {
    if options.trials == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one trial".into()));
    }
    let ctx = Context::new(config, gains, phases, options)?;
    let k = config.k;
    let mut rates = vec![Moments::default(); k];
    let mut sum = Moments::default();
    let mut sinr = vec![Moments::default(); k];
    let mut signal = vec![Moments::default(); k];
    let mut inter = vec![vec![Moments::default(); k]; k];
    let mut dac = vec![Moments::default(); k];
    let mut noise = Moments::default();
    let distortion = ctx.dac.distortion();
    ctx.run(options.trials, |t| {
        for a in 0..k {
            rates[a].push(t.rates[a]);
            sinr[a].push(t.sinr[a]);
            signal[a].push(t.norm4[a]);
            dac[a].push(distortion * t.quant[a]);
            for b in 0..k {
                inter[a][b].push(t.inner2[a][b]);
            }
        }
        sum.push(t.rates.iter().sum());
        noise.push(t.trace);
    });
    let means = |v: &[Moments]| v.iter().map(|m| m.mean).collect::<Vec<_>>();
    Ok(RateBreakdown {
        signal: means(&signal),
        interference: inter.iter().map(|row| means(row)).collect(),
        dac: means(&dac),
        noise: vec![noise.mean; k],
        sinr: means(&sinr),
        rates: means(&rates),
        sum_rate: sum.mean,
        rate_stderr: Some(rates.iter().map(|m| m.stderr()).collect()),
        sum_rate_stderr: Some(sum.stderr()),
        clamped_terms: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    /// `E|f_km|²`
    EntryPower,
    /// `E|f_km|⁴`
    EntryFourth,
    /// `E{T_r}`
    TraceNorm,
    /// `E{T_r f_k^H R f_k} / (α(1-α))`
    QuantizationNoise,
}

impl std::fmt::Display for MomentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::EntryPower => "E|f_km|^2",
            Self::EntryFourth => "E|f_km|^4",
            Self::TraceNorm => "E{T_r}",
            Self::QuantizationNoise => "E{T_r f^H R f}/a(1-a)",
        })
    }
}

/// One analytic moment next to its sample estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentComparison {
    pub kind: MomentKind,
    pub user: Option<usize>,
    pub empirical: f64,
    pub stderr: f64,
    pub exact: f64,
    /// Absent when the simplified model cannot be evaluated (infinite factors).
    pub simplified: Option<f64>,
}

impl MomentComparison {
    pub fn relative_error(&self, model: MomentModel) -> Option<f64> {
        let analytic = match model {
            MomentModel::Exact => Some(self.exact),
            MomentModel::Simplified => self.simplified,
        }?;
        Some((analytic - self.empirical).abs() / self.empirical.abs())
    }
}

/// Empirical versus analytic `E|f_km|²`, `E|f_km|⁴`, `E{T_r}` and the
/// quantization-noise moment.
pub fn moment_oracles(
    config: &ScenarioConfig,
    gains: &LinkGains,
    phases: &PhaseVector,
    trials: usize,
) -> Result<Vec<MomentComparison>> {
    if trials < 1000 {
        return Err(Error::Domain(format!("moment oracles need >= 1000 trials (got {trials})")));
    }
    let ctx = Context::new(config, gains, phases, &McOptions::trials(trials))?;
    let k = config.k;
    let mut e2 = vec![Moments::default(); k];
    let mut e4 = vec![Moments::default(); k];
    let mut q = vec![Moments::default(); k];
    let mut tr = Moments::default();
    ctx.run(trials, |t| {
        for a in 0..k {
            e2[a].push(t.entry2[a]);
            e4[a].push(t.entry4[a]);
            q[a].push(t.quant[a]);
        }
        tr.push(t.trace);
    });

    let exact = AnalyticRates::new(config, gains, MomentModel::Exact)?;
    let psi = exact.psi_all(phases.as_slice());
    let em = exact.exact_moments();
    let users = exact.user_los(&psi);
    let simplified = AnalyticRates::new(config, gains, MomentModel::Simplified).ok();
    let m = config.m as f64;

    let ex2: Vec<f64> = users.iter().map(|u| em.entry2(u)).collect();
    let sx2: Option<Vec<f64>> = simplified.as_ref().map(|s| (0..k).map(|a| s.simplified_entry2(a, &psi)).collect());

    let mut out = Vec::with_capacity(3 * k + 1);
    for a in 0..k {
        out.push(MomentComparison {
            kind: MomentKind::EntryPower,
            user: Some(a),
            empirical: e2[a].mean,
            stderr: e2[a].stderr(),
            exact: ex2[a],
            simplified: sx2.as_ref().map(|v| v[a]),
        });
        out.push(MomentComparison {
            kind: MomentKind::EntryFourth,
            user: Some(a),
            empirical: e4[a].mean,
            stderr: e4[a].stderr(),
            exact: em.entry4(&users[a]),
            simplified: simplified.as_ref().map(|s| s.simplified_entry4(a, &psi)),
        });
        let cross: f64 = (0..k)
            .filter(|&b| b != a)
            .map(|b| em.entry_cross(&users[a], &users[b], exact.los_inner(a, b)))
            .sum();
        // The simplified form treats |f_km|² and |f_im|² as independent.
        let simplified_q = simplified.as_ref().zip(sx2.as_ref()).map(|(s, x2)| {
            m * (s.simplified_entry4(a, &psi) + (0..k).filter(|&b| b != a).map(|b| x2[a] * x2[b]).sum::<f64>())
        });
        out.push(MomentComparison {
            kind: MomentKind::QuantizationNoise,
            user: Some(a),
            empirical: q[a].mean,
            stderr: q[a].stderr(),
            exact: m * (em.entry4(&users[a]) + cross),
            simplified: simplified_q,
        });
    }
    out.push(MomentComparison {
        kind: MomentKind::TraceNorm,
        user: None,
        empirical: tr.mean,
        stderr: tr.stderr(),
        exact: m * ex2.iter().sum::<f64>(),
        simplified: sx2.as_ref().map(|v| m * v.iter().sum::<f64>()),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{los_components, scene_for_drop};
    use crate::precoding::DacBits;
    use crate::rate::closed_form_rates;
    use crate::rng::{substream, Stream};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn random_phases(n: usize, seed: u64) -> PhaseVector {
        PhaseVector::random(n, &mut substream(seed, Stream::Phases, 0))
    }

    #[test]
    fn argument_checks() {
        let cfg = ScenarioConfig::reference(1).with_ris_elements(4).with_antennas(4);
        let g = scene_for_drop(&cfg, 0).unwrap().gains;
        let th = random_phases(4, 0);
        assert!(matches!(monte_carlo_rates(&cfg, &g, &th, &McOptions::trials(0)), Err(Error::Domain(_))));
        assert!(matches!(moment_oracles(&cfg, &g, &th, 999), Err(Error::Domain(_))));
        assert!(matches!(
            monte_carlo_rates(&cfg, &g, &random_phases(5, 0), &McOptions::trials(1)),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn pure_line_of_sight_is_deterministic() {
        let cfg = ScenarioConfig::reference(4)
            .with_users(3)
            .with_ris_elements(6)
            .with_antennas(5)
            .with_rician(f64::INFINITY, f64::INFINITY);
        let g = LinkGains { epsilon: 1e-3, beta: vec![1e-7, 2e-7, 5e-8] };
        let th = random_phases(6, 1);
        let mc = monte_carlo_rates(&cfg, &g, &th, &McOptions::trials(1)).unwrap();

        // f_k = √(εβ_k) Σ_n conj(h̄_nk) e^{jθ_n} ḡ_nm, by index sums
        let los = los_components(&cfg).unwrap();
        let f: Vec<Vec<Complex64>> = (0..3)
            .map(|k| {
                (0..5)
                    .map(|m| {
                        (0..6)
                            .map(|n| {
                                los.h_bar[(n, k)].conj()
                                    * Complex64::from_polar(1.0, th.as_slice()[n])
                                    * los.g_bar[(n, m)]
                                    * (g.epsilon * g.beta[k]).sqrt()
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let dac = DacModel::new(cfg.dac).unwrap();
        let (a, p, s2) = (dac.alpha, cfg.power_w, cfg.noise_w);
        let pw = |k: usize, m: usize| f[k][m].norm_sqr();
        let norm2: Vec<f64> = (0..3).map(|k| (0..5).map(|m| pw(k, m)).sum()).collect();
        let tr: f64 = norm2.iter().sum();
        for k in 0..3 {
            let inter: f64 = (0..3)
                .filter(|&i| i != k)
                .map(|i| (0..5).map(|m| f[k][m] * f[i][m].conj()).sum::<Complex64>().norm_sqr())
                .sum();
            let quant: f64 = (0..5).map(|m| pw(k, m) * (0..3).map(|i| pw(i, m)).sum::<f64>()).sum();
            let sinr = a * a * p * norm2[k].powi(2) / (a * a * p * inter + p * a * (1.0 - a) * quant + s2 * tr);
            assert!(rel(mc.rates[k], (1.0 + sinr).log2()) < 1e-10);
        }

        // with nothing random left, the closed form is the same number
        let cf = closed_form_rates(&cfg, &g, &th, MomentModel::Exact).unwrap();
        for k in 0..3 {
            assert!(rel(cf.rates[k], mc.rates[k]) < 1e-10);
        }
    }

    /// `∫_0^∞ log2(1 + c x) e^{-x} dx` by composite Simpson on `x = u/(1-u)`.
    fn exp_log_quadrature(c: f64) -> f64 {
        let steps = 20_000;
        let h = 1.0 / steps as f64;
        let f = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let x = u / (1.0 - u);
            (1.0 + c * x).log2() * (-x).exp() / (1.0 - u).powi(2)
        };
        let mut s = f(0.0) + f(1.0);
        for i in 1..steps {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn scalar_rayleigh_matches_quadrature() {
        // M = N = K = 1, LoS-only BS-RIS hop, Rayleigh RIS-user hop:
        // |f|² = εβ X with X ~ Exp(1) and γ = P|f|²/σ²
        let mut cfg = ScenarioConfig::reference(5)
            .with_users(1)
            .with_ris_elements(1)
            .with_antennas(1)
            .with_rician(f64::INFINITY, 0.0)
            .with_dac(DacBits::Infinite);
        cfg.power_w = 10.0;
        cfg.noise_w = 1.0;
        let g = LinkGains { epsilon: 1.0, beta: vec![1.0] };
        let mc = monte_carlo_rates(&cfg, &g, &PhaseVector::zeros(1), &McOptions::trials(100_000)).unwrap();
        let want = exp_log_quadrature(10.0);
        let se = mc.sum_rate_stderr.unwrap();
        assert!((mc.sum_rate - want).abs() < 4.0 * se, "{} vs {want} (se {se})", mc.sum_rate);
    }

    #[test]
    fn exact_moments_match_simulation() {
        let cfg = ScenarioConfig::reference(6).with_users(2).with_ris_elements(8).with_antennas(8);
        let g = scene_for_drop(&cfg, 0).unwrap().gains;
        let th = random_phases(8, 2);
        for c in moment_oracles(&cfg, &g, &th, 20_000).unwrap() {
            let e = c.relative_error(MomentModel::Exact).unwrap();
            assert!(e < 0.03, "{} user {:?}: {e}", c.kind, c.user);
        }
        let mc = monte_carlo_rates(&cfg, &g, &th, &McOptions::trials(20_000)).unwrap();
        let cf = AnalyticRates::new(&cfg, &g, MomentModel::Exact).unwrap().terms(th.as_slice()).unwrap();
        for k in 0..2 {
            assert!(rel(cf.signal[k], mc.signal[k]) < 0.03);
            assert!(rel(cf.interference[k][1 - k], mc.interference[k][1 - k]) < 0.03);
            assert!(rel(cf.dac[k], mc.dac[k]) < 0.03);
        }
        assert!(rel(cf.noise, mc.noise[0]) < 0.03);
    }

    #[test]
    fn closed_form_tracks_simulation_at_reference_point() {
        let cfg = ScenarioConfig::reference(7);
        let g = scene_for_drop(&cfg, 0).unwrap().gains;
        let th = random_phases(16, 3);
        let mc = monte_carlo_rates(&cfg, &g, &th, &McOptions::trials(10_000)).unwrap();
        let cf = closed_form_rates(&cfg, &g, &th, MomentModel::Exact).unwrap();
        assert!(rel(cf.sum_rate, mc.sum_rate) < 0.05, "{} vs {}", cf.sum_rate, mc.sum_rate);
    }

    #[test]
    fn sampled_quantization_noise_agrees_with_its_covariance() {
        let cfg = ScenarioConfig::reference(8).with_ris_elements(8);
        let g = scene_for_drop(&cfg, 0).unwrap().gains;
        let th = random_phases(8, 4);
        let cond = monte_carlo_rates(&cfg, &g, &th, &McOptions::trials(20_000)).unwrap();
        let opts = McOptions { sample_quantization_noise: true, ..McOptions::trials(20_000) };
        let full = monte_carlo_rates(&cfg, &g, &th, &opts).unwrap();
        assert!(rel(full.sum_rate, cond.sum_rate) < 0.03, "{} vs {}", full.sum_rate, cond.sum_rate);
    }

    #[test]
    fn result_does_not_depend_on_thread_count() {
        let cfg = ScenarioConfig::reference(9).with_ris_elements(8);
        let g = scene_for_drop(&cfg, 0).unwrap().gains;
        let th = random_phases(8, 5);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo_rates(&cfg, &g, &th, &McOptions::trials(5_000)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn batches_with_different_offsets_are_independent() {
        let cfg = ScenarioConfig::reference(10).with_ris_elements(4);
        let g = scene_for_drop(&cfg, 0).unwrap().gains;
        let th = random_phases(4, 6);
        let a = monte_carlo_rates(&cfg, &g, &th, &McOptions::trials(100)).unwrap();
        let b = monte_carlo_rates(&cfg, &g, &th, &McOptions { first_trial: 1 << 40, ..McOptions::trials(100) }).unwrap();
        assert_ne!(a.sum_rate, b.sum_rate);
    }
}
