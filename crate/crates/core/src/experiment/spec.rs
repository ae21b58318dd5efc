//! Flat `key = value` experiment files.
//!
//! One pair per line, `#` starts a comment, keys are case-sensitive. Absent
//! keys take the reference scenario values. Every error carries the line it
//! was raised on.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::config::{dbm_to_watts, draw_user_angles, wrap_angle, ScenarioConfig};
use crate::error::{Error, Result};
use crate::phases::PhaseRegime;
use crate::precoding::DacBits;
use crate::pso::Boundary;
use crate::rate::MomentModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Closed form against Monte Carlo over an (N, P) grid.
    Validate,
    /// Optimized closed-form rate over an (N, P) grid.
    SweepPower,
    /// CPS and DPS rates over the DAC resolution.
    SweepDacBits,
    /// DPS rate over the RIS phase resolution.
    SweepRisBits,
    /// One optimized design with its phases and convergence trace.
    Optimize,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Validate,
        ExperimentKind::SweepPower,
        ExperimentKind::SweepDacBits,
        ExperimentKind::SweepRisBits,
        ExperimentKind::Optimize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Validate => "validate",
            ExperimentKind::SweepPower => "sweep-power",
            ExperimentKind::SweepDacBits => "sweep-dac-bits",
            ExperimentKind::SweepRisBits => "sweep-ris-bits",
            ExperimentKind::Optimize => "optimize",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment `{s}`")))
    }
}

/// Run-level settings that are not part of the physical scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub grid_n: Vec<usize>,
    pub grid_p_dbm: Vec<f64>,
    pub grid_b: Vec<DacBits>,
    pub grid_ris_bits: Vec<u32>,
    pub mc_trials: usize,
    pub mc_sample_quantization_noise: bool,
    /// Cap on PSO iterations; `None` keeps `T = 200N`.
    pub pso_budget: Option<usize>,
    pub pso_boundary: Boundary,
    pub pso_per_dimension_random: bool,
    pub pso_memoryless_stagnation: bool,
    /// Fixed random phases instead of PSO.
    pub fast: bool,
    /// User drops averaged per grid point.
    pub drops: usize,
    /// Coordinate passes over neighbouring grid points after projection.
    pub dps_local_search: usize,
    pub moment_model: MomentModel,
}

impl ExperimentSpec {
    /// Defaults for `kind` on the given scenario.
    pub fn defaults(kind: ExperimentKind, scenario: &ScenarioConfig) -> Self {
        let (grid_n, grid_p_dbm, mc_trials, pso_budget) = match kind {
            ExperimentKind::Validate => (vec![16, 36, 64], p_grid(), 10_000, Some(400)),
            ExperimentKind::SweepPower => (vec![16, 36, 64], p_grid(), 0, None),
            ExperimentKind::SweepRisBits => (vec![16, 64], vec![], 0, None),
            ExperimentKind::SweepDacBits | ExperimentKind::Optimize => (vec![scenario.n], vec![], 0, None),
        };
        let mut grid_b = (1..=5).map(DacBits::Finite).collect::<Vec<_>>();
        grid_b.push(DacBits::Infinite);
        Self {
            kind,
            grid_n,
            grid_p_dbm,
            grid_b,
            grid_ris_bits: vec![1, 2, 3, 4, 5, 6],
            mc_trials,
            mc_sample_quantization_noise: false,
            pso_budget,
            pso_boundary: Boundary::default(),
            pso_per_dimension_random: false,
            pso_memoryless_stagnation: false,
            fast: false,
            drops: 1,
            dps_local_search: 0,
            moment_model: MomentModel::default(),
        }
    }

    /// Number of grid points the run will produce.
    pub fn grid_len(&self) -> usize {
        match self.kind {
            ExperimentKind::Validate | ExperimentKind::SweepPower => self.grid_n.len() * self.grid_p_dbm.len(),
            ExperimentKind::SweepDacBits => self.grid_n.len() * self.grid_b.len(),
            ExperimentKind::SweepRisBits => self.grid_n.len() * self.grid_ris_bits.len(),
            ExperimentKind::Optimize => 1,
        }
    }
}

fn p_grid() -> Vec<f64> {
    (0..9).map(|i| -10.0 + 5.0 * i as f64).collect()
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub pso_budget: Option<usize>,
    pub fast: bool,
    pub drops: Option<usize>,
}

/// Fully resolved inputs of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub scenario: ScenarioConfig,
    pub experiment: ExperimentSpec,
}

/// Keys accepted in experiment files.
pub const KEYS: &[&str] = &[
    "seed",
    "M",
    "N",
    "K",
    "P_dbm",
    "sigma2_dbm",
    "K_G",
    "K_k",
    "b",
    "B",
    "d_over_lambda",
    "phi_r",
    "phi_t",
    "phi_kt",
    "bs_pos",
    "ris_pos",
    "user_center",
    "user_radius",
    "PL0_db",
    "d0",
    "kappa_bi",
    "kappa_iu",
    "grid_N",
    "grid_P_dbm",
    "grid_b",
    "grid_B",
    "mc_trials",
    "mc_sample_quantization_noise",
    "pso_budget",
    "pso_boundary",
    "pso_per_dimension_random",
    "pso_memoryless_stagnation",
    "fast",
    "drops",
    "dps_local_search",
    "moment_model",
];

struct Entry {
    line: usize,
    value: String,
}

/// Splits the text into `key -> (line, value)`, rejecting unknown and
/// repeated keys.
fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::ConfigParse { line, msg: format!("expected `key = value`, got `{body}`") });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::ConfigParse { line, msg: format!("unknown key `{key}`") });
        }
        if value.is_empty() && !key.starts_with("grid_") {
            return Err(Error::ConfigParse { line, msg: format!("`{key}` has no value") });
        }
        if let Some(prev) = out.insert(key.to_string(), Entry { line, value: value.to_string() }) {
            return Err(Error::ConfigParse { line, msg: format!("`{key}` already set on line {}", prev.line) });
        }
    }
    Ok(out)
}

struct Fields(BTreeMap<String, Entry>);

impl Fields {
    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|msg| Error::ConfigParse { line: e.line, msg: format!("`{key}`: {msg}") }),
        }
    }

    fn line(&self, key: &str) -> usize {
        self.0.get(key).map_or(0, |e| e.line)
    }
}

fn float(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("expected a number, got `{s}`"))?;
    if x.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(x)
}

fn finite(s: &str) -> std::result::Result<f64, String> {
    let x = float(s)?;
    if !x.is_finite() {
        return Err(format!("expected a finite number, got `{s}`"));
    }
    Ok(x)
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let x = float(s)?;
    if x < 0.0 {
        return Err(format!("must be >= 0 (got {s})"));
    }
    Ok(x)
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let x = finite(s)?;
    if x <= 0.0 {
        return Err(format!("must be > 0 (got {s})"));
    }
    Ok(x)
}

fn count(s: &str) -> std::result::Result<usize, String> {
    let x: i64 = s.parse().map_err(|_| format!("expected an integer, got `{s}`"))?;
    if x < 1 {
        return Err(format!("must be >= 1 (got {x})"));
    }
    Ok(x as usize)
}

fn whole(s: &str) -> std::result::Result<usize, String> {
    let x: i64 = s.parse().map_err(|_| format!("expected an integer, got `{s}`"))?;
    if x < 0 {
        return Err(format!("must be >= 0 (got {x})"));
    }
    Ok(x as usize)
}

fn flag(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn dac_bits(s: &str) -> std::result::Result<DacBits, String> {
    match s {
        "inf" => Ok(DacBits::Infinite),
        _ => count(s).map(|b| DacBits::Finite(b as u32)),
    }
}

fn ris_bits(s: &str) -> std::result::Result<u32, String> {
    let b = count(s)?;
    if b > 32 {
        return Err(format!("must be <= 32 (got {b})"));
    }
    Ok(b as u32)
}

fn regime(s: &str) -> std::result::Result<PhaseRegime, String> {
    match s {
        "continuous" => Ok(PhaseRegime::Continuous),
        _ => ris_bits(s).map(PhaseRegime::Discrete),
    }
}

fn list<T>(item: impl Fn(&str) -> std::result::Result<T, String>) -> impl Fn(&str) -> std::result::Result<Vec<T>, String> {
    move |s| match s.trim() {
        "" => Ok(Vec::new()),
        s => s.split(',').map(|x| item(x.trim())).collect(),
    }
}

fn point(s: &str) -> std::result::Result<[f64; 2], String> {
    match list(finite)(s)?.as_slice() {
        [x, y] => Ok([*x, *y]),
        _ => Err(format!("expected `x, y`, got `{s}`")),
    }
}

fn parsed<T>(s: &str) -> std::result::Result<T, String>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

/// Resolves experiment-file text into scenario and run settings.
pub fn parse_config(text: &str, kind: ExperimentKind, overrides: &Overrides) -> Result<Settings> {
    let f = Fields(tokenize(text)?);

    let seed = match overrides.seed {
        Some(s) => s,
        None => f.get("seed", |s| s.parse::<u64>().map_err(|_| format!("expected a u64, got `{s}`")))?.unwrap_or(1),
    };
    let mut sc = ScenarioConfig::reference(seed);
    if let Some(k) = f.get("K", count)? {
        sc = sc.with_users(k);
    }
    if let Some(m) = f.get("M", count)? {
        sc.m = m;
    }
    if let Some(n) = f.get("N", count)? {
        sc.n = n;
    }
    if let Some(p) = f.get("P_dbm", finite)? {
        sc.power_w = dbm_to_watts(p);
    }
    if let Some(p) = f.get("sigma2_dbm", finite)? {
        sc.noise_w = dbm_to_watts(p);
    }
    if let Some(x) = f.get("K_G", non_negative)? {
        sc.k_g = x;
    }
    if let Some(x) = f.get("K_k", list(non_negative))? {
        sc.k_users = match x.as_slice() {
            [one] => vec![*one; sc.k],
            many if many.len() == sc.k => many.to_vec(),
            many => {
                return Err(Error::ConfigParse {
                    line: f.line("K_k"),
                    msg: format!("`K_k`: expected 1 or K = {} values, got {}", sc.k, many.len()),
                })
            }
        };
    }
    if let Some(b) = f.get("b", dac_bits)? {
        sc.dac = b;
    }
    if let Some(r) = f.get("B", regime)? {
        sc.ris = r;
    }
    if let Some(x) = f.get("d_over_lambda", positive)? {
        sc.d_over_lambda = x;
    }
    if let Some(x) = f.get("phi_r", finite)? {
        sc.phi_r = wrap_angle(x);
    }
    if let Some(x) = f.get("phi_t", finite)? {
        sc.phi_t = wrap_angle(x);
    }
    match f.get("phi_kt", list(finite))? {
        Some(a) if a.len() == sc.k => sc.phi_users = a.into_iter().map(wrap_angle).collect(),
        Some(a) => {
            return Err(Error::ConfigParse {
                line: f.line("phi_kt"),
                msg: format!("`phi_kt`: expected K = {} angles, got {}", sc.k, a.len()),
            })
        }
        None => sc.phi_users = draw_user_angles(seed, sc.k),
    }
    if let Some(p) = f.get("bs_pos", point)? {
        sc.bs_pos = p;
    }
    if let Some(p) = f.get("ris_pos", point)? {
        sc.ris_pos = p;
    }
    if let Some(p) = f.get("user_center", point)? {
        sc.user_center = p;
    }
    if let Some(x) = f.get("user_radius", non_negative)? {
        sc.user_radius = x;
    }
    if let Some(x) = f.get("PL0_db", finite)? {
        sc.pl0_db = x;
    }
    if let Some(x) = f.get("d0", positive)? {
        sc.d0 = x;
    }
    if let Some(x) = f.get("kappa_bi", positive)? {
        sc.kappa_bi = x;
    }
    if let Some(x) = f.get("kappa_iu", positive)? {
        sc.kappa_iu = x;
    }
    sc.validate()?;

    let mut ex = ExperimentSpec::defaults(kind, &sc);
    if let Some(g) = f.get("grid_N", list(count))? {
        ex.grid_n = g;
    }
    if let Some(g) = f.get("grid_P_dbm", list(finite))? {
        ex.grid_p_dbm = g;
    }
    if let Some(g) = f.get("grid_b", list(dac_bits))? {
        ex.grid_b = g;
    }
    if let Some(g) = f.get("grid_B", list(ris_bits))? {
        ex.grid_ris_bits = g;
    }
    if let Some(t) = f.get("mc_trials", whole)? {
        ex.mc_trials = t;
    }
    if let Some(x) = f.get("mc_sample_quantization_noise", flag)? {
        ex.mc_sample_quantization_noise = x;
    }
    if let Some(t) = f.get("pso_budget", whole)? {
        ex.pso_budget = Some(t);
    }
    if let Some(x) = f.get("pso_boundary", parsed)? {
        ex.pso_boundary = x;
    }
    if let Some(x) = f.get("pso_per_dimension_random", flag)? {
        ex.pso_per_dimension_random = x;
    }
    if let Some(x) = f.get("pso_memoryless_stagnation", flag)? {
        ex.pso_memoryless_stagnation = x;
    }
    if let Some(x) = f.get("fast", flag)? {
        ex.fast = x;
    }
    if let Some(x) = f.get("drops", count)? {
        ex.drops = x;
    }
    if let Some(x) = f.get("dps_local_search", whole)? {
        ex.dps_local_search = x;
    }
    if let Some(x) = f.get("moment_model", parsed)? {
        ex.moment_model = x;
    }

    if let Some(t) = overrides.trials {
        ex.mc_trials = t;
    }
    if let Some(t) = overrides.pso_budget {
        ex.pso_budget = Some(t);
    }
    if let Some(d) = overrides.drops {
        if d == 0 {
            return Err(Error::InvalidConfig("--drops must be >= 1".into()));
        }
        ex.drops = d;
    }
    ex.fast |= overrides.fast;

    if ex.moment_model == MomentModel::Simplified
        && (sc.k_g.is_infinite() || sc.k_users.iter().any(|k| k.is_infinite()))
    {
        return Err(Error::InvalidConfig("the simplified moment model needs finite Rician factors".into()));
    }
    if kind == ExperimentKind::Validate && ex.mc_trials == 1 {
        return Err(Error::InvalidConfig("mc_trials must be 0 or >= 2 for standard errors".into()));
    }
    Ok(Settings { scenario: sc, experiment: ex })
}

/// Reads and resolves an experiment file; `None` gives all defaults.
pub fn load_config(path: Option<&Path>, kind: ExperimentKind, overrides: &Overrides) -> Result<Settings> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.display().to_string(), source })?,
        None => String::new(),
    };
    parse_config(&text, kind, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Settings> {
        parse_config(text, ExperimentKind::Validate, &Overrides::default())
    }

    #[test]
    fn empty_file_gives_reference_defaults() {
        let s = parse("").unwrap();
        assert_eq!(s.scenario, ScenarioConfig::reference(1));
        let sc = &s.scenario;
        assert_eq!((sc.m, sc.k), (64, 6));
        assert!((sc.power_w - 1.0).abs() < 1e-15);
        assert!((sc.noise_w - 10f64.powf(-13.4)).abs() < 1e-25);
        assert_eq!((sc.k_g, sc.k_users[0]), (1.0, 10.0));
        assert_eq!((sc.dac, sc.ris), (DacBits::Finite(1), PhaseRegime::Discrete(2)));
        assert_eq!(s.experiment.mc_trials, 10_000);
    }

    #[test]
    fn single_override() {
        let s = parse("# power only\nP_dbm = 10   # dBm\n").unwrap();
        assert!((s.scenario.power_w - 0.01).abs() < 1e-15);
        let mut want = ScenarioConfig::reference(1);
        want.power_w = s.scenario.power_w;
        assert_eq!(s.scenario, want);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("N = 8\n\nM = -1\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains(">= 1"), "{err}");
        assert!(matches!(parse("\nfoo = 2").unwrap_err(), Error::ConfigParse { line: 2, .. }));
        assert!(matches!(parse("N 8").unwrap_err(), Error::ConfigParse { line: 1, .. }));
        assert!(matches!(parse("N = 8\nN = 9").unwrap_err(), Error::ConfigParse { line: 2, .. }));
        assert!(matches!(parse("b = zero").unwrap_err(), Error::ConfigParse { line: 1, .. }));
        assert!(matches!(parse("K = 2\nK_k = 1, 2, 3").unwrap_err(), Error::ConfigParse { line: 2, .. }));
        assert!(matches!(parse("fast = yes").unwrap_err(), Error::ConfigParse { line: 1, .. }));
    }

    #[test]
    fn grids_and_markers() {
        let s = parse("grid_b = 1, 3, inf\ngrid_B = 1,2\nB = continuous\ngrid_N = 4\ngrid_P_dbm = -5, 0.5").unwrap();
        assert_eq!(s.experiment.grid_b, vec![DacBits::Finite(1), DacBits::Finite(3), DacBits::Infinite]);
        assert_eq!(s.experiment.grid_ris_bits, vec![1, 2]);
        assert_eq!(s.scenario.ris, PhaseRegime::Continuous);
        assert_eq!(s.experiment.grid_n, vec![4]);
        assert_eq!(s.experiment.grid_p_dbm, vec![-5.0, 0.5]);
        assert!(parse("grid_P_dbm =").unwrap().experiment.grid_p_dbm.is_empty());
        assert!(matches!(parse("N =").unwrap_err(), Error::ConfigParse { line: 1, .. }));
    }

    #[test]
    fn overrides_win_and_seed_redraws_angles() {
        let o = Overrides { seed: Some(9), trials: Some(0), pso_budget: Some(5), fast: true, drops: Some(3) };
        let s = parse_config("seed = 2\nmc_trials = 50", ExperimentKind::Validate, &o).unwrap();
        assert_eq!(s.scenario.seed, 9);
        assert_eq!(s.scenario.phi_users, draw_user_angles(9, 6));
        assert_eq!(s.experiment.mc_trials, 0);
        assert_eq!(s.experiment.pso_budget, Some(5));
        assert!(s.experiment.fast);
        assert_eq!(s.experiment.drops, 3);
    }

    #[test]
    fn explicit_angles_and_per_user_factors() {
        let s = parse("K = 2\nphi_kt = 0.5, -0.5\nK_k = 3, 4").unwrap();
        assert_eq!(s.scenario.phi_users, vec![0.5, wrap_angle(-0.5)]);
        assert_eq!(s.scenario.k_users, vec![3.0, 4.0]);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
    }
}
