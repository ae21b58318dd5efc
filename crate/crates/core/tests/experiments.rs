use rislab::experiment::{parse_config, run, ExperimentKind, Overrides};

fn settings(kind: ExperimentKind, text: &str) -> rislab::experiment::Settings {
    parse_config(text, kind, &Overrides::default()).unwrap()
}

fn values(t: &rislab::experiment::Table, name: &str) -> Vec<f64> {
    t.column(name).unwrap().into_iter().map(Option::unwrap).collect()
}

#[test]
fn continuous_phases_never_lose_to_their_projection() {
    let s = settings(ExperimentKind::SweepDacBits, "N = 8\nM = 16\nK = 2\nB = 1\ngrid_b = 1, 3, inf\npso_budget = 40\n");
    let r = run(&s).unwrap();
    let (cps, dps) = (values(&r.table, "cps_sum_rate"), values(&r.table, "dps_sum_rate"));
    assert_eq!(cps.len(), 3);
    for (c, d) in cps.iter().zip(&dps) {
        assert!(c >= d, "{c} < {d}");
    }
}

#[test]
fn sum_rate_grows_with_power_for_fixed_phases() {
    let s = settings(ExperimentKind::SweepPower, "grid_N = 16\ngrid_P_dbm = -10, 0, 10, 20, 30\nfast = true\n");
    let r = run(&s).unwrap();
    let rates = values(&r.table, "closed_form_sum_rate");
    assert!(rates.windows(2).all(|w| w[1] > w[0]), "{rates:?}");
}

#[test]
fn more_phase_bits_close_the_gap() {
    let s = settings(ExperimentKind::SweepRisBits, "grid_N = 16\ngrid_B = 1, 6\npso_budget = 60\n");
    let r = run(&s).unwrap();
    let gap = values(&r.table, "relative_gap");
    assert!(gap[1].abs() < gap[0].abs(), "{gap:?}");
}

#[test]
fn drops_share_random_numbers_across_grid_points() {
    let text = "grid_N = 16\ngrid_P_dbm = 0, 10\nfast = true\ndrops = 3\n";
    let a = run(&settings(ExperimentKind::SweepPower, text)).unwrap();
    let b = run(&settings(ExperimentKind::SweepPower, text)).unwrap();
    assert_eq!(a.table.rows, b.table.rows);
}
