//! CSV tables, the metadata sidecar and the plot script.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::run::{Cell, OptimizerRecord, PlotSpec, SweepResult, Table};
use super::spec::Settings;

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `1e-5 <= |x| < 1e12`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn render_cell(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Num(x) => format_number(*x),
        Cell::Text(t) => t.clone(),
        Cell::Empty => String::new(),
    }
}

pub fn render_csv(table: &Table) -> String {
    let mut out = table.columns.join(",");
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.iter().map(render_cell).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: String,
    seed: u64,
    settings: &'a Settings,
    optimizer: &'a [OptimizerRecord],
    plot: &'a PlotSpec,
    files: Vec<String>,
    row_wall_seconds: &'a [f64],
    total_wall_seconds: f64,
    warnings: &'a [String],
}

fn plot_script(plot: &PlotSpec, title: &str) -> String {
    let ys: Vec<String> = plot.y.iter().map(|y| format!("{y:?}")).collect();
    let group = plot.group.as_ref().map_or("None".to_string(), |g| format!("{g:?}"));
    let mut s = String::new();
    let _ = writeln!(s, "#!/usr/bin/env python3");
    let _ = writeln!(s, "\"\"\"Plot {title} from {}.csv next to this script.\"\"\"", plot.source);
    s.push_str(
        r#"import csv
import math
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

"#,
    );
    let _ = writeln!(s, "SOURCE = {:?}", format!("{}.csv", plot.source));
    let _ = writeln!(s, "X = {:?}", plot.x);
    let _ = writeln!(s, "GROUP = {group}");
    let _ = writeln!(s, "YS = [{}]", ys.join(", "));
    let _ = writeln!(s, "X_LABEL = {:?}", plot.x_label);
    let _ = writeln!(s, "Y_LABEL = {:?}", plot.y_label);
    let _ = writeln!(s, "TITLE = {title:?}");
    s.push_str(
        r#"

def number(v):
    if v == "":
        return None
    if v == "inf":
        return math.inf
    try:
        return float(v)
    except ValueError:
        return None


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    with open(os.path.join(here, SOURCE), newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        sys.exit("no rows to plot")
    # An infinite x value is drawn one step past the last finite one.
    finite = [number(r[X]) for r in rows if number(r[X]) not in (None, math.inf)]
    inf_at = (max(finite) + 1) if finite else 0
    groups = {}
    for r in rows:
        groups.setdefault(r[GROUP] if GROUP else "", []).append(r)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for key, members in groups.items():
        for y in YS:
            pts = []
            for r in members:
                xv, yv = number(r[X]), number(r.get(y, ""))
                if xv is None or yv is None:
                    continue
                pts.append((inf_at if xv == math.inf else xv, yv))
            if not pts:
                continue
            pts.sort()
            label = y if not GROUP else f"{y}, {GROUP}={key}"
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    if any(number(r[X]) == math.inf for r in rows):
        ticks = sorted(set(finite)) + [inf_at]
        ax.set_xticks(ticks)
        ax.set_xticklabels([f"{t:g}" for t in ticks[:-1]] + ["inf"])
    ax.set_xlabel(X_LABEL)
    ax.set_ylabel(Y_LABEL)
    ax.set_title(TITLE)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = os.path.join(here, "plot.png")
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
"#,
    );
    s
}

fn write(path: PathBuf, contents: &str) -> Result<String> {
    fs::write(&path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
}

/// Writes `results.csv`, any extra tables, `metadata.json` and `plot.py`
/// into `dir`, creating it if needed. Returns the written file names.
pub fn emit_outputs(result: &SweepResult, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    let mut files = Vec::new();
    for table in std::iter::once(&result.table).chain(&result.extra) {
        files.push(write(dir.join(format!("{}.csv", table.name)), &render_csv(table))?);
    }
    let kind = result.settings.experiment.kind;
    files.push(write(dir.join("plot.py"), &plot_script(&result.plot, kind.name()))?);
    files.push("metadata.json".into());
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: kind.to_string(),
        seed: result.settings.scenario.seed,
        settings: &result.settings,
        optimizer: &result.optimizer,
        plot: &result.plot,
        files: files.clone(),
        row_wall_seconds: &result.row_wall_seconds,
        total_wall_seconds: result.row_wall_seconds.iter().sum(),
        warnings: &result.warnings,
    };
    let json = serde_json::to_string_pretty(&meta).expect("metadata is serializable");
    write(dir.join("metadata.json"), &(json + "\n"))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-2.5), "-2.5");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(123456.789), "123456.789");
        assert_eq!(format_number(2.0 / 3.0 * 1e-7), "6.66666666667e-08");
        assert_eq!(format_number(1e12), "1e+12");
        assert_eq!(format_number(999999999999.0), "999999999999");
        assert_eq!(format_number(0.0001), "0.0001");
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(format_number(f64::NAN), "nan");
    }

    #[test]
    fn formatted_numbers_round_trip_to_twelve_digits() {
        for x in [std::f64::consts::PI, 1.0e-300, 6.02214076e23, -0.000123456789012345] {
            let y: f64 = format_number(x).parse().unwrap();
            assert!(((x - y) / x).abs() < 1e-11, "{x} -> {y}");
        }
    }

    #[test]
    fn csv_layout() {
        let t = Table {
            name: "t".into(),
            columns: vec!["a".into(), "b".into(), "c".into()],
            rows: vec![vec![Cell::Int(3), Cell::Num(0.5), Cell::Empty], vec![Cell::Text("inf".into()), Cell::Num(2.0), Cell::Num(1e-9)]],
        };
        assert_eq!(render_csv(&t), "a,b,c\n3,0.5,\ninf,2,1e-09\n");
    }
}
