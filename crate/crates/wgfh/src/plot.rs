//! gnuplot scripts for the emitted tables. Run with `gnuplot plot.gp` inside the
//! output directory; each script writes PNG files next to the tables.

use crate::config::Kind;

const PREAMBLE: &str = "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\nset grid\n";

fn with_suffix<'a>(files: &'a [String], suffix: &str) -> Vec<&'a str> {
    files.iter().filter(|f| f.ends_with(suffix)).map(String::as_str).collect()
}

fn overlay(out: &str, title: &str, files: &[&str], using: &str) -> String {
    if files.is_empty() {
        return String::new();
    }
    let series: Vec<String> = files
        .iter()
        .map(|f| format!("'{f}' using {using} with lines title '{}'", f.trim_end_matches(".csv")))
        .collect();
    format!("set output '{out}'\nset title '{title}'\nplot {}\n", series.join(", \\\n     "))
}

pub fn script(kind: Kind, files: &[String]) -> String {
    let mut s = String::from(PREAMBLE);
    match kind {
        Kind::Solve => {
            s += &overlay("diagnostics.png", "free energy", &with_suffix(files, "_diagnostics.csv"), "1:5");
            let last: Vec<&str> = files
                .iter()
                .filter(|f| f.contains("_t") && !f.ends_with("_diagnostics.csv") && f.ends_with(".csv"))
                .map(String::as_str)
                .collect();
            s += &overlay("snapshots.png", "f at the report times", &last, "1:(column('f'))");
            s += "set output 'convergence.png'\nset logscale xy\nset title 'distance to the limit'\nplot 'convergence.csv' using 1:2 with linespoints\nunset logscale\n";
        }
        Kind::Effective => {
            s += "set output 'effective.png'\nset title 'effective mobility'\nplot 'effective.csv' using 1:(column('B_11')) with linespoints\n";
        }
        Kind::Edi | Kind::Sweep => {
            s += &overlay("edi_residual.png", "EDI residual", &with_suffix(files, "_edi.csv"), "1:5");
            s += &overlay("energy.png", "free energy", &with_suffix(files, "_edi.csv"), "1:2");
            if kind == Kind::Sweep {
                s += "set output 'sweep.png'\nset title 'energy difference to the limit'\nplot 'sweep.csv' using 2:($3-$6) with points\n";
            }
        }
        Kind::Metric => {
            s += "set output 'metric.png'\nset logscale x\nset title 'distances'\nplot 'metric.csv' using 1:5 with linespoints, '' using 1:6 with lines, '' using 1:7 with lines\nunset logscale\n";
            s += "set output 'wasserstein.png'\nset logscale x\nset title 'Wasserstein distances'\nplot 'metric.csv' using 1:8 with linespoints, '' using 1:9 with lines, '' using 1:10 with lines\nunset logscale\n";
        }
        Kind::Gamma => {
            s += "set output 'gamma.png'\nset logscale xy\nset title 'recovery energy error'\nplot 'gamma.csv' using 1:4 with linespoints\nunset logscale\n";
        }
        Kind::Checkerboard => {
            s += "set output 'checkerboard.png'\nset logscale x\nset title 'geodesic distance'\nplot 'checkerboard.csv' using 1:2 with linespoints, '' using 1:3 with lines, '' using 1:5 with lines\nunset logscale\n";
        }
    }
    s
}
