//! Re-verification of a finished run directory.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::RunError;
use crate::manifest::{sha256_hex, RunManifest};
use crate::output::Table;

#[derive(Clone, Debug)]
pub struct Report {
    pub text: String,
    pub total: usize,
    pub failed: usize,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

/// Minimum of the residual column relative to the initial energy; `None` for tables
/// without a residual column.
fn residual_violation(name: &str, t: &Table) -> Option<(f64, f64)> {
    let res = t.column("residual")?;
    let energy = if name.ends_with("_edi.csv") { t.column("energy")? } else { t.column("E_eps")? };
    let scale = energy.iter().map(|e| e.abs()).fold(f64::MIN_POSITIVE, f64::max);
    let (k, min) = res
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, r)| if r < acc.1 { (k, r) } else { acc });
    let t_col = t.column("t")?;
    (min < -1e-12 * scale).then(|| (t_col.get(k).copied().unwrap_or(f64::NAN), min))
}

/// Checks every artifact against its recorded checksum, re-derives the sign of the
/// stored EDI residuals, and lists the recorded checks. The text ends with a verdict line.
pub fn report(dir: &Path) -> Result<Report, RunError> {
    let m = RunManifest::load(dir)?;
    if m.artifacts.is_empty() {
        return Err(RunError::Report(format!("{}: manifest lists no artifacts", dir.display())));
    }
    let mut text = String::new();
    let _ = writeln!(text, "{} ({}), config {}", m.experiment, m.kind, &m.config_hash[..m.config_hash.len().min(12)]);
    let mut total = 0;
    let mut failed = 0;
    let mut line = |text: &mut String, ok: bool, name: &str, detail: &str| {
        total += 1;
        if !ok {
            failed += 1;
        }
        let _ = writeln!(text, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    };
    for a in &m.artifacts {
        let path = dir.join(&a.file);
        let bytes = std::fs::read(&path).map_err(|_| RunError::Report(format!("missing artifact {}", a.file)))?;
        let sum = sha256_hex(&bytes);
        if sum != a.sha256 {
            line(&mut text, false, &format!("checksum[{}]", a.file), "contents differ from the manifest");
            continue;
        }
        if a.file.ends_with(".csv") {
            let t = Table::from_bytes(&bytes).map_err(|e| RunError::Report(format!("{}: {e}", a.file)))?;
            if let Some((t_at, r)) = residual_violation(&a.file, &t) {
                line(
                    &mut text,
                    false,
                    &format!("edi_sign[{}]", a.file),
                    &format!("energy-dissipation inequality violated at t = {t_at}: residual {r:e}"),
                );
            }
        }
    }
    for c in &m.checks {
        line(&mut text, c.passed, &c.name, &c.detail);
    }
    let _ = if failed == 0 {
        writeln!(text, "PASS {total}/{total}")
    } else {
        writeln!(text, "FAIL {}/{total}", total - failed)
    };
    Ok(Report { text, total, failed })
}
