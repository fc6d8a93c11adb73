//! Self-contained matplotlib scripts for the CSV outputs.
//!
//! The figure kind is read off the CSV header. Each script is written next
//! to its CSV as `plot_<stem>.py` and draws `<stem>.png`.

use std::path::{Path, PathBuf};

use gevrey_bea::tableau::tableau_by_id;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// Drift against time, one curve per step size.
    DriftSeries,
    /// Log–log panels of a quantity against `h`.
    LogLog,
    /// Semilog panel against `h^{-1/(1+q)}`.
    ExponentialFit,
    /// Semilog panel of the projection error against `m^{1/q}`.
    Projection,
    /// Anything else: a plain table dump.
    Other,
}

fn classify(header: &[String]) -> FigureKind {
    let has = |c: &str| header.iter().any(|h| h == c);
    if has("H_tilde_drift") {
        FigureKind::DriftSeries
    } else if has("x") && has("drift") {
        FigureKind::ExponentialFit
    } else if has("m_root") {
        FigureKind::Projection
    } else if has("h") && (has("error") || has("difference")) {
        FigureKind::LogLog
    } else {
        FigureKind::Other
    }
}

struct CsvInfo {
    header: Vec<String>,
    rows: usize,
    order: Option<usize>,
    n: Option<usize>,
}

fn inspect(path: &Path) -> Result<CsvInfo> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = match rdr.headers() {
        Ok(h) => h.iter().map(|s| s.to_string()).collect(),
        Err(_) => Vec::new(),
    };
    let mut rows = 0;
    let (mut order, mut n) = (None, None);
    for rec in rdr.records() {
        let rec = rec?;
        if rows == 0 {
            let get = |c: &str| header.iter().position(|h| h == c).and_then(|i| rec.get(i));
            order = get("tableau").and_then(|id| tableau_by_id(id).ok()).map(|t| t.order);
            n = get("n").and_then(|v| v.parse().ok());
        }
        rows += 1;
    }
    Ok(CsvInfo { header, rows, order, n })
}

const PRELUDE: &str = r#"import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(HERE, name), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def num(row, key):
    try:
        return float(row[key])
    except (KeyError, ValueError):
        return float("nan")
"#;

fn body(kind: FigureKind, csv_name: &str, stem: &str, info: &CsvInfo) -> String {
    let p = info.order.unwrap_or(2);
    let n = info.n.unwrap_or(p + 2);
    match kind {
        FigureKind::DriftSeries => format!(
            r#"
rows = load("{csv_name}")
hs = sorted({{num(r, "h") for r in rows}}, reverse=True)
fig, (ax_t, ax_h) = plt.subplots(1, 2, figsize=(11, 4))
peak_h, peak_ht = [], []
for h in hs:
    sel = [r for r in rows if num(r, "h") == h]
    t = [num(r, "t") for r in sel]
    ax_t.semilogy(t, [abs(num(r, "H_drift")) + 1e-300 for r in sel], label=f"H, h={{h:g}}")
    ax_t.semilogy(t, [abs(num(r, "H_tilde_drift")) + 1e-300 for r in sel], "--", label=f"H~, h={{h:g}}")
    peak_h.append(max(abs(num(r, "H_drift")) for r in sel))
    peak_ht.append(max(abs(num(r, "H_tilde_drift")) for r in sel))
ax_t.set_xlabel("t")
ax_t.set_ylabel("|drift|")
ax_t.legend(fontsize=6)
ax_h.loglog(hs, peak_h, "o-", label="max |H drift|")
ax_h.loglog(hs, peak_ht, "s-", label="max |H~ drift|")
for order, style in (({p}, ":"), ({n} + 1, "-.")):
    ax_h.loglog(hs, [peak_h[0] * (h / hs[0]) ** order for h in hs], style, label=f"slope {{order}}")
ax_h.set_xlabel("h")
ax_h.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(HERE, "{stem}.png"), dpi=150)
"#
        ),
        FigureKind::LogLog => {
            let y = if info.header.iter().any(|h| h == "error") { "error" } else { "difference" };
            format!(
                r#"
rows = load("{csv_name}")
fig, ax = plt.subplots(figsize=(6, 4))
groups = sorted({{r.get("n", "NA") for r in rows}})
for g in groups:
    sel = [r for r in rows if r.get("n", "NA") == g]
    hs = [num(r, "h") for r in sel]
    ys = [num(r, "{y}") for r in sel]
    ax.loglog(hs, ys, "o-", label=f"n={{g}}")
    if hs:
        for order, style in (({p}, ":"), ({n} + 1, "-.")):
            ax.loglog(hs, [ys[0] * (h / hs[0]) ** order for h in hs], style, color="gray")
ax.set_xlabel("h")
ax.set_ylabel("{y}")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(HERE, "{stem}.png"), dpi=150)
"#
            )
        }
        FigureKind::ExponentialFit => format!(
            r#"
rows = load("{csv_name}")
xs = [num(r, "x") for r in rows]
ds = [num(r, "drift") for r in rows]
fig, ax = plt.subplots(figsize=(6, 4))
ax.semilogy(xs, ds, "o-")
ax.set_xlabel("h^(-1/(1+q))")
ax.set_ylabel("per-step drift of H~")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "{stem}.png"), dpi=150)
"#
        ),
        FigureKind::Projection => format!(
            r#"
rows = load("{csv_name}")
xs = [num(r, "m_root") for r in rows]
fig, ax = plt.subplots(figsize=(6, 4))
ax.semilogy(xs, [num(r, "error_Y1") for r in rows], "o-", label="error")
ax.semilogy(xs, [num(r, "bound_shape") for r in rows], "--", label="m^-L exp(-tau m^(1/q))")
ax.set_xlabel("m^(1/q)")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, "{stem}.png"), dpi=150)
"#
        ),
        FigureKind::Other => format!(
            r#"
rows = load("{csv_name}")
for r in rows:
    print(r)
"#
        ),
    }
}

/// Writes one script per CSV into `out_dir` and returns the script paths.
///
/// Every path is checked before anything is written; missing files are
/// reported together.
pub fn emit_plots(csvs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let missing: Vec<String> = csvs
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::Io(format!("missing CSV: {}", missing.join(", "))));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for csv_path in csvs {
        let info = inspect(csv_path)?;
        let stem = csv_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| HarnessError::Io(format!("bad file name {}", csv_path.display())))?;
        let script_path = out_dir.join(format!("plot_{stem}.py"));
        let rel = relative_to(csv_path, out_dir);
        let mut text = String::from(PRELUDE);
        if info.rows == 0 {
            text.push_str(&format!("\n# WARNING: {rel} contains no data rows; nothing to plot.\n"));
        } else {
            text.push_str(&body(classify(&info.header), &rel, stem, &info));
        }
        std::fs::write(&script_path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", script_path.display())))?;
        written.push(script_path);
    }
    Ok(written)
}

/// Path of `target` relative to `base` when possible, else absolute.
fn relative_to(target: &Path, base: &Path) -> String {
    let abs = |p: &Path| std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let (t, b) = (abs(target), abs(base));
    match t.strip_prefix(&b) {
        Ok(rel) => rel.display().to_string(),
        Err(_) => {
            let common = t.components().zip(b.components()).take_while(|(x, y)| x == y).count();
            let ups = b.components().count() - common;
            let mut rel = PathBuf::new();
            for _ in 0..ups {
                rel.push("..");
            }
            for c in t.components().skip(common) {
                rel.push(c);
            }
            rel.display().to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        let h = |cols: &[&str]| cols.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(classify(&h(&["h", "t", "H_tilde_drift"])), FigureKind::DriftSeries);
        assert_eq!(classify(&h(&["h", "x", "drift"])), FigureKind::ExponentialFit);
        assert_eq!(classify(&h(&["h", "error", "slope_estimate"])), FigureKind::LogLog);
        assert_eq!(classify(&h(&["m", "m_root", "error_Y1"])), FigureKind::Projection);
        assert_eq!(classify(&h(&["metric", "value"])), FigureKind::Other);
    }

    #[test]
    fn relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("a");
        std::fs::create_dir_all(&sub).unwrap();
        let f = dir.path().join("x.csv");
        std::fs::write(&f, "h\n").unwrap();
        assert_eq!(relative_to(&f, dir.path()), "x.csv");
        assert_eq!(relative_to(&f, &sub), "../x.csv");
    }
}
