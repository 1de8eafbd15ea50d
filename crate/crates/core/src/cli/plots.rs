//! Static SVG figures drawn from report directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::Modality;
use crate::error::{Error, Result};
use crate::eval::{interpolate_tpr, mean_std};

use super::runner::CellMetrics;

const W: f64 = 520.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 7] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (W - 1.5 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        H - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (H - 1.5 * MARGIN)
    }
}

fn open_svg(title: &str, frame: &Frame, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (
        frame.px(frame.x.0),
        frame.px(frame.x.1),
        frame.py(frame.y.0),
        frame.py(frame.y.1),
    );
    let _ = writeln!(
        s,
        r#"<rect class="axes" x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = frame.x.0 + t * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + t * (frame.y.1 - frame.y.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            frame.px(xv),
            y0 + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            frame.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 18.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text class="ylabel" x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn polyline(frame: &Frame, pts: impl Iterator<Item = (f64, f64)>) -> String {
    let mut d = String::new();
    for (i, (x, y)) in pts.enumerate() {
        let _ = write!(
            d,
            "{}{:.2},{:.2} ",
            if i == 0 { "M" } else { "L" },
            frame.px(x),
            frame.py(y)
        );
    }
    d.trim_end().to_string()
}

fn legend(s: &mut String, i: usize, label: &str, color: &str) {
    let y = 2.0 * MARGIN / 1.5 + 16.0 * i as f64;
    let x = W - 2.6 * MARGIN;
    let _ = writeln!(
        s,
        r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
        y - 9.0,
        x + 14.0,
        y,
        escape(label)
    );
}

fn read_csv(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.records()
        .map(|rec| {
            rec.map(|r| r.iter().map(str::to_owned).collect())
                .map_err(|e| Error::csv(path, e))
        })
        .collect()
}

fn num(path: &Path, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Csv {
        path: path.to_path_buf(),
        message: format!("not a number: {v}"),
    })
}

/// Mean ROC on a 101-point FPR grid from a `fold,fpr,tpr` file.
fn mean_roc_from_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut curves: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for row in read_csv(path)? {
        let fold = num(path, &row[0])? as u64;
        curves
            .entry(fold)
            .or_default()
            .push((num(path, &row[1])?, num(path, &row[2])?));
    }
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for &f in &grid {
        let at: Vec<f64> = curves.values().map(|c| interpolate_tpr(c, f)).collect();
        let (m, s) = mean_std(&at);
        mean.push(m);
        std.push(s);
    }
    Ok((grid, mean, std))
}

fn cell_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if root.join("metrics.json").is_file() {
        out.push(root.to_path_buf());
    }
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut subdirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    out.extend(
        subdirs
            .into_iter()
            .filter(|p| p.join("metrics.json").is_file()),
    );
    Ok(out)
}

fn load_metrics(dir: &Path) -> Result<CellMetrics> {
    let path = dir.join("metrics.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(&path, e))
}

/// Draws every figure the reports under `root` support; returns the files
/// written. Errors if `root` holds no report.
pub fn render_plots(root: &Path) -> Result<Vec<PathBuf>> {
    let dirs = cell_dirs(root)?;
    if dirs.is_empty() {
        return Err(Error::MissingReport(format!(
            "no metrics.json under {}",
            root.display()
        )));
    }
    let mut written = Vec::new();
    let mut by_scenario: BTreeMap<String, Vec<(String, PathBuf)>> = BTreeMap::new();
    for dir in &dirs {
        let m = load_metrics(dir)?;
        let scenario = m.scenario.name().to_string();
        let roc = dir.join(format!("roc_{scenario}_{}.csv", m.configuration));
        if !roc.is_file() {
            return Err(Error::MissingReport(roc.display().to_string()));
        }
        by_scenario
            .entry(scenario)
            .or_default()
            .push((m.configuration.clone(), roc));

        let lc = dir.join("learning_curve.csv");
        if lc.is_file() {
            let out = dir.join("learning_curve.svg");
            write(
                &out,
                &learning_curve_svg(&lc, &format!("{} {}", m.scenario.name(), m.configuration))?,
            )?;
            written.push(out);
        }
        for (modality, ratios) in &m.pca_explained_variance {
            let name = modality.name().to_lowercase();
            let csv = dir.join(format!("pca_{name}.csv"));
            if csv.is_file() {
                let out = dir.join(format!("pca_{name}.svg"));
                write(&out, &pca_svg(&csv, *modality, ratios)?)?;
                written.push(out);
            }
        }
    }
    for (scenario, cells) in &by_scenario {
        let out = root.join(format!("roc_{scenario}.svg"));
        write(&out, &roc_svg(scenario, cells)?)?;
        written.push(out);
    }
    Ok(written)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One shaded ±std band and one mean path per configuration.
pub fn roc_svg(scenario: &str, cells: &[(String, PathBuf)]) -> Result<String> {
    let frame = Frame {
        x: (0.0, 1.0),
        y: (0.0, 1.0),
    };
    let mut s = open_svg(
        &format!("Mean ROC, {scenario}"),
        &frame,
        "False positive rate",
        "True positive rate",
    );
    let diag = polyline(&frame, [(0.0, 0.0), (1.0, 1.0)].into_iter());
    let _ = writeln!(
        s,
        r##"<path d="{diag}" stroke="#999" stroke-dasharray="4 4" fill="none"/>"##
    );
    for (i, (config, path)) in cells.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let (grid, mean, std) = mean_roc_from_csv(path)?;
        let upper = grid
            .iter()
            .zip(mean.iter().zip(&std))
            .map(|(&x, (m, s))| (x, (m + s).min(1.0)));
        let lower = grid
            .iter()
            .zip(mean.iter().zip(&std))
            .rev()
            .map(|(&x, (m, s))| (x, (m - s).max(0.0)));
        let band = polyline(&frame, upper.chain(lower));
        let _ = writeln!(
            s,
            r#"<path class="band" data-config="{config}" d="{band} Z" fill="{color}" fill-opacity="0.15" stroke="none"/>"#
        );
        let line = polyline(&frame, grid.iter().copied().zip(mean.iter().copied()));
        let _ = writeln!(
            s,
            r#"<path class="mean" data-config="{config}" d="{line}" stroke="{color}" stroke-width="2" fill="none"/>"#
        );
        legend(&mut s, i, config, color);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn learning_curve_svg(path: &Path, title: &str) -> Result<String> {
    let rows = read_csv(path)?;
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| Ok((num(path, &r[1])?, num(path, &r[2])?, num(path, &r[3])?)))
        .collect::<Result<_>>()?;
    let xmax = pts.iter().map(|p| p.0).fold(1.0, f64::max);
    let frame = Frame {
        x: (0.0, xmax),
        y: (0.0, 1.0),
    };
    let mut s = open_svg(
        &format!("Learning curve, {title}"),
        &frame,
        "Training samples",
        "ROC-AUC",
    );
    let upper = pts.iter().map(|p| (p.0, (p.1 + p.2).min(1.0)));
    let lower = pts.iter().rev().map(|p| (p.0, (p.1 - p.2).max(0.0)));
    let band = polyline(&frame, upper.chain(lower));
    let _ = writeln!(
        s,
        r#"<path class="band" d="{band} Z" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
        PALETTE[0]
    );
    let line = polyline(&frame, pts.iter().map(|p| (p.0, p.1)));
    let _ = writeln!(
        s,
        r#"<path class="mean" d="{line}" stroke="{}" stroke-width="2" fill="none"/>"#,
        PALETTE[0]
    );
    for p in &pts {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
            frame.px(p.0),
            frame.py(p.1),
            PALETTE[0]
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Score plot coloured by group, axis labels carrying explained variance.
pub fn pca_svg(path: &Path, modality: Modality, ratios: &[f64]) -> Result<String> {
    let rows = read_csv(path)?;
    let pts: Vec<(String, f64, f64)> = rows
        .iter()
        .map(|r| Ok((r[1].clone(), num(path, &r[2])?, num(path, &r[3])?)))
        .collect::<Result<_>>()?;
    let span = |f: fn(&(String, f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.05).max(1e-9);
        (lo - pad, hi + pad)
    };
    let frame = Frame {
        x: span(|p| p.1),
        y: span(|p| p.2),
    };
    let pct = |i: usize| ratios.get(i).map(|r| r * 100.0).unwrap_or(0.0);
    let mut s = open_svg(
        &format!("PCA, {}", modality.name()),
        &frame,
        &format!("PC1 ({:.1}%)", pct(0)),
        &format!("PC2 ({:.1}%)", pct(1)),
    );
    let mut groups: Vec<&str> = pts.iter().map(|p| p.0.as_str()).collect();
    groups.sort();
    groups.dedup();
    for (gi, g) in groups.iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        for p in pts.iter().filter(|p| p.0 == *g) {
            let _ = writeln!(
                s,
                r#"<circle class="{g}" cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
                frame.px(p.1),
                frame.py(p.2)
            );
        }
        legend(&mut s, gi, g, color);
    }
    s.push_str("</svg>\n");
    Ok(s)
}
