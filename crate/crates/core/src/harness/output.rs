use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{CurveKind, ExperimentConfig};
use super::run::{evaluators, Method, ResultSeries};
use crate::error::{Error, Result};

pub fn render_csv(series: &ResultSeries) -> String {
    let mut out = String::from("traffic,method,mean,lo,hi\n");
    for p in &series.points {
        writeln!(
            out,
            "{},{},{:.8},{:.8},{:.8}",
            p.traffic,
            p.method.label(),
            p.interval.mean,
            p.interval.lo,
            p.interval.hi
        )
        .unwrap();
    }
    out
}

pub fn emit_csv(series: &ResultSeries, path: &Path) -> Result<()> {
    fs::write(path, render_csv(series)).map_err(|e| Error::io(path, e))
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn colour(m: Method) -> &'static str {
    match m {
        Method::Evolution => "#1f77b4",
        Method::TaguchiPredict => "#d62728",
        Method::TaguchiCandidate => "#2ca02c",
        Method::Taguchi => "#ff7f0e",
    }
}

/// Mean lines over shaded 95% bands against log₁₀(traffic).
pub fn render_svg(series: &ResultSeries) -> Result<String> {
    if series.points.is_empty() {
        return Err(Error::EmptySeries);
    }
    let traffic = series.traffic_values();
    let methods = series.methods();

    let (mut x0, mut x1) = (
        (traffic[0] as f64).log10(),
        (traffic[traffic.len() - 1] as f64).log10(),
    );
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let lo = series
        .points
        .iter()
        .map(|p| p.interval.lo)
        .fold(f64::INFINITY, f64::min);
    let hi = series
        .points
        .iter()
        .map(|p| p.interval.hi)
        .fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.08).max(1e-4);
    let (y0, y1) = (lo - pad, hi + pad);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |t: u64| LEFT + ((t as f64).log10() - x0) / (x1 - x0) * plot_w;
    let sy = |v: f64| TOP + (y1 - v) / (y1 - y0) * plot_h;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    let title = match series.kind {
        CurveKind::Comparison => "true conversion rate of chosen candidate",
        CurveKind::During => "average true conversion rate during experiment",
    };
    writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}: {}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&series.name),
        title
    )
    .unwrap();

    // axes
    writeln!(
        s,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{yb}" x2="{xr}" y2="{yb}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{yb}"/></g>"#,
        yb = TOP + plot_h,
        xr = LEFT + plot_w
    )
    .unwrap();
    s.push_str("<g class=\"x-ticks\">\n");
    for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = LEFT + (d as f64 - x0) / (x1 - x0) * plot_w;
        writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{yb}" x2="{x:.2}" y2="{yt}" stroke="black"/><text x="{x:.2}" y="{yl}" text-anchor="middle">1e{d}</text>"#,
            yb = TOP + plot_h,
            yt = TOP + plot_h + 5.0,
            yl = TOP + plot_h + 20.0
        )
        .unwrap();
    }
    s.push_str("</g>\n<g class=\"y-ticks\">\n");
    for i in 0..=5 {
        let v = y0 + (y1 - y0) * i as f64 / 5.0;
        let y = sy(v);
        writeln!(
            s,
            r#"<line x1="{xl}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{xt}" y="{yt:.2}" text-anchor="end">{v:.4}</text>"#,
            xl = LEFT - 5.0,
            xt = LEFT - 8.0,
            yt = y + 4.0
        )
        .unwrap();
    }
    s.push_str("</g>\n");
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">total traffic (impressions, log scale)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">true conversion rate</text>"#,
        TOP + plot_h / 2.0
    )
    .unwrap();

    for &m in &methods {
        let pts: Vec<_> = series.points.iter().filter(|p| p.method == m).collect();
        let mut band = String::new();
        for p in pts.iter() {
            write!(band, "{:.2},{:.2} ", sx(p.traffic), sy(p.interval.hi)).unwrap();
        }
        for p in pts.iter().rev() {
            write!(band, "{:.2},{:.2} ", sx(p.traffic), sy(p.interval.lo)).unwrap();
        }
        let line: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.traffic), sy(p.interval.mean)))
            .collect();
        writeln!(
            s,
            r#"<g class="series" data-method="{label}"><polygon class="band" points="{band}" fill="{c}" fill-opacity="0.18" stroke="none"/><polyline class="mean" points="{line}" fill="none" stroke="{c}" stroke-width="2"/></g>"#,
            label = m.label(),
            band = band.trim_end(),
            line = line.join(" "),
            c = colour(m)
        )
        .unwrap();
    }

    s.push_str("<g class=\"legend\">\n");
    for (i, &m) in methods.iter().enumerate() {
        let y = TOP + 10.0 + 22.0 * i as f64;
        let x = WIDTH - RIGHT + 20.0;
        writeln!(
            s,
            r#"<g class="legend-entry"><line x1="{x}" y1="{y}" x2="{x2}" y2="{y}" stroke="{c}" stroke-width="3"/><text x="{xt}" y="{yt}">{label}</text></g>"#,
            x2 = x + 24.0,
            xt = x + 30.0,
            yt = y + 4.0,
            c = colour(m),
            label = m.label()
        )
        .unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

pub fn emit_svg(series: &ResultSeries, path: &Path) -> Result<()> {
    let svg = render_svg(series)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub repetitions: usize,
    pub traffic: Vec<u64>,
    pub fixed_evaluator: bool,
    pub config_sha256: String,
    pub versions: Versions,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub mvtlab: &'static str,
    pub manifest_format: u32,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, files: Vec<String>) -> Self {
        let digest = Sha256::digest(config.canonical().as_bytes());
        let config_sha256 = digest.iter().fold(String::new(), |mut acc, b| {
            write!(acc, "{b:02x}").unwrap();
            acc
        });
        Self {
            name: config.name.clone(),
            seed: config.seed,
            repetitions: config.repetitions,
            traffic: config.traffic.clone(),
            fixed_evaluator: config.fixed_evaluator,
            config_sha256,
            versions: Versions {
                mvtlab: env!("CARGO_PKG_VERSION"),
                manifest_format: 1,
            },
            files,
            config: config.clone(),
        }
    }
}

/// Writes `<name>.csv`, `<name>.svg`, `<name>.evaluators.json` and
/// `<name>.manifest.json` under the config's output directory.
pub fn write_outputs(config: &ExperimentConfig, series: &ResultSeries) -> Result<Vec<PathBuf>> {
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = &config.name;
    let csv = dir.join(format!("{name}.csv"));
    let svg = dir.join(format!("{name}.svg"));
    let evals = dir.join(format!("{name}.evaluators.json"));
    let manifest = dir.join(format!("{name}.manifest.json"));

    emit_csv(series, &csv)?;
    emit_svg(series, &svg)?;
    let text = serde_json::to_string(&evaluators(config)?)?;
    fs::write(&evals, text).map_err(|e| Error::io(&evals, e))?;

    let files = [&csv, &svg, &evals]
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let m = Manifest::new(config, files);
    let text = serde_json::to_string_pretty(&m)?;
    fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))?;
    Ok(vec![csv, svg, evals, manifest])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::SeriesPoint;
    use crate::simstats::Interval;

    fn series(n: usize) -> ResultSeries {
        let mut points = Vec::new();
        for i in 0..n {
            for (k, m) in [
                Method::Evolution,
                Method::TaguchiPredict,
                Method::TaguchiCandidate,
            ]
            .into_iter()
            .enumerate()
            {
                let mean = 0.05 + 0.001 * (i + k) as f64;
                points.push(SeriesPoint {
                    traffic: 1000 * 10u64.pow(i as u32),
                    method: m,
                    interval: Interval {
                        mean,
                        lo: mean - 0.001,
                        hi: mean + 0.002,
                    },
                });
            }
        }
        ResultSeries {
            name: "demo <x>".into(),
            kind: CurveKind::Comparison,
            points,
        }
    }

    #[test]
    fn csv_layout() {
        let s = series(4);
        let csv = render_csv(&s);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "traffic,method,mean,lo,hi");
        assert_eq!(lines.len(), 1 + 4 * 3);
        assert_eq!(lines[1], "1000,evolution,0.05000000,0.04900000,0.05200000");
        assert_eq!(render_csv(&s), csv);
    }

    #[test]
    fn svg_is_well_formed_with_legend() {
        let svg = render_svg(&series(3)).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let legend = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("legend-entry"))
            .count();
        assert_eq!(legend, 3);
        let lines = doc
            .descendants()
            .filter(|n| n.has_tag_name("polyline"))
            .count();
        assert_eq!(lines, 3);
        // single traffic point still renders
        roxmltree::Document::parse(&render_svg(&series(1)).unwrap()).unwrap();
    }

    #[test]
    fn empty_series_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.svg");
        let empty = ResultSeries {
            name: "e".into(),
            kind: CurveKind::Comparison,
            points: vec![],
        };
        assert!(matches!(emit_svg(&empty, &path), Err(Error::EmptySeries)));
        assert!(!path.exists());
    }
}
