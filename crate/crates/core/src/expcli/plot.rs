//! Minimal SVG line charts, built only from the CSV outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::{BASELINE, LOSSES, TEST_RETURNS, TRAIN_RETURNS};
use super::ExpError;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 20.0, 40.0, 50.0); // left, right, top, bottom

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    (x0, x1, y0 - pad, y1 + pad)
}

/// Render an SVG line chart.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (l, r, t, b) = MARGIN;
    let (x0, x1, y0, y1) = bounds(series);
    let px = |x: f64| l + (x - x0) / (x1 - x0) * (W - l - r);
    let py = |y: f64| H - b - (y - y0) / (y1 - y0) * (H - t - b);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<path d="M{l} {t} V{} H{}" fill="none" stroke="black"/>"#,
        H - b,
        W - r
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(xv),
            H - b + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            l - 6.0,
            py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (l + W - r) / 2.0,
        H - 12.0,
        esc(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (t + H - b) / 2.0,
        esc(ylabel)
    );
    for (i, ser) in series.iter().enumerate() {
        let mut d = String::new();
        for (j, &(x, y)) in ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if j == 0 { "M" } else { "L" }, px(x), py(y));
        }
        let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            d.trim_end(),
            ser.color
        );
        let ly = t + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" text-anchor="end" fill="{}">{}</text>"#,
            W - r - 4.0,
            ser.color,
            esc(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Columns `xcol`, `ycol` of a CSV file as points.
pub fn read_xy(path: &Path, xcol: &str, ycol: &str) -> Result<Vec<(f64, f64)>, ExpError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ExpError::Config(format!("{}: no column {name:?}", path.display())))
    };
    let (xi, yi) = (find(xcol)?, find(ycol)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| ExpError::Config(format!("{}: bad number {:?}", path.display(), &rec[i])))
        };
        out.push((num(xi)?, num(yi)?));
    }
    Ok(out)
}

/// Render an SVG next to every known CSV in `dir`.
pub fn plot_dir(dir: &Path) -> Result<Vec<String>, ExpError> {
    let mut written = Vec::new();
    let mut save = |name: String, svg: String| -> Result<(), ExpError> {
        let path = dir.join(&name);
        fs::write(&path, svg).map_err(|e| ExpError::Io(path, e))?;
        written.push(name);
        Ok(())
    };
    let baseline_path = dir.join(BASELINE);
    let baseline = if baseline_path.exists() {
        let table = read_xy(&baseline_path, "power", "mean_return")?;
        save(
            "baseline.svg".into(),
            line_chart(
                "Constant-power grid search",
                "power (W)",
                "mean return",
                &[Series {
                    label: "mean return".into(),
                    points: table.clone(),
                    color: "black",
                    dashed: false,
                }],
            ),
        )?;
        table.iter().map(|p| p.1).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    } else {
        None
    };
    for (file, title, color) in [
        (TRAIN_RETURNS, "Train episode returns", "steelblue"),
        (TEST_RETURNS, "Test episode returns", "darkgreen"),
    ] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        let pts = read_xy(&path, "episode", "return")?;
        let mut series = vec![Series {
            label: "return".into(),
            points: pts.clone(),
            color,
            dashed: false,
        }];
        if let (Some(best), Some(first), Some(last)) = (baseline, pts.first(), pts.last()) {
            series.push(Series {
                label: "optimal constant power".into(),
                points: vec![(first.0, best), (last.0, best)],
                color: "red",
                dashed: true,
            });
        }
        save(file.replace(".csv", ".svg"), line_chart(title, "episode", "return", &series))?;
    }
    let losses = dir.join(LOSSES);
    if losses.exists() {
        let series: Vec<Series> = [("critic1_loss", "steelblue"), ("critic2_loss", "orange"), ("actor_loss", "purple")]
            .into_iter()
            .map(|(col, color)| {
                Ok(Series {
                    label: col.into(),
                    points: read_xy(&losses, "step", col)?,
                    color,
                    dashed: false,
                })
            })
            .collect::<Result<_, ExpError>>()?;
        save("losses.svg".into(), line_chart("Training losses", "gradient step", "loss", &series))?;
    }
    let mut traces: Vec<String> = fs::read_dir(dir)
        .map_err(|e| ExpError::Io(dir.to_path_buf(), e))?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("trace_ep") && n.ends_with(".csv"))
        .collect();
    traces.sort();
    for name in traces {
        let path = dir.join(&name);
        let series = vec![Series {
            label: "laser power".into(),
            points: read_xy(&path, "step", "power")?,
            color: "firebrick",
            dashed: false,
        }];
        let title = format!("Power profile, {}", name.trim_end_matches(".csv"));
        save(name.replace(".csv", ".svg"), line_chart(&title, "step", "power (W)", &series))?;
    }
    Ok(written)
}
