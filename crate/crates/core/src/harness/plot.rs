use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::HarnessError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

const NOMINAL_COLOR: &str = "#1f77b4";
const SHRINKAGE_COLOR: &str = "#ff7f0e";
const ROBUST_COLORS: [&str; 6] = ["#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

const REQUIRED: [&str; 9] = [
    "c",
    "p",
    "sigma",
    "method",
    "gamma_factor",
    "rel_obj",
    "viol_mag",
    "viol_ratio",
    "solve_time_ms",
];

/// The three per-σ panels of the comparison figures.
pub const CRITERIA: [(&str, &str); 3] = [
    ("rel_obj", "relative objective value"),
    ("viol_mag", "magnitude of violation"),
    ("viol_ratio", "ratio of violated constraints"),
];

#[derive(Debug, Clone)]
struct AggPoint {
    c: f64,
    p: f64,
    sigma: f64,
    series: String,
    order: (u8, u64),
    values: BTreeMap<&'static str, Option<f64>>,
}

fn parse_optional(field: &str, column: &str, line: usize) -> Result<Option<f64>, HarnessError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| HarnessError::Schema(format!("line {line}: column {column} holds {field:?}")))
}

fn read_points(csv_path: &Path) -> Result<Vec<AggPoint>, HarnessError> {
    let mut reader = csv::Reader::from_path(csv_path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(HarnessError::Schema(format!("{} is empty", csv_path.display())));
    }
    let mut index = BTreeMap::new();
    for col in REQUIRED {
        let pos = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| HarnessError::Schema(format!("missing column {col:?}")))?;
        index.insert(col, pos);
    }
    let mut points = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let get = |col: &str| row.get(index[col]).unwrap_or("");
        let required = |col: &str| {
            parse_optional(get(col), col, line)?
                .ok_or_else(|| HarnessError::Schema(format!("line {line}: column {col} is empty")))
        };
        let method = get("method").to_string();
        let gamma = parse_optional(get("gamma_factor"), "gamma_factor", line)?;
        let (series, order) = match (method.as_str(), gamma) {
            ("nominal", _) => ("nominal".to_string(), (0, 0)),
            ("shrinkage", _) => ("shrinkage".to_string(), (1, 0)),
            ("robust", Some(g)) => (format!("robust γ={g}σ"), (2, g.to_bits())),
            _ => {
                return Err(HarnessError::Schema(format!(
                    "line {line}: unknown method {method:?}"
                )))
            }
        };
        let mut values = BTreeMap::new();
        for (col, _) in CRITERIA {
            values.insert(col, parse_optional(get(col), col, line)?);
        }
        values.insert("solve_time_ms", parse_optional(get("solve_time_ms"), "solve_time_ms", line)?);
        points.push(AggPoint {
            c: required("c")?,
            p: required("p")?,
            sigma: required("sigma")?,
            series,
            order,
            values,
        });
    }
    if points.is_empty() {
        return Err(HarnessError::Schema(format!("{} has no data rows", csv_path.display())));
    }
    Ok(points)
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn series_color(series: &str, robust_rank: usize) -> &'static str {
    match series {
        "nominal" => NOMINAL_COLOR,
        "shrinkage" => SHRINKAGE_COLOR,
        _ => ROBUST_COLORS[robust_rank % ROBUST_COLORS.len()],
    }
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A line chart with one polyline per series.
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// `(name, color, points)`, drawn in order.
    pub series: Vec<(String, String, Vec<(f64, f64)>)>,
}

impl LineChart {
    pub fn to_svg(&self) -> String {
        let all: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.2.iter().copied()).collect();
        let (mut x0, mut x1) = bounds(all.iter().map(|p| p.0));
        let (mut y0, mut y1) = bounds(all.iter().map(|p| p.1));
        if x0 == x1 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y0 == y1 {
            let pad = if y0 == 0.0 { 1.0 } else { y0.abs() * 0.1 };
            y0 -= pad;
            y1 += pad;
        }
        let pad = (y1 - y0) * 0.05;
        y0 -= pad;
        y1 += pad;
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * plot_h;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let (px, py) = (sx(fx), sy(fy));
            let _ = writeln!(
                svg,
                r##"<line x1="{px:.2}" y1="{MARGIN_TOP}" x2="{px:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
                MARGIN_TOP + plot_h
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{MARGIN_LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/>"##,
                MARGIN_LEFT + plot_w
            );
            let _ = writeln!(
                svg,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                MARGIN_TOP + plot_h + 16.0,
                fmt_num(fx)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 6.0,
                py + 4.0,
                fmt_num(fy)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        );
        for (k, (name, color, pts)) in self.series.iter().enumerate() {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline class="series" data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                escape(name),
                path.join(" ")
            );
            for &(x, y) in pts {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    sx(x),
                    sy(y)
                );
            }
            let ly = MARGIN_TOP + 14.0 + 18.0 * k as f64;
            let lx = WIDTH - MARGIN_RIGHT + 12.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                lx + 18.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}">{}</text>"#,
                lx + 24.0,
                ly + 4.0,
                escape(name)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Writes one SVG per (fixed parameter, σ, criterion) and one computation
/// time SVG per (fixed parameter, σ) from an aggregate CSV. The x-axis is
/// whichever of `p` and `c` takes more distinct values. Returns the paths
/// written, in a stable order.
pub fn emit_plots(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let points = read_points(csv_path)?;
    std::fs::create_dir_all(out_dir)?;
    let ps = distinct(points.iter().map(|p| p.p));
    let cs = distinct(points.iter().map(|p| p.c));
    let x_is_p = ps.len() >= cs.len();
    let (fixed_name, x_name) = if x_is_p { ("c", "p") } else { ("p", "c") };
    let fixed_values = if x_is_p { cs } else { ps };
    let sigmas = distinct(points.iter().map(|p| p.sigma));

    let mut order: Vec<(u8, u64, String)> = points.iter().map(|p| (p.order.0, p.order.1, p.series.clone())).collect();
    order.sort();
    order.dedup();

    let mut written = Vec::new();
    let panels = CRITERIA
        .iter()
        .map(|&(col, label)| (col, label, col.to_string()))
        .chain(std::iter::once(("solve_time_ms", "computation time (ms)", "time".to_string())));
    let panels: Vec<_> = panels.collect();
    for &fixed in &fixed_values {
        for &sigma in &sigmas {
            for (col, label, stem) in &panels {
                let mut series = Vec::new();
                let mut robust_rank = 0;
                for (_, _, name) in &order {
                    let mut pts: Vec<(f64, f64)> = points
                        .iter()
                        .filter(|pt| {
                            &pt.series == name
                                && pt.sigma == sigma
                                && (if x_is_p { pt.c } else { pt.p }) == fixed
                        })
                        .filter_map(|pt| pt.values[col].map(|v| (if x_is_p { pt.p } else { pt.c }, v)))
                        .collect();
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let color = series_color(name, robust_rank);
                    if name.starts_with("robust") {
                        robust_rank += 1;
                    }
                    series.push((name.clone(), color.to_string(), pts));
                }
                let chart = LineChart {
                    title: format!("{label}, σ = {sigma}, {fixed_name} = {fixed}"),
                    x_label: x_name.to_string(),
                    y_label: label.to_string(),
                    series,
                };
                let path = out_dir.join(format!("{stem}_{fixed_name}{fixed}_sigma{sigma}.svg"));
                std::fs::write(&path, chart.to_svg())?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const AGG: &str = "c,p,m,sigma,n,method,gamma_factor,count,excluded,rel_obj,abs_rel_obj,viol_mag,viol_ratio,solve_time_ms,alpha_hat\n";

    fn agg_file(dir: &Path, sigmas: &[f64], gammas: &[f64]) -> PathBuf {
        let mut text = AGG.to_string();
        for &s in sigmas {
            for p in [100, 200] {
                text += &format!("0.5,{p},{},{s},5,nominal,,3,0,0.1,0.1,0.2,0.4,1.5,\n", p / 2);
                text += &format!("0.5,{p},{},{s},5,shrinkage,,3,0,-0.02,0.03,0.01,0.05,1.7,0.9\n", p / 2);
                for g in gammas {
                    text += &format!("0.5,{p},{},{s},5,robust,{g},3,0,-0.05,0.05,0.0,0.01,40,\n", p / 2);
                }
            }
        }
        let path = dir.join("r_agg.csv");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn file_counts_and_series() {
        let dir = tempfile::tempdir().unwrap();
        let csv = agg_file(dir.path(), &[0.5, 1.0, 2.0], &[0.2, 0.5, 0.8]);
        let out = dir.path().join("plots");
        let files = emit_plots(&csv, &out).unwrap();
        assert_eq!(files.len(), 12);
        let time = files.iter().filter(|f| f.file_name().unwrap().to_string_lossy().starts_with("time_")).count();
        assert_eq!(time, 3);
        let svg = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(svg.matches(r#"data-series="robust"#).count(), 3);
        assert!(svg.contains(r#"data-series="nominal" points"#));
        let nominal = svg.lines().find(|l| l.contains(r#"data-series="nominal""#)).unwrap();
        assert!(nominal.contains(NOMINAL_COLOR));
        let shrink = svg.lines().find(|l| l.contains(r#"data-series="shrinkage""#)).unwrap();
        assert!(shrink.contains(SHRINKAGE_COLOR));
    }

    #[test]
    fn empty_or_incomplete_csv_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(emit_plots(&empty, dir.path()), Err(HarnessError::Schema(_))));
        let header_only = dir.path().join("header.csv");
        std::fs::write(&header_only, AGG).unwrap();
        assert!(matches!(emit_plots(&header_only, dir.path()), Err(HarnessError::Schema(_))));
        let missing = dir.path().join("missing.csv");
        std::fs::write(&missing, "c,p,sigma\n0.5,100,1\n").unwrap();
        assert!(matches!(emit_plots(&missing, dir.path()), Err(HarnessError::Schema(_))));
    }
}
