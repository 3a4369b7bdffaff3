use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ExperimentError, ResultRow};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes the rows with a header line in [`ResultRow`] field order.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::NoRows);
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| ExperimentError::Io {
        path: path.display().to_string(),
        source: e.into_error(),
    })?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ErrorVsSize,
    EffectivityVsSize,
    ErrorVsAlpha,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ErrorVsSize => "error_vs_size",
            PlotKind::EffectivityVsSize => "effectivity_vs_size",
            PlotKind::ErrorVsAlpha => "error_vs_alpha",
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = values
            .map(|v| if log { v.log10() } else { v })
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Axis { log, lo, hi }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Tick positions (in data units) with labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            (self.lo as i32..=self.hi as i32)
                .map(|k| (10f64.powi(k), format!("1e{k}")))
                .collect()
        } else {
            (0..=5)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot with one polyline per shape, axis labels and a legend. Error
/// plots also mark the estimate of every point.
pub fn emit_svg(rows: &[ResultRow], path: &Path, kind: PlotKind) -> Result<(), ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::NoRows);
    }
    fs::write(path, render_svg(rows, kind)).map_err(io_err(path))
}

fn render_svg(rows: &[ResultRow], kind: PlotKind) -> String {
    let x_of = |r: &ResultRow| match kind {
        PlotKind::ErrorVsAlpha => r.alpha.unwrap_or(f64::NAN),
        _ => r.size,
    };
    let y_of = |r: &ResultRow| match kind {
        PlotKind::EffectivityVsSize => r.effectivity,
        _ => r.error_h1,
    };
    let with_estimate = kind != PlotKind::EffectivityVsSize;

    let mut series: Vec<(&str, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        match series.iter_mut().find(|(s, _)| *s == r.shape) {
            Some((_, v)) => v.push(r),
            None => series.push((&r.shape, vec![r])),
        }
    }
    for (_, v) in &mut series {
        v.sort_by(|a, b| x_of(a).total_cmp(&x_of(b)));
    }

    let xs = Axis::new(rows.iter().map(x_of), kind != PlotKind::ErrorVsAlpha);
    let ys_values: Vec<f64> = rows
        .iter()
        .map(y_of)
        .chain(rows.iter().filter(|_| with_estimate).map(|r| r.estimate))
        .collect();
    let ys = Axis::new(ys_values.into_iter(), true);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |v: f64| LEFT + xs.unit(v) * plot_w;
    let py = |v: f64| TOP + (1.0 - ys.unit(v)) * plot_h;

    let (x_label, y_label) = match kind {
        PlotKind::ErrorVsSize => ("feature size |γ|", "H¹ defeaturing error"),
        PlotKind::EffectivityVsSize => ("feature size |γ|", "effectivity index"),
        PlotKind::ErrorVsAlpha => ("opening angle α (degrees)", "H¹ defeaturing error"),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for (v, label) in xs.ticks() {
        let x = px(v);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0
        );
    }
    for (v, label) in ys.ticks() {
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(x_of(r)), py(y_of(r))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(name)
        );
        if with_estimate {
            for r in pts {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="none" stroke="{color}"/>"#,
                    px(x_of(r)),
                    py(r.estimate)
                );
            }
        }
        let ly = TOP + 15.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    if with_estimate {
        let ly = TOP + 15.0 + 18.0 * series.len() as f64;
        let lx = WIDTH - RIGHT + 22.0;
        let _ = writeln!(
            s,
            r#"<circle cx="{lx:.2}" cy="{ly:.2}" r="3" fill="none" stroke="black"/><text x="{:.2}" y="{:.2}">estimate</text>"#,
            lx + 16.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(shape: &str, size: f64) -> ResultRow {
        ResultRow {
            experiment: "dd_shapes".into(),
            shape: shape.into(),
            size,
            alpha: None,
            error_h1: 0.1 + size,
            estimate: 0.2 + size,
            component_avg: 0.0,
            component_navg: 0.2 + size,
            effectivity: (0.2 + size) / (0.1 + size),
            dof: 100,
            runtime_ms: 0,
        }
    }

    #[test]
    fn single_row_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        emit_csv(&[row("disk", 0.25)], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "experiment,shape,size,alpha,error_h1,estimate,component_avg,component_navg,effectivity,dof,runtime_ms"
        );
        assert!(lines[1].starts_with("dd_shapes,disk,0.25,,"));
    }

    #[test]
    fn empty_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_csv(&[], &dir.path().join("x.csv")), Err(ExperimentError::NoRows)));
        assert!(matches!(
            emit_svg(&[], &dir.path().join("x.svg"), PlotKind::ErrorVsSize),
            Err(ExperimentError::NoRows)
        ));
    }

    #[test]
    fn unwritable_path() {
        let err = emit_csv(&[row("disk", 0.25)], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(matches!(err, ExperimentError::Io { .. }));
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let rows = vec![row("disk", 0.25), row("disk", 0.125), row("square", 0.25)];
        let svg = render_svg(&rows, PlotKind::ErrorVsSize);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 4);
        assert!(svg.contains("feature size"));
    }
}
