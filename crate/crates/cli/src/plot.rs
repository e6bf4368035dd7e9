//! Minimal SVG plots: axes with linear or logarithmic scales, point series,
//! and optional power-law fit lines.

use std::fmt::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

impl Scale {
    fn map(self, v: f64) -> Option<f64> {
        match self {
            Scale::Linear => v.is_finite().then_some(v),
            Scale::Log => (v > 0.0 && v.is_finite()).then(|| v.log10()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// `y = exp(intercept) * x^slope`, drawn across the series' x range.
    pub fit: Option<(f64, f64)>,
}

impl Series {
    pub fn new(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, fit: None }
    }

    pub fn with_fit(mut self, slope: f64, intercept: f64) -> Self {
        self.fit = Some((slope, intercept));
        self
    }
}

#[derive(Clone, Debug)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axis {
    scale: Scale,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(scale: Scale, values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = values
            .filter_map(|v| scale.map(v))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        if scale == Scale::Log {
            (lo, hi) = (lo.floor(), hi.ceil());
        } else {
            let pad = 0.05 * (hi - lo);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { scale, lo, hi }
    }

    /// Fraction along the axis of a mapped value.
    fn frac(&self, mapped: f64) -> f64 {
        (mapped - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        match self.scale {
            Scale::Log => {
                let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0) as i64;
                (self.lo as i64..=self.hi as i64).step_by(step as usize).map(|k| (k as f64, format!("1e{k}"))).collect()
            }
            Scale::Linear => (0..=4)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                    (v, format!("{v:.3}"))
                })
                .collect(),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn to_svg(&self) -> String {
        let xs = Axis::new(self.x_scale, self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let ys = Axis::new(self.y_scale, self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
        let px = |m: f64| LEFT + pw * xs.frac(m);
        let py = |m: f64| TOP + ph * (1.0 - ys.frac(m));
        let mut s = String::new();
        let _ =
            writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for (v, label) in xs.ticks() {
            let x = px(v);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
                TOP + ph,
                TOP + ph + 5.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{label}</text>"#,
                TOP + ph + 18.0
            );
        }
        for (v, label) in ys.ticks() {
            let y = py(v);
            let _ = writeln!(s, r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/>"#, LEFT - 5.0);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{label}</text>"#,
                LEFT - 8.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
            LEFT + pw / 2.0,
            H - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            for &(x, y) in &series.points {
                if let (Some(mx), Some(my)) = (self.x_scale.map(x), self.y_scale.map(y)) {
                    let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{color}"/>"#, px(mx), py(my));
                }
            }
            if let Some((slope, intercept)) = series.fit {
                let ends = series.points.iter().map(|p| p.0).filter(|x| *x > 0.0);
                let (a, b) = ends.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
                let line: Vec<String> = [a, b]
                    .iter()
                    .filter_map(|&x| {
                        let y = (intercept + slope * x.ln()).exp();
                        Some(format!("{:.1},{:.1}", px(self.x_scale.map(x)?), py(self.y_scale.map(y)?)))
                    })
                    .collect();
                if line.len() == 2 {
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-dasharray="6 4"/>"#,
                        line.join(" ")
                    );
                }
            }
            let ly = TOP + 16.0 + 20.0 * k as f64;
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{color}"/>"#, W - RIGHT + 16.0, ly - 4.0);
            let label = match series.fit {
                Some((slope, _)) => format!("{} (slope {slope:.3})", series.label),
                None => series.label.clone(),
            };
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{ly:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
                W - RIGHT + 26.0,
                escape(&label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot() -> Plot {
        Plot {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series: vec![Series::new("s", vec![(1e-3, 1e6), (1e-2, 1e4), (0.0, 1.0)]).with_fit(-2.0, 0.0)],
        }
    }

    #[test]
    fn svg_is_well_formed_and_skips_unplottable_points() {
        let svg = plot().to_svg();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 3, "two points and one legend marker");
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("slope -2.000"));
    }

    #[test]
    fn rendering_is_deterministic() {
        assert_eq!(plot().to_svg(), plot().to_svg());
    }

    #[test]
    fn empty_plot_still_renders() {
        let p = Plot { series: vec![], ..plot() };
        assert!(p.to_svg().contains("</svg>"));
    }
}
