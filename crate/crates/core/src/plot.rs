//! Minimal line-chart SVG writer.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log10,
}

pub struct LineChart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub y_scale: Scale,
    pub points: &'a [(f64, f64)],
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LineChart<'_> {
    /// Renders the chart. Points that cannot be drawn on the chosen scale
    /// (non-finite, or non-positive on a log axis) are skipped.
    pub fn render(&self) -> String {
        let map_y = |y: f64| match self.y_scale {
            Scale::Linear => y,
            Scale::Log10 => y.log10(),
        };
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (self.y_scale == Scale::Linear || *y > 0.0))
            .map(|&(x, y)| (x, map_y(y)))
            .collect();

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
            WIDTH / 2.0,
            escape(self.title)
        );
        let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN);
        let _ = writeln!(
            svg,
            r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(self.y_label)
        );

        if !pts.is_empty() {
            let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for &(x, y) in &pts {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
            if xmax == xmin {
                xmax = xmin + 1.0;
            }
            if ymax == ymin {
                ymin -= 0.5;
                ymax += 0.5;
            }
            let sx = |x: f64| x0 + (x - xmin) / (xmax - xmin) * (x1 - x0);
            let sy = |y: f64| y0 - (y - ymin) / (ymax - ymin) * (y0 - y1);

            for i in 0..=4 {
                let v = ymin + (ymax - ymin) * i as f64 / 4.0;
                let label = match self.y_scale {
                    Scale::Linear => fmt_tick(v),
                    Scale::Log10 => format!("1e{:.1}", v),
                };
                let _ = writeln!(
                    svg,
                    r#"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="10">{label}</text>"#,
                    x0 - 4.0,
                    sy(v) + 3.0
                );
            }
            for i in 0..=4 {
                let v = xmin + (xmax - xmin) * i as f64 / 4.0;
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{}</text>"#,
                    sx(v),
                    y0 + 14.0,
                    fmt_tick(v)
                );
            }
            let mut d = String::new();
            for (i, &(x, y)) in pts.iter().enumerate() {
                let _ = write!(d, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, sx(x), sy(y));
            }
            let _ = writeln!(
                svg,
                r#"<path d="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
                d.trim_end()
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}
