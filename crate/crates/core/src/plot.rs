//! Minimal line-drawing SVG output. Everything is formatted with a fixed
//! number of decimals so that identical inputs give identical bytes.

use std::fmt::Write;

pub const PALETTE: [&str; 6] = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#555555"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<[f64; 2]>,
    pub width: f64,
}

impl Series {
    pub fn new(label: impl Into<String>, color: impl Into<String>, points: Vec<[f64; 2]>) -> Self {
        Self {
            label: label.into(),
            color: color.into(),
            points,
            width: 1.5,
        }
    }

    pub fn thin(mut self, width: f64) -> Self {
        self.width = width;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub width: f64,
    pub height: f64,
    /// `None` means fit to the data.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub series: Vec<Series>,
    pub legend: bool,
    pub zero_line: bool,
}

impl Panel {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            width: 640.0,
            height: 420.0,
            x_range: None,
            y_range: None,
            series: Vec::new(),
            legend: true,
            zero_line: false,
        }
    }

    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let fit = |axis: usize| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in &self.series {
                for p in &s.points {
                    if p[axis].is_finite() {
                        lo = lo.min(p[axis]);
                        hi = hi.max(p[axis]);
                    }
                }
            }
            if !lo.is_finite() {
                return (0.0, 1.0);
            }
            if hi - lo < 1e-12 {
                let pad = lo.abs().max(1.0) * 0.05;
                return (lo - pad, hi + pad);
            }
            let pad = (hi - lo) * 0.05;
            (lo - pad, hi + pad)
        };
        (self.x_range.unwrap_or_else(|| fit(0)), self.y_range.unwrap_or_else(|| fit(1)))
    }

    pub fn render(&self) -> String {
        let (m_left, m_right, m_top, m_bottom) = (56.0, 16.0, 32.0, 36.0);
        let (w, h) = (self.width, self.height);
        let pw = w - m_left - m_right;
        let ph = h - m_top - m_bottom;
        let ((x0, x1), (y0, y1)) = self.ranges();
        let sx = |x: f64| m_left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| m_top + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{m_left:.2}" y="{m_top:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#888" stroke-width="1"/>"##
        );
        for (val, anchor_x, anchor_y, align) in [
            (x0, sx(x0), h - m_bottom + 16.0, "start"),
            (x1, sx(x1), h - m_bottom + 16.0, "end"),
        ] {
            let _ = writeln!(
                out,
                r#"<text x="{anchor_x:.2}" y="{anchor_y:.2}" font-family="sans-serif" font-size="11" text-anchor="{align}">{}</text>"#,
                tick(val)
            );
        }
        for val in [y0, y1] {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
                m_left - 4.0,
                sy(val) + 4.0,
                tick(val)
            );
        }
        if self.zero_line && y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
                m_left,
                sy(0.0),
                m_left + pw,
                sy(0.0)
            );
        }
        for s in &self.series {
            if s.points.is_empty() {
                continue;
            }
            let mut d = String::with_capacity(s.points.len() * 16);
            let mut pen_down = false;
            for p in &s.points {
                if !(p[0].is_finite() && p[1].is_finite()) {
                    pen_down = false;
                    continue;
                }
                let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(p[0]), sy(p[1]));
                pen_down = true;
            }
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="{:.2}"/>"#,
                d.trim_end(),
                s.color,
                s.width
            );
        }
        if self.legend {
            let mut y = m_top + 14.0;
            for s in self.series.iter().filter(|s| !s.label.is_empty()) {
                let _ = writeln!(
                    out,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
                    m_left + pw - 120.0,
                    y - 4.0,
                    m_left + pw - 100.0,
                    y - 4.0,
                    s.color,
                    m_left + pw - 95.0,
                    y,
                    escape(&s.label)
                );
                y += 14.0;
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e4) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
