//! Minimal deterministic SVG charts: line series, bars and vertical markers.

use std::fmt::Write as _;

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 280.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 48.0;
const TICKS: usize = 5;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    /// Draw a marker at every point instead of only the polyline.
    pub markers: bool,
}

#[derive(Debug, Clone)]
pub struct Bar {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub bars: Vec<Bar>,
    /// Vertical rules at x with a label.
    pub rules: Vec<(f64, String)>,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about `TICKS` intervals.
fn nice_step(span: f64) -> f64 {
    let raw = span / TICKS as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn ticks((lo, hi): (f64, f64)) -> (Vec<f64>, usize) {
    let step = nice_step(hi - lo);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn fmt_tick(v: f64, decimals: usize) -> String {
    let s = format!("{:.*}", decimals, v);
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn span<I: Iterator<Item = f64>>(values: I) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Widens to tick multiples; a degenerate span gets a margin first.
fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - d, hi + d)
    };
    let step = nice_step(hi - lo);
    ((lo / step).floor() * step, (hi / step).ceil() * step)
}

impl Panel {
    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .chain(self.bars.iter().flat_map(|b| [b.lo, b.hi]))
            .chain(self.rules.iter().map(|r| r.0));
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(self.bars.iter().flat_map(|b| [0.0, b.value]));
        let x = self.x_range.unwrap_or_else(|| padded(span(xs).unwrap_or((0.0, 1.0))));
        let y = self.y_range.unwrap_or_else(|| padded(span(ys).unwrap_or((0.0, 1.0))));
        (x, y)
    }

    fn render(&self, out: &mut String, top: f64) {
        let ((x0, x1), (y0, y1)) = self.ranges();
        let pw = PANEL_W - MARGIN_L - MARGIN_R;
        let ph = PANEL_H - MARGIN_T - MARGIN_B;
        let left = MARGIN_L;
        let ptop = top + MARGIN_T;
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| ptop + ph - (y - y0) / (y1 - y0) * ph;

        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
            left + pw / 2.0,
            top + 20.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{left:.2}" y="{ptop:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#333"/>"##
        );
        let (xt, xd) = ticks((x0, x1));
        for xv in xt {
            let px = sx(xv);
            let _ = writeln!(
                out,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#333"/><text x="{px:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"##,
                ptop + ph,
                ptop + ph + 4.0,
                ptop + ph + 16.0,
                fmt_tick(xv, xd)
            );
        }
        let (yt, yd) = ticks((y0, y1));
        for yv in yt {
            let py = sy(yv);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{left:.2}" y2="{py:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"##,
                left - 4.0,
                left - 6.0,
                py + 3.0,
                fmt_tick(yv, yd)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            left + pw / 2.0,
            ptop + ph + 36.0,
            escape(&self.x_label)
        );
        let (lx, ly) = (18.0, ptop + ph / 2.0);
        let _ = writeln!(
            out,
            r#"<text x="{lx:.2}" y="{ly:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
            escape(&self.y_label)
        );

        for b in &self.bars {
            let (bx0, bx1) = (sx(b.lo), sx(b.hi));
            let (by0, by1) = (sy(b.value.max(y0)), sy(y0.max(0.0)));
            let _ = writeln!(
                out,
                r##"<rect x="{bx0:.2}" y="{by0:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd"/>"##,
                (bx1 - bx0).max(0.0),
                (by1 - by0).max(0.0)
            );
        }
        for (x, label) in &self.rules {
            let px = sx(*x);
            let _ = writeln!(
                out,
                r##"<line x1="{px:.2}" y1="{ptop:.2}" x2="{px:.2}" y2="{:.2}" stroke="#d62728" stroke-dasharray="6 3"/><text x="{:.2}" y="{:.2}" font-size="10" fill="#d62728">{}</text>"##,
                ptop + ph,
                px + 3.0,
                ptop + 12.0,
                escape(label)
            );
        }
        for (i, s) in self.series.iter().enumerate() {
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            if !pts.is_empty() {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    s.color,
                    pts.join(" ")
                );
            }
            if s.markers {
                for p in &pts {
                    let (cx, cy) = p.split_once(',').unwrap();
                    let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{}"/>"#, s.color);
                }
            }
            let ly = ptop + 12.0 + 16.0 * i as f64;
            let lx = left + pw + 10.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
                lx + 18.0,
                s.color,
                lx + 22.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
    }
}

/// Panels stacked vertically in one document.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_H * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        p.render(&mut out, PANEL_H * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel() -> Panel {
        Panel {
            title: "t".into(),
            x_label: "step".into(),
            y_label: "loss".into(),
            series: vec![Series {
                name: "a<b".into(),
                points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)],
                color: PALETTE[0],
                markers: true,
            }],
            ..Default::default()
        }
    }

    #[test]
    fn rendering_is_stable_and_escaped() {
        let a = render(&[panel()]);
        assert_eq!(a, render(&[panel()]));
        assert!(a.contains("a&lt;b"));
        assert!(!a.contains("NaN"));
        assert_eq!(a.matches("<circle").count(), 2);
    }

    #[test]
    fn flat_series_get_a_visible_range() {
        let mut p = panel();
        p.series[0].points = vec![(0.0, 1.0), (5.0, 1.0)];
        let ((_, _), (y0, y1)) = p.ranges();
        assert!(y0 < 1.0 && y1 > 1.0);
    }

    #[test]
    fn ticks_fall_on_round_values() {
        let labels = |r| {
            let (t, d) = ticks(r);
            t.into_iter().map(|v| fmt_tick(v, d)).collect::<Vec<_>>()
        };
        assert_eq!(labels((0.0, 1.0)), ["0", "0.2", "0.4", "0.6", "0.8", "1.0"]);
        assert_eq!(labels((0.0, 199.0)), ["0", "50", "100", "150"]);
        assert_eq!(labels((-0.1, 0.1)), ["-0.10", "-0.05", "0", "0.05", "0.10"]);
        assert_eq!(padded((0.4993, 105.9)), (0.0, 150.0));
    }
}
