//! Self-contained SVG charts.

use std::fmt::Write as _;
use std::path::Path;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Mean curve with an optional standard-deviation band.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub std: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Fixed y range; derived from the data when `None`.
    pub y_range: Option<(f64, f64)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(style: &PlotStyle) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        esc(&style.title),
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 12.0,
        esc(&style.x_label),
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0,
        esc(&style.y_label)
    );
    s
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let d = lo.abs().max(1.0) * 0.1;
        (lo - d, hi + d)
    } else {
        (lo, hi)
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&self, s: &mut String, x_ticks: bool) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(s, r#"<path d="M{x0} {y0}V{y1}H{x1}" fill="none" stroke="black"/>"#);
        for i in 0..=4 {
            let v = self.y.0 + (self.y.1 - self.y.0) * i as f64 / 4.0;
            let y = self.py(v);
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0,
                x0 - 6.0,
                y + 4.0,
                fmt_tick(v)
            );
            if x_ticks {
                let xv = self.x.0 + (self.x.1 - self.x.0) * i as f64 / 4.0;
                let x = self.px(xv);
                let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 18.0, fmt_tick(xv));
            }
        }
    }
}

/// Line chart of mean curves with shaded bands.
pub fn render_plot(series: &[Series], style: &PlotStyle) -> String {
    let finite = |v: &&f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.x.iter()).filter(finite);
    let (xl, xh) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let (yl, yh) = style.y_range.unwrap_or_else(|| {
        series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, s| {
            s.y.iter().enumerate().fold(acc, |(l, h), (i, y)| {
                let d = s.std.as_ref().map_or(0.0, |d| d[i]);
                (l.min(y - d), h.max(y + d))
            })
        })
    });
    let frame = Frame {
        x: padded(xl, xh),
        y: padded(yl, yh),
    };
    let mut s = header(style);
    frame.axes(&mut s, true);
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if let Some(std) = &ser.std {
            let mut d = String::new();
            for (i, (x, y)) in ser.x.iter().zip(&ser.y).enumerate() {
                let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, frame.px(*x), frame.py(y + std[i]));
            }
            for (i, (x, y)) in ser.x.iter().zip(&ser.y).enumerate().rev() {
                let _ = write!(d, "L{:.2} {:.2}", frame.px(*x), frame.py(y - std[i]));
            }
            let _ = writeln!(s, r#"<path d="{d}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#);
        }
        let mut d = String::new();
        for (i, (x, y)) in ser.x.iter().zip(&ser.y).enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, frame.px(*x), frame.py(*y));
        }
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            esc(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Bar chart of means with error bars; `None` marks a failed cell.
pub fn render_bars(labels: &[String], means: &[Option<f64>], stds: &[f64], style: &PlotStyle) -> String {
    let hi = means.iter().zip(stds).filter_map(|(m, s)| m.map(|m| m + s)).fold(0.0f64, f64::max);
    let lo = means.iter().zip(stds).filter_map(|(m, s)| m.map(|m| m - s)).fold(0.0f64, f64::min);
    let frame = Frame {
        x: (0.0, labels.len().max(1) as f64),
        y: style.y_range.unwrap_or_else(|| padded(lo, hi)),
    };
    let mut s = header(style);
    frame.axes(&mut s, false);
    let slot = (W - LEFT - RIGHT) / labels.len().max(1) as f64;
    for (i, label) in labels.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let _ = writeln!(s, r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#, H - BOTTOM + 18.0, esc(label));
        let Some(m) = means[i] else {
            let _ = writeln!(s, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">n/a</text>"#, frame.py(frame.y.0) - 6.0);
            continue;
        };
        let (top, base) = (frame.py(m.max(0.0)), frame.py(m.min(0.0)));
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            cx - slot * 0.35,
            slot * 0.7,
            (base - top).max(0.5),
            PALETTE[0]
        );
        let (e0, e1) = (frame.py(m - stds[i]), frame.py(m + stds[i]));
        let _ = writeln!(s, r#"<path d="M{cx:.2} {e0:.2}V{e1:.2}M{:.2} {e0:.2}h8M{:.2} {e1:.2}h8" stroke="black"/>"#, cx - 4.0, cx - 4.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Grid of cell means, darker for larger values; `None` cells are hatched grey.
pub fn render_heatmap(x_labels: &[String], y_labels: &[String], grid: &[Vec<Option<f64>>], style: &PlotStyle) -> String {
    let vals = grid.iter().flatten().flatten();
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let (lo, hi) = style.y_range.unwrap_or_else(|| padded(lo, hi));
    let mut s = header(style);
    let cw = (W - LEFT - RIGHT) / x_labels.len().max(1) as f64;
    let ch = (H - TOP - BOTTOM) / y_labels.len().max(1) as f64;
    for (r, row) in grid.iter().enumerate() {
        let y = TOP + ch * r as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + ch / 2.0 + 4.0, esc(&y_labels[r]));
        for (c, v) in row.iter().enumerate() {
            let x = LEFT + cw * c as f64;
            let (fill, text) = match v {
                Some(v) => {
                    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                    let shade = (255.0 * (1.0 - 0.8 * t)).round() as u8;
                    (format!("rgb({shade},{shade},255)"), fmt_tick(*v))
                }
                None => ("#ccc".to_string(), "n/a".to_string()),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}" stroke="white"/><text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                x + cw / 2.0,
                y + ch / 2.0 + 4.0,
                text
            );
        }
    }
    for (c, l) in x_labels.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, LEFT + cw * (c as f64 + 0.5), H - BOTTOM + 18.0, esc(l));
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(series: &[Series], style: &PlotStyle, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_plot(series, style))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(svg: &str) -> bool {
        let open = svg.matches("<svg").count() + svg.matches("<text").count();
        let close = svg.matches("</svg>").count() + svg.matches("</text>").count();
        open == close && svg.trim_end().ends_with("</svg>")
    }

    fn style() -> PlotStyle {
        PlotStyle {
            title: "progress <a & b>".into(),
            x_label: "nodes".into(),
            y_label: "progress".into(),
            y_range: None,
        }
    }

    #[test]
    fn flat_series_draws_a_horizontal_line() {
        let s = Series {
            label: "flat".into(),
            x: vec![0.0, 1.0, 2.0],
            y: vec![0.5; 3],
            std: None,
        };
        let svg = render_plot(&[s], &style());
        assert!(balanced(&svg));
        assert!(svg.contains("&lt;a &amp; b&gt;"));
        let line = svg.lines().find(|l| l.contains("stroke-width=\"1.5\"")).unwrap();
        let ys: Vec<&str> = line.split(['M', 'L']).skip(1).map(|p| p.split_whitespace().nth(1).unwrap().trim_end_matches('"')).collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]), "{line}");
    }

    #[test]
    fn legend_entry_per_series() {
        let mk = |l: &str| Series {
            label: l.into(),
            x: vec![0.0, 1.0],
            y: vec![0.0, 1.0],
            std: Some(vec![0.1, 0.1]),
        };
        let svg = render_plot(&[mk("first"), mk("second")], &style());
        assert!(svg.contains(">first</text>") && svg.contains(">second</text>"));
        assert_eq!(svg.matches("fill-opacity").count(), 2);
    }

    #[test]
    fn large_series_is_fast() {
        let x: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let t = std::time::Instant::now();
        let svg = render_plot(
            &[Series {
                label: "s".into(),
                x,
                y,
                std: Some(vec![0.1; 10_000]),
            }],
            &style(),
        );
        assert!(t.elapsed().as_secs_f64() < 1.0);
        assert!(balanced(&svg));
    }

    #[test]
    fn bars_and_heatmap_are_well_formed() {
        let labels: Vec<String> = ["r", "g", "rg"].iter().map(|s| s.to_string()).collect();
        let svg = render_bars(&labels, &[Some(0.5), None, Some(0.9)], &[0.1, 0.0, 0.05], &style());
        assert!(balanced(&svg) && svg.contains("n/a"));
        let svg = render_heatmap(&labels, &labels[..2], &[vec![Some(0.1), Some(0.2), None], vec![Some(0.3), Some(0.4), Some(0.5)]], &style());
        assert!(balanced(&svg));
        assert_eq!(svg.matches("<rect").count(), 7);
    }
}
