//! Minimal SVG output: line plots and contour maps.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub type Segment = ((f64, f64), (f64, f64));

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            out,
            r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        for k in 0..=4 {
            let fx = self.x0 + (self.x1 - self.x0) * k as f64 / 4.0;
            let fy = self.y0 + (self.y1 - self.y0) * k as f64 / 4.0;
            let (px, py) = (self.px(fx), self.py(fy));
            let _ = writeln!(
                out,
                r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                b + 5.0,
                b + 18.0,
                tick(fx)
            );
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{l}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                l - 5.0,
                l - 8.0,
                py + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            MARGIN / 2.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 15.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="15" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(y_label)
        );
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Polyline plot; non-finite points split a series.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame::new(
        series.iter().flat_map(|s| s.x.iter().copied()),
        series.iter().flat_map(|s| s.y.iter().copied()),
    );
    let mut out = header();
    frame.axes(&mut out, title, x_label, y_label);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut run = Vec::new();
        let flush = |run: &mut Vec<String>, out: &mut String| {
            if run.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    run.join(" ")
                );
            }
            run.clear();
        };
        for (&x, &y) in s.x.iter().zip(s.y) {
            if x.is_finite() && y.is_finite() {
                run.push(format!("{:.2},{:.2}", frame.px(x), frame.py(y)));
            } else {
                flush(&mut run, &mut out);
            }
        }
        flush(&mut run, &mut out);
        let ly = MARGIN + 15.0 + 15.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.0}" y1="{ly}" x2="{:.0}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.0}" y="{}" font-size="11">{}</text>"#,
            WIDTH - MARGIN - 110.0,
            WIDTH - MARGIN - 90.0,
            WIDTH - MARGIN - 85.0,
            ly + 4.0,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn lerp(a: f64, b: f64, va: f64, vb: f64, level: f64) -> f64 {
    if va == vb {
        (a + b) / 2.0
    } else {
        a + (level - va) / (vb - va) * (b - a)
    }
}

/// Iso-line segments of `z` at `level`; `z[i][j]` sits at `(xs[i], ys[j])`.
/// Cells with a missing corner are skipped. Saddles are resolved by the
/// cell-centre average.
pub fn marching_squares(z: &[Vec<Option<f64>>], xs: &[f64], ys: &[f64], level: f64) -> Vec<Segment> {
    let mut segs = Vec::new();
    for i in 0..xs.len().saturating_sub(1) {
        for j in 0..ys.len().saturating_sub(1) {
            let (Some(a), Some(b), Some(c), Some(d)) = (z[i][j], z[i + 1][j], z[i + 1][j + 1], z[i][j + 1]) else {
                continue;
            };
            let (x0, x1, y0, y1) = (xs[i], xs[i + 1], ys[j], ys[j + 1]);
            // Corners counter-clockwise from (x0, y0); edges bottom, right, top, left.
            let idx = usize::from(a >= level)
                | usize::from(b >= level) << 1
                | usize::from(c >= level) << 2
                | usize::from(d >= level) << 3;
            let e = [
                (lerp(x0, x1, a, b, level), y0),
                (x1, lerp(y0, y1, b, c, level)),
                (lerp(x0, x1, d, c, level), y1),
                (x0, lerp(y0, y1, a, d, level)),
            ];
            let centre_high = (a + b + c + d) / 4.0 >= level;
            let pairs: &[(usize, usize)] = match idx {
                0 | 15 => &[],
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(3, 2)],
                5 if centre_high => &[(3, 2), (0, 1)],
                5 => &[(3, 0), (1, 2)],
                10 if centre_high => &[(3, 0), (1, 2)],
                10 => &[(3, 2), (0, 1)],
                _ => unreachable!(),
            };
            segs.extend(pairs.iter().map(|&(p, q)| (e[p], e[q])));
        }
    }
    segs
}

fn shade(t: f64) -> String {
    // Dark blue for low values through yellow for high ones.
    let t = t.clamp(0.0, 1.0);
    let r = (30.0 + 225.0 * t) as u8;
    let g = (40.0 + 190.0 * t) as u8;
    let b = (120.0 - 90.0 * t) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

pub struct ContourPlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    /// `z[i][j]` at `(xs[i], ys[j])`; `None` cells are drawn grey.
    pub z: &'a [Vec<Option<f64>>],
    pub levels: &'a [f64],
    /// Scatter points drawn on top.
    pub points: &'a [(f64, f64)],
}

impl ContourPlot<'_> {
    pub fn render(&self) -> String {
        let half = |v: &[f64], k: usize| -> (f64, f64) {
            let lo = if k == 0 { v[0] } else { (v[k - 1] + v[k]) / 2.0 };
            let hi = if k + 1 == v.len() {
                v[k]
            } else {
                (v[k] + v[k + 1]) / 2.0
            };
            (lo, hi)
        };
        let frame = Frame::new(self.xs.iter().copied(), self.ys.iter().copied());
        let (z0, z1) = bounds(self.z.iter().flatten().flatten().copied());
        let mut out = header();
        for (i, row) in self.z.iter().enumerate().take(self.xs.len()) {
            for (j, v) in row.iter().enumerate().take(self.ys.len()) {
                let (xa, xb) = half(self.xs, i);
                let (ya, yb) = half(self.ys, j);
                let fill = v.map_or_else(|| "#bbbbbb".to_string(), |v| shade((v - z0) / (z1 - z0)));
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                    frame.px(xa),
                    frame.py(yb),
                    frame.px(xb) - frame.px(xa),
                    frame.py(ya) - frame.py(yb)
                );
            }
        }
        for &level in self.levels {
            for ((ax, ay), (bx, by)) in marching_squares(self.z, self.xs, self.ys, level) {
                let _ = writeln!(
                    out,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1"/>"#,
                    frame.px(ax),
                    frame.py(ay),
                    frame.px(bx),
                    frame.py(by)
                );
            }
        }
        for &(x, y) in self.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="white" stroke="black"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
        frame.axes(&mut out, self.title, self.x_label, self.y_label);
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial(n: usize) -> (Vec<f64>, Vec<Vec<Option<f64>>>) {
        let xs: Vec<f64> = (0..n).map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64).collect();
        let z = xs
            .iter()
            .map(|&x| xs.iter().map(|&y| Some((x * x + y * y).sqrt())).collect())
            .collect();
        (xs, z)
    }

    #[test]
    fn circle_contour_lies_on_the_circle() {
        let (xs, z) = radial(41);
        let segs = marching_squares(&z, &xs, &xs, 0.5);
        assert!(segs.len() > 40);
        for ((ax, ay), (bx, by)) in segs {
            for r in [(ax * ax + ay * ay).sqrt(), (bx * bx + by * by).sqrt()] {
                assert!((r - 0.5).abs() < 0.01, "{r}");
            }
        }
    }

    #[test]
    fn level_outside_range_gives_nothing() {
        let (xs, z) = radial(11);
        assert!(marching_squares(&z, &xs, &xs, 5.0).is_empty());
        assert!(marching_squares(&z, &xs, &xs, -1.0).is_empty());
    }

    #[test]
    fn missing_cells_are_skipped() {
        let xs = [0.0, 1.0];
        let z = vec![vec![Some(0.0), None], vec![Some(1.0), Some(1.0)]];
        assert!(marching_squares(&z, &xs, &xs, 0.5).is_empty());
    }

    #[test]
    fn documents_are_well_formed() {
        let x = [0.0, 1.0, 2.0, f64::NAN, 4.0];
        let y = [1.0, 2.0, 1.5, 0.0, 3.0];
        let svg = line_plot(
            "g <omega>",
            "epoch",
            "gain",
            &[Series {
                label: "a&b",
                x: &x,
                y: &y,
            }],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("g &lt;omega&gt;") && svg.contains("a&amp;b"));
        let (xs, z) = radial(5);
        let c = ContourPlot {
            title: "t",
            x_label: "x",
            y_label: "y",
            xs: &xs,
            ys: &xs,
            z: &z,
            levels: &[0.5],
            points: &[(0.0, 0.0)],
        }
        .render();
        assert_eq!(c.matches("<rect").count(), 1 + 25 + 1);
        assert!(c.contains("<circle"));
    }
}
