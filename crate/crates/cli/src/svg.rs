//! Minimal self-contained SVG plots.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

pub const PALETTE: [&str; 4] = ["#1f77b4", "#7f7f7f", "#d62728", "#2ca02c"];

/// Linear map from a data box to the plot area.
struct Frame {
    x: [f64; 2],
    y: [f64; 2],
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut x, mut y) = ([f64::INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::NEG_INFINITY]);
        for (a, b) in points.filter(|(a, b)| a.is_finite() && b.is_finite()) {
            x = [x[0].min(a), x[1].max(a)];
            y = [y[0].min(b), y[1].max(b)];
        }
        let pad = |r: [f64; 2]| {
            if !r[0].is_finite() {
                return [0.0, 1.0];
            }
            let span = (r[1] - r[0]).max(1e-9);
            [r[0] - 0.05 * span, r[1] + 0.05 * span]
        };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, a: f64, b: f64) -> (f64, f64) {
        let u = MARGIN + (a - self.x[0]) / (self.x[1] - self.x[0]) * (W - 2.0 * MARGIN);
        let v = H - MARGIN - (b - self.y[0]) / (self.y[1] - self.y[0]) * (H - 2.0 * MARGIN);
        (u, v)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(out: &mut String, frame: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (x0, y0) = (MARGIN, H - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{x0} {MARGIN} V{y0} H{}" fill="none" stroke="black"/>"#,
        W - MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 16.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = frame.x[0] + f * (frame.x[1] - frame.x[0]);
        let yv = frame.y[0] + f * (frame.y[1] - frame.y[0]);
        let (u, _) = frame.px(xv, frame.y[0]);
        let (_, v) = frame.px(frame.x[0], yv);
        let _ = writeln!(
            out,
            r#"<text x="{u:.1}" y="{}" text-anchor="middle">{xv:.3}</text>"#,
            y0 + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{v:.1}" text-anchor="end">{yv:.3}</text>"#,
            x0 - 4.0
        );
    }
}

fn dots(out: &mut String, frame: &Frame, pts: &[(f64, f64)], color: &str, r: f64) {
    for &(a, b) in pts {
        let (u, v) = frame.px(a, b);
        let _ = writeln!(
            out,
            r#"<circle cx="{u:.2}" cy="{v:.2}" r="{r}" fill="{color}" fill-opacity="0.5"/>"#
        );
    }
}

fn polyline(out: &mut String, frame: &Frame, pts: &[(f64, f64)], color: &str) {
    let d: Vec<String> = pts
        .iter()
        .map(|&(a, b)| {
            let (u, v) = frame.px(a, b);
            format!("{u:.2},{v:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
        d.join(" ")
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#,
            W - MARGIN - 80.0,
            y - 9.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}">{}</text>"#,
            W - MARGIN - 64.0,
            escape(name)
        );
    }
}

/// Points, a fitted curve and bin means.
pub fn regression_plot(points: &[(f64, f64)], curve: &[(f64, f64)], bin_means: &[(f64, f64)], title: &str) -> String {
    let frame = Frame::fit(points.iter().chain(bin_means).copied());
    let mut out = String::new();
    open(&mut out, &frame, title, "thickness (mm)", "P(High)");
    dots(&mut out, &frame, points, PALETTE[1], 2.0);
    let inside: Vec<(f64, f64)> = curve
        .iter()
        .copied()
        .filter(|p| p.1 >= frame.y[0] && p.1 <= frame.y[1])
        .collect();
    polyline(&mut out, &frame, &inside, PALETTE[2]);
    dots(&mut out, &frame, bin_means, PALETTE[0], 4.0);
    legend(
        &mut out,
        &[("samples", PALETTE[1]), ("fit", PALETTE[2]), ("bin mean", PALETTE[0])],
    );
    out.push_str("</svg>\n");
    out
}

/// An ellipse given by centre, semi-axes and major-axis angle (radians).
pub struct EllipseShape {
    pub center: (f64, f64),
    pub semi: (f64, f64),
    pub angle: f64,
    pub degenerate: bool,
}

/// Grouped scatter with one ellipse per group.
pub fn scatter_with_ellipses(
    groups: &[(&str, Vec<(f64, f64)>, Option<EllipseShape>)],
    title: &str,
    xlabel: &str,
    ylabel: &str,
) -> String {
    let frame = Frame::fit(groups.iter().flat_map(|g| g.1.iter().copied()));
    let mut out = String::new();
    open(&mut out, &frame, title, xlabel, ylabel);
    for (i, (_, pts, shape)) in groups.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        dots(&mut out, &frame, pts, color, 2.0);
        let Some(e) = shape else { continue };
        let (s, c) = e.angle.sin_cos();
        let outline: Vec<(f64, f64)> = (0..=96)
            .map(|k| {
                let t = k as f64 / 96.0 * std::f64::consts::TAU;
                let (a, b) = (e.semi.0 * t.cos(), if e.degenerate { 0.0 } else { e.semi.1 * t.sin() });
                (e.center.0 + c * a - s * b, e.center.1 + s * a + c * b)
            })
            .collect();
        polyline(&mut out, &frame, &outline, color);
    }
    let entries: Vec<(&str, &str)> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| (g.0, PALETTE[i % PALETTE.len()]))
        .collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_well_formed() {
        let s = regression_plot(
            &[(0.1, 0.2), (1.0, 0.9)],
            &[(0.0, 0.1), (1.0, 0.9)],
            &[(0.15, 0.2)],
            "a < b",
        );
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        let e = EllipseShape {
            center: (0.0, 0.0),
            semi: (1.0, 0.5),
            angle: 0.3,
            degenerate: false,
        };
        let s = scatter_with_ellipses(&[("Low", vec![(0.0, 0.0), (1.0, 1.0)], Some(e))], "t", "x", "y");
        assert_eq!(s.matches("<polyline").count(), 1);
    }
}
