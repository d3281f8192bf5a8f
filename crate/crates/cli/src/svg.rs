//! Static heatmap of a correlation surface.
//!
//! MOS runs along x, |ΔMOS| up the y axis. Colours come from a fixed diverging
//! blue-white-red scale over [-1, 1] so that plots of different models compare
//! directly.

use std::fmt::Write as _;

use gmc_core::CorrelationSurface;

const PLOT: f64 = 400.0;
const LEFT: f64 = 64.0;
const TOP: f64 = 36.0;
const BAR_GAP: f64 = 24.0;
const BAR_W: f64 = 16.0;
const BAR_STEPS: usize = 40;
const TICKS: usize = 5;

const NEG: [f64; 3] = [59.0, 76.0, 192.0];
const MID: [f64; 3] = [247.0, 247.0, 247.0];
const POS: [f64; 3] = [180.0, 4.0, 38.0];

fn colour(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (from, to, t) = if v < 0.0 { (MID, NEG, -v) } else { (MID, POS, v) };
    let c: Vec<u8> = (0..3)
        .map(|i| (from[i] + (to[i] - from[i]) * t).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn render_heatmap(surface: &CorrelationSurface, title: &str) -> String {
    let g = surface.size();
    let cell = PLOT / g as f64;
    let width = LEFT + PLOT + BAR_GAP + BAR_W + 48.0;
    let height = TOP + PLOT + 48.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        LEFT + PLOT / 2.0,
        escape(title)
    );

    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for is in 0..g {
        for id in 0..g {
            let x = LEFT + is as f64 * cell;
            // row 0 of |ΔMOS| sits at the bottom
            let y = TOP + PLOT - (id + 1) as f64 * cell;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{cell:.3}" height="{cell:.3}" fill="{}"/>"#,
                colour(surface.value(is, id))
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#
    );

    let (qs_lo, qs_hi) = surface.qs_range;
    let (qd_lo, qd_hi) = surface.qd_range;
    for t in 0..TICKS {
        let f = t as f64 / (TICKS - 1) as f64;
        let x = LEFT + f * PLOT;
        let y = TOP + PLOT - f * PLOT;
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{:.1}</text>"#,
            TOP + PLOT + 16.0,
            qs_lo + f * (qs_hi - qs_lo)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.1}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            qd_lo + f * (qd_hi - qd_lo)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">MOS</text>"#,
        LEFT + PLOT / 2.0,
        TOP + PLOT + 36.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">|ΔMOS|</text>"#,
        TOP + PLOT / 2.0,
        TOP + PLOT / 2.0
    );

    let bx = LEFT + PLOT + BAR_GAP;
    let step = PLOT / BAR_STEPS as f64;
    for i in 0..BAR_STEPS {
        let v = -1.0 + 2.0 * (i as f64 + 0.5) / BAR_STEPS as f64;
        let y = TOP + PLOT - (i + 1) as f64 * step;
        let _ = writeln!(
            s,
            r#"<rect x="{bx:.1}" y="{y:.3}" width="{BAR_W}" height="{step:.3}" fill="{}"/>"#,
            colour(v)
        );
    }
    for (v, y) in [(1.0, TOP), (0.0, TOP + PLOT / 2.0), (-1.0, TOP + PLOT)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{v:.0}</text>"#,
            bx + BAR_W + 4.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_endpoints() {
        assert_eq!(colour(-1.0), "#3b4cc0");
        assert_eq!(colour(0.0), "#f7f7f7");
        assert_eq!(colour(1.0), "#b40426");
        assert_eq!(colour(7.0), colour(1.0));
    }
}
