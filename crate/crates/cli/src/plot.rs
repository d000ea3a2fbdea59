//! Self-contained SVG heatmaps (time on x, site or level index on y).

use std::fmt::Write;

/// Longest time axis drawn; longer series are strided.
pub const MAX_COLUMNS: usize = 800;

pub struct Heatmap<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub times: &'a [f64],
    /// One column per time, each of the same length.
    pub columns: &'a [Vec<f64>],
}

/// Five-stop blue → white → red ramp on `[0, 1]`.
fn color(u: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] =
        [(49.0, 54.0, 149.0), (116.0, 173.0, 209.0), (247.0, 247.0, 247.0), (244.0, 109.0, 67.0), (165.0, 0.0, 38.0)];
    let u = if u.is_finite() { u.clamp(0.0, 1.0) } else { 0.5 };
    let x = u * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn stride_for(len: usize) -> usize {
    len.div_ceil(MAX_COLUMNS).max(1)
}

/// Value range over all cells; a flat field gets a unit-width range around its value.
pub fn bounds(columns: &[Vec<f64>]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in columns.iter().flatten().filter(|v| v.is_finite()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

impl Heatmap<'_> {
    pub fn render(&self) -> String {
        let stride = stride_for(self.columns.len());
        let picked: Vec<usize> = (0..self.columns.len()).step_by(stride).collect();
        let rows = self.columns.first().map_or(0, Vec::len);
        let (lo, hi) = bounds(self.columns);

        let (left, top, plot_w, plot_h) = (70.0, 40.0, 720.0, 400.0);
        let cw = plot_w / picked.len().max(1) as f64;
        let ch = plot_h / rows.max(1) as f64;
        let width = left + plot_w + 110.0;
        let height = top + plot_h + 60.0;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" data-min="{lo:e}" data-max="{hi:e}" data-columns="{}" data-rows="{rows}">"#,
            picked.len()
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            left + plot_w / 2.0,
            escape(self.title)
        );
        let _ = writeln!(s, r#"<g class="cells" shape-rendering="crispEdges">"#);
        for (c, &k) in picked.iter().enumerate() {
            for (r, v) in self.columns[k].iter().enumerate() {
                // Row 0 (first site / lowest level) sits at the bottom.
                let y = top + plot_h - (r + 1) as f64 * ch;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                    left + c as f64 * cw,
                    y,
                    cw,
                    ch,
                    color((v - lo) / (hi - lo))
                );
            }
        }
        let _ = writeln!(s, "</g>");

        let (t0, t1) = match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => (0.0, 0.0),
        };
        let axis_y = top + plot_h;
        let _ = writeln!(
            s,
            r#"<g font-family="sans-serif" font-size="12"><text x="{left}" y="{}" text-anchor="start">{}</text><text x="{}" y="{}" text-anchor="end">{}</text><text x="{}" y="{}" text-anchor="middle">{}</text><text x="20" y="{}" transform="rotate(-90 20 {})" text-anchor="middle">{}</text><text x="{}" y="{}" text-anchor="end">1</text><text x="{}" y="{}" text-anchor="end">{rows}</text></g>"#,
            axis_y + 16.0,
            fmt_tick(t0),
            left + plot_w,
            axis_y + 16.0,
            fmt_tick(t1),
            left + plot_w / 2.0,
            axis_y + 36.0,
            escape(self.x_label),
            top + plot_h / 2.0,
            top + plot_h / 2.0,
            escape(self.y_label),
            left - 6.0,
            axis_y - 2.0,
            left - 6.0,
            top + 12.0,
        );

        // Colour bar.
        let bx = left + plot_w + 30.0;
        let _ = writeln!(s, r#"<g class="colorbar">"#);
        let steps = 50;
        for i in 0..steps {
            let u = i as f64 / (steps - 1) as f64;
            let y = top + plot_h - (i + 1) as f64 * plot_h / steps as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{bx}" y="{y:.3}" width="20" height="{:.3}" fill="{}"/>"#,
                plot_h / steps as f64,
                color(u)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            bx + 24.0,
            top + 10.0,
            fmt_tick(hi),
            bx + 24.0,
            top + plot_h,
            fmt_tick(lo)
        );
        let _ = writeln!(s, "</g>");
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(x: f64) -> String {
    if x != 0.0 && (x.abs() >= 1e4 || x.abs() < 1e-2) {
        format!("{x:.2e}")
    } else {
        format!("{x:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_count_and_bounds() {
        let cols = vec![vec![0.0, 1.0, 2.0], vec![-1.0, 0.5, 3.0]];
        let svg = Heatmap { title: "a<b", x_label: "t", y_label: "site", times: &[0.0, 1.0], columns: &cols }.render();
        assert_eq!(svg.matches("<rect x=").count(), 6 + 50);
        assert!(svg.contains(r#"data-min="-1e0""#));
        assert!(svg.contains(r#"data-max="3e0""#));
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn single_column_is_well_formed() {
        let cols = vec![vec![0.25; 4]];
        let svg = Heatmap { title: "x", x_label: "t", y_label: "i", times: &[0.0], columns: &cols }.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains(r#"data-columns="1""#));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn long_series_are_strided() {
        let cols = vec![vec![1.0]; 2 * MAX_COLUMNS + 1];
        let times: Vec<f64> = (0..cols.len()).map(|k| k as f64).collect();
        let svg = Heatmap { title: "x", x_label: "t", y_label: "i", times: &times, columns: &cols }.render();
        // 1601 samples, stride 3.
        assert!(svg.contains(r#"data-columns="534""#));
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(color(0.0), "#313695");
        assert_eq!(color(1.0), "#a50026");
        assert_eq!(color(0.5), "#f7f7f7");
    }
}
