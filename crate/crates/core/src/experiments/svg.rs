//! Minimal static SVG 1.1 scene builder (scatter points, vectors, lines).

/// Data-space scene rendered into a fixed pixel viewport. Coordinates are
/// formatted with two decimals so output bytes are deterministic.
pub struct SvgScene {
    width: f64,
    height: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    margin: f64,
    body: String,
}

impl SvgScene {
    pub fn new(width: f64, height: f64, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Self {
            width,
            height,
            x_range,
            y_range,
            margin: 36.0,
            body: String::new(),
        }
    }

    fn tx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.margin + (x - lo) / (hi - lo) * (self.width - 2.0 * self.margin)
    }

    fn ty(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.height - self.margin - (y - lo) / (hi - lo) * (self.height - 2.0 * self.margin)
    }

    pub fn circle(&mut self, x: f64, y: f64, r_px: f64, fill: &str, opacity: f64) {
        self.body.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"{}\" fill-opacity=\"{:.2}\"/>\n",
            self.tx(x),
            self.ty(y),
            r_px,
            fill,
            opacity
        ));
    }

    #[allow(clippy::too_many_arguments)]
    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, w: f64, dashed: bool) {
        let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        self.body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" stroke-width=\"{:.2}\"{}/>\n",
            self.tx(x1),
            self.ty(y1),
            self.tx(x2),
            self.ty(y2),
            stroke,
            w,
            dash
        ));
    }

    /// Arrow from the origin of the segment to its tip with a small head.
    pub fn arrow(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, w: f64) {
        self.line(x1, y1, x2, y2, stroke, w, false);
        let (px1, py1) = (self.tx(x1), self.ty(y1));
        let (px2, py2) = (self.tx(x2), self.ty(y2));
        let (dx, dy) = (px2 - px1, py2 - py1);
        let len = (dx * dx + dy * dy).sqrt().max(1e-9);
        let (ux, uy) = (dx / len, dy / len);
        let head = 8.0;
        let left = (
            px2 - head * ux + 0.5 * head * uy,
            py2 - head * uy - 0.5 * head * ux,
        );
        let right = (
            px2 - head * ux - 0.5 * head * uy,
            py2 - head * uy + 0.5 * head * ux,
        );
        self.body.push_str(&format!(
            "<polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"{}\"/>\n",
            px2, py2, left.0, left.1, right.0, right.1, stroke
        ));
    }

    pub fn cross(&mut self, x: f64, y: f64, size_px: f64, stroke: &str, w: f64) {
        let (cx, cy) = (self.tx(x), self.ty(y));
        let s = size_px;
        self.body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" stroke-width=\"{:.2}\"/>\n",
            cx - s, cy - s, cx + s, cy + s, stroke, w
        ));
        self.body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" stroke-width=\"{:.2}\"/>\n",
            cx - s, cy + s, cx + s, cy - s, stroke, w
        ));
    }

    pub fn text(&mut self, x_px: f64, y_px: f64, size: f64, fill: &str, content: &str) {
        self.body.push_str(&format!(
            "<text x=\"{x_px:.2}\" y=\"{y_px:.2}\" font-size=\"{size:.2}\" font-family=\"sans-serif\" fill=\"{fill}\">{}</text>\n",
            escape(content)
        ));
    }

    /// Light axes through the data-space origin plus a frame.
    pub fn axes(&mut self) {
        let (x_lo, x_hi) = self.x_range;
        let (y_lo, y_hi) = self.y_range;
        self.line(x_lo, 0.0, x_hi, 0.0, "#cccccc", 1.0, false);
        self.line(0.0, y_lo, 0.0, y_hi, "#cccccc", 1.0, false);
        self.body.push_str(&format!(
            "<rect x=\"{m:.2}\" y=\"{m:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\"/>\n",
            m = self.margin,
            w = self.width - 2.0 * self.margin,
            h = self.height - 2.0 * self.margin
        ));
    }

    /// A line in data space clipped to the x-range: y = (-(w0*x) - b) / w1,
    /// i.e. the zero set of w.x + b.
    pub fn boundary(&mut self, w: (f64, f64), b: f64, stroke: &str) {
        let (x_lo, x_hi) = self.x_range;
        if w.1.abs() > 1e-12 {
            let y_at = |x: f64| (-(w.0 * x) - b) / w.1;
            self.line(x_lo, y_at(x_lo), x_hi, y_at(x_hi), stroke, 1.5, false);
        } else if w.0.abs() > 1e-12 {
            let x0 = -b / w.0;
            let (y_lo, y_hi) = self.y_range;
            self.line(x0, y_lo, x0, y_hi, stroke, 1.5, false);
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_is_valid_svg_and_deterministic() {
        let build = || {
            let mut s = SvgScene::new(400.0, 300.0, (-3.0, 3.0), (-3.0, 3.0));
            s.axes();
            s.circle(1.0, 1.0, 3.0, "#ff0000", 0.8);
            s.arrow(0.0, 0.0, 1.0, 0.0, "green", 2.0);
            s.cross(0.5, -0.5, 5.0, "black", 2.0);
            s.boundary((0.0, 1.0), 0.0, "#888888");
            s.text(10.0, 20.0, 12.0, "black", "tau = 45&deg;? <no>");
            s.finish()
        };
        let a = build();
        let b = build();
        assert_eq!(a, b);
        assert!(a.starts_with("<?xml"));
        assert!(a.contains("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("&lt;no&gt;"));
    }

    #[test]
    fn vertical_boundary_rendered() {
        let mut s = SvgScene::new(100.0, 100.0, (-1.0, 1.0), (-1.0, 1.0));
        s.boundary((1.0, 0.0), 0.5, "#000000");
        let out = s.finish();
        assert!(out.contains("<line"));
    }
}
