//! Minimal deterministic SVG writer.

use std::fmt::Write;

/// Three decimals without negative zero.
pub fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub struct Svg {
    buf: String,
}

impl Svg {
    pub fn new(width: u32, height: u32) -> Self {
        let mut buf = String::new();
        let _ = writeln!(
            buf,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
        );
        let _ = writeln!(buf, r##"<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>"##);
        Svg { buf }
    }

    pub fn line(&mut self, (x1, y1): (f64, f64), (x2, y2): (f64, f64), stroke: &str, width: f64) {
        let _ = writeln!(
            self.buf,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="{}"/>"#,
            num(x1),
            num(y1),
            num(x2),
            num(y2),
            num(width)
        );
    }

    pub fn circle(&mut self, (cx, cy): (f64, f64), r: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.buf,
            r#"<circle cx="{}" cy="{}" r="{}" fill="none" stroke="{stroke}" stroke-width="{}"/>"#,
            num(cx),
            num(cy),
            num(r),
            num(width)
        );
    }

    /// An open polyline, or a closed polygon when `closed` is set.
    pub fn path(&mut self, points: &[(f64, f64)], stroke: &str, width: f64, closed: bool, class: &str) {
        let pts: Vec<String> = points.iter().map(|&(x, y)| format!("{},{}", num(x), num(y))).collect();
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            self.buf,
            r#"<{tag} class="{}" points="{}" fill="none" stroke="{stroke}" stroke-width="{}"/>"#,
            escape(class),
            pts.join(" "),
            num(width)
        );
    }

    pub fn text(&mut self, (x, y): (f64, f64), size: u32, anchor: &str, content: &str) {
        let _ = writeln!(
            self.buf,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}" fill="#202020">{}</text>"##,
            num(x),
            num(y),
            escape(content)
        );
    }

    pub fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}
