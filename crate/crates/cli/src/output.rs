//! Artifact writers: JSON, CSV grids and SVG heatmaps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use quartic_heat::field::format_csv_grid;
use quartic_heat::Domain2D;

use crate::Failure;

pub struct Sink {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Sink { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        let p = self.dir.join(name);
        std::fs::write(&p, body).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display())))?;
        self.written.push(name.to_owned());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<String, Failure> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)?;
        Ok(s)
    }

    pub fn grid(&mut self, name: &str, domain: &Domain2D, values: &[f64]) -> Result<(), Failure> {
        self.text(name, &format_csv_grid(domain, values))
    }

    pub fn records<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Failure::Runtime(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
        self.text(name, &String::from_utf8_lossy(&bytes))
    }
}

/// Viridis control points.
const COLORMAP: [[u8; 3]; 5] = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];

fn color(s: f64) -> [u8; 3] {
    let s = if s.is_finite() { s.clamp(0.0, 1.0) } else { 0.0 };
    let x = s * (COLORMAP.len() - 1) as f64;
    let k = (x.floor() as usize).min(COLORMAP.len() - 2);
    let f = x - k as f64;
    let (a, b) = (COLORMAP[k], COLORMAP[k + 1]);
    std::array::from_fn(|c| (a[c] as f64 + f * (b[c] as f64 - a[c] as f64)).round() as u8)
}

/// Rectilinear heatmap, one cell per node, row `j = 0` at the bottom.
pub fn heatmap_svg(domain: &Domain2D, values: &[f64], title: &str) -> String {
    let finite: Vec<f64> = values.iter().cloned().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cell = (600 / domain.n1.max(domain.n2)).max(1);
    let (w, h) = (cell * domain.n1, cell * domain.n2);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" viewBox="0 0 {w} {}">"#,
        h + 20,
        h + 20
    );
    let _ = writeln!(s, r#"<text x="2" y="14" font-family="monospace" font-size="12">{title} [{lo:.3e}, {hi:.3e}]</text>"#);
    for j in 0..domain.n2 {
        for i in 0..domain.n1 {
            let [r, g, b] = color((values[domain.index(i, j)] - lo) / span);
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb({r},{g},{b})"/>"#,
                i * cell,
                20 + (domain.n2 - 1 - j) * cell
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use quartic_heat::BoundaryKind;

    #[test]
    fn colormap_endpoints() {
        assert_eq!(color(0.0), COLORMAP[0]);
        assert_eq!(color(1.0), COLORMAP[4]);
        assert_eq!(color(f64::NAN), COLORMAP[0]);
    }

    #[test]
    fn heatmap_has_one_rect_per_node() {
        let d = Domain2D::square(1.0, 5, BoundaryKind::DirichletRectangle).unwrap();
        let v: Vec<f64> = (0..25).map(|k| k as f64).collect();
        let svg = heatmap_svg(&d, &v, "test");
        assert_eq!(svg.matches("<rect").count(), 25);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
