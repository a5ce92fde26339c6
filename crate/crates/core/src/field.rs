//! Coefficient fields `alpha, beta, gamma, w` over a rectangular domain.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::Domain2D;
use crate::error::{Error, Result};
use crate::grid::{cell_of, RealGrid};

/// Default number of equispaced angles for suprema over the unit circle.
pub const DEFAULT_ANGLES: usize = 720;

/// Coefficient values at a single point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefs {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub w: f64,
}

impl Coefs {
    pub fn real(alpha: f64, beta: f64, gamma: f64) -> Self {
        Coefs {
            alpha: Complex64::new(alpha, 0.0),
            beta: Complex64::new(beta, 0.0),
            gamma: Complex64::new(gamma, 0.0),
            w: 1.0,
        }
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.w = w;
        self
    }

    #[inline]
    pub fn symbol(&self, xi: [f64; 2]) -> Complex64 {
        let a = xi[0] * xi[0];
        let b = xi[1] * xi[1];
        self.alpha * (a * a) + self.beta * (2.0 * a * b) + self.gamma * (b * b)
    }

    /// Real part of the symbol, using only the real parts of the coefficients.
    #[inline]
    pub fn symbol_re(&self, xi: [f64; 2]) -> f64 {
        let a = xi[0] * xi[0];
        let b = xi[1] * xi[1];
        self.alpha.re * a * a + 2.0 * self.beta.re * a * b + self.gamma.re * b * b
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.alpha.im.abs() <= tol * (1.0 + self.alpha.re.abs())
            && self.beta.im.abs() <= tol * (1.0 + self.beta.re.abs())
            && self.gamma.im.abs() <= tol * (1.0 + self.gamma.re.abs())
    }

    pub fn max_modulus(&self) -> f64 {
        self.alpha.norm().max(self.beta.norm()).max(self.gamma.norm())
    }

    /// `min over unit xi of Re A / |xi|^4` on the given angle table.
    pub fn min_re_symbol(&self, angles: &[(f64, f64)]) -> f64 {
        angles
            .iter()
            .map(|&(c, s)| self.symbol_re([c, s]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Profile shapes for the smooth Q sweep, mapping `[0,1]` onto `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Linear,
    Cosine,
    Tanh,
}

impl Profile {
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            Profile::Linear => s,
            Profile::Cosine => 0.5 * (1.0 - (std::f64::consts::PI * s).cos()),
            Profile::Tanh => 0.5 * ((6.0 * (s - 0.5)).tanh() / 3.0f64.tanh() + 1.0),
        }
    }
}

type CoefFn = dyn Fn([f64; 2]) -> Coefs + Send + Sync;

#[derive(Clone)]
enum Source {
    Constant(Coefs),
    Analytic { name: String, f: Arc<CoefFn> },
    Tabulated(Box<Tables>),
}

#[derive(Clone)]
struct Tables {
    alpha: Vec<Complex64>,
    beta: Vec<Complex64>,
    gamma: Vec<Complex64>,
    w: Vec<f64>,
}

/// Coefficients `alpha, beta, gamma` (complex) and weight `w > 0` on a domain.
///
/// Construction samples every grid node and records the control constant
/// `c_upper` and the ellipticity constant `c_ell`. Both are sampled values.
#[derive(Clone)]
pub struct CoefficientField {
    domain: Domain2D,
    source: Source,
    c_upper: f64,
    c_ell: f64,
    angles: usize,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("domain", &self.domain)
            .field("source", &self.source_name())
            .field("c_upper", &self.c_upper)
            .field("c_ell", &self.c_ell)
            .finish()
    }
}

/// Unit vectors at `n` equispaced angles on `[0, 2*pi)`.
pub fn unit_angles(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            (th.cos(), th.sin())
        })
        .collect()
}

impl CoefficientField {
    pub fn constant(domain: Domain2D, coefs: Coefs) -> Result<Self> {
        Self::build(domain, Source::Constant(coefs), DEFAULT_ANGLES)
    }

    pub fn constant_real(domain: Domain2D, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::constant(domain, Coefs::real(alpha, beta, gamma))
    }

    pub fn bilaplacian(domain: Domain2D) -> Result<Self> {
        Self::constant_real(domain, 1.0, 1.0, 1.0)
    }

    /// `alpha = gamma = 1`, `beta = q`.
    pub fn q_constant(domain: Domain2D, q: f64) -> Result<Self> {
        Self::constant_real(domain, 1.0, q, 1.0)
    }

    /// `alpha = gamma = w = 1` and `beta = Q(x1)` sweeping `[q_min, q_max]`
    /// across the domain along `x1` with the given profile.
    pub fn smooth_q_sweep(domain: Domain2D, q_min: f64, q_max: f64, profile: Profile) -> Result<Self> {
        if !(q_min.is_finite() && q_max.is_finite()) {
            return Err(Error::InvalidField("Q range must be finite".into()));
        }
        let (a, b) = (domain.x1_min, domain.x1_max);
        let f = move |p: [f64; 2]| {
            let s = (p[0] - a) / (b - a);
            Coefs::real(1.0, q_min + (q_max - q_min) * profile.eval(s), 1.0)
        };
        Self::analytic(domain, "smooth-Q-sweep", f)
    }

    /// `alpha = 1 + amplitude * sign(sin(2 pi frequency x1))`, `beta = gamma = w = 1`.
    pub fn square_wave_alpha(domain: Domain2D, amplitude: f64, frequency: f64) -> Result<Self> {
        let f = move |p: [f64; 2]| {
            let s = (2.0 * std::f64::consts::PI * frequency * p[0]).sin();
            let sign = if s >= 0.0 { 1.0 } else { -1.0 };
            Coefs::real(1.0 + amplitude * sign, 1.0, 1.0)
        };
        Self::analytic(domain, "square-wave-alpha", f)
    }

    pub fn analytic(
        domain: Domain2D,
        name: &str,
        f: impl Fn([f64; 2]) -> Coefs + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::build(
            domain,
            Source::Analytic {
                name: name.to_string(),
                f: Arc::new(f),
            },
            DEFAULT_ANGLES,
        )
    }

    /// Node-sampled coefficients; off-node values are bilinear interpolants.
    pub fn tabulated(
        domain: Domain2D,
        alpha: Vec<Complex64>,
        beta: Vec<Complex64>,
        gamma: Vec<Complex64>,
        w: Vec<f64>,
    ) -> Result<Self> {
        let n = domain.len();
        if alpha.len() != n || beta.len() != n || gamma.len() != n || w.len() != n {
            return Err(Error::GridMismatch(format!(
                "tabulated coefficients must have {} entries each",
                n
            )));
        }
        Self::build(
            domain,
            Source::Tabulated(Box::new(Tables { alpha, beta, gamma, w })),
            DEFAULT_ANGLES,
        )
    }

    /// Reads four CSV grids (see [`read_csv_grid`]); imaginary parts are optional.
    pub fn from_csv(
        alpha: &Path,
        beta: &Path,
        gamma: &Path,
        w: Option<&Path>,
        imag: [Option<&Path>; 3],
    ) -> Result<Self> {
        let ga = read_csv_grid(alpha)?;
        let domain = ga.domain;
        let load = |p: &Path| -> Result<RealGrid> {
            let g = read_csv_grid(p)?;
            if !g.domain.same_grid(&domain) {
                return Err(Error::GridMismatch(format!("{} has a different grid", p.display())));
            }
            Ok(g)
        };
        let gb = load(beta)?;
        let gg = load(gamma)?;
        let gw = match w {
            Some(p) => load(p)?.values,
            None => vec![1.0; domain.len()],
        };
        let mut parts = Vec::new();
        for (re, im) in [ga, gb, gg].into_iter().zip(imag) {
            let imv = match im {
                Some(p) => load(p)?.values,
                None => vec![0.0; domain.len()],
            };
            parts.push(
                re.values
                    .iter()
                    .zip(imv)
                    .map(|(&a, b)| Complex64::new(a, b))
                    .collect::<Vec<_>>(),
            );
        }
        let gamma_v = parts.pop().unwrap();
        let beta_v = parts.pop().unwrap();
        let alpha_v = parts.pop().unwrap();
        Self::tabulated(domain, alpha_v, beta_v, gamma_v, gw)
    }

    fn build(domain: Domain2D, source: Source, angles: usize) -> Result<Self> {
        domain.validate()?;
        let mut field = CoefficientField {
            domain,
            source,
            c_upper: 0.0,
            c_ell: 0.0,
            angles,
        };
        let table = unit_angles(angles);
        let mut c_upper: f64 = 0.0;
        let mut c_ell = f64::INFINITY;
        for (i, j) in domain.nodes() {
            let c = field.node_coefs(i, j);
            let finite = [c.alpha, c.beta, c.gamma]
                .iter()
                .all(|z| z.re.is_finite() && z.im.is_finite());
            if !finite {
                return Err(Error::InvalidField(format!("non-finite coefficient at node ({i}, {j})")));
            }
            if !(c.w > 0.0 && c.w.is_finite() && (1.0 / c.w).is_finite()) {
                return Err(Error::InvalidField(format!(
                    "weight w = {} is not positive and finite at node ({i}, {j})",
                    c.w
                )));
            }
            c_upper = c_upper.max(c.max_modulus() / c.w);
            let m = c.min_re_symbol(&table) / c.w;
            if m <= 0.0 {
                return Err(Error::Ellipticity {
                    i,
                    j,
                    detail: format!("min Re A(x, xi)/w(x) over the unit circle is {m:e}"),
                });
            }
            c_ell = c_ell.min(m);
        }
        field.c_upper = c_upper;
        field.c_ell = c_ell;
        Ok(field)
    }

    pub fn domain(&self) -> &Domain2D {
        &self.domain
    }

    /// Sampled `c` with `|alpha|, |beta|, |gamma| <= c w` at every node.
    pub fn c_upper(&self) -> f64 {
        self.c_upper
    }

    /// Sampled `c` with `Re A(x, xi) >= c w(x) |xi|^4`.
    pub fn c_ell(&self) -> f64 {
        self.c_ell
    }

    pub fn angles(&self) -> usize {
        self.angles
    }

    pub fn source_name(&self) -> String {
        match &self.source {
            Source::Constant(_) => "constant".into(),
            Source::Analytic { name, .. } => name.clone(),
            Source::Tabulated(_) => "tabulated".into(),
        }
    }

    /// The shared coefficients if the field is a constant preset.
    pub fn as_constant(&self) -> Option<Coefs> {
        match &self.source {
            Source::Constant(c) => Some(*c),
            _ => None,
        }
    }

    /// Constant coefficients, detected either from the preset or by sampling.
    pub fn constant_coefs(&self) -> Option<Coefs> {
        if let Some(c) = self.as_constant() {
            return Some(c);
        }
        let c0 = self.node_coefs(0, 0);
        let same = self.domain.nodes().all(|(i, j)| {
            let c = self.node_coefs(i, j);
            (c.alpha - c0.alpha).norm() <= 1e-14 * (1.0 + c0.alpha.norm())
                && (c.beta - c0.beta).norm() <= 1e-14 * (1.0 + c0.beta.norm())
                && (c.gamma - c0.gamma).norm() <= 1e-14 * (1.0 + c0.gamma.norm())
                && (c.w - c0.w).abs() <= 1e-14 * c0.w
        });
        if same {
            Some(c0)
        } else {
            None
        }
    }

    pub fn node_coefs(&self, i: usize, j: usize) -> Coefs {
        match &self.source {
            Source::Constant(c) => *c,
            Source::Analytic { f, .. } => f(self.domain.node(i, j)),
            Source::Tabulated(t) => {
                let k = self.domain.index(i, j);
                Coefs {
                    alpha: t.alpha[k],
                    beta: t.beta[k],
                    gamma: t.gamma[k],
                    w: t.w[k],
                }
            }
        }
    }

    /// Coefficients at an arbitrary point of the domain.
    pub fn coefs(&self, p: [f64; 2]) -> Result<Coefs> {
        if !self.domain.contains(p) {
            return Err(Error::OutsideDomain(p[0], p[1]));
        }
        Ok(self.coefs_unchecked(p))
    }

    pub(crate) fn coefs_unchecked(&self, p: [f64; 2]) -> Coefs {
        match &self.source {
            Source::Constant(c) => *c,
            Source::Analytic { f, .. } => f(p),
            Source::Tabulated(t) => {
                let (i0, j0, s, u) = cell_of(&self.domain, p);
                let d = &self.domain;
                let ks = [
                    (d.index(i0, j0), (1.0 - s) * (1.0 - u)),
                    (d.index(i0 + 1, j0), s * (1.0 - u)),
                    (d.index(i0, j0 + 1), (1.0 - s) * u),
                    (d.index(i0 + 1, j0 + 1), s * u),
                ];
                let mut c = Coefs {
                    alpha: Complex64::new(0.0, 0.0),
                    beta: Complex64::new(0.0, 0.0),
                    gamma: Complex64::new(0.0, 0.0),
                    w: 0.0,
                };
                for (k, wt) in ks {
                    c.alpha += t.alpha[k] * wt;
                    c.beta += t.beta[k] * wt;
                    c.gamma += t.gamma[k] * wt;
                    c.w += t.w[k] * wt;
                }
                c
            }
        }
    }

    /// Node samples of each coefficient, in grid order.
    pub fn node_tables(&self) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>, Vec<f64>) {
        let n = self.domain.len();
        let (mut a, mut b, mut g, mut w) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for (i, j) in self.domain.nodes() {
            let c = self.node_coefs(i, j);
            a.push(c.alpha);
            b.push(c.beta);
            g.push(c.gamma);
            w.push(c.w);
        }
        (a, b, g, w)
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.source, Source::Tabulated(_))
    }
}

/// Parses a CSV grid: a header line `n1,n2,x1_min,x1_max,x2_min,x2_max`,
/// a line with those values, then `n2` rows of `n1` comma-separated values.
pub fn read_csv_grid(path: &Path) -> Result<RealGrid> {
    let text = std::fs::read_to_string(path)?;
    parse_csv_grid(&text)
}

pub fn parse_csv_grid(text: &str) -> Result<RealGrid> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))?;
    if header.replace(' ', "") != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let meta = lines.next().ok_or_else(|| Error::Parse("missing grid metadata line".into()))?;
    let m: Vec<&str> = meta.split(',').map(str::trim).collect();
    if m.len() != 6 {
        return Err(Error::Parse("metadata line needs 6 fields".into()));
    }
    let n1: usize = m[0].parse().map_err(|_| Error::Parse(format!("bad n1 {:?}", m[0])))?;
    let n2: usize = m[1].parse().map_err(|_| Error::Parse(format!("bad n2 {:?}", m[1])))?;
    let mut b = [0.0; 4];
    for (k, s) in m[2..].iter().enumerate() {
        b[k] = s.parse().map_err(|_| Error::Parse(format!("bad bound {s:?}")))?;
    }
    let domain = Domain2D::new(
        (b[0], b[1]),
        (b[2], b[3]),
        n1,
        n2,
        crate::domain::BoundaryKind::DirichletRectangle,
    )?;
    let mut values = Vec::with_capacity(n1 * n2);
    for (r, line) in lines.enumerate() {
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::Parse(format!("row {r}: {e}")))?;
        if row.len() != n1 {
            return Err(Error::Parse(format!("row {r} has {} values, expected {n1}", row.len())));
        }
        values.extend(row);
    }
    if values.len() != n1 * n2 {
        return Err(Error::Parse(format!("expected {n2} rows, got {}", values.len() / n1)));
    }
    RealGrid::new(domain, values)
}

pub const CSV_HEADER: &str = "n1,n2,x1_min,x1_max,x2_min,x2_max";

/// Inverse of [`parse_csv_grid`].
pub fn format_csv_grid(domain: &Domain2D, values: &[f64]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    out.push_str(&format!(
        "{},{},{},{},{},{}\n",
        domain.n1, domain.n2, domain.x1_min, domain.x1_max, domain.x2_min, domain.x2_max
    ));
    for j in 0..domain.n2 {
        let row: Vec<String> = (0..domain.n1)
            .map(|i| format!("{:e}", values[domain.index(i, j)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoundaryKind;

    fn dom() -> Domain2D {
        Domain2D::square(1.0, 9, BoundaryKind::DirichletRectangle).unwrap()
    }

    #[test]
    fn sampled_constants_for_constant_fields() {
        let f = CoefficientField::constant_real(dom(), 1.0, 1.0, 1.0).unwrap();
        assert!((f.c_upper() - 1.0).abs() < 1e-15);
        assert!((f.c_ell() - 1.0).abs() < 1e-12);
        let f = CoefficientField::q_constant(dom(), -0.5).unwrap();
        assert!((f.c_ell() - 0.25).abs() < 1e-3);
    }

    #[test]
    fn non_elliptic_fields_are_rejected_with_the_node() {
        let err = CoefficientField::q_constant(dom(), -1.2).unwrap_err();
        assert!(matches!(err, Error::Ellipticity { i: 0, j: 0, .. }));
        let err = CoefficientField::analytic(dom(), "bad", |p| {
            Coefs::real(1.0, if p[0] > 0.6 { -2.0 } else { 0.0 }, 1.0)
        })
        .unwrap_err();
        assert!(matches!(err, Error::Ellipticity { i: 7, .. }));
    }

    #[test]
    fn weight_must_be_positive() {
        let err = CoefficientField::analytic(dom(), "w0", |p| Coefs::real(1.0, 1.0, 1.0).with_weight(p[0].abs()))
            .unwrap_err();
        assert!(matches!(err, Error::InvalidField(_)));
    }

    #[test]
    fn csv_round_trip() {
        let d = Domain2D::new((0.0, 1.0), (-1.0, 1.0), 5, 4, BoundaryKind::DirichletRectangle).unwrap();
        let v: Vec<f64> = (0..20).map(|k| k as f64 * 0.25 - 1.0).collect();
        let text = format_csv_grid(&d, &v);
        assert!(text.starts_with("n1,n2,x1_min,x1_max,x2_min,x2_max\n"));
        let g = parse_csv_grid(&text).unwrap();
        assert!(g.domain.same_grid(&d));
        assert_eq!(g.values, v);
        assert!(parse_csv_grid("n1,n2\n1,2\n").is_err());
    }

    #[test]
    fn tabulated_interpolation_matches_affine_coefficients() {
        let d = dom();
        let analytic = |p: [f64; 2]| Coefs::real(2.0 + 0.5 * p[0], 0.3 * p[1], 1.5);
        let (a, b, g, w): (Vec<_>, Vec<_>, Vec<_>, Vec<_>) = {
            let mut t = (vec![], vec![], vec![], vec![]);
            for (i, j) in d.nodes() {
                let c = analytic(d.node(i, j));
                t.0.push(c.alpha);
                t.1.push(c.beta);
                t.2.push(c.gamma);
                t.3.push(c.w);
            }
            t
        };
        let f = CoefficientField::tabulated(d, a, b, g, w).unwrap();
        let c = f.coefs([0.37, -0.61]).unwrap();
        assert!((c.alpha.re - (2.0 + 0.5 * 0.37)).abs() < 1e-12);
        assert!((c.beta.re - 0.3 * -0.61).abs() < 1e-12);
        assert!(f.coefs([1.5, 0.0]).is_err());
    }

    #[test]
    fn profiles_span_the_unit_interval() {
        for p in [Profile::Linear, Profile::Cosine, Profile::Tanh] {
            assert!(p.eval(0.0).abs() < 1e-12);
            assert!((p.eval(1.0) - 1.0).abs() < 1e-12);
            assert!(p.eval(0.3) < p.eval(0.7));
        }
    }
}
