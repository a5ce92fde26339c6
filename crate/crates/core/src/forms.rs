//! Discrete quadratic forms `Q(u)`, `Q_{lambda phi}(u)` and `Q_{1, lambda phi}(u)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Coefs, CoefficientField};
use crate::grid::{GridFunction, RealGrid};
use crate::operator::difference_locations;
use crate::optimize::nelder_mead;

type C = Complex64;

/// Largest admissible `lambda * osc(phi)` before `exp(lambda phi)` is rejected.
pub const MAX_EXPONENT: f64 = 300.0;

fn check_support(u: &GridFunction) -> Result<()> {
    let m = u.boundary_max(2);
    if m > 0.0 {
        return Err(Error::Support(m));
    }
    Ok(())
}

fn check_grid(field: &CoefficientField, u: &GridFunction) -> Result<()> {
    if !field.domain().same_grid(&u.domain) {
        return Err(Error::GridMismatch("grid function and field grids differ".into()));
    }
    Ok(())
}

/// `Q(v1, v2) = cellarea * sum c (D v1) conj(D v2)` over all difference locations.
pub fn sesquilinear(field: &CoefficientField, v1: &GridFunction, v2: &GridFunction) -> Result<C> {
    check_grid(field, v1)?;
    check_grid(field, v2)?;
    let locs = difference_locations(field, &v1.domain)?;
    let s: C = locs
        .iter()
        .map(|l| l.coef * l.apply(&v1.values) * l.apply(&v2.values).conj())
        .sum();
    Ok(s * v1.cell_area())
}

/// `Q(u) = \int alpha |u_11|^2 + 2 beta |u_12|^2 + gamma |u_22|^2`.
pub fn quadratic_form(field: &CoefficientField, u: &GridFunction) -> Result<C> {
    check_grid(field, u)?;
    check_support(u)?;
    sesquilinear(field, u, u)
}

fn exponent_weights(u: &GridFunction, phi: &RealGrid, lambda: f64) -> Result<(GridFunction, GridFunction)> {
    if !phi.domain.same_grid(&u.domain) {
        return Err(Error::GridMismatch("phi and u grids differ".into()));
    }
    let osc = phi.max() - phi.min();
    if lambda.abs() * osc > MAX_EXPONENT {
        return Err(Error::Scaling(lambda.abs() * osc));
    }
    let mid = 0.5 * (phi.max() + phi.min());
    let mut plus = u.clone();
    let mut minus = u.clone();
    for k in 0..u.values.len() {
        let e = (lambda * (phi.values[k] - mid)).exp();
        plus.values[k] *= e;
        minus.values[k] /= e;
    }
    Ok((plus, minus))
}

/// `Q_{lambda phi}(u) = Q(e^{lambda phi} u, e^{-lambda phi} u)`.
pub fn twisted_form(field: &CoefficientField, u: &GridFunction, phi: &RealGrid, lambda: f64) -> Result<C> {
    check_grid(field, u)?;
    check_support(u)?;
    let (plus, minus) = exponent_weights(u, phi, lambda)?;
    sesquilinear(field, &plus, &minus)
}

/// The `lambda^4`, `lambda^2` and `lambda^0` groups of `Q_{1, lambda phi}(u)`,
/// each already multiplied by its power of `lambda`.
pub fn principal_form_groups(
    field: &CoefficientField,
    u: &GridFunction,
    phi: &RealGrid,
    lambda: f64,
) -> Result<[C; 3]> {
    check_grid(field, u)?;
    check_support(u)?;
    exponent_weights(u, phi, lambda)?;
    let d = u.domain;
    let (h1, h2) = (d.h1(), d.h2());
    let (n1, n2) = (d.n1, d.n2);
    let v = |i: usize, j: usize| u.values[d.index(i, j)];
    let p = |i: usize, j: usize| phi.values[d.index(i, j)];
    let mut g4 = C::new(0.0, 0.0);
    let mut g2 = C::new(0.0, 0.0);
    for j in 1..n2 - 1 {
        for i in 1..n1 - 1 {
            let u0 = v(i, j);
            let c = field.coefs(d.node(i, j))?;
            let f1 = (p(i + 1, j) - p(i - 1, j)) / (2.0 * h1);
            let f2 = (p(i, j + 1) - p(i, j - 1)) / (2.0 * h2);
            let u1 = (v(i + 1, j) - v(i - 1, j)) / (2.0 * h1);
            let u2 = (v(i, j + 1) - v(i, j - 1)) / (2.0 * h2);
            let u11 = (v(i + 1, j) - u0 * 2.0 + v(i - 1, j)) / (h1 * h1);
            let u22 = (v(i, j + 1) - u0 * 2.0 + v(i, j - 1)) / (h2 * h2);
            let u12 = (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * h1 * h2);
            g4 += c.symbol([f1, f2]) * u0.norm_sqr();
            let t_alpha = u0 * u11.conj() + u11 * u0.conj() - 4.0 * u1.norm_sqr();
            let t_beta = (u0 * u12.conj() + u12 * u0.conj() - u1 * u2.conj() - u2 * u1.conj()) * (f1 * f2)
                - (f2 * f2 * u1.norm_sqr() + f1 * f1 * u2.norm_sqr());
            let t_gamma = u0 * u22.conj() + u22 * u0.conj() - 4.0 * u2.norm_sqr();
            g2 += c.alpha * (f1 * f1) * t_alpha + c.beta * 2.0 * t_beta + c.gamma * (f2 * f2) * t_gamma;
        }
    }
    let area = d.cell_area();
    let l2 = lambda * lambda;
    let g0 = quadratic_form(field, u)?;
    Ok([g4 * (l2 * l2 * area), g2 * (l2 * area), g0])
}

/// `Q_{1, lambda phi}(u)`.
pub fn principal_form(field: &CoefficientField, u: &GridFunction, phi: &RealGrid, lambda: f64) -> Result<C> {
    let g = principal_form_groups(field, u, phi, lambda)?;
    Ok(g[0] + g[1] + g[2])
}

/// Discrete symbol of the twisted form for constant coefficients and
/// `phi = a . x`: `A(T(z))` with `T_j = (2/h_j) sinh(z_j h_j / 2)`, `z = lambda a + i xi`.
pub fn discrete_twisted_symbol(c: &Coefs, h: [f64; 2], lambda: f64, a: [f64; 2], xi: [f64; 2]) -> C {
    let t = |j: usize| {
        let z = C::new(lambda * a[j], xi[j]);
        (z * (0.5 * h[j])).sinh() * (2.0 / h[j])
    };
    let (t1, t2) = (t(0), t(1));
    let (s1, s2) = (t1 * t1, t2 * t2);
    c.alpha * s1 * s1 + c.beta * 2.0 * s1 * s2 + c.gamma * s2 * s2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolDefect {
    pub lambda: f64,
    pub h: [f64; 2],
    /// `min_xi Re A_h(lambda a + i xi) + k lambda^4 A(a)`.
    pub min_margin: f64,
    /// `max(0, -min_margin) / (1 + lambda^3)`.
    pub tol_h: f64,
}

/// Worst case of `Re A_h + k lambda^4 A(a)` over the Brillouin zone.
pub fn symbol_defect(c: &Coefs, k: f64, h: [f64; 2], lambda: f64, a: [f64; 2]) -> Result<SymbolDefect> {
    let lim = [std::f64::consts::PI / h[0], std::f64::consts::PI / h[1]];
    let offset = k * lambda.powi(4) * c.symbol_re(a);
    let f = |xi: [f64; 2]| discrete_twisted_symbol(c, h, lambda, a, xi).re + offset;
    let n = 256;
    let mut cands: Vec<(f64, [f64; 2])> = Vec::with_capacity((n + 1) * (n + 1));
    for p in 0..=n {
        for q in 0..=n {
            let xi = [
                -lim[0] + 2.0 * lim[0] * p as f64 / n as f64,
                -lim[1] + 2.0 * lim[1] * q as f64 / n as f64,
            ];
            cands.push((f(xi), xi));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = cands[0].0;
    let step = 2.0 * lim[0].min(lim[1]) / n as f64;
    for &(_, x0) in cands.iter().take(8) {
        let g = |x: &[f64]| f([x[0], x[1]]);
        let (_, v) = nelder_mead(&g, &x0, step, 1e-15, 500)?;
        best = best.min(v);
    }
    Ok(SymbolDefect {
        lambda,
        h,
        min_margin: best,
        tol_h: (-best).max(0.0) / (1.0 + lambda.powi(3)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundaryKind, Domain2D};

    fn bump(d: Domain2D, c: [f64; 2], rho: f64, k: [f64; 2]) -> GridFunction {
        GridFunction::from_fn(d, |p| {
            let r2 = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (rho * rho);
            if r2 >= 1.0 {
                return C::new(0.0, 0.0);
            }
            C::from_polar((1.0 - r2).powi(6), k[0] * p[0] + k[1] * p[1])
        })
    }

    #[test]
    fn forms_agree_with_the_operator() {
        let d = Domain2D::square(1.0, 33, BoundaryKind::DirichletRectangle).unwrap();
        let f = CoefficientField::smooth_q_sweep(d, -0.5, 2.0, crate::field::Profile::Tanh).unwrap();
        let op = crate::operator::assemble_operator(&f, &d).unwrap();
        let u = bump(d, [0.1, -0.2], 0.7, [3.0, 1.0]);
        let q = quadratic_form(&f, &u).unwrap();
        let q2 = op.quadratic(&op.restrict(&u).unwrap());
        assert!((q - q2).norm() <= 1e-12 * q.norm(), "{q} {q2}");
        let zero = RealGrid::from_fn(d, |_| 0.0);
        let tw = twisted_form(&f, &u, &zero, 1.0).unwrap();
        assert!((tw - q).norm() <= 1e-12 * q.norm());
        let pr = principal_form(&f, &u, &RealGrid::from_fn(d, |_| 2.0), 3.0).unwrap();
        assert!((pr - q).norm() <= 1e-12 * q.norm());
    }

    #[test]
    fn support_and_scaling_errors() {
        let d = Domain2D::square(1.0, 21, BoundaryKind::DirichletRectangle).unwrap();
        let f = CoefficientField::bilaplacian(d).unwrap();
        let u = GridFunction::delta(d, 1, 5);
        assert!(matches!(quadratic_form(&f, &u), Err(Error::Support(_))));
        let u = bump(d, [0.0, 0.0], 0.5, [0.0, 0.0]);
        let phi = RealGrid::from_fn(d, |p| p[0]);
        assert!(matches!(twisted_form(&f, &u, &phi, 200.0), Err(Error::Scaling(_))));
    }

    #[test]
    fn plane_wave_symbol_matches_the_twisted_form() {
        let d = Domain2D::square(2.0, 41, BoundaryKind::DirichletRectangle).unwrap();
        let c = Coefs::real(1.0, 0.4, 2.0);
        let f = CoefficientField::constant(d, c).unwrap();
        let lambda = 1.3;
        let a = [0.6, -0.3];
        let xi = [2.0, 1.0];
        let phi = RealGrid::from_fn(d, |p| a[0] * p[0] + a[1] * p[1]);
        let h = [d.h1(), d.h2()];
        let sym = discrete_twisted_symbol(&c, h, lambda, a, xi);
        // `u = e^{i xi x}` restricted to a window: interior locations see the symbol exactly.
        let u = GridFunction::from_fn(d, |p| C::from_polar(1.0, xi[0] * p[0] + xi[1] * p[1]));
        let (plus, minus) = exponent_weights(&u, &phi, lambda).unwrap();
        let locs = difference_locations(&f, &d).unwrap();
        let mut got = C::new(0.0, 0.0);
        let (i, j) = (20, 20);
        for l in &locs {
            let touches = l.nodes[..l.len].iter().any(|&(k, _)| d.coords(k) == (i, j));
            let centred = match l.len {
                3 => l.nodes[1].0 == d.index(i, j),
                _ => l.nodes[0].0 == d.index(i, j),
            };
            if touches && centred {
                got += l.coef * l.apply(&plus.values) * l.apply(&minus.values).conj();
            }
        }
        let k = d.index(i, j);
        let scale = plus.values[k] * minus.values[k].conj();
        assert!((got / scale - sym).norm() < 1e-9 * sym.norm(), "{got} {sym}");
    }
}
