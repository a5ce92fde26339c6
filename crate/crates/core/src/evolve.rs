//! Semigroup evolution `u(t) = exp(-t H_h) u0` and kernel slices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::{coo::CooMatrix, csc::CscMatrix, csr::CsrMatrix, factorization::CscCholesky};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::operator::DiscreteOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    FourierConstant,
    CrankNicolson,
    KrylovExponential,
}

impl KernelMethod {
    pub fn name(self) -> &'static str {
        match self {
            KernelMethod::FourierConstant => "fourier_constant",
            KernelMethod::CrankNicolson => "crank_nicolson",
            KernelMethod::KrylovExponential => "krylov_exponential",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Relative accuracy target.
    pub tol: f64,
    pub max_krylov: usize,
    pub max_cn_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_krylov: 200, max_cn_steps: 4096 }
    }
}

/// Direct solver for `(I + s H) x = b`.
struct ShiftedSolver<'a> {
    h: &'a CsrMatrix<f64>,
    shift: f64,
    chol: CscCholesky<f64>,
}

impl<'a> ShiftedSolver<'a> {
    fn new(h: &'a CsrMatrix<f64>, shift: f64) -> Result<Self> {
        let n = h.nrows();
        let mut coo = CooMatrix::new(n, n);
        for (r, c, v) in h.triplet_iter() {
            coo.push(r, c, shift * v);
        }
        for k in 0..n {
            coo.push(k, k, 1.0);
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc).map_err(|e| Error::Solver {
            detail: format!("Cholesky factorization of I + {shift:e} H failed: {e:?}"),
            residual: f64::NAN,
        })?;
        Ok(Self { h, shift, chol })
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let rhs = DMatrix::from_column_slice(b.len(), 1, b);
        let x = self.chol.solve(&rhs);
        let x: Vec<f64> = x.as_slice().to_vec();
        let hx = matvec(self.h, &x);
        let mut r2 = 0.0;
        let mut b2 = 0.0;
        for k in 0..b.len() {
            let r = x[k] + self.shift * hx[k] - b[k];
            r2 += r * r;
            b2 += b[k] * b[k];
        }
        let res = (r2 / b2.max(f64::MIN_POSITIVE)).sqrt();
        if !res.is_finite() || res > 1e-8 {
            return Err(Error::Solver { detail: "shifted solve inaccurate".into(), residual: res });
        }
        Ok(x)
    }
}

fn matvec(h: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    h.row_iter()
        .map(|row| row.col_indices().iter().zip(row.values()).map(|(&c, &v)| v * x[c]).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Shift-invert Lanczos approximation of `exp(-tH) b` with `B = (I + g H)^{-1}`.
fn krylov_real(h: &CsrMatrix<f64>, b: &[f64], t: f64, opts: &EvolveOptions) -> Result<Vec<f64>> {
    let beta0 = dot(b, b).sqrt();
    if beta0 == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let g = t / 10.0;
    let solver = ShiftedSolver::new(h, g)?;
    let f = |mu: f64| if mu <= 0.0 { 0.0 } else { (-(t / g) * (1.0 / mu - 1.0)).exp() };
    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|x| x / beta0).collect()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let coefficients = |alphas: &[f64], betas: &[f64]| -> Vec<f64> {
        let m = alphas.len();
        let mut tm = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            tm[(k, k)] = alphas[k];
            if k + 1 < m {
                tm[(k, k + 1)] = betas[k];
                tm[(k + 1, k)] = betas[k];
            }
        }
        let eig = SymmetricEigen::new(tm);
        let mut c = vec![0.0; m];
        for (q, &mu) in eig.eigenvalues.iter().enumerate() {
            let w = f(mu) * eig.eigenvectors[(0, q)];
            for k in 0..m {
                c[k] += w * eig.eigenvectors[(k, q)];
            }
        }
        c.iter().map(|x| beta0 * x).collect()
    };
    let mut last_delta = f64::INFINITY;
    loop {
        let m = alphas.len();
        let mut w = solver.solve(&basis[m])?;
        let a = dot(&w, &basis[m]);
        alphas.push(a);
        for _ in 0..2 {
            for v in &basis {
                let p = dot(&w, v);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= p * vi;
                }
            }
        }
        let bnext = dot(&w, &w).sqrt();
        let m = alphas.len();
        let breakdown = bnext <= 1e-14 * alphas.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        if m % 5 == 0 || breakdown || m >= opts.max_krylov {
            let c = coefficients(&alphas, &betas);
            let cn = norm_inf(&c);
            if let Some(p) = &prev {
                let d = c
                    .iter()
                    .enumerate()
                    .map(|(k, x)| (x - p.get(k).copied().unwrap_or(0.0)).abs())
                    .fold(0.0, f64::max);
                last_delta = d / cn.max(f64::MIN_POSITIVE);
            }
            if breakdown || last_delta < opts.tol {
                return Ok(combine(&basis, &c));
            }
            if m >= opts.max_krylov {
                return Err(Error::Convergence { iterations: m, residual: last_delta });
            }
            prev = Some(c);
        }
        betas.push(bnext);
        basis.push(w.iter().map(|x| x / bnext).collect());
    }
}

fn combine(basis: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (v, &ck) in basis.iter().zip(c) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += ck * x;
        }
    }
    out
}

/// Crank-Nicolson with `n` steps after a four-step backward Euler start.
fn cn_steps(h: &CsrMatrix<f64>, b: &[f64], t: f64, n: usize) -> Result<Vec<f64>> {
    let dt = t / n as f64;
    let be = ShiftedSolver::new(h, dt / 4.0)?;
    let mut u = b.to_vec();
    for _ in 0..4 {
        u = be.solve(&u)?;
    }
    let cn = ShiftedSolver::new(h, dt / 2.0)?;
    for _ in 1..n {
        let hu = matvec(h, &u);
        let rhs: Vec<f64> = u.iter().zip(&hu).map(|(x, y)| x - 0.5 * dt * y).collect();
        u = cn.solve(&rhs)?;
    }
    Ok(u)
}

fn cn_real(h: &CsrMatrix<f64>, b: &[f64], t: f64, opts: &EvolveOptions) -> Result<Vec<f64>> {
    if norm_inf(b) == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let mut n = 8;
    let mut coarse = cn_steps(h, b, t, n)?;
    let mut previous: Option<Vec<f64>> = None;
    loop {
        let fine = cn_steps(h, b, t, 2 * n)?;
        let extrap: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
        let scale = norm_inf(&extrap);
        let est = match &previous {
            Some(p) => extrap.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            None => f64::INFINITY,
        };
        if est <= opts.tol * scale || scale == 0.0 {
            return Ok(extrap);
        }
        n *= 2;
        if 2 * n > opts.max_cn_steps {
            return Err(Error::Convergence { iterations: 2 * n, residual: est / scale });
        }
        previous = Some(extrap);
        coarse = fine;
    }
}

/// `exp(-t H_h) u0` on the interior unknowns; boundary layers are zero.
pub fn evolve(op: &DiscreteOperator, u0: &GridFunction, t: f64, method: KernelMethod) -> Result<GridFunction> {
    evolve_with(op, u0, t, method, &EvolveOptions::default())
}

pub fn evolve_with(
    op: &DiscreteOperator,
    u0: &GridFunction,
    t: f64,
    method: KernelMethod,
    opts: &EvolveOptions,
) -> Result<GridFunction> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Parameter(format!("evolution time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    if method == KernelMethod::FourierConstant {
        return Err(Error::Parameter("Fourier quadrature is not a grid evolution method".into()));
    }
    op.real_csc()?;
    let h = op.real_csr();
    let v = op.restrict(u0)?;
    let run = |b: &[f64]| match method {
        KernelMethod::KrylovExponential => krylov_real(&h, b, t, opts),
        _ => cn_real(&h, b, t, opts),
    };
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    let ur = run(&re)?;
    let ui = if norm_inf(&im) > 0.0 { run(&im)? } else { vec![0.0; im.len()] };
    let out: Vec<Complex64> = ur.iter().zip(&ui).map(|(&a, &b)| Complex64::new(a, b)).collect();
    Ok(op.extend(&out))
}

/// Heat kernel `G(., x', t)` on a grid for a list of times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSlice {
    pub source: (usize, usize),
    pub source_point: [f64; 2],
    pub times: Vec<f64>,
    pub values: Vec<GridFunction>,
    pub method: KernelMethod,
}

impl KernelSlice {
    pub fn at(&self, time_index: usize, i: usize, j: usize) -> Complex64 {
        self.values[time_index].at(i, j)
    }

    /// `sum G * cellarea` for each time.
    pub fn masses(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|g| g.values.iter().map(|z| z.re).sum::<f64>() * g.cell_area())
            .collect()
    }
}

/// Kernel columns `exp(-t H_h) (delta_{x'} / cellarea)`.
pub fn kernel_slice(
    op: &DiscreteOperator,
    source: (usize, usize),
    times: &[f64],
    method: KernelMethod,
    opts: &EvolveOptions,
) -> Result<KernelSlice> {
    if op.unknown_index(source.0, source.1).is_none() {
        return Err(Error::Parameter(format!(
            "source node ({}, {}) lies on a clamped boundary layer",
            source.0, source.1
        )));
    }
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Parameter("kernel times must be positive".into()));
    }
    let u0 = GridFunction::delta(op.domain, source.0, source.1);
    let values = std::thread::scope(|s| {
        let handles: Vec<_> = times
            .iter()
            .map(|&t| {
                let u0 = &u0;
                s.spawn(move || evolve_with(op, u0, t, method, opts))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numeric("evolution thread panicked".into()))))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(KernelSlice {
        source,
        source_point: op.domain.node(source.0, source.1),
        times: times.to_vec(),
        values,
        method,
    })
}

/// Largest real eigenvalue estimate of a symmetric sparse matrix by power iteration.
pub fn spectral_norm_estimate(h: &CsrMatrix<f64>, iters: usize) -> f64 {
    let n = h.nrows();
    let mut v = DVector::from_fn(n, |k, _| 1.0 + ((k * 7919) % 13) as f64 / 13.0);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..iters {
        let w = DVector::from_vec(matvec(h, v.as_slice()));
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        est = nw;
        v = w / nw;
    }
    est
}

pub(crate) fn real_matvec(h: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    matvec(h, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundaryKind, Domain2D};
    use crate::field::CoefficientField;
    use crate::operator::assemble_operator;

    fn setup(n: usize, half: f64) -> DiscreteOperator {
        let d = Domain2D::square(half, n, BoundaryKind::DirichletRectangle).unwrap();
        let f = CoefficientField::bilaplacian(d).unwrap();
        assemble_operator(&f, &d).unwrap()
    }

    fn bump(op: &DiscreteOperator) -> GridFunction {
        GridFunction::from_fn(op.domain, |p| {
            let r2 = (p[0] * p[0] + p[1] * p[1]) / 0.25;
            Complex64::new(if r2 < 1.0 { (1.0 - r2).powi(6) } else { 0.0 }, 0.0)
        })
    }

    #[test]
    fn zero_time_is_identity() {
        let op = setup(17, 1.0);
        let u = bump(&op);
        let v = evolve(&op, &u, 0.0, KernelMethod::KrylovExponential).unwrap();
        assert_eq!(u.values, v.values);
    }

    #[test]
    fn krylov_matches_dense_exponential() {
        let op = setup(14, 1.0);
        let h = op.real_csr();
        let n = h.nrows();
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for (r, c, v) in h.triplet_iter() {
            dense[(r, c)] = *v;
        }
        let eig = SymmetricEigen::new(dense);
        let u = bump(&op);
        let b: Vec<f64> = op.restrict(&u).unwrap().iter().map(|z| z.re).collect();
        let t = 1e-3;
        let bv = DVector::from_vec(b.clone());
        let coeff = eig.eigenvectors.transpose() * &bv;
        let scaled = DVector::from_fn(n, |k, _| coeff[k] * (-t * eig.eigenvalues[k]).exp());
        let exact = &eig.eigenvectors * scaled;
        let got = krylov_real(&h, &b, t, &EvolveOptions::default()).unwrap();
        let err = got.iter().zip(exact.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9 * exact.amax(), "{err}");
        let cn = cn_real(&h, &b, t, &EvolveOptions { tol: 1e-7, ..Default::default() }).unwrap();
        let err = cn.iter().zip(exact.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6 * exact.amax(), "{err}");
    }

    #[test]
    fn complex_coefficients_are_rejected() {
        let d = Domain2D::square(1.0, 12, BoundaryKind::DirichletRectangle).unwrap();
        let c = crate::field::Coefs {
            alpha: Complex64::new(1.0, 0.0),
            beta: Complex64::new(1.0, 0.01),
            gamma: Complex64::new(1.0, 0.0),
            w: 1.0,
        };
        let f = CoefficientField::constant(d, c).unwrap();
        let op = assemble_operator(&f, &d).unwrap();
        let u = GridFunction::delta(d, 6, 6);
        assert!(matches!(evolve(&op, &u, 0.1, KernelMethod::KrylovExponential), Err(Error::Parameter(_))));
    }
}
