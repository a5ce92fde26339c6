//! Numerical diagnostics for the weighted Sobolev and interpolation
//! hypotheses, the interpolation consequence with `(k, l, lambda)`, and the
//! discrete Gårding inequality.

use nalgebra::{DMatrix, SymmetricEigen};
use nalgebra_sparse::{coo::CooMatrix, csc::CscMatrix, factorization::CscCholesky};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Domain2D;
use crate::error::{Error, Result};
use crate::evolve::{real_matvec, spectral_norm_estimate};
use crate::field::CoefficientField;
use crate::forms::quadratic_form;
use crate::grid::GridFunction;
use crate::operator::DiscreteOperator;

type C = Complex64;

/// `(1 - r^2/rho^2)^6 e^{i k . x}` centred at `center`.
pub fn bump(domain: Domain2D, center: [f64; 2], rho: f64, freq: [f64; 2]) -> GridFunction {
    GridFunction::from_fn(domain, |p| {
        let r2 = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (rho * rho);
        if r2 >= 1.0 {
            C::new(0.0, 0.0)
        } else {
            C::from_polar((1.0 - r2).powi(6), freq[0] * p[0] + freq[1] * p[1])
        }
    })
}

/// Largest radius keeping a bump at `center` off the two clamped layers.
pub fn max_radius(domain: &Domain2D, center: [f64; 2]) -> f64 {
    let m1 = 2.0 * domain.h1();
    let m2 = 2.0 * domain.h2();
    (center[0] - domain.x1_min - m1)
        .min(domain.x1_max - m1 - center[0])
        .min((center[1] - domain.x2_min - m2).min(domain.x2_max - m2 - center[1]))
}

/// Random bumps with radii in `[rho_min, rho_max]` and frequencies `|k| <= k_max`.
pub fn random_bumps(domain: Domain2D, count: usize, rho: (f64, f64), k_max: f64, seed: u64) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let cx = 0.5 * (domain.x1_min + domain.x1_max);
    let cy = 0.5 * (domain.x2_min + domain.x2_max);
    let w = 0.5 * (domain.x1_max - domain.x1_min);
    let hgt = 0.5 * (domain.x2_max - domain.x2_min);
    while out.len() < count {
        let c = [cx + w * rng.gen_range(-0.5..0.5), cy + hgt * rng.gen_range(-0.5..0.5)];
        let r = rng.gen_range(rho.0..=rho.1).min(max_radius(&domain, c));
        if r < 4.0 * domain.h1().max(domain.h2()) {
            continue;
        }
        let kk = rng.gen_range(0.0..=k_max);
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        out.push(bump(domain, c, r, [kk * th.cos(), kk * th.sin()]));
    }
    out
}

/// `u(x / r)` for a centred bump of radius `r * rho0`.
pub fn dilation_family(domain: Domain2D, rho0: f64, scales: &[f64]) -> Vec<GridFunction> {
    let c = [0.5 * (domain.x1_min + domain.x1_max), 0.5 * (domain.x2_min + domain.x2_max)];
    scales.iter().map(|&r| bump(domain, c, rho0 * r, [0.0, 0.0])).collect()
}

/// Centred differences at node `(i, j)`: `[grad; hess]` as `(u1, u2, u11, u12, u22)`.
fn derivatives(u: &GridFunction, i: usize, j: usize) -> [C; 5] {
    let d = &u.domain;
    let (h1, h2) = (d.h1(), d.h2());
    let v = |a: usize, b: usize| u.values[d.index(a, b)];
    let u0 = v(i, j);
    [
        (v(i + 1, j) - v(i - 1, j)) / (2.0 * h1),
        (v(i, j + 1) - v(i, j - 1)) / (2.0 * h2),
        (v(i + 1, j) - u0 * 2.0 + v(i - 1, j)) / (h1 * h1),
        (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * h1 * h2),
        (v(i, j + 1) - u0 * 2.0 + v(i, j - 1)) / (h2 * h2),
    ]
}

/// Per-sample integrals used by every diagnostic.
#[derive(Debug, Clone, Copy)]
struct SampleIntegrals {
    sup: f64,
    l2_sq: f64,
    re_q: f64,
    /// `\int w^{(k+l)/4} |D^k u| |D^l u|` for `(k, l)` in `MIXED_PAIRS`.
    mixed: [f64; 5],
    grad_w_half: f64,
    hess_w: f64,
}

/// Admissible `(k, l)` up to symmetry with `k + l < 4`.
pub const MIXED_PAIRS: [(usize, usize); 5] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)];

fn integrals(field: &CoefficientField, u: &GridFunction) -> Result<SampleIntegrals> {
    let d = u.domain;
    let area = d.cell_area();
    let re_q = quadratic_form(field, u)?.re;
    let mut mixed = [0.0; 5];
    let mut grad_w_half = 0.0;
    let mut hess_w = 0.0;
    for j in 1..d.n2 - 1 {
        for i in 1..d.n1 - 1 {
            let w = field.node_coefs(i, j).w;
            let [u1, u2, u11, u12, u22] = derivatives(u, i, j);
            let m0 = u.at(i, j).norm();
            let g2 = u1.norm_sqr() + u2.norm_sqr();
            let h2 = u11.norm_sqr() + 2.0 * u12.norm_sqr() + u22.norm_sqr();
            let mags = [m0, g2.sqrt(), h2.sqrt()];
            for (slot, &(k, l)) in MIXED_PAIRS.iter().enumerate() {
                mixed[slot] += w.powf((k + l) as f64 / 4.0) * mags[k] * mags[l] * area;
            }
            grad_w_half += w.sqrt() * g2 * area;
            hess_w += w * h2 * area;
        }
    }
    Ok(SampleIntegrals { sup: u.norm_inf(), l2_sq: u.norm_l2_sq(), re_q, mixed, grad_w_half, hess_w })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticOptions {
    pub s_grid: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self {
            s_grid: (0..=75).map(|k| 0.25 + 0.01 * k as f64).collect(),
            epsilons: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            lambdas: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationEntry {
    pub k: usize,
    pub l: usize,
    pub lambda: f64,
    pub epsilon: f64,
    /// Smallest `c` making the inequality hold on the family.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisDiagnostics {
    pub s_estimate: f64,
    pub h1_constant: f64,
    /// `max / min` of the Sobolev ratio over the family at `s_estimate`.
    pub h1_spread: f64,
    /// The same spread at `s = 1/2`.
    pub h1_spread_half: f64,
    /// `(epsilon, c(epsilon))`.
    pub h2_table: Vec<(f64, f64)>,
    pub interpolation_table: Vec<InterpolationEntry>,
    pub family_size: usize,
}

/// Measured constants of the hypotheses over a sample family.
pub fn hypothesis_diagnostics(
    field: &CoefficientField,
    family: &[GridFunction],
    opts: &DiagnosticOptions,
) -> Result<HypothesisDiagnostics> {
    if family.is_empty() {
        return Err(Error::Parameter("diagnostic sample family is empty".into()));
    }
    if opts.s_grid.is_empty() {
        return Err(Error::Parameter("empty s grid".into()));
    }
    let samples: Vec<SampleIntegrals> = family
        .iter()
        .map(|u| integrals(field, u))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|s| s.l2_sq > 0.0 && s.re_q > 0.0)
        .collect();
    if samples.is_empty() {
        return Err(Error::Parameter("no sample with positive Re Q(u)".into()));
    }
    let ratio = |s: f64, x: &SampleIntegrals| x.sup / (x.re_q.powf(0.5 * s) * x.l2_sq.sqrt().powf(1.0 - s));
    let mut best = (opts.s_grid[0], f64::INFINITY, 0.0);
    for &s in &opts.s_grid {
        let (lo, hi) = samples
            .iter()
            .map(|x| ratio(s, x))
            .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r), b.max(r)));
        let spread = hi / lo;
        if spread < best.1 {
            best = (s, spread, hi);
        }
    }
    let (lo, hi) = samples
        .iter()
        .map(|x| ratio(0.5, x))
        .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r), b.max(r)));
    let h1_spread_half = hi / lo;
    let h2_table = opts
        .epsilons
        .iter()
        .map(|&e| {
            let c = samples
                .iter()
                .map(|x| e * (x.grad_w_half - e * x.hess_w) / x.l2_sq)
                .fold(f64::NEG_INFINITY, f64::max);
            (e, c)
        })
        .collect();
    let mut interpolation_table = Vec::new();
    for (slot, &(k, l)) in MIXED_PAIRS.iter().enumerate() {
        let kl = (k + l) as f64;
        for &lambda in &opts.lambdas {
            for &e in &opts.epsilons {
                let c = samples
                    .iter()
                    .map(|x| {
                        let lhs = (1.0 + lambda.powf(4.0 - kl)) * x.mixed[slot];
                        (lhs - e * x.re_q) / (e.powf(-kl / (4.0 - kl)) * (1.0 + lambda.powi(4)) * x.l2_sq)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                interpolation_table.push(InterpolationEntry { k, l, lambda, epsilon: e, c });
            }
        }
    }
    Ok(HypothesisDiagnostics {
        s_estimate: best.0,
        h1_constant: best.2,
        h1_spread: best.1,
        h1_spread_half,
        h2_table,
        interpolation_table,
        family_size: samples.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GardingReport {
    pub min_eigenvalue: f64,
    pub norm: f64,
    /// `min_eigenvalue / norm`.
    pub relative: f64,
    pub threshold: f64,
    pub passes: bool,
    pub dense: bool,
}

/// Relative floor for the smallest eigenvalue of `H_h`.
pub const GARDING_THRESHOLD: f64 = 1e-8;
const DENSE_LIMIT: usize = 1024;

fn shifted_cholesky(op: &DiscreteOperator, tau: f64) -> Option<CscCholesky<f64>> {
    let h = op.real_csr();
    let n = h.nrows();
    let mut coo = CooMatrix::new(n, n);
    for (r, c, v) in h.triplet_iter() {
        coo.push(r, c, *v);
    }
    for k in 0..n {
        coo.push(k, k, tau);
    }
    CscCholesky::factor(&CscMatrix::from(&coo)).ok()
}

/// Smallest eigenvalue of the Hermitian part of `H_h` against `||H_h||`.
pub fn garding_check(op: &DiscreteOperator) -> Result<GardingReport> {
    let h = op.real_csr();
    let n = h.nrows();
    if n <= DENSE_LIMIT {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (r, c, v) in h.triplet_iter() {
            m[(r, c)] += 0.5 * v;
            m[(c, r)] += 0.5 * v;
        }
        let eig = SymmetricEigen::new(m).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        return Ok(report(lo, hi, true));
    }
    let norm = spectral_norm_estimate(&h, 200);
    let tau = GARDING_THRESHOLD * norm;
    match shifted_cholesky(op, tau) {
        Some(chol) => {
            let mut x: Vec<f64> = (0..n).map(|k| 1.0 + ((k * 31) % 17) as f64 / 17.0).collect();
            let mut rq = f64::INFINITY;
            for _ in 0..60 {
                let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= nx);
                let hx = real_matvec(&h, &x);
                rq = x.iter().zip(&hx).map(|(a, b)| a * b).sum();
                let y = chol.solve(&DMatrix::from_column_slice(n, 1, &x));
                x = y.as_slice().to_vec();
            }
            Ok(report(rq.max(-tau), norm, false))
        }
        None => {
            let mut s = 2.0 * tau;
            while shifted_cholesky(op, s).is_none() {
                s *= 2.0;
                if s > 10.0 * norm {
                    break;
                }
            }
            Ok(report(-0.5 * s, norm, false))
        }
    }
}

fn report(lo: f64, norm: f64, dense: bool) -> GardingReport {
    let relative = lo / norm.max(f64::MIN_POSITIVE);
    GardingReport {
        min_eigenvalue: lo,
        norm,
        relative,
        threshold: GARDING_THRESHOLD,
        passes: relative >= -GARDING_THRESHOLD,
        dense,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoundaryKind;
    use crate::field::{Coefs, Profile};
    use crate::operator::assemble_operator;

    #[test]
    fn empty_family_is_rejected() {
        let d = Domain2D::square(1.0, 17, BoundaryKind::DirichletRectangle).unwrap();
        let f = CoefficientField::bilaplacian(d).unwrap();
        let r = hypothesis_diagnostics(&f, &[], &DiagnosticOptions::default());
        assert!(matches!(r, Err(Error::Parameter(_))));
    }

    #[test]
    fn dilations_select_one_half() {
        let d = Domain2D::square(1.0, 193, BoundaryKind::DirichletRectangle).unwrap();
        let f = CoefficientField::bilaplacian(d).unwrap();
        let fam = dilation_family(d, 0.9, &[0.125, 0.25, 0.5, 1.0]);
        let diag = hypothesis_diagnostics(&f, &fam, &DiagnosticOptions::default()).unwrap();
        assert!((diag.s_estimate - 0.5).abs() <= 0.011, "{}", diag.s_estimate);
        assert!(diag.h1_spread_half < 1.02, "{}", diag.h1_spread_half);
    }

    #[test]
    fn garding_dense_and_sparse_agree() {
        let d = Domain2D::square(1.0, 36, BoundaryKind::DirichletRectangle).unwrap();
        let f = CoefficientField::smooth_q_sweep(d, -0.5, 5.0, Profile::Tanh).unwrap();
        let op = assemble_operator(&f, &d).unwrap();
        let dense = garding_check(&op).unwrap();
        assert!(dense.dense && dense.passes);
        let d = Domain2D::square(1.0, 40, BoundaryKind::DirichletRectangle).unwrap();
        let f = CoefficientField::constant(d, Coefs::real(1.0, -0.5, 1.0)).unwrap();
        let op = assemble_operator(&f, &d).unwrap();
        let sparse = garding_check(&op).unwrap();
        assert!(!sparse.dense && sparse.passes, "{sparse:?}");
    }
}
