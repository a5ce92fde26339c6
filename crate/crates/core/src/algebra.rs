//! Polar symbol, the form `S`, the regime-wise quadratic form `Gamma` on C^6
//! and the vectors `p(x, xi, eta)`, with numerical checks of their identities.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Coefs, CoefficientField};
use crate::optimize::nelder_mead;
use crate::symbol::{k_of_q, q_of_coefs, Regime};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarArguments {
    pub x: [f64; 2],
    pub z: [C; 2],
    pub z_prime: [C; 2],
}

/// `alpha z1^2 z1'^2 + 2 beta z1 z2 z1' z2' + gamma z2^2 z2'^2`.
pub fn polar_symbol_coefs(c: &Coefs, z: [C; 2], zp: [C; 2]) -> C {
    c.alpha * z[0] * z[0] * zp[0] * zp[0]
        + c.beta * 2.0 * z[0] * z[1] * zp[0] * zp[1]
        + c.gamma * z[1] * z[1] * zp[1] * zp[1]
}

pub fn polar_symbol(args: &PolarArguments, field: &CoefficientField) -> Result<C> {
    Ok(polar_symbol_coefs(&field.coefs(args.x)?, args.z, args.z_prime))
}

/// Real coefficients at a point together with `Q`, `k` and the regime.
#[derive(Debug, Clone, Copy)]
pub struct NodeConstants {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub q: f64,
    pub k: f64,
    pub regime: Regime,
}

impl NodeConstants {
    pub fn from_coefs(c: &Coefs) -> Result<Self> {
        let q = q_of_coefs(c)?;
        if q <= -1.0 {
            return Err(Error::Classification(format!("Q = {q} <= -1")));
        }
        Ok(NodeConstants {
            alpha: c.alpha.re,
            beta: c.beta.re,
            gamma: c.gamma.re,
            q,
            k: k_of_q(q),
            regime: Regime::of(q),
        })
    }

    pub fn from_q(alpha: f64, q: f64, gamma: f64) -> Result<Self> {
        Self::from_coefs(&Coefs::real(alpha, q * (alpha * gamma).sqrt(), gamma))
    }

    fn coefs(&self) -> Coefs {
        Coefs::real(self.alpha, self.beta, self.gamma)
    }

    fn symbol(&self, v: [f64; 2]) -> f64 {
        self.coefs().symbol_re(v)
    }
}

/// `S = Re A(xi + i eta, xi' + i eta) + k A(eta)` with `k = k(Q)`.
pub fn s_value_at(n: &NodeConstants, xi: [f64; 2], xi_prime: [f64; 2], eta: [f64; 2]) -> f64 {
    let z = [C::new(xi[0], eta[0]), C::new(xi[1], eta[1])];
    let zp = [C::new(xi_prime[0], eta[0]), C::new(xi_prime[1], eta[1])];
    polar_symbol_coefs(&n.coefs(), z, zp).re + n.k * n.symbol(eta)
}

pub fn s_value(field: &CoefficientField, x: [f64; 2], xi: [f64; 2], xi_prime: [f64; 2], eta: [f64; 2]) -> Result<f64> {
    let n = NodeConstants::from_coefs(&field.coefs(x)?)?;
    Ok(s_value_at(&n, xi, xi_prime, eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PVector {
    pub regime: Regime,
    pub p: [f64; 6],
}

pub fn p_vector_at(n: &NodeConstants, xi: [f64; 2], eta: [f64; 2]) -> PVector {
    let sa = n.alpha.sqrt();
    let sg = n.gamma.sqrt();
    let r4 = (n.alpha * n.gamma).sqrt().sqrt();
    let q = n.q;
    let (x1, x2, e1, e2) = (xi[0], xi[1], eta[0], eta[1]);
    let p = match n.regime {
        Regime::QNegative => {
            let c = (3.0 - q) / (1.0 + q);
            [
                sa * (x1 * x1 - c * e1 * e1),
                sg * (x2 * x2 - c * e2 * e2),
                sa * x1 * x1 - sg * x2 * x2,
                sa * x1 * e1 + sg * x2 * e2,
                r4 * (x1 * e2 + x2 * e1),
                sa * e1 * e1 - sg * e2 * e2,
            ]
        }
        Regime::Convex => [
            sa * (x1 * x1 - 3.0 * e1 * e1),
            sg * (x2 * x2 - 3.0 * e2 * e2),
            r4 * (x1 * x2 - 3.0 * e1 * e2),
            0.0,
            0.0,
            0.0,
        ],
        Regime::QLarge => [
            sa * x1 * e1 - sg * x2 * e2,
            sa * (x1 * x1 - q * e1 * e1) + sg * (x2 * x2 - q * e2 * e2),
            r4 * (x1 * x2 - (q + 3.0) / (q - 1.0) * e1 * e2),
            r4 * e1 * e2,
            0.0,
            0.0,
        ],
    };
    PVector { regime: n.regime, p }
}

pub fn p_vector(field: &CoefficientField, x: [f64; 2], xi: [f64; 2], eta: [f64; 2]) -> Result<PVector> {
    let n = NodeConstants::from_coefs(&field.coefs(x)?)?;
    Ok(p_vector_at(&n, xi, eta))
}

/// One term `weight * (sum_{k in indices} p_k) * conj(sum_{k in indices} q_k)`;
/// indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaTerm {
    pub indices: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEvaluation {
    pub regime: Regime,
    pub q: f64,
    pub coefficients: Vec<GammaTerm>,
}

impl GammaEvaluation {
    pub fn is_psd(&self) -> bool {
        self.coefficients.iter().all(|t| t.weight >= 0.0)
    }
}

pub fn gamma_coefficients(q: f64) -> GammaEvaluation {
    let t = |indices: &[usize], weight: f64| GammaTerm {
        indices: indices.to_vec(),
        weight,
    };
    let regime = Regime::of(q);
    let coefficients = match regime {
        Regime::QNegative => vec![
            t(&[1], q + 1.0),
            t(&[2], q + 1.0),
            t(&[3], -q),
            t(&[4], -2.0 * q),
            t(&[5], -2.0 * q),
            t(&[6], -q * (3.0 - q).powi(2) / (1.0 + q).powi(2)),
        ],
        Regime::Convex => vec![
            t(&[1], (3.0 - q) / 3.0),
            t(&[2], (3.0 - q) / 3.0),
            t(&[1, 2], q / 3.0),
            t(&[3], 4.0 * q / 3.0),
        ],
        Regime::QLarge => vec![
            t(&[1], 2.0 * (q - 3.0)),
            t(&[2], 1.0),
            t(&[3], 2.0 * (q - 1.0)),
            t(&[4], 2.0 * (q - 3.0) * (q + 1.0) * (q * q + 3.0) / (q - 1.0)),
        ],
    };
    GammaEvaluation { regime, q, coefficients }
}

pub fn gamma_form_q(q: f64, p: &[C; 6], r: &[C; 6]) -> C {
    let g = gamma_coefficients(q);
    let mut acc = C::new(0.0, 0.0);
    for term in &g.coefficients {
        let a: C = term.indices.iter().map(|&k| p[k - 1]).sum();
        let b: C = term.indices.iter().map(|&k| r[k - 1]).sum();
        acc += term.weight * a * b.conj();
    }
    acc
}

fn gamma_real(q: f64, p: &[f64; 6], r: &[f64; 6]) -> f64 {
    let g = gamma_coefficients(q);
    g.coefficients
        .iter()
        .map(|t| {
            let a: f64 = t.indices.iter().map(|&k| p[k - 1]).sum();
            let b: f64 = t.indices.iter().map(|&k| r[k - 1]).sum();
            t.weight * a * b
        })
        .sum()
}

pub fn gamma_form(field: &CoefficientField, x: [f64; 2], p: &[C; 6], r: &[C; 6]) -> Result<C> {
    let n = NodeConstants::from_coefs(&field.coefs(x)?)?;
    Ok(gamma_form_q(n.q, p, r))
}

/// Relative residual `|S(xi, xi, eta) - Gamma(p, p)| / (1 + |S|)`.
pub fn identity_residual(n: &NodeConstants, xi: [f64; 2], eta: [f64; 2]) -> f64 {
    let s = s_value_at(n, xi, xi, eta);
    let p = p_vector_at(n, xi, eta).p;
    (s - gamma_real(n.q, &p, &p)).abs() / (1.0 + s.abs())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub max_residual: f64,
    pub samples: usize,
    /// `(regime, samples, max residual)` for each regime encountered.
    pub per_regime: Vec<(Regime, usize, f64)>,
    pub min_s: f64,
}

fn random_vec(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let scale = 10f64.powf(rng.gen_range(-1.0..0.5));
    [scale * rng.gen_range(-1.0..1.0), scale * rng.gen_range(-1.0..1.0)]
}

struct Accumulator {
    rows: Vec<(Regime, usize, f64)>,
    max: f64,
    min_s: f64,
    n: usize,
}

impl Accumulator {
    fn new() -> Self {
        Accumulator {
            rows: Vec::new(),
            max: 0.0,
            min_s: f64::INFINITY,
            n: 0,
        }
    }

    fn add(&mut self, nc: &NodeConstants, xi: [f64; 2], eta: [f64; 2]) {
        let r = identity_residual(nc, xi, eta);
        self.min_s = self.min_s.min(s_value_at(nc, xi, xi, eta));
        self.max = self.max.max(r);
        self.n += 1;
        match self.rows.iter_mut().find(|row| row.0 == nc.regime) {
            Some(row) => {
                row.1 += 1;
                row.2 = row.2.max(r);
            }
            None => self.rows.push((nc.regime, 1, r)),
        }
    }

    fn finish(mut self) -> IdentityReport {
        self.rows.sort_by_key(|r| r.0 as u8);
        IdentityReport {
            max_residual: self.max,
            samples: self.n,
            per_regime: self.rows,
            min_s: self.min_s,
        }
    }
}

/// Draws random `(x, xi, eta)` over the field and checks `S(xi, xi, eta) = Gamma(p, p)`.
pub fn verify_identity_sg(field: &CoefficientField, sample_count: usize, seed: u64) -> Result<IdentityReport> {
    let d = *field.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Accumulator::new();
    acc.add(&NodeConstants::from_coefs(&field.node_coefs(0, 0))?, [0.0; 2], [0.0; 2]);
    for _ in 0..sample_count {
        let x = [rng.gen_range(d.x1_min..=d.x1_max), rng.gen_range(d.x2_min..=d.x2_max)];
        let nc = NodeConstants::from_coefs(&field.coefs(x)?)?;
        let xi = random_vec(&mut rng);
        let eta = random_vec(&mut rng);
        acc.add(&nc, xi, eta);
    }
    Ok(acc.finish())
}

/// Same check with random coefficients drawn inside one regime.
pub fn verify_identity_regime(regime: Regime, sample_count: usize, seed: u64) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Accumulator::new();
    for _ in 0..sample_count {
        let q = match regime {
            Regime::QNegative => rng.gen_range(-0.99..0.0),
            Regime::Convex => rng.gen_range(0.0..=3.0),
            Regime::QLarge => rng.gen_range(3.0..20.0) + 1e-9,
        };
        let alpha = 10f64.powf(rng.gen_range(-1.0..1.0));
        let gamma = 10f64.powf(rng.gen_range(-1.0..1.0));
        let nc = NodeConstants::from_q(alpha, q, gamma)?;
        let xi = random_vec(&mut rng);
        let eta = random_vec(&mut rng);
        acc.add(&nc, xi, eta);
    }
    Ok(acc.finish())
}

/// Q values on `[lo, hi]` of step `step` whose printed Gamma weights are negative.
pub fn psd_violations(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as i64;
    (0..=n)
        .map(|k| ((lo / step).round() + k as f64) * step)
        .filter(|&q| q > -1.0 && !gamma_coefficients(q).is_psd())
        .collect()
}

/// `-min Re A(xi + i eta) / A(eta)` over `xi` and unit `eta`, for `alpha = gamma = 1`, `beta = q`.
pub fn optimal_k_numeric(q: f64) -> Result<f64> {
    if q <= -1.0 || !q.is_finite() {
        return Err(Error::Parameter(format!("Q must exceed -1, got {q}")));
    }
    let c = Coefs::real(1.0, q, 1.0);
    let ratio = |v: &[f64]| {
        let eta = [v[2].cos(), v[2].sin()];
        let z = [C::new(v[0], eta[0]), C::new(v[1], eta[1])];
        polar_symbol_coefs(&c, z, z).re / c.symbol_re(eta)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b5f_7175_6172_7469);
    let mut starts = vec![vec![3f64.sqrt(), 0.0, 0.0], vec![(1.5f64).sqrt(), (1.5f64).sqrt(), std::f64::consts::FRAC_PI_4]];
    for _ in 0..32 {
        starts.push(vec![
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(0.0..std::f64::consts::TAU),
        ]);
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        let (x, v) = nelder_mead(&ratio, s, 0.3, 1e-13, 4000)?;
        if v.is_finite() && best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x, v));
        }
    }
    let (mut x, mut v) = best.ok_or_else(|| Error::Numeric("no start produced a finite value".into()))?;
    for step in [1e-2, 1e-4] {
        let (x2, v2) = nelder_mead(&ratio, &x, step, 1e-15, 4000)?;
        if v2 < v {
            x = x2;
            v = v2;
        }
    }
    Ok(-v)
}

/// Coefficient of the `eta_i^2` part of `S(xi, xi', eta) - Gamma(p_xi, p_xi')`
/// at `xi_2 = xi_2' = 0`, evaluated at `eta = s e_i`.
fn group_part(n: &NodeConstants, x1: f64, x1p: f64, axis: usize, s: f64) -> f64 {
    let diff = |t: f64| {
        let mut eta = [0.0; 2];
        eta[axis] = t;
        let xi = [x1, 0.0];
        let xip = [x1p, 0.0];
        let sv = s_value_at(n, xi, xip, eta);
        let p = p_vector_at(n, xi, eta).p;
        let r = p_vector_at(n, xip, eta).p;
        sv - gamma_real(n.q, &p, &r)
    };
    let base = diff(0.0);
    let even = |t: f64| 0.5 * (diff(t) + diff(-t)) - base;
    (16.0 * even(s) - even(2.0 * s)) / 12.0
}

/// `R` and `P` of the worked monomial groups.
pub fn group_coefficients(n: &NodeConstants) -> (f64, f64) {
    let r = match n.regime {
        Regime::QNegative => 2.0 - n.q,
        Regime::Convex => 2.0,
        Regime::QLarge => n.q - 1.0,
    };
    let p = if n.beta <= 0.0 { 0.0 } else { n.beta };
    (r, p)
}

/// Absolute residual between the `xi_1^2 eta_1^2` and `xi_1^2 eta_2^2` groups of
/// `S(xi, xi', eta) - Gamma(p_xi, p_xi')` and `[alpha eta_1^2 R + eta_2^2 P](xi_1 - xi_1')^2`.
/// The groups contain no `xi_2` factors, so only the first components of `xi`, `xi'` enter.
pub fn group_term_residual_at(n: &NodeConstants, xi: [f64; 2], xi_prime: [f64; 2], eta: [f64; 2]) -> f64 {
    let g = group_part(n, xi[0], xi_prime[0], 0, eta[0]) + group_part(n, xi[0], xi_prime[0], 1, eta[1]);
    let (r, p) = group_coefficients(n);
    let closed = (n.alpha * eta[0] * eta[0] * r + eta[1] * eta[1] * p) * (xi[0] - xi_prime[0]).powi(2);
    (g - closed).abs()
}

pub fn group_term_residual(
    field: &CoefficientField,
    x: [f64; 2],
    xi: [f64; 2],
    xi_prime: [f64; 2],
    eta: [f64; 2],
) -> Result<f64> {
    let n = NodeConstants::from_coefs(&field.coefs(x)?)?;
    Ok(group_term_residual_at(&n, xi, xi_prime, eta))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KComparison {
    pub q: f64,
    pub numeric: f64,
    pub formula: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub identity_max_residual: f64,
    pub identity_per_regime: Vec<(Regime, usize, f64)>,
    pub psd_violations: usize,
    pub k_numeric_vs_formula: Vec<KComparison>,
    pub group_term_max_residual: f64,
    pub min_s_value: f64,
}

pub const K_TEST_Q: [f64; 10] = [-0.9, -0.5, -0.1, 0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0];

/// Runs the identity, positivity, optimal-k and worked-group checks.
pub fn algebra_report(samples_per_regime: usize, seed: u64) -> Result<AlgebraReport> {
    let mut max = 0.0f64;
    let mut per = Vec::new();
    let mut min_s = f64::INFINITY;
    for (k, r) in [Regime::QNegative, Regime::Convex, Regime::QLarge].into_iter().enumerate() {
        let rep = verify_identity_regime(r, samples_per_regime, seed.wrapping_add(k as u64))?;
        max = max.max(rep.max_residual);
        min_s = min_s.min(rep.min_s);
        per.extend(rep.per_regime);
    }
    let psd = psd_violations(-0.99, 20.0, 0.01).len();
    let mut table = Vec::new();
    for q in K_TEST_Q {
        let numeric = optimal_k_numeric(q)?;
        let formula = k_of_q(q);
        table.push(KComparison {
            q,
            numeric,
            formula,
            abs_diff: (numeric - formula).abs(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut group_max = 0.0f64;
    for _ in 0..2000 {
        let q = rng.gen_range(-0.95..12.0);
        let nc = NodeConstants::from_q(rng.gen_range(0.2..4.0), q, rng.gen_range(0.2..4.0))?;
        let res = group_term_residual_at(&nc, random_vec(&mut rng), random_vec(&mut rng), random_vec(&mut rng));
        group_max = group_max.max(res);
    }
    Ok(AlgebraReport {
        identity_max_residual: max,
        identity_per_regime: per,
        psd_violations: psd,
        k_numeric_vs_formula: table,
        group_term_max_residual: group_max,
        min_s_value: min_s,
    })
}
