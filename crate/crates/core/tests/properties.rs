use num_complex::Complex64;
use proptest::prelude::*;

use quartic_heat::algebra::{gamma_coefficients, gamma_form_q, p_vector_at, s_value_at, NodeConstants};
use quartic_heat::bound::{evaluate_bound, BoundSample, FittedConstants};
use quartic_heat::evolve::{evolve, KernelMethod};
use quartic_heat::finsler::dual_norm_coefs;
use quartic_heat::forms::quadratic_form;
use quartic_heat::operator::assemble_operator;
use quartic_heat::symbol::{estimate_theta, k_of_q, sigma_of_k, sigma_of_q};
use quartic_heat::{BoundaryKind, Coefs, CoefficientField, Domain2D, GridFunction};

fn vec2() -> impl Strategy<Value = [f64; 2]> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| [a, b])
}

fn node() -> impl Strategy<Value = NodeConstants> {
    (0.2..4.0f64, -0.98..15.0f64, 0.2..4.0f64).prop_map(|(a, q, g)| NodeConstants::from_q(a, q, g).unwrap())
}

fn small_domain() -> Domain2D {
    Domain2D::square(1.0, 13, BoundaryKind::DirichletRectangle).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn symbol_is_quartic_homogeneous(a in 0.1..5.0f64, b in -2.0..5.0f64, g in 0.1..5.0f64, xi in vec2(), s in -4.0..4.0f64) {
        let c = Coefs::real(a, b, g);
        let lhs = c.symbol([s * xi[0], s * xi[1]]).re;
        let rhs = s.powi(4) * c.symbol(xi).re;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn s_form_is_nonnegative(n in node(), xi in vec2(), eta in vec2()) {
        let s = s_value_at(&n, xi, xi, eta);
        let scale = n.alpha.max(n.gamma) * (xi[0].hypot(xi[1]) + eta[0].hypot(eta[1])).powi(4) * (1.0 + n.q.abs());
        prop_assert!(s >= -1e-11 * scale, "S = {s}");
    }

    #[test]
    fn s_form_is_jointly_homogeneous(n in node(), xi in vec2(), xp in vec2(), eta in vec2(), t in 0.1..3.0f64) {
        let sc = |v: [f64; 2]| [t * v[0], t * v[1]];
        let a = s_value_at(&n, sc(xi), sc(xp), sc(eta));
        let b = t.powi(4) * s_value_at(&n, xi, xp, eta);
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs() + t.powi(4) * 100.0));
    }

    #[test]
    fn gamma_is_positive_on_p_vectors(n in node(), xi in vec2(), eta in vec2()) {
        let p = p_vector_at(&n, xi, eta).p.map(|v| Complex64::new(v, 0.0));
        let g = gamma_form_q(n.q, &p, &p);
        prop_assert!(g.re >= -1e-11 * (1.0 + p.iter().map(|v| v.norm_sqr()).sum::<f64>()));
        prop_assert!(gamma_coefficients(n.q).is_psd());
    }

    #[test]
    fn dual_norm_is_a_norm(a in 0.3..3.0f64, q in -0.9..8.0f64, g in 0.3..3.0f64, v in vec2(), w in vec2(), s in -3.0..3.0f64) {
        let c = Coefs::real(a, q * (a * g).sqrt(), g);
        let f = |x: [f64; 2]| dual_norm_coefs(&c, x, 720).unwrap();
        let sum = [v[0] + w[0], v[1] + w[1]];
        prop_assert!(f(sum) <= f(v) + f(w) + 1e-9);
        prop_assert!((f([s * v[0], s * v[1]]) - s.abs() * f(v)).abs() <= 1e-9 * (1.0 + f(v)));
    }

    #[test]
    fn sigma_decreases_with_k(q1 in -0.95..20.0f64, q2 in -0.95..20.0f64) {
        let (k1, k2) = (k_of_q(q1), k_of_q(q2));
        prop_assert!(k1 >= 8.0 - 1e-12);
        if k1 < k2 {
            prop_assert!(sigma_of_k(k1) >= sigma_of_k(k2));
        }
        prop_assert!((sigma_of_q(q1) - sigma_of_k(k1)).abs() <= 1e-15);
    }

    #[test]
    fn widening_epsilon_never_adds_violations(
        raw in prop::collection::vec((0.0..3.0f64, -7.0..0.0f64, 1e-3..1.0f64), 1..60),
        log_c in -4.0..1.0f64,
        sigma in 0.05..0.3f64,
        widen in 0.0..0.1f64,
    ) {
        let samples: Vec<BoundSample> = raw
            .iter()
            .enumerate()
            .map(|(k, &(d, lg, t))| BoundSample { node: (k, 0), point: [d, 0.0], t, d, lhs: lg.exp() / t.sqrt(), calibration: true })
            .collect();
        let c = FittedConstants { log_c_eps: log_c, c_eps: log_c.exp(), c_eps_m: 0.0 };
        let (tight, _, m1) = evaluate_bound(&samples, &c, sigma, 0.5, [0.0, 0.0]);
        let (loose, _, m2) = evaluate_bound(&samples, &c, sigma - widen, 0.5, [0.0, 0.0]);
        prop_assert!(loose.len() <= tight.len());
        prop_assert!(m2 >= m1 - 1e-12);
        for v in &loose {
            prop_assert!(tight.iter().any(|w| w.x == v.x && w.t == v.t));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadratic_form_is_nonnegative_for_elliptic_coefficients(
        a in 0.3..3.0f64, q in -0.9..6.0f64, g in 0.3..3.0f64,
        vals in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 81),
    ) {
        let d = small_domain();
        let f = CoefficientField::constant_real(d, a, q * (a * g).sqrt(), g).unwrap();
        let mut u = GridFunction::zeros(d);
        for (k, &(re, im)) in vals.iter().enumerate() {
            let (i, j) = (2 + k % 9, 2 + k / 9);
            u.values[d.index(i, j)] = Complex64::new(re, im);
        }
        let qf = quadratic_form(&f, &u).unwrap();
        prop_assert!(qf.re >= -1e-12 * u.norm_l2_sq());
    }

    #[test]
    fn semigroup_and_symmetry_hold(q in -0.5..4.0f64, t1 in 1e-4..5e-3f64, t2 in 1e-4..5e-3f64, src in 2usize..11, dst in 2usize..11) {
        let d = small_domain();
        let f = CoefficientField::smooth_q_sweep(d, -0.5, q.max(-0.4), quartic_heat::Profile::Linear).unwrap();
        let op = assemble_operator(&f, &d).unwrap();
        let m = KernelMethod::KrylovExponential;
        let a = GridFunction::delta(d, src, 6);
        let b = GridFunction::delta(d, 6, dst);
        let ga = evolve(&op, &a, t1 + t2, m).unwrap();
        let gb = evolve(&op, &b, t1 + t2, m).unwrap();
        let scale = ga.norm_inf().max(gb.norm_inf());
        prop_assert!((ga.at(6, dst) - gb.at(src, 6)).norm() <= 1e-9 * scale);
        let two = evolve(&op, &evolve(&op, &a, t1, m).unwrap(), t2, m).unwrap();
        let err = two.values.iter().zip(&ga.values).map(|(x, y)| (x - y).norm()).fold(0.0f64, f64::max);
        prop_assert!(err <= 1e-6 * scale);
    }

    #[test]
    fn theta_grows_with_the_jump(a1 in 0.005..0.1f64, a2 in 0.005..0.1f64) {
        let d = Domain2D::square(1.0, 33, BoundaryKind::DirichletRectangle).unwrap();
        let scales = [0.1, 0.2];
        let t = |a: f64| estimate_theta(&CoefficientField::square_wave_alpha(d, a, 1.0).unwrap(), &scales).unwrap().theta;
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(t(lo) <= t(hi) + 1e-12);
    }
}
