//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::time::{Duration, Instant};

use quartic_heat::algebra::{optimal_k_numeric, psd_violations, verify_identity_regime, K_TEST_Q};
use quartic_heat::bound::{
    empirical_sigma, twisted_margin_report, sharpness_probe, theta_path, verify_bound, BoundOptions, PerturbedCase, SigmaOptions,
};
use quartic_heat::diagnostics::{dilation_family, garding_check, hypothesis_diagnostics, random_bumps, DiagnosticOptions};
use quartic_heat::evolve::{evolve, kernel_slice, EvolveOptions, KernelMethod};
use quartic_heat::finsler::{certify_admissible, distance_field, dual_norm_coefs, DistanceMethod, FinslerMetric};
use quartic_heat::forms::symbol_defect;
use quartic_heat::fourier::{fourier_slice, ConstantKernel};
use quartic_heat::operator::assemble_operator;
use quartic_heat::presets::{shipped, Preset};
use quartic_heat::symbol::{classify_regime, estimate_theta, k_of_q, sigma_convex, sigma_of_q, Regime};
use quartic_heat::{BoundaryKind, Coefs, CoefficientField, Domain2D, GridFunction, Profile, RealGrid};

fn verdict(id: usize, pass: bool, elapsed: Duration, detail: String) {
    println!("criterion {id}: {} ({:.1}s) {detail}", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    assert!(pass, "criterion {id} failed: {detail}");
}

fn square(half: f64, n: usize) -> Domain2D {
    Domain2D::square(half, n, BoundaryKind::DirichletRectangle).unwrap()
}

fn log_times(lo_exp: f64, hi_exp: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / (count - 1) as f64))
        .collect()
}

#[test]
fn criterion_01_identity_suite() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut min_s = f64::INFINITY;
    for (k, r) in [Regime::QNegative, Regime::Convex, Regime::QLarge].into_iter().enumerate() {
        let rep = verify_identity_regime(r, 100_000, 11 + k as u64).unwrap();
        assert_eq!(rep.samples, 100_000);
        worst = worst.max(rep.max_residual);
        min_s = min_s.min(rep.min_s);
    }
    let psd = psd_violations(-0.99, 20.0, 0.01);
    let el = t0.elapsed();
    let pass = worst <= 1e-10 && psd.is_empty() && min_s >= -1e-10 && el < Duration::from_secs(10);
    verdict(1, pass, el, format!("max residual {worst:.2e}, psd violations {}, min S {min_s:.2e}", psd.len()));
}

#[test]
fn criterion_02_optimal_k() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for q in K_TEST_Q {
        worst = worst.max((optimal_k_numeric(q).unwrap() - k_of_q(q)).abs());
    }
    let k1 = optimal_k_numeric(1.0).unwrap();
    let k5 = optimal_k_numeric(5.0).unwrap();
    let el = t0.elapsed();
    let pass = worst <= 1e-6 && (k1 - 8.0).abs() <= 1e-6 && (k5 - 24.0).abs() <= 1e-6 && el < Duration::from_secs(30);
    verdict(2, pass, el, format!("max |k_num - k(Q)| {worst:.2e}, k(1) {k1:.9}, k(5) {k5:.9}"));
}

#[test]
fn criterion_03_constants() {
    let t0 = Instant::now();
    let exact = 3.0 * 2f64.cbrt() / 16.0;
    let d0 = (sigma_convex() - exact).abs();
    let d = square(2.0, 41);
    let f = CoefficientField::smooth_q_sweep(d, -0.9, 12.0, Profile::Linear).unwrap();
    let cl = classify_regime(&f).unwrap();
    let nodewise = cl
        .k
        .iter()
        .zip(&cl.sigma)
        .map(|(k, s)| (s - 0.75 * (4.0 * k).powf(-1.0 / 3.0)).abs())
        .fold(0.0f64, f64::max);
    let k_nodes = cl.q.iter().zip(&cl.k).map(|(q, k)| (k - k_of_q(*q)).abs()).fold(0.0f64, f64::max);
    let pass = d0 <= 1e-12 && nodewise <= 1e-12 && k_nodes <= 1e-12;
    verdict(
        3,
        pass,
        t0.elapsed(),
        format!("sigma_convex {:.10} (|diff| {d0:.1e}), nodewise sigma residual {nodewise:.1e}", sigma_convex()),
    );
}

#[test]
fn criterion_04_kernel_oracle() {
    let t0 = Instant::now();
    let kernel = ConstantKernel::new(&Coefs::real(1.0, 1.0, 1.0)).unwrap();
    let g0 = kernel.eval([0.0, 0.0], 1.0).unwrap();
    let oracle = 1.0 / (8.0 * std::f64::consts::PI.sqrt());
    let e0 = (g0 - oracle).abs();
    // Trapezoid rule on a lattice: aliasing is `exp(-(2 pi / step)^4)`, so the sum is exact up to the tail.
    let lattice = Domain2D::square(20.0, 81, BoundaryKind::FullPlane).unwrap();
    let mass = fourier_slice(&kernel, &lattice, (40, 40), &[1.0]).unwrap().masses()[0];
    let mut ss = 0.0f64;
    for &(z, t) in &[([0.3, -0.2], 0.01), ([1.0, 0.5], 0.3), ([-0.4, 1.7], 2.0), ([2.0, 0.0], 5.0)] {
        let a = kernel.eval(z, t).unwrap();
        let y = [z[0] * t.powf(-0.25), z[1] * t.powf(-0.25)];
        let b = t.powf(-0.5) * kernel.eval(y, 1.0).unwrap();
        ss = ss.max((a - b).abs() / a.abs().max(1e-300));
    }
    let el = t0.elapsed();
    let pass = e0 <= 1e-8 && (mass - 1.0).abs() <= 1e-6 && ss <= 1e-10 && el < Duration::from_secs(10);
    verdict(4, pass, el, format!("G(0,1) {g0:.10} (|diff| {e0:.1e}), mass {mass:.10}, self-similarity {ss:.1e}"));
}

#[test]
fn criterion_05_distance_engine() {
    let t0 = Instant::now();
    let d = square(1.0, 129);
    let mut worst = 0.0f64;
    let mut axis = 0.0;
    for c in [Coefs::real(1.0, 1.0, 1.0), Coefs::real(1.0, -0.5, 1.0), Coefs::real(1.0, 5.0, 1.0)] {
        let f = CoefficientField::constant(d, c).unwrap();
        let m = FinslerMetric::new(&f);
        let dist = distance_field(&m, [0.0, 0.0], DistanceMethod::DijkstraStencil, 3).unwrap();
        let (si, sj) = dist.source_node;
        for (i, j) in d.nodes() {
            if (i, j) == (si, sj) {
                continue;
            }
            let p = d.node(i, j);
            let exact = dual_norm_coefs(&c, p, 2880).unwrap();
            worst = worst.max((dist.at(i, j) - exact).abs() / exact);
        }
        if c.beta.re == -0.5 {
            axis = dist.at(d.n1 - 1, sj) / d.node(d.n1 - 1, sj)[0];
        }
    }
    let closed = (1.0f64 - 0.25).powf(-0.25);
    let fe1 = dual_norm_coefs(&Coefs::real(1.0, -0.5, 1.0), [1.0, 0.0], 2880).unwrap();
    let el = t0.elapsed();
    let pass = worst <= 0.02
        && (fe1 - closed).abs() <= 1e-6
        && (closed - 1.07457).abs() < 5e-6
        && (axis - closed).abs() / closed <= 0.02
        && el < Duration::from_secs(60);
    verdict(
        5,
        pass,
        el,
        format!("max relative error {worst:.4}, F*(e1) {fe1:.6} vs {closed:.6}, grid along e1 {axis:.6}"),
    );
}

#[test]
fn criterion_06_sharp_constant() {
    let t0 = Instant::now();
    let opts = SigmaOptions::default();
    let convex = empirical_sigma(&ConstantKernel::new(&Coefs::real(1.0, 1.0, 1.0)).unwrap(), &opts).unwrap();
    let large = empirical_sigma(&ConstantKernel::new(&Coefs::real(1.0, 5.0, 1.0)).unwrap(), &opts).unwrap();
    let r1 = (convex.sigma - 0.23623).abs() / 0.23623;
    let r5 = (large.sigma - sigma_of_q(5.0)).abs() / sigma_of_q(5.0);
    let el = t0.elapsed();
    let pass = r1 <= 0.05 && r5 <= 0.10 && el < Duration::from_secs(300);
    verdict(
        6,
        pass,
        el,
        format!(
            "Q=1 sigma_emp {:.5} ({:.1}%), Q=5 sigma_emp {:.5} vs {:.5} ({:.1}%)",
            convex.sigma,
            100.0 * r1,
            large.sigma,
            sigma_of_q(5.0),
            100.0 * r5
        ),
    );
}

fn bound_times() -> Vec<f64> {
    log_times(-3.0, 0.0, 13)
}

#[test]
fn criterion_07_gaussian_bound() {
    let t0 = Instant::now();
    let d = square(3.0, 97);
    let source = (48, 48);
    let opts = EvolveOptions::default();

    let bil = CoefficientField::bilaplacian(d).unwrap();
    let m = FinslerMetric::new(&bil);
    let dist_b = distance_field(&m, [0.0, 0.0], DistanceMethod::DijkstraStencil, 3).unwrap();
    let op_b = assemble_operator(&bil, &d).unwrap();
    let k_grid = kernel_slice(&op_b, source, &bound_times(), KernelMethod::KrylovExponential, &opts).unwrap();
    let r_grid = verify_bound(&k_grid, &dist_b, sigma_convex(), &BoundOptions::default()).unwrap();
    let fk = ConstantKernel::from_field(&bil).unwrap();
    let k_exact = fourier_slice(&fk, &d, source, &bound_times()).unwrap();
    let r_exact = verify_bound(&k_exact, &dist_b, sigma_convex(), &BoundOptions::default()).unwrap();

    let var = CoefficientField::smooth_q_sweep(d, -0.5, 5.0, Profile::Tanh).unwrap();
    let cl = classify_regime(&var).unwrap();
    let (qlo, qhi) = cl.q_range();
    let mv = FinslerMetric::new(&var);
    let dist_v = distance_field(&mv, [0.0, 0.0], DistanceMethod::DijkstraStencil, 3).unwrap();
    let op_v = assemble_operator(&var, &d).unwrap();
    let k_var = kernel_slice(&op_v, source, &bound_times(), KernelMethod::KrylovExponential, &opts).unwrap();
    let r_var = verify_bound(&k_var, &dist_v, cl.sigma_star, &BoundOptions::default()).unwrap();

    let el = t0.elapsed();
    let on_diag = r_exact.fitted_c_eps >= 1.0 / (8.0 * std::f64::consts::PI.sqrt());
    let pass = r_grid.holds()
        && r_exact.holds()
        && r_var.holds()
        && on_diag
        && (qlo + 0.5).abs() < 1e-9
        && (qhi - 5.0).abs() < 1e-9
        && el < Duration::from_secs(600);
    verdict(
        7,
        pass,
        el,
        format!(
            "violations: bilaplacian grid {} (c_eps {:.4}), bilaplacian exact {} (c_eps {:.4}), Q-sweep {} (c_eps {:.4}, sigma* {:.5}); tested {} each",
            r_grid.violations.len(),
            r_grid.fitted_c_eps,
            r_exact.violations.len(),
            r_exact.fitted_c_eps,
            r_var.violations.len(),
            r_var.fitted_c_eps,
            cl.sigma_star,
            r_var.tested_samples
        ),
    );
}

#[test]
fn criterion_08_sharpness() {
    let t0 = Instant::now();
    let d = square(3.0, 97);
    let bil = CoefficientField::bilaplacian(d).unwrap();
    let m = FinslerMetric::new(&bil);
    let dist = distance_field(&m, [0.0, 0.0], DistanceMethod::DijkstraStencil, 3).unwrap();
    let fk = ConstantKernel::from_field(&bil).unwrap();
    let slice = fourier_slice(&fk, &d, (48, 48), &bound_times()).unwrap();
    let strong = BoundOptions { sigma_override: Some(1.25 * sigma_convex()), ..Default::default() };
    let r = verify_bound(&slice, &dist, sigma_convex(), &strong).unwrap();
    let t_small = r.violations.iter().map(|v| v.t).fold(f64::INFINITY, f64::min);
    let probe = sharpness_probe(&fk, sigma_convex(), 0.05, &SigmaOptions::default()).unwrap();
    let el = t0.elapsed();
    let pass = !r.violations.is_empty() && probe.sigma_plus_delta_fails;
    verdict(
        8,
        pass,
        el,
        format!(
            "1.25 sigma*: {} violations (smallest t {t_small:.2e}, min margin {:.3}); probe at delta 0.05 fails: {}",
            r.violations.len(),
            r.min_margin,
            probe.sigma_plus_delta_fails
        ),
    );
}

/// Largest discrete symbol defect over `lambdas` and the linear directions.
fn twisted_tol(c: &Coefs, k: f64, h: f64, lambdas: &[f64], dirs: &[[f64; 2]]) -> f64 {
    let mut tol = 0.0f64;
    for &a in dirs {
        for &l in lambdas {
            tol = tol.max(symbol_defect(c, k, [h, h], l, a).unwrap().tol_h);
        }
    }
    tol
}

#[test]
fn criterion_09_twisted_margin() {
    let t0 = Instant::now();
    let lambdas = [0.5, 1.0, 2.0, 4.0];
    let mut lines = Vec::new();
    let mut pass = true;
    for q in [1.0, -0.5, 5.0] {
        let c = Coefs::real(1.0, q, 1.0);
        let k = k_of_q(q);
        let unit = |v: [f64; 2]| {
            let s = c.symbol_re(v).powf(-0.25);
            [v[0] * s, v[1] * s]
        };
        let dirs = [unit([1.0, 0.0]), unit([1.0, 1.0]), unit([2.0, -1.0])];
        let mut tols = Vec::new();
        for n in [65, 129] {
            let d = square(1.0, n);
            let f = CoefficientField::constant(d, c).unwrap();
            let m = FinslerMetric::new(&f);
            let certs: Vec<_> = dirs
                .iter()
                .map(|a| certify_admissible(&m, &RealGrid::from_fn(d, |p| a[0] * p[0] + a[1] * p[1]), 1.0).unwrap())
                .collect();
            let bumps = random_bumps(d, 50, (0.2, 0.8), 12.0, 7 + n as u64);
            let tol = twisted_tol(&c, k, d.h1(), &lambdas, &dirs);
            let rep = twisted_margin_report(&f, &certs, &lambdas, &bumps, k, tol).unwrap();
            pass &= rep.passes && certs.iter().all(|c| (c.sup_a_grad - 1.0).abs() < 1e-9);
            lines.push(format!("Q={q} n={n}: worst {:.3e}, tol_h {tol:.3e}", rep.worst_margin));
            tols.push(tol);
        }
        pass &= tols[1] <= 0.5 * tols[0];
    }
    verdict(9, pass, t0.elapsed(), lines.join("; "));
}

#[test]
fn criterion_10_theta_path() {
    let t0 = Instant::now();
    let d = square(3.0, 97);
    let source = (48, 48);
    let times = bound_times();
    let mut cases = Vec::new();
    let mut lines = Vec::new();
    for a in [0.01, 0.02, 0.05] {
        let f = CoefficientField::square_wave_alpha(d, a, 1.0).unwrap();
        let th = estimate_theta(&f, &[0.0, 0.05, 0.1, 0.2, 0.4]).unwrap();
        let cl = classify_regime(&th.surrogate).unwrap();
        let m = FinslerMetric::new(&th.surrogate);
        let dist = distance_field(&m, [0.0, 0.0], DistanceMethod::DijkstraStencil, 3).unwrap();
        let op = assemble_operator(&f, &d).unwrap();
        let kernel = kernel_slice(&op, source, &times, KernelMethod::KrylovExponential, &EvolveOptions::default()).unwrap();
        lines.push(format!("a={a}: theta {:.4}", th.theta));
        cases.push(PerturbedCase { amplitude: a, theta: th.theta, sigma_star: cl.sigma_star, kernel, dist });
    }
    let rep = theta_path(&cases, &BoundOptions::default()).unwrap();
    let largest = cases.iter().map(|c| c.theta).fold(0.0f64, f64::max);
    let pass = rep.holds() && (largest - 0.05).abs() <= 0.01 && cases.iter().all(|c| c.theta > 0.0);
    for o in &rep.outcomes {
        lines.push(format!("a={}: sigma used {:.5}, violations {}", o.amplitude, o.sigma_used, o.violations));
    }
    verdict(10, pass, t0.elapsed(), format!("c {:.4}, {}", rep.c, lines.join("; ")));
}

#[test]
fn criterion_11_structural() {
    let t0 = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;

    let small = square(1.0, 33);
    for (name, p) in shipped() {
        let f = p.build(small).unwrap();
        let g = garding_check(&assemble_operator(&f, &small).unwrap()).unwrap();
        pass &= g.passes;
        if !g.passes {
            lines.push(format!("Garding fails on {name}: {:.2e}", g.relative));
        }
    }
    let big = square(2.0, 97);
    for name in ["bilaplacian", "q-sweep"] {
        let f = Preset::named(name).unwrap().build(big).unwrap();
        let g = garding_check(&assemble_operator(&f, &big).unwrap()).unwrap();
        pass &= g.passes;
        lines.push(format!("Garding {name} 97^2 relative {:.2e}", g.relative));
    }

    let d = square(2.0, 65);
    let f = Preset::named("q-sweep").unwrap().build(d).unwrap();
    let op = assemble_operator(&f, &d).unwrap();
    let opts = EvolveOptions::default();
    let (a, b) = ((24, 30), (40, 33));
    let times = [0.003, 0.03];
    let ka = kernel_slice(&op, a, &times, KernelMethod::KrylovExponential, &opts).unwrap();
    let kb = kernel_slice(&op, b, &times, KernelMethod::KrylovExponential, &opts).unwrap();
    let mut sym = 0.0f64;
    for ti in 0..times.len() {
        let scale = ka.values[ti].norm_inf();
        sym = sym.max((ka.at(ti, b.0, b.1) - kb.at(ti, a.0, a.1)).norm() / scale);
    }
    pass &= sym <= 1e-8;
    lines.push(format!("symmetry {sym:.1e}"));

    let u0 = quartic_heat::diagnostics::bump(d, [0.2, -0.1], 0.8, [0.0, 0.0]);
    let m = KernelMethod::KrylovExponential;
    let two = evolve(&op, &evolve(&op, &u0, 0.004, m).unwrap(), 0.006, m).unwrap();
    let one = evolve(&op, &u0, 0.01, m).unwrap();
    let diff = GridFunction::new(d, two.values.iter().zip(&one.values).map(|(x, y)| x - y).collect()).unwrap();
    let semi = diff.norm_l2() / one.norm_l2();
    pass &= semi <= 1e-6;
    lines.push(format!("semigroup {semi:.1e}"));

    let dd = square(1.0, 193);
    let scales: Vec<f64> = (0..8).map(|k| 0.125 * 2f64.powf(3.0 * k as f64 / 7.0)).collect();
    let mut family = dilation_family(dd, 0.9, &scales);
    family.extend(random_bumps(dd, 10, (0.3, 0.9), 0.0, 3));
    for name in ["bilaplacian", "q-sweep", "anisotropic"] {
        let f = Preset::named(name).unwrap().build(dd).unwrap();
        let h = hypothesis_diagnostics(&f, &family, &DiagnosticOptions::default()).unwrap();
        pass &= (h.s_estimate - 0.5).abs() <= 0.05;
        lines.push(format!("s({name}) {:.2}", h.s_estimate));
    }
    verdict(11, pass, t0.elapsed(), lines.join("; "));
}
