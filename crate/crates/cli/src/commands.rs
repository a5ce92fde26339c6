//! The five subcommands. Each writes its artifacts and returns the main JSON
//! document together with the names of failed invariants.

use std::path::Path;

use serde::Serialize;

use quartic_heat::algebra::{algebra_report, AlgebraReport};
use quartic_heat::bound::{sharpness_probe, verify_bound, BoundOptions, BoundReport, SigmaOptions};
use quartic_heat::evolve::{kernel_slice, EvolveOptions, KernelMethod, KernelSlice};
use quartic_heat::finsler::{distance_field, DistanceMethod, FinslerMetric};
use quartic_heat::fourier::{fourier_slice, ConstantKernel};
use quartic_heat::operator::assemble_operator;
use quartic_heat::symbol::{
    check_good_class, check_strong_convexity, classify_regime, estimate_theta, sigma_convex, GoodClassReport, Regime,
};
use quartic_heat::{CoefficientField, Domain2D};

use crate::config::{DistanceChoice, KernelChoice, RunConfig};
use crate::output::{heatmap_svg, Sink};
use crate::Failure;

pub struct Outcome {
    pub json: String,
    pub failed: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Invariant {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Invariant {
    Invariant { name: name.into(), passed, detail }
}

fn finish<T: Serialize>(sink: &mut Sink, name: &str, doc: &T, invariants: &[Invariant]) -> Result<Outcome, Failure> {
    let json = sink.json(name, doc)?;
    let failed = invariants.iter().filter(|i| !i.passed).map(|i| i.name.clone()).collect();
    Ok(Outcome { json, failed })
}

fn field(cfg: &RunConfig, base: &Path) -> Result<(CoefficientField, Domain2D), Failure> {
    let domain = cfg.domain.build()?;
    let f = cfg.coefficients.build(domain, base)?;
    let d = *f.domain();
    Ok((f, d))
}

#[derive(Debug, Serialize)]
struct ThetaSummary {
    theta: f64,
    smoothing_scale: f64,
    pointwise_bound: f64,
    surrogate_sigma_star: f64,
}

#[derive(Debug, Serialize)]
struct ReportDoc {
    coefficients: String,
    domain: Domain2D,
    /// `Q` when it is the same at every node.
    q: Option<f64>,
    q_min: f64,
    q_max: f64,
    regimes: Vec<Regime>,
    k_star: f64,
    sigma_star: f64,
    c_ell: f64,
    c_upper: f64,
    strongly_convex: Option<bool>,
    good_class: GoodClassReport,
    theta: Option<ThetaSummary>,
    theta_error: Option<String>,
    invariants: Vec<Invariant>,
    passed: bool,
}

pub fn report(cfg: &RunConfig, base: &Path, sink: &mut Sink) -> Result<Outcome, Failure> {
    let (f, d) = field(cfg, base)?;
    let cl = classify_regime(&f)?;
    let (q_min, q_max) = cl.q_range();
    let step = cfg.report.good_class_step.unwrap_or(2.0 * d.h1().max(d.h2()));
    let good = check_good_class(&f, step)?;
    let (theta, theta_error) = match estimate_theta(&f, &cfg.report.theta_scales) {
        Ok(t) => {
            let s = classify_regime(&t.surrogate)?.sigma_star;
            let sum = ThetaSummary {
                theta: t.theta,
                smoothing_scale: t.smoothing_scale,
                pointwise_bound: t.pointwise_bound,
                surrogate_sigma_star: s,
            };
            (Some(sum), None)
        }
        Err(quartic_heat::Error::Parameter(m)) => return Err(Failure::Usage(m)),
        Err(e) => (None, Some(e.to_string())),
    };
    let min_sigma = cl.sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut inv = vec![check(
        "sigma_star_is_the_nodewise_minimum",
        (min_sigma - cl.sigma_star).abs() <= 1e-12,
        format!("min sigma(x) = {min_sigma}, sigma* = {}", cl.sigma_star),
    )];
    if cl.regimes_present() == vec![Regime::Convex] {
        inv.push(check(
            "convex_sigma_closed_form",
            (cl.sigma_star - sigma_convex()).abs() <= 1e-12,
            format!("sigma* = {}, 3 cbrt(2)/16 = {}", cl.sigma_star, sigma_convex()),
        ));
    }
    let passed = inv.iter().all(|i| i.passed);
    let doc = ReportDoc {
        coefficients: cfg.coefficients.label(),
        domain: d,
        q: (q_max - q_min <= 1e-12).then_some(q_min),
        q_min,
        q_max,
        regimes: cl.regimes_present(),
        k_star: cl.k_star,
        sigma_star: cl.sigma_star,
        c_ell: f.c_ell(),
        c_upper: f.c_upper(),
        strongly_convex: check_strong_convexity(&f).ok().map(|s| s.all),
        good_class: good,
        theta,
        theta_error,
        invariants: inv.clone(),
        passed,
    };
    finish(sink, "report.json", &doc, &inv)
}

#[derive(Debug, Serialize)]
struct AlgebraDoc {
    seed: u64,
    samples_per_regime: usize,
    #[serde(flatten)]
    report: AlgebraReport,
    invariants: Vec<Invariant>,
    passed: bool,
}

pub fn algebra(cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome, Failure> {
    let n = cfg.algebra.samples_per_regime;
    if n == 0 {
        return Err(Failure::Usage("samples_per_regime must be positive".into()));
    }
    let rep = algebra_report(n, cfg.seed)?;
    let worst_k = rep.k_numeric_vs_formula.iter().map(|k| k.abs_diff).fold(0.0, f64::max);
    let inv = vec![
        check("identity", rep.identity_max_residual <= 1e-10, format!("max residual {:e}", rep.identity_max_residual)),
        check("gamma_psd", rep.psd_violations == 0, format!("{} violations", rep.psd_violations)),
        check("optimal_k", worst_k <= 1e-6, format!("max |numeric - formula| {worst_k:e}")),
        check("group_terms", rep.group_term_max_residual <= 1e-10, format!("max residual {:e}", rep.group_term_max_residual)),
        check("s_nonnegative", rep.min_s_value >= -1e-9, format!("min S {:e}", rep.min_s_value)),
    ];
    let passed = inv.iter().all(|i| i.passed);
    let doc = AlgebraDoc { seed: cfg.seed, samples_per_regime: n, report: rep, invariants: inv.clone(), passed };
    finish(sink, "algebra.json", &doc, &inv)
}

#[derive(Debug, Serialize)]
struct DistanceDoc {
    coefficients: String,
    source: [f64; 2],
    source_node: (usize, usize),
    method: DistanceMethod,
    stencil_order: usize,
    iterations: usize,
    max_value: f64,
    bracket: Option<(f64, f64)>,
    files: Vec<String>,
    invariants: Vec<Invariant>,
    passed: bool,
}

pub fn distance(cfg: &RunConfig, base: &Path, sink: &mut Sink) -> Result<Outcome, Failure> {
    let (f, d) = field(cfg, base)?;
    let p = &cfg.distance;
    let method = match p.method {
        DistanceChoice::Dijkstra => DistanceMethod::DijkstraStencil,
        DistanceChoice::Sweeping => DistanceMethod::FastSweeping,
    };
    let df = distance_field(&FinslerMetric::new(&f), p.source, method, p.order)?;
    sink.grid("distance.csv", &d, &df.values.values)?;
    let max_value = df.values.max();
    let src = df.at(df.source_node.0, df.source_node.1);
    let inv = vec![
        check("finite", df.values.values.iter().all(|v| v.is_finite()), "all distances finite".into()),
        check("nonnegative", df.values.min() >= 0.0, format!("min {}", df.values.min())),
        check("zero_at_source", src.abs() <= 1e-9, format!("d(source) = {src}")),
    ];
    let passed = inv.iter().all(|i| i.passed);
    let doc = DistanceDoc {
        coefficients: cfg.coefficients.label(),
        source: df.source,
        source_node: df.source_node,
        method: df.method,
        stencil_order: df.stencil_order,
        iterations: df.iterations,
        max_value,
        bracket: df.bracket,
        files: vec!["distance.csv".into()],
        invariants: inv.clone(),
        passed,
    };
    finish(sink, "distance.json", &doc, &inv)
}

fn slice(
    f: &CoefficientField,
    d: &Domain2D,
    source: (usize, usize),
    times: &[f64],
    method: KernelChoice,
) -> Result<KernelSlice, Failure> {
    if times.is_empty() {
        return Err(Failure::Usage("at least one time is required".into()));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(Failure::Usage(format!("times must be positive, got {t}")));
    }
    let grid = |m: KernelMethod| -> Result<KernelSlice, Failure> {
        let op = assemble_operator(f, d)?;
        Ok(kernel_slice(&op, source, times, m, &EvolveOptions::default())?)
    };
    match method {
        KernelChoice::Fourier => {
            let k = ConstantKernel::from_field(f)
                .map_err(|e| Failure::Usage(format!("the Fourier method needs constant coefficients: {e}")))?;
            Ok(fourier_slice(&k, d, source, times)?)
        }
        KernelChoice::Cn => grid(KernelMethod::CrankNicolson),
        KernelChoice::Krylov => grid(KernelMethod::KrylovExponential),
    }
}

#[derive(Debug, Serialize)]
struct KernelDoc {
    coefficients: String,
    source: (usize, usize),
    source_point: [f64; 2],
    method: KernelMethod,
    times: Vec<f64>,
    masses: Vec<f64>,
    max_abs: Vec<f64>,
    files: Vec<String>,
    invariants: Vec<Invariant>,
    passed: bool,
}

pub fn kernel(cfg: &RunConfig, base: &Path, sink: &mut Sink) -> Result<Outcome, Failure> {
    let (f, d) = field(cfg, base)?;
    let p = &cfg.kernel;
    let source = match p.source {
        Some([i, j]) => {
            if i >= d.n1 || j >= d.n2 {
                return Err(Failure::Usage(format!("source node ({i}, {j}) is outside the {}x{} grid", d.n1, d.n2)));
            }
            (i, j)
        }
        None => (d.n1 / 2, d.n2 / 2),
    };
    let ks = slice(&f, &d, source, &p.times, p.method)?;
    let mut files = Vec::new();
    let mut max_abs = Vec::new();
    let mut finite = true;
    for (k, g) in ks.values.iter().enumerate() {
        let re: Vec<f64> = g.values.iter().map(|z| z.re).collect();
        let im: Vec<f64> = g.values.iter().map(|z| z.im).collect();
        let ab: Vec<f64> = g.values.iter().map(|z| z.norm()).collect();
        finite &= ab.iter().all(|v| v.is_finite());
        max_abs.push(ab.iter().cloned().fold(0.0, f64::max));
        for (tag, v) in [("re", &re), ("im", &im), ("abs", &ab)] {
            let name = format!("kernel_{k}_{tag}.csv");
            sink.grid(&name, &d, v)?;
            files.push(name);
        }
        if p.svg {
            let logs: Vec<f64> = ab.iter().map(|v| if *v > 0.0 { v.log10() } else { f64::NAN }).collect();
            let name = format!("kernel_{k}_log_abs.svg");
            sink.text(&name, &heatmap_svg(&d, &logs, &format!("log10 |G|, t = {}", ks.times[k])))?;
            files.push(name);
        }
    }
    let inv = vec![check("finite", finite, "all kernel values finite".into())];
    let passed = inv.iter().all(|i| i.passed);
    let doc = KernelDoc {
        coefficients: cfg.coefficients.label(),
        source: ks.source,
        source_point: ks.source_point,
        method: ks.method,
        times: ks.times.clone(),
        masses: ks.masses(),
        max_abs,
        files,
        invariants: inv.clone(),
        passed,
    };
    finish(sink, "kernel.json", &doc, &inv)
}

#[derive(Debug, Serialize)]
struct BoundDoc {
    coefficients: String,
    kernel_method: KernelMethod,
    in_good_class: bool,
    /// Measured distance to the good-class surrogate when the field is outside the class.
    theta: Option<f64>,
    #[serde(flatten)]
    report: BoundReport,
    files: Vec<String>,
    invariants: Vec<Invariant>,
    passed: bool,
}

pub fn bound(cfg: &RunConfig, base: &Path, sink: &mut Sink) -> Result<Outcome, Failure> {
    let (f, d) = field(cfg, base)?;
    let p = &cfg.bound;
    if !(p.epsilon > 0.0 && p.epsilon < 1.0) {
        return Err(Failure::Usage(format!("epsilon must lie in (0, 1), got {}", p.epsilon)));
    }
    let good = check_good_class(&f, 2.0 * d.h1().max(d.h2()))?;
    let (sigma_star, theta) = if good.in_good_class {
        (classify_regime(&f)?.sigma_star, None)
    } else {
        let t = estimate_theta(&f, &cfg.report.theta_scales)?;
        (classify_regime(&t.surrogate)?.sigma_star, Some(t.theta))
    };
    let constant = f.constant_coefs();
    let method = p.method.unwrap_or(if constant.is_some() { KernelChoice::Fourier } else { KernelChoice::Krylov });
    let dist = distance_field(&FinslerMetric::new(&f), p.source, DistanceMethod::DijkstraStencil, 3)?;
    let ks = slice(&f, &d, dist.source_node, &p.times, method)?;
    let opts = BoundOptions { epsilon: p.epsilon, s_used: p.s_used, stride: p.stride, ..BoundOptions::default() };
    let mut rep = verify_bound(&ks, &dist, sigma_star, &opts)?;
    if let (Some(delta), Some(c)) = (p.delta, constant) {
        let s = sharpness_probe(&ConstantKernel::new(&c)?, sigma_star, delta, &SigmaOptions::default())?;
        rep.sigma_empirical = Some(s.sigma_empirical);
        rep.sharpness = Some(s);
    }
    sink.records("bound.csv", &rep.records)?;
    let inv = vec![check(
        "bound_holds",
        rep.holds(),
        format!("{} violations over {} tested samples, min margin {:e}", rep.violations.len(), rep.tested_samples, rep.min_margin),
    )];
    let passed = inv.iter().all(|i| i.passed);
    let doc = BoundDoc {
        coefficients: cfg.coefficients.label(),
        kernel_method: ks.method,
        in_good_class: good.in_good_class,
        theta,
        report: rep,
        files: vec!["bound.csv".into()],
        invariants: inv.clone(),
        passed,
    };
    finish(sink, "bound.json", &doc, &inv)
}
