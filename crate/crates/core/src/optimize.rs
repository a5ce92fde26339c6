//! Thin wrappers over `argmin` for derivative-free minimization.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::neldermead::NelderMead;

use crate::error::{Error, Result};

struct Multi<'a>(&'a dyn Fn(&[f64]) -> f64);

impl CostFunction for Multi<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.0)(p))
    }
}

struct Scalar<'a>(&'a dyn Fn(f64) -> f64);

impl CostFunction for Scalar<'_> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, p: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.0)(*p))
    }
}

fn numeric(e: argmin::core::Error) -> Error {
    Error::Numeric(e.to_string())
}

/// Nelder-Mead from an axis-aligned simplex of edge `step` around `x0`.
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    sd_tol: f64,
    max_iters: u64,
) -> Result<(Vec<f64>, f64)> {
    let mut simplex = vec![x0.to_vec()];
    for k in 0..x0.len() {
        let mut v = x0.to_vec();
        v[k] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(sd_tol).map_err(numeric)?;
    let res = Executor::new(Multi(f), solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(numeric)?;
    let state = res.state();
    let x = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::Numeric("Nelder-Mead produced no iterate".into()))?;
    Ok((x, state.get_best_cost()))
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
pub fn golden_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    let solver = GoldenSectionSearch::new(lo, hi)
        .map_err(numeric)?
        .with_tolerance(tol)
        .map_err(numeric)?;
    let res = Executor::new(Scalar(f), solver)
        .configure(|s| s.param(0.5 * (lo + hi)).max_iters(200))
        .run()
        .map_err(numeric)?;
    let state = res.state();
    let x = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::Numeric("golden-section search produced no iterate".into()))?;
    Ok((x, state.get_best_cost()))
}
