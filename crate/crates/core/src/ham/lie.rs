//! Lie series `H o Phi_F = sum_n H^(n) / n!` with `H^(n) = {H^(n-1), F}`.

use super::bracket::{bracket_with, BracketOpts, DegreePolicy};
use super::norm::{norm, NormKind};
use super::{linear_combine, Hamiltonian};
use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowGuard {
    /// computed term norms must shrink once past first order
    Decay,
    /// the flow lemma's smallness hypothesis with its explicit constant
    Smallness { delta: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct LieOptions {
    pub order_cap: usize,
    pub tail_tol: f64,
    pub prune_tol: f64,
    /// norms of the series terms are sup norms at this rho
    pub rho: f64,
    pub degree: DegreePolicy,
    pub guard: FlowGuard,
}

impl Default for LieOptions {
    fn default() -> Self {
        LieOptions {
            order_cap: 6,
            tail_tol: 0.0,
            prune_tol: 0.0,
            rho: 0.0,
            degree: DegreePolicy::Truncate,
            guard: FlowGuard::Decay,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LieOutcome {
    pub h: Hamiltonian,
    pub tail_bound: f64,
    pub orders: usize,
    /// weighted norms of the computed terms, order 0 first
    pub term_norms: Vec<f64>,
}

/// `ln` of `exp{3 (14400 d / delta^2)^d exp{d (24 d / delta)^(1/(sigma-1))}}`.
pub fn flow_constant_ln(d: usize, sigma: f64, delta: f64) -> f64 {
    let d = d as f64;
    3.0 * (14400.0 * d / (delta * delta)).powf(d) * (d * (24.0 * d / delta).powf(1.0 / (sigma - 1.0))).exp()
}

pub fn lie_transform(h: &Hamiltonian, f: &Hamiltonian, order_cap: usize, tail_tol: f64) -> Result<(Hamiltonian, f64)> {
    let out = lie_transform_with(h, f, &LieOptions { order_cap, tail_tol, ..Default::default() })?;
    Ok((out.h, out.tail_bound))
}

pub fn lie_transform_with(h: &Hamiltonian, f: &Hamiltonian, opts: &LieOptions) -> Result<LieOutcome> {
    lie_chain(h, f, opts, true, |n| 1.0 / factorial(n))
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `sum_n coef(n) H^(n)`, starting at order 0 or 1.
pub(crate) fn lie_chain(
    h: &Hamiltonian,
    f: &Hamiltonian,
    opts: &LieOptions,
    include_zeroth: bool,
    coef: impl Fn(usize) -> f64,
) -> Result<LieOutcome> {
    if opts.order_cap < 1 {
        return Err(Error::Argument("order_cap must be at least 1".into()));
    }
    h.check_compatible(f)?;
    if let FlowGuard::Smallness { delta } = opts.guard {
        let d = h.lattice().params.d;
        let sigma = h.lattice().params.sigma;
        let fnorm = norm(f, NormKind::Sup, (opts.rho - delta).max(0.0))?;
        let lhs = (2.0 * std::f64::consts::E / delta).ln() + flow_constant_ln(d, sigma, delta) + fnorm.ln();
        if fnorm > 0.0 && !(lhs < 0.5f64.ln()) {
            return Err(Error::Divergence(format!("smallness hypothesis fails: ln((2e/delta) K |F|) = {lhs:.3e}")));
        }
    }
    let one = Complex64::new(1.0, 0.0);
    let bopts = BracketOpts { prune_tol: opts.prune_tol, degree: opts.degree };
    let mut total = if include_zeroth {
        h.scale(Complex64::new(coef(0), 0.0))
    } else {
        Hamiltonian::zero(h.lattice().clone(), h.degree_cap())
    };
    let mut norms = vec![coef(0).abs() * norm(h, NormKind::Sup, opts.rho)?];
    let mut cur = h.clone();
    let mut tail = 0.0;
    let mut orders = 0;
    if f.is_empty() {
        return Ok(LieOutcome { h: total, tail_bound: 0.0, orders: 0, term_norms: norms });
    }
    for n in 1..=opts.order_cap {
        cur = bracket_with(&cur, f, &bopts)?;
        orders = n;
        let c = coef(n);
        let t = c.abs() * norm(&cur, NormKind::Sup, opts.rho)?;
        norms.push(t);
        total = linear_combine(one, &total, Complex64::new(c, 0.0), &cur)?;
        if cur.is_empty() {
            tail = 0.0;
            break;
        }
        let prev = norms[n - 1];
        let q = if n >= 2 && prev > 0.0 { t / prev } else { 0.5 };
        if opts.guard == FlowGuard::Decay && n >= 2 && q >= 1.0 && t > opts.tail_tol {
            return Err(Error::Divergence(format!(
                "series term {n} has norm {t:.3e}, not below order {} norm {prev:.3e}",
                n - 1
            )));
        }
        tail = if q < 1.0 { t * q / (1.0 - q) } else { f64::INFINITY };
        if t < opts.tail_tol {
            break;
        }
    }
    let budget = total.error_budget() + tail;
    Ok(LieOutcome { h: total.with_budget(budget), tail_bound: tail, orders, term_norms: norms })
}
