//! Normal form bookkeeping and the homological equation
//! `{N,F} + R0 + R1 = [R0] + [R1]`.
//!
//! With `{F,G} = i sum (F_q G_qbar - F_qbar G_q)` and `N = sum Omega_n |q_n|^2`,
//! a monomial `M` with exponents `(k,k')` satisfies `{N,M} = -i D M` where
//! `D = sum (k_n - k'_n) Omega_n`. The solution is therefore `F = -i R / D`
//! termwise. J factors commute with `N`, so R1 terms keep their J.

use crate::dioph::FrequencyVector;
use crate::error::{arg, Error, Result};
use crate::ham::{
    diagonal, key_is_action_only, key_modes, key_term, lid, linear_combine, lkind, norm, poisson_bracket, Hamiltonian,
    Key, NormKind, KB, KQ,
};
use crate::lattice::MultiIndex;
use crate::modes::Lattice;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const RHO0: f64 = (3.0 - 2.0 * std::f64::consts::SQRT_2) / 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalForm {
    pub v_breve: f64,
    /// `V-hat_n` in lattice id order
    pub v_hat: Vec<f64>,
}

impl NormalForm {
    pub fn new(lat: &Lattice, omega: &FrequencyVector) -> Result<Self> {
        Ok(NormalForm { v_breve: 0.0, v_hat: omega.dense(lat)? })
    }

    pub fn zero(lat: &Lattice) -> Self {
        NormalForm { v_breve: 0.0, v_hat: vec![0.0; lat.len()] }
    }

    /// `Omega_n = ||n||^2 + V-breve + V-hat_n`
    pub fn omega(&self, lat: &Lattice) -> Vec<f64> {
        (0..lat.len()).map(|i| lat.norm_sq(i as u16) as f64 + self.v_breve + self.v_hat[i]).collect()
    }

    /// `N = sum Omega_n |q_n|^2`
    pub fn hamiltonian(&self, lat: &Arc<Lattice>, degree_cap: u32) -> Hamiltonian {
        diagonal(lat.clone(), degree_cap, &self.omega(lat))
    }
}

/// `(sum (k-k')(||n||^2 + V-hat), (|k|-|k'|) V-breve)`
fn divisor_parts(lat: &Lattice, key: &[u32], nf: &NormalForm) -> (f64, f64) {
    let mut d = 0.0;
    let mut mass = 0i64;
    for (id, e) in key_modes(key) {
        let c = e[1] as i64 - e[2] as i64;
        if c != 0 {
            d += c as f64 * (lat.norm_sq(id) as f64 + nf.v_hat[id as usize]);
            mass += c;
        }
    }
    (d, mass as f64 * nf.v_breve)
}

pub(crate) fn key_divisor(lat: &Lattice, key: &[u32], nf: &NormalForm) -> f64 {
    let (d, v) = divisor_parts(lat, key, nf);
    d + v
}

/// `sum (k_n - k'_n)(||n||^2 + V-breve + V-hat_n)`
pub fn divisor(lat: &Lattice, k: &MultiIndex, k_bar: &MultiIndex, nf: &NormalForm) -> Result<f64> {
    let mut d = 0.0;
    let mut mass = 0i64;
    for (n, e) in k.iter() {
        let id = lat.id_or_err(n)?;
        d += e as f64 * (lat.norm_sq(id) as f64 + nf.v_hat[id as usize]);
        mass += e as i64;
    }
    for (n, e) in k_bar.iter() {
        let id = lat.id_or_err(n)?;
        d -= e as f64 * (lat.norm_sq(id) as f64 + nf.v_hat[id as usize]);
        mass -= e as i64;
    }
    let shift = mass as f64 * nf.v_breve;
    if mass == 0 {
        assert_eq!(shift, 0.0, "mass-conserving divisor must not see the constant shift");
    }
    Ok(d + shift)
}

/// `sum_{i>=3} w(n_i*)` of a key, each letter counted with its degree.
pub(crate) fn key_tail_weight(lat: &Lattice, key: &[u32]) -> f64 {
    let mut ws: Vec<f64> = Vec::with_capacity(key.len() * 2);
    for &l in key {
        let w = lat.w(lid(l));
        ws.push(w);
        if !matches!(lkind(l), KQ | KB) {
            ws.push(w);
        }
    }
    ws.sort_by(|a, b| b.total_cmp(a));
    ws.iter().skip(2).sum()
}

/// `B_s = 2 (s+4) ln^2(s+4) / rho0 * ln(1/eps_{s+1})`
pub fn truncation_budget(s: u32, eps0: f64) -> Result<f64> {
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return arg(format!("eps0 must lie in (0,1), got {eps0}"));
    }
    let x = s as f64 + 4.0;
    let ln_eps_next = 1.5f64.powi(s as i32 + 1) * eps0.ln();
    Ok(2.0 * x * x.ln().powi(2) / RHO0 * (-ln_eps_next))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DivisorStats {
    pub min_abs_divisor: f64,
    pub below_guard: u64,
    pub eliminated: u64,
    pub truncated_count: u64,
    pub truncated_mass: f64,
    /// nonresonant terms with exactly two q/qbar letters and nothing else
    pub quadratic_nonresonant: u64,
    /// `||{N,F} + R' - [R]||* / ||R0 + R1||*` at rho = 0
    pub residual_rel: f64,
}

#[derive(Clone, Debug)]
pub struct HomologicalSolution {
    pub f0: Hamiltonian,
    pub f1: Hamiltonian,
    pub resonant0: Hamiltonian,
    pub resonant1: Hamiltonian,
    /// nonresonant terms solved for, i.e. `R' - [R]`
    pub eliminated: Hamiltonian,
    /// nonresonant terms above the truncation budget, carried forward
    pub deferred: Hamiltonian,
    pub stats: DivisorStats,
}

impl HomologicalSolution {
    pub fn f(&self) -> Hamiltonian {
        linear_combine(Complex64::new(1.0, 0.0), &self.f0, Complex64::new(1.0, 0.0), &self.f1).expect("same lattice")
    }
}

struct Parts {
    f: Vec<(Key, Complex64)>,
    res: Vec<(Key, Complex64)>,
    elim: Vec<(Key, Complex64)>,
    def: Vec<(Key, Complex64)>,
}

fn split_one(r: &Hamiltonian, nf: &NormalForm, guard: f64, budget: f64, stats: &mut DivisorStats) -> Result<Parts> {
    let lat = r.lattice();
    let mut p = Parts { f: Vec::new(), res: Vec::new(), elim: Vec::new(), def: Vec::new() };
    let minus_i = Complex64::new(0.0, -1.0);
    for (k, c) in r.raw() {
        if key_is_action_only(k) {
            p.res.push((k.clone(), *c));
            continue;
        }
        if k.iter().all(|&l| matches!(lkind(l), KQ | KB)) && k.len() == 2 {
            stats.quadratic_nonresonant += 1;
        }
        if key_tail_weight(lat, k) > budget {
            stats.truncated_count += 1;
            stats.truncated_mass += c.norm();
            p.def.push((k.clone(), *c));
            continue;
        }
        let d = key_divisor(lat, k, nf);
        stats.min_abs_divisor = stats.min_abs_divisor.min(d.abs());
        if !(d.abs() >= guard) {
            stats.below_guard += 1;
            let t = key_term(lat, k, *c);
            return Err(Error::SmallDivisor { k: t.k.to_string(), k_bar: t.k_bar.to_string(), divisor: d, guard });
        }
        stats.eliminated += 1;
        p.elim.push((k.clone(), *c));
        p.f.push((k.clone(), minus_i * c / d));
    }
    Ok(p)
}

/// Solves for the nonresonant part of `R0 + R1` with tail weight at most `budget`.
pub fn solve_homological(
    r0: &Hamiltonian,
    r1: &Hamiltonian,
    nf: &NormalForm,
    guard: f64,
    budget: f64,
) -> Result<HomologicalSolution> {
    if !(guard > 0.0) {
        return arg(format!("guard must be positive, got {guard}"));
    }
    r0.check_compatible(r1)?;
    let lat = r0.lattice().clone();
    if nf.v_hat.len() != lat.len() {
        return arg("normal form and Hamiltonian live on different mode sets");
    }
    let cap = r0.degree_cap().max(r1.degree_cap());
    let mut stats = DivisorStats { min_abs_divisor: f64::INFINITY, ..Default::default() };
    let p0 = split_one(r0, nf, guard, budget, &mut stats)?;
    let p1 = split_one(r1, nf, guard, budget, &mut stats)?;
    let mk = |v: Vec<(Key, Complex64)>| Hamiltonian::from_sorted(lat.clone(), cap, v, 0.0);
    let f0 = mk(p0.f);
    let f1 = mk(p1.f);
    let resonant0 = mk(p0.res);
    let resonant1 = mk(p1.res);
    let one = Complex64::new(1.0, 0.0);
    let eliminated = linear_combine(one, &mk(p0.elim), one, &mk(p1.elim))?;
    let deferred = linear_combine(one, &mk(p0.def), one, &mk(p1.def))?;

    let n = nf.hamiltonian(&lat, cap);
    let f = linear_combine(one, &f0, one, &f1)?;
    let lhs = linear_combine(one, &poisson_bracket(&n, &f)?, one, &eliminated)?;
    let scale = norm(&linear_combine(one, r0, one, r1)?, NormKind::Star, 0.0)?;
    let res = norm(&lhs, NormKind::Star, 0.0)?;
    stats.residual_rel = if scale > 0.0 { res / scale } else { res };

    Ok(HomologicalSolution { f0, f1, resonant0, resonant1, eliminated, deferred, stats })
}
