//! Frequency box, the two strong Diophantine conditions, sampling and the
//! Monte Carlo estimate of the resonant measure.

use crate::csv::Table;
use crate::error::{arg, Result};
use crate::lattice::{sorted_system_signed, ModeIndex, SignedIndex};
use crate::modes::Lattice;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// `inf_j |x - j|`
pub fn dist_to_integers(x: f64) -> f64 {
    (x - x.round()).abs()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    #[serde(with = "pairs")]
    pub omega: BTreeMap<ModeIndex, f64>,
}

mod pairs {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<ModeIndex, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<ModeIndex, f64>, D::Error> {
        let v: Vec<(ModeIndex, f64)> = Vec::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}

impl FrequencyVector {
    /// Values in lattice id order; every mode must be present.
    pub fn dense(&self, lat: &Lattice) -> Result<Vec<f64>> {
        lat.modes()
            .iter()
            .map(|n| match self.omega.get(n) {
                Some(&w) => Ok(w),
                None => arg(format!("frequency missing at mode {n}")),
            })
            .collect()
    }

    pub fn from_dense(lat: &Lattice, v: &[f64]) -> Self {
        FrequencyVector { omega: lat.modes().iter().cloned().zip(v.iter().copied()).collect() }
    }

    /// `0 <= omega_n <= 1/<n>` everywhere.
    pub fn in_box(&self) -> bool {
        self.omega.iter().all(|(n, &w)| w >= 0.0 && w <= 1.0 / n.norm().max(1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiophParams {
    pub gamma: f64,
    pub d: usize,
    pub ell_budget: u32,
    pub mode_radius: u32,
}

impl DiophParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return arg(format!("gamma must lie in [0,1), got {}", self.gamma));
        }
        if self.d == 0 {
            return arg("d must be positive");
        }
        Ok(())
    }
}

/// The product factor `1 / (1 + |l|^3 <n>^p)`.
fn factor(l: i64, angle: f64, p: f64) -> f64 {
    1.0 / (1.0 + (l.unsigned_abs() as f64).powi(3) * angle.powf(p))
}

/// Whether the second condition applies: `||n3*|| < ||n2*||`, a missing `n3*` counting as minus infinity.
pub fn second_applies(ell: &SignedIndex) -> bool {
    let sys = sorted_system_signed(ell);
    match (sys.nth(2), sys.nth(3)) {
        (Some(_), None) => true,
        (Some(n2), Some(n3)) => n3.norm() < n2.norm(),
        _ => false,
    }
}

/// Right-hand side of condition 1 or 2.
pub fn dioph_rhs(ell: &SignedIndex, p: &DiophParams, which: u8) -> Result<f64> {
    if ell.is_zero() {
        return arg("l must be nonzero");
    }
    let d = p.d as f64;
    let entries = ell.entries();
    match which {
        1 => Ok(entries.iter().fold(p.gamma, |acc, (n, l)| acc * factor(*l, n.norm().max(1.0), d + 4.0))),
        2 => {
            let pre = p.gamma.powi(5) / 100.0;
            let sys = sorted_system_signed(ell);
            let Some(n3) = sys.nth(3) else { return Ok(pre) };
            let cut = n3.norm();
            Ok(entries
                .iter()
                .filter(|(n, _)| n.norm() <= cut)
                .fold(pre, |acc, (n, l)| acc * factor(*l, n.norm().max(1.0), d + 7.0).powi(10)))
        }
        _ => arg(format!("condition must be 1 or 2, got {which}")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub ell: Vec<(ModeIndex, i64)>,
    pub which: u8,
    pub lhs: f64,
    pub rhs: f64,
}

impl Violation {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    /// every `l` with `|l| <= checked_up_to` was tested
    pub checked_up_to: u32,
    pub checked: u64,
    pub violations: Vec<Violation>,
}

/// Calls `f` on every nonzero `l` with `|l| <= budget` over `m` slots, by `|l|` then lexicographic.
/// Stops when `f` returns false.
pub fn for_each_ell(m: usize, budget: u32, mut f: impl FnMut(&[i64]) -> bool) {
    let mut buf = vec![0i64; m];
    for s in 1..=budget as i64 {
        if !fill(&mut buf, 0, s, &mut f) {
            return;
        }
    }
}

fn fill(buf: &mut [i64], pos: usize, rem: i64, f: &mut impl FnMut(&[i64]) -> bool) -> bool {
    if pos == buf.len() - 1 {
        for v in [-rem, rem] {
            buf[pos] = v;
            if !f(buf) {
                return false;
            }
            if rem == 0 {
                break;
            }
        }
        buf[pos] = 0;
        return true;
    }
    for v in -rem..=rem {
        buf[pos] = v;
        if !fill(buf, pos + 1, rem - v.abs(), f) {
            return false;
        }
    }
    buf[pos] = 0;
    true
}

/// Precomputed per-mode data for fast checks.
struct Checker<'a> {
    angle: Vec<f64>,
    norm: Vec<f64>,
    p: &'a DiophParams,
}

impl<'a> Checker<'a> {
    fn new(lat: &Lattice, p: &'a DiophParams) -> Self {
        let norm: Vec<f64> = (0..lat.len()).map(|i| lat.norm(i as u16)).collect();
        Checker { angle: norm.iter().map(|x| x.max(1.0)).collect(), norm, p }
    }

    /// `(lhs, rhs1, rhs2 if it applies)`
    fn eval(&self, l: &[i64], w: &[f64]) -> (f64, f64, Option<f64>) {
        let d = self.p.d as f64;
        let mut x = 0.0;
        let mut r1 = self.p.gamma;
        // top three norms with multiplicity
        let mut top = [f64::NEG_INFINITY; 3];
        for (i, &li) in l.iter().enumerate() {
            if li == 0 {
                continue;
            }
            x += li as f64 * w[i];
            r1 *= factor(li, self.angle[i], d + 4.0);
            for _ in 0..li.unsigned_abs().min(3) {
                let v = self.norm[i];
                if v > top[0] {
                    top = [v, top[0], top[1]];
                } else if v > top[1] {
                    top = [top[0], v, top[1]];
                } else if v > top[2] {
                    top[2] = v;
                }
            }
        }
        let lhs = dist_to_integers(x);
        let applies = top[1] > f64::NEG_INFINITY && top[2] < top[1];
        let r2 = applies.then(|| {
            let mut r = self.p.gamma.powi(5) / 100.0;
            if top[2] > f64::NEG_INFINITY {
                for (i, &li) in l.iter().enumerate() {
                    if li != 0 && self.norm[i] <= top[2] {
                        r *= factor(li, self.angle[i], d + 7.0).powi(10);
                    }
                }
            }
            r
        });
        (lhs, r1, r2)
    }
}

fn to_signed(lat: &Lattice, l: &[i64]) -> Vec<(ModeIndex, i64)> {
    l.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, &v)| (lat.mode(i as u16).clone(), v)).collect()
}

pub fn check_frequency(lat: &Lattice, omega: &FrequencyVector, p: &DiophParams) -> Result<ViolationReport> {
    p.validate()?;
    let w = omega.dense(lat)?;
    let ck = Checker::new(lat, p);
    let mut checked = 0u64;
    let mut violations = Vec::new();
    for_each_ell(lat.len(), p.ell_budget, |l| {
        checked += 1;
        let (lhs, r1, r2) = ck.eval(l, &w);
        if lhs < r1 {
            violations.push(Violation { ell: to_signed(lat, l), which: 1, lhs, rhs: r1 });
        }
        if let Some(r2) = r2 {
            if lhs < r2 {
                violations.push(Violation { ell: to_signed(lat, l), which: 2, lhs, rhs: r2 });
            }
        }
        true
    });
    Ok(ViolationReport { checked_up_to: p.ell_budget, checked, violations })
}

/// True when no `l` up to the budget violates either condition.
pub fn is_strong_diophantine(lat: &Lattice, omega: &[f64], p: &DiophParams) -> bool {
    let ck = Checker::new(lat, p);
    let mut ok = true;
    for_each_ell(lat.len(), p.ell_budget, |l| {
        let (lhs, r1, r2) = ck.eval(l, omega);
        ok = lhs >= r1 && r2.map_or(true, |r| lhs >= r);
        ok
    });
    ok
}

/// Draw number `trial` of the uniform law on the box, keyed by `(seed, n)`.
pub fn sample_frequency_trial(lat: &Lattice, seed: u64, trial: u64) -> FrequencyVector {
    FrequencyVector {
        omega: lat
            .modes()
            .iter()
            .map(|n| (n.clone(), crate::rng::uniform(seed, trial, n) / n.norm().max(1.0)))
            .collect(),
    }
}

pub fn sample_frequency(lat: &Lattice, seed: u64) -> FrequencyVector {
    sample_frequency_trial(lat, seed, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub gamma: f64,
    pub trials: u64,
    pub violations: u64,
    pub fraction: f64,
    pub stderr: f64,
    pub ell_budget: u32,
    pub mode_radius: u32,
    pub seed: u64,
}

/// Lattice used for frequency questions; the weights play no role here.
pub fn frequency_lattice(d: usize, mode_radius: u32) -> Result<std::sync::Arc<Lattice>> {
    Lattice::new(crate::lattice::LatticeParams::with_default_floor(d, 2.5)?, 1.0, mode_radius)
}

pub fn resonance_measure(p: &DiophParams, trials: u64, seed: u64) -> Result<MeasureReport> {
    p.validate()?;
    if trials == 0 {
        return arg("trials must be at least 1");
    }
    let lat = frequency_lattice(p.d, p.mode_radius)?;
    let violations = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let w = sample_frequency_trial(&lat, seed, t).dense(&lat).expect("full mode set");
            !is_strong_diophantine(&lat, &w, p)
        })
        .count() as u64;
    let n = trials as f64;
    let fraction = violations as f64 / n;
    Ok(MeasureReport {
        gamma: p.gamma,
        trials,
        violations,
        fraction,
        stderr: (fraction * (1.0 - fraction) / n).sqrt(),
        ell_budget: p.ell_budget,
        mode_radius: p.mode_radius,
        seed,
    })
}

pub const MEASURE_COLUMNS: [&str; 8] =
    ["gamma", "trials", "violations", "fraction", "stderr", "ell_budget", "mode_radius", "seed"];

pub fn measure_table(rows: &[MeasureReport]) -> Table {
    let mut t = Table::new("measure", &MEASURE_COLUMNS);
    for r in rows {
        t.push(vec![
            r.gamma.into(),
            r.trials.into(),
            r.violations.into(),
            r.fraction.into(),
            r.stderr.into(),
            r.ell_budget.into(),
            r.mode_radius.into(),
            r.seed.into(),
        ]);
    }
    t
}

/// Weighted least squares slope of `fraction ~ C gamma` through the origin.
/// Standard errors are floored at `1/trials` so empty bins keep some weight.
pub fn fit_linear_constant(rows: &[MeasureReport]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for r in rows {
        let se = r.stderr.max(1.0 / r.trials as f64);
        let w = 1.0 / (se * se);
        num += w * r.fraction * r.gamma;
        den += w * r.gamma * r.gamma;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}
