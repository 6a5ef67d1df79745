//! Brute-force oracles for the scalar lemmas and the norm inequalities.
//!
//! Every check reports a margin per evaluation: `ln(lhs / rhs)` for
//! multiplicative bounds, a plain difference for additive ones. A margin
//! above the slack counts as a violation.

pub mod norms;
pub mod scalar;

use crate::csv::{Cell, Table};
use crate::error::{arg, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Params(pub BTreeMap<String, f64>);

impl Params {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Params(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub(crate) fn get(&self, k: &str) -> f64 {
        self.0.get(k).copied().unwrap_or(f64::NAN)
    }

    /// `k=v;k=v` in key order.
    pub fn digest(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaKind {
    Scalar,
    Norm,
}

#[derive(Clone, Debug, Default)]
pub struct Tally {
    pub evaluations: usize,
    pub violations: usize,
    pub worst: Option<f64>,
    pub alt: Option<(usize, f64)>,
}

impl Tally {
    pub(crate) fn add(&mut self, margin: f64, slack: f64) {
        self.evaluations += 1;
        if margin > slack || margin.is_nan() {
            self.violations += 1;
        }
        self.worst = Some(self.worst.map_or(margin, |w: f64| w.max(margin)));
    }

    pub(crate) fn add_alt(&mut self, margin: f64, slack: f64) {
        let (v, w) = self.alt.unwrap_or((0, f64::NEG_INFINITY));
        self.alt = Some((v + usize::from(margin > slack), w.max(margin)));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCase {
    pub kind: LemmaKind,
    pub name: String,
    pub params: Params,
    pub samples: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub violations: usize,
    /// largest margin seen, recorded even without violations
    pub worst_margin: f64,
    /// violations and worst margin against a second candidate bound
    pub alt: Option<(usize, f64)>,
    pub seconds: f64,
}

impl LemmaCase {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub fn lemma_names(kind: LemmaKind) -> &'static [&'static str] {
    match kind {
        LemmaKind::Scalar => scalar::NAMES,
        LemmaKind::Norm => norms::NAMES,
    }
}

pub fn default_params(kind: LemmaKind, name: &str) -> Result<Params> {
    Ok(Params::from_pairs(match kind {
        LemmaKind::Scalar => scalar::defaults(name)?,
        LemmaKind::Norm => norms::defaults(name)?,
    }))
}

/// Defaults overlaid with `overrides`; unknown keys are rejected.
pub fn resolve_params(kind: LemmaKind, name: &str, overrides: &Params) -> Result<Params> {
    let mut p = default_params(kind, name)?;
    for (k, v) in &overrides.0 {
        match p.0.get_mut(k) {
            Some(slot) => *slot = *v,
            None => return arg(format!("lemma {name} has no parameter {k:?}")),
        }
    }
    Ok(p)
}

fn verify(kind: LemmaKind, name: &str, overrides: &Params, samples: usize, seed: u64) -> Result<LemmaCase> {
    let params = resolve_params(kind, name, overrides)?;
    let t0 = Instant::now();
    let t = match kind {
        LemmaKind::Scalar => scalar::run(name, &params, samples, seed)?,
        LemmaKind::Norm => norms::run(name, &params, samples, seed)?,
    };
    Ok(LemmaCase {
        kind,
        name: name.to_string(),
        params,
        samples,
        seed,
        evaluations: t.evaluations,
        violations: t.violations,
        worst_margin: t.worst.unwrap_or(f64::NEG_INFINITY),
        alt: t.alt,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

pub fn verify_scalar_lemma(name: &str, params: &Params, samples: usize, seed: u64) -> Result<LemmaCase> {
    verify(LemmaKind::Scalar, name, params, samples, seed)
}

pub fn verify_norm_lemma(name: &str, params: &Params, samples: usize, seed: u64) -> Result<LemmaCase> {
    verify(LemmaKind::Norm, name, params, samples, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub kind: LemmaKind,
    pub name: String,
    #[serde(default)]
    pub params: Params,
    pub samples: usize,
}

impl SuiteEntry {
    fn new(kind: LemmaKind, name: &str, params: &[(&str, f64)], samples: usize) -> Self {
        SuiteEntry { kind, name: name.to_string(), params: Params::from_pairs(params.iter().copied()), samples }
    }
}

/// Every registered lemma at its defaults, plus a few parameter sweeps.
pub fn default_suite() -> Vec<SuiteEntry> {
    use LemmaKind::*;
    let mut v = Vec::new();
    for name in scalar::NAMES {
        let samples = match *name {
            "log_superadditivity" | "poly_product" => 10_000,
            "log_sum" | "geometric_product" => 100_000,
            _ => 10_000,
        };
        v.push(SuiteEntry::new(Scalar, name, &[], samples));
    }
    for sigma in [2.1, 4.0] {
        for delta in [0.05, 0.9] {
            for name in ["f_max", "log_sum", "aux_power_weight"] {
                v.push(SuiteEntry::new(Scalar, name, &[("sigma", sigma), ("delta", delta)], 10_000));
            }
        }
        v.push(SuiteEntry::new(Scalar, "aux_log_ratio", &[("sigma", sigma)], 10_000));
    }
    v.push(SuiteEntry::new(Scalar, "poly_product", &[("p", 1.0), ("floor", 32.0), ("delta", 0.02)], 10_000));
    v.push(SuiteEntry::new(Scalar, "geometric_product", &[("d", 2.0), ("delta", 0.05)], 100_000));
    for name in norms::NAMES {
        let samples = match *name {
            "gap" => 100_000,
            "monotonicity" | "submultiplicativity" | "transfer_plus" | "transfer_sup" => 1000,
            _ => 200,
        };
        v.push(SuiteEntry::new(Norm, name, &[], samples));
    }
    v
}

pub fn run_suite(entries: &[SuiteEntry], seed: u64) -> Result<Vec<LemmaCase>> {
    entries.par_iter().map(|e| verify(e.kind, &e.name, &e.params, e.samples, seed)).collect()
}

pub const SUITE_COLUMNS: &[&str] = &[
    "kind",
    "name",
    "params",
    "samples",
    "seed",
    "evaluations",
    "violations",
    "worst_margin",
    "alt_violations",
    "alt_worst_margin",
    "seconds",
];

/// One row per case; the seconds column stays empty unless `timing` is set.
pub fn suite_table(cases: &[LemmaCase], timing: bool) -> Table {
    let mut t = Table::new("lemma_suite", SUITE_COLUMNS);
    for c in cases {
        let kind = match c.kind {
            LemmaKind::Scalar => "scalar",
            LemmaKind::Norm => "norm",
        };
        t.push(vec![
            kind.into(),
            c.name.clone().into(),
            c.params.digest().into(),
            (c.samples as u64).into(),
            c.seed.into(),
            (c.evaluations as u64).into(),
            (c.violations as u64).into(),
            c.worst_margin.into(),
            c.alt.map_or(Cell::S(String::new()), |a| (a.0 as u64).into()),
            c.alt.map_or(Cell::S(String::new()), |a| a.1.into()),
            if timing { c.seconds.into() } else { Cell::S(String::new()) },
        ]);
    }
    t
}
