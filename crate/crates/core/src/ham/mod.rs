//! Sparse Hamiltonians over the truncated lattice.
//!
//! A term key is a sorted list of letters `(mode id << 2) | kind` where the
//! kind is one of `A` (a factor `I_n(0)`), `Q` (`q_n`), `B` (`qbar_n`) or
//! `J` (`J_n`). Repetition encodes exponents. Because ids follow the
//! lexicographic mode order, sorting keys as integer lists is a canonical
//! order on terms.

mod bracket;
mod calculus;
mod collect;
mod io;
pub(crate) mod lie;
mod norm;
pub mod random;

pub use bracket::{bracket_with, poisson_bracket, BracketOpts, DegreePolicy};
pub use calculus::{eval, partial, second_partial, vector_field, vf_sup_norm};
pub use collect::{canonicalize, class_split, Repr};
pub use io::HamiltonianFile;
pub use lie::{flow_constant_ln, lie_transform, lie_transform_with, FlowGuard, LieOptions, LieOutcome};
pub use norm::{norm, plus_exponent, NormKind};

use crate::error::{arg, Error, Result};
use crate::lattice::{ModeIndex, MultiIndex};
use crate::modes::Lattice;
use num_complex::Complex64;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::collections::BTreeMap;
use std::sync::Arc;

pub(crate) type Key = SmallVec<[u32; 8]>;

pub(crate) const KA: u32 = 0;
pub(crate) const KQ: u32 = 1;
pub(crate) const KB: u32 = 2;
pub(crate) const KJ: u32 = 3;

/// Coefficients below this magnitude are treated as exact zeros.
pub const ZERO_TOL: f64 = 1e-300;

#[inline]
pub(crate) fn letter(id: u16, kind: u32) -> u32 {
    ((id as u32) << 2) | kind
}

#[inline]
pub(crate) fn lid(l: u32) -> u16 {
    (l >> 2) as u16
}

#[inline]
pub(crate) fn lkind(l: u32) -> u32 {
    l & 3
}

#[inline]
pub(crate) fn letter_degree(l: u32) -> u32 {
    match lkind(l) {
        KQ | KB => 1,
        _ => 2,
    }
}

pub(crate) fn key_degree(k: &[u32]) -> u32 {
    k.iter().map(|&l| letter_degree(l)).sum()
}

pub(crate) fn key_has_j(k: &[u32]) -> bool {
    k.iter().any(|&l| lkind(l) == KJ)
}

pub(crate) fn j_count(k: &[u32]) -> usize {
    k.iter().filter(|&&l| lkind(l) == KJ).count()
}

pub(crate) fn merge_keys(a: &[u32], b: &[u32]) -> Key {
    let mut out = Key::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

pub(crate) fn remove_one(k: &mut Key, l: u32) -> bool {
    match k.binary_search(&l) {
        Ok(p) => {
            k.remove(p);
            true
        }
        Err(_) => false,
    }
}

/// Per-mode exponents `(id, a, k, k', j)` of a key.
pub(crate) fn key_modes(k: &[u32]) -> SmallVec<[(u16, [u32; 4]); 6]> {
    let mut out: SmallVec<[(u16, [u32; 4]); 6]> = SmallVec::new();
    for &l in k {
        let id = lid(l);
        match out.last_mut() {
            Some((last, e)) if *last == id => e[lkind(l) as usize] += 1,
            _ => {
                let mut e = [0u32; 4];
                e[lkind(l) as usize] = 1;
                out.push((id, e));
            }
        }
    }
    out
}

/// True if the key has no `q` and no `qbar` letters.
pub(crate) fn key_is_action_only(k: &[u32]) -> bool {
    k.iter().all(|&l| matches!(lkind(l), KA | KJ))
}

/// One monomial with its exponent maps, as exchanged with the outside world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub a: MultiIndex,
    pub k: MultiIndex,
    pub k_bar: MultiIndex,
    pub jmodes: Vec<ModeIndex>,
    pub coeff: Complex64,
}

impl Term {
    pub fn new(a: MultiIndex, k: MultiIndex, k_bar: MultiIndex, coeff: Complex64) -> Self {
        Term { a, k, k_bar, jmodes: Vec::new(), coeff }
    }

    pub fn with_j(mut self, jmodes: Vec<ModeIndex>) -> Self {
        self.jmodes = jmodes;
        self
    }

    pub fn degree(&self) -> u32 {
        2 * self.a.total() + self.k.total() + self.k_bar.total() + 2 * self.jmodes.len() as u32
    }
}

/// A point of the truncated phase space.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatePoint {
    pub q: BTreeMap<ModeIndex, Complex64>,
}

impl StatePoint {
    pub(crate) fn dense(&self, lat: &Lattice) -> Result<Vec<Complex64>> {
        let mut v = vec![Complex64::new(0.0, 0.0); lat.len()];
        for (n, z) in &self.q {
            v[lat.id_or_err(n)? as usize] = *z;
        }
        Ok(v)
    }

    /// `q_n = exp(-r w(n))` on every mode: the unperturbed torus at unit phase.
    pub fn on_torus(lat: &Lattice) -> Self {
        let q = lat
            .modes()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), Complex64::new(lat.i0(i as u16).sqrt(), 0.0)))
            .collect();
        StatePoint { q }
    }

    /// `sup |q_n| exp(rho w(n))`
    pub fn weighted_norm(&self, lat: &Lattice, rho: f64) -> Result<f64> {
        let mut s: f64 = 0.0;
        for (n, z) in &self.q {
            let id = lat.id_or_err(n)?;
            s = s.max(z.norm() * (rho * lat.w(id)).exp());
        }
        Ok(s)
    }
}

#[derive(Clone, Debug)]
pub struct Hamiltonian {
    lat: Arc<Lattice>,
    degree_cap: u32,
    terms: Vec<(Key, Complex64)>,
    budget: f64,
}

impl PartialEq for Hamiltonian {
    fn eq(&self, o: &Self) -> bool {
        *self.lat == *o.lat && self.degree_cap == o.degree_cap && self.terms == o.terms
    }
}

impl Hamiltonian {
    pub fn zero(lat: Arc<Lattice>, degree_cap: u32) -> Self {
        Hamiltonian { lat, degree_cap, terms: Vec::new(), budget: 0.0 }
    }

    pub fn constant(lat: Arc<Lattice>, degree_cap: u32, c: Complex64) -> Self {
        let mut h = Self::zero(lat, degree_cap);
        if c.norm() >= ZERO_TOL {
            h.terms.push((Key::new(), c));
        }
        h
    }

    pub fn from_terms(lat: Arc<Lattice>, degree_cap: u32, terms: impl IntoIterator<Item = Term>) -> Result<Self> {
        let mut acc: FxHashMap<Key, Complex64> = FxHashMap::default();
        for t in terms {
            let key = term_key(&lat, &t)?;
            let deg = key_degree(&key);
            if deg > degree_cap {
                return Err(Error::Capacity(format!("term of degree {deg} exceeds degree cap {degree_cap}")));
            }
            *acc.entry(key).or_default() += t.coeff;
        }
        Ok(Self::from_acc(lat, degree_cap, acc, 0.0))
    }

    pub(crate) fn from_acc(lat: Arc<Lattice>, degree_cap: u32, acc: FxHashMap<Key, Complex64>, budget: f64) -> Self {
        let mut terms: Vec<(Key, Complex64)> = acc.into_iter().filter(|(_, c)| c.norm() >= ZERO_TOL).collect();
        terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Hamiltonian { lat, degree_cap, terms, budget }
    }

    /// Terms must already be sorted and distinct.
    pub(crate) fn from_sorted(lat: Arc<Lattice>, degree_cap: u32, terms: Vec<(Key, Complex64)>, budget: f64) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].0 < w[1].0));
        Hamiltonian { lat, degree_cap, terms, budget }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lat
    }

    pub fn degree_cap(&self) -> u32 {
        self.degree_cap
    }

    pub fn with_degree_cap(mut self, cap: u32) -> Result<Self> {
        if let Some(d) = self.max_degree() {
            if d > cap {
                return Err(Error::Capacity(format!("degree {d} exceeds new cap {cap}")));
            }
        }
        self.degree_cap = cap;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Accumulated mass of pruned or truncated coefficients.
    pub fn error_budget(&self) -> f64 {
        self.budget
    }

    pub fn with_budget(mut self, b: f64) -> Self {
        self.budget = b;
        self
    }

    pub(crate) fn raw(&self) -> &[(Key, Complex64)] {
        &self.terms
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms.iter().map(|(k, _)| key_degree(k)).max()
    }

    pub fn terms(&self) -> Vec<Term> {
        self.terms.iter().map(|(k, c)| key_term(&self.lat, k, *c)).collect()
    }

    pub fn coeff(&self, t: &Term) -> Result<Complex64> {
        let key = term_key(&self.lat, t)?;
        Ok(self
            .terms
            .binary_search_by(|(k, _)| k.as_slice().cmp(key.as_slice()))
            .map(|i| self.terms[i].1)
            .unwrap_or_default())
    }

    pub fn has_j(&self) -> bool {
        self.terms.iter().any(|(k, _)| key_has_j(k))
    }

    /// Sum of coefficient moduli.
    pub fn l1(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Complex64) -> Hamiltonian {
        linear_combine(c, self, Complex64::new(0.0, 0.0), self).expect("same params")
    }

    pub(crate) fn check_compatible(&self, o: &Hamiltonian) -> Result<()> {
        if *self.lat != *o.lat {
            return arg("Hamiltonians live on different lattices or parameters");
        }
        Ok(())
    }

    /// Keeps the terms selected by `f`.
    pub fn filter(&self, mut f: impl FnMut(&Term) -> bool) -> Hamiltonian {
        let terms = self.terms.iter().filter(|(k, c)| f(&key_term(&self.lat, k, *c))).cloned().collect();
        Hamiltonian::from_sorted(self.lat.clone(), self.degree_cap, terms, self.budget)
    }

    /// Largest violation of `coeff(a,k,k') = conj(coeff(a,k',k))`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, c) in &self.terms {
            let swapped = swap_key(k);
            let other = self
                .terms
                .binary_search_by(|(kk, _)| kk.as_slice().cmp(swapped.as_slice()))
                .map(|i| self.terms[i].1)
                .unwrap_or_default();
            worst = worst.max((c - other.conj()).norm());
        }
        worst
    }

    /// Every term is mass and momentum conserving.
    pub fn all_conserving(&self) -> bool {
        self.terms().iter().all(|t| {
            let (m, p) = crate::lattice::conservation_check(&t.k, &t.k_bar);
            m && p
        })
    }
}

/// Swaps `q` and `qbar` letters.
pub(crate) fn swap_key(k: &[u32]) -> Key {
    let mut out: Key = k
        .iter()
        .map(|&l| match lkind(l) {
            KQ => letter(lid(l), KB),
            KB => letter(lid(l), KQ),
            _ => l,
        })
        .collect();
    out.sort_unstable();
    out
}

pub(crate) fn term_key(lat: &Lattice, t: &Term) -> Result<Key> {
    if t.jmodes.len() > 2 {
        return arg(format!("term has {} J factors, at most 2 allowed", t.jmodes.len()));
    }
    let mut key = Key::new();
    for (n, e) in t.a.iter() {
        let id = lat.id_or_err(n)?;
        key.extend(std::iter::repeat(letter(id, KA)).take(e as usize));
    }
    for (n, e) in t.k.iter() {
        let id = lat.id_or_err(n)?;
        key.extend(std::iter::repeat(letter(id, KQ)).take(e as usize));
    }
    for (n, e) in t.k_bar.iter() {
        let id = lat.id_or_err(n)?;
        key.extend(std::iter::repeat(letter(id, KB)).take(e as usize));
    }
    for n in &t.jmodes {
        key.push(letter(lat.id_or_err(n)?, KJ));
    }
    key.sort_unstable();
    Ok(key)
}

pub(crate) fn key_term(lat: &Lattice, k: &[u32], coeff: Complex64) -> Term {
    let mut a = Vec::new();
    let mut q = Vec::new();
    let mut b = Vec::new();
    let mut j = Vec::new();
    for (id, e) in key_modes(k) {
        let n = lat.mode(id);
        if e[0] > 0 {
            a.push((n.clone(), e[0]));
        }
        if e[1] > 0 {
            q.push((n.clone(), e[1]));
        }
        if e[2] > 0 {
            b.push((n.clone(), e[2]));
        }
        for _ in 0..e[3] {
            j.push(n.clone());
        }
    }
    Term {
        a: MultiIndex::from_pairs(a),
        k: MultiIndex::from_pairs(q),
        k_bar: MultiIndex::from_pairs(b),
        jmodes: j,
        coeff,
    }
}

/// `c1 H1 + c2 H2`
pub fn linear_combine(c1: Complex64, h1: &Hamiltonian, c2: Complex64, h2: &Hamiltonian) -> Result<Hamiltonian> {
    h1.check_compatible(h2)?;
    let (a, b) = (&h1.terms, &h2.terms);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let push = |out: &mut Vec<(Key, Complex64)>, k: &Key, c: Complex64| {
        if c.norm() >= ZERO_TOL {
            out.push((k.clone(), c));
        }
    };
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        };
        match ord {
            std::cmp::Ordering::Less => {
                push(&mut out, &a[i].0, c1 * a[i].1);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                push(&mut out, &b[j].0, c2 * b[j].1);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                push(&mut out, &a[i].0, c1 * a[i].1 + c2 * b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    let budget = c1.norm() * h1.budget + c2.norm() * h2.budget;
    let cap = h1.degree_cap.max(h2.degree_cap);
    Ok(Hamiltonian::from_sorted(h1.lat.clone(), cap, out, budget))
}

/// Sum of several Hamiltonians with real weights.
pub fn sum_scaled(parts: &[(f64, &Hamiltonian)]) -> Result<Hamiltonian> {
    let first = parts.first().ok_or_else(|| Error::Argument("empty sum".into()))?;
    let mut acc = Hamiltonian::zero(first.1.lat.clone(), first.1.degree_cap);
    for (c, h) in parts {
        acc = linear_combine(Complex64::new(1.0, 0.0), &acc, Complex64::new(*c, 0.0), h)?;
    }
    Ok(acc)
}

/// Termwise product with exponent addition.
pub fn multiply(h1: &Hamiltonian, h2: &Hamiltonian) -> Result<Hamiltonian> {
    h1.check_compatible(h2)?;
    let cap = h1.degree_cap.max(h2.degree_cap);
    let mut acc: FxHashMap<Key, Complex64> = FxHashMap::default();
    for (k1, c1) in &h1.terms {
        let d1 = key_degree(k1);
        for (k2, c2) in &h2.terms {
            let d = d1 + key_degree(k2);
            if d > cap {
                return Err(Error::Capacity(format!("product degree {d} exceeds cap {cap}")));
            }
            *acc.entry(merge_keys(k1, k2)).or_default() += c1 * c2;
        }
    }
    let budget = h1.budget * h2.l1() + h1.l1() * h2.budget;
    Ok(Hamiltonian::from_acc(h1.lat.clone(), cap, acc, budget))
}

/// The quadratic normal form `sum Omega_n |q_n|^2`.
pub fn diagonal(lat: Arc<Lattice>, degree_cap: u32, omega: &[f64]) -> Hamiltonian {
    let terms = (0..lat.len())
        .filter(|&i| omega[i] != 0.0)
        .map(|i| {
            let id = i as u16;
            let k: Key = [letter(id, KQ), letter(id, KB)].into_iter().collect();
            (k, Complex64::new(omega[i], 0.0))
        })
        .collect();
    Hamiltonian::from_sorted(lat, degree_cap, terms, 0.0)
}
