//! Lattice modes, exponent maps and the log-power weights.

use crate::error::{arg, Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

/// A point of the Fourier lattice `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeIndex(pub Vec<i32>);

impl ModeIndex {
    pub fn new(coords: impl Into<Vec<i32>>) -> Self {
        ModeIndex(coords.into())
    }

    pub fn zero(d: usize) -> Self {
        ModeIndex(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn add_scaled(&self, other: &ModeIndex, t: i32) -> ModeIndex {
        ModeIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + t * b).collect())
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Descending Euclidean norm, ties broken lexicographically.
pub fn norm_order(a: &ModeIndex, b: &ModeIndex) -> Ordering {
    b.norm_sq().cmp(&a.norm_sq()).then_with(|| a.cmp(b))
}

/// Finitely supported map from modes to positive integers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<(ModeIndex, u32)>);

impl MultiIndex {
    pub fn new() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn unit(n: ModeIndex) -> Self {
        MultiIndex(vec![(n, 1)])
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (ModeIndex, u32)>) -> Self {
        let mut m = BTreeMap::new();
        for (n, e) in pairs {
            *m.entry(n).or_insert(0) += e;
        }
        MultiIndex(m.into_iter().filter(|(_, e)| *e > 0).collect())
    }

    /// Builds from a list of modes with repetition.
    pub fn from_modes<'a>(modes: impl IntoIterator<Item = &'a ModeIndex>) -> Self {
        Self::from_pairs(modes.into_iter().map(|n| (n.clone(), 1)))
    }

    pub fn get(&self, n: &ModeIndex) -> u32 {
        self.0.binary_search_by(|(m, _)| m.cmp(n)).map(|i| self.0[i].1).unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModeIndex, u32)> {
        self.0.iter().map(|(n, e)| (n, *e))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|k| = sum of entries`
    pub fn total(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        Self::from_pairs(self.0.iter().chain(other.0.iter()).cloned())
    }

    pub fn support(&self) -> impl Iterator<Item = &ModeIndex> {
        self.0.iter().map(|(n, _)| n)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        for (i, (n, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            if *e == 1 {
                write!(f, "e{n}")?;
            } else {
                write!(f, "{e}e{n}")?;
            }
        }
        Ok(())
    }
}

/// Signed exponent vector stored as positive and negative parts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedIndex {
    pub pos: MultiIndex,
    pub neg: MultiIndex,
}

impl SignedIndex {
    /// `k - k'` with cancellation.
    pub fn difference(k: &MultiIndex, k_bar: &MultiIndex) -> Self {
        let mut m: BTreeMap<ModeIndex, i64> = BTreeMap::new();
        for (n, e) in k.iter() {
            *m.entry(n.clone()).or_insert(0) += e as i64;
        }
        for (n, e) in k_bar.iter() {
            *m.entry(n.clone()).or_insert(0) -= e as i64;
        }
        Self::from_signed(m)
    }

    pub fn from_signed(entries: impl IntoIterator<Item = (ModeIndex, i64)>) -> Self {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (n, v) in entries {
            match v.cmp(&0) {
                Ordering::Greater => pos.push((n, v as u32)),
                Ordering::Less => neg.push((n, (-v) as u32)),
                Ordering::Equal => {}
            }
        }
        SignedIndex { pos: MultiIndex::from_pairs(pos), neg: MultiIndex::from_pairs(neg) }
    }

    pub fn entries(&self) -> Vec<(ModeIndex, i64)> {
        let mut v: Vec<(ModeIndex, i64)> = self
            .pos
            .iter()
            .map(|(n, e)| (n.clone(), e as i64))
            .chain(self.neg.iter().map(|(n, e)| (n.clone(), -(e as i64))))
            .collect();
        v.sort();
        v
    }

    pub fn is_zero(&self) -> bool {
        self.pos.is_empty() && self.neg.is_empty()
    }

    /// `|l| = sum |l_n|`
    pub fn abs_total(&self) -> u32 {
        self.pos.total() + self.neg.total()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub d: usize,
    pub sigma: f64,
    pub floor_const: f64,
}

impl LatticeParams {
    pub const DEFAULT_FLOOR: f64 = 1024.0;

    pub fn new(d: usize, sigma: f64, floor_const: f64) -> Result<Self> {
        let p = LatticeParams { d, sigma, floor_const };
        p.validate()?;
        Ok(p)
    }

    pub fn with_default_floor(d: usize, sigma: f64) -> Result<Self> {
        Self::new(d, sigma, Self::DEFAULT_FLOOR)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return arg("d must be positive");
        }
        if !(self.sigma > 2.0) || !self.sigma.is_finite() {
            return arg(format!("sigma must exceed 2, got {}", self.sigma));
        }
        if !(self.floor_const >= 21.0) || !self.floor_const.is_finite() {
            return arg(format!("floor_const must be at least 21, got {}", self.floor_const));
        }
        Ok(())
    }

    /// Weight as a function of the Euclidean norm.
    pub fn weight_of_norm(&self, euclid: f64) -> f64 {
        euclid.max(self.floor_const).ln().powf(self.sigma)
    }
}

/// `(||n||, <n>, floor(n))`
pub fn mode_norms(n: &ModeIndex, p: &LatticeParams) -> Result<(f64, f64, f64)> {
    if n.dim() != p.d {
        return arg(format!("mode {n} has dimension {}, expected {}", n.dim(), p.d));
    }
    let e = n.norm();
    Ok((e, e.max(1.0), e.max(p.floor_const)))
}

/// `ln^sigma floor(n)`
pub fn weight(n: &ModeIndex, p: &LatticeParams) -> f64 {
    p.weight_of_norm(n.norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SortedSystem {
    pub modes: Vec<ModeIndex>,
}

impl SortedSystem {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `n_i^*`, 1-based like the usual notation.
    pub fn nth(&self, i: usize) -> Option<&ModeIndex> {
        i.checked_sub(1).and_then(|j| self.modes.get(j))
    }

    /// Sum of weights from position `i` (1-based) on.
    pub fn tail_weight(&self, from: usize, p: &LatticeParams) -> f64 {
        self.modes.iter().skip(from.saturating_sub(1)).map(|n| weight(n, p)).sum()
    }
}

pub fn sorted_system(a: &MultiIndex, k: &MultiIndex, k_bar: &MultiIndex, jmodes: &[ModeIndex]) -> Result<SortedSystem> {
    if jmodes.len() > 2 {
        return arg(format!("at most two J modes allowed, got {}", jmodes.len()));
    }
    let mut modes = Vec::new();
    for (n, e) in a.iter() {
        modes.extend(std::iter::repeat(n.clone()).take(2 * e as usize));
    }
    for (n, e) in k.iter().chain(k_bar.iter()) {
        modes.extend(std::iter::repeat(n.clone()).take(e as usize));
    }
    for m in jmodes {
        modes.push(m.clone());
        modes.push(m.clone());
    }
    modes.sort_by(norm_order);
    Ok(SortedSystem { modes })
}

/// Sorted system of a signed vector, each mode repeated `|l_n|` times.
pub fn sorted_system_signed(l: &SignedIndex) -> SortedSystem {
    let mut modes = Vec::new();
    for (n, e) in l.pos.iter().chain(l.neg.iter()) {
        modes.extend(std::iter::repeat(n.clone()).take(e as usize));
    }
    modes.sort_by(norm_order);
    SortedSystem { modes }
}

/// `sum (k_n - k'_n) n`
pub fn momentum_defect(k: &MultiIndex, k_bar: &MultiIndex) -> Vec<i64> {
    let d = k.support().chain(k_bar.support()).map(|n| n.dim()).next().unwrap_or(0);
    let mut v = vec![0i64; d];
    for (n, e) in k.iter() {
        for (vi, c) in v.iter_mut().zip(&n.0) {
            *vi += e as i64 * *c as i64;
        }
    }
    for (n, e) in k_bar.iter() {
        for (vi, c) in v.iter_mut().zip(&n.0) {
            *vi -= e as i64 * *c as i64;
        }
    }
    v
}

/// `(mass, momentum)` flags.
pub fn conservation_check(k: &MultiIndex, k_bar: &MultiIndex) -> (bool, bool) {
    let mass = k.total() as i64 == k_bar.total() as i64;
    let momentum = momentum_defect(k, k_bar).iter().all(|&c| c == 0);
    (mass, momentum)
}

/// `S - 2 w(n1*) - 1/2 sum_{i>=3} w(n_i*)`, nonnegative under momentum conservation.
pub fn gap(a: &MultiIndex, k: &MultiIndex, k_bar: &MultiIndex, p: &LatticeParams) -> Result<f64> {
    if !conservation_check(k, k_bar).1 {
        return Err(Error::Precondition(format!("momentum not conserved for k={k} k_bar={k_bar}")));
    }
    let sys = sorted_system(a, k, k_bar, &[])?;
    Ok(gap_of_weights(&sys.modes.iter().map(|n| weight(n, p)).collect::<Vec<_>>()))
}

/// Gap from a list of weights sorted descending.
pub fn gap_of_weights(w: &[f64]) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    let s: f64 = w.iter().sum();
    let tail: f64 = w.iter().skip(2).sum();
    s - 2.0 * w[0] - 0.5 * tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(c: &[i32]) -> ModeIndex {
        ModeIndex::new(c.to_vec())
    }

    #[test]
    fn norms_of_small_modes() {
        let p = LatticeParams::with_default_floor(2, 2.5).unwrap();
        assert_eq!(mode_norms(&m(&[0, 0]), &p).unwrap(), (0.0, 1.0, 1024.0));
        assert_eq!(mode_norms(&m(&[3, 4]), &p).unwrap(), (5.0, 5.0, 1024.0));
        let p1 = LatticeParams::with_default_floor(1, 2.5).unwrap();
        assert_eq!(mode_norms(&m(&[2000]), &p1).unwrap(), (2000.0, 2000.0, 2000.0));
        assert!(mode_norms(&m(&[1]), &p).is_err());
    }

    #[test]
    fn weight_at_floor() {
        let p = LatticeParams::with_default_floor(2, 2.5).unwrap();
        let expect = (10.0 * std::f64::consts::LN_2).powf(2.5);
        assert!((weight(&m(&[1, 0]), &p) - expect).abs() < 1e-9);
        assert!((expect - 126.49).abs() < 0.01);
        let far = m(&[2784, 0]);
        assert!(weight(&far, &p) > weight(&m(&[1, 0]), &p));
        let p3 = LatticeParams::with_default_floor(2, 3.0).unwrap();
        assert!(weight(&m(&[1, 0]), &p3) > weight(&m(&[1, 0]), &p));
    }

    #[test]
    fn sorted_system_examples() {
        let k = MultiIndex::from_modes(&[m(&[3, 4]), m(&[0, 1])]);
        let s = sorted_system(&MultiIndex::new(), &k, &MultiIndex::new(), &[]).unwrap();
        assert_eq!(s.modes, vec![m(&[3, 4]), m(&[0, 1])]);
        let a = MultiIndex::unit(m(&[1, 0]));
        let s = sorted_system(&a, &MultiIndex::new(), &MultiIndex::new(), &[]).unwrap();
        assert_eq!(s.modes, vec![m(&[1, 0]), m(&[1, 0])]);
        let e = MultiIndex::new();
        let s = sorted_system(&e, &e, &e, &[m(&[2, 0])]).unwrap();
        assert_eq!(s.modes, vec![m(&[2, 0]), m(&[2, 0])]);
        assert!(sorted_system(&e, &e, &e, &[m(&[0, 0]), m(&[0, 0]), m(&[0, 0])]).is_err());
    }

    #[test]
    fn ties_are_lexicographic() {
        let k = MultiIndex::from_modes(&[m(&[0, 1]), m(&[1, 0]), m(&[-1, 0])]);
        let s = sorted_system(&MultiIndex::new(), &k, &MultiIndex::new(), &[]).unwrap();
        assert_eq!(s.modes, vec![m(&[-1, 0]), m(&[0, 1]), m(&[1, 0])]);
    }

    #[test]
    fn conservation_examples() {
        let k = MultiIndex::from_modes(&[m(&[1]), m(&[-1])]);
        let kb = MultiIndex::from_pairs([(m(&[0]), 2)]);
        assert_eq!(conservation_check(&k, &kb), (true, true));
        let k = MultiIndex::unit(m(&[1, 0]));
        let kb = MultiIndex::unit(m(&[0, 1]));
        assert_eq!(conservation_check(&k, &kb), (true, false));
        let k = MultiIndex::from_pairs([(m(&[1]), 2)]);
        let kb = MultiIndex::unit(m(&[2]));
        assert_eq!(conservation_check(&k, &kb), (false, true));
        assert_eq!(momentum_defect(&k, &kb), momentum_defect(&kb, &k).iter().map(|c| -c).collect::<Vec<_>>());
    }

    #[test]
    fn gap_examples() {
        let p = LatticeParams::with_default_floor(1, 2.5).unwrap();
        let e = MultiIndex::new();
        assert_eq!(gap(&e, &e, &e, &p).unwrap(), 0.0);
        let k = MultiIndex::from_modes(&[m(&[1]), m(&[-1])]);
        let kb = MultiIndex::from_pairs([(m(&[0]), 2)]);
        let w = 1024f64.ln().powf(2.5);
        assert!((gap(&e, &k, &kb, &p).unwrap() - w).abs() < 1e-9);
        let bad = MultiIndex::unit(m(&[1]));
        assert!(matches!(gap(&e, &bad, &e, &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn signed_difference() {
        let k = MultiIndex::from_pairs([(m(&[1]), 2), (m(&[0]), 1)]);
        let kb = MultiIndex::from_pairs([(m(&[1]), 1), (m(&[2]), 1)]);
        let l = SignedIndex::difference(&k, &kb);
        assert_eq!(l.entries(), vec![(m(&[0]), 1), (m(&[1]), 1), (m(&[2]), -1)]);
        assert_eq!(l.abs_total(), 3);
    }

    #[test]
    fn params_validation() {
        assert!(LatticeParams::new(1, 2.0, 1024.0).is_err());
        assert!(LatticeParams::new(1, 2.5, 20.0).is_err());
        assert!(LatticeParams::new(0, 2.5, 1024.0).is_err());
        assert!(LatticeParams::new(2, 2.1, 21.0).is_ok());
    }
}
