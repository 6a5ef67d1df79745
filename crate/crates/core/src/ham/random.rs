//! Random conserving Hamiltonians for property tests and lemma checks.

use super::{linear_combine, swap_key, Hamiltonian, Term};
use crate::lattice::{ModeIndex, MultiIndex};
use crate::modes::Lattice;
use num_complex::Complex64;
use rand::Rng;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct RandomSpec {
    pub terms: usize,
    /// degree counted as `2|a| + |k| + |k'|`
    pub max_degree: u32,
    pub min_degree: u32,
    /// enforce `|k| = |k'|`
    pub mass: bool,
    pub a_prob: f64,
    pub degree_cap: u32,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec { terms: 10, max_degree: 4, min_degree: 2, mass: true, a_prob: 0.3, degree_cap: 12 }
    }
}

/// Uniform point of the closed unit disk.
pub fn unit_disk<R: Rng>(rng: &mut R) -> Complex64 {
    loop {
        let z = Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        if z.norm_sqr() <= 1.0 {
            return z;
        }
    }
}

/// One momentum-conserving `(a, k, k')` on the lattice, `None` if repair failed.
pub fn random_multi_index<R: Rng>(
    lat: &Lattice,
    spec: &RandomSpec,
    rng: &mut R,
) -> Option<(MultiIndex, MultiIndex, MultiIndex)> {
    let modes = lat.modes();
    let pick = |rng: &mut R| modes[rng.gen_range(0..modes.len())].clone();
    let deg = rng.gen_range(spec.min_degree.max(2)..=spec.max_degree.max(2));
    let na = if rng.gen_bool(spec.a_prob) && deg >= 4 { rng.gen_range(1..=((deg - 2) / 2)) } else { 0 };
    let rest = deg - 2 * na;
    let (nk, nkb) = if spec.mass {
        if rest % 2 == 1 {
            return None;
        }
        (rest / 2, rest / 2)
    } else {
        let nk = rng.gen_range(1..rest);
        (nk, rest - nk)
    };
    if nkb == 0 {
        return None;
    }
    let a: Vec<ModeIndex> = (0..na).map(|_| pick(rng)).collect();
    let k: Vec<ModeIndex> = (0..nk).map(|_| pick(rng)).collect();
    let mut kb: Vec<ModeIndex> = (0..nkb - 1).map(|_| pick(rng)).collect();
    let d = lat.params.d;
    let mut last = vec![0i32; d];
    for n in &k {
        for (l, c) in last.iter_mut().zip(&n.0) {
            *l += c;
        }
    }
    for n in &kb {
        for (l, c) in last.iter_mut().zip(&n.0) {
            *l -= c;
        }
    }
    let last = ModeIndex(last);
    lat.id(&last)?;
    kb.push(last);
    Some((MultiIndex::from_modes(&a), MultiIndex::from_modes(&k), MultiIndex::from_modes(&kb)))
}

pub fn random_hamiltonian<R: Rng>(lat: &Arc<Lattice>, spec: &RandomSpec, rng: &mut R) -> Hamiltonian {
    let mut terms = Vec::with_capacity(spec.terms);
    let mut tries = 0;
    while terms.len() < spec.terms && tries < 1000 * spec.terms.max(1) {
        tries += 1;
        if let Some((a, k, kb)) = random_multi_index(lat, spec, rng) {
            terms.push(Term::new(a, k, kb, unit_disk(rng)));
        }
    }
    Hamiltonian::from_terms(lat.clone(), spec.degree_cap.max(spec.max_degree), terms)
        .expect("generated terms fit the lattice")
}

/// `(H + H*) / 2` with `H*(a,k,k') = conj H(a,k',k)`.
pub fn realify(h: &Hamiltonian) -> Hamiltonian {
    let terms: Vec<_> = h.raw().iter().map(|(k, c)| (swap_key(k), c.conj())).collect();
    let mut acc = rustc_hash::FxHashMap::default();
    for (k, c) in terms {
        *acc.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
    }
    let star = Hamiltonian::from_acc(h.lat.clone(), h.degree_cap, acc, h.budget);
    linear_combine(Complex64::new(0.5, 0.0), h, Complex64::new(0.5, 0.0), &star).expect("same lattice")
}

pub fn random_real_hamiltonian<R: Rng>(lat: &Arc<Lattice>, spec: &RandomSpec, rng: &mut R) -> Hamiltonian {
    realify(&random_hamiltonian(lat, spec, rng))
}
