//! Poisson bracket `{F,G} = i sum_j (dF/dq_j dG/dqbar_j - dF/dqbar_j dG/dq_j)`.
//!
//! Contributions to one output key are summed in an order fixed by the
//! unordered pair of input keys, so `{F,G} + {G,F}` cancels exactly and the
//! result does not depend on how the work was split across threads.

use super::collect::{canonicalize, Repr};
use super::{key_degree, key_has_j, key_modes, letter, merge_keys, remove_one, Hamiltonian, Key, KB, KQ};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHasher};
use smallvec::SmallVec;
use std::hash::{Hash, Hasher};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegreePolicy {
    /// overflow is a capacity error
    Strict,
    /// overflowing terms are dropped and charged to the error budget
    Truncate,
}

#[derive(Clone, Copy, Debug)]
pub struct BracketOpts {
    pub prune_tol: f64,
    pub degree: DegreePolicy,
}

impl Default for BracketOpts {
    fn default() -> Self {
        BracketOpts { prune_tol: 0.0, degree: DegreePolicy::Strict }
    }
}

// work unit size; fixed so results never depend on the thread count
const CHUNK: usize = 32;

pub fn poisson_bracket(f: &Hamiltonian, g: &Hamiltonian) -> Result<Hamiltonian> {
    bracket_with(f, g, &BracketOpts::default())
}

fn key_hash(k: &[u32]) -> u64 {
    let mut h = FxHasher::default();
    k.hash(&mut h);
    h.finish()
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

type Contribs = SmallVec<[(u64, Complex64); 2]>;

struct Summary {
    modes: SmallVec<[(u16, i64, i64); 6]>,
    deg: u32,
    hash: u64,
}

fn summarize(h: &Hamiltonian) -> Vec<Summary> {
    h.raw()
        .iter()
        .map(|(k, _)| Summary {
            modes: key_modes(k)
                .into_iter()
                .filter(|(_, e)| e[1] + e[2] > 0)
                .map(|(id, e)| (id, e[1] as i64, e[2] as i64))
                .collect(),
            deg: key_degree(k),
            hash: key_hash(k),
        })
        .collect()
}

pub fn bracket_with(f: &Hamiltonian, g: &Hamiltonian, opts: &BracketOpts) -> Result<Hamiltonian> {
    f.check_compatible(g)?;
    let fe_own;
    let fe = if f.raw().iter().any(|(k, _)| key_has_j(k)) {
        fe_own = canonicalize(f, Repr::Expanded);
        &fe_own
    } else {
        f
    };
    let ge_own;
    let ge = if g.raw().iter().any(|(k, _)| key_has_j(k)) {
        ge_own = canonicalize(g, Repr::Expanded);
        &ge_own
    } else {
        g
    };
    let cap = f.degree_cap.max(g.degree_cap);
    let lat = f.lat.clone();
    let fs = summarize(fe);
    let gs = summarize(ge);
    let mut index: Vec<Vec<(u32, i64, i64)>> = vec![Vec::new(); lat.len()];
    for (gi, s) in gs.iter().enumerate() {
        for &(id, kq, kb) in &s.modes {
            index[id as usize].push((gi as u32, kq, kb));
        }
    }
    let fterms = fe.raw();
    let gterms = ge.raw();

    let chunk_results: Vec<(FxHashMap<Key, Contribs>, f64, Option<u32>)> = (0..fterms.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idxs| {
            let mut acc: FxHashMap<Key, Contribs> = FxHashMap::default();
            let mut overflow = 0.0;
            let mut overflow_deg = None;
            for &fi in idxs {
                let (fk, fc) = &fterms[fi];
                let sf = &fs[fi];
                for &(j, kf, kbf) in &sf.modes {
                    for &(gi, kg, kbg) in &index[j as usize] {
                        let fac = kf * kbg - kbf * kg;
                        if fac == 0 {
                            continue;
                        }
                        let sg = &gs[gi as usize];
                        let (gk, gc) = &gterms[gi as usize];
                        let p = fc * gc;
                        let fac = fac as f64;
                        let v = Complex64::new(-p.im * fac, p.re * fac);
                        let deg = sf.deg + sg.deg - 2;
                        if deg > cap {
                            overflow += v.norm();
                            overflow_deg = Some(deg);
                            continue;
                        }
                        let (lo, hi) = if sf.hash <= sg.hash { (sf.hash, sg.hash) } else { (sg.hash, sf.hash) };
                        let tag = mix(lo ^ mix(hi ^ mix(j as u64)));
                        let mut key = merge_keys(fk, gk);
                        remove_one(&mut key, letter(j, KQ));
                        remove_one(&mut key, letter(j, KB));
                        acc.entry(key).or_default().push((tag, v));
                    }
                }
            }
            (acc, overflow, overflow_deg)
        })
        .collect();

    let mut overflow = 0.0;
    let mut overflow_deg = None;
    let mut all: FxHashMap<Key, Contribs> = FxHashMap::default();
    for (acc, o, od) in chunk_results {
        overflow += o;
        if od.is_some() {
            overflow_deg = od;
        }
        for (k, v) in acc {
            all.entry(k).or_default().extend(v);
        }
    }
    if let (Some(d), DegreePolicy::Strict) = (overflow_deg, opts.degree) {
        return Err(Error::Capacity(format!("bracket produces degree {d} above cap {cap}")));
    }

    let mut pruned = 0.0;
    let mut terms: Vec<(Key, Complex64)> = all
        .into_par_iter()
        .filter_map(|(k, mut v)| {
            v.sort_unstable_by(|a, b| {
                a.0.cmp(&b.0)
                    .then(a.1.re.to_bits().cmp(&b.1.re.to_bits()))
                    .then(a.1.im.to_bits().cmp(&b.1.im.to_bits()))
            });
            let mut total = Complex64::new(0.0, 0.0);
            let mut i = 0;
            while i < v.len() {
                let mut group = v[i].1;
                let mut j = i + 1;
                while j < v.len() && v[j].0 == v[i].0 {
                    group += v[j].1;
                    j += 1;
                }
                total += group;
                i = j;
            }
            Some((k, total))
        })
        .collect();
    terms.retain(|(_, c)| {
        let a = c.norm();
        if a < opts.prune_tol.max(super::ZERO_TOL) {
            pruned += a;
            false
        } else {
            true
        }
    });
    terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let df = fe.max_degree().unwrap_or(0) as f64;
    let dg = ge.max_degree().unwrap_or(0) as f64;
    let inherited = (f.budget * ge.l1() + fe.l1() * g.budget) * df.max(1.0) * dg.max(1.0);
    Ok(Hamiltonian::from_sorted(lat, cap, terms, pruned + overflow + inherited))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ham::random::{random_hamiltonian, RandomSpec};
    use crate::ham::{linear_combine, Term};
    use crate::lattice::{LatticeParams, ModeIndex, MultiIndex};
    use crate::modes::Lattice;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(c: i32) -> ModeIndex {
        ModeIndex::new(vec![c])
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn hand_example() {
        // {q_n qbar_m, q_m qbar_n} = i (|q_m|^2 - |q_n|^2)
        let lat = Lattice::new(LatticeParams::with_default_floor(1, 2.5).unwrap(), 1.0, 1).unwrap();
        let (n, mm) = (m(1), m(0));
        let f = Hamiltonian::from_terms(
            lat.clone(),
            4,
            [Term::new(MultiIndex::new(), MultiIndex::unit(n.clone()), MultiIndex::unit(mm.clone()), one())],
        )
        .unwrap();
        let g = Hamiltonian::from_terms(
            lat.clone(),
            4,
            [Term::new(MultiIndex::new(), MultiIndex::unit(mm.clone()), MultiIndex::unit(n.clone()), one())],
        )
        .unwrap();
        let b = poisson_bracket(&f, &g).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let expect = Hamiltonian::from_terms(
            lat,
            4,
            [
                Term::new(MultiIndex::new(), MultiIndex::unit(mm.clone()), MultiIndex::unit(mm), i),
                Term::new(MultiIndex::new(), MultiIndex::unit(n.clone()), MultiIndex::unit(n), -i),
            ],
        )
        .unwrap();
        assert_eq!(b, expect);
    }

    #[test]
    fn antisymmetry_is_exact() {
        let lat = Lattice::new(LatticeParams::new(2, 2.5, 32.0).unwrap(), 1.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = RandomSpec { terms: 20, max_degree: 4, ..Default::default() };
        for _ in 0..20 {
            let f = random_hamiltonian(&lat, &spec, &mut rng);
            let g = random_hamiltonian(&lat, &spec, &mut rng);
            let fg = poisson_bracket(&f, &g).unwrap();
            let gf = poisson_bracket(&g, &f).unwrap();
            assert!(linear_combine(one(), &fg, one(), &gf).unwrap().is_empty());
            assert!(poisson_bracket(&f, &f).unwrap().is_empty());
        }
    }

    #[test]
    fn capacity_policy() {
        let lat = Lattice::new(LatticeParams::with_default_floor(1, 2.5).unwrap(), 1.0, 1).unwrap();
        let f = Hamiltonian::from_terms(
            lat,
            4,
            [Term::new(
                MultiIndex::new(),
                MultiIndex::from_pairs([(m(1), 2)]),
                MultiIndex::from_pairs([(m(0), 2)]),
                one(),
            )],
        )
        .unwrap();
        let g = f.clone();
        let h = bracket_with(
            &f,
            &crate::ham::collect::canonicalize(&g, Repr::Expanded).scale(Complex64::new(0.0, 1.0)),
            &BracketOpts::default(),
        );
        assert!(h.is_ok());
        let conj = Hamiltonian::from_terms(
            f.lattice().clone(),
            4,
            [Term::new(
                MultiIndex::new(),
                MultiIndex::from_pairs([(m(0), 2)]),
                MultiIndex::from_pairs([(m(1), 2)]),
                one(),
            )],
        )
        .unwrap();
        assert!(matches!(poisson_bracket(&f, &conj), Err(Error::Capacity(_))));
        let t = bracket_with(&f, &conj, &BracketOpts { prune_tol: 0.0, degree: DegreePolicy::Truncate }).unwrap();
        assert!(t.is_empty());
        assert!(t.error_budget() > 0.0);
    }
}
