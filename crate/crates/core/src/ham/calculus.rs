use super::collect::{canonicalize, Repr};
use super::{key_has_j, letter, lid, lkind, remove_one, Hamiltonian, Key, StatePoint, KA, KB, KJ, KQ};
use crate::error::Result;
use crate::lattice::ModeIndex;
use crate::modes::Lattice;
use num_complex::Complex64;
use std::collections::BTreeMap;

fn expanded(h: &Hamiltonian) -> std::borrow::Cow<'_, Hamiltonian> {
    if h.raw().iter().any(|(k, _)| key_has_j(k)) {
        std::borrow::Cow::Owned(canonicalize(h, Repr::Expanded))
    } else {
        std::borrow::Cow::Borrowed(h)
    }
}

/// `dH/dq_n`, or `dH/dqbar_n` when `conjugate`.
pub fn partial(h: &Hamiltonian, n: &ModeIndex, conjugate: bool) -> Result<Hamiltonian> {
    let id = h.lat.id_or_err(n)?;
    let target = letter(id, if conjugate { KB } else { KQ });
    let e = expanded(h);
    let mut acc = rustc_hash::FxHashMap::default();
    for (k, c) in e.raw() {
        let cnt = k.iter().filter(|&&l| l == target).count();
        if cnt == 0 {
            continue;
        }
        let mut kk: Key = k.clone();
        remove_one(&mut kk, target);
        *acc.entry(kk).or_insert(Complex64::new(0.0, 0.0)) += c * cnt as f64;
    }
    Ok(Hamiltonian::from_acc(h.lat.clone(), h.degree_cap, acc, h.budget))
}

pub fn second_partial(
    h: &Hamiltonian,
    n: &ModeIndex,
    m: &ModeIndex,
    conj_n: bool,
    conj_m: bool,
) -> Result<Hamiltonian> {
    partial(&partial(h, n, conj_n)?, m, conj_m)
}

fn letter_value(lat: &Lattice, l: u32, q: &[Complex64]) -> Complex64 {
    let id = lid(l);
    let z = q[id as usize];
    match lkind(l) {
        KA => Complex64::new(lat.i0(id), 0.0),
        KQ => z,
        KB => z.conj(),
        _ => Complex64::new(z.norm_sqr() - lat.i0(id), 0.0),
    }
}

fn eval_dense(h: &Hamiltonian, q: &[Complex64]) -> Complex64 {
    h.raw().iter().map(|(k, c)| k.iter().fold(*c, |acc, &l| acc * letter_value(&h.lat, l, q))).sum()
}

/// Value of `H` at `x`, with `qbar = conj(q)`.
pub fn eval(h: &Hamiltonian, x: &StatePoint) -> Result<Complex64> {
    Ok(eval_dense(h, &x.dense(&h.lat)?))
}

/// `(dH/dqbar_n, dH/dq_n)` at `x` for every mode.
fn gradients(h: &Hamiltonian, x: &StatePoint) -> Result<Vec<(Complex64, Complex64)>> {
    let q = x.dense(&h.lat)?;
    let e = expanded(h);
    let lat = &h.lat;
    let mut out = vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); lat.len()];
    for (k, c) in e.raw() {
        let vals: Vec<Complex64> = k.iter().map(|&l| letter_value(lat, l, &q)).collect();
        let mut i = 0;
        while i < k.len() {
            let l = k[i];
            let mut j = i;
            while j < k.len() && k[j] == l {
                j += 1;
            }
            let kind = lkind(l);
            if kind == KQ || kind == KB {
                let mult = (j - i) as f64;
                let mut p = *c * mult;
                for (t, v) in vals.iter().enumerate() {
                    if t != i {
                        p *= v;
                    }
                }
                let slot = &mut out[lid(l) as usize];
                if kind == KB {
                    slot.0 += p;
                } else {
                    slot.1 += p;
                }
            }
            debug_assert!(kind != KJ);
            i = j;
        }
    }
    Ok(out)
}

/// `qdot_n = i dH/dqbar_n` at `x`.
pub fn vector_field(h: &Hamiltonian, x: &StatePoint) -> Result<BTreeMap<ModeIndex, Complex64>> {
    let g = gradients(h, x)?;
    let i = Complex64::new(0.0, 1.0);
    Ok(h.lat.modes().iter().zip(g).map(|(n, (gb, _))| (n.clone(), i * gb)).collect())
}

/// `sup_n max(|dH/dqbar_n|, |dH/dq_n|) exp(rho w(n))`
pub fn vf_sup_norm(h: &Hamiltonian, x: &StatePoint, rho: f64) -> Result<f64> {
    let g = gradients(h, x)?;
    Ok(g.iter()
        .enumerate()
        .map(|(id, (a, b))| a.norm().max(b.norm()) * (rho * h.lat.w(id as u16)).exp())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ham::{diagonal, Term};
    use crate::lattice::{LatticeParams, MultiIndex};

    fn m(c: i32) -> ModeIndex {
        ModeIndex::new(vec![c])
    }

    fn lat() -> std::sync::Arc<Lattice> {
        Lattice::new(LatticeParams::with_default_floor(1, 2.5).unwrap(), 1.0, 1).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let l = lat();
        let one = Complex64::new(1.0, 0.0);
        let sq = Hamiltonian::from_terms(
            l.clone(),
            4,
            [Term::new(MultiIndex::new(), MultiIndex::from_pairs([(m(1), 2)]), MultiIndex::new(), one)],
        )
        .unwrap();
        let d = partial(&sq, &m(1), false).unwrap();
        assert_eq!(d.terms(), vec![Term::new(MultiIndex::new(), MultiIndex::unit(m(1)), MultiIndex::new(), one * 2.0)]);
        let mixed = Hamiltonian::from_terms(
            l.clone(),
            4,
            [Term::new(MultiIndex::new(), MultiIndex::unit(m(1)), MultiIndex::unit(m(0)), one)],
        )
        .unwrap();
        let dd = second_partial(&mixed, &m(1), &m(0), false, true).unwrap();
        assert_eq!(dd, Hamiltonian::constant(l.clone(), 4, one));
        let swapped = second_partial(&mixed, &m(0), &m(1), true, false).unwrap();
        assert_eq!(dd, swapped);
    }

    #[test]
    fn linear_flow_field() {
        let l = lat();
        let omega = [1.5, 0.25, 3.0];
        let n = diagonal(l.clone(), 4, &omega);
        let mut x = StatePoint::default();
        for (i, md) in l.modes().iter().enumerate() {
            x.q.insert(md.clone(), Complex64::new(0.1 * (i as f64 + 1.0), -0.2));
        }
        let vf = vector_field(&n, &x).unwrap();
        for (i, md) in l.modes().iter().enumerate() {
            let expect = Complex64::new(0.0, omega[i]) * x.q[md];
            assert!((vf[md] - expect).norm() < 1e-15);
        }
        assert!(vector_field(&Hamiltonian::zero(l, 4), &x).unwrap().values().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn j_evaluates_as_action_deviation() {
        let l = lat();
        let j = Hamiltonian::from_terms(
            l.clone(),
            4,
            [Term::new(MultiIndex::new(), MultiIndex::new(), MultiIndex::new(), Complex64::new(1.0, 0.0))
                .with_j(vec![m(0)])],
        )
        .unwrap();
        let mut x = StatePoint::on_torus(&l);
        assert!(eval(&j, &x).unwrap().norm() < 1e-300);
        x.q.insert(m(0), Complex64::new(0.5, 0.0));
        assert!((eval(&j, &x).unwrap().re - (0.25 - l.i0(1))).abs() < 1e-15);
    }
}
