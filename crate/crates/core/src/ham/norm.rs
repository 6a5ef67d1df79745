use super::collect::{canonicalize, Repr};
use super::{key_has_j, lid, lkind, term_key, Hamiltonian, Term, KA, KJ};
use crate::error::{arg, Result};
use crate::modes::Lattice;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `sup |c| exp(-rho (S - 2 L1))` on the expanded form
    Sup,
    /// `sum |c| exp(-2r sum a w) exp(-rho sum (k+k') w)` on the expanded form
    Star,
    /// the sup weight on the collected form, J letters weighted like `a`
    Plus,
}

/// `S - 2 L1` of a key, J letters counted twice like `a`.
pub(crate) fn key_exponent(lat: &Lattice, k: &[u32]) -> f64 {
    let mut s = 0.0;
    let mut l1: f64 = 0.0;
    for &l in k {
        let w = lat.w(lid(l));
        s += w * super::letter_degree(l) as f64;
        l1 = l1.max(w);
    }
    s - 2.0 * l1
}

/// Star weight `exp(-2r sum a w - rho sum (k+k') w)` of an expanded key.
pub(crate) fn star_weight(lat: &Lattice, k: &[u32], rho: f64) -> f64 {
    let mut e = 0.0;
    for &l in k {
        let w = lat.w(lid(l));
        e += match lkind(l) {
            KA => 2.0 * lat.r * w,
            KJ => unreachable!("star weight needs expanded keys"),
            _ => rho * w,
        };
    }
    (-e).exp()
}

/// Exponent of the plus-norm weight for one collected term.
pub fn plus_exponent(lat: &Lattice, t: &Term) -> Result<f64> {
    Ok(key_exponent(lat, &term_key(lat, t)?))
}

pub fn norm(h: &Hamiltonian, kind: NormKind, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return arg(format!("rho must be nonnegative, got {rho}"));
    }
    if kind != NormKind::Sup && rho >= h.lat.r {
        return arg(format!("rho={rho} must stay below r={}", h.lat.r));
    }
    let lat = &h.lat;
    let out = match kind {
        NormKind::Sup | NormKind::Star => {
            let owned;
            let e = if h.raw().iter().any(|(k, _)| key_has_j(k)) {
                owned = canonicalize(h, Repr::Expanded);
                &owned
            } else {
                h
            };
            if kind == NormKind::Sup {
                e.raw().iter().map(|(k, c)| c.norm() * (-rho * key_exponent(lat, k)).exp()).fold(0.0, f64::max)
            } else {
                e.raw().iter().map(|(k, c)| c.norm() * star_weight(lat, k, rho)).sum()
            }
        }
        NormKind::Plus => {
            let c = canonicalize(h, Repr::JCollected);
            c.raw().iter().map(|(k, v)| v.norm() * (-rho * key_exponent(lat, k)).exp()).fold(0.0, f64::max)
        }
    };
    Ok(out)
}
