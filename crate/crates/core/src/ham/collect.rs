//! Conversion between the expanded form and the J-collected form.
//!
//! Collection writes every `|q_n|^2 = I_n(0) + J_n` and groups the result by
//! J-degree: degree 0 and 1 are kept exactly (class 0 and 1 with disjoint
//! supports), everything of J-degree two or more is written as `J_m J_l`
//! times a polynomial in which the remaining `|q_n|^2` stay as `q_n qbar_n`.

use super::{key_has_j, key_modes, letter, lkind, Hamiltonian, Key, KA, KB, KJ, KQ};
use num_complex::Complex64;
use rustc_hash::FxHashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Repr {
    Expanded,
    JCollected,
}

pub fn canonicalize(h: &Hamiltonian, target: Repr) -> Hamiltonian {
    let mut acc: FxHashMap<Key, Complex64> = FxHashMap::default();
    for (k, c) in h.raw() {
        match target {
            Repr::Expanded => {
                if key_has_j(k) {
                    expand_key(k, *c, &mut |kk, cc| *acc.entry(kk).or_default() += cc);
                } else {
                    *acc.entry(k.clone()).or_default() += *c;
                }
            }
            Repr::JCollected => {
                expand_key(k, *c, &mut |kk, cc| collect_key(&kk, cc, &mut |k2, c2| *acc.entry(k2).or_default() += c2));
            }
        }
    }
    Hamiltonian::from_acc(h.lat.clone(), h.degree_cap, acc, h.budget)
}

/// `(R0, R1, R2)` split by J-count after collection.
pub fn class_split(h: &Hamiltonian) -> (Hamiltonian, Hamiltonian, Hamiltonian) {
    let c = canonicalize(h, Repr::JCollected);
    let mut parts: [Vec<(Key, Complex64)>; 3] = Default::default();
    for (k, v) in c.raw() {
        let j = super::j_count(k);
        parts[j.min(2)].push((k.clone(), *v));
    }
    let [p0, p1, p2] = parts;
    let mk = |t| Hamiltonian::from_sorted(h.lat.clone(), h.degree_cap, t, 0.0);
    // the budget travels with class 0 so sums stay honest
    (mk(p0).with_budget(h.budget), mk(p1), mk(p2))
}

/// `J_n -> q_n qbar_n - I_n(0)` for every J letter.
pub(crate) fn expand_key(k: &[u32], c: Complex64, out: &mut impl FnMut(Key, Complex64)) {
    let base: Key = k.iter().copied().filter(|&l| lkind(l) != KJ).collect();
    let js: Vec<u16> = k.iter().filter(|&&l| lkind(l) == KJ).map(|&l| super::lid(l)).collect();
    if js.is_empty() {
        out(base, c);
        return;
    }
    for mask in 0u32..(1 << js.len()) {
        let mut kk = base.clone();
        let mut sign = 1.0;
        for (i, &id) in js.iter().enumerate() {
            if mask & (1 << i) != 0 {
                kk.push(letter(id, KA));
                sign = -sign;
            } else {
                kk.push(letter(id, KQ));
                kk.push(letter(id, KB));
            }
        }
        kk.sort_unstable();
        out(kk, c * sign);
    }
}

/// Collects an expanded key (no J letters).
pub(crate) fn collect_key(k: &[u32], c: Complex64, out: &mut impl FnMut(Key, Complex64)) {
    let modes = key_modes(k);
    // reduced part and the list of (id, b) with b = min(k, k')
    let mut reduced = Key::new();
    let mut pairs: Vec<(u16, u32)> = Vec::new();
    for (id, e) in &modes {
        let b = e[1].min(e[2]);
        for _ in 0..e[0] {
            reduced.push(letter(*id, KA));
        }
        for _ in 0..(e[1] - b) {
            reduced.push(letter(*id, KQ));
        }
        for _ in 0..(e[2] - b) {
            reduced.push(letter(*id, KB));
        }
        if b > 0 {
            pairs.push((*id, b));
        }
    }
    if pairs.is_empty() {
        out(reduced, c);
        return;
    }
    let p = pairs.len();
    let emit = |extra: &mut Vec<u32>, coeff: f64, out: &mut dyn FnMut(Key, Complex64)| {
        let mut kk = reduced.clone();
        kk.extend_from_slice(extra);
        kk.sort_unstable();
        out(kk, c * coeff);
    };
    let push_a = |v: &mut Vec<u32>, id: u16, n: u32| v.extend(std::iter::repeat(letter(id, KA)).take(n as usize));
    let push_i = |v: &mut Vec<u32>, id: u16, n: u32| {
        for _ in 0..n {
            v.push(letter(id, KQ));
            v.push(letter(id, KB));
        }
    };
    let mut sink = |kk: Key, cc: Complex64| out(kk, cc);

    // J-degree 0: every |q|^2 replaced by I(0)
    let mut extra = Vec::new();
    for &(id, b) in &pairs {
        push_a(&mut extra, id, b);
    }
    emit(&mut extra, 1.0, &mut sink);

    for i in 0..p {
        let (idi, bi) = pairs[i];
        // J-degree 1 at mode i
        let mut extra = Vec::new();
        for (j, &(id, b)) in pairs.iter().enumerate() {
            push_a(&mut extra, id, if j == i { b - 1 } else { b });
        }
        extra.push(letter(idi, KJ));
        emit(&mut extra, bi as f64, &mut sink);

        // J_i^2 Q_{b_i}: sum_r (r+1) I0^r I^{b-2-r}
        if bi >= 2 {
            for r in 0..=(bi - 2) {
                let mut extra = Vec::new();
                for (j, &(id, b)) in pairs.iter().enumerate() {
                    if j < i {
                        push_a(&mut extra, id, b);
                    } else if j > i {
                        push_i(&mut extra, id, b);
                    }
                }
                push_a(&mut extra, idi, r);
                push_i(&mut extra, idi, bi - 2 - r);
                extra.push(letter(idi, KJ));
                extra.push(letter(idi, KJ));
                emit(&mut extra, (r + 1) as f64, &mut sink);
            }
        }

        // J_i J_k b_i I0_i^{b_i-1} L_k with L_b = sum_r I0^r I^{b-1-r}
        for kx in (i + 1)..p {
            let (idk, bk) = pairs[kx];
            for r in 0..bk {
                let mut extra = Vec::new();
                for (j, &(id, b)) in pairs.iter().enumerate() {
                    if j == i {
                        push_a(&mut extra, id, b - 1);
                    } else if j < kx {
                        push_a(&mut extra, id, b);
                    } else if j > kx {
                        push_i(&mut extra, id, b);
                    }
                }
                push_a(&mut extra, idk, r);
                push_i(&mut extra, idk, bk - 1 - r);
                extra.push(letter(idi, KJ));
                extra.push(letter(idk, KJ));
                emit(&mut extra, bi as f64, &mut sink);
            }
        }
    }
}
