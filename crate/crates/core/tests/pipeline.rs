use nlskam::ham::norm;
use nlskam::ham::poisson_bracket;
use nlskam::ham::random::{random_hamiltonian, RandomSpec};
use nlskam::kam::{run, KamConfig};
use nlskam::nls::{build_cubic_nls, NlsConfig};
use nlskam::verify::norms::{plus_norm, star_norm, sup_norm};
use nlskam::{Hamiltonian, Lattice, LatticeParams, NormKind};

// unordered pairs {a,b}, {c,e} of modes in [-r, r] with a+b = c+e
fn quartic_count_1d(r: i32) -> usize {
    let mut pairs = std::collections::BTreeMap::<i32, usize>::new();
    for a in -r..=r {
        for b in a..=r {
            *pairs.entry(a + b).or_default() += 1;
        }
    }
    pairs.values().map(|c| c * c).sum()
}

#[test]
fn nls_term_count_matches_enumeration() {
    for r in 1..=3 {
        let h = build_cubic_nls(&NlsConfig { mode_radius: r, ..Default::default() }).unwrap();
        assert_eq!(h.len(), quartic_count_1d(r as i32), "radius {r}");
        assert!(h.all_conserving());
        assert_eq!(h.reality_defect(), 0.0);
    }
}

#[test]
fn json_round_trip_is_exact() {
    let h = build_cubic_nls(&NlsConfig { d: 2, mode_radius: 1, ..Default::default() }).unwrap();
    let back = Hamiltonian::from_json(&h.to_json().unwrap()).unwrap();
    assert_eq!(back.terms(), h.terms());
    let lat = Lattice::new(LatticeParams::with_default_floor(1, 2.5).unwrap(), 1.0, 3).unwrap();
    let mut rng = nlskam::rng::task(2, 0);
    let g = random_hamiltonian(&lat, &RandomSpec { terms: 12, ..Default::default() }, &mut rng);
    let back = Hamiltonian::from_json(&g.to_json().unwrap()).unwrap();
    assert_eq!(back.terms(), g.terms());
    assert_eq!(back.to_json().unwrap(), g.to_json().unwrap());
}

#[test]
fn engine_norms_agree_with_brute_force() {
    let h = build_cubic_nls(&NlsConfig { mode_radius: 2, ..Default::default() }).unwrap();
    for rho in [0.0, 0.3, 0.7] {
        let pairs = [
            (norm(&h, NormKind::Sup, rho).unwrap(), sup_norm(&h, rho)),
            (norm(&h, NormKind::Star, rho).unwrap(), star_norm(&h, rho)),
            (norm(&h, NormKind::Plus, rho).unwrap(), plus_norm(&h, rho)),
        ];
        for (a, b) in pairs {
            assert!((a - b).abs() <= 1e-13 * b.max(1e-300), "{a} vs {b}");
        }
    }
}

#[test]
fn bracket_of_nls_with_itself_vanishes() {
    let h = build_cubic_nls(&NlsConfig { mode_radius: 2, ..Default::default() }).unwrap();
    assert!(poisson_bracket(&h, &h).unwrap().is_empty());
}

#[test]
fn kam_step_keeps_reality_and_conservation() {
    let out = run(&KamConfig { steps: 1, ..Default::default() }).unwrap();
    let st = &out.states[1];
    for part in [&st.r0, &st.r1, &st.r2] {
        assert!(part.all_conserving());
        assert!(part.reality_defect() <= 1e-15 * part.max_abs_coeff().max(1e-300));
    }
    assert!(out.reports[1].r0 < out.reports[0].r0);
}

#[test]
fn zero_steps_reports_the_initial_state() {
    let out = run(&KamConfig { steps: 0, ..Default::default() }).unwrap();
    assert_eq!(out.reports.len(), 1);
    assert_eq!(out.states.len(), 1);
    let st = &out.states[0];
    assert_eq!(out.reports[0].r0, plus_norm(&st.r0, st.sched.rho));
}
