//! Shared fixtures for the benchmarks.

use nlskam::homological::{solve_homological, truncation_budget};
use nlskam::kam::{run, KamConfig, KamState};
use nlskam::nls::{build_cubic_nls, NlsConfig};
use nlskam::Hamiltonian;

pub fn nls(d: usize, radius: u32, degree_cap: u32) -> Hamiltonian {
    build_cubic_nls(&NlsConfig { d, mode_radius: radius, degree_cap, ..Default::default() }).unwrap()
}

/// Initial KAM state of the default run and its homological generator.
pub fn step_zero() -> (KamConfig, KamState, Hamiltonian) {
    let cfg = KamConfig { steps: 0, ..Default::default() };
    let st = run(&cfg).unwrap().states.remove(0);
    let guard = cfg.guard(&st.sched);
    let sol = solve_homological(&st.r0, &st.r1, &st.nf, guard, truncation_budget(0, cfg.eps0()).unwrap()).unwrap();
    (cfg, st, sol.f())
}
