//! The iteration: schedule, one KAM step, multi-step runs and the
//! Töplitz-Lipschitz defect table.

use crate::csv::{Cell, Table};
use crate::dioph::{for_each_ell, is_strong_diophantine, sample_frequency_trial, DiophParams, FrequencyVector};
use crate::error::{arg, Error, Result};
use crate::ham::{
    class_split, key_modes, lid, lie::factorial, lie::lie_chain, linear_combine, lkind, norm, second_partial,
    sum_scaled, vf_sup_norm, DegreePolicy, FlowGuard, Hamiltonian, HamiltonianFile, LieOptions, NormKind, StatePoint,
    KA, KJ,
};
use crate::homological::{key_divisor, solve_homological, truncation_budget, NormalForm, RHO0};
use crate::lattice::ModeIndex;
use crate::modes::Lattice;
use crate::nls::{build_cubic_nls, NlsConfig};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub s: u32,
    pub delta: f64,
    pub rho: f64,
    pub eps: f64,
    pub lambda: f64,
    pub eta: f64,
    pub d: f64,
    /// `sum_{i<s} delta_i`
    pub delta_sum: f64,
}

fn delta_of(s: u32) -> f64 {
    let x = s as f64 + 4.0;
    RHO0 / (x * x.ln().powi(2))
}

fn eps_of(s: u32, eps0: f64) -> f64 {
    (1.5f64.powi(s as i32) * eps0.ln()).exp()
}

impl Schedule {
    pub fn first(eps0: f64) -> Result<Schedule> {
        if !(eps0 > 0.0 && eps0 < 1.0) {
            return arg(format!("eps0 must lie in (0,1), got {eps0}"));
        }
        let lambda = eps0.powf(0.01);
        Ok(Schedule { s: 0, delta: delta_of(0), rho: RHO0, eps: eps0, lambda, eta: lambda, d: 0.0, delta_sum: 0.0 })
    }

    pub fn next(&self, eps0: f64) -> Schedule {
        let s = self.s + 1;
        let eps = eps_of(s, eps0);
        Schedule {
            s,
            delta: delta_of(s),
            rho: self.rho + 3.0 * self.delta,
            eps,
            lambda: eps.powf(0.01),
            eta: self.lambda * self.eta / 20.0,
            d: self.d + 1.0 / (std::f64::consts::PI.powi(2) * (s as f64).powi(2)),
            delta_sum: self.delta_sum + self.delta,
        }
    }
}

pub fn schedule(s: u32, eps0: f64) -> Result<Schedule> {
    let mut sc = Schedule::first(eps0)?;
    for _ in 0..s {
        sc = sc.next(eps0);
    }
    Ok(sc)
}

fn default_steps() -> u32 {
    1
}
fn default_gamma() -> f64 {
    0.1
}
fn default_eps() -> f64 {
    1e-6
}
fn default_sigma() -> f64 {
    2.5
}
fn default_r() -> f64 {
    1.0
}
fn default_radius() -> u32 {
    2
}
fn default_cap() -> u32 {
    10
}
fn default_prune() -> f64 {
    1e-18
}
fn default_order() -> usize {
    4
}
fn default_ell() -> u32 {
    6
}
fn default_trials() -> u64 {
    10_000
}
fn default_one() -> f64 {
    1.0
}
fn default_d() -> usize {
    1
}
fn default_floor() -> f64 {
    crate::lattice::LatticeParams::DEFAULT_FLOOR
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KamConfig {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default = "default_radius")]
    pub mode_radius: u32,
    #[serde(default = "default_cap")]
    pub degree_cap: u32,
    #[serde(default = "default_steps")]
    pub steps: u32,
    #[serde(default)]
    pub seed: u64,
    /// pruning threshold relative to the next step's target `eps_{s+1}`
    #[serde(default = "default_prune")]
    pub prune_tol: f64,
    #[serde(default = "default_order")]
    pub lie_order_cap: usize,
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_floor")]
    pub floor_const: f64,
    #[serde(default = "default_ell")]
    pub ell_budget: u32,
    #[serde(default = "default_trials")]
    pub max_trials: u64,
    #[serde(default = "default_one")]
    pub sign: f64,
    #[serde(default)]
    pub physical_multiplicity: bool,
}

impl Default for KamConfig {
    fn default() -> Self {
        KamConfig {
            d: default_d(),
            sigma: default_sigma(),
            r: default_r(),
            gamma: default_gamma(),
            epsilon: default_eps(),
            mode_radius: default_radius(),
            degree_cap: default_cap(),
            steps: default_steps(),
            seed: 0,
            prune_tol: default_prune(),
            lie_order_cap: default_order(),
            strict: false,
            floor_const: default_floor(),
            ell_budget: default_ell(),
            max_trials: default_trials(),
            sign: default_one(),
            physical_multiplicity: false,
        }
    }
}

impl KamConfig {
    pub fn nls(&self) -> NlsConfig {
        NlsConfig {
            d: self.d,
            mode_radius: self.mode_radius,
            epsilon: self.epsilon,
            sign: self.sign,
            sigma: self.sigma,
            r: self.r,
            floor_const: self.floor_const,
            degree_cap: self.degree_cap,
            physical_multiplicity: self.physical_multiplicity,
        }
    }

    pub fn eps0(&self) -> f64 {
        self.nls().eps0()
    }

    pub fn dioph(&self) -> DiophParams {
        DiophParams { gamma: self.gamma, d: self.d, ell_budget: self.ell_budget, mode_radius: self.mode_radius }
    }

    pub fn validate(&self) -> Result<()> {
        self.nls().validate()?;
        self.dioph().validate()?;
        if !(self.gamma > 0.0) {
            return arg("gamma must be positive for a run");
        }
        if !(self.eps0() < 1.0) {
            return arg(format!("epsilon/(2pi)^d must be below 1, got {}", self.eps0()));
        }
        if self.lie_order_cap < 1 {
            return arg("lie_order_cap must be at least 1");
        }
        if !(self.prune_tol >= 0.0) {
            return arg("prune_tol must be nonnegative");
        }
        if self.max_trials == 0 {
            return arg("max_trials must be at least 1");
        }
        Ok(())
    }

    /// `gamma eps_s^0.01`
    pub fn guard(&self, sc: &Schedule) -> f64 {
        self.gamma * sc.eps.powf(0.01)
    }
}

#[derive(Clone, Debug)]
pub struct KamState {
    pub lat: Arc<Lattice>,
    pub nf: NormalForm,
    /// the potential `V*_s` that freezes the frequencies at omega
    pub v_star: Vec<f64>,
    /// accumulated decaying shifts: `V-hat_s(V) = V + shift`
    pub shift: Vec<f64>,
    pub omega: Vec<f64>,
    pub r0: Hamiltonian,
    pub r1: Hamiltonian,
    pub r2: Hamiltonian,
    pub s: u32,
    pub sched: Schedule,
    pub error_budget: f64,
}

impl KamState {
    pub fn new(h: &Hamiltonian, omega: &[f64], eps0: f64) -> Result<KamState> {
        let lat = h.lattice().clone();
        if omega.len() != lat.len() {
            return arg("frequency vector does not match the mode set");
        }
        let (r0, r1, r2) = class_split(h);
        Ok(KamState {
            nf: NormalForm { v_breve: 0.0, v_hat: omega.to_vec() },
            v_star: omega.to_vec(),
            shift: vec![0.0; lat.len()],
            omega: omega.to_vec(),
            error_budget: h.error_budget(),
            lat,
            r0,
            r1,
            r2,
            s: 0,
            sched: Schedule::first(eps0)?,
        })
    }

    pub fn remainder(&self) -> Hamiltonian {
        sum_scaled(&[(1.0, &self.r0), (1.0, &self.r1), (1.0, &self.r2)]).expect("same lattice")
    }

    /// `(||R0||+, ||R1||+, ||R2||+)` at `rho_s`.
    pub fn class_norms(&self) -> Result<[f64; 3]> {
        let rho = self.sched.rho;
        Ok([
            norm(&self.r0, NormKind::Plus, rho)?,
            norm(&self.r1, NormKind::Plus, rho)?,
            norm(&self.r2, NormKind::Plus, rho)?,
        ])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u32,
    pub eps: f64,
    pub rho: f64,
    pub delta: f64,
    pub guard: f64,
    pub trunc_budget: f64,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    /// `||R||_rho` of the whole remainder, sup norm
    pub r_sup: f64,
    pub terms: u64,
    pub min_divisor: f64,
    pub eliminated: u64,
    pub deferred: u64,
    pub deferred_mass: f64,
    pub quadratic_nonresonant: u64,
    pub residual: f64,
    pub shift_limit: f64,
    pub shift_decay_max: f64,
    pub shift_max: f64,
    pub shift_envelope_ok: bool,
    pub phi_proxy: f64,
    pub lie_orders: u64,
    pub lie_tail: f64,
    pub error_budget: f64,
    pub r0_ok: bool,
    pub r1_ok: bool,
    pub r2_ok: bool,
    pub phi_ok: bool,
    pub vhat_ok: bool,
    pub shift_ok: bool,
    pub residual_ok: bool,
    /// wall time; not serialized so dumps stay reproducible
    #[serde(skip)]
    pub seconds: f64,
}

impl StepReport {
    pub fn all_ok(&self) -> bool {
        self.r0_ok && self.r1_ok && self.r2_ok && self.phi_ok && self.vhat_ok && self.shift_ok && self.residual_ok
    }
}

pub const REPORT_COLUMNS: [&str; 32] = [
    "step",
    "eps",
    "rho",
    "delta",
    "guard",
    "trunc_budget",
    "r0_plus",
    "r1_plus",
    "r2_plus",
    "r_sup",
    "terms",
    "min_divisor",
    "eliminated",
    "deferred",
    "deferred_mass",
    "quadratic_nonresonant",
    "residual",
    "shift_limit",
    "shift_decay_max",
    "shift_max",
    "shift_envelope_ok",
    "phi_proxy",
    "lie_orders",
    "lie_tail",
    "error_budget",
    "r0_ok",
    "r1_ok",
    "r2_ok",
    "phi_ok",
    "vhat_ok",
    "shift_ok",
    "residual_ok",
];

pub fn report_table(reports: &[StepReport]) -> Table {
    let mut t = Table::new("kam_steps", &REPORT_COLUMNS);
    for r in reports {
        let row: Vec<Cell> = vec![
            r.step.into(),
            r.eps.into(),
            r.rho.into(),
            r.delta.into(),
            r.guard.into(),
            r.trunc_budget.into(),
            r.r0.into(),
            r.r1.into(),
            r.r2.into(),
            r.r_sup.into(),
            r.terms.into(),
            r.min_divisor.into(),
            r.eliminated.into(),
            r.deferred.into(),
            r.deferred_mass.into(),
            r.quadratic_nonresonant.into(),
            r.residual.into(),
            r.shift_limit.into(),
            r.shift_decay_max.into(),
            r.shift_max.into(),
            r.shift_envelope_ok.into(),
            r.phi_proxy.into(),
            r.lie_orders.into(),
            r.lie_tail.into(),
            r.error_budget.into(),
            r.r0_ok.into(),
            r.r1_ok.into(),
            r.r2_ok.into(),
            r.phi_ok.into(),
            r.vhat_ok.into(),
            r.shift_ok.into(),
            r.residual_ok.into(),
        ];
        t.push(row);
    }
    t
}

/// Norms and class bounds of the current state.
fn fill_state(rep: &mut StepReport, st: &KamState, eps0: f64) -> Result<()> {
    let [a, b, c] = st.class_norms()?;
    rep.step = st.s;
    rep.eps = st.sched.eps;
    rep.rho = st.sched.rho;
    rep.delta = st.sched.delta;
    rep.r0 = a;
    rep.r1 = b;
    rep.r2 = c;
    let r = st.remainder();
    rep.terms = r.len() as u64;
    rep.r_sup = norm(&r, NormKind::Sup, st.sched.rho)?;
    rep.error_budget = st.error_budget;
    rep.r0_ok = a <= st.sched.eps;
    rep.r1_ok = b <= st.sched.eps.powf(0.6);
    rep.r2_ok = c <= (1.0 + st.sched.d) * eps0;
    Ok(())
}

/// Report of a state before any step.
pub fn initial_report(st: &KamState, cfg: &KamConfig) -> Result<StepReport> {
    let mut rep = StepReport {
        phi_ok: true,
        vhat_ok: true,
        shift_ok: true,
        residual_ok: true,
        shift_envelope_ok: true,
        min_divisor: f64::INFINITY,
        ..Default::default()
    };
    fill_state(&mut rep, st, cfg.eps0())?;
    rep.guard = cfg.guard(&st.sched);
    rep.trunc_budget = truncation_budget(st.s, cfg.eps0())?;
    Ok(rep)
}

/// `omega_m` from the resonant class-1 terms `c I(0)^a J_m`.
pub fn frequency_shift(res1: &Hamiltonian) -> Vec<f64> {
    let lat = res1.lattice();
    let mut out = vec![0.0; lat.len()];
    for (k, c) in res1.raw() {
        let mut j = None;
        let mut f = c.re;
        for &l in k.iter() {
            match lkind(l) {
                KA => f *= lat.i0(lid(l)),
                KJ => j = Some(lid(l)),
                _ => {}
            }
        }
        if let Some(m) = j {
            out[m as usize] += f;
        }
    }
    out
}

/// Limit part: mean over the outer shell of the truncation.
fn split_shift(lat: &Lattice, w: &[f64]) -> (f64, Vec<f64>) {
    let rmax = (0..lat.len()).map(|i| lat.norm_sq(i as u16)).max().unwrap_or(0);
    let outer: Vec<f64> = (0..lat.len()).filter(|&i| lat.norm_sq(i as u16) == rmax).map(|i| w[i]).collect();
    let lim = outer.iter().sum::<f64>() / outer.len().max(1) as f64;
    (lim, w.iter().map(|x| x - lim).collect())
}

/// `|decay_n| <n>` must not grow from shell to shell, up to rounding at scale `tol`.
fn envelope_ok(lat: &Lattice, decay: &[f64], tol: f64) -> bool {
    let mut shells: std::collections::BTreeMap<i64, f64> = Default::default();
    for (i, x) in decay.iter().enumerate() {
        let e = shells.entry(lat.norm_sq(i as u16)).or_insert(0.0);
        *e = e.max(x.abs() * lat.angle(i as u16));
    }
    let v: Vec<f64> = shells.into_values().collect();
    v.windows(2).all(|p| p[1] <= p[0] + tol)
}

/// `X <- X - theta (X + shift - omega)` until the update is below 1e-12.
fn freeze(start: &[f64], shift: &[f64], omega: &[f64]) -> Vec<f64> {
    let mut x = start.to_vec();
    for _ in 0..10_000 {
        let mut change: f64 = 0.0;
        for i in 0..x.len() {
            let upd = 0.5 * (x[i] + shift[i] - omega[i]);
            x[i] -= upd;
            change = change.max(upd.abs());
        }
        if change < 1e-12 {
            break;
        }
    }
    x
}

pub fn kam_step(st: &KamState, cfg: &KamConfig) -> Result<(KamState, StepReport)> {
    let t0 = std::time::Instant::now();
    let eps0 = cfg.eps0();
    let sc = st.sched;
    let nx = sc.next(eps0);
    let guard = cfg.guard(&sc);
    let budget = truncation_budget(st.s, eps0)?;
    let sol = solve_homological(&st.r0, &st.r1, &st.nf, guard, budget)?;
    let f = sol.f();

    let scale = cfg.prune_tol * nx.eps;
    let opts = LieOptions {
        order_cap: cfg.lie_order_cap,
        tail_tol: scale,
        prune_tol: scale,
        rho: nx.rho,
        degree: if cfg.strict { DegreePolicy::Strict } else { DegreePolicy::Truncate },
        guard: FlowGuard::Decay,
    };
    // H o Phi = N + [R] + R_def + R2 + sum_{n>=1} R^(n)/n! - sum_{n>=1} R_low^(n)/(n+1)!
    let r_all = st.remainder();
    let x1 = lie_chain(&r_all, &f, &opts, false, |n| 1.0 / factorial(n))?;
    let x2 = lie_chain(&sol.eliminated, &f, &opts, false, |n| 1.0 / factorial(n + 1))?;
    let rplus = sum_scaled(&[(1.0, &sol.deferred), (1.0, &st.r2), (1.0, &x1.h), (-1.0, &x2.h)])?;
    let (r0, r1, r2) = class_split(&rplus);

    let lat = &st.lat;
    let w = frequency_shift(&sol.resonant1);
    let (lim, decay) = split_shift(lat, &w);
    let shift: Vec<f64> = st.shift.iter().zip(&decay).map(|(a, b)| a + b).collect();
    let v_star = freeze(&st.v_star, &shift, &st.omega);
    let v_hat: Vec<f64> = v_star.iter().zip(&shift).map(|(a, b)| a + b).collect();
    let nf = NormalForm { v_breve: st.nf.v_breve + lim, v_hat };

    let next = KamState {
        lat: lat.clone(),
        nf,
        v_star,
        shift,
        omega: st.omega.clone(),
        r0,
        r1,
        r2,
        s: st.s + 1,
        sched: nx,
        error_budget: st.error_budget + rplus.error_budget(),
    };

    let mut rep = StepReport::default();
    fill_state(&mut rep, &next, eps0)?;
    let shift_max = w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let decay_max = decay.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    rep.guard = guard;
    rep.trunc_budget = budget;
    rep.min_divisor = sol.stats.min_abs_divisor;
    rep.eliminated = sol.stats.eliminated;
    rep.deferred = sol.stats.truncated_count;
    rep.deferred_mass = sol.stats.truncated_mass;
    rep.quadratic_nonresonant = sol.stats.quadratic_nonresonant;
    rep.residual = sol.stats.residual_rel;
    rep.shift_limit = lim;
    rep.shift_decay_max = decay_max;
    rep.shift_max = shift_max;
    rep.shift_envelope_ok = envelope_ok(lat, &decay, 1e-12 * shift_max);
    rep.phi_proxy = vf_sup_norm(&f, &StatePoint::on_torus(lat), lat.r)?;
    rep.lie_orders = x1.orders.max(x2.orders) as u64;
    rep.lie_tail = x1.tail_bound + x2.tail_bound;
    rep.phi_ok = rep.phi_proxy <= sc.eps.sqrt();
    rep.vhat_ok = decay_max <= sc.eps.sqrt();
    rep.shift_ok = shift_max <= nx.eps.sqrt();
    rep.residual_ok = rep.residual <= 1e-10;
    rep.seconds = t0.elapsed().as_secs_f64();
    if cfg.strict && !rep.all_ok() {
        return Err(Error::Precondition(format!("bound check failed at step {}", st.s)));
    }
    Ok((next, rep))
}

/// Every `l = k - k'` a term up to the degree cap can carry has divisor at least `guard`.
pub fn divisor_screen(lat: &Lattice, nf: &NormalForm, budget: u32, guard: f64) -> bool {
    let om = nf.omega(lat);
    let d = lat.params.d;
    let mut ok = true;
    for_each_ell(lat.len(), budget, |l| {
        if l.iter().sum::<i64>() != 0 {
            return true;
        }
        let mut mom = vec![0i64; d];
        for (i, &v) in l.iter().enumerate() {
            if v != 0 {
                for (m, c) in mom.iter_mut().zip(&lat.mode(i as u16).0) {
                    *m += v * *c as i64;
                }
            }
        }
        if mom.iter().any(|&x| x != 0) {
            return true;
        }
        let div: f64 = l.iter().zip(&om).map(|(&v, w)| v as f64 * w).sum();
        ok = div.abs() >= guard;
        ok
    });
    ok
}

/// First sampled frequency that is strong Diophantine and clears the divisor screen.
pub fn accept_frequency(cfg: &KamConfig, lat: &Lattice) -> Result<(u64, FrequencyVector)> {
    let p = cfg.dioph();
    let guard = cfg.guard(&Schedule::first(cfg.eps0())?);
    for t in 0..cfg.max_trials {
        let fv = sample_frequency_trial(lat, cfg.seed, t);
        let w = fv.dense(lat)?;
        if !is_strong_diophantine(lat, &w, &p) {
            continue;
        }
        let nf = NormalForm { v_breve: 0.0, v_hat: w };
        if divisor_screen(lat, &nf, cfg.degree_cap, guard) {
            return Ok((t, fv));
        }
    }
    Err(Error::SmallDivisor { k: "-".into(), k_bar: "-".into(), divisor: 0.0, guard })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepDump {
    pub report: StepReport,
    pub v_breve: f64,
    pub v_hat: Vec<(ModeIndex, f64)>,
    pub v_star: Vec<(ModeIndex, f64)>,
    pub r0: HamiltonianFile,
    pub r1: HamiltonianFile,
    pub r2: HamiltonianFile,
}

impl StepDump {
    pub fn new(st: &KamState, report: &StepReport) -> Self {
        let pair = |v: &[f64]| st.lat.modes().iter().cloned().zip(v.iter().copied()).collect();
        StepDump {
            report: report.clone(),
            v_breve: st.nf.v_breve,
            v_hat: pair(&st.nf.v_hat),
            v_star: pair(&st.v_star),
            r0: HamiltonianFile::from_hamiltonian(&st.r0),
            r1: HamiltonianFile::from_hamiltonian(&st.r1),
            r2: HamiltonianFile::from_hamiltonian(&st.r2),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub omega_trial: u64,
    pub omega: FrequencyVector,
    pub reports: Vec<StepReport>,
    pub dumps: Vec<StepDump>,
    pub states: Vec<KamState>,
}

/// Runs from a given Hamiltonian and frequency.
pub fn run_from(h: &Hamiltonian, omega: &FrequencyVector, cfg: &KamConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let lat = h.lattice().clone();
    let mut st = KamState::new(h, &omega.dense(&lat)?, cfg.eps0())?;
    let rep = initial_report(&st, cfg)?;
    let mut out = RunOutput {
        omega_trial: 0,
        omega: omega.clone(),
        dumps: vec![StepDump::new(&st, &rep)],
        reports: vec![rep],
        states: vec![st.clone()],
    };
    for _ in 0..cfg.steps {
        let (next, rep) = kam_step(&st, cfg)?;
        out.dumps.push(StepDump::new(&next, &rep));
        out.reports.push(rep);
        out.states.push(next.clone());
        st = next;
    }
    Ok(out)
}

/// Builds the NLS Hamiltonian, accepts a frequency and iterates.
pub fn run(cfg: &KamConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let h = build_cubic_nls(&cfg.nls())?;
    let (trial, omega) = accept_frequency(cfg, h.lattice())?;
    let mut out = run_from(&h, &omega, cfg)?;
    out.omega_trial = trial;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TlFamily {
    /// `d^2 / dq_{n+tl} dqbar_{m+tl}`
    QQbar,
    /// `d^2 / dq_{n+tl} dq_{m-tl}`
    QQ,
    /// `d^2 / dqbar_{n+tl} dqbar_{m-tl}`
    QbarQbar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TlRow {
    pub family: TlFamily,
    pub t: i32,
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TlTable {
    pub rows: Vec<TlRow>,
    /// smallest `C >= 0` with `defect(t) <= C/|t|` per family, in enum order
    pub fitted_c: [f64; 3],
    pub t_max: i32,
}

impl TlTable {
    pub fn family(&self, f: TlFamily) -> Vec<&TlRow> {
        self.rows.iter().filter(|r| r.family == f).collect()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new("tl_defect", &["family", "t", "defect", "fitted_c"]);
        for r in &self.rows {
            let c = self.fitted_c[r.family as usize];
            let name = match r.family {
                TlFamily::QQbar => "q_qbar",
                TlFamily::QQ => "q_q",
                TlFamily::QbarQbar => "qbar_qbar",
            };
            t.push(vec![name.into(), (r.t as i64).into(), r.defect.into(), c.into()]);
        }
        t
    }
}

pub fn tl_defect(
    h: &Hamiltonian,
    n: &ModeIndex,
    m: &ModeIndex,
    l: &ModeIndex,
    t_list: &[i32],
    rho: f64,
) -> Result<TlTable> {
    let lat = h.lattice();
    if t_list.is_empty() {
        return arg("t_list must not be empty");
    }
    let t_max = *t_list.iter().max_by_key(|t| t.unsigned_abs()).expect("nonempty");
    for &t in t_list {
        for p in [n.add_scaled(l, t), m.add_scaled(l, t), m.add_scaled(l, -t)] {
            if lat.id(&p).is_none() {
                return arg(format!("shifted mode {p} at t={t} leaves the truncation radius {}", lat.mode_radius));
            }
        }
    }
    let fam = [TlFamily::QQbar, TlFamily::QQ, TlFamily::QbarQbar];
    let deriv = |f: TlFamily, t: i32| -> Result<Hamiltonian> {
        let a = n.add_scaled(l, t);
        match f {
            TlFamily::QQbar => second_partial(h, &a, &m.add_scaled(l, t), false, true),
            TlFamily::QQ => second_partial(h, &a, &m.add_scaled(l, -t), false, false),
            TlFamily::QbarQbar => second_partial(h, &a, &m.add_scaled(l, -t), true, true),
        }
    };
    let mut rows = Vec::new();
    let mut fitted = [0.0f64; 3];
    let one = Complex64::new(1.0, 0.0);
    for (fi, f) in fam.iter().enumerate() {
        let lim = deriv(*f, t_max)?;
        for &t in t_list {
            let d = linear_combine(one, &deriv(*f, t)?, -one, &lim)?;
            let defect = norm(&d, NormKind::Star, rho)?;
            if t != 0 {
                fitted[fi] = fitted[fi].max(defect * t.unsigned_abs() as f64);
            }
            rows.push(TlRow { family: *f, t, defect });
        }
    }
    Ok(TlTable { rows, fitted_c: fitted, t_max })
}

/// Smallest divisor magnitude among the nonresonant terms of a state.
pub fn min_divisor(st: &KamState) -> f64 {
    let mut best = f64::INFINITY;
    for h in [&st.r0, &st.r1] {
        for (k, _) in h.raw() {
            if key_modes(k).iter().any(|(_, e)| e[1] + e[2] > 0) {
                best = best.min(key_divisor(&st.lat, k, &st.nf).abs());
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let s0 = schedule(0, 1e-6).unwrap();
        assert!((s0.rho - 1.7157e-3).abs() < 1e-7);
        assert!((s0.delta / 2.232e-4 - 1.0).abs() < 1e-3);
        let s2 = schedule(2, 1e-6).unwrap();
        assert!((s2.eps.log10() + 13.5).abs() < 1e-9);
        assert_eq!(s0.eta, s0.lambda);
        assert!((s2.d - (1.0 + 0.25) / std::f64::consts::PI.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn zero_remainder_step() {
        let cfg = KamConfig { mode_radius: 1, ..Default::default() };
        let h = Hamiltonian::zero(cfg.nls().lattice().unwrap(), cfg.degree_cap);
        let omega = vec![0.3, 0.7, 0.2];
        let st = KamState::new(&h, &omega, cfg.eps0()).unwrap();
        let (next, rep) = kam_step(&st, &cfg).unwrap();
        assert!(rep.all_ok());
        assert!(next.r0.is_empty() && next.r1.is_empty() && next.r2.is_empty());
        assert_eq!(next.nf, st.nf);
    }

    #[test]
    fn freeze_hits_omega() {
        let om = [0.1, 0.2];
        let x = freeze(&[0.1, 0.2], &[1e-3, -2e-3], &om);
        assert!((x[0] + 1e-3 - 0.1).abs() < 1e-11 && (x[1] - 2e-3 - 0.2).abs() < 1e-11);
    }
}
