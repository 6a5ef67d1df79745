use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use nlskam::dioph::{
    check_frequency, measure_table, resonance_measure, sample_frequency_trial, DiophParams, FrequencyVector,
};
use nlskam::ham::{flow_constant_ln, norm, poisson_bracket};
use nlskam::kam::{accept_frequency, report_table, run_from, tl_defect, KamConfig};
use nlskam::nls::{build_cubic_nls, NlsConfig};
use nlskam::verify::{default_suite, run_suite, suite_table, SuiteEntry};
use nlskam::{Hamiltonian, ModeIndex, NormKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "nlskam", version, about = "KAM normal forms for the lattice cubic NLS")]
struct Cli {
    /// cap on worker threads; results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, env = "NLSKAM_SEED", default_value_t = 0)]
    seed: u64,
    /// TOML file; the table named after the subcommand overrides its flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write the truncated cubic NLS Hamiltonian
    BuildNls(BuildNls),
    /// Run KAM steps, writing steps.csv and one JSON dump per step
    KamRun(KamRun),
    /// Print the sup, star and plus norms of a Hamiltonian file
    Norms(Norms),
    /// Bracket two Hamiltonian files and check the bracket norm bound
    Bracket(BracketCmd),
    /// Check one frequency against both Diophantine conditions
    DiophCheck(DiophCheck),
    /// Monte Carlo estimate of the resonant fraction
    Measure(Measure),
    /// Run the lemma suite
    VerifyLemmas(VerifyLemmas),
    /// Toplitz-Lipschitz defect table
    TlCheck(TlCheck),
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildNls {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    radius: u32,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    sign: f64,
    #[arg(long, default_value_t = 2.5)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = nlskam::LatticeParams::DEFAULT_FLOOR)]
    floor: f64,
    #[arg(long, default_value_t = 8)]
    degree_cap: u32,
    #[arg(long)]
    physical_multiplicity: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KamRun {
    /// start from this Hamiltonian instead of building the NLS
    #[arg(long)]
    input: Option<PathBuf>,
    /// frequency file; sampled and screened when absent
    #[arg(long)]
    omega: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    radius: u32,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 2.5)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = nlskam::LatticeParams::DEFAULT_FLOOR)]
    floor: f64,
    #[arg(long, default_value_t = 10)]
    degree_cap: u32,
    #[arg(long, default_value_t = 1)]
    steps: u32,
    #[arg(long, default_value_t = 1e-18)]
    prune_tol: f64,
    #[arg(long, default_value_t = 4)]
    lie_order_cap: usize,
    #[arg(long, default_value_t = 6)]
    ell_budget: u32,
    #[arg(long, default_value_t = 10_000)]
    max_trials: u64,
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Norms {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BracketCmd {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    rho: f64,
    #[arg(long, default_value_t = 0.05)]
    delta1: f64,
    #[arg(long, default_value_t = 0.05)]
    delta2: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiophCheck {
    /// frequency file; otherwise trial `--trial` of the seeded sampler
    #[arg(long)]
    omega: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    radius: u32,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 4)]
    ell_budget: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Measure {
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    radius: u32,
    #[arg(long, default_value_t = 4)]
    ell_budget: u32,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyLemmas {
    /// keep only these lemma names
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// JSON list of suite entries replacing the default suite
    #[arg(long)]
    suite: Option<PathBuf>,
    /// fill the seconds column (makes the output time dependent)
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TlCheck {
    /// Hamiltonian file; the NLS at `--d`, `--radius` when absent
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 6)]
    radius: u32,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    n: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    m: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    l: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    t: Vec<i32>,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Overlays the `[section]` table of the config file onto `args`.
fn overlay<T: Serialize + DeserializeOwned>(args: T, config: Option<&Path>, section: &str) -> Result<T> {
    let Some(path) = config else { return Ok(args) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let file: toml::Table = toml::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
    let Some(over) = file.get(section) else { return Ok(args) };
    let over = over.as_table().ok_or_else(|| invalid(format!("config section [{section}] must be a table")))?;
    let mut base = toml::Table::try_from(&args)?;
    for (k, v) in over {
        base.insert(k.clone(), v.clone());
    }
    toml::Value::Table(base).try_into().map_err(|e| invalid(format!("config section [{section}]: {e}")))
}

fn invalid(msg: String) -> anyhow::Error {
    anyhow!(nlskam::Error::Argument(msg))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<Hamiltonian> {
    Hamiltonian::load(path).map_err(|e| anyhow!(e).context(format!("loading {}", path.display())))
}

fn parse_mode(s: &str, d: usize) -> Result<ModeIndex> {
    let v: Vec<i32> = s
        .split(',')
        .map(|x| x.trim().parse::<i32>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| invalid(format!("mode {s:?}: {e}")))?;
    if v.len() != d {
        return Err(invalid(format!("mode {s:?} has {} coordinates, lattice has d={d}", v.len())));
    }
    Ok(ModeIndex::new(v))
}

fn build_nls(a: BuildNls) -> Result<()> {
    let cfg = NlsConfig {
        d: a.d,
        mode_radius: a.radius,
        epsilon: a.eps,
        sign: a.sign,
        sigma: a.sigma,
        r: a.r,
        floor_const: a.floor,
        degree_cap: a.degree_cap,
        physical_multiplicity: a.physical_multiplicity,
    };
    let h = build_cubic_nls(&cfg)?;
    emit(a.out.as_deref(), &h.to_json()?)?;
    if a.out.is_some() {
        println!("terms={}", h.len());
    }
    Ok(())
}

fn kam_run(a: KamRun, seed: u64) -> Result<()> {
    let mut cfg = KamConfig {
        d: a.d,
        sigma: a.sigma,
        r: a.r,
        gamma: a.gamma,
        epsilon: a.eps,
        mode_radius: a.radius,
        degree_cap: a.degree_cap,
        steps: a.steps,
        seed,
        prune_tol: a.prune_tol,
        lie_order_cap: a.lie_order_cap,
        strict: a.strict,
        floor_const: a.floor,
        ell_budget: a.ell_budget,
        max_trials: a.max_trials,
        ..Default::default()
    };
    let h = match &a.input {
        Some(p) => {
            let h = load(p)?;
            let hd = h.lattice().header(h.degree_cap());
            cfg.d = hd.d;
            cfg.sigma = hd.sigma;
            cfg.r = hd.r;
            cfg.floor_const = hd.floor_const;
            cfg.mode_radius = hd.mode_radius;
            cfg.degree_cap = hd.degree_cap;
            h
        }
        None => build_cubic_nls(&cfg.nls())?,
    };
    cfg.validate()?;
    let omega = match &a.omega {
        Some(p) => serde_json::from_str::<FrequencyVector>(&std::fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => accept_frequency(&cfg, h.lattice())?.1,
    };
    let out = run_from(&h, &omega, &cfg)?;
    std::fs::create_dir_all(&a.out_dir)?;
    std::fs::write(a.out_dir.join("input.json"), h.to_json()?)?;
    std::fs::write(a.out_dir.join("omega.json"), serde_json::to_string_pretty(&out.omega)? + "\n")?;
    std::fs::write(a.out_dir.join("steps.csv"), report_table(&out.reports).to_string()?)?;
    for (s, dump) in out.dumps.iter().enumerate() {
        std::fs::write(a.out_dir.join(format!("step_{s}.json")), serde_json::to_string_pretty(dump)? + "\n")?;
    }
    let last = out.reports.last().expect("at least the initial report");
    println!("steps={} r0={:.3e} r1={:.3e} r2={:.3e}", cfg.steps, last.r0, last.r1, last.r2);
    Ok(())
}

fn norms(a: Norms) -> Result<()> {
    let h = load(&a.input)?;
    for kind in [NormKind::Sup, NormKind::Star, NormKind::Plus] {
        let name = format!("{kind:?}").to_lowercase();
        println!("{name}={}", nlskam::csv::fmt_f64(norm(&h, kind, a.rho)?));
    }
    Ok(())
}

fn bracket(a: BracketCmd) -> Result<()> {
    let f = load(&a.left)?;
    let g = load(&a.right)?;
    let b = poisson_bracket(&f, &g)?;
    if let Some(p) = &a.out {
        b.save(p)?;
    }
    let top = (0.25 * a.rho).min(3.0 - 2.0 * 2f64.sqrt());
    if !(a.delta1 > 0.0 && a.delta1 < top && a.delta2 > 0.0 && a.delta2 < top) {
        return Err(invalid(format!("need 0 < delta1, delta2 < {top}")));
    }
    let p = &f.lattice().params;
    let lhs = norm(&b, NormKind::Sup, a.rho)?;
    let ln_rhs = -a.delta2.ln()
        + flow_constant_ln(p.d, p.sigma, a.delta1)
        + norm(&f, NormKind::Sup, a.rho - a.delta1)?.ln()
        + norm(&g, NormKind::Sup, a.rho - a.delta2)?.ln();
    println!("terms={}", b.len());
    println!("sup={}", nlskam::csv::fmt_f64(lhs));
    println!("ln_bound={}", nlskam::csv::fmt_f64(ln_rhs));
    println!("bound_ok={}", lhs == 0.0 || lhs.ln() <= ln_rhs);
    Ok(())
}

fn dioph_check(a: DiophCheck, seed: u64) -> Result<()> {
    let lat = nlskam::dioph::frequency_lattice(a.d, a.radius)?;
    let omega = match &a.omega {
        Some(p) => serde_json::from_str::<FrequencyVector>(&std::fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => sample_frequency_trial(&lat, seed, a.trial),
    };
    let p = DiophParams { gamma: a.gamma, d: a.d, ell_budget: a.ell_budget, mode_radius: a.radius };
    let rep = check_frequency(&lat, &omega, &p)?;
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&rep)? + "\n"))?;
    if a.out.is_some() {
        println!("checked_up_to={} checked={} violations={}", rep.checked_up_to, rep.checked, rep.violations.len());
    }
    Ok(())
}

fn measure(a: Measure, seed: u64) -> Result<()> {
    let rows = a
        .gammas
        .iter()
        .map(|&gamma| {
            let p = DiophParams { gamma, d: a.d, ell_budget: a.ell_budget, mode_radius: a.radius };
            resonance_measure(&p, a.trials, seed)
        })
        .collect::<nlskam::Result<Vec<_>>>()?;
    emit(a.out.as_deref(), &measure_table(&rows).to_string()?)?;
    if a.out.is_some() {
        println!("fitted_c={}", nlskam::csv::fmt_f64(nlskam::dioph::fit_linear_constant(&rows)));
    }
    Ok(())
}

fn verify_lemmas(a: VerifyLemmas, seed: u64) -> Result<()> {
    let mut entries: Vec<SuiteEntry> = match &a.suite {
        Some(p) => {
            serde_json::from_str(&std::fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?
        }
        None => default_suite(),
    };
    if !a.only.is_empty() {
        entries.retain(|e| a.only.contains(&e.name));
        if entries.is_empty() {
            return Err(invalid(format!("no lemma named {:?}", a.only)));
        }
    }
    let cases = run_suite(&entries, seed)?;
    emit(a.out.as_deref(), &suite_table(&cases, a.timing).to_string()?)?;
    let failed = cases.iter().filter(|c| !c.passed()).count();
    eprintln!("cases={} failed={failed}", cases.len());
    Ok(())
}

fn tl_check(a: TlCheck) -> Result<()> {
    let h = match &a.input {
        Some(p) => load(p)?,
        None => build_cubic_nls(&NlsConfig { d: a.d, mode_radius: a.radius, ..Default::default() })?,
    };
    let d = h.lattice().params.d;
    let (n, m, l) = (parse_mode(&a.n, d)?, parse_mode(&a.m, d)?, parse_mode(&a.l, d)?);
    let t = tl_defect(&h, &n, &m, &l, &a.t, a.rho)?;
    emit(a.out.as_deref(), &t.to_table().to_string()?)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(invalid("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = cli.config.as_deref();
    let seed = cli.seed;
    match cli.cmd {
        Cmd::BuildNls(a) => build_nls(overlay(a, cfg, "build-nls")?),
        Cmd::KamRun(a) => kam_run(overlay(a, cfg, "kam-run")?, seed),
        Cmd::Norms(a) => norms(overlay(a, cfg, "norms")?),
        Cmd::Bracket(a) => bracket(overlay(a, cfg, "bracket")?),
        Cmd::DiophCheck(a) => dioph_check(overlay(a, cfg, "dioph-check")?, seed),
        Cmd::Measure(a) => measure(overlay(a, cfg, "measure")?, seed),
        Cmd::VerifyLemmas(a) => verify_lemmas(overlay(a, cfg, "verify-lemmas")?, seed),
        Cmd::TlCheck(a) => tl_check(overlay(a, cfg, "tl-check")?),
    }
}

/// 0 ok, 1 validation, 2 small divisor, 3 capacity.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<nlskam::Error>()) {
        Some(nlskam::Error::SmallDivisor { .. }) => 2,
        Some(nlskam::Error::Capacity(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
