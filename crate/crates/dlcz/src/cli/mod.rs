//! Batch front end: configuration, subcommands and artifact emission.
//! The `dlcz` binary is a thin wrapper over [`load`], [`run`] and [`Artifacts::write`].

mod config;
mod output;

pub use config::{
    parse_config, resolve, AnalysisSection, AnalyzeSection, CampaignSection, LinkSection, PumpProbeSection, RawConfig, RunConfig, SweepSection,
    YieldSection,
};
pub use output::{atomic_write, fringe_csv, sha256_hex, to_json, Artifacts, FringeRow, FRINGE_HEADER};

use crate::noise_model::{fit_pump_probe, read_pump_probe_csv, standard_delays, synthesize_pump_probe, write_pump_probe_csv, FitResult, HeatingParams};
use crate::planner::{integration_time, IntegrationPlan, max_separation, multi_chip_yield, pair_yield, DegradeFlags, LinkBudget, ReferenceRun, YieldModel};
use crate::protocol_sim::{sample_histogram, ClickLog, Simulator, Tables};
use crate::rng::CounterRng;
use crate::stats::{
    analyze, fit_fringe, g2_from_counts, tally, visibility, CoincidenceTally, FringeFit, FringePoint, FringeUnit, VisibilityMode, WindowDefs,
    WitnessResult,
};
use rand::RngCore;
use serde::Serialize;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration; every violation listed.
    Config(Vec<String>),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn runtime(e: impl Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(errs) => {
                writeln!(f, "configuration error:")?;
                for e in errs {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
            CliError::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    PhaseSweep,
    TimeSweep,
    Witness,
    PumpProbe,
    PlanYield,
    PlanFiber,
    Analyze,
}

impl Command {
    pub const ALL: [Command; 7] =
        [Command::PhaseSweep, Command::TimeSweep, Command::Witness, Command::PumpProbe, Command::PlanYield, Command::PlanFiber, Command::Analyze];

    pub fn name(self) -> &'static str {
        match self {
            Command::PhaseSweep => "phase-sweep",
            Command::TimeSweep => "time-sweep",
            Command::Witness => "witness",
            Command::PumpProbe => "pump-probe",
            Command::PlanYield => "plan-yield",
            Command::PlanFiber => "plan-fiber",
            Command::Analyze => "analyze",
        }
    }

    /// Whether the subcommand draws random numbers and therefore needs a seed.
    pub fn needs_seed(self, cfg: &RunConfig) -> bool {
        match self {
            Command::PhaseSweep | Command::TimeSweep | Command::Witness | Command::PlanYield => true,
            Command::PumpProbe => cfg.pump_probe.data.is_none(),
            Command::PlanFiber | Command::Analyze => false,
        }
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown subcommand '{s}'"))
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Parses the file, applies overrides and checks that the subcommand has what it needs.
pub fn load(path: &Path, cmd: Command, ov: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    let mut raw = RawConfig::parse(&text).map_err(CliError::Config)?;
    if let Some(s) = ov.seed {
        raw.set("campaign", "seed", s);
    }
    if let Some(n) = ov.trials {
        raw.set("campaign", "trials", n);
    }
    let mut cfg = resolve(&raw, path.parent().unwrap_or(Path::new("."))).map_err(CliError::Config)?;
    if let Some(out) = &ov.out {
        cfg.out_dir = out.clone();
    }
    if cmd.needs_seed(&cfg) && cfg.campaign.seed.is_none() {
        return Err(CliError::Config(vec![format!("campaign.seed is required for {} (no implicit randomness)", cmd.name())]));
    }
    Ok(cfg)
}

/// Artifacts plus a short human-readable report.
#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub report: String,
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = match cmd {
        Command::PhaseSweep => phase_sweep(cfg),
        Command::TimeSweep => time_sweep(cfg),
        Command::Witness => witness(cfg),
        Command::PumpProbe => pump_probe(cfg),
        Command::PlanYield => plan_yield(cfg),
        Command::PlanFiber => plan_fiber(cfg),
        Command::Analyze => analyze_cmd(cfg),
    }?;
    out.artifacts.add("config.echo", cfg.echo.clone());
    Ok(out)
}

/// Runs and writes everything, manifest included.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = run(cmd, cfg)?;
    let trials = matches!(cmd, Command::PhaseSweep | Command::TimeSweep | Command::Witness).then_some(cfg.campaign.trials);
    out.artifacts
        .write(&cfg.out_dir, cmd.name(), &cfg.echo, cfg.campaign.seed.filter(|_| cmd.needs_seed(cfg)), trials)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", cfg.out_dir.display())))?;
    Ok(out)
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.campaign.seed.expect("seed checked in load")
}

/// Independent seed for sweep point `k`.
fn point_seed(seed: u64, k: u64) -> u64 {
    CounterRng::derived(seed, 0x5357, k).next_u64()
}

#[derive(Debug, Clone, Serialize)]
struct SweepPoint {
    x: f64,
    tally: CoincidenceTally,
    exact_g2: [[f64; 2]; 2],
    exact_witness: [Option<f64>; 2],
}

fn sample_point(tab: &Tables, x: f64, trials: u64, seed: u64) -> Result<(SweepPoint, FringeRow), CliError> {
    let h = sample_histogram(tab, trials, seed);
    let t = CoincidenceTally::from_histogram(trials, &h).map_err(CliError::runtime)?;
    let est = |i| g2_from_counts(&t, i, 1).ok();
    let (s, c) = (est(1), est(2));
    let nan = f64::NAN;
    let row = FringeRow {
        x,
        g2_same: s.map_or(nan, |e| e.value),
        g2_same_err_lo: s.map_or(nan, |e| e.lo),
        g2_same_err_hi: s.map_or(nan, |e| e.hi),
        g2_cross: c.map_or(nan, |e| e.value),
        g2_cross_err_lo: c.map_or(nan, |e| e.lo),
        g2_cross_err_hi: c.map_or(nan, |e| e.hi),
        g2_same_exact: tab.g2(1, 1),
        g2_cross_exact: tab.g2(2, 1),
    };
    let exact_g2 = [[tab.g2(1, 1), tab.g2(1, 2)], [tab.g2(2, 1), tab.g2(2, 2)]];
    Ok((SweepPoint { x, tally: t, exact_g2, exact_witness: tab.witness }, row))
}

#[derive(Debug, Serialize)]
struct FringeSummary {
    fit: Option<FringeFit>,
    visibility_fitted: Option<f64>,
    visibility_extrema: Option<f64>,
}

fn summarize(rows: &[FringeRow], x_scale: f64, unit: FringeUnit) -> FringeSummary {
    let pts: Vec<FringePoint> = rows
        .iter()
        .filter(|r| r.g2_same.is_finite())
        .map(|r| FringePoint { x: r.x * x_scale, y: r.g2_same, lo: r.g2_same_err_lo, hi: r.g2_same_err_hi })
        .collect();
    FringeSummary {
        fit: fit_fringe(&pts, unit).ok(),
        visibility_fitted: visibility(&pts, VisibilityMode::Fitted(unit)).ok(),
        visibility_extrema: visibility(&pts, VisibilityMode::Extrema).ok(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.4}"))
}

fn phase_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sim = Simulator::new(&cfg.protocol).map_err(CliError::runtime)?;
    let ev = sim.evolve(cfg.protocol.tau).map_err(CliError::runtime)?;
    let (mut points, mut rows) = (Vec::new(), Vec::new());
    for (k, &phi) in cfg.sweep.delta_phi_list.iter().enumerate() {
        let tab = sim.tables_for(&ev, phi).map_err(CliError::runtime)?;
        let (p, r) = sample_point(&tab, phi / std::f64::consts::PI, cfg.campaign.trials, point_seed(seed(cfg), k as u64))?;
        points.push(p);
        rows.push(r);
    }
    let summary = summarize(&rows, std::f64::consts::PI, FringeUnit::Phase);
    let report = format!(
        "phase sweep at tau = {:.1} ns: {} points, {} trials each\nfitted visibility {}, period {} pi\n",
        cfg.protocol.tau * 1e9,
        rows.len(),
        cfg.campaign.trials,
        fmt_opt(summary.visibility_fitted),
        fmt_opt(summary.fit.map(|f| f.period_reported()))
    );
    let mut a = Artifacts::default();
    a.add("phase_sweep.csv", fringe_csv(&rows));
    a.add("phase_sweep.json", to_json(&serde_json::json!({ "tau": cfg.protocol.tau, "points": points, "summary": summary })));
    Ok(Outcome { artifacts: a, report })
}

#[derive(Debug, Serialize)]
struct DelayVisibility {
    tau: f64,
    /// From the exact g² over the configured phase list.
    visibility: Option<f64>,
    bound: Option<f64>,
}

fn time_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sim = Simulator::new(&cfg.protocol).map_err(CliError::runtime)?;
    let budgets = cfg.protocol.noise_budgets();
    let (mut points, mut rows, mut vis) = (Vec::new(), Vec::new(), Vec::new());
    for (k, &tau) in cfg.sweep.tau_list.iter().enumerate() {
        let ev = sim.evolve(tau).map_err(CliError::runtime)?;
        let tab = sim.tables_for(&ev, cfg.protocol.interferometer.delta_phi).map_err(CliError::runtime)?;
        let (p, r) = sample_point(&tab, tau * 1e9, cfg.campaign.trials, point_seed(seed(cfg), k as u64))?;
        points.push(p);
        rows.push(r);
        let exact: Vec<FringePoint> = cfg
            .sweep
            .delta_phi_list
            .iter()
            .map(|&phi| sim.tables_for(&ev, phi).map(|t| FringePoint::exact(phi, t.g2(1, 1))))
            .collect::<Result<_, _>>()
            .map_err(CliError::runtime)?;
        vis.push(DelayVisibility {
            tau,
            visibility: visibility(&exact, VisibilityMode::Fitted(FringeUnit::Phase)).ok(),
            bound: crate::noise_model::visibility_bound(tau, &budgets[0], &budgets[1]).ok(),
        });
    }
    let summary = summarize(&rows, 1e-9, FringeUnit::Delay);
    let mut report = format!(
        "time sweep: {} delays, {} trials each, fitted period {} ns\n  tau_ns  visibility  bound\n",
        rows.len(),
        cfg.campaign.trials,
        fmt_opt(summary.fit.map(|f| f.period_reported()))
    );
    for v in &vis {
        report.push_str(&format!("  {:>7.1}  {:>10}  {:>6}\n", v.tau * 1e9, fmt_opt(v.visibility), fmt_opt(v.bound)));
    }
    let mut a = Artifacts::default();
    a.add("time_sweep.csv", fringe_csv(&rows));
    a.add("time_sweep.json", to_json(&serde_json::json!({ "points": points, "visibility": vis, "summary": summary })));
    Ok(Outcome { artifacts: a, report })
}

fn witness_report(w: &WitnessResult) -> String {
    format!(
        "R_m per detector: {} / {}; symmetrized {:.3} (+{:.3} -{:.3}); P(R_m < {}) = {:.4}\n",
        fmt_opt(w.point[0]),
        fmt_opt(w.point[1]),
        w.symmetrized.ml,
        w.symmetrized.hi - w.symmetrized.ml,
        w.symmetrized.ml - w.symmetrized.lo,
        w.threshold,
        w.confidence
    )
}

fn witness(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sim = Simulator::new(&cfg.protocol).map_err(CliError::runtime)?;
    let tab = sim.tables().map_err(CliError::runtime)?;
    let h = sample_histogram(&tab, cfg.campaign.trials, seed(cfg));
    let t = CoincidenceTally::from_histogram(cfg.campaign.trials, &h).map_err(CliError::runtime)?;
    let w = analyze(&t, cfg.analysis.grid_step, cfg.analysis.threshold).map_err(CliError::runtime)?;
    let mut report = format!("simulated {} trials at tau = {:.1} ns\n", cfg.campaign.trials, cfg.protocol.tau * 1e9);
    report.push_str(&witness_report(&w));
    if let [Some(a), Some(b)] = tab.witness {
        report.push_str(&format!("exact-state R: {a:.4} / {b:.4}\n"));
    }
    let mut a = Artifacts::default();
    a.add("tally.json", t.to_json());
    a.add("witness.json", to_json(&w));
    Ok(Outcome { artifacts: a, report })
}

fn analyze_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())));
    let s = &cfg.analyze;
    let t = match (&s.tally, &s.log) {
        (Some(p), None) => CoincidenceTally::from_json(&read(p)?).map_err(CliError::runtime)?,
        (None, Some(p)) => {
            let meta = s.meta.clone().unwrap_or_else(|| p.with_extension("meta.json"));
            let log = ClickLog::from_parts(&read(p)?, &read(&meta)?).map_err(CliError::Runtime)?;
            tally(&log, &WindowDefs::default()).map_err(CliError::runtime)?
        }
        (None, None) => return Err(CliError::Config(vec!["analyze needs analyze.tally or analyze.log".into()])),
        (Some(_), Some(_)) => return Err(CliError::Config(vec!["set only one of analyze.tally and analyze.log".into()])),
    };
    let w = analyze(&t, cfg.analysis.grid_step, cfg.analysis.threshold).map_err(CliError::runtime)?;
    let mut a = Artifacts::default();
    a.add("tally.json", t.to_json());
    a.add("witness.json", to_json(&w));
    Ok(Outcome { artifacts: a, report: witness_report(&w) })
}

#[derive(Debug, Serialize)]
struct PumpProbeReport {
    synthesized: bool,
    fit: FitResult,
    lifetime_us: f64,
    bath_lifetime_us: f64,
    truth_lifetime_us: Option<f64>,
    truth_bath_lifetime_us: Option<f64>,
}

fn pump_probe(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let pp = &cfg.pump_probe;
    let dev = &cfg.protocol.devices[pp.device];
    let (data, truth) = match &pp.data {
        Some(p) => (read_pump_probe_csv(p).map_err(CliError::runtime)?, None),
        None => {
            let h = HeatingParams { n_final: pp.offset, ..dev.heating() };
            let n0 = pp.n0.unwrap_or(dev.n_init);
            let d = synthesize_pump_probe(&h, n0, &standard_delays(), pp.rel_noise, seed(cfg)).map_err(CliError::runtime)?;
            (d, Some(h))
        }
    };
    let fit = fit_pump_probe(&data).map_err(CliError::runtime)?;
    let rep = PumpProbeReport {
        synthesized: truth.is_some(),
        lifetime_us: 1e6 / fit.heating.gamma,
        bath_lifetime_us: 1e6 / fit.heating.bath_gamma,
        truth_lifetime_us: truth.map(|h| 1e6 / h.gamma),
        truth_bath_lifetime_us: truth.map(|h| 1e6 / h.bath_gamma),
        fit,
    };
    let report = format!(
        "pump-probe fit over {} points: 1/Gamma = {:.3} us, 1/gamma = {:.3} us, chi2/dof = {:.2}\n",
        data.len(),
        rep.lifetime_us,
        rep.bath_lifetime_us,
        rep.fit.chi2 / rep.fit.dof.max(1) as f64
    );
    let mut a = Artifacts::default();
    if truth.is_some() {
        a.add("pump_probe_data.csv", write_pump_probe_csv(&data));
    }
    a.add("pump_probe.json", to_json(&rep));
    Ok(Outcome { artifacts: a, report })
}

#[derive(Debug, Serialize)]
struct YieldRow {
    chips: usize,
    devices_per_chip: usize,
    offset_nm: f64,
    analytic: f64,
    monte_carlo: f64,
    standard_error: f64,
    discrepancy_se: f64,
}

fn plan_yield(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let y = &cfg.yields;
    let model = |chips: usize, n: usize| YieldModel {
        carrier_nm: y.carrier_nm,
        ..YieldModel::uniform(chips, n, y.sigma_nm, y.window_mhz)
    };
    let mut rows = Vec::new();
    for (k, &off) in y.offset_list_nm.iter().enumerate() {
        let mut m = model(2, y.devices_per_chip);
        m.offset_nm[1] = off;
        let r = pair_yield(&m, y.reps, point_seed(seed(cfg), k as u64)).map_err(CliError::runtime)?;
        rows.push(YieldRow {
            chips: 2,
            devices_per_chip: y.devices_per_chip,
            offset_nm: off,
            analytic: r.analytic,
            monte_carlo: r.monte_carlo,
            standard_error: r.standard_error,
            discrepancy_se: r.discrepancy(),
        });
    }
    let m = model(y.multi_chips, y.multi_devices_per_chip);
    let r = multi_chip_yield(&m, y.reps, point_seed(seed(cfg), y.offset_list_nm.len() as u64)).map_err(CliError::runtime)?;
    rows.push(YieldRow {
        chips: y.multi_chips,
        devices_per_chip: y.multi_devices_per_chip,
        offset_nm: 0.0,
        analytic: r.analytic,
        monte_carlo: r.monte_carlo,
        standard_error: r.standard_error,
        discrepancy_se: r.discrepancy(),
    });
    let mut report = format!(
        "match window {} MHz = {:.3} pm at {} nm, {} repetitions\nchips  devices  offset_nm  analytic   monte_carlo  se        gap/se\n",
        y.window_mhz,
        m.window_nm() * 1e3,
        y.carrier_nm,
        y.reps
    );
    for r in &rows {
        report.push_str(&format!(
            "{:>5}  {:>7}  {:>9.2}  {:>9.6}  {:>11.6}  {:>8.2e}  {:>6.2}\n",
            r.chips, r.devices_per_chip, r.offset_nm, r.analytic, r.monte_carlo, r.standard_error, r.discrepancy_se
        ));
    }
    let mut a = Artifacts::default();
    a.add("plan_yield.json", to_json(&rows));
    a.add("plan_yield.txt", report.clone());
    Ok(Outcome { artifacts: a, report })
}

#[derive(Debug, Serialize)]
struct FlagRow {
    flags: DegradeFlags,
    added_db: [f64; 2],
    km: [f64; 2],
    total_km: f64,
}

fn plan_fiber(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let l = &cfg.link;
    let t = match &l.tally {
        Some(p) => {
            let s = std::fs::read_to_string(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
            CoincidenceTally::from_json(&s).map_err(CliError::runtime)?
        }
        None => CoincidenceTally::reference_extended(),
    };
    let w = analyze(&t, cfg.analysis.grid_step, cfg.analysis.threshold).map_err(CliError::runtime)?;
    let reference = ReferenceRun::from_analysis(&t, &w);
    let link = LinkBudget {
        fiber_db_per_km: l.fiber_db_per_km,
        repetition_period: l.repetition_period,
        overhead: l.overhead,
        flags: l.flags,
        ..LinkBudget::reference(reference)
    };
    let floor = match l.retention {
        Some(r) => link.floor_for_retention(r).map_err(CliError::runtime)?,
        None => l.g2_floor,
    };
    let sep = max_separation(&link, floor).map_err(CliError::runtime)?;
    let mut flag_rows = Vec::new();
    for herald_dilution in [true, false] {
        for decay_factor in [true, false] {
            let flags = DegradeFlags { herald_dilution, decay_factor };
            let s = max_separation(&LinkBudget { flags, ..link.clone() }, floor).map_err(CliError::runtime)?;
            flag_rows.push(FlagRow { flags, added_db: s.added_db, km: s.km, total_km: s.total_km });
        }
    }
    // infeasible separations are reported, not fatal
    let plans: Vec<(f64, Result<IntegrationPlan, String>)> =
        l.separation_list_km.iter().map(|&km| (km, integration_time(&link, floor, km, l.k_sigma).map_err(|e| e.to_string()))).collect();

    let mut report = format!(
        "g2 floor {floor:.3}: added loss {:.2} dB (A) / {:.2} dB (B), {:.1} km + {:.1} km = {:.1} km of fiber\n",
        sep.added_db[0], sep.added_db[1], sep.km[0], sep.km[1], sep.total_km
    );
    report.push_str("dilution  decay  dB_A    dB_B    total_km\n");
    for r in &flag_rows {
        report.push_str(&format!(
            "{:<8}  {:<5}  {:>6.2}  {:>6.2}  {:>8.1}\n",
            r.flags.herald_dilution, r.flags.decay_factor, r.added_db[0], r.added_db[1], r.total_km
        ));
    }
    report.push_str("separation_km  km_A   km_B   days\n");
    for (km, p) in &plans {
        match p {
            Ok(p) => report.push_str(&format!("{km:>13.1}  {:>5.1}  {:>5.1}  {:>7.1}\n", p.km[0], p.km[1], p.days)),
            Err(e) => report.push_str(&format!("{km:>13.1}  {e}\n")),
        }
    }
    let integration: Vec<serde_json::Value> = plans
        .iter()
        .map(|(km, p)| match p {
            Ok(p) => serde_json::json!(p),
            Err(e) => serde_json::json!({ "separation_km": km, "error": e }),
        })
        .collect();
    let js = serde_json::json!({
        "reference": reference,
        "floor": floor,
        "separation": sep,
        "flag_combinations": flag_rows,
        "integration": integration,
    });
    let mut a = Artifacts::default();
    a.add("plan_fiber.json", to_json(&js));
    a.add("plan_fiber.txt", report.clone());
    Ok(Outcome { artifacts: a, report })
}

#[cfg(test)]
mod tests;
