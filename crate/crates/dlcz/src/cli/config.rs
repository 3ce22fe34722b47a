//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [protocol]
//! preset = desk
//! tau_ns = 123
//!
//! [campaign]
//! seed = 7
//! trials = 100000000
//! ```
//!
//! Unit suffixes on the keys say what the number means (`_ns`, `_us`, `_per_us`,
//! `_ghz`, `_mhz`, `_nm`, `_km`, `_pi` for multiples of π). Unknown or repeated keys
//! are errors; all problems are collected before reporting.

use crate::planner::DegradeFlags;
use crate::protocol_sim::{presets, Arm, Envelope, ProtocolConfig};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but untyped file: section → key → value.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, Vec<String>> {
        let mut raw = Self::default();
        let mut errs = Vec::new();
        let mut section = String::new();
        for (k, line) in text.lines().enumerate() {
            let n = k + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => section = name.trim().to_string(),
                    _ => errs.push(format!("line {n}: malformed section header '{line}'")),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errs.push(format!("line {n}: expected key = value, got '{line}'"));
                continue;
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                errs.push(format!("line {n}: malformed key '{key}'"));
                continue;
            }
            let sec = raw.sections.entry(section.clone()).or_default();
            if let Some(prev) = sec.get(key) {
                errs.push(format!("line {n}: duplicate key {} (first set on line {})", path(&section, key), prev.line));
                continue;
            }
            sec.insert(key.to_string(), Entry { value: value.trim().to_string(), line: n });
        }
        if errs.is_empty() {
            Ok(raw)
        } else {
            Err(errs)
        }
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Display) {
        self.sections.entry(section.into()).or_default().insert(key.into(), Entry { value: value.to_string(), line: 0 });
    }

    pub fn contains(&self, section: &str, key: &str) -> bool {
        self.sections.get(section).is_some_and(|s| s.contains_key(key))
    }
}

fn path(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

/// Typed reads with defaults; records what was used and every failure.
struct Reader<'a> {
    raw: &'a RawConfig,
    base_dir: PathBuf,
    used: BTreeMap<(String, String), ()>,
    errs: Vec<String>,
    echo: BTreeMap<String, Vec<(String, String)>>,
}

impl<'a> Reader<'a> {
    fn lookup(&mut self, sec: &str, key: &str) -> Option<&'a Entry> {
        self.used.insert((sec.into(), key.into()), ());
        self.raw.sections.get(sec)?.get(key)
    }

    fn note(&mut self, sec: &str, key: &str, shown: String) {
        self.echo.entry(sec.into()).or_default().push((key.into(), shown));
    }

    fn parse<T: FromStr>(&mut self, sec: &str, key: &str, e: &Entry) -> Option<T>
    where
        T::Err: Display,
    {
        match e.value.parse::<T>() {
            Ok(v) => Some(v),
            Err(err) => {
                self.errs.push(format!("{} (line {}): cannot parse '{}': {err}", path(sec, key), e.line, e.value));
                None
            }
        }
    }

    fn opt<T: FromStr + Display + Clone>(&mut self, sec: &str, key: &str) -> Option<T>
    where
        T::Err: Display,
    {
        let e = self.lookup(sec, key)?;
        let v = self.parse::<T>(sec, key, e)?;
        self.note(sec, key, v.to_string());
        Some(v)
    }

    fn get<T: FromStr + Display + Clone>(&mut self, sec: &str, key: &str, default: T) -> T
    where
        T::Err: Display,
    {
        match self.lookup(sec, key) {
            Some(e) => {
                let v = self.parse::<T>(sec, key, e).unwrap_or(default);
                self.note(sec, key, v.to_string());
                v
            }
            None => {
                self.note(sec, key, default.to_string());
                default
            }
        }
    }

    /// The file holds the value in units of `unit` (SI per file unit); returns SI.
    fn scaled(&mut self, sec: &str, key: &str, default_si: f64, unit: f64) -> f64 {
        self.get(sec, key, default_si / unit) * unit
    }

    fn list(&mut self, sec: &str, key: &str, default: &[f64]) -> Vec<f64> {
        let out = match self.lookup(sec, key) {
            Some(e) if e.value.is_empty() => Vec::new(),
            Some(e) => {
                let mut v = Vec::new();
                for part in e.value.split(',') {
                    match part.trim().parse::<f64>() {
                        Ok(x) => v.push(x),
                        Err(err) => {
                            self.errs.push(format!("{} (line {}): bad list item '{}': {err}", path(sec, key), e.line, part.trim()));
                            return default.to_vec();
                        }
                    }
                }
                v
            }
            None => default.to_vec(),
        };
        self.note(sec, key, out.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
        out
    }

    fn flag(&mut self, sec: &str, key: &str, default: bool) -> bool {
        let Some(e) = self.lookup(sec, key) else {
            self.note(sec, key, default.to_string());
            return default;
        };
        let v = match e.value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => true,
            "false" | "no" | "off" | "0" => false,
            other => {
                self.errs.push(format!("{} (line {}): expected true/false, got '{other}'", path(sec, key), e.line));
                default
            }
        };
        self.note(sec, key, v.to_string());
        v
    }

    fn file(&mut self, sec: &str, key: &str) -> Option<PathBuf> {
        let e = self.lookup(sec, key)?;
        let p = PathBuf::from(&e.value);
        self.note(sec, key, e.value.clone());
        Some(if p.is_absolute() { p } else { self.base_dir.join(p) })
    }

    fn unknown_keys(&mut self) {
        for (sec, keys) in &self.raw.sections {
            for (key, e) in keys {
                if !self.used.contains_key(&(sec.clone(), key.clone())) {
                    self.errs.push(format!("unknown key {} (line {})", path(sec, key), e.line));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSection {
    pub seed: Option<u64>,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    /// Delays (s) for the time sweep.
    pub tau_list: Vec<f64>,
    /// Phase settings (rad) for the phase sweep and the witness run.
    pub delta_phi_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSection {
    pub grid_step: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YieldSection {
    pub devices_per_chip: usize,
    pub sigma_nm: f64,
    pub window_mhz: f64,
    pub carrier_nm: f64,
    /// Offsets of the second chip for the pair scan.
    pub offset_list_nm: Vec<f64>,
    pub multi_chips: usize,
    pub multi_devices_per_chip: usize,
    pub reps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSection {
    /// Reference tally; the published pooled counts when absent.
    pub tally: Option<PathBuf>,
    pub fiber_db_per_km: f64,
    pub repetition_period: f64,
    pub overhead: f64,
    pub g2_floor: f64,
    /// Overrides the floor with 1 + retention·(g²_min − 1) when set.
    pub retention: Option<f64>,
    pub separation_list_km: Vec<f64>,
    pub k_sigma: f64,
    pub flags: DegradeFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpProbeSection {
    /// Measured trace; synthesized from device A's heating parameters when absent.
    pub data: Option<PathBuf>,
    pub rel_noise: f64,
    /// Occupation at the pump pulse; the device's initial occupation when absent.
    pub n0: Option<f64>,
    /// Constant background added to the synthesized trace.
    pub offset: f64,
    /// Device used for synthesis, 0 or 1.
    pub device: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeSection {
    pub tally: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub meta: Option<PathBuf>,
}

/// Everything one invocation needs, fully validated.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub protocol: ProtocolConfig,
    pub sweep: SweepSection,
    pub campaign: CampaignSection,
    pub analysis: AnalysisSection,
    pub yields: YieldSection,
    pub link: LinkSection,
    pub pump_probe: PumpProbeSection,
    pub analyze: AnalyzeSection,
    pub out_dir: PathBuf,
    /// Resolved configuration in the input syntax, defaults included.
    pub echo: String,
}

fn preset(name: &str) -> Option<ProtocolConfig> {
    match name {
        "paper" => Some(presets::paper()),
        "desk" => Some(presets::desk()),
        "time_sweep" => Some(presets::time_sweep()),
        "ideal" => Some(presets::ideal(0.01)),
        _ => None,
    }
}

const US: f64 = 1e-6;
const NS: f64 = 1e-9;

fn read_device(r: &mut Reader, sec: &str, d: &mut crate::protocol_sim::DeviceParams) {
    d.omega_m = r.scaled(sec, "freq_ghz", d.omega_m / (2.0 * PI), 1e9) * 2.0 * PI;
    d.gamma_decay = r.scaled(sec, "gamma_per_us", d.gamma_decay, 1.0 / US);
    d.bath_k = r.scaled(sec, "bath_k_per_us", d.bath_k, 1.0 / US);
    d.bath_gamma = r.scaled(sec, "bath_gamma_per_us", d.bath_gamma, 1.0 / US);
    d.n_init = r.get(sec, "n_init", d.n_init);
    d.p_pump = r.get(sec, "p_pump", d.p_pump);
    d.p_read = r.get(sec, "p_read", d.p_read);
    d.eta_path = r.get(sec, "eta_path", d.eta_path);
    d.n_leak = r.get(sec, "n_leak", d.n_leak);
    d.n_read_heating = r.get(sec, "n_read_heating", d.n_read_heating);
    d.meta.wavelength_nm = r.get(sec, "wavelength_nm", d.meta.wavelength_nm);
    d.meta.quality_factor = r.get(sec, "quality_factor", d.meta.quality_factor);
    d.meta.g0_hz = r.get(sec, "g0_hz", d.meta.g0_hz);
}

fn read_protocol(r: &mut Reader) -> (String, ProtocolConfig) {
    let name: String = r.get("protocol", "preset", "desk".to_string());
    let mut c = preset(&name).unwrap_or_else(|| {
        r.errs.push(format!("protocol.preset: unknown preset '{name}' (paper, desk, time_sweep, ideal)"));
        presets::desk()
    });
    c.tau = r.scaled("protocol", "tau_ns", c.tau, NS);
    read_device(r, "device_a", &mut c.devices[0]);
    read_device(r, "device_b", &mut c.devices[1]);

    let s = "interferometer";
    let i = &mut c.interferometer;
    i.phi0 = r.scaled(s, "phi0_pi", i.phi0, PI);
    i.delta_phi = r.scaled(s, "delta_phi_pi", i.delta_phi, PI);
    i.delta_omega_m = r.scaled(s, "delta_freq_mhz", i.delta_omega_m / (2.0 * PI), 1e6) * 2.0 * PI;
    i.splitter_deviation = r.get(s, "splitter_deviation", i.splitter_deviation);
    i.balance_attenuation = r.get(s, "balance_attenuation", i.balance_attenuation);
    let arm = r.get(s, "balance_arm", if i.balance_arm == Arm::A { "a" } else { "b" }.to_string());
    i.balance_arm = match arm.to_ascii_lowercase().as_str() {
        "a" => Arm::A,
        "b" => Arm::B,
        other => {
            r.errs.push(format!("{s}.balance_arm: expected a or b, got '{other}'"));
            i.balance_arm
        }
    };
    i.phase_jitter_sigma = r.get(s, "phase_jitter_rad", i.phase_jitter_sigma);
    i.serrodyne.compensated = r.flag(s, "serrodyne_compensated", i.serrodyne.compensated);
    let (kind, width) = match i.serrodyne.envelope {
        Envelope::Gaussian { fwhm } => ("gaussian", fwhm),
        Envelope::Rectangular { width } => ("rectangular", width),
    };
    let kind: String = r.get(s, "envelope", kind.to_string());
    let width = r.scaled(s, "envelope_width_ns", width, NS);
    i.serrodyne.envelope = match kind.as_str() {
        "gaussian" => Envelope::Gaussian { fwhm: width },
        "rectangular" => Envelope::Rectangular { width },
        other => {
            r.errs.push(format!("{s}.envelope: expected gaussian or rectangular, got '{other}'"));
            i.serrodyne.envelope
        }
    };

    let s = "detectors";
    let d = &mut c.detectors;
    for j in 0..2 {
        d.efficiency[j] = r.get(s, &format!("efficiency_{}", j + 1), d.efficiency[j]);
        d.p_dark[j] = r.get(s, &format!("p_dark_{}", j + 1), d.p_dark[j]);
    }

    let s = "truncation";
    let t = &mut c.truncation;
    t.mech_pump = r.get(s, "mech_pump", t.mech_pump);
    t.optical = r.get(s, "optical", t.optical);
    t.delay = r.opt(s, "delay");
    t.read = r.get(s, "read", t.read);
    t.slices = r.get(s, "slices", t.slices);
    t.jitter_nodes = r.get(s, "jitter_nodes", t.jitter_nodes);
    (name, c)
}

/// Builds a validated [`RunConfig`]; relative paths resolve against `base_dir`.
pub fn resolve(raw: &RawConfig, base_dir: &Path) -> Result<RunConfig, Vec<String>> {
    let mut r = Reader { raw, base_dir: base_dir.to_path_buf(), used: BTreeMap::new(), errs: Vec::new(), echo: BTreeMap::new() };
    let (preset, protocol) = read_protocol(&mut r);
    let tau_ns = protocol.tau / NS;
    let sweep = SweepSection {
        tau_list: r.list("protocol", "tau_list_ns", &[tau_ns]).into_iter().map(|t| t * NS).collect(),
        delta_phi_list: r
            .list("protocol", "delta_phi_list_pi", &(0..16).map(|k| k as f64 / 8.0).collect::<Vec<_>>())
            .into_iter()
            .map(|x| x * PI)
            .collect(),
    };
    let campaign = CampaignSection { seed: r.opt("campaign", "seed"), trials: r.get("campaign", "trials", 10_000_000u64) };
    let analysis = AnalysisSection { grid_step: r.get("analysis", "grid_step", 0.01), threshold: r.get("analysis", "threshold", 1.0) };
    let s = "yield";
    let yields = YieldSection {
        devices_per_chip: r.get(s, "devices_per_chip", 234usize),
        sigma_nm: r.get(s, "sigma_nm", 2.0),
        window_mhz: r.get(s, "window_mhz", 100.0),
        carrier_nm: r.get(s, "carrier_nm", 1550.0),
        offset_list_nm: r.list(s, "offset_list_nm", &[0.0, 2.5, 5.0]),
        multi_chips: r.get(s, "multi_chips", 4usize),
        multi_devices_per_chip: r.get(s, "multi_devices_per_chip", 500usize),
        reps: r.get(s, "reps", 100_000u64),
    };
    let s = "link";
    let link = LinkSection {
        tally: r.file(s, "tally"),
        fiber_db_per_km: r.get(s, "fiber_db_per_km", 0.17),
        repetition_period: r.scaled(s, "repetition_us", 50e-6, US),
        overhead: r.get(s, "overhead", 0.15),
        g2_floor: r.get(s, "g2_floor", 7.1),
        retention: r.opt(s, "retention"),
        separation_list_km: r.list(s, "separation_list_km", &[75.0, 94.0]),
        k_sigma: r.get(s, "k_sigma", 3.0),
        flags: DegradeFlags { herald_dilution: r.flag(s, "herald_dilution", true), decay_factor: r.flag(s, "decay_factor", true) },
    };
    let s = "pump_probe";
    let pump_probe = PumpProbeSection {
        data: r.file(s, "data"),
        rel_noise: r.get(s, "rel_noise", 0.02),
        n0: r.opt(s, "n0"),
        offset: r.get(s, "offset", 0.05),
        device: match r.get(s, "device", "a".to_string()).as_str() {
            "a" => 0,
            "b" => 1,
            other => {
                r.errs.push(format!("{s}.device: expected a or b, got '{other}'"));
                0
            }
        },
    };
    let s = "analyze";
    let analyze = AnalyzeSection { tally: r.file(s, "tally"), log: r.file(s, "log"), meta: r.file(s, "meta") };
    // where results go is not part of the run description, so it stays out of the echo
    let out_dir = match r.lookup("output", "dir") {
        Some(e) if Path::new(&e.value).is_absolute() => PathBuf::from(&e.value),
        Some(e) => base_dir.join(&e.value),
        None => base_dir.join("out"),
    };
    r.unknown_keys();

    let mut errs = std::mem::take(&mut r.errs);
    errs.extend(protocol.violations());
    check(&mut errs, &sweep, &campaign, &analysis, &yields, &link, &pump_probe);
    if !errs.is_empty() {
        return Err(errs);
    }
    let echo = render_echo(&r.echo);
    Ok(RunConfig { preset, protocol, sweep, campaign, analysis, yields, link, pump_probe, analyze, out_dir, echo })
}

fn check(
    errs: &mut Vec<String>,
    sweep: &SweepSection,
    campaign: &CampaignSection,
    analysis: &AnalysisSection,
    y: &YieldSection,
    link: &LinkSection,
    pp: &PumpProbeSection,
) {
    if sweep.tau_list.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        errs.push("protocol.tau_list_ns: delays must be finite and >= 0".into());
    }
    if sweep.delta_phi_list.iter().any(|x| !x.is_finite()) {
        errs.push("protocol.delta_phi_list_pi: phases must be finite".into());
    }
    if campaign.trials == 0 {
        errs.push("campaign.trials must be >= 1".into());
    }
    if !(analysis.grid_step > 0.0 && analysis.grid_step <= 0.5) {
        errs.push(format!("analysis.grid_step must lie in (0, 0.5], got {}", analysis.grid_step));
    }
    if !(analysis.threshold > 0.0 && analysis.threshold.is_finite()) {
        errs.push(format!("analysis.threshold must be > 0, got {}", analysis.threshold));
    }
    if y.devices_per_chip == 0 || y.multi_devices_per_chip == 0 {
        errs.push("yield: devices per chip must be >= 1".into());
    }
    if y.multi_chips < 2 {
        errs.push(format!("yield.multi_chips must be >= 2, got {}", y.multi_chips));
    }
    if !(y.sigma_nm > 0.0) {
        errs.push(format!("yield.sigma_nm must be > 0, got {}", y.sigma_nm));
    }
    if !(y.window_mhz > 0.0) {
        errs.push(format!("yield.window_mhz must be > 0, got {}", y.window_mhz));
    }
    if !(y.carrier_nm > 0.0) {
        errs.push(format!("yield.carrier_nm must be > 0, got {}", y.carrier_nm));
    }
    if y.reps == 0 {
        errs.push("yield.reps must be >= 1".into());
    }
    if !(link.fiber_db_per_km > 0.0) {
        errs.push(format!("link.fiber_db_per_km must be > 0, got {}", link.fiber_db_per_km));
    }
    if !(link.repetition_period > 0.0) {
        errs.push("link.repetition_us must be > 0".into());
    }
    if !(0.0..1.0).contains(&link.overhead) {
        errs.push(format!("link.overhead must lie in [0, 1), got {}", link.overhead));
    }
    if let Some(r) = link.retention {
        if !(r > 0.0 && r <= 1.0) {
            errs.push(format!("link.retention must lie in (0, 1], got {r}"));
        }
    }
    if !(link.g2_floor > 1.0) {
        errs.push(format!("link.g2_floor must be > 1, got {}", link.g2_floor));
    }
    if link.separation_list_km.iter().any(|&s| !(s >= 0.0)) {
        errs.push("link.separation_list_km: separations must be >= 0".into());
    }
    if !(link.k_sigma > 0.0) {
        errs.push(format!("link.k_sigma must be > 0, got {}", link.k_sigma));
    }
    if !(pp.rel_noise >= 0.0 && pp.rel_noise < 1.0) {
        errs.push(format!("pump_probe.rel_noise must lie in [0, 1), got {}", pp.rel_noise));
    }
    if pp.n0.is_some_and(|n| !(n >= 0.0)) {
        errs.push("pump_probe.n0 must be >= 0".into());
    }
    if !(pp.offset >= 0.0) {
        errs.push(format!("pump_probe.offset must be >= 0, got {}", pp.offset));
    }
}

fn render_echo(echo: &BTreeMap<String, Vec<(String, String)>>) -> String {
    let mut out = String::new();
    for (sec, keys) in echo {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("[{sec}]\n"));
        for (k, v) in keys {
            out.push_str(&format!("{k} = {v}\n"));
        }
    }
    out
}

/// Reads and resolves a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?;
    let raw = RawConfig::parse(&text)?;
    resolve(&raw, path.parent().unwrap_or(Path::new(".")))
}
