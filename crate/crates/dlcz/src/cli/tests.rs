use super::*;
use std::f64::consts::PI;

fn cfg_from(text: &str) -> Result<RunConfig, Vec<String>> {
    resolve(&RawConfig::parse(text)?, Path::new("/tmp"))
}

#[test]
fn minimal_config_fills_defaults() {
    let c = cfg_from("[campaign]\nseed = 3\n").unwrap();
    assert_eq!(c.preset, "desk");
    assert_eq!(c.protocol, crate::protocol_sim::presets::desk());
    assert_eq!(c.campaign.seed, Some(3));
    assert_eq!(c.sweep.delta_phi_list.len(), 16);
    assert!(c.echo.contains("[device_a]") && c.echo.contains("gamma_per_us = "));
    // the echo is itself a valid config describing the same run
    let again = cfg_from(&c.echo).unwrap();
    assert_eq!(again.campaign, c.campaign);
    assert_eq!(again.echo, c.echo);
    for d in 0..2 {
        let (a, b) = (again.protocol.devices[d], c.protocol.devices[d]);
        assert!((a.omega_m / b.omega_m - 1.0).abs() < 1e-12);
        assert!((a.gamma_decay / b.gamma_decay - 1.0).abs() < 1e-12);
        assert_eq!(a.p_pump, b.p_pump);
    }
}

#[test]
fn unit_suffixes() {
    let c = cfg_from("[protocol]\ntau_ns = 500\ntau_list_ns = 100, 200\ndelta_phi_list_pi = 0, 0.5\n[device_b]\ngamma_per_us = 0.25\n").unwrap();
    assert!((c.protocol.tau - 500e-9).abs() < 1e-20);
    assert_eq!(c.sweep.tau_list.len(), 2);
    assert!((c.sweep.delta_phi_list[1] - 0.5 * PI).abs() < 1e-15);
    assert!((c.protocol.devices[1].gamma_decay - 2.5e5).abs() < 1e-6);
}

#[test]
fn guards_and_all_violations() {
    let errs = cfg_from("[device_a]\np_pump = 0.2\n").unwrap_err();
    assert!(errs.iter().any(|e| e.contains("p_pump ≤ 0.05")), "{errs:?}");

    let errs = cfg_from("[campaign]\nseed = 1\nseed = 2\n").unwrap_err();
    assert!(errs[0].contains("duplicate key campaign.seed"), "{errs:?}");

    let errs = cfg_from("[device_a]\np_pump = 0.2\nbogus = 1\n[detectors]\np_dark_2 = 0.5\n[yield]\nsigma_nm = -1\n").unwrap_err();
    assert_eq!(errs.len(), 4, "{errs:?}");
    assert!(errs.iter().any(|e| e.contains("unknown key device_a.bogus (line 3)")));

    assert!(RawConfig::parse("[campaign\n").is_err());
    assert!(RawConfig::parse("just words\n").is_err());
    assert!(cfg_from("[campaign]\ntrials = lots\n").unwrap_err()[0].contains("campaign.trials"));
    assert!(cfg_from("[protocol]\npreset = lab\n").is_err());
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn seed_is_required_for_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_cfg(dir.path(), "[campaign]\ntrials = 10\n");
    for cmd in [Command::PhaseSweep, Command::TimeSweep, Command::Witness, Command::PlanYield, Command::PumpProbe] {
        let e = load(&p, cmd, &Overrides::default()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("campaign.seed is required"));
    }
    assert!(load(&p, Command::PlanFiber, &Overrides::default()).is_ok());
    let c = load(&p, Command::Witness, &Overrides { seed: Some(9), trials: Some(20), out: None }).unwrap();
    assert_eq!((c.campaign.seed, c.campaign.trials), (Some(9), 20));
    let missing = load(&dir.path().join("nope.cfg"), Command::Analyze, &Overrides::default()).unwrap_err();
    assert_eq!(missing.exit_code(), 2);
}

#[test]
fn fringe_csv_rows() {
    assert_eq!(fringe_csv(&[]), format!("{}\n", FRINGE_HEADER.join(",")));
    let c = cfg_from("[campaign]\nseed = 1\ntrials = 20000\n[protocol]\ndelta_phi_list_pi = 0, 0.25, 0.5, 0.75, 1, 1.25, 1.5, 1.75\n").unwrap();
    let out = run(Command::PhaseSweep, &c).unwrap();
    let csv = String::from_utf8(out.artifacts.get("phase_sweep.csv").unwrap().to_vec()).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 9);
    assert!(lines[0].starts_with("x,g2_same,g2_same_err_lo,g2_same_err_hi,g2_cross,"));

    let empty = cfg_from("[campaign]\nseed = 1\ntrials = 10\n[protocol]\ndelta_phi_list_pi =\n").unwrap();
    let out = run(Command::PhaseSweep, &empty).unwrap();
    assert_eq!(out.artifacts.get("phase_sweep.csv").unwrap().iter().filter(|&&b| b == b'\n').count(), 1);
}

#[test]
fn witness_tally_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg_from(&format!("[campaign]\nseed = 5\ntrials = 3000000\n[output]\ndir = {}\n", dir.path().join("w").display())).unwrap();
    let w = execute(Command::Witness, &c).unwrap();
    let tally_path = dir.path().join("w/tally.json");
    let a = cfg_from(&format!("[analyze]\ntally = {}\n[output]\ndir = {}\n", tally_path.display(), dir.path().join("a").display())).unwrap();
    execute(Command::Analyze, &a).unwrap();
    let first = std::fs::read(dir.path().join("w/witness.json")).unwrap();
    let second = std::fs::read(dir.path().join("a/witness.json")).unwrap();
    assert_eq!(first, second);
    assert_eq!(w.artifacts.get("witness.json").unwrap(), first.as_slice());
    let manifest = std::fs::read_to_string(dir.path().join("w/manifest.json")).unwrap();
    assert!(manifest.contains(&sha256_hex(&first)));
    assert!(manifest.contains("\"seed\": 5"));
    // no temp files left behind
    assert!(std::fs::read_dir(dir.path().join("w")).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn analyze_reference_tally() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.json");
    std::fs::write(&p, CoincidenceTally::reference_opt().to_json()).unwrap();
    let c = cfg_from(&format!("[analyze]\ntally = {}\n", p.display())).unwrap();
    let out = run(Command::Analyze, &c).unwrap();
    let w: WitnessResult = serde_json::from_slice(out.artifacts.get("witness.json").unwrap()).unwrap();
    assert!((w.per_detector[0].ml - 0.612).abs() < 0.03);
    assert!((w.symmetrized.ml - 0.74).abs() < 0.03);
    let none = cfg_from("[campaign]\n").unwrap();
    assert_eq!(run(Command::Analyze, &none).unwrap_err().exit_code(), 2);
}

#[test]
fn byte_identical_across_runs_and_threads() {
    let c = cfg_from("[campaign]\nseed = 11\ntrials = 200000\n[protocol]\ndelta_phi_list_pi = 0, 0.5, 1\n").unwrap();
    let a = run(Command::PhaseSweep, &c).unwrap();
    let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(Command::PhaseSweep, &c).unwrap());
    for name in a.artifacts.names() {
        assert_eq!(a.artifacts.get(name), b.artifacts.get(name), "{name}");
    }
}

#[test]
fn planning_reports() {
    let c = cfg_from("[campaign]\nseed = 2\n[yield]\nreps = 2000\n").unwrap();
    let out = run(Command::PlanYield, &c).unwrap();
    assert!(out.report.contains("0.999996"), "{}", out.report);
    let c = cfg_from("[campaign]\n").unwrap();
    let out = run(Command::PlanFiber, &c).unwrap();
    let js: serde_json::Value = serde_json::from_slice(out.artifacts.get("plan_fiber.json").unwrap()).unwrap();
    assert_eq!(js["flag_combinations"].as_array().unwrap().len(), 4);
    assert_eq!(js["integration"].as_array().unwrap().len(), 2);
}

#[test]
fn pump_probe_synthesized() {
    let c = cfg_from("[campaign]\nseed = 4\n[pump_probe]\nrel_noise = 0\n").unwrap();
    let out = run(Command::PumpProbe, &c).unwrap();
    let js: serde_json::Value = serde_json::from_slice(out.artifacts.get("pump_probe.json").unwrap()).unwrap();
    let (got, want) = (js["lifetime_us"].as_f64().unwrap(), js["truth_lifetime_us"].as_f64().unwrap());
    assert!((got / want - 1.0).abs() < 1e-6);
}

#[test]
fn atomic_write_replaces() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sub/x.txt");
    atomic_write(&p, b"one").unwrap();
    atomic_write(&p, b"two").unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), b"two");
    assert_eq!(std::fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
}

#[test]
fn infeasible_separation_is_reported() {
    let c = cfg_from("[link]\nseparation_list_km = 75, 500\n").unwrap();
    let out = run(Command::PlanFiber, &c).unwrap();
    let js: serde_json::Value = serde_json::from_slice(out.artifacts.get("plan_fiber.json").unwrap()).unwrap();
    assert!(js["integration"][0]["days"].as_f64().unwrap() > 10.0);
    assert!(js["integration"][1]["error"].as_str().unwrap().contains("unreachable"));
}

#[test]
fn pump_probe_noisy_default() {
    let c = cfg_from("[campaign]\nseed = 4\n").unwrap();
    let out = run(Command::PumpProbe, &c).unwrap();
    let js: serde_json::Value = serde_json::from_slice(out.artifacts.get("pump_probe.json").unwrap()).unwrap();
    assert!((js["lifetime_us"].as_f64().unwrap() / 4.0 - 1.0).abs() < 0.1, "{}", out.report);
    assert!(out.artifacts.get("pump_probe_data.csv").is_some());
}
