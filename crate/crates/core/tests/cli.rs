use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use relqkd::harness::config::ScenarioConfig;
use relqkd::harness::report::{parse_pairs, PacketRow, PACKET_HEADER};
use relqkd::harness::sweep::{SweepRow, SWEEP_HEADER};

fn relqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(text: &str, key: &str) -> String {
    parse_pairs(text)
        .into_iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v)
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        format!("[run]\npackets = 16\n[protocol]\npacket_bits = 4096\n{extra}"),
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn calc_commands() {
    let o = relqkd(&["calc", "lmax", "--dt", "20ns", "--n", "1.0002804"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "L_max: 10.692 km");

    let o = relqkd(&["calc", "chi", "--mu", "0", "--phi", "0.8pi"]);
    assert_eq!(stdout(&o).trim(), "chi: 0");

    let o = relqkd(&["calc", "rate", "--mu", "0.116", "--phi", "0.8pi", "--qber", "0.0408"]);
    let r: f64 = value(&stdout(&o), "secret_fraction").parse().unwrap();
    assert!((r - 0.30226327698140939).abs() < 1e-12, "{r}");

    let o = relqkd(&["calc", "qcrit", "--mu", "0.116"]);
    let q: f64 = value(&stdout(&o), "critical_qber").parse().unwrap();
    assert!((q - 0.1266617743095254).abs() < 1e-9);

    let o = relqkd(&["calc", "usd", "--mu", "0.116"]);
    let p: f64 = value(&stdout(&o), "P_USD").parse().unwrap();
    assert!((p - 0.18929089121468472).abs() < 1e-14);

    let o = relqkd(&["calc", "dtmin", "--lmin", "180m"]);
    let ns: f64 = value(&stdout(&o), "dt_min").trim_end_matches(" ns").parse().unwrap();
    assert!((ns - 0.33671294025682).abs() < 1e-9, "{ns}");
    assert_eq!(value(&stdout(&o), "sufficient"), "yes");

    let o = relqkd(&["calc", "mu", "--dbm", "-78.9"]);
    let mu: f64 = value(&stdout(&o), "mu").parse().unwrap();
    assert!((mu - 0.50584547608).abs() < 1e-9);
}

#[test]
fn bad_arguments_exit_nonzero() {
    assert!(!relqkd(&["calc", "lmax", "--dt", "20parsecs"]).status.success());
    assert!(!relqkd(&["calc", "chi", "--mu", "-1"]).status.success());
    assert!(!relqkd(&["calc", "rate", "--mu", "0.1", "--qber", "1.5"])
        .status
        .success());
    assert!(!relqkd(&["simulate", "--attack", "teleport"]).status.success());
}

#[test]
fn simulate_writes_reproducible_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = relqkd(&[
            "simulate",
            "--config",
            &cfg,
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read_to_string(out.join("packets.csv")).unwrap(),
            fs::read_to_string(out.join("summary.txt")).unwrap(),
        )
    };
    let (csv_a, sum_a) = run("a");
    let (csv_b, sum_b) = run("b");
    assert_eq!(csv_a, csv_b);
    assert_eq!(sum_a, sum_b);

    assert_eq!(csv_a.lines().next().unwrap(), PACKET_HEADER);
    let rows: Vec<PacketRow> = csv::Reader::from_reader(csv_a.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(rows.len(), 16);
    let clicks: u64 = rows.iter().map(|r| r.clicks).sum();
    assert_eq!(value(&sum_a, "clicks"), clicks.to_string());
    for key in [
        "packets_total",
        "packets_discarded",
        "sifted_length",
        "errors",
        "qber",
        "qber_ci_low",
        "qber_ci_high",
        "chi",
        "secret_fraction",
        "secret_bits_per_packet",
        "raw_rate_in_packet",
    ] {
        value(&sum_a, key);
    }
}

#[test]
fn invalid_config_lists_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "mu = -0.5\n[detector]\nefficiency = 3\n");
    let o = relqkd(&["simulate", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("protocol.mu") && err.contains("detector.efficiency"),
        "{err}"
    );

    let cfg = small_config(tmp.path(), "photons = 3\n");
    let o = relqkd(&["simulate", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("photons"));
}

#[test]
fn attack_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let out = tmp.path().join("att");
    let out = out.to_str().unwrap();

    let o = relqkd(&["attack", "--config", &cfg, "--out", out]);
    assert!(!o.status.success(), "honest attack must be a usage error");

    let o = relqkd(&[
        "attack",
        "--config",
        &cfg,
        "--out",
        out,
        "--attack",
        "usd_block_resend",
        "--packets",
        "64",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(value(&text, "extractable_secret"), "no");
    assert_eq!(value(&text, "audit"), "ok");
    assert_eq!(fs::read_to_string(Path::new(out).join("attack.txt")).unwrap(), text);
    let events = fs::read_to_string(Path::new(out).join("events.txt")).unwrap();
    assert!(events.lines().any(|l| l.starts_with("eve_decision ")));

    let o = relqkd(&["attack", "--config", &cfg, "--out", out, "--attack", "sync_shift"]);
    let text = stdout(&o);
    assert_eq!(value(&text, "packets_discarded"), "16");
    assert_eq!(value(&text, "extractable_secret"), "no");

    let o = relqkd(&[
        "attack",
        "--config",
        &cfg,
        "--out",
        out,
        "--attack",
        "usd_block_resend",
        "--mode",
        "nonrelativistic",
    ]);
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "mode"), "nonrelativistic_baseline");
}

#[test]
fn sweep_writes_grid_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let out = tmp.path().join("sw");
    let o = relqkd(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--from",
        "0.05",
        "--to",
        "0.4",
        "--points",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER);
    let rows: Vec<SweepRow> = csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].mu, 0.05);
    assert_eq!(rows[3].mu, 0.4);
    assert!(rows.windows(2).all(|w| w[0].mu < w[1].mu));
}

#[test]
fn one_point_sweep_matches_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let sim = tmp.path().join("sim");
    let sw = tmp.path().join("sw");
    let o = relqkd(&[
        "simulate",
        "--config",
        &cfg,
        "--mu",
        "0.2",
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let o = relqkd(&[
        "sweep",
        "--config",
        &cfg,
        "--from",
        "0.2",
        "--to",
        "0.2",
        "--points",
        "1",
        "--out",
        sw.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let summary = fs::read_to_string(sim.join("summary.txt")).unwrap();
    let text = fs::read_to_string(sw.join("sweep.csv")).unwrap();
    let row: SweepRow = csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .next()
        .unwrap()
        .unwrap();
    assert_eq!(value(&summary, "qber"), row.qber.unwrap().to_string());
    assert_eq!(value(&summary, "clicks_per_pulse"), row.clicks_per_pulse.to_string());
    assert_eq!(
        value(&summary, "secret_bits_per_packet"),
        row.secret_bits_per_packet.to_string()
    );
}

#[test]
fn shipped_default_config_is_the_default_scenario() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.toml");
    let mut c = ScenarioConfig::load(&path).unwrap();
    c.run.output = None;
    assert_eq!(c, ScenarioConfig::default());
    let text = c.to_toml_string();
    assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), c);
}
