//! Acceptance criteria, one line per criterion.
//!
//! Runs as a plain binary so every line prints whether it passes or not;
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relqkd::adversary::{Action, AuditPolicy, DecisionContext, Strategy};
use relqkd::feedback::{probe_slots, run_cycle};
use relqkd::harness::config::{PolicyName, ScenarioConfig};
use relqkd::harness::report::{attack_report, write_packets_csv, write_summary};
use relqkd::harness::scenario::{run_scenario, run_with_strategy, ScenarioOutcome};
use relqkd::harness::sweep::{log_grid, run_sweep, write_sweep_csv, SweepSpec};
use relqkd::keymath::{critical_qber, holevo_bound, secret_fraction};
use relqkd::photonics::dark_port_mean_photons;
use relqkd::protocol::{wilson_interval, PacketConfig, RunSummary, Z_95};
use relqkd::spacetime::EventLabel;
use relqkd::streams::{SeedTree, StreamLabel};
use relqkd::{
    BiasState, DetectorParams, DriftModel, FeedbackConfig, InterferometerParams, Mode, PulsePair, SecurityParams,
    SpacetimeEvent, StrategyKind,
};

const PHI: f64 = 0.8 * PI;

// Target values and tolerances.
const L_MAX_KM: f64 = 10.70;
const L_MAX_TOL_KM: f64 = 0.05;
const RAW_RATE: f64 = 2170.0;
const RAW_RATE_REL_TOL: f64 = 0.10;
const RAW_RATE_SECONDS: f64 = 10.0;
const QBER_TARGET: f64 = 0.041;
const QBER_TOL: f64 = 0.007;
const CHI_TARGET: f64 = 0.4518;
const CHI_TOL: f64 = 1e-4;
const R_TARGET: f64 = 0.302;
const R_TOL: f64 = 0.03;
const SECRET_RATE: f64 = 660.0;
const SECRET_RATE_REL_TOL: f64 = 0.15;
const MU_OPT_RANGE: (f64, f64) = (0.08, 0.15);
const QCRIT_TARGET: f64 = 0.1266;
const QCRIT_TOL: f64 = 1e-4;
const QCRIT_ROOT_TOL: f64 = 1e-9;
const ORACLE_SIGMAS: f64 = 4.0;
const FEEDBACK_MEAN_RESIDUAL: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn defaults(seed: u64, packets: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.run.seed = seed;
    c.run.packets = packets;
    c
}

fn summary(o: &ScenarioOutcome) -> &RunSummary {
    o.summary.as_ref().expect("kept packets")
}

fn crit1() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_relqkd"))
        .args(["calc", "lmax", "--dt", "20ns", "--n", "1.0002804"])
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout);
    let km = text
        .trim()
        .strip_prefix("L_max: ")
        .and_then(|s| s.strip_suffix(" km"))
        .and_then(|s| s.parse::<f64>().ok());
    match km {
        Some(km) => outcome(
            out.status.success() && (km - L_MAX_KM).abs() <= L_MAX_TOL_KM,
            format!("L_max = {km} km (target {L_MAX_KM} +/- {L_MAX_TOL_KM})"),
        ),
        None => outcome(false, format!("unparseable output `{}`", text.trim())),
    }
}

fn crit2(baseline: &ScenarioOutcome, seconds: f64) -> Outcome {
    let rate = summary(baseline).raw_rate_in_packet;
    let ok_rate = (rate - RAW_RATE).abs() <= RAW_RATE_REL_TOL * RAW_RATE;
    outcome(
        ok_rate && seconds < RAW_RATE_SECONDS,
        format!("raw rate {rate:.1} b/s (target {RAW_RATE} +/- 10%), 256 packets in {seconds:.2} s (< {RAW_RATE_SECONDS} s)"),
    )
}

fn crit3(first: &ScenarioOutcome) -> Outcome {
    let mut clicks = summary(first).clicks;
    let mut errors = summary(first).errors;
    let mut slots = summary(first).slots;
    for seed in 2..=5 {
        let s = run_scenario(&defaults(seed, 256)).expect("runs");
        let s = summary(&s);
        clicks += s.clicks;
        errors += s.errors;
        slots += s.slots;
    }
    let params = SecurityParams::new(0.116, PHI).unwrap();
    let qber = errors as f64 / clicks as f64;
    let chi = holevo_bound(&params);
    let r = secret_fraction(&params, qber).unwrap();
    let raw = clicks as f64 / slots as f64 * 25e6;
    let secret_rate = r.max(0.0) * raw;
    let ok = (qber - QBER_TARGET).abs() <= QBER_TOL
        && (chi - CHI_TARGET).abs() <= CHI_TOL
        && (r - R_TARGET).abs() <= R_TOL
        && (secret_rate - SECRET_RATE).abs() <= SECRET_RATE_REL_TOL * SECRET_RATE;
    outcome(
        ok,
        format!(
            "5 seeds: QBER {:.4} ({errors}/{clicks}), chi {chi:.5}, R {r:.4}, secret rate {secret_rate:.1} b/s (target {SECRET_RATE} +/- 15%)",
            qber
        ),
    )
}

fn crit4() -> Outcome {
    let spec = SweepSpec {
        grid: log_grid(0.02, 0.5, 12),
        base: defaults(1, 256),
    };
    let rows = run_sweep(&spec).expect("sweep runs");
    let best = rows
        .iter()
        .max_by(|a, b| a.secret_bits_per_packet.total_cmp(&b.secret_bits_per_packet))
        .unwrap();
    let in_range = (MU_OPT_RANGE.0..=MU_OPT_RANGE.1).contains(&best.mu);
    let qbers: Vec<f64> = rows.iter().map(|r| r.qber.unwrap_or(f64::NAN)).collect();
    let decreasing = qbers.windows(2).all(|w| w[1] < w[0]);
    outcome(
        in_range && decreasing,
        format!(
            "argmax secret_bits_per_packet at mu {:.4} ({:.3} bits/packet), required [{}, {}]: {}; QBER strictly decreasing: {}",
            best.mu,
            best.secret_bits_per_packet,
            MU_OPT_RANGE.0,
            MU_OPT_RANGE.1,
            if in_range { "yes" } else { "no" },
            if decreasing { "yes" } else { "no" }
        ),
    )
}

fn crit5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mu = rng.random_range(0.001..2.0);
        let phi = rng.random_range(0.05..PI);
        let p = SecurityParams::new(mu, phi).unwrap();
        let q = critical_qber(&p);
        worst = worst.max(secret_fraction(&p, q).unwrap().abs());
    }
    let q = critical_qber(&SecurityParams::new(0.116, PHI).unwrap());
    outcome(
        worst < QCRIT_ROOT_TOL && (q - QCRIT_TARGET).abs() <= QCRIT_TOL,
        format!("max |R(q*)| over 100 draws {worst:.2e}; q*(0.116, 0.8pi) = {q:.6}"),
    )
}

/// Mixture QBER with dark counts in every slot class.
fn mixture_qber(mu: f64, cfg: &ScenarioConfig) -> f64 {
    let eta = cfg.detector.efficiency;
    let pd = 1.0 - (-cfg.detector.dark_rate * cfg.detector.gate_duration).exp();
    let eta_sys = cfg.interferometer.system_efficiency / eta;
    let m = eta_sys * mu;
    let s = (1.0 - PHI.cos()) / 2.0;
    let p = 1.0 - (-2.0 * mu * (PHI / 2.0).sin().powi(2)).exp();
    let c_a = 1.0 - (1.0 - pd) * (-eta * m * s).exp();
    let c_r = 1.0 - (1.0 - pd) * (-eta * m / 4.0).exp();
    let wrong = p * 0.5 * pd + (1.0 - p) * 0.5 * c_r;
    let all = p * 0.5 * (c_a + pd) + (1.0 - p) * c_r;
    wrong / all
}

fn crit6() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for mu in [0.02, 0.1, 0.116, 0.3, 0.5] {
        let mut cfg = defaults(6, 153);
        cfg.protocol.mu = mu;
        cfg.eve.strategy = StrategyKind::UsdBlockResend;
        cfg.eve.mode = Mode::Relativistic;
        cfg.eve.reference_policy = PolicyName::PassAlways;
        let o = run_scenario(&cfg).expect("runs");
        let s = summary(&o);
        let rep = attack_report(&cfg, &o);
        let qber = s.qber.unwrap_or(0.0);
        let oracle = mixture_qber(mu, &cfg);
        let sigma = (oracle * (1.0 - oracle) / s.clicks as f64).sqrt();
        let crit = s.critical_qber;
        let this = s.slots >= 10_000_000
            && qber > crit
            && (qber - oracle).abs() <= ORACLE_SIGMAS * sigma
            && !rep.extractable_secret;
        ok &= this;
        parts.push(format!(
            "mu {mu}: {qber:.4} vs oracle {oracle:.4} (q* {crit:.4}, extractable {})",
            if rep.extractable_secret { "yes" } else { "no" }
        ));
    }
    outcome(ok, parts.join("; "))
}

fn crit7(honest: &ScenarioOutcome) -> Outcome {
    let honest_ci = summary(honest).qber_ci.unwrap();
    let params = SecurityParams::new(0.116, PHI).unwrap();
    let p_usd = relqkd::keymath::usd_success_prob(&params);

    let mut attacked = defaults(1, 256);
    attacked.eve.strategy = StrategyKind::UsdBlockResend;
    attacked.eve.mode = Mode::NonrelativisticBaseline;
    let line_a = attacked.channel.line_transmittance;
    let a = run_scenario(&attacked).expect("runs");
    let sa = summary(&a);
    let qa = sa.qber.unwrap();
    let known_photon = sa.eve_known_photon_fraction().unwrap();
    let ok_a = line_a <= p_usd && qa >= honest_ci.0 && qa <= honest_ci.1 && known_photon == 1.0;

    // dark-count-free link with the whole loss in the line
    let mut quiet_honest = defaults(1, 256);
    quiet_honest.detector.dark_rate = 0.0;
    quiet_honest.channel.line_transmittance = quiet_honest.system_transmittance();
    let h = run_scenario(&quiet_honest).expect("runs");
    let mut quiet = quiet_honest.clone();
    quiet.eve.strategy = StrategyKind::UsdBlockResend;
    quiet.eve.mode = Mode::NonrelativisticBaseline;
    let b = run_scenario(&quiet).expect("runs");
    let sb = summary(&b);
    let known_all = sb.eve_known_fraction().unwrap();
    let (hq, bq) = (summary(&h).qber.unwrap(), sb.qber.unwrap());
    let ok_b = quiet.channel.line_transmittance <= p_usd && known_all == 1.0 && bq == hq;

    outcome(
        ok_a && ok_b,
        format!(
            "line {line_a:.4} <= P_USD {p_usd:.4}: QBER {qa:.4} in honest CI [{:.4}, {:.4}], Eve knows {:.3} of photon clicks ({:.3} of all); \
             no darks, line {:.5}: QBER {bq} (honest {hq}), Eve knows {known_all:.3} of sifted bits",
            honest_ci.0,
            honest_ci.1,
            known_photon,
            sa.eve_known_fraction().unwrap(),
            quiet.channel.line_transmittance
        ),
    )
}

fn crit8() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [1usize, 5, 20] {
        let mut cfg = defaults(8, 10_000);
        cfg.protocol.packet_bits = 64;
        cfg.eve.strategy = StrategyKind::SyncShift;
        cfg.eve.sync_shift_bits = m;
        let o = run_scenario(&cfg).expect("runs");
        let discarded = o.packets.iter().filter(|p| !p.kept).count() as u64;
        let (lo, hi) = wilson_interval(discarded, o.packets.len() as u64, Z_95).unwrap();
        let expected = 1.0 - 0.5f64.powi(m as i32);
        let this = lo <= expected && expected <= hi;
        ok &= this;
        parts.push(format!(
            "m {m}: {discarded}/{} discarded, CI [{lo:.5}, {hi:.5}] vs {expected:.6}",
            o.packets.len()
        ));
    }
    outcome(ok, parts.join("; "))
}

/// Reads the data-pulse measurement while deciding on the reference.
struct Peeker;

impl Strategy for Peeker {
    fn name(&self) -> &str {
        "peeker"
    }

    fn measures(&self) -> bool {
        true
    }

    fn step_reference(&mut self, ctx: &mut DecisionContext<'_>, _rng: &mut ChaCha8Rng) -> Action {
        let s = ctx.slot();
        ctx.declare_read(SpacetimeEvent::new(
            s.eve_position,
            s.data_at_eve(),
            EventLabel::EveMeasurement,
        ));
        Action::Pass
    }

    fn step_data(&mut self, _ctx: &mut DecisionContext<'_>, _rng: &mut ChaCha8Rng) -> Action {
        Action::Pass
    }
}

fn crit9() -> Outcome {
    let mut ok = true;
    let mut decisions = 0u64;
    for strategy in StrategyKind::ALL {
        for mode in [Mode::Relativistic, Mode::NonrelativisticBaseline] {
            let mut cfg = defaults(9, 1000);
            cfg.protocol.packet_bits = 1024;
            cfg.eve.strategy = strategy;
            cfg.eve.mode = mode;
            cfg.eve.position = Some(45.0);
            cfg.eve.audit = AuditPolicy::Retain;
            match run_scenario(&cfg) {
                Ok(o) => {
                    let a = o.audit.expect("eve present");
                    ok &= a.verdict_ok;
                    decisions += a.decisions_checked;
                }
                Err(e) => {
                    ok = false;
                    eprintln!("{strategy} / {mode}: {e}");
                }
            }
        }
    }
    let mut cfg = defaults(9, 10);
    cfg.protocol.packet_bits = 1024;
    let rejected = match run_with_strategy(&cfg, Box::new(Peeker)) {
        Err(e) => {
            let msg = e.to_string();
            msg.contains("causality violation") && msg.contains("eve_measurement")
        }
        Ok(_) => false,
    };
    outcome(
        ok && rejected,
        format!(
            "{} strategy/mode runs, {decisions} decisions audited ok; corrupted strategy rejected: {}",
            StrategyKind::ALL.len() * 2,
            if rejected { "yes" } else { "no" }
        ),
    )
}

fn crit10() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (seed, mu) in [(10, 0.116), (11, 0.5), (12, 2.0)] {
        let mut cfg = defaults(seed, 64);
        cfg.protocol.mu = mu;
        cfg.interferometer.visibility = 1.0;
        cfg.detector.dark_rate = 0.0;
        let o = run_scenario(&cfg).expect("runs");
        let s = summary(&o);
        ok &= s.errors == 0 && s.clicks > 0 && s.qber == Some(0.0);
        parts.push(format!("mu {mu}: {} errors in {} sifted bits", s.errors, s.clicks));
    }
    outcome(ok, parts.join("; "))
}

fn crit11() -> Outcome {
    let tree = SeedTree::new(11);
    let mut drift_rng = tree.stream(StreamLabel::Drift);
    let mut probe_rng = tree.stream(StreamLabel::Probe);
    let ifc = InterferometerParams {
        delay: 20e-9,
        visibility: 1.0,
        bias_phase: 0.0,
        system_transmittance: 1.5e-3 / 0.35,
    };
    let det = DetectorParams {
        efficiency: 0.35,
        dark_rate: 700.0,
        gate_duration: 10e-9,
    };
    let fb = FeedbackConfig {
        gain: 1.0,
        probe_mu: 10.0,
        ..Default::default()
    };
    let drift = DriftModel {
        random_walk_std: 0.005,
        deterministic_ramp: 0.05,
    };
    let pc = PacketConfig::default();
    let slots = probe_slots(pc.calibration_windows, pc.symbol_rate);
    let mut state = BiasState::new(0.0, fb.rail);
    let pair = PulsePair::emit(0.116, PHI, 0.0, 20e-9);
    let dark = |bias: f64| {
        dark_port_mean_photons(
            &pair,
            0.0,
            &InterferometerParams {
                bias_phase: bias,
                ..ifc
            },
        )
    };
    let (mut sum, mut wraps, mut identical) = (0.0, 0, true);
    for k in 0..1000 {
        let (next, r) = run_cycle(k, state, &drift, &ifc, &det, &fb, slots, &mut drift_rng, &mut probe_rng);
        state = next;
        sum += r.residual.abs();
        if r.wrapped {
            wraps += 1;
            identical &= dark(r.residual).to_bits() == dark(r.residual_before_wrap).to_bits();
        }
    }
    let mean = sum / 1000.0;
    outcome(
        mean < FEEDBACK_MEAN_RESIDUAL && wraps >= 5 && identical,
        format!("mean |residual| {mean:.4} rad, {wraps} wrap-arounds, dark-port response bit-identical: {identical}"),
    )
}

fn render(cfg: &ScenarioConfig) -> (Vec<u8>, Vec<u8>) {
    let o = run_scenario(cfg).expect("runs");
    let (mut csv, mut sum) = (Vec::new(), Vec::new());
    write_packets_csv(&o.packets, &mut csv).unwrap();
    write_summary(cfg, &o, &mut sum).unwrap();
    (csv, sum)
}

fn crit12() -> Outcome {
    let mut scenarios = vec![defaults(12, 32)];
    let mut attack = defaults(12, 32);
    attack.eve.strategy = StrategyKind::InterceptResend;
    attack.eve.reference_policy = PolicyName::PassWithProb;
    scenarios.push(attack);
    let mut fb = defaults(12, 32);
    fb.feedback.enabled = true;
    fb.feedback.ramp = 0.05;
    scenarios.push(fb);
    let same_runs = scenarios.iter().all(|c| render(c) == render(c));
    let sweep = |_: ()| {
        let spec = SweepSpec {
            grid: log_grid(0.02, 0.5, 3),
            base: defaults(12, 8),
        };
        let mut buf = Vec::new();
        write_sweep_csv(&run_sweep(&spec).unwrap(), &mut buf).unwrap();
        buf
    };
    let same_sweep = sweep(()) == sweep(());
    outcome(
        same_runs && same_sweep,
        format!(
            "{} scenarios and one sweep rerun byte-identical: {}",
            scenarios.len(),
            same_runs && same_sweep
        ),
    )
}

type Criterion<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

fn main() -> ExitCode {
    let t = Instant::now();
    let baseline = run_scenario(&defaults(1, 256)).expect("default scenario runs");
    let baseline_seconds = t.elapsed().as_secs_f64();

    let results: Vec<(&str, Criterion<'_>)> = vec![
        ("geometry bound", Box::new(crit1)),
        ("raw rate", Box::new(|| crit2(&baseline, baseline_seconds))),
        ("secret rate chain", Box::new(|| crit3(&baseline))),
        ("optimum photon number", Box::new(crit4)),
        ("critical QBER", Box::new(crit5)),
        ("relativistic immunity", Box::new(crit6)),
        ("baseline vulnerability", Box::new(|| crit7(&baseline))),
        ("sync attack detection", Box::new(crit8)),
        ("causality audit", Box::new(crit9)),
        ("noiseless identity", Box::new(crit10)),
        ("feedback lock", Box::new(crit11)),
        ("determinism", Box::new(crit12)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in results.into_iter().enumerate() {
        let o = f();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {:<24} {}  {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} of 12 criteria pass", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
