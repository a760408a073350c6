use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use relqkd::harness::config::ScenarioConfig;
use relqkd::harness::report::{
    attack_pairs, attack_report, write_events, write_feedback_csv, write_packets_csv, write_pairs, write_summary,
};
use relqkd::harness::scenario::run_scenario;
use relqkd::harness::sweep::{log_grid, run_sweep, write_sweep_csv, SweepSpec};
use relqkd::harness::units::{angle_arg, length_arg, time_arg};
use relqkd::keymath::{self, ChannelLimit, SPEED_OF_LIGHT};
use relqkd::{GeometryParams, Mode, SecurityParams, StrategyKind};

#[derive(Parser)]
#[command(
    name = "relqkd",
    version,
    about = "Relativistic two-pulse QKD simulator and security calculator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form security and geometry figures.
    Calc {
        #[command(subcommand)]
        what: Calc,
    },
    /// Run packets and write packets.csv / summary.txt.
    Simulate(RunArgs),
    /// Sweep the mean photon number and write sweep.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0.02)]
        from: f64,
        #[arg(long, default_value_t = 0.5)]
        to: f64,
        #[arg(long, default_value_t = 12)]
        points: usize,
    },
    /// Run an eavesdropping scenario and write an attack report.
    Attack(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    packets: Option<u64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    attack: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Relativistic,
    Nonrelativistic,
}

#[derive(Subcommand)]
enum Calc {
    /// Maximal channel length for a pulse separation.
    Lmax {
        #[arg(long, value_parser = time_arg)]
        dt: f64,
        #[arg(long, default_value_t = 1.0002804)]
        n: f64,
    },
    /// Holevo bound on Eve's information per sifted bit.
    Chi(Sec),
    /// USD success probability.
    Usd(Sec),
    /// Secret fraction at a measured QBER.
    Rate {
        #[command(flatten)]
        sec: Sec,
        #[arg(long)]
        qber: f64,
    },
    /// QBER at which the secret fraction vanishes.
    Qcrit(Sec),
    /// Minimal pulse separation for a channel.
    Dtmin {
        #[arg(long, value_parser = length_arg)]
        lmin: f64,
        /// Observed time of flight; defaults to the in-medium flight time.
        #[arg(long, value_parser = time_arg)]
        tof: Option<f64>,
        #[arg(long, default_value_t = 1.0002804)]
        n: f64,
        #[arg(long, value_parser = time_arg, default_value = "20ns")]
        dt: f64,
        #[arg(long)]
        trusted_sync: bool,
    },
    /// Mean photon number from average optical power.
    Mu {
        #[arg(long, allow_negative_numbers = true)]
        dbm: f64,
        #[arg(long, value_parser = length_arg, default_value = "780nm")]
        wavelength: f64,
        #[arg(long, value_parser = time_arg, default_value = "10ns")]
        duration: f64,
    },
}

#[derive(Args, Clone, Copy)]
struct Sec {
    #[arg(long)]
    mu: f64,
    #[arg(long, value_parser = angle_arg, default_value = "0.8pi")]
    phi: f64,
}

impl Sec {
    fn params(self) -> Result<SecurityParams> {
        Ok(SecurityParams::new(self.mu, self.phi)?)
    }
}

fn calc(what: Calc) -> Result<()> {
    match what {
        Calc::Lmax { dt, n } => match keymath::l_max(dt, n)? {
            ChannelLimit::Bounded(m) => println!("L_max: {:.3} km", m / 1e3),
            ChannelLimit::Unbounded => println!("L_max: unbounded"),
        },
        Calc::Chi(s) => println!("chi: {}", keymath::holevo_bound(&s.params()?)),
        Calc::Usd(s) => println!("P_USD: {}", keymath::usd_success_prob(&s.params()?)),
        Calc::Rate { sec, qber } => {
            let p = sec.params()?;
            println!("chi: {}", keymath::holevo_bound(&p));
            println!("h_qber: {}", keymath::binary_entropy(qber)?);
            println!("secret_fraction: {}", keymath::secret_fraction(&p, qber)?);
        }
        Calc::Qcrit(s) => println!("critical_qber: {}", keymath::critical_qber(&s.params()?)),
        Calc::Dtmin {
            lmin,
            tof,
            n,
            dt,
            trusted_sync,
        } => {
            let tof = tof.unwrap_or(lmin * n / SPEED_OF_LIGHT);
            let g = GeometryParams::new(lmin, tof, dt, n)?;
            let min = keymath::delta_t_min(&g, trusted_sync);
            println!("dt_min: {} ns", min * 1e9);
            println!(
                "sufficient: {}",
                if g.separation_sufficient(trusted_sync) {
                    "yes"
                } else {
                    "no"
                }
            );
        }
        Calc::Mu {
            dbm,
            wavelength,
            duration,
        } => {
            println!("mu: {}", keymath::mu_from_power(dbm, wavelength, duration)?)
        }
    }
    Ok(())
}

fn load(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(p) = args.packets {
        cfg.run.packets = p;
    }
    if let Some(m) = args.mu {
        cfg.protocol.mu = m;
    }
    if let Some(m) = args.mode {
        cfg.eve.mode = match m {
            ModeArg::Relativistic => Mode::Relativistic,
            ModeArg::Nonrelativistic => Mode::NonrelativisticBaseline,
        };
    }
    if let Some(a) = &args.attack {
        cfg.eve.strategy = a.parse()?;
    }
    if let Some(o) = &args.out {
        cfg.run.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> Result<PathBuf> {
    let dir = cfg.run.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn simulate(args: RunArgs) -> Result<()> {
    let cfg = load(&args)?;
    let outcome = run_scenario(&cfg)?;
    let dir = out_dir(&cfg)?;
    write_packets_csv(&outcome.packets, create(&dir, "packets.csv")?)?;
    write_summary(&cfg, &outcome, create(&dir, "summary.txt")?)?;
    if !outcome.events.is_empty() {
        write_events(&outcome, create(&dir, "events.txt")?)?;
    }
    if !outcome.feedback.is_empty() {
        write_feedback_csv(&outcome.feedback, create(&dir, "feedback.csv")?)?;
    }
    write_summary(&cfg, &outcome, io::stdout().lock())?;
    Ok(())
}

fn sweep(args: RunArgs, from: f64, to: f64, points: usize) -> Result<()> {
    if !(from > 0.0 && to >= from && points > 0) {
        bail!("sweep needs 0 < --from <= --to and --points > 0");
    }
    let cfg = load(&args)?;
    let spec = SweepSpec {
        grid: log_grid(from, to, points),
        base: cfg.clone(),
    };
    let rows = run_sweep(&spec)?;
    let dir = out_dir(&cfg)?;
    let mut f = create(&dir, "sweep.csv")?;
    write_sweep_csv(&rows, &mut f)?;
    f.flush()?;
    write_sweep_csv(&rows, io::stdout().lock())?;
    Ok(())
}

fn attack(args: RunArgs) -> Result<()> {
    let mut cfg = load(&args)?;
    if cfg.eve.strategy == StrategyKind::Honest {
        bail!("attack needs a strategy other than honest (use --attack NAME or [eve] strategy)");
    }
    if cfg.run.event_log_slots == 0 {
        cfg.run.event_log_slots = 4;
    }
    let outcome = run_scenario(&cfg)?;
    let report = attack_report(&cfg, &outcome);
    let pairs = attack_pairs(&cfg, &outcome, &report);
    let dir = out_dir(&cfg)?;
    write_pairs(&pairs, create(&dir, "attack.txt")?)?;
    write_packets_csv(&outcome.packets, create(&dir, "packets.csv")?)?;
    write_events(&outcome, create(&dir, "events.txt")?)?;
    write_pairs(&pairs, io::stdout().lock())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calc { what } => calc(what),
        Command::Simulate(a) => simulate(a),
        Command::Sweep { run, from, to, points } => sweep(run, from, to, points),
        Command::Attack(a) => attack(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
