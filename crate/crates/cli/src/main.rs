use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use secure_slp::harness::{self, ExperimentConfig, Point};
use secure_slp::precoders::PrecoderKind;
use secure_slp::Error;

#[derive(Parser, Debug)]
#[command(name = "secure-slp", version, about = "Secure symbol-level precoding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: ConfigFlags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One parameter point per scheme (first entry of every list).
    Point,
    /// Sweep the eavesdropper SNR threshold.
    SweepGammaE,
    /// Sweep the channel correlation (and P0 for an_no_csi).
    SweepRho,
    /// ICSS and ZF at N = 6 and N = 4.
    Table1,
    /// Dump the eavesdropper's trained phase PDF for the first point.
    PhasePdf,
}

/// Every flag overrides the matching key of the config file. List values
/// are comma-separated.
#[derive(Args, Debug)]
struct ConfigFlags {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    dump_trials: Option<String>,
    #[arg(long, global = true)]
    antennas: Option<String>,
    #[arg(long, global = true)]
    users: Option<String>,
    #[arg(long, global = true)]
    order: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    rho: Option<String>,
    #[arg(long, global = true)]
    beta: Option<String>,
    #[arg(long, global = true)]
    beta_e: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma0_db: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma_e_db: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    p0_db: Option<String>,
    #[arg(long, global = true)]
    schemes: Option<String>,
    #[arg(long, global = true)]
    train_trials: Option<String>,
    #[arg(long, global = true)]
    test_trials: Option<String>,
    #[arg(long, global = true)]
    ser_trials: Option<String>,
    /// Sets train, test and SER counts together.
    #[arg(long, global = true)]
    trials: Option<String>,
    #[arg(long, global = true)]
    bins: Option<String>,
    /// `rotate` or `independent`.
    #[arg(long, global = true)]
    pdf_mode: Option<String>,
}

impl ConfigFlags {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        // `trials` first so the specific counts can still override it.
        let pairs = [
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("out", &self.out),
            ("dump_trials", &self.dump_trials),
            ("antennas", &self.antennas),
            ("users", &self.users),
            ("order", &self.order),
            ("rho", &self.rho),
            ("beta", &self.beta),
            ("beta_e", &self.beta_e),
            ("gamma0_db", &self.gamma0_db),
            ("gamma_e_db", &self.gamma_e_db),
            ("p0_db", &self.p0_db),
            ("schemes", &self.schemes),
            ("train_trials", &self.train_trials),
            ("test_trials", &self.test_trials),
            ("ser_trials", &self.ser_trials),
            ("bins", &self.bins),
            ("pdf_mode", &self.pdf_mode),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn first_point(cfg: &ExperimentConfig) -> Point {
    Point {
        scheme: cfg.schemes[0],
        rho: cfg.rho[0],
        gamma_e_db: cfg.gamma_e_db[0],
        p0_db: cfg.p0_db.first().copied(),
    }
}

fn single_points(cfg: &ExperimentConfig) -> Vec<Point> {
    cfg.schemes
        .iter()
        .map(|&scheme| Point {
            scheme,
            p0_db: cfg.p0_db.first().copied().filter(|_| scheme == PrecoderKind::AnNoCsi),
            ..first_point(cfg)
        })
        .collect()
}

fn write_output(cfg: &ExperimentConfig, text: &str) -> anyhow::Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(command: &Command, cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let records = match command {
        Command::Point => {
            let points = single_points(cfg);
            let results = cfg.with_pool(|| {
                points
                    .iter()
                    .map(|p| harness::run_point(cfg, p))
                    .collect::<Result<Vec<_>, _>>()
            })??;
            if let Some(path) = &cfg.dump_trials {
                let pairs: Vec<_> = points.iter().copied().zip(&results).collect();
                harness::write_trial_dump(&pairs, path)?;
            }
            results.into_iter().map(|r| r.record).collect()
        }
        Command::SweepGammaE => harness::run_sweep_gamma_e(cfg)?,
        Command::SweepRho => harness::run_sweep_rho(cfg)?,
        Command::Table1 => harness::table1(cfg)?,
        Command::PhasePdf => {
            let point = first_point(cfg);
            let result = cfg.with_pool(|| harness::run_point(cfg, &point))??;
            let pdf = result
                .pdf
                .context("no feasible training trials, PDF is undefined")?;
            let mut buf = Vec::new();
            pdf.write_csv(&mut buf)?;
            return write_output(cfg, &String::from_utf8(buf)?);
        }
    };
    write_output(cfg, &harness::to_csv(&records))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match cli.opts.build() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
