//! Experiment configuration, Monte Carlo runs and metric tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::channel::{LinkGeometry, Substream};
use crate::eavesdropper::{
    build_conditional_pdf, evaluate_detector, phase_samples, ser_from_records, FirstSymbol,
    PdfMode, PhasePdf, Scenario, TrialRecord,
};
use crate::error::{Error, Result};
use crate::geometry::{db_to_linear, linear_to_db, PskConstellation, QosParams};
use crate::precoders::PrecoderKind;

/// Substream domains. Every scheme and parameter point draws from the same
/// streams, so comparisons use common random numbers.
pub const TRAIN_DOMAIN: u64 = 1;
pub const TEST_DOMAIN: u64 = 2;
pub const SER_DOMAIN: u64 = 3;

/// Infeasibility rate above which a warning is logged.
pub const INFEASIBLE_WARN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub antennas: usize,
    pub users: usize,
    pub order: usize,
    pub rho: Vec<f64>,
    /// One gain for every user, or one per user.
    pub beta: Vec<f64>,
    pub beta_e: f64,
    pub gamma0_db: f64,
    pub gamma_e_db: Vec<f64>,
    /// Power floors for the no-CSI scheme; empty means no floor.
    pub p0_db: Vec<f64>,
    pub schemes: Vec<PrecoderKind>,
    pub train_trials: u64,
    pub test_trials: u64,
    pub ser_trials: u64,
    pub bins: usize,
    pub pdf_mode: PdfMode,
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub dump_trials: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            antennas: 6,
            users: 3,
            order: 4,
            rho: vec![0.3],
            beta: vec![1.0],
            beta_e: 1.0,
            gamma0_db: 10.0,
            gamma_e_db: (-30..=15).step_by(5).map(f64::from).collect(),
            p0_db: Vec::new(),
            schemes: vec![PrecoderKind::Icss],
            train_trials: 100_000,
            test_trials: 100_000,
            ser_trials: 200_000,
            bins: 360,
            pdf_mode: PdfMode::RotateFromFirst,
            seed: 1,
            threads: None,
            out: None,
            dump_trials: None,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{s}'")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{}'", value.trim())))
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 20] = [
        "antennas",
        "users",
        "order",
        "rho",
        "beta",
        "beta_e",
        "gamma0_db",
        "gamma_e_db",
        "p0_db",
        "schemes",
        "train_trials",
        "test_trials",
        "ser_trials",
        "bins",
        "pdf_mode",
        "seed",
        "threads",
        "out",
        "dump_trials",
        "trials",
    ];

    /// Sets one key from its text form. `trials` sets all three counts.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim().replace('-', "_").as_str() {
            "antennas" | "n" => self.antennas = parse_one(key, value)?,
            "users" | "k" => self.users = parse_one(key, value)?,
            "order" | "m" => self.order = parse_one(key, value)?,
            "rho" => self.rho = parse_list(key, value)?,
            "beta" => self.beta = parse_list(key, value)?,
            "beta_e" => self.beta_e = parse_one(key, value)?,
            "gamma0_db" => self.gamma0_db = parse_one(key, value)?,
            "gamma_e_db" => self.gamma_e_db = parse_list(key, value)?,
            "p0_db" => self.p0_db = parse_list(key, value)?,
            "schemes" | "scheme" => {
                self.schemes = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|e: Error| Error::Config(e.to_string())))
                    .collect::<Result<_>>()?
            }
            "train_trials" => self.train_trials = parse_one(key, value)?,
            "test_trials" => self.test_trials = parse_one(key, value)?,
            "ser_trials" => self.ser_trials = parse_one(key, value)?,
            "trials" => {
                let n = parse_one(key, value)?;
                self.train_trials = n;
                self.test_trials = n;
                self.ser_trials = n;
            }
            "bins" => self.bins = parse_one(key, value)?,
            "pdf_mode" => {
                self.pdf_mode = match value.trim() {
                    "rotate" | "rotate_from_first" => PdfMode::RotateFromFirst,
                    "independent" => PdfMode::Independent,
                    other => return Err(Error::Config(format!("pdf_mode: unknown mode '{other}'"))),
                }
            }
            "seed" => self.seed = parse_one(key, value)?,
            "threads" => {
                let n: usize = parse_one(key, value)?;
                self.threads = (n > 0).then_some(n);
            }
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "dump_trials" => self.dump_trials = Some(PathBuf::from(value.trim())),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses flat `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", i + 1))
            })?;
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.antennas == 0 || self.users == 0 {
            return fail("antennas and users must be at least 1".into());
        }
        if self.order < 2 {
            return fail(format!("order must be at least 2, got {}", self.order));
        }
        if self.rho.is_empty() || self.gamma_e_db.is_empty() || self.schemes.is_empty() {
            return fail("rho, gamma_e_db and schemes must be non-empty".into());
        }
        if self.rho.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return fail("rho values must lie in [0, 1]".into());
        }
        if self.beta.len() != 1 && self.beta.len() != self.users {
            return fail(format!(
                "beta needs 1 or {} entries, got {}",
                self.users,
                self.beta.len()
            ));
        }
        if self.beta.iter().chain([&self.beta_e]).any(|b| !(*b > 0.0)) {
            return fail("large-scale gains must be positive".into());
        }
        if !self.gamma0_db.is_finite() || self.gamma_e_db.iter().any(|g| g.is_nan()) {
            return fail("SNR thresholds must be numbers".into());
        }
        if self.schemes.contains(&PrecoderKind::Zf) && self.antennas < self.users + 1 {
            return fail(format!(
                "zf needs antennas >= users + 1, got {} and {}",
                self.antennas, self.users
            ));
        }
        if self.schemes.contains(&PrecoderKind::AnNoCsi) && self.antennas <= self.users {
            return fail("an_no_csi needs antennas > users".into());
        }
        if self.train_trials == 0 || self.test_trials == 0 || self.ser_trials == 0 {
            return fail("trial counts must be positive".into());
        }
        if self.bins == 0 || self.bins % self.order != 0 {
            return fail(format!(
                "bins ({}) must be a positive multiple of order ({})",
                self.bins, self.order
            ));
        }
        Ok(())
    }

    fn geometry(&self, rho: f64) -> Result<LinkGeometry> {
        let beta = if self.beta.len() == 1 {
            vec![self.beta[0]; self.users]
        } else {
            self.beta.clone()
        };
        let g = LinkGeometry {
            antennas: self.antennas,
            users: self.users,
            beta,
            beta_e: self.beta_e,
            rho,
        };
        g.validate()?;
        Ok(g)
    }

    /// Runs `f` on a pool with the configured thread count.
    pub fn with_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }

    /// Every (scheme, ρ, γe, P0) combination, schemes outermost. Schemes
    /// without a power floor get a single `P0 = None` entry.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for &scheme in &self.schemes {
            let floors: Vec<Option<f64>> = if scheme == PrecoderKind::AnNoCsi && !self.p0_db.is_empty() {
                self.p0_db.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for &rho in &self.rho {
                for &p0_db in &floors {
                    for &gamma_e_db in &self.gamma_e_db {
                        out.push(Point {
                            scheme,
                            rho,
                            gamma_e_db,
                            p0_db,
                        });
                    }
                }
            }
        }
        out
    }
}

/// One parameter point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub scheme: PrecoderKind,
    pub rho: f64,
    pub gamma_e_db: f64,
    pub p0_db: Option<f64>,
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub scheme: PrecoderKind,
    pub order: usize,
    pub antennas: usize,
    pub users: usize,
    pub rho: f64,
    pub gamma0_db: f64,
    pub gamma_e_db: f64,
    pub p0_db: Option<f64>,
    pub avg_power_db: f64,
    pub p_det_eve: f64,
    pub ser_user1: f64,
    pub ser_avg: f64,
    pub infeasible_rate: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Full output of [`run_point`].
#[derive(Debug, Clone)]
pub struct PointResult {
    pub record: MetricsRecord,
    /// `None` when no training trial was feasible.
    pub pdf: Option<PhasePdf>,
    /// Training, test and SER trials in that order.
    pub trials: Vec<(Stage, TrialRecord)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Train,
    Test,
    Ser,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Train => "train",
            Stage::Test => "test",
            Stage::Ser => "ser",
        }
    }
}

/// Runs training, detection and SER trials for one point.
///
/// Must be called inside the desired thread pool (see
/// [`ExperimentConfig::with_pool`]); results do not depend on the pool size.
pub fn run_point(cfg: &ExperimentConfig, point: &Point) -> Result<PointResult> {
    cfg.validate()?;
    let scenario = Scenario {
        geometry: cfg.geometry(point.rho)?,
        psk: PskConstellation::new(cfg.order)?,
        qos: QosParams::new(cfg.gamma0_db, point.gamma_e_db)?,
        scheme: point.scheme,
        p0: point.p0_db.map_or(0.0, db_to_linear),
    };
    let train_first = match cfg.pdf_mode {
        PdfMode::RotateFromFirst => FirstSymbol::Fixed(0),
        PdfMode::Independent => FirstSymbol::Cycle,
    };
    let train = scenario.run_trials(&Substream::new(cfg.seed, TRAIN_DOMAIN), cfg.train_trials, train_first, false)?;
    let test = scenario.run_trials(&Substream::new(cfg.seed, TEST_DOMAIN), cfg.test_trials, FirstSymbol::Cycle, false)?;
    let ser = scenario.run_trials(&Substream::new(cfg.seed, SER_DOMAIN), cfg.ser_trials, FirstSymbol::Uniform, false)?;

    let pdf = build_conditional_pdf(&phase_samples(&train), cfg.order, cfg.bins, cfg.pdf_mode).ok();
    let p_det_eve = match &pdf {
        Some(pdf) => evaluate_detector(pdf, &phase_samples(&test)).map_or(f64::NAN, |r| r.p_correct),
        None => f64::NAN,
    };
    let (ser_user1, ser_avg) = match ser_from_records(&ser, cfg.users) {
        Ok(r) => (r.per_user[0], r.average),
        Err(_) => (f64::NAN, f64::NAN),
    };

    let all = || train.iter().chain(&test).chain(&ser);
    let total = all().count();
    let powers: Vec<f64> = all().filter_map(|r| r.power).collect();
    let infeasible_rate = (total - powers.len()) as f64 / total as f64;
    let avg_power_db = if powers.is_empty() {
        f64::NAN
    } else {
        linear_to_db(powers.iter().sum::<f64>() / powers.len() as f64)
    };
    if infeasible_rate > INFEASIBLE_WARN {
        log::warn!(
            "{} at rho={} gamma_e={} dB: {:.2}% of trials infeasible",
            point.scheme,
            point.rho,
            point.gamma_e_db,
            100.0 * infeasible_rate
        );
    }

    let record = MetricsRecord {
        scheme: point.scheme,
        order: cfg.order,
        antennas: cfg.antennas,
        users: cfg.users,
        rho: point.rho,
        gamma0_db: cfg.gamma0_db,
        gamma_e_db: point.gamma_e_db,
        p0_db: point.p0_db,
        avg_power_db,
        p_det_eve,
        ser_user1,
        ser_avg,
        infeasible_rate,
        trials: total as u64,
        seed: cfg.seed,
    };
    let trials = train
        .into_iter()
        .map(|r| (Stage::Train, r))
        .chain(test.into_iter().map(|r| (Stage::Test, r)))
        .chain(ser.into_iter().map(|r| (Stage::Ser, r)))
        .collect();
    Ok(PointResult { record, pdf, trials })
}

/// Runs every point of `cfg` on its thread pool.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    cfg.with_pool(|| {
        cfg.points()
            .iter()
            .map(|p| {
                log::info!("running {} rho={} gamma_e={} dB", p.scheme, p.rho, p.gamma_e_db);
                run_point(cfg, p).map(|r| r.record)
            })
            .collect()
    })?
}

/// One record per (scheme, γe) at the first ρ and P0.
pub fn run_sweep_gamma_e(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    let mut c = cfg.clone();
    c.rho.truncate(1);
    c.p0_db.truncate(1);
    run_all(&c)
}

/// One record per (scheme, ρ, P0) at the first γe.
pub fn run_sweep_rho(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    let mut c = cfg.clone();
    c.gamma_e_db.truncate(1);
    run_all(&c)
}

/// `(avg_power_db, p_det_eve)` pairs of a sweep, in input order.
pub fn tradeoff_pairs(records: &[MetricsRecord]) -> Vec<(f64, f64)> {
    records.iter().map(|r| (r.avg_power_db, r.p_det_eve)).collect()
}

/// ICSS and ZF at N = 6 and N = 4 with K = 3, QPSK, ρ = 0.3, γe = −30 dB;
/// trial counts, seed and threads come from `cfg`.
pub fn table1(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    let mut out = Vec::new();
    for n in [6, 4] {
        let mut c = cfg.clone();
        c.antennas = n;
        c.users = 3;
        c.order = 4;
        c.rho = vec![0.3];
        c.beta = vec![1.0];
        c.beta_e = 1.0;
        c.gamma0_db = 10.0;
        c.gamma_e_db = vec![-30.0];
        c.p0_db.clear();
        c.schemes = vec![PrecoderKind::Icss, PrecoderKind::Zf];
        out.extend(run_all(&c)?);
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "scheme,M,N,K,rho,gamma0_db,gamma_e_db,p0_db,avg_power_db,p_det_eve,ser_user1,ser_avg,infeasible_rate,trials,seed";

/// Six significant digits, `%g` style.
pub fn format_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn csv_fields(r: &MetricsRecord) -> [String; 15] {
    let g = format_g;
    [
        r.scheme.to_string(),
        r.order.to_string(),
        r.antennas.to_string(),
        r.users.to_string(),
        g(r.rho),
        g(r.gamma0_db),
        g(r.gamma_e_db),
        r.p0_db.map(g).unwrap_or_default(),
        g(r.avg_power_db),
        g(r.p_det_eve),
        g(r.ser_user1),
        g(r.ser_avg),
        g(r.infeasible_rate),
        r.trials.to_string(),
        r.seed.to_string(),
    ]
}

fn write_records<W: std::io::Write>(records: &[MetricsRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.write_record(csv_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv(records: &[MetricsRecord]) -> String {
    let mut buf = Vec::new();
    write_records(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// Writes the metrics table to `path`.
pub fn emit_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let f = std::fs::File::create(path).map_err(io)?;
    write_records(records, f).map_err(|e| io(e.into()))
}

/// Inverse of [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let path = PathBuf::from("<csv>");
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header_ok = reader
        .headers()
        .map(|h| h.iter().eq(CSV_HEADER.split(',')))
        .unwrap_or(false);
    if !header_ok {
        return Err(Error::Parse {
            path,
            line: 1,
            msg: "unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let err = |msg: String| Error::Parse {
            path: path.clone(),
            line: i + 2,
            msg,
        };
        let f = row.map_err(|e| err(e.to_string()))?;
        let num = |j: usize| f[j].parse::<f64>().map_err(|_| err(format!("bad number '{}'", &f[j])));
        let int = |j: usize| f[j].parse::<u64>().map_err(|_| err(format!("bad integer '{}'", &f[j])));
        out.push(MetricsRecord {
            scheme: f[0].parse().map_err(|e: Error| err(e.to_string()))?,
            order: int(1)? as usize,
            antennas: int(2)? as usize,
            users: int(3)? as usize,
            rho: num(4)?,
            gamma0_db: num(5)?,
            gamma_e_db: num(6)?,
            p0_db: if f[7].is_empty() { None } else { Some(num(7)?) },
            avg_power_db: num(8)?,
            p_det_eve: num(9)?,
            ser_user1: num(10)?,
            ser_avg: num(11)?,
            infeasible_rate: num(12)?,
            trials: int(13)?,
            seed: int(14)?,
        });
    }
    Ok(out)
}

/// Per-trial powers as CSV (`scheme,rho,gamma_e_db,p0_db,stage,trial,power`).
pub fn write_trial_dump(results: &[(Point, &PointResult)], path: &Path) -> Result<()> {
    let mut s = String::from("scheme,rho,gamma_e_db,p0_db,stage,trial,power\n");
    for (p, r) in results {
        for (stage, t) in &r.trials {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                p.scheme,
                format_g(p.rho),
                format_g(p.gamma_e_db),
                p.p0_db.map(format_g).unwrap_or_default(),
                stage.name(),
                t.trial,
                t.power.map(|v| format!("{v:.9e}")).unwrap_or_default()
            );
        }
    }
    std::fs::write(path, s).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
