//! The smart eavesdropper and link-level detection metrics.
//!
//! The eavesdropper only looks at the phase of its received sample. It learns
//! one empirical phase density per symbol from training transmissions and
//! then decides by maximum likelihood over those histograms. Legitimate users
//! use the ordinary nearest-point PSK decision.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{sample_noise, sample_realization, LinkGeometry, Substream, TrialRng};
use crate::error::{Error, Result};
use crate::geometry::{wrap_phase, PskConstellation, QosParams};
use crate::precoders::{precode, PrecoderInput, PrecoderKind};

/// Per-symbol histogram densities of the eavesdropper's received phase over
/// `B` uniform bins of `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePdf {
    order: usize,
    bins: usize,
    /// M×B, each row integrates to one.
    densities: DMatrix<f64>,
    train_count: usize,
}

impl PhasePdf {
    /// Builds a PDF from raw per-bin counts, normalizing each row.
    pub fn from_counts(counts: DMatrix<f64>, train_count: usize) -> Result<Self> {
        let (order, bins) = counts.shape();
        if order < 2 || bins == 0 {
            return Err(Error::Argument(format!("bad PDF shape {order}x{bins}")));
        }
        let width = 2.0 * PI / bins as f64;
        let mut densities = counts;
        for mut row in densities.row_iter_mut() {
            let total: f64 = row.sum();
            if !(total > 0.0) {
                return Err(Error::EmptySamples);
            }
            row /= total * width;
        }
        Ok(Self {
            order,
            bins,
            densities,
            train_count,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn train_count(&self) -> usize {
        self.train_count
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * PI / self.bins as f64
    }

    pub fn densities(&self) -> &DMatrix<f64> {
        &self.densities
    }

    pub fn density(&self, symbol: usize, bin: usize) -> f64 {
        self.densities[(symbol, bin)]
    }

    /// Bin holding phase `theta` (wrapped into `[0, 2π)` first).
    pub fn bin_of(&self, theta: f64) -> usize {
        bin_index(theta, self.bins)
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_width()
    }

    /// CSV with columns `symbol_index,bin_center_radians,density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "symbol_index,bin_center_radians,density")?;
        for m in 0..self.order {
            for b in 0..self.bins {
                writeln!(out, "{},{:.6},{:.6e}", m, self.bin_center(b), self.density(m, b))?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }
}

fn bin_index(theta: f64, bins: usize) -> usize {
    let b = (wrap_phase(theta) / (2.0 * PI) * bins as f64) as usize;
    b.min(bins - 1)
}

/// How the per-symbol rows of a [`PhasePdf`] are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PdfMode {
    /// Estimate the density for symbol 0 only, mapping every sample of symbol
    /// `m` back by `m·2π/M`, and obtain the other rows by circular shifts.
    #[default]
    RotateFromFirst,
    /// One histogram per symbol from its own samples.
    Independent,
}

/// One eavesdropper observation labelled with user 1's true symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSample {
    pub symbol: usize,
    /// Received phase in `[0, 2π)`.
    pub theta: f64,
}

pub fn build_conditional_pdf(
    samples: &[PhaseSample],
    order: usize,
    bins: usize,
    mode: PdfMode,
) -> Result<PhasePdf> {
    PskConstellation::new(order)?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if bins == 0 || bins % order != 0 {
        return Err(Error::Argument(format!(
            "bin count {bins} must be a positive multiple of M = {order}"
        )));
    }
    if let Some(s) = samples.iter().find(|s| s.symbol >= order) {
        return Err(Error::Argument(format!("symbol index {} out of range", s.symbol)));
    }
    let shift = bins / order;
    let mut counts = DMatrix::zeros(order, bins);
    match mode {
        PdfMode::RotateFromFirst => {
            let mut base = vec![0.0; bins];
            for s in samples {
                let b = bin_index(s.theta, bins);
                base[(b + bins - s.symbol * shift) % bins] += 1.0;
            }
            for m in 0..order {
                for (b, &c) in base.iter().enumerate() {
                    counts[(m, (b + m * shift) % bins)] = c;
                }
            }
        }
        PdfMode::Independent => {
            for s in samples {
                counts[(s.symbol, bin_index(s.theta, bins))] += 1.0;
            }
        }
    }
    PhasePdf::from_counts(counts, samples.len())
}

/// Maximum-likelihood symbol for phase `theta`; ties go to the lowest index.
pub fn ml_detect(theta: f64, pdf: &PhasePdf) -> usize {
    let b = pdf.bin_of(theta);
    let mut best = 0;
    for m in 1..pdf.order {
        if pdf.density(m, b) > pdf.density(best, b) {
            best = m;
        }
    }
    best
}

/// Nearest constellation point, i.e. the largest `Re{y·c_m*}`. Ties (up to
/// rounding) go to the lowest index.
pub fn nearest_symbol_detect(y: Complex64, psk: &PskConstellation) -> usize {
    let tol = 1e-12 * y.norm();
    let mut best = 0;
    let mut best_val = (y * psk.point(0).conj()).re;
    for m in 1..psk.order() {
        let v = (y * psk.point(m).conj()).re;
        if v > best_val + tol {
            best = m;
            best_val = v;
        }
    }
    best
}

/// A full link configuration for one scheme at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: LinkGeometry,
    pub psk: PskConstellation,
    pub qos: QosParams,
    pub scheme: PrecoderKind,
    /// Linear power floor for the no-CSI scheme.
    pub p0: f64,
}

/// How user 1's symbol is chosen in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstSymbol {
    Uniform,
    Fixed(usize),
    /// Trial `t` uses symbol `t mod M`.
    Cycle,
}

/// Everything measured in one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    /// Symbol index of every user.
    pub symbols: Vec<usize>,
    /// `None` when the precoder did not return an optimal point.
    pub power: Option<f64>,
    pub eve_phase: f64,
    /// Per-user detected symbol index.
    pub detected: Vec<usize>,
}

impl TrialRecord {
    pub fn is_feasible(&self) -> bool {
        self.power.is_some()
    }

    pub fn user_errors(&self) -> impl Iterator<Item = bool> + '_ {
        self.symbols.iter().zip(&self.detected).map(|(s, d)| s != d)
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.p0 >= 0.0) {
            return Err(Error::Argument(format!("power floor {} must be >= 0", self.p0)));
        }
        Ok(())
    }

    /// Draws the channels, the symbols and the noise for trial `t` of
    /// `stream`, precodes and measures.
    ///
    /// The random draws are made in the same order for every scheme, so
    /// schemes evaluated on the same stream see the same channels, symbols
    /// and noise.
    pub fn run_trial(
        &self,
        stream: &Substream,
        trial: u64,
        first: FirstSymbol,
        noiseless: bool,
    ) -> Result<TrialRecord> {
        let mut rng: TrialRng = stream.rng(trial);
        let channel = sample_realization(&self.geometry, &mut rng)?;
        let m = self.psk.order();
        let symbols: Vec<usize> = (0..self.geometry.users)
            .map(|k| {
                let uniform = rng.gen_range(0..m);
                match (k, first) {
                    (0, FirstSymbol::Fixed(s)) => s,
                    (0, FirstSymbol::Cycle) => (trial % m as u64) as usize,
                    _ => uniform,
                }
            })
            .collect();
        if symbols[0] >= m {
            return Err(Error::Argument(format!("symbol index {} out of range", symbols[0])));
        }
        let points: Vec<Complex64> = symbols.iter().map(|&s| self.psk.point(s)).collect();
        let input = PrecoderInput {
            channel: &channel,
            symbols: &points,
            psk: self.psk,
            qos: self.qos,
        };
        let solution = match precode(self.scheme, &input, self.p0) {
            Ok(s) if s.is_optimal() => Some(s),
            Ok(_) => None,
            Err(Error::RankDeficient(msg)) => {
                log::debug!("trial {trial}: {msg}");
                None
            }
            Err(e) => return Err(e),
        };

        let noise = |rng: &mut TrialRng| {
            let n = sample_noise(rng);
            if noiseless {
                Complex64::new(0.0, 0.0)
            } else {
                n
            }
        };
        let n_e = noise(&mut rng);
        let user_noise: Vec<Complex64> = (0..self.geometry.users).map(|_| noise(&mut rng)).collect();

        let Some(solution) = solution else {
            return Ok(TrialRecord {
                trial,
                symbols,
                power: None,
                eve_phase: 0.0,
                detected: Vec::new(),
            });
        };
        let x = &solution.x;
        let y_e = (channel.h_e.transpose() * x)[0] + n_e;
        let detected = (0..self.geometry.users)
            .map(|k| {
                let y = (channel.h.row(k) * x)[0] + user_noise[k];
                nearest_symbol_detect(y, &self.psk)
            })
            .collect();
        Ok(TrialRecord {
            trial,
            symbols,
            power: Some(solution.power),
            eve_phase: wrap_phase(y_e.arg()),
            detected,
        })
    }

    /// Runs trials `0..count` of `stream` in parallel; results are in trial
    /// order regardless of scheduling.
    pub fn run_trials(
        &self,
        stream: &Substream,
        count: u64,
        first: FirstSymbol,
        noiseless: bool,
    ) -> Result<Vec<TrialRecord>> {
        self.validate()?;
        (0..count)
            .into_par_iter()
            .map(|t| self.run_trial(stream, t, first, noiseless))
            .collect()
    }
}

/// Phase observations from trials `0..trials` of `stream`, with user 1's
/// symbol chosen by `first`. Infeasible trials are skipped.
pub fn collect_phase_samples(
    scenario: &Scenario,
    stream: &Substream,
    trials: u64,
    first: FirstSymbol,
) -> Result<Vec<PhaseSample>> {
    if trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    let records = scenario.run_trials(stream, trials, first, false)?;
    Ok(phase_samples(&records))
}

pub fn phase_samples(records: &[TrialRecord]) -> Vec<PhaseSample> {
    let skipped = records.iter().filter(|r| !r.is_feasible()).count();
    if skipped > 0 {
        log::debug!("{skipped} of {} trials skipped as infeasible", records.len());
    }
    records
        .iter()
        .filter(|r| r.is_feasible())
        .map(|r| PhaseSample {
            symbol: r.symbols[0],
            theta: r.eve_phase,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    /// Mean of the confusion diagonal (uniform prior over symbols).
    pub p_correct: f64,
    /// Row `m` is the distribution of decisions given true symbol `m`.
    pub confusion: DMatrix<f64>,
    pub test_count: usize,
    pub train_count: usize,
    /// False when training and test samples came from the same stream.
    pub valid: bool,
}

impl DetectionReport {
    /// Binomial standard error of `p_correct`.
    pub fn std_error(&self) -> f64 {
        let p = self.p_correct;
        (p * (1.0 - p) / self.test_count.max(1) as f64).sqrt()
    }
}

/// Scores the ML detector built from `pdf` on labelled test samples.
pub fn evaluate_detector(pdf: &PhasePdf, test: &[PhaseSample]) -> Result<DetectionReport> {
    if test.is_empty() {
        return Err(Error::EmptySamples);
    }
    let m = pdf.order();
    let mut counts = DMatrix::<f64>::zeros(m, m);
    for s in test {
        if s.symbol >= m {
            return Err(Error::Argument(format!("symbol index {} out of range", s.symbol)));
        }
        counts[(s.symbol, ml_detect(s.theta, pdf))] += 1.0;
    }
    let mut confusion = counts;
    let mut seen = 0;
    for mut row in confusion.row_iter_mut() {
        let total = row.sum();
        if total > 0.0 {
            row /= total;
            seen += 1;
        }
    }
    let p_correct = confusion.diagonal().sum() / seen as f64;
    Ok(DetectionReport {
        p_correct,
        confusion,
        test_count: test.len(),
        train_count: pdf.train_count(),
        valid: true,
    })
}

/// Trains on `train_trials` of `train` (user 1 fixed to symbol 0 unless
/// `mode` is independent) and tests on `test_trials` of `test` with user 1's
/// symbols cycling through the constellation.
pub fn estimate_detection_probability(
    scenario: &Scenario,
    train: (&Substream, u64),
    test: (&Substream, u64),
    bins: usize,
    mode: PdfMode,
) -> Result<DetectionReport> {
    let first = match mode {
        PdfMode::RotateFromFirst => FirstSymbol::Fixed(0),
        PdfMode::Independent => FirstSymbol::Cycle,
    };
    let train_samples = collect_phase_samples(scenario, train.0, train.1, first)?;
    let pdf = build_conditional_pdf(&train_samples, scenario.psk.order(), bins, mode)?;
    let test_samples = collect_phase_samples(scenario, test.0, test.1, FirstSymbol::Cycle)?;
    let mut report = evaluate_detector(&pdf, &test_samples)?;
    report.valid = train.0 != test.0;
    if !report.valid {
        log::warn!("detection estimate trained and tested on the same stream");
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerReport {
    /// Symbol error rate of every user.
    pub per_user: Vec<f64>,
    pub average: f64,
    /// Trials that produced a transmission.
    pub trials: usize,
}

/// Symbol error rates over the feasible trials in `records`.
pub fn ser_from_records(records: &[TrialRecord], users: usize) -> Result<SerReport> {
    let feasible: Vec<&TrialRecord> = records.iter().filter(|r| r.is_feasible()).collect();
    if feasible.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut errors = vec![0usize; users];
    for r in &feasible {
        for (k, wrong) in r.user_errors().enumerate() {
            errors[k] += usize::from(wrong);
        }
    }
    let n = feasible.len() as f64;
    let per_user: Vec<f64> = errors.iter().map(|&e| e as f64 / n).collect();
    let average = per_user.iter().sum::<f64>() / users as f64;
    Ok(SerReport {
        per_user,
        average,
        trials: feasible.len(),
    })
}

/// Legitimate users' symbol error rates over `trials` of `stream` with
/// uniform symbols. With `noiseless` set the receivers see `h_kᵀx` only.
pub fn estimate_user_ser(
    scenario: &Scenario,
    stream: &Substream,
    trials: u64,
    noiseless: bool,
) -> Result<SerReport> {
    let records = scenario.run_trials(stream, trials, FirstSymbol::Uniform, noiseless)?;
    ser_from_records(&records, scenario.geometry.users)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psk(m: usize) -> PskConstellation {
        PskConstellation::new(m).unwrap()
    }

    #[test]
    fn nearest_detect_on_points_and_boundary() {
        let q = psk(4);
        for m in 0..4 {
            assert_eq!(nearest_symbol_detect(q.point(m) * 0.7, &q), m);
        }
        // y = 1 sits between symbols 0 and 3
        assert_eq!(nearest_symbol_detect(Complex64::new(1.0, 0.0), &q), 0);
    }

    #[test]
    fn delta_rows_detect_their_own_symbol() {
        let bins = 8;
        let mut counts = DMatrix::from_element(4, bins, 0.0);
        for m in 0..4 {
            let b = bin_index(psk(4).point(m).arg(), bins);
            counts[(m, b)] = 1.0;
        }
        let pdf = PhasePdf::from_counts(counts, 4).unwrap();
        for m in 0..4 {
            assert_eq!(ml_detect(wrap_phase(psk(4).point(m).arg()), &pdf), m);
        }
    }

    #[test]
    fn flat_pdf_always_picks_first_symbol() {
        let pdf = PhasePdf::from_counts(DMatrix::from_element(4, 360, 1.0), 1).unwrap();
        for i in 0..100 {
            assert_eq!(ml_detect(i as f64 * 0.0627, &pdf), 0);
        }
        let test: Vec<PhaseSample> = (0..400)
            .map(|i| PhaseSample {
                symbol: i % 4,
                theta: i as f64 * 0.01,
            })
            .collect();
        let r = evaluate_detector(&pdf, &test).unwrap();
        assert!((r.p_correct - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rotated_rows_are_exact_shifts() {
        let samples: Vec<PhaseSample> = (0..1000)
            .map(|i| PhaseSample {
                symbol: 0,
                theta: (i as f64 * 0.37).sin().abs() * 2.0,
            })
            .collect();
        let pdf = build_conditional_pdf(&samples, 8, 360, PdfMode::RotateFromFirst).unwrap();
        for m in 0..8 {
            for b in 0..360 {
                assert_eq!(pdf.density(m, (b + m * 45) % 360), pdf.density(0, b));
            }
        }
    }

    #[test]
    fn rows_integrate_to_one() {
        let samples: Vec<PhaseSample> = (0..5000)
            .map(|i| PhaseSample {
                symbol: i % 4,
                theta: (i as f64 * 1.618).rem_euclid(2.0 * PI),
            })
            .collect();
        for mode in [PdfMode::RotateFromFirst, PdfMode::Independent] {
            let pdf = build_conditional_pdf(&samples, 4, 360, mode).unwrap();
            for m in 0..4 {
                let total: f64 = (0..360).map(|b| pdf.density(m, b)).sum::<f64>() * pdf.bin_width();
                assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_and_misaligned_inputs_error() {
        assert!(matches!(
            build_conditional_pdf(&[], 4, 360, PdfMode::RotateFromFirst),
            Err(Error::EmptySamples)
        ));
        let s = [PhaseSample { symbol: 0, theta: 0.1 }];
        assert!(build_conditional_pdf(&s, 8, 100, PdfMode::RotateFromFirst).is_err());
        // independent rows need samples for every symbol
        assert!(build_conditional_pdf(&s, 4, 360, PdfMode::Independent).is_err());
    }

    #[test]
    fn csv_dump_has_one_line_per_bin() {
        let pdf = PhasePdf::from_counts(DMatrix::from_element(2, 4, 1.0), 8).unwrap();
        let mut buf = Vec::new();
        pdf.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 8);
        assert!(text.starts_with("symbol_index,bin_center_radians,density\n"));
    }
}
