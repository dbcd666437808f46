//! The near-far study: one two-target scene acquired and reconstructed by
//! every strategy, with the metrics that compare them.

use std::fmt;
use std::str::FromStr;

use crate::adc::{acquire_classic, acquire_modulo, FoldingSpec, QuantizerSpec};
use crate::error::{Error, Result};
use crate::recovery::{unwrap_baseline, usf_unfold, usf_unfold_sparse, RecoverySpec};
use crate::scalar::Real;
use crate::scene::{add_awgn, doppler_frequency, synthesize, RadarConfig, SampledSignal, SamplingGrid, Target};
use crate::spectral::{detect_peaks, estimate_noise_floor, periodogram_db, Peak, Spectrum, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Saturating ADC over `±β`.
    Classic,
    /// Folded samples as acquired, no reconstruction.
    ModuloRaw,
    /// Sequential unwrapping of the folded samples.
    Unwrap,
    /// Difference-domain unfolding.
    Usf,
    /// Tone-prior unfolding.
    UsfSparse,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Classic,
        Strategy::ModuloRaw,
        Strategy::Unwrap,
        Strategy::Usf,
        Strategy::UsfSparse,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Classic => "classic",
            Strategy::ModuloRaw => "modulo_raw",
            Strategy::Unwrap => "unwrap",
            Strategy::Usf => "usf",
            Strategy::UsfSparse => "usf_sparse",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::config(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSettings<T> {
    pub window: Window,
    /// `None` selects the next power of two at or above the record length.
    pub dft_size: Option<usize>,
    pub margin_db: T,
    pub guard_bins: usize,
    pub min_separation_hz: T,
}

impl<T: Real> Default for SpectralSettings<T> {
    fn default() -> Self {
        Self {
            window: Window::Hann,
            dft_size: None,
            margin_db: T::lit(8.0),
            guard_bins: 20,
            min_separation_hz: T::lit(5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec<T> {
    pub name: String,
    pub radar: RadarConfig<T>,
    pub grid: SamplingGrid<T>,
    pub strong: Target<T>,
    pub weak: Target<T>,
    pub classic_quantizer: QuantizerSpec<T>,
    pub modulo_quantizer: QuantizerSpec<T>,
    pub recovery: RecoverySpec<T>,
    pub noise_sigma: T,
    pub seed: u64,
    pub spectral: SpectralSettings<T>,
}

impl<T: Real> ScenarioSpec<T> {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.grid.validate()?;
        self.strong.validate()?;
        self.weak.validate()?;
        self.classic_quantizer.validate()?;
        self.modulo_quantizer.validate()?;
        let lambda = self.recovery.threshold;
        if (self.modulo_quantizer.full_scale - lambda).abs() > T::lit(1e-12) * lambda {
            return Err(Error::config(format!(
                "modulo quantizer full scale {} must equal the recovery threshold {}",
                self.modulo_quantizer.full_scale, lambda
            )));
        }
        if !(self.noise_sigma >= T::zero()) {
            return Err(Error::domain("noise sigma must be non-negative"));
        }
        Ok(())
    }

    pub fn folding(&self) -> Result<FoldingSpec<T>> {
        FoldingSpec::new(self.recovery.threshold)
    }

    pub fn targets(&self) -> [Target<T>; 2] {
        [self.strong.clone(), self.weak.clone()]
    }

    /// Every tone of the scene (fundamentals and harmonics) aliased into `[0, rate/2]`.
    pub fn line_frequencies(&self) -> Vec<T> {
        let rate = self.grid.rate;
        let alias = |f: T| {
            let r = f.abs() % rate;
            r.min(rate - r)
        };
        let mut out = Vec::new();
        for t in self.targets() {
            let fd = doppler_frequency(t.velocity, &self.radar);
            out.push(alias(fd));
            out.extend(t.harmonics.iter().map(|h| alias(T::from_len(h.order as usize) * fd)));
        }
        out
    }

    pub fn weak_doppler(&self) -> T {
        doppler_frequency(self.weak.velocity, &self.radar)
    }
}

/// `2 × Σ peak bounds`, rounded up to a multiple of `2λ`.
pub fn default_amplitude_bound<T: Real>(targets: &[Target<T>], threshold: T) -> T {
    let peak = targets.iter().fold(T::zero(), |acc, t| acc + t.peak_bound());
    let period = T::lit(2.0) * threshold;
    let bound = (T::lit(2.0) * peak).max(threshold);
    (bound / period).ceil().max(T::one()) * period
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult<T> {
    pub strategy: Strategy,
    pub signal: SampledSignal<T>,
    pub spectrum: Spectrum<T>,
    pub peaks: Vec<Peak<T>>,
    pub noise_floor_db: T,
    pub weak_detected: bool,
    /// Max error against the ADC input after removing the best `2λZ` constant.
    pub ground_truth_error: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report<T> {
    pub scenario: ScenarioSpec<T>,
    /// The analog signal both converters saw (scene plus front-end noise).
    pub truth: SampledSignal<T>,
    pub results: Vec<StrategyResult<T>>,
    /// Classic floor minus unfolded floor, when both ran.
    pub noise_floor_gain_db: Option<T>,
    pub equivalent_bits: T,
}

impl<T: Real> Report<T> {
    pub fn result(&self, strategy: Strategy) -> Option<&StrategyResult<T>> {
        self.results.iter().find(|r| r.strategy == strategy)
    }

    pub fn ground_truth_errors(&self) -> Vec<(Strategy, T)> {
        self.results.iter().map(|r| (r.strategy, r.ground_truth_error)).collect()
    }
}

fn annotate<V>(strategy: Strategy, r: Result<V>) -> Result<V> {
    r.map_err(|e| Error::Strategy { strategy: strategy.name().to_string(), source: Box::new(e) })
}

/// Runs the full chain for each requested strategy. Deterministic in `spec.seed`.
/// Fails on the first strategy that fails.
pub fn run_scenario<T: Real>(spec: &ScenarioSpec<T>, strategies: &[Strategy]) -> Result<Report<T>> {
    let (report, mut failures) = run_scenario_partial(spec, strategies)?;
    match failures.is_empty() {
        true => Ok(report),
        false => Err(failures.remove(0)),
    }
}

/// Like [`run_scenario`], but a failing strategy is recorded (annotated with
/// its name) and left out of the report instead of aborting the run.
pub fn run_scenario_partial<T: Real>(
    spec: &ScenarioSpec<T>,
    strategies: &[Strategy],
) -> Result<(Report<T>, Vec<Error>)> {
    spec.validate()?;
    let clean = synthesize(&spec.targets(), &spec.radar, &spec.grid)?;
    let truth = add_awgn(&clean, spec.noise_sigma, spec.seed)?;
    let folding = spec.folding()?;
    let lambda = spec.recovery.threshold;
    let weak_freq = spec.weak_doppler();
    let folded = acquire_modulo(&truth, &folding, &spec.modulo_quantizer)?;

    let mut requested: Vec<Strategy> = Vec::new();
    for &s in strategies {
        if !requested.contains(&s) {
            requested.push(s);
        }
    }
    let mut results = Vec::with_capacity(requested.len());
    let mut failures = Vec::new();
    for strategy in requested {
        let signal = match strategy {
            Strategy::Classic => acquire_classic(&truth, &spec.classic_quantizer),
            Strategy::ModuloRaw => Ok(folded.clone()),
            Strategy::Unwrap => unwrap_baseline(&folded, lambda),
            Strategy::Usf => usf_unfold(&folded, &spec.recovery).map(|u| u.signal),
            Strategy::UsfSparse => usf_unfold_sparse(&folded, &spec.recovery).map(|u| u.signal),
        };
        match annotate(strategy, signal.and_then(|sig| analyse(strategy, sig, &truth, spec, weak_freq))) {
            Ok(r) => results.push(r),
            Err(e) => failures.push(e),
        }
    }

    let classic = results.iter().find(|r| r.strategy == Strategy::Classic);
    let unfolded = results
        .iter()
        .find(|r| r.strategy == Strategy::Usf)
        .or_else(|| results.iter().find(|r| r.strategy == Strategy::UsfSparse));
    let noise_floor_gain_db = match (classic, unfolded) {
        (Some(c), Some(u)) => Some(noise_floor_gain(c, u)?),
        _ => None,
    };
    let equivalent_bits = equivalent_bits(spec.classic_quantizer.full_scale, lambda)
        .unwrap_or_else(|_| T::zero());
    let report = Report { scenario: spec.clone(), truth, results, noise_floor_gain_db, equivalent_bits };
    Ok((report, failures))
}

fn analyse<T: Real>(
    strategy: Strategy,
    signal: SampledSignal<T>,
    truth: &SampledSignal<T>,
    spec: &ScenarioSpec<T>,
    weak_freq: T,
) -> Result<StrategyResult<T>> {
    let settings = &spec.spectral;
    let spectrum = periodogram_db(&signal, settings.window, settings.dft_size)?;
    let peaks = detect_peaks(&spectrum, settings.margin_db, settings.min_separation_hz)?;
    // only the scene's own lines are excluded; quantization spurs count as noise
    let lines: Vec<Peak<T>> = spec
        .line_frequencies()
        .into_iter()
        .map(|f| {
            let bin = spectrum.bin_of(f);
            Peak { frequency: spectrum.frequencies()[bin], magnitude_db: spectrum.magnitudes_db()[bin], bin }
        })
        .collect();
    let noise_floor_db = estimate_noise_floor(&spectrum, &lines, settings.guard_bins)?;
    let tolerance = spectrum.bin_width();
    let weak_detected = peaks.iter().any(|p| (p.frequency - weak_freq.abs()).abs() <= tolerance);
    let ground_truth_error = reconstruction_error(&signal, truth, spec.recovery.threshold)?;
    Ok(StrategyResult {
        strategy,
        signal,
        spectrum,
        peaks,
        noise_floor_db,
        weak_detected,
        ground_truth_error,
    })
}

/// `classic.floor - usf.floor` in dB.
pub fn noise_floor_gain<T: Real>(classic: &StrategyResult<T>, usf: &StrategyResult<T>) -> Result<T> {
    if !classic.spectrum.same_layout(&usf.spectrum) {
        return Err(Error::size("noise floors compared over different bin layouts"));
    }
    Ok(classic.noise_floor_db - usf.noise_floor_db)
}

/// Resolution gained by matching the ADC range to `λ` instead of `β`: `log2(β/λ)`.
pub fn equivalent_bits<T: Real>(full_scale: T, threshold: T) -> Result<T> {
    if !(threshold > T::zero()) || full_scale < threshold {
        return Err(Error::domain("equivalent bits need β ≥ λ > 0"));
    }
    Ok((full_scale / threshold).log2())
}

/// `max |recovered - truth - c|` for the best constant `c ∈ 2λZ`.
pub fn reconstruction_error<T: Real>(recovered: &SampledSignal<T>, truth: &SampledSignal<T>, threshold: T) -> Result<T> {
    if recovered.grid() != truth.grid() {
        return Err(Error::size("recovered and reference signals use different grids"));
    }
    let diff: Vec<T> = recovered.values().iter().zip(truth.values()).map(|(a, b)| *a - *b).collect();
    let (lo, hi) = diff
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let period = T::lit(2.0) * threshold;
    let mid = (lo + hi) / T::lit(2.0) / period;
    let err = |k: T| (hi - k * period).abs().max((lo - k * period).abs());
    Ok(err(mid.floor()).min(err(mid.ceil())))
}

/// Weak-target amplitude whose spectral peak sits `offset_db` relative to the
/// classic pipeline's floor measured with the weak target silenced.
pub fn calibrate_weak_amplitude<T: Real>(spec: &ScenarioSpec<T>, offset_db: T) -> Result<T> {
    let mut silent = spec.clone();
    silent.weak.amplitude = T::zero();
    let report = run_scenario(&silent, &[Strategy::Classic])?;
    let floor = report.results[0].noise_floor_db;
    Ok(T::lit(10.0).powf((floor + offset_db) / T::lit(20.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{kmh_to_mps, Harmonic};

    fn grid(n: usize) -> SamplingGrid<f64> {
        SamplingGrid::new(8140.0, n).unwrap()
    }

    fn result_with(signal: SampledSignal<f64>, floor: f64) -> StrategyResult<f64> {
        let spectrum = periodogram_db(&signal, Window::Hann, None).unwrap();
        StrategyResult {
            strategy: Strategy::Classic,
            signal,
            spectrum,
            peaks: vec![],
            noise_floor_db: floor,
            weak_detected: false,
            ground_truth_error: 0.0,
        }
    }

    #[test]
    fn strategy_names_roundtrip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("dither".parse::<Strategy>().is_err());
    }

    #[test]
    fn equivalent_bits_examples() {
        assert_eq!(equivalent_bits(2.01, 2.01).unwrap(), 0.0);
        assert!((equivalent_bits(8.0f64, 2.01).unwrap() - 1.9928).abs() < 1e-3);
        assert_eq!(equivalent_bits(4.0 * 2.01, 2.01).unwrap(), 2.0);
        assert!(equivalent_bits(1.0, 2.01).is_err());
    }

    #[test]
    fn reconstruction_error_examples() {
        let lambda = 2.01;
        let truth = SampledSignal::new(grid(64), (0..64).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap();
        assert_eq!(reconstruction_error(&truth, &truth, lambda).unwrap(), 0.0);
        let shifted = truth.map(|v| v + 2.0 * lambda).unwrap();
        assert!(reconstruction_error(&shifted, &truth, lambda).unwrap() < 1e-12);
        let off = truth.map(|v| v + lambda).unwrap();
        assert!((reconstruction_error(&off, &truth, lambda).unwrap() - lambda).abs() < 1e-12);
        let other = SampledSignal::zeros(SamplingGrid::new(1000.0, 64).unwrap()).unwrap();
        assert!(matches!(reconstruction_error(&other, &truth, lambda), Err(Error::Size(_))));
    }

    #[test]
    fn floor_gain_examples() {
        let s = SampledSignal::new(grid(256), (0..256).map(|i| (i as f64).cos()).collect()).unwrap();
        let a = result_with(s.clone(), -70.0);
        assert_eq!(noise_floor_gain(&a, &a).unwrap(), 0.0);
        let b = result_with(s, -82.0);
        assert_eq!(noise_floor_gain(&a, &b).unwrap(), 12.0);
        let c = result_with(SampledSignal::zeros(grid(600)).unwrap(), -82.0);
        assert!(matches!(noise_floor_gain(&a, &c), Err(Error::Size(_))));
        // ideal gain for β = 8 V against λ = 2.01 V
        assert!((20.0 * (8.0f64 / 2.01).log10() - 11.99).abs() < 0.01);
    }

    #[test]
    fn default_bound_rounds_up() {
        let t = Target::new(3.0f64, 0.0, 0.0).unwrap();
        assert!((default_amplitude_bound(&[t], 2.01) - 8.04).abs() < 1e-12);
        assert!((default_amplitude_bound::<f64>(&[], 2.01) - 4.02).abs() < 1e-12);
    }

    #[test]
    fn mismatched_quantizer_rejected() {
        let radar = RadarConfig::new(24e9).unwrap();
        let spec = ScenarioSpec {
            name: "bad".into(),
            radar,
            grid: grid(512),
            strong: Target::new(6.0, kmh_to_mps(10.0), 0.0).unwrap(),
            weak: Target::new(0.1, kmh_to_mps(37.0), 0.0).unwrap(),
            classic_quantizer: QuantizerSpec::new(8, 8.0).unwrap(),
            modulo_quantizer: QuantizerSpec::new(8, 2.5).unwrap(),
            recovery: RecoverySpec::new(2.01).unwrap(),
            noise_sigma: 0.0,
            seed: 1,
            spectral: SpectralSettings::default(),
        };
        assert!(matches!(run_scenario(&spec, &Strategy::ALL), Err(Error::Config(_))));
    }

    fn near_far(weak: f64) -> ScenarioSpec<f64> {
        let strong = Target::new(7.5, kmh_to_mps(10.0), 0.3)
            .unwrap()
            .with_harmonics(vec![
                Harmonic { order: 2, relative_amplitude: 0.02 },
                Harmonic { order: 3, relative_amplitude: 0.01 },
            ])
            .unwrap();
        ScenarioSpec {
            name: "near_far".into(),
            radar: RadarConfig::new(24e9).unwrap(),
            grid: grid(4096),
            strong,
            weak: Target::new(weak, kmh_to_mps(37.0), 1.1).unwrap(),
            classic_quantizer: QuantizerSpec::new(8, 8.0).unwrap(),
            modulo_quantizer: QuantizerSpec::new(8, 2.01).unwrap(),
            recovery: RecoverySpec::new(2.01).unwrap().with_order(2).unwrap(),
            noise_sigma: 0.002,
            seed: 11,
            spectral: SpectralSettings::default(),
        }
    }

    #[test]
    fn partial_run_keeps_successful_strategies() {
        let spec = near_far(0.01);
        let err = run_scenario(&spec, &Strategy::ALL).unwrap_err();
        assert!(matches!(&err, Error::Strategy { strategy, .. } if strategy == "usf_sparse"), "{err}");
        let (report, failures) = run_scenario_partial(&spec, &Strategy::ALL).unwrap();
        assert_eq!(failures.len(), 1);
        assert_eq!(report.results.len(), 4);
        assert!(report.noise_floor_gain_db.is_some());
    }

    #[test]
    fn near_far_report_is_deterministic_and_ordered() {
        let spec = near_far(0.01);
        let strategies = [Strategy::Classic, Strategy::Usf, Strategy::Unwrap, Strategy::Classic];
        let a = run_scenario(&spec, &strategies).unwrap();
        let b = run_scenario(&spec, &strategies).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.results.len(), 3);
        let classic = a.result(Strategy::Classic).unwrap();
        let usf = a.result(Strategy::Usf).unwrap();
        assert!(usf.noise_floor_db <= classic.noise_floor_db);
        assert!(usf.weak_detected && classic.weak_detected);
        let delta = spec.modulo_quantizer.step();
        assert!(usf.ground_truth_error < 4.0 * delta, "{}", usf.ground_truth_error);
        assert!(a.result(Strategy::Unwrap).unwrap().ground_truth_error > 2.01);
    }

    #[test]
    fn line_frequencies_alias_into_band() {
        let spec = near_far(0.01);
        let lines = spec.line_frequencies();
        assert_eq!(lines.len(), 4);
        let f = doppler_frequency(kmh_to_mps(10.0), &spec.radar);
        assert!((lines[0] - f).abs() < 1e-9);
        assert!((lines[2] - 3.0 * f).abs() < 1e-9);
        let mut high = spec.clone();
        high.strong.harmonics = vec![Harmonic { order: 10, relative_amplitude: 0.01 }];
        // 4447.5 Hz folds to 8140 - 4447.5
        assert!((high.line_frequencies()[1] - (8140.0 - 10.0 * f)).abs() < 1e-9);
    }
}
