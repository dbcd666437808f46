use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use usf_radar_core::adc::{acquire_classic, acquire_modulo};
use usf_radar_core::experiment::run_scenario_partial;
use usf_radar_core::recovery::{unwrap_baseline, usf_unfold, usf_unfold_sparse};
use usf_radar_core::scene::{add_awgn, synthesize};
use usf_radar_core::spectral::{detect_peaks, estimate_noise_floor, periodogram_db};
use usf_radar_core::{FoldingSpec, QuantizerSpec, Signal, SpectralSettings, Window};

use crate::config::{OrderSetting, RunConfig};
use crate::csvio::{emit, read_signal_file, write_signal, write_spectrum};
use crate::error::{CliError, Result};
use crate::report::{report_file, signal_file, spectrum_file, ReportDocument};

/// Modulo-ADC Doppler radar simulator.
#[derive(Debug, Parser)]
#[command(name = "usf-radar", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the noise-free scene of a config as a `t_s,volts` CSV.
    Synth(SynthArgs),
    /// Digitise a signal with the classic or the modulo converter.
    Acquire(AcquireArgs),
    /// Unfold modulo samples.
    Recover(RecoverArgs),
    /// Magnitude spectrum of a signal as a `freq_hz,mag_db` CSV.
    Spectrum(SpectrumArgs),
    /// Run the near-far comparison and write the report plus per-strategy CSVs.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for symmetry; the ideal scene has no randomness.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AcquireMethod {
    Classic,
    Modulo,
}

#[derive(Debug, Args)]
pub struct AcquireArgs {
    /// Scene and converter settings. Without `--input` the scene is
    /// synthesised from it, front-end noise included.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Signal CSV to digitise instead of the configured scene.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AcquireMethod::Modulo)]
    pub method: AcquireMethod,
    /// Folding threshold in volts (modulo).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub bits: Option<u32>,
    /// Quantizer range `β` in volts (classic).
    #[arg(long)]
    pub full_scale: Option<f64>,
    /// Overrides the config's noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecoverMethod {
    Usf,
    #[value(name = "usf_sparse")]
    UsfSparse,
    Unwrap,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Folded samples, `t_s,volts`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RecoverMethod::Usf)]
    pub method: RecoverMethod,
    /// Folding threshold in volts; falls back to the config's `[modulo]`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Supplies `[recovery]` defaults and the scene for `order = "auto"`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Difference order: a positive integer or `auto`.
    #[arg(long)]
    pub order: Option<OrderSetting>,
    #[arg(long)]
    pub max_frequency: Option<f64>,
    #[arg(long)]
    pub amplitude_bound: Option<f64>,
    /// Number of real tones for `usf_sparse`.
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Supplies `[spectral]` defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `hann` or `rectangular`.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub dft_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing. Defaults to the config's
    /// `output_dir`, then the current directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Acquire(a) => acquire(&a),
        Command::Recover(a) => recover(&a),
        Command::Spectrum(a) => spectrum(&a),
        Command::Experiment(a) => experiment(&a),
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn ideal_scene(config: &RunConfig) -> Result<Signal> {
    let targets = config.targets()?;
    Ok(synthesize(&targets, &config.radar()?, &config.grid()?)?)
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let config = load(&args.config, args.seed)?;
    let signal = ideal_scene(&config)?;
    emit(args.out.as_deref(), |w| write_signal(w, &signal))
}

pub fn acquire(args: &AcquireArgs) -> Result<()> {
    let config = args.config.as_deref().map(|p| load(p, args.seed)).transpose()?;
    let signal = match (&args.input, &config) {
        (Some(input), _) => read_signal_file(input)?,
        (None, Some(c)) => add_awgn(&ideal_scene(c)?, c.noise_sigma, c.seed)?,
        (None, None) => return Err(CliError::config("acquire needs --input or --config")),
    };
    let missing = |what: &str| CliError::config(format!("acquire: {what} not given by flag or config"));
    let out = match args.method {
        AcquireMethod::Classic => {
            let section = config.as_ref().and_then(|c| c.classic.as_ref());
            let bits = args.bits.or(section.map(|s| s.bits)).ok_or_else(|| missing("bits"))?;
            let beta = args.full_scale.or(section.map(|s| s.full_scale)).ok_or_else(|| missing("--full-scale"))?;
            let q = QuantizerSpec::new(bits, beta).map_err(|e| CliError::config(e.to_string()))?;
            acquire_classic(&signal, &q)?
        }
        AcquireMethod::Modulo => {
            let section = config.as_ref().and_then(|c| c.modulo.as_ref());
            let bits = args.bits.or(section.map(|s| s.bits)).ok_or_else(|| missing("bits"))?;
            let lambda = args.lambda.or(section.map(|s| s.threshold)).ok_or_else(|| missing("--lambda"))?;
            let fold = FoldingSpec::new(lambda).map_err(|e| CliError::config(e.to_string()))?;
            let q = QuantizerSpec::new(bits, lambda).map_err(|e| CliError::config(e.to_string()))?;
            acquire_modulo(&signal, &fold, &q)?
        }
    };
    emit(args.out.as_deref(), |w| write_signal(w, &out))
}

pub fn recover(args: &RecoverArgs) -> Result<()> {
    let config = args.config.as_deref().map(|p| load(p, args.seed)).transpose()?;
    let lambda = args
        .lambda
        .or(config.as_ref().and_then(|c| c.modulo.as_ref()).map(|m| m.threshold))
        .ok_or_else(|| CliError::config("recover needs --lambda or a config with [modulo]"))?;
    // flags override the config's [recovery] section
    let mut section = config.as_ref().map(|c| c.recovery.clone()).unwrap_or_default();
    if let Some(o) = args.order {
        section.order = o;
    }
    section.max_frequency = args.max_frequency.or(section.max_frequency);
    section.amplitude_bound = args.amplitude_bound.or(section.amplitude_bound);
    section.sparsity = args.sparsity.or(section.sparsity);
    let spec = match &config {
        Some(c) => section.to_spec(lambda, &c.targets()?, c.highest_line()?)?,
        None => section.to_spec(lambda, &[], None)?,
    };

    let folded = read_signal_file(&args.input)?;
    let (signal, order, residual) = match args.method {
        RecoverMethod::Usf => {
            let u = usf_unfold(&folded, &spec)?;
            (u.signal, Some(u.order), Some(u.grid_residual))
        }
        RecoverMethod::UsfSparse => {
            let u = usf_unfold_sparse(&folded, &spec)?;
            (u.signal, Some(u.order), Some(u.grid_residual))
        }
        RecoverMethod::Unwrap => (unwrap_baseline(&folded, lambda)?, None, None),
    };
    if let (Some(n), Some(res)) = (order, residual) {
        eprintln!("order {n}, grid residual {res:.3e} V");
    }
    emit(args.out.as_deref(), |w| write_signal(w, &signal))
}

pub fn spectrum(args: &SpectrumArgs) -> Result<()> {
    let settings = match &args.config {
        Some(p) => load(p, None)?.spectral_settings()?,
        None => SpectralSettings::default(),
    };
    let window = match &args.window {
        Some(w) => w.parse::<Window>().map_err(|e| CliError::config(e.to_string()))?,
        None => settings.window,
    };
    let dft_size = args.dft_size.or(settings.dft_size);
    let signal = read_signal_file(&args.input)?;
    let spectrum = periodogram_db(&signal, window, dft_size)?;
    let peaks = detect_peaks(&spectrum, settings.margin_db, settings.min_separation_hz)?;
    let floor = estimate_noise_floor(&spectrum, &peaks, settings.guard_bins)
        .or_else(|_| estimate_noise_floor(&spectrum, &[], settings.guard_bins))?;
    eprintln!("noise floor {floor:.2} dB, {} peak(s)", peaks.len());
    emit(args.out.as_deref(), |w| write_spectrum(w, &spectrum))
}

pub fn experiment(args: &ExperimentArgs) -> Result<()> {
    let config = load(&args.config, args.seed)?;
    let spec = config.scenario()?;
    let strategies = config.strategy_list()?;
    let (report, failures) = run_scenario_partial(&spec, &strategies)?;

    let dir = args.out.clone().or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for r in &report.results {
        emit(Some(&dir.join(signal_file(&spec.name, r.strategy))), |w| write_signal(w, &r.signal))?;
        emit(Some(&dir.join(spectrum_file(&spec.name, r.strategy))), |w| write_spectrum(w, &r.spectrum))?;
    }
    let doc = ReportDocument::new(&report, &failures, &config);
    let path = dir.join(report_file(&spec.name));
    std::fs::write(&path, doc.to_toml()).map_err(|e| CliError::io(&path, e))?;

    for r in &report.results {
        eprintln!(
            "{:<10} floor {:8.2} dB  weak {}  error {:.3e} V",
            r.strategy.name(),
            r.noise_floor_db,
            if r.weak_detected { "detected" } else { "missed" },
            r.ground_truth_error
        );
    }
    if let Some(g) = report.noise_floor_gain_db {
        eprintln!("noise floor gain {g:.2} dB");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(failures))
    }
}
