//! Simulation of a Doppler radar digitised through a modulo ADC.
//!
//! The pipeline synthesises a multi-target Doppler scene ([`scene`]), digitises
//! it with a saturating mid-rise converter or a folding one ([`adc`]), unfolds
//! the folded samples ([`recovery`]) and compares the strategies in the
//! frequency domain ([`spectral`], [`experiment`]).
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the command-line tool uses.

pub mod adc;
pub mod error;
pub mod experiment;
pub mod recovery;
pub mod scalar;
pub mod scene;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

pub type RadarConfig = scene::RadarConfig<f64>;
pub type Target = scene::Target<f64>;
pub type Harmonic = scene::Harmonic<f64>;
pub type SamplingGrid = scene::SamplingGrid<f64>;
pub type Signal = scene::SampledSignal<f64>;
pub type QuantizerSpec = adc::QuantizerSpec<f64>;
pub type FoldingSpec = adc::FoldingSpec<f64>;
pub type RecoverySpec = recovery::RecoverySpec<f64>;
pub type Unfolded = recovery::Unfolded<f64>;
pub type Spectrum = spectral::Spectrum<f64>;
pub type Peak = spectral::Peak<f64>;
pub type ScenarioSpec = experiment::ScenarioSpec<f64>;
pub type SpectralSettings = experiment::SpectralSettings<f64>;
pub type StrategyResult = experiment::StrategyResult<f64>;
pub type Report = experiment::Report<f64>;

pub use experiment::Strategy;
pub use spectral::Window;
