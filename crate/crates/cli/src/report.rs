use serde::Serialize;
use usf_radar_core::scene::doppler_frequency;
use usf_radar_core::{Report, Strategy, StrategyResult};

use crate::config::RunConfig;

pub fn signal_file(scenario: &str, strategy: Strategy) -> String {
    format!("{scenario}_{}_signal.csv", strategy.name())
}

pub fn spectrum_file(scenario: &str, strategy: Strategy) -> String {
    format!("{scenario}_{}_spectrum.csv", strategy.name())
}

pub fn report_file(scenario: &str) -> String {
    format!("{scenario}_report.toml")
}

/// On-disk form of a [`Report`].
#[derive(Debug, Serialize)]
pub struct ReportDocument {
    pub scenario: String,
    pub seed: u64,
    pub strong_doppler_hz: f64,
    pub weak_doppler_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_floor_gain_db: Option<f64>,
    pub equivalent_bits: f64,
    pub failures: Vec<String>,
    pub results: Vec<StrategyDocument>,
    pub config: RunConfig,
}

#[derive(Debug, Serialize)]
pub struct StrategyDocument {
    pub strategy: String,
    pub noise_floor_db: f64,
    pub weak_detected: bool,
    pub ground_truth_error: f64,
    pub peak_frequencies_hz: Vec<f64>,
    pub peak_magnitudes_db: Vec<f64>,
    pub signal_csv: String,
    pub spectrum_csv: String,
}

impl StrategyDocument {
    fn new(scenario: &str, r: &StrategyResult) -> Self {
        Self {
            strategy: r.strategy.name().to_string(),
            noise_floor_db: r.noise_floor_db,
            weak_detected: r.weak_detected,
            ground_truth_error: r.ground_truth_error,
            peak_frequencies_hz: r.peaks.iter().map(|p| p.frequency).collect(),
            peak_magnitudes_db: r.peaks.iter().map(|p| p.magnitude_db).collect(),
            signal_csv: signal_file(scenario, r.strategy),
            spectrum_csv: spectrum_file(scenario, r.strategy),
        }
    }
}

impl ReportDocument {
    pub fn new(report: &Report, failures: &[usf_radar_core::Error], config: &RunConfig) -> Self {
        let spec = &report.scenario;
        Self {
            scenario: spec.name.clone(),
            seed: spec.seed,
            strong_doppler_hz: doppler_frequency(spec.strong.velocity, &spec.radar),
            weak_doppler_hz: spec.weak_doppler(),
            noise_floor_gain_db: report.noise_floor_gain_db,
            equivalent_bits: report.equivalent_bits,
            failures: failures.iter().map(|e| e.to_string()).collect(),
            results: report.results.iter().map(|r| StrategyDocument::new(&spec.name, r)).collect(),
            config: config.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report fields are plain TOML values")
    }
}
