//! TOML run configuration. Every key is checked against the schema before
//! anything is computed; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use usf_radar_core::experiment::default_amplitude_bound;
use usf_radar_core::scene::kmh_to_mps;
use usf_radar_core::{
    Harmonic, QuantizerSpec, RadarConfig, RecoverySpec, SamplingGrid, ScenarioSpec, SpectralSettings, Strategy,
    Target, Window,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    pub radar: RadarSection,
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strong: Option<TargetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak: Option<TargetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classic: Option<ClassicSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulo: Option<ModuloSection>,
    #[serde(default)]
    pub recovery: RecoverySection,
    #[serde(default)]
    pub spectral: SpectralSection,
}

fn default_name() -> String {
    "scenario".to_string()
}

fn default_strategies() -> Vec<String> {
    Strategy::ALL.iter().map(|s| s.name().to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarSection {
    pub carrier_frequency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub rate: f64,
    pub count: usize,
    #[serde(default)]
    pub start_time: f64,
}

/// A target; give the radial velocity either in m/s or in km/h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_kmh: Option<f64>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub harmonics: Vec<HarmonicSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicSection {
    pub order: u32,
    pub relative_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicSection {
    pub bits: u32,
    pub full_scale: f64,
}

/// The modulo converter's quantizer spans exactly the folding range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuloSection {
    pub bits: u32,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderSetting {
    Fixed(usize),
    /// Only `"auto"` is accepted.
    Named(AutoOrder),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoOrder {
    Auto,
}

impl Default for OrderSetting {
    fn default() -> Self {
        OrderSetting::Fixed(1)
    }
}

impl std::str::FromStr for OrderSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(OrderSetting::Named(AutoOrder::Auto));
        }
        s.parse::<usize>()
            .map(OrderSetting::Fixed)
            .map_err(|_| format!("order must be a positive integer or `auto`, got `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverySection {
    #[serde(default)]
    pub order: OrderSetting,
    /// Highest signal frequency for the automatic order; defaults to the
    /// highest line of the configured scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
}

impl RecoverySection {
    /// `targets` and `highest_line` fill in the amplitude bound and maximum
    /// frequency that the automatic order needs, when not set explicitly.
    pub fn to_spec(&self, threshold: f64, targets: &[Target], highest_line: Option<f64>) -> Result<RecoverySpec> {
        let auto = self.order == OrderSetting::Named(AutoOrder::Auto);
        let mut spec = RecoverySpec::new(threshold).map_err(invalid("recovery"))?;
        let bound = match self.amplitude_bound {
            Some(b) => Some(b),
            None if auto && !targets.is_empty() => Some(default_amplitude_bound(targets, threshold)),
            None => None,
        };
        if let Some(b) = bound {
            spec = spec.with_amplitude_bound(b).map_err(invalid("recovery.amplitude_bound"))?;
        }
        spec = match self.order {
            OrderSetting::Fixed(n) => spec.with_order(n).map_err(invalid("recovery.order"))?,
            OrderSetting::Named(AutoOrder::Auto) => {
                if spec.amplitude_bound.is_none() {
                    return Err(CliError::config("order = \"auto\" needs amplitude_bound or configured targets"));
                }
                let f = self.max_frequency.or(highest_line.filter(|f| *f > 0.0)).ok_or_else(|| {
                    CliError::config("order = \"auto\" needs max_frequency or a moving target")
                })?;
                spec.with_auto_order(f).map_err(invalid("recovery.max_frequency"))?
            }
        };
        if let Some(k) = self.sparsity {
            spec = spec.with_sparsity(k).map_err(invalid("recovery.sparsity"))?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    #[serde(default = "default_window")]
    pub window: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dft_size: Option<usize>,
    #[serde(default = "default_margin")]
    pub margin_db: f64,
    #[serde(default = "default_guard")]
    pub guard_bins: usize,
    #[serde(default = "default_separation")]
    pub min_separation_hz: f64,
}

fn default_window() -> String {
    SpectralSettings::default().window.name().to_string()
}

fn default_margin() -> f64 {
    SpectralSettings::default().margin_db
}

fn default_guard() -> usize {
    SpectralSettings::default().guard_bins
}

fn default_separation() -> f64 {
    SpectralSettings::default().min_separation_hz
}

impl Default for SpectralSection {
    fn default() -> Self {
        Self {
            window: default_window(),
            dft_size: None,
            margin_db: default_margin(),
            guard_bins: default_guard(),
            min_separation_hz: default_separation(),
        }
    }
}

fn invalid(context: &str) -> impl Fn(usf_radar_core::Error) -> CliError + '_ {
    move |e| CliError::config(format!("{context}: {e}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks everything that does not need the optional sections.
    pub fn validate(&self) -> Result<()> {
        self.radar()?;
        self.grid()?;
        self.targets()?;
        self.strategy_list()?;
        self.spectral_settings()?;
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(CliError::config("noise_sigma must be finite and non-negative"));
        }
        if let Some(c) = &self.classic {
            QuantizerSpec::new(c.bits, c.full_scale).map_err(invalid("classic"))?;
        }
        if let Some(m) = &self.modulo {
            QuantizerSpec::new(m.bits, m.threshold).map_err(invalid("modulo"))?;
            self.recovery_spec(m.threshold)?;
        }
        Ok(())
    }

    pub fn radar(&self) -> Result<RadarConfig> {
        let r = &self.radar;
        match r.wave_speed {
            Some(c) => RadarConfig::with_wave_speed(r.carrier_frequency, c),
            None => RadarConfig::new(r.carrier_frequency),
        }
        .map_err(invalid("radar"))
    }

    pub fn grid(&self) -> Result<SamplingGrid> {
        SamplingGrid::with_start(self.grid.rate, self.grid.count, self.grid.start_time).map_err(invalid("grid"))
    }

    fn target(section: &TargetSection, label: &str) -> Result<Target> {
        let velocity = match (section.velocity, section.velocity_kmh) {
            (Some(v), None) => v,
            (None, Some(kmh)) => kmh_to_mps(kmh),
            _ => {
                return Err(CliError::config(format!(
                    "{label}: give exactly one of `velocity` (m/s) or `velocity_kmh`"
                )))
            }
        };
        let harmonics = section
            .harmonics
            .iter()
            .map(|h| Harmonic { order: h.order, relative_amplitude: h.relative_amplitude })
            .collect();
        Target::new(section.amplitude, velocity, section.phase)
            .and_then(|t| t.with_harmonics(harmonics))
            .map_err(invalid(label))
    }

    /// The configured targets, strong first. Either may be absent.
    pub fn targets(&self) -> Result<Vec<Target>> {
        let mut out = Vec::new();
        if let Some(s) = &self.strong {
            out.push(Self::target(s, "strong")?);
        }
        if let Some(w) = &self.weak {
            out.push(Self::target(w, "weak")?);
        }
        Ok(out)
    }

    pub fn strategy_list(&self) -> Result<Vec<Strategy>> {
        if self.strategies.is_empty() {
            return Err(CliError::config("strategies must not be empty"));
        }
        self.strategies
            .iter()
            .map(|s| s.parse::<Strategy>().map_err(invalid("strategies")))
            .collect()
    }

    pub fn window(&self) -> Result<Window> {
        self.spectral.window.parse::<Window>().map_err(invalid("spectral.window"))
    }

    pub fn spectral_settings(&self) -> Result<SpectralSettings> {
        let s = &self.spectral;
        if !(s.margin_db > 0.0) {
            return Err(CliError::config("spectral.margin_db must be positive"));
        }
        if !(s.min_separation_hz >= 0.0) {
            return Err(CliError::config("spectral.min_separation_hz must be non-negative"));
        }
        if s.dft_size == Some(0) {
            return Err(CliError::config("spectral.dft_size must be positive"));
        }
        Ok(SpectralSettings {
            window: self.window()?,
            dft_size: s.dft_size,
            margin_db: s.margin_db,
            guard_bins: s.guard_bins,
            min_separation_hz: s.min_separation_hz,
        })
    }

    /// Highest scene frequency (harmonics included), before aliasing.
    pub fn highest_line(&self) -> Result<Option<f64>> {
        let radar = self.radar()?;
        let top = self
            .targets()?
            .iter()
            .map(|t| {
                let fd = usf_radar_core::scene::doppler_frequency(t.velocity, &radar).abs();
                let h = t.harmonics.iter().map(|h| h.order).max().unwrap_or(1).max(1);
                fd * h as f64
            })
            .fold(None, |acc: Option<f64>, f| Some(acc.map_or(f, |a| a.max(f))));
        Ok(top)
    }

    /// Recovery parameters for folding threshold `threshold`.
    pub fn recovery_spec(&self, threshold: f64) -> Result<RecoverySpec> {
        let targets = self.targets()?;
        self.recovery.to_spec(threshold, &targets, self.highest_line()?)
    }

    /// The full near-far scenario; needs both targets and both converters.
    pub fn scenario(&self) -> Result<ScenarioSpec> {
        let need = |present: bool, key: &str| {
            if present {
                Ok(())
            } else {
                Err(CliError::config(format!("experiment needs a [{key}] section")))
            }
        };
        need(self.strong.is_some(), "strong")?;
        need(self.weak.is_some(), "weak")?;
        let classic = self.classic.as_ref().ok_or_else(|| CliError::config("experiment needs a [classic] section"))?;
        let modulo = self.modulo.as_ref().ok_or_else(|| CliError::config("experiment needs a [modulo] section"))?;
        let mut targets = self.targets()?.into_iter();
        let (strong, weak) = (targets.next().unwrap(), targets.next().unwrap());
        let spec = ScenarioSpec {
            name: self.name.clone(),
            radar: self.radar()?,
            grid: self.grid()?,
            strong,
            weak,
            classic_quantizer: QuantizerSpec::new(classic.bits, classic.full_scale).map_err(invalid("classic"))?,
            modulo_quantizer: QuantizerSpec::new(modulo.bits, modulo.threshold).map_err(invalid("modulo"))?,
            recovery: self.recovery_spec(modulo.threshold)?,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            spectral: self.spectral_settings()?,
        };
        spec.validate().map_err(invalid("scenario"))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [radar]
        carrier_frequency = 24e9
        [grid]
        rate = 8140.0
        count = 16
    "#;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.name, "scenario");
        assert_eq!(c.strategy_list().unwrap(), Strategy::ALL.to_vec());
        assert!(c.targets().unwrap().is_empty());
        assert_eq!(c.spectral_settings().unwrap(), SpectralSettings::default());
        assert!(c.scenario().is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert!(err.to_string().contains("bogus"), "{err}");
        let nested = MINIMAL.replace("count = 16", "count = 16\nratee = 3");
        assert!(matches!(RunConfig::parse(&nested), Err(CliError::Config(_))));
    }

    #[test]
    fn velocity_exactly_once() {
        let both = format!("{MINIMAL}\n[strong]\namplitude = 1.0\nvelocity = 1.0\nvelocity_kmh = 3.6\n");
        assert!(matches!(RunConfig::parse(&both), Err(CliError::Config(_))));
        let kmh = format!("{MINIMAL}\n[strong]\namplitude = 1.0\nvelocity_kmh = 36.0\n");
        let t = &RunConfig::parse(&kmh).unwrap().targets().unwrap()[0];
        assert!((t.velocity - 10.0).abs() < 1e-12);
    }

    #[test]
    fn order_setting_forms() {
        let auto = format!(
            "{MINIMAL}\n[strong]\namplitude = 6.0\nvelocity = 1.0\n[modulo]\nbits = 8\nthreshold = 2.01\n[recovery]\norder = \"auto\"\n"
        );
        let c = RunConfig::parse(&auto).unwrap();
        let spec = c.recovery_spec(2.01).unwrap();
        assert!(spec.amplitude_bound.is_some());
        assert!(matches!(spec.order, usf_radar_core::recovery::DifferenceOrder::Auto { .. }));
        let bad = auto.replace("\"auto\"", "\"fast\"");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
        assert_eq!("3".parse::<OrderSetting>().unwrap(), OrderSetting::Fixed(3));
        assert!("x".parse::<OrderSetting>().is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for (from, to) in [("rate = 8140.0", "rate = -1.0"), ("carrier_frequency = 24e9", "carrier_frequency = 0.0")] {
            let text = MINIMAL.replace(from, to);
            assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))), "{to}");
        }
        let strategies = format!("strategies = [\"dither\"]\n{MINIMAL}");
        assert!(matches!(RunConfig::parse(&strategies), Err(CliError::Config(_))));
    }

    #[test]
    fn serialises_back_to_same_config() {
        let text = format!(
            "{MINIMAL}\n[weak]\namplitude = 0.5\nvelocity_kmh = 37.0\nharmonics = [{{ order = 2, relative_amplitude = 0.1 }}]\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }
}
