//! Radar targets and the ideal demodulated Doppler voltage they produce.
//!
//! A mono-frequency Doppler radar sees each reflector as a cosine at its
//! Doppler shift `2 v f0 / c`. Signals here are the analog voltage before any
//! converter touches it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Exact SI speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn kmh_to_mps<T: Real>(kmh: T) -> T {
    kmh / T::lit(3.6)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarConfig<T> {
    /// Operating frequency `f0` in Hz.
    pub carrier_frequency: T,
    /// Propagation speed in m/s.
    pub wave_speed: T,
}

impl<T: Real> RadarConfig<T> {
    pub fn new(carrier_frequency: T) -> Result<Self> {
        Self::with_wave_speed(carrier_frequency, T::lit(SPEED_OF_LIGHT))
    }

    pub fn with_wave_speed(carrier_frequency: T, wave_speed: T) -> Result<Self> {
        let cfg = Self { carrier_frequency, wave_speed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency > T::zero() && self.carrier_frequency.is_finite()) {
            return Err(Error::domain("carrier frequency must be positive and finite"));
        }
        if !(self.wave_speed > T::zero() && self.wave_speed.is_finite()) {
            return Err(Error::domain("wave speed must be positive and finite"));
        }
        Ok(())
    }

    /// Radial velocity that produces the given Doppler shift.
    pub fn velocity_for(&self, doppler: T) -> T {
        doppler * self.wave_speed / (T::lit(2.0) * self.carrier_frequency)
    }
}

/// Harmonic distortion component of a target, relative to its fundamental.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic<T> {
    pub order: u32,
    pub relative_amplitude: T,
}

/// One simulated reflector.
#[derive(Debug, Clone, PartialEq)]
pub struct Target<T> {
    /// Peak voltage of the fundamental, `>= 0`.
    pub amplitude: T,
    /// Signed radial velocity in m/s.
    pub velocity: T,
    /// Phase offset in radians.
    pub phase: T,
    pub harmonics: Vec<Harmonic<T>>,
}

impl<T: Real> Target<T> {
    pub fn new(amplitude: T, velocity: T, phase: T) -> Result<Self> {
        let t = Self { amplitude, velocity, phase, harmonics: Vec::new() };
        t.validate()?;
        Ok(t)
    }

    pub fn with_harmonics(mut self, harmonics: Vec<Harmonic<T>>) -> Result<Self> {
        self.harmonics = harmonics;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= T::zero() && self.amplitude.is_finite()) {
            return Err(Error::domain("target amplitude must be finite and non-negative"));
        }
        if !self.velocity.is_finite() || !self.phase.is_finite() {
            return Err(Error::domain("target velocity and phase must be finite"));
        }
        for (i, h) in self.harmonics.iter().enumerate() {
            if h.order < 2 {
                return Err(Error::domain(format!("harmonic order {} must be >= 2", h.order)));
            }
            if !(h.relative_amplitude >= T::zero() && h.relative_amplitude <= T::one()) {
                return Err(Error::domain("harmonic relative amplitude must lie in [0, 1]"));
            }
            if self.harmonics[..i].iter().any(|o| o.order == h.order) {
                return Err(Error::domain(format!("duplicate harmonic order {}", h.order)));
            }
        }
        Ok(())
    }

    /// Upper bound on the target's contribution to `|r(t)|`.
    pub fn peak_bound(&self) -> T {
        let rel = self
            .harmonics
            .iter()
            .fold(T::zero(), |acc, h| acc + h.relative_amplitude);
        self.amplitude * (T::one() + rel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid<T> {
    /// Sampling rate `1/T` in Hz.
    pub rate: T,
    pub count: usize,
    pub start_time: T,
}

impl<T: Real> SamplingGrid<T> {
    pub fn new(rate: T, count: usize) -> Result<Self> {
        Self::with_start(rate, count, T::zero())
    }

    pub fn with_start(rate: T, count: usize, start_time: T) -> Result<Self> {
        let g = Self { rate, count, start_time };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > T::zero() && self.rate.is_finite()) {
            return Err(Error::domain("sampling rate must be positive and finite"));
        }
        if self.count == 0 {
            return Err(Error::domain("sampling grid needs at least one sample"));
        }
        if !self.start_time.is_finite() {
            return Err(Error::domain("start time must be finite"));
        }
        Ok(())
    }

    pub fn period(&self) -> T {
        self.rate.recip()
    }

    /// Time of sample `n`.
    pub fn time(&self, n: usize) -> T {
        self.start_time + T::from_len(n) / self.rate
    }

    pub fn duration(&self) -> T {
        T::from_len(self.count) / self.rate
    }
}

/// Uniformly sampled real voltage sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal<T> {
    grid: SamplingGrid<T>,
    values: Vec<T>,
}

impl<T: Real> SampledSignal<T> {
    pub fn new(grid: SamplingGrid<T>, values: Vec<T>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.count {
            return Err(Error::size(format!(
                "signal has {} values but grid declares {}",
                values.len(),
                grid.count
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite sample at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SamplingGrid<T>) -> Result<Self> {
        Self::new(grid, vec![T::zero(); grid.count])
    }

    pub fn grid(&self) -> &SamplingGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn peak(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Same grid, new values. Values must keep the length and stay finite.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(self.grid, values)
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Doppler shift `2 v f0 / c` of a target moving at radial `velocity`.
pub fn doppler_frequency<T: Real>(velocity: T, radar: &RadarConfig<T>) -> T {
    T::lit(2.0) * velocity * radar.carrier_frequency / radar.wave_speed
}

/// Echo amplitude under `P ~ rcs / range^4`, i.e. `ref * sqrt(rcs) / range^2`.
pub fn amplitude_from_radar_equation<T: Real>(rcs: T, range: T, reference_amplitude: T) -> Result<T> {
    if !(range > T::zero()) {
        return Err(Error::domain("range must be positive"));
    }
    if !(rcs >= T::zero()) {
        return Err(Error::domain("radar cross section must be non-negative"));
    }
    Ok(reference_amplitude * rcs.sqrt() / (range * range))
}

/// Samples the noiseless sum of target cosines (and their harmonics) on `grid`.
pub fn synthesize<T: Real>(
    targets: &[Target<T>],
    radar: &RadarConfig<T>,
    grid: &SamplingGrid<T>,
) -> Result<SampledSignal<T>> {
    radar.validate()?;
    grid.validate()?;
    for t in targets {
        t.validate()?;
    }
    let two_pi = T::TAU();
    let mut values = vec![T::zero(); grid.count];
    for target in targets {
        let fd = doppler_frequency(target.velocity, radar);
        for (n, v) in values.iter_mut().enumerate() {
            let t = grid.time(n);
            *v = *v + target.amplitude * (two_pi * fd * t + target.phase).cos();
            for h in &target.harmonics {
                let hf = T::from_len(h.order as usize) * fd;
                *v = *v
                    + target.amplitude * h.relative_amplitude * (two_pi * hf * t + target.phase).cos();
            }
        }
    }
    SampledSignal::new(*grid, values)
}

/// Adds seeded white Gaussian noise of standard deviation `sigma`.
pub fn add_awgn<T: Real>(signal: &SampledSignal<T>, sigma: T, seed: u64) -> Result<SampledSignal<T>> {
    if !(sigma >= T::zero() && sigma.is_finite()) {
        return Err(Error::domain("noise sigma must be finite and non-negative"));
    }
    if sigma == T::zero() {
        return Ok(signal.clone());
    }
    let normal = Normal::new(0.0, sigma.as_f64()).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    signal.map(|v| v + T::lit(normal.sample(&mut rng)))
}
