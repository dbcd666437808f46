//! Converter models: the saturating mid-rise quantizer and the modulo fold
//! placed in front of it.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scene::SampledSignal;

/// A `bits`-bit mid-rise quantizer spanning `[-full_scale, full_scale]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec<T> {
    pub bits: u32,
    pub full_scale: T,
}

impl<T: Real> QuantizerSpec<T> {
    pub const MAX_BITS: u32 = 48;

    pub fn new(bits: u32, full_scale: T) -> Result<Self> {
        let q = Self { bits, full_scale };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > Self::MAX_BITS {
            return Err(Error::domain(format!(
                "bit depth {} outside 1..={}",
                self.bits,
                Self::MAX_BITS
            )));
        }
        if !(self.full_scale > T::zero() && self.full_scale.is_finite()) {
            return Err(Error::domain("full scale must be positive and finite"));
        }
        Ok(())
    }

    pub fn step(&self) -> T {
        step_size(self)
    }
}

/// Modulo nonlinearity folding into `[-threshold, threshold)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldingSpec<T> {
    pub threshold: T,
}

impl<T: Real> FoldingSpec<T> {
    pub fn new(threshold: T) -> Result<Self> {
        if !(threshold > T::zero() && threshold.is_finite()) {
            return Err(Error::domain("folding threshold must be positive and finite"));
        }
        Ok(Self { threshold })
    }

    pub fn period(&self) -> T {
        T::lit(2.0) * self.threshold
    }
}

/// Level spacing `2β / (2^b - 1)`: `2^b` levels whose outermost sit at `±β`.
pub fn step_size<T: Real>(q: &QuantizerSpec<T>) -> T {
    let levels = T::lit(2f64.powi(q.bits as i32));
    T::lit(2.0) * q.full_scale / (levels - T::one())
}

/// Clamps to `[-β, β]`, then applies `(⌊a/δ⌋ + ½)δ`.
pub fn quantize<T: Real>(value: T, q: &QuantizerSpec<T>) -> T {
    let beta = q.full_scale;
    let delta = step_size(q);
    let a = value.max(-beta).min(beta);
    let half = T::lit(0.5);
    let k = (a / delta).floor();
    // a/δ can round across a cell edge; take whichever neighbour is nearer,
    // the upper one on a tie as the floor rule does
    let level = [k - T::one(), k, k + T::one()]
        .into_iter()
        .map(|j| (j + half) * delta)
        .fold(None, |best: Option<T>, l| match best {
            Some(b) if (b - a).abs() < (l - a).abs() => Some(b),
            _ => Some(l),
        })
        .unwrap_or(a);
    level.max(-beta).min(beta)
}

/// Centered modulo `((x + λ) mod 2λ) - λ`, always in `[-λ, λ)`.
pub fn modulo_fold<T: Real>(value: T, f: &FoldingSpec<T>) -> T {
    fold_value(value, f.threshold)
}

pub(crate) fn fold_value<T: Real>(value: T, lambda: T) -> T {
    let period = T::lit(2.0) * lambda;
    let shifted = value + lambda;
    let mut out = shifted - (shifted / period).floor() * period - lambda;
    // floor and subtraction can round onto the open end
    if out >= lambda {
        out = out - period;
    }
    if out < -lambda {
        out = out + period;
    }
    out
}

/// Conventional acquisition: samplewise clamp-and-quantize.
pub fn acquire_classic<T: Real>(signal: &SampledSignal<T>, q: &QuantizerSpec<T>) -> Result<SampledSignal<T>> {
    q.validate()?;
    signal.map(|v| quantize(v, q))
}

/// Modulo acquisition `y[n] = Q(M(r[n]))` with the quantizer range matched to the fold.
pub fn acquire_modulo<T: Real>(
    signal: &SampledSignal<T>,
    f: &FoldingSpec<T>,
    q: &QuantizerSpec<T>,
) -> Result<SampledSignal<T>> {
    q.validate()?;
    let tol = T::lit(1e-12) * f.threshold;
    if (q.full_scale - f.threshold).abs() > tol {
        return Err(Error::config(format!(
            "modulo quantizer full scale {} does not match folding threshold {}",
            q.full_scale, f.threshold
        )));
    }
    signal.map(|v| quantize(modulo_fold(v, f), q))
}

/// Fraction of samples whose magnitude exceeds the quantizer range.
pub fn saturation_ratio<T: Real>(signal: &SampledSignal<T>, q: &QuantizerSpec<T>) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    let over = signal.values().iter().filter(|v| v.abs() > q.full_scale).count();
    over as f64 / signal.len() as f64
}
