//! Unfolding of modulo samples.
//!
//! Folding adds a sequence that lives on the lattice `2λZ`. Every recovery
//! here estimates that lattice sequence, in units of `2λ` as exact integers,
//! and subtracts it from the measurements. All recoveries are defined up to a
//! constant in `2λZ`; the returned signal is shifted by the lattice constant
//! that centres it around zero.

mod linalg;
mod sparse;

use num_complex::Complex;

use crate::adc::fold_value;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scene::SampledSignal;

pub use sparse::usf_unfold_sparse;

/// Highest difference order either unfolding method will attempt.
pub const MAX_ORDER: usize = 12;

/// How many differences the difference-domain method takes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DifferenceOrder<T> {
    Fixed(usize),
    /// Smallest order that provably shrinks the signal below `λ`, given its
    /// highest frequency in Hz. Requires an amplitude bound.
    Auto { max_frequency: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySpec<T> {
    /// Folding threshold `λ` used at acquisition.
    pub threshold: T,
    pub order: DifferenceOrder<T>,
    /// A-priori bound on `max |r|`, a multiple of `2λ`.
    pub amplitude_bound: Option<T>,
    /// Number of real tones (harmonics included) for the sparse method.
    pub sparsity: Option<usize>,
}

impl<T: Real> RecoverySpec<T> {
    pub fn new(threshold: T) -> Result<Self> {
        if !(threshold > T::zero() && threshold.is_finite()) {
            return Err(Error::domain("folding threshold must be positive and finite"));
        }
        Ok(Self {
            threshold,
            order: DifferenceOrder::Fixed(1),
            amplitude_bound: None,
            sparsity: None,
        })
    }

    pub fn with_order(mut self, order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::domain(format!("difference order {order} outside 1..={MAX_ORDER}")));
        }
        self.order = DifferenceOrder::Fixed(order);
        Ok(self)
    }

    pub fn with_auto_order(mut self, max_frequency: T) -> Result<Self> {
        if !(max_frequency > T::zero() && max_frequency.is_finite()) {
            return Err(Error::domain("maximum frequency must be positive"));
        }
        self.order = DifferenceOrder::Auto { max_frequency };
        Ok(self)
    }

    /// Sets `β_g`, rounded up to the next multiple of `2λ`.
    pub fn with_amplitude_bound(mut self, bound: T) -> Result<Self> {
        if !(bound >= self.threshold && bound.is_finite()) {
            return Err(Error::domain("amplitude bound must be finite and at least λ"));
        }
        let period = self.period();
        self.amplitude_bound = Some((bound / period).ceil() * period);
        Ok(self)
    }

    pub fn with_sparsity(mut self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("sparsity must be at least 1"));
        }
        self.sparsity = Some(k);
        Ok(self)
    }

    pub fn period(&self) -> T {
        T::lit(2.0) * self.threshold
    }

    /// Difference order to use for samples taken at `rate` Hz.
    pub fn resolve_order(&self, rate: T) -> Result<usize> {
        match self.order {
            DifferenceOrder::Fixed(n) => Ok(n),
            DifferenceOrder::Auto { max_frequency } => {
                let bound = self.amplitude_bound.ok_or_else(|| {
                    Error::config("automatic difference order needs an amplitude bound")
                })?;
                auto_order(self.threshold, bound, max_frequency, rate)
            }
        }
    }
}

/// `N = max(1, ⌈ln(λ/β_g) / ln(T Ω e)⌉)` with `Ω = 2π f_max`.
pub fn auto_order<T: Real>(threshold: T, bound: T, max_frequency: T, rate: T) -> Result<usize> {
    let contraction = T::TAU() * max_frequency / rate * T::E();
    if !(contraction < T::one()) {
        return Err(Error::recovery(format!(
            "insufficient oversampling: {} Hz is below {} Hz needed for automatic order",
            rate,
            required_sampling_rate(max_frequency)
        )));
    }
    // exact powers of the contraction must not round up an extra order
    let n = ((threshold / bound).ln() / contraction.ln() - T::lit(1e-9)).ceil();
    let n = n.to_usize().unwrap_or(0).max(1);
    if n > MAX_ORDER {
        return Err(Error::recovery(format!("automatic order {n} exceeds {MAX_ORDER}")));
    }
    Ok(n)
}

/// Sampling rate `2πe · 2 f_max` sufficient for difference-domain recovery.
pub fn required_sampling_rate<T: Real>(max_frequency: T) -> T {
    T::TAU() * T::E() * T::lit(2.0) * max_frequency
}

/// `N`-th forward difference, `Δa[k] = a[k+1] - a[k]` iterated.
pub fn finite_difference<T: Real>(x: &[T], order: usize) -> Result<Vec<T>> {
    if x.len() <= order {
        return Err(Error::size(format!(
            "difference of order {order} needs more than {order} samples, got {}",
            x.len()
        )));
    }
    let mut out = x.to_vec();
    for _ in 0..order {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Inverse of `Δ`: running sum starting from `initial`.
pub fn antidifference<T: Real>(d: &[T], initial: T) -> Vec<T> {
    let mut out = Vec::with_capacity(d.len() + 1);
    let mut acc = initial;
    out.push(acc);
    for &v in d {
        acc = acc + v;
        out.push(acc);
    }
    out
}

/// Keeps the `k` largest-magnitude entries and zeroes the rest. Ties go to
/// the lower index.
pub fn hard_threshold<T: Real>(coefficients: &[Complex<T>], k: usize) -> Result<Vec<Complex<T>>> {
    if k == 0 || k > coefficients.len() {
        return Err(Error::size(format!(
            "cannot keep {k} of {} coefficients",
            coefficients.len()
        )));
    }
    let mut order: Vec<usize> = (0..coefficients.len()).collect();
    order.sort_by(|&i, &j| {
        coefficients[j]
            .norm()
            .partial_cmp(&coefficients[i].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut out = vec![Complex::new(T::zero(), T::zero()); coefficients.len()];
    for &i in &order[..k] {
        out[i] = coefficients[i];
    }
    Ok(out)
}

/// Nearest integer multiple of `period`; halves round toward `+∞`.
pub fn snap_to_grid<T: Real>(x: T, period: T) -> T {
    lattice_index(x, period) * period
}

fn lattice_index<T: Real>(x: T, period: T) -> T {
    (x / period + T::lit(0.5)).floor()
}

fn to_count<T: Real>(x: T) -> Result<i64> {
    x.to_i64()
        .ok_or_else(|| Error::recovery("lattice index overflow; wrong λ or diverging unfolding"))
}

pub(crate) fn integer_antidifference(d: &[i64], initial: i64) -> Vec<i64> {
    let mut out = Vec::with_capacity(d.len() + 1);
    let mut acc = initial;
    out.push(acc);
    for &v in d {
        acc += v;
        out.push(acc);
    }
    out
}

/// Result of an unfolding run with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Unfolded<T> {
    pub signal: SampledSignal<T>,
    /// Difference order the lattice sequence was identified at.
    pub order: usize,
    /// Largest distance of the identified lattice residual from `2λZ`.
    pub grid_residual: T,
}

pub(crate) fn check_folded_range<T: Real>(y: &SampledSignal<T>, threshold: T) -> Result<()> {
    let limit = threshold * (T::one() + T::lit(1e-9));
    if let Some(i) = y.values().iter().position(|v| v.abs() > limit) {
        return Err(Error::recovery(format!(
            "insufficient oversampling or wrong λ: sample {i} = {} lies outside ±{threshold}",
            y.values()[i]
        )));
    }
    Ok(())
}

/// Adds `2λ·counts` to `y`, choosing the lattice constant that centres the
/// result, and checks it against the amplitude bound.
pub(crate) fn assemble<T: Real>(
    y: &SampledSignal<T>,
    counts: &[i64],
    period: T,
    bound: Option<T>,
) -> Result<SampledSignal<T>> {
    let raw: Vec<T> = y
        .values()
        .iter()
        .zip(counts)
        .map(|(&v, &c)| v + T::from_int(c) * period)
        .collect();
    let (lo, hi) = raw
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mid = (lo + hi) / T::lit(2.0);
    let centre = lattice_index(mid, period);
    let half_range = (hi - lo) / T::lit(2.0);
    if let Some(b) = bound {
        if half_range > b + period / T::lit(2.0) {
            return Err(Error::recovery(format!(
                "insufficient oversampling or wrong λ: unfolded half-range {half_range} exceeds bound {b}"
            )));
        }
    }
    y.with_values(raw.into_iter().map(|v| v - centre * period).collect())
}

/// Integer slope offset `c` minimising the spread of `w[k] + c k`.
fn drift_correction(w: &[i64]) -> i64 {
    let n = w.len();
    if n < 2 {
        return 0;
    }
    let nf = n as f64;
    let k_mean = (nf - 1.0) / 2.0;
    let w_mean = w.iter().map(|&v| v as f64).sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &v) in w.iter().enumerate() {
        let dk = k as f64 - k_mean;
        sxy += dk * (v as f64 - w_mean);
        sxx += dk * dk;
    }
    let guess = -(sxy / sxx).round() as i64;
    let spread = |c: i64| {
        let (lo, hi) = w
            .iter()
            .enumerate()
            .map(|(k, &v)| v + c * k as i64)
            .fold((i64::MAX, i64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    };
    (guess - 1..=guess + 1)
        .min_by_key(|&c| (spread(c), c.abs()))
        .unwrap_or(guess)
}

/// Difference-domain unfolding.
///
/// With `‖Δ^N r‖∞ < λ`, folding `Δ^N y` returns `Δ^N r` and the difference
/// between the two is `Δ^N` of the lattice sequence. That sequence is then
/// integrated back `N` times; each integration constant is fixed by requiring
/// the following integration to stay bounded (no linear drift).
pub fn usf_unfold<T: Real>(y: &SampledSignal<T>, spec: &RecoverySpec<T>) -> Result<Unfolded<T>> {
    let lambda = spec.threshold;
    let period = spec.period();
    check_folded_range(y, lambda)?;
    let order = spec.resolve_order(y.grid().rate)?;
    let d = finite_difference(y.values(), order)?;

    let mut grid_residual = T::zero();
    let mut current = Vec::with_capacity(d.len());
    for &v in &d {
        let lattice = (fold_value(v, lambda) - v) / period;
        let idx = lattice.round();
        grid_residual = grid_residual.max((lattice - idx).abs() * period);
        current.push(to_count(idx)?);
    }

    for stage in (0..order).rev() {
        let mut next = integer_antidifference(&current, 0);
        if stage > 0 {
            let c = drift_correction(&integer_antidifference(&next, 0));
            for v in next.iter_mut() {
                *v += c;
            }
        }
        current = next;
    }

    let signal = assemble(y, &current, period, spec.amplitude_bound)?;
    Ok(Unfolded { signal, order, grid_residual })
}

/// Sequential unwrapping: each consecutive difference is folded into
/// `(-λ, λ]` and accumulated. Exact only under Itoh's condition.
pub fn unwrap_baseline<T: Real>(y: &SampledSignal<T>, threshold: T) -> Result<SampledSignal<T>> {
    if !(threshold > T::zero() && threshold.is_finite()) {
        return Err(Error::domain("unwrap threshold must be positive"));
    }
    let period = T::lit(2.0) * threshold;
    let v = y.values();
    let mut out = Vec::with_capacity(v.len());
    let mut acc = v[0];
    out.push(acc);
    for w in v.windows(2) {
        let d = w[1] - w[0];
        acc = acc + d - period * ((d - threshold) / period).ceil();
        out.push(acc);
    }
    y.with_values(out)
}
