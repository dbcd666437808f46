//! Unfolding under a sum-of-tones prior.
//!
//! The difference-domain method needs `‖Δ^N r‖∞ < λ` and pays a `2^N` noise
//! amplification for it. When `r` is a mixture of at most `K` real tones the
//! lattice sequence can instead be found at first order, where Itoh's
//! condition fails, by subtracting a fitted tone model from `Δy`:
//!
//! 1. find the lowest order `n0` whose folded differences are explained by a
//!    `K`-tone model (support from the `K` largest spectral peaks, then a
//!    least-squares fit of amplitudes and frequencies);
//! 2. carry the tones down to first order, where `Δ` acts on each tone as
//!    multiplication by `e^{jω} - 1`;
//! 3. alternate between snapping `model - Δy` to `2λZ` and refitting the
//!    model to the corrected differences;
//! 4. integrate the snapped spike train once.

use num_complex::Complex;
use rustfft::FftPlanner;

use super::{
    assemble, check_folded_range, finite_difference, hard_threshold, integer_antidifference,
    lattice_index, to_count, RecoverySpec, Unfolded,
};
use crate::adc::fold_value;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scene::SampledSignal;

/// Highest difference order searched for the initial tone fit.
const MAX_SEARCH_ORDER: usize = 8;
const MAX_ALTERNATIONS: usize = 16;
const MAX_LM_ITERATIONS: usize = 60;
/// Zero-padding factor for peak picking.
const PAD_FACTOR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tone<T> {
    /// Radians per sample.
    omega: T,
    a: T,
    b: T,
}

/// `Σ a cos(ω(n - c)) + b sin(ω(n - c))`, with `c` the centre of the
/// original record so that every difference order shares one time origin.
#[derive(Debug, Clone)]
struct ToneModel<T> {
    tones: Vec<Tone<T>>,
    centre: T,
}

impl<T: Real> ToneModel<T> {
    fn eval(&self, len: usize) -> Vec<T> {
        (0..len)
            .map(|n| {
                let t = T::from_len(n) - self.centre;
                self.tones.iter().fold(T::zero(), |acc, tone| {
                    let (s, c) = (tone.omega * t).sin_cos();
                    acc + tone.a * c + tone.b * s
                })
            })
            .collect()
    }

    fn params(&self) -> Vec<T> {
        self.tones.iter().flat_map(|t| [t.a, t.b, t.omega]).collect()
    }

    fn with_params(&self, p: &[T]) -> Self {
        let tones = p
            .chunks(3)
            .map(|c| Tone { a: c[0], b: c[1], omega: c[2].max(T::zero()).min(T::PI()) })
            .collect();
        Self { tones, centre: self.centre }
    }

    fn cost(&self, g: &[T]) -> T {
        self.eval(g.len())
            .iter()
            .zip(g)
            .fold(T::zero(), |acc, (m, v)| acc + (*v - *m) * (*v - *m))
    }

    /// Same tones one difference order lower: divide each complex amplitude
    /// by `(e^{jω} - 1)^steps`.
    fn integrated(&self, steps: usize) -> Self {
        let tones = self
            .tones
            .iter()
            .map(|t| {
                let z = Complex::new(t.omega.cos() - T::one(), t.omega.sin());
                let mut c = Complex::new(t.a, -t.b);
                for _ in 0..steps {
                    c = if z.norm() > T::epsilon() { c / z } else { Complex::new(T::zero(), T::zero()) };
                }
                Tone { omega: t.omega, a: c.re, b: -c.im }
            })
            .collect();
        Self { tones, centre: self.centre }
    }
}

/// Frequencies of the `k` strongest spectral peaks of `g`, refined by
/// Gaussian interpolation on the zero-padded Hann spectrum.
fn detect_frequencies<T: Real>(g: &[T], k: usize) -> Vec<T> {
    let n = g.len();
    let size = n.next_power_of_two() * PAD_FACTOR;
    let mut buf: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); size];
    let nf = T::from_len(n);
    for (i, &v) in g.iter().enumerate() {
        let w = T::lit(0.5) - T::lit(0.5) * (T::TAU() * T::from_len(i) / nf).cos();
        buf[i] = Complex::new(v * w, T::zero());
    }
    FftPlanner::new().plan_fft_forward(size).process(&mut buf);
    let half = size / 2;
    let mag: Vec<T> = buf[..=half].iter().map(|c| c.norm()).collect();

    let mut candidates = vec![Complex::new(T::zero(), T::zero()); half];
    for j in 1..half {
        if mag[j] > mag[j - 1] && mag[j] >= mag[j + 1] {
            candidates[j] = buf[j];
        }
    }
    let kept = match hard_threshold(&candidates, k.min(half)) {
        Ok(v) => v,
        Err(_) => return Vec::new(),
    };
    kept.iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > T::zero())
        .map(|(j, _)| {
            let (l, m, r) = (mag[j - 1].ln(), mag[j].ln(), mag[j + 1].ln());
            let denom = l - T::lit(2.0) * m + r;
            let offset = if denom.abs() > T::epsilon() {
                (T::lit(0.5) * (l - r) / denom).max(T::lit(-0.5)).min(T::lit(0.5))
            } else {
                T::zero()
            };
            T::TAU() * (T::from_len(j) + offset) / T::from_len(size)
        })
        .collect()
}

/// Linear least-squares amplitudes for fixed frequencies.
fn fit_amplitudes<T: Real>(g: &[T], omegas: &[T], centre: T) -> ToneModel<T> {
    let m = 2 * omegas.len();
    let mut ata = vec![T::zero(); m * m];
    let mut atb = vec![T::zero(); m];
    let mut row = vec![T::zero(); m];
    for (n, &v) in g.iter().enumerate() {
        let t = T::from_len(n) - centre;
        for (i, &w) in omegas.iter().enumerate() {
            let (s, c) = (w * t).sin_cos();
            row[2 * i] = c;
            row[2 * i + 1] = s;
        }
        accumulate(&mut ata, &mut atb, &row, v);
    }
    symmetrise(&mut ata, m);
    regularise(&mut ata, m, T::lit(1e-12));
    let x = super::linalg::solve(ata, atb).unwrap_or_else(|| vec![T::zero(); m]);
    let tones = omegas
        .iter()
        .enumerate()
        .map(|(i, &omega)| Tone { omega, a: x[2 * i], b: x[2 * i + 1] })
        .collect();
    ToneModel { tones, centre }
}

fn accumulate<T: Real>(ata: &mut [T], atb: &mut [T], row: &[T], rhs: T) {
    let m = row.len();
    for i in 0..m {
        atb[i] = atb[i] + row[i] * rhs;
        for j in i..m {
            ata[i * m + j] = ata[i * m + j] + row[i] * row[j];
        }
    }
}

/// Mirrors the upper triangle filled by `accumulate`.
fn symmetrise<T: Real>(ata: &mut [T], m: usize) {
    for i in 0..m {
        for j in 0..i {
            ata[i * m + j] = ata[j * m + i];
        }
    }
}

fn regularise<T: Real>(ata: &mut [T], m: usize, relative: T) {
    let max_diag = (0..m).fold(T::zero(), |acc, i| acc.max(ata[i * m + i]));
    let floor = relative * max_diag.max(T::min_positive_value());
    for i in 0..m {
        ata[i * m + i] = ata[i * m + i] + floor;
    }
}

/// Levenberg-Marquardt on all amplitudes and frequencies.
fn refine<T: Real>(g: &[T], model: ToneModel<T>) -> ToneModel<T> {
    if model.tones.is_empty() {
        return model;
    }
    let m = 3 * model.tones.len();
    let mut current = model;
    let mut cost = current.cost(g);
    let mut mu = T::lit(1e-3);
    let mut row = vec![T::zero(); m];
    for _ in 0..MAX_LM_ITERATIONS {
        let mut jtj = vec![T::zero(); m * m];
        let mut jtr = vec![T::zero(); m];
        for (n, &v) in g.iter().enumerate() {
            let t = T::from_len(n) - current.centre;
            let mut fitted = T::zero();
            for (i, tone) in current.tones.iter().enumerate() {
                let (s, c) = (tone.omega * t).sin_cos();
                fitted = fitted + tone.a * c + tone.b * s;
                row[3 * i] = c;
                row[3 * i + 1] = s;
                row[3 * i + 2] = t * (tone.b * c - tone.a * s);
            }
            accumulate(&mut jtj, &mut jtr, &row, v - fitted);
        }
        symmetrise(&mut jtj, m);
        let params = current.params();
        let mut improved = false;
        while mu < T::lit(1e12) {
            let mut damped = jtj.clone();
            let max_diag = (0..m).fold(T::zero(), |acc, i| acc.max(jtj[i * m + i]));
            for i in 0..m {
                let d = jtj[i * m + i].max(T::lit(1e-12) * max_diag);
                damped[i * m + i] = jtj[i * m + i] + mu * d;
            }
            let Some(step) = super::linalg::solve(damped, jtr.clone()) else {
                mu = mu * T::lit(10.0);
                continue;
            };
            let trial_params: Vec<T> = params.iter().zip(&step).map(|(p, s)| *p + *s).collect();
            let trial = current.with_params(&trial_params);
            let trial_cost = trial.cost(g);
            if trial_cost < cost {
                let gain = (cost - trial_cost) / cost.max(T::min_positive_value());
                current = trial;
                cost = trial_cost;
                mu = (mu / T::lit(10.0)).max(T::lit(1e-12));
                improved = gain > T::lit(1e-12);
                break;
            }
            mu = mu * T::lit(10.0);
        }
        if !improved {
            break;
        }
    }
    current
}

struct OrderFit<T> {
    model: ToneModel<T>,
    counts: Vec<i64>,
    residual: T,
}

/// Alternates lattice snapping of `model - d` with refitting on `d + 2λ·counts`.
fn fit_order<T: Real>(d: &[T], threshold: T, model: ToneModel<T>) -> Result<OrderFit<T>> {
    let period = T::lit(2.0) * threshold;
    let mut model = model;
    let mut previous: Option<Vec<i64>> = None;
    let snap = |model: &ToneModel<T>| -> Result<(Vec<i64>, T)> {
        let fitted = model.eval(d.len());
        let mut residual = T::zero();
        let mut counts = Vec::with_capacity(d.len());
        for (m, v) in fitted.iter().zip(d) {
            let idx = lattice_index(*m - *v, period);
            residual = residual.max((*m - *v - idx * period).abs());
            counts.push(to_count(idx)?);
        }
        Ok((counts, residual))
    };
    for _ in 0..MAX_ALTERNATIONS {
        let (counts, _) = snap(&model)?;
        if previous.as_ref() == Some(&counts) {
            break;
        }
        let corrected: Vec<T> = d
            .iter()
            .zip(&counts)
            .map(|(v, c)| *v + T::from_int(*c) * period)
            .collect();
        model = refine(&corrected, model);
        previous = Some(counts);
    }
    let (counts, residual) = snap(&model)?;
    Ok(OrderFit { model, counts, residual })
}

fn initial_fit<T: Real>(d: &[T], threshold: T, k: usize, centre: T) -> Result<OrderFit<T>> {
    let folded: Vec<T> = d.iter().map(|&v| fold_value(v, threshold)).collect();
    let omegas = detect_frequencies(&folded, k);
    let model = refine(&folded, fit_amplitudes(&folded, &omegas, centre));
    fit_order(d, threshold, model)
}

/// Unfolds `y` assuming the underlying signal is a mixture of at most
/// `spec.sparsity` real tones.
pub fn usf_unfold_sparse<T: Real>(y: &SampledSignal<T>, spec: &RecoverySpec<T>) -> Result<Unfolded<T>> {
    let k = spec
        .sparsity
        .ok_or_else(|| Error::config("sparse unfolding needs the sparsity K"))?;
    let lambda = spec.threshold;
    let period = spec.period();
    check_folded_range(y, lambda)?;
    let len = y.len();
    if len < 4 * k + 4 {
        return Err(Error::size(format!(
            "{len} samples are too few to fit {k} tones"
        )));
    }
    let centre = T::from_len(len - 1) / T::lit(2.0);
    let tolerance = lambda / T::lit(4.0);

    let mut found = None;
    let max_order = MAX_SEARCH_ORDER.min(len - 4 * k - 2);
    for order in 1..=max_order {
        let d = finite_difference(y.values(), order)?;
        let fit = initial_fit(&d, lambda, k, centre)?;
        if fit.residual <= tolerance {
            found = Some((order, fit));
            break;
        }
    }
    let (order, fit) = found.ok_or_else(|| {
        Error::recovery(format!(
            "sparsity K too small or λ mismatch: no difference order up to {max_order} is explained by {k} tones"
        ))
    })?;

    let fit = if order == 1 {
        fit
    } else {
        let d1 = finite_difference(y.values(), 1)?;
        fit_order(&d1, lambda, fit.model.integrated(order - 1))?
    };
    if fit.residual > tolerance {
        return Err(Error::recovery(format!(
            "sparsity K too small or λ mismatch: first-order residual {} exceeds λ/4",
            fit.residual
        )));
    }
    let lattice = integer_antidifference(&fit.counts, 0);
    let signal = assemble(y, &lattice, period, spec.amplitude_bound)?;
    Ok(Unfolded { signal, order, grid_residual: fit.residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adc::{acquire_modulo, FoldingSpec, QuantizerSpec};
    use crate::scene::SamplingGrid;
    use std::f64::consts::TAU;

    fn tones(spec: &[(f64, f64, f64)], rate: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                let t = n as f64 / rate;
                spec.iter().map(|(a, f, p)| a * (TAU * f * t + p).cos()).sum()
            })
            .collect()
    }

    fn lattice_error(a: &[f64], b: &[f64], lambda: f64) -> f64 {
        let e: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let p = 2.0 * lambda;
        let shift = (e[0] / p).round() * p;
        e.iter().map(|v| (v - shift).abs()).fold(0.0, f64::max)
    }

    fn fold_signal(x: &[f64], rate: f64, lambda: f64) -> SampledSignal<f64> {
        let f = FoldingSpec::new(lambda).unwrap();
        let s = SampledSignal::new(SamplingGrid::new(rate, x.len()).unwrap(), x.to_vec()).unwrap();
        s.map(|v| crate::adc::modulo_fold(v, &f)).unwrap()
    }

    #[test]
    fn detects_tone_frequencies() {
        let x = tones(&[(1.0, 444.75, 0.2), (0.1, 1645.6, 1.0)], 8140.0, 4096);
        let found = detect_frequencies(&x, 2);
        let mut hz: Vec<f64> = found.iter().map(|w| w * 8140.0 / TAU).collect();
        hz.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((hz[0] - 444.75).abs() < 0.05, "{hz:?}");
        assert!((hz[1] - 1645.6).abs() < 0.05, "{hz:?}");
    }

    #[test]
    fn refine_recovers_exact_tones() {
        let x = tones(&[(2.0, 444.75, 0.2), (0.3, 1000.3, -1.0)], 8140.0, 2000);
        let centre = 999.5;
        let omegas = detect_frequencies(&x, 2);
        let model = refine(&x, fit_amplitudes(&x, &omegas, centre));
        let fitted = model.eval(x.len());
        let err = fitted.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn integrated_model_matches_lower_order() {
        let x = tones(&[(1.5, 300.0, 0.4), (0.5, 1200.0, 2.0)], 8140.0, 1500);
        let centre = 749.5;
        let d2 = finite_difference(&x, 2).unwrap();
        let d1 = finite_difference(&x, 1).unwrap();
        let model = refine(&d2, fit_amplitudes(&d2, &detect_frequencies(&d2, 2), centre));
        let lowered = model.integrated(1).eval(d1.len());
        let err = lowered.iter().zip(&d1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn in_range_mixture_is_identity() {
        let x = tones(&[(1.0, 444.75, 0.0), (0.5, 1645.6, 0.7)], 8140.0, 2048);
        let y = fold_signal(&x, 8140.0, 2.01);
        let spec = RecoverySpec::new(2.01).unwrap().with_sparsity(2).unwrap();
        let out = usf_unfold_sparse(&y, &spec).unwrap();
        assert_eq!(out.signal.values(), y.values());
        assert_eq!(out.order, 1);
    }

    #[test]
    fn single_tone_below_required_rate() {
        let lambda = 2.01;
        let x = tones(&[(3.0 * lambda, 444.75, 0.9)], 8140.0, 8140);
        let y = fold_signal(&x, 8140.0, lambda);
        let spec = RecoverySpec::new(lambda).unwrap().with_sparsity(1).unwrap();
        let out = usf_unfold_sparse(&y, &spec).unwrap();
        assert!(lattice_error(out.signal.values(), &x, lambda) < 1e-6);
    }

    #[test]
    fn quantized_near_far_scene() {
        let lambda = 2.01;
        let rate = 8140.0;
        let x = tones(
            &[(7.5, 444.75, 0.0), (0.15, 889.5, 0.0), (0.075, 1334.25, 0.0), (0.01, 1645.6, 0.5)],
            rate,
            8140,
        );
        let q = QuantizerSpec::new(8, lambda).unwrap();
        let truth = SampledSignal::new(SamplingGrid::new(rate, x.len()).unwrap(), x.clone()).unwrap();
        let y = acquire_modulo(&truth, &FoldingSpec::new(lambda).unwrap(), &q).unwrap();
        let spec = RecoverySpec::new(lambda).unwrap().with_sparsity(4).unwrap();
        let out = usf_unfold_sparse(&y, &spec).unwrap();
        assert!(lattice_error(out.signal.values(), &x, lambda) <= q.step() / 2.0 + 1e-9);
    }

    #[test]
    fn missing_sparsity_is_config_error() {
        let y = fold_signal(&[0.0; 64], 100.0, 1.0);
        let spec = RecoverySpec::new(1.0).unwrap();
        assert!(matches!(usf_unfold_sparse(&y, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn wrong_threshold_rejected() {
        let lambda = 2.01;
        let x = tones(&[(3.0 * lambda, 444.75, 0.9)], 8140.0, 4096);
        let y = fold_signal(&x, 8140.0, lambda);
        let spec = RecoverySpec::new(1.7).unwrap().with_sparsity(1).unwrap();
        let err = usf_unfold_sparse(&y, &spec).unwrap_err();
        assert!(matches!(err, Error::Recovery(_)), "{err}");
    }
}
