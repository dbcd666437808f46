//! Magnitude spectra, noise floors and peak picking.
//!
//! Spectra are one-sided and amplitude-referenced: an on-bin sinusoid of
//! amplitude `A` reads `20·log10(A)` dB whatever the window, so tone levels and
//! noise floors share one scale.

use std::str::FromStr;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scene::SampledSignal;

/// Value reported for bins with zero (or vanishing) magnitude.
pub const FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    pub fn name(&self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }

    /// Periodic (DFT-even) coefficients.
    pub fn coefficients<T: Real>(&self, len: usize) -> Vec<T> {
        match self {
            Window::Rectangular => vec![T::one(); len],
            Window::Hann => {
                let n = T::from_len(len);
                (0..len)
                    .map(|i| T::lit(0.5) - T::lit(0.5) * (T::TAU() * T::from_len(i) / n).cos())
                    .collect()
            }
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            other => Err(Error::config(format!("unknown window `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    frequencies: Vec<T>,
    magnitudes_db: Vec<T>,
    window: Window,
    length: usize,
    samples: usize,
}

impl<T: Real> Spectrum<T> {
    /// Builds a spectrum from precomputed bins.
    pub fn from_bins(
        frequencies: Vec<T>,
        magnitudes_db: Vec<T>,
        window: Window,
        length: usize,
        samples: usize,
    ) -> Result<Self> {
        if frequencies.is_empty() || frequencies.len() != magnitudes_db.len() {
            return Err(Error::size("spectrum needs equal, non-zero numbers of frequencies and magnitudes"));
        }
        if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("spectrum frequencies must be strictly increasing"));
        }
        Ok(Self { frequencies, magnitudes_db, window, length, samples })
    }

    pub fn frequencies(&self) -> &[T] {
        &self.frequencies
    }

    pub fn magnitudes_db(&self) -> &[T] {
        &self.magnitudes_db
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// DFT size.
    pub fn length(&self) -> usize {
        self.length
    }

    /// Number of signal samples behind the DFT.
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn bin_width(&self) -> T {
        if self.frequencies.len() > 1 {
            self.frequencies[1] - self.frequencies[0]
        } else {
            T::zero()
        }
    }

    /// Bin whose centre is closest to `frequency`.
    pub fn bin_of(&self, frequency: T) -> usize {
        let w = self.bin_width();
        if w <= T::zero() {
            return 0;
        }
        let idx = (frequency.abs() / w).round().to_usize().unwrap_or(usize::MAX);
        idx.min(self.len() - 1)
    }

    /// Whether `other` has the same bins.
    pub fn same_layout(&self, other: &Self) -> bool {
        self.length == other.length && self.frequencies == other.frequencies
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak<T> {
    pub frequency: T,
    pub magnitude_db: T,
    pub bin: usize,
}

/// Next power of two at or above the signal length.
pub fn default_dft_size(samples: usize) -> usize {
    samples.max(1).next_power_of_two()
}

/// Mean-removed, windowed, zero-padded one-sided DFT, bins `0..=size/2`.
fn one_sided_dft<T: Real>(
    signal: &SampledSignal<T>,
    window: Window,
    dft_size: Option<usize>,
) -> Result<(Vec<Complex<T>>, T, usize)> {
    let n = signal.len();
    if n == 0 {
        return Err(Error::size("cannot take the spectrum of an empty signal"));
    }
    let size = dft_size.unwrap_or_else(|| default_dft_size(n));
    if size < n {
        return Err(Error::size(format!("DFT size {size} is shorter than the signal ({n})")));
    }
    if size < 2 {
        return Err(Error::size("DFT size must be at least 2"));
    }
    let values = signal.values();
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / T::from_len(n);
    let w = window.coefficients::<T>(n);
    let window_sum = w.iter().fold(T::zero(), |a, &v| a + v);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); size];
    for i in 0..n {
        buf[i] = Complex::new((values[i] - mean) * w[i], T::zero());
    }
    FftPlanner::new().plan_fft_forward(size).process(&mut buf);
    buf.truncate(size / 2 + 1);
    Ok((buf, window_sum, size))
}

/// Whether bin `k` of a one-sided `size`-point DFT has a mirrored partner.
fn doubled(k: usize, size: usize) -> bool {
    k != 0 && !(size.is_multiple_of(2) && k == size / 2)
}

/// Amplitude-referenced one-sided periodogram in dB.
pub fn periodogram_db<T: Real>(
    signal: &SampledSignal<T>,
    window: Window,
    dft_size: Option<usize>,
) -> Result<Spectrum<T>> {
    let (bins, window_sum, size) = one_sided_dft(signal, window, dft_size)?;
    let rate = signal.grid().rate;
    let floor = T::lit(FLOOR_DB);
    let frequencies = (0..bins.len())
        .map(|k| T::from_len(k) * rate / T::from_len(size))
        .collect();
    let magnitudes_db = bins
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let gain = if doubled(k, size) { T::lit(2.0) } else { T::one() };
            let mag = gain * c.norm() / window_sum;
            if mag > T::zero() {
                (T::lit(20.0) * mag.log10()).max(floor)
            } else {
                floor
            }
        })
        .collect();
    Spectrum::from_bins(frequencies, magnitudes_db, window, size, signal.len())
}

/// One-sided power per bin, scaled so the bins sum to the mean square of the
/// windowed, mean-removed signal.
pub fn power_bins<T: Real>(signal: &SampledSignal<T>, window: Window, dft_size: Option<usize>) -> Result<Vec<T>> {
    let (bins, _, size) = one_sided_dft(signal, window, dft_size)?;
    let norm = T::from_len(size) * T::from_len(signal.len());
    Ok(bins
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let gain = if doubled(k, size) { T::lit(2.0) } else { T::one() };
            gain * c.norm_sqr() / norm
        })
        .collect())
}

/// Level, on the amplitude-referenced scale, of white noise with power
/// `noise_power` spread evenly over the `dft_size / 2` one-sided bins.
pub fn predicted_floor_db<T: Real>(noise_power: T, dft_size: usize) -> T {
    let per_bin = noise_power / T::from_len(dft_size / 2);
    // amplitude reference: a tone of power P reads 2P
    T::lit(10.0) * (T::lit(2.0) * per_bin).log10()
}

/// Mean bin power away from DC and from the excluded peaks, in dB. Spurs
/// that are not excluded count toward the floor.
pub fn estimate_noise_floor<T: Real>(spectrum: &Spectrum<T>, exclude: &[Peak<T>], guard_bins: usize) -> Result<T> {
    let ten = T::lit(10.0);
    let kept: Vec<T> = spectrum
        .magnitudes_db
        .iter()
        .enumerate()
        .filter(|&(k, _)| k > guard_bins && exclude.iter().all(|p| k.abs_diff(p.bin) > guard_bins))
        .map(|(_, &v)| ten.powf(v / ten))
        .collect();
    if kept.is_empty() {
        return Err(Error::domain("every bin is excluded from the noise-floor estimate"));
    }
    let mean = kept.iter().fold(T::zero(), |acc, &p| acc + p) / T::from_len(kept.len());
    if mean <= T::zero() {
        return Ok(T::lit(FLOOR_DB));
    }
    Ok((ten * mean.log10()).max(T::lit(FLOOR_DB)))
}

fn median_level<T: Real>(spectrum: &Spectrum<T>) -> Result<T> {
    let mut levels: Vec<T> = spectrum.magnitudes_db.iter().skip(1).copied().collect();
    if levels.is_empty() {
        return Err(Error::domain("spectrum has no bins besides DC"));
    }
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = levels.len() / 2;
    Ok(if levels.len() % 2 == 1 {
        levels[mid]
    } else {
        (levels[mid - 1] + levels[mid]) / T::lit(2.0)
    })
}

/// Local maxima at least `margin_db` above the median bin level, taken strongest
/// first and kept only if `min_separation` Hz from every stronger pick.
/// Returned in ascending frequency.
pub fn detect_peaks<T: Real>(spectrum: &Spectrum<T>, margin_db: T, min_separation: T) -> Result<Vec<Peak<T>>> {
    if !(margin_db > T::zero()) {
        return Err(Error::domain("peak margin must be positive"));
    }
    let threshold = median_level(spectrum)? + margin_db;
    let mags = &spectrum.magnitudes_db;
    let last = mags.len() - 1;
    let mut candidates: Vec<usize> = (1..=last)
        .filter(|&k| {
            let left = mags[k] > mags[k - 1];
            let right = k == last || mags[k] >= mags[k + 1];
            left && right && mags[k] > threshold
        })
        .collect();
    candidates.sort_by(|&a, &b| {
        mags[b]
            .partial_cmp(&mags[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut peaks: Vec<Peak<T>> = Vec::new();
    for k in candidates {
        let f = spectrum.frequencies[k];
        if peaks.iter().all(|p| (p.frequency - f).abs() >= min_separation) {
            peaks.push(Peak { frequency: f, magnitude_db: mags[k], bin: k });
        }
    }
    peaks.sort_by_key(|p| p.bin);
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SamplingGrid;
    use std::f64::consts::TAU;

    fn sig(values: Vec<f64>, rate: f64) -> SampledSignal<f64> {
        SampledSignal::new(SamplingGrid::new(rate, values.len()).unwrap(), values).unwrap()
    }

    fn flat(level: f64, n: usize) -> Spectrum<f64> {
        Spectrum::from_bins((0..n).map(|k| k as f64).collect(), vec![level; n], Window::Hann, 2 * n, 2 * n)
            .unwrap()
    }

    #[test]
    fn unit_sine_reads_zero_db() {
        let n = 1024;
        let x: Vec<f64> = (0..n).map(|i| (TAU * 37.0 * i as f64 / n as f64 + 0.4).sin()).collect();
        for window in [Window::Rectangular, Window::Hann] {
            let s = periodogram_db(&sig(x.clone(), 1024.0), window, None).unwrap();
            assert!(s.magnitudes_db()[37].abs() < 1e-6, "{window:?}: {}", s.magnitudes_db()[37]);
            assert_eq!(s.bin_of(37.2), 37);
        }
    }

    #[test]
    fn silence_reads_floor() {
        let s = periodogram_db(&sig(vec![0.0; 100], 10.0), Window::Hann, None).unwrap();
        assert_eq!(s.length(), 128);
        assert_eq!(s.len(), 65);
        assert!(s.magnitudes_db().iter().all(|&v| v == FLOOR_DB));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(periodogram_db(&sig(vec![1.0; 100], 10.0), Window::Hann, Some(64)).is_err());
        assert!(Window::from_str("kaiser").is_err());
        assert_eq!(Window::from_str("rect").unwrap(), Window::Rectangular);
    }

    #[test]
    fn floor_examples() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        assert!(close(estimate_noise_floor(&flat(-60.0, 200), &[], 5).unwrap(), -60.0));
        let mut s = flat(-60.0, 200);
        s.magnitudes_db[50] = 0.0;
        let peak = Peak { frequency: 50.0, magnitude_db: 0.0, bin: 50 };
        assert!(close(estimate_noise_floor(&s, &[peak], 3).unwrap(), -60.0));
        // an unexcluded spur raises the floor by its share of the power
        let unexcluded = estimate_noise_floor(&s, &[], 3).unwrap();
        let expected = 10.0 * ((195.0 * 1e-6 + 1.0) / 196.0f64).log10();
        assert!(close(unexcluded, expected), "{unexcluded}");
        assert!(matches!(estimate_noise_floor(&flat(-60.0, 4), &[], 5), Err(Error::Domain(_))));
    }

    #[test]
    fn detects_single_tone() {
        let n = 2048;
        let x: Vec<f64> = (0..n).map(|i| (TAU * 100.0 * i as f64 / n as f64).cos()).collect();
        let noisy = crate::scene::add_awgn(&sig(x, n as f64), 1e-3, 3).unwrap();
        let s = periodogram_db(&noisy, Window::Hann, None).unwrap();
        // well clear of the Rayleigh tail of the median floor
        let peaks = detect_peaks(&s, 15.0, 5.0).unwrap();
        assert_eq!(peaks.len(), 1, "{peaks:?}");
        assert_eq!(peaks[0].bin, 100);
        assert!(detect_peaks(&s, 0.0, 5.0).is_err());
    }

    #[test]
    fn min_separation_suppresses_weaker_neighbour() {
        let mut s = flat(-60.0, 200);
        s.magnitudes_db[50] = 0.0;
        s.magnitudes_db[53] = -10.0;
        s.magnitudes_db[120] = -20.0;
        let all = detect_peaks(&s, 8.0, 1.0).unwrap();
        assert_eq!(all.iter().map(|p| p.bin).collect::<Vec<_>>(), vec![50, 53, 120]);
        let spaced = detect_peaks(&s, 8.0, 5.0).unwrap();
        assert_eq!(spaced.iter().map(|p| p.bin).collect::<Vec<_>>(), vec![50, 120]);
    }

    #[test]
    fn predicted_floor_formula() {
        // δ²/12 over 4096 bins, doubled for the amplitude reference
        let d: f64 = 16.0 / 255.0;
        let expected = 10.0 * (2.0 * d * d / 12.0 / 4096.0).log10();
        assert!((predicted_floor_db(d * d / 12.0, 8192) - expected).abs() < 1e-12);
    }
}
