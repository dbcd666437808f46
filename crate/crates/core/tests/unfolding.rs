use proptest::prelude::*;
use usf_radar_core::adc::{acquire_modulo, step_size};
use usf_radar_core::experiment::reconstruction_error;
use usf_radar_core::recovery::{required_sampling_rate, usf_unfold, usf_unfold_sparse};
use usf_radar_core::scene::{self, kmh_to_mps, synthesize};
use usf_radar_core::{adc, recovery, FoldingSpec, QuantizerSpec, RadarConfig, RecoverySpec, SamplingGrid, Signal, Target};

const LAMBDA: f64 = 2.01;

fn fold(x: &Signal, lambda: f64) -> Signal {
    let f = FoldingSpec::new(lambda).unwrap();
    x.map(|v| adc::modulo_fold(v, &f)).unwrap()
}

/// Tones given as (frequency in Hz, amplitude, phase) on a unit-carrier radar,
/// so velocity and Doppler frequency coincide up to the factor 2/c.
fn tones(spec: &[(f64, f64, f64)], rate: f64, count: usize) -> Signal {
    let radar = RadarConfig::new(1.0).unwrap();
    let targets: Vec<Target> = spec
        .iter()
        .map(|&(f, a, p)| Target::new(a, radar.velocity_for(f), p).unwrap())
        .collect();
    synthesize(&targets, &radar, &SamplingGrid::new(rate, count).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unfolding_at_required_rate_is_exact(
        parts in prop::collection::vec((0.05f64..1.0, 0.0f64..10.0 * LAMBDA, -3.14f64..3.14), 1..=4),
        f_max in 10.0f64..2000.0,
        count in 64usize..600,
    ) {
        let spec: Vec<(f64, f64, f64)> = parts.iter().map(|&(r, a, p)| (r * f_max, a, p)).collect();
        let rate = required_sampling_rate(f_max);
        let x = tones(&spec, rate, count);
        let bound: f64 = spec.iter().map(|t| t.1).sum::<f64>().max(LAMBDA);
        let rs = RecoverySpec::new(LAMBDA).unwrap()
            .with_amplitude_bound(bound).unwrap()
            .with_auto_order(f_max).unwrap();
        let out = usf_unfold(&fold(&x, LAMBDA), &rs).unwrap();
        let err = reconstruction_error(&out.signal, &x, LAMBDA).unwrap();
        prop_assert!(err < 1e-6, "error {err} at order {}", out.order);
    }

    #[test]
    fn quantized_unfolding_stays_within_half_a_step(
        amp in 3.0f64..8.0,
        f in 50.0f64..400.0,
        phase in -3.14f64..3.14,
    ) {
        let x = tones(&[(f, amp, phase)], 8140.0, 1024);
        let q = QuantizerSpec::new(8, LAMBDA).unwrap();
        let y = acquire_modulo(&x, &FoldingSpec::new(LAMBDA).unwrap(), &q).unwrap();
        let rs = RecoverySpec::new(LAMBDA).unwrap().with_order(2).unwrap();
        let out = usf_unfold(&y, &rs).unwrap();
        let err = reconstruction_error(&out.signal, &x, LAMBDA).unwrap();
        prop_assert!(err <= step_size(&q) / 2.0 + 1e-12, "error {err}");
    }
}

#[test]
fn sparse_unfolding_of_near_far_scene() {
    let radar = RadarConfig::new(24e9).unwrap();
    let grid = SamplingGrid::new(8140.0, 8140).unwrap();
    let targets = [
        Target::new(7.5, kmh_to_mps(10.0), 0.3).unwrap(),
        Target::new(0.4, kmh_to_mps(37.0), 1.1).unwrap(),
    ];
    let x = synthesize(&targets, &radar, &grid).unwrap();
    assert!(x.peak() <= 8.0);
    let q = QuantizerSpec::new(8, LAMBDA).unwrap();
    let y = acquire_modulo(&x, &FoldingSpec::new(LAMBDA).unwrap(), &q).unwrap();
    let rs = RecoverySpec::new(LAMBDA).unwrap().with_sparsity(2).unwrap();
    let out = usf_unfold_sparse(&y, &rs).unwrap();
    let err = reconstruction_error(&out.signal, &x, LAMBDA).unwrap();
    assert!(err < 4.0 * step_size(&q), "error {err}");
}

#[test]
fn single_precision_pipeline() {
    let radar = scene::RadarConfig::<f32>::new(24e9).unwrap();
    let grid = scene::SamplingGrid::<f32>::new(8140.0, 2048).unwrap();
    let targets = [scene::Target::<f32>::new(6.0, kmh_to_mps(10.0f32), 0.3).unwrap()];
    let x = synthesize(&targets, &radar, &grid).unwrap();
    let q = adc::QuantizerSpec::<f32>::new(8, 2.01).unwrap();
    let y = acquire_modulo(&x, &adc::FoldingSpec::new(2.01f32).unwrap(), &q).unwrap();
    let rs = recovery::RecoverySpec::<f32>::new(2.01).unwrap().with_order(2).unwrap();
    let out = usf_unfold(&y, &rs).unwrap();
    let err = reconstruction_error(&out.signal, &x, 2.01f32).unwrap();
    assert!(err <= step_size(&q), "error {err}");
    let spectrum = usf_radar_core::spectral::periodogram_db(&out.signal, usf_radar_core::Window::Hann, None).unwrap();
    let top = (0..spectrum.len()).max_by(|&a, &b| spectrum.magnitudes_db()[a].total_cmp(&spectrum.magnitudes_db()[b])).unwrap();
    assert!((spectrum.frequencies()[top] - 444.75).abs() <= spectrum.bin_width());
}
