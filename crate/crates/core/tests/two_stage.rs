use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ramanquant::model::ModelConfig;
use ramanquant::simulator::{gen_mixture, gen_reference, SimProtocol, SyntheticAnalyte};
use ramanquant::spectral::{PeakParams, Spectrum};
use ramanquant::two_stage::{learn_target, quantify, TargetModel};

fn two_peak_target() -> SyntheticAnalyte {
    SyntheticAnalyte {
        peaks: vec![PeakParams::new(800.0, 18.0, 0.3), PeakParams::new(1200.0, 25.0, 0.6)],
        amplitudes: vec![2.0, 1.5],
    }
}

fn learned() -> (SyntheticAnalyte, SimProtocol, TargetModel) {
    let target = two_peak_target();
    let protocol = SimProtocol::default();
    let reference = gen_reference(&target, &protocol, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let model = learn_target(&reference, protocol.c_pure, &ModelConfig::default(), 2).unwrap();
    (target, protocol, model)
}

fn mixture(target: &SyntheticAnalyte, protocol: &SimProtocol, c: f64, seed: u64) -> Spectrum {
    let interferent = SyntheticAnalyte { peaks: vec![PeakParams::new(1000.0, 15.0, 0.5)], amplitudes: vec![1.8] };
    gen_mixture(target, &[interferent], &[c, 20.0], protocol, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().0
}

#[test]
fn reference_peaks_are_recovered() {
    let (target, _, model) = learned();
    assert_eq!(model.k_hat(), 2, "{:?}", model.peaks);
    for (p, t) in model.peaks.iter().zip(&target.peaks) {
        assert!((p.location - t.location).abs() < 2.0, "{p:?} vs {t:?}");
    }
}

#[test]
fn mixture_concentration_is_estimated() {
    let (target, protocol, model) = learned();
    let cfg = ModelConfig::default();
    for (c, seed) in [(5.0, 10), (0.0, 11), (40.0, 12)] {
        let q = quantify(&mixture(&target, &protocol, c, seed), &model, &cfg, 3).unwrap();
        assert!((q.c_mix_hat - c).abs() < 1.5, "c = {c}: {}", q.c_mix_hat);
        assert!(q.c_mix_sd > 0.0 && q.c_mix_sd < 2.0);
        assert_eq!(q.k_i_hat, 1, "{:?}", q.interferent_peaks);
    }
}

#[test]
fn components_reconstruct_the_mixture() {
    let (target, protocol, model) = learned();
    let y = mixture(&target, &protocol, 25.0, 20);
    let q = quantify(&y, &model, &ModelConfig::default(), 4).unwrap();
    let fitted = q.components.total();
    let rms = (y.intensity().iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    // the residual is the noise
    assert!((rms - protocol.sigma_mix).abs() < 0.2, "residual rms {rms}");
}

#[test]
fn doubling_the_target_doubles_the_estimate() {
    let (target, protocol, model) = learned();
    let cfg = ModelConfig::default();
    let single = quantify(&mixture(&target, &protocol, 15.0, 30), &model, &cfg, 5).unwrap().c_mix_hat;
    let double = quantify(&mixture(&target, &protocol, 30.0, 30), &model, &cfg, 5).unwrap().c_mix_hat;
    assert!((double - 2.0 * single).abs() < 1.5, "{single} -> {double}");
}

#[test]
fn model_survives_json_round_trip() {
    let (target, protocol, model) = learned();
    let back: TargetModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
    assert_eq!(back, model);
    let y = mixture(&target, &protocol, 10.0, 40);
    let cfg = ModelConfig::default();
    assert_eq!(quantify(&y, &model, &cfg, 6).unwrap(), quantify(&y, &back, &cfg, 6).unwrap());
}

#[test]
fn noise_free_doubling_is_proportional() {
    let target = two_peak_target();
    // signal-to-noise around 1000; at vanishing noise the fixed proposal
    // steps stop mixing and the chain piles up spurious peaks instead
    let protocol = SimProtocol { sigma_ref: 0.1, sigma_mix: 0.1, ..SimProtocol::default() };
    let reference = gen_reference(&target, &protocol, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let cfg = ModelConfig::default();
    let model = learn_target(&reference, protocol.c_pure, &cfg, 2).unwrap();
    for seed in [7, 8] {
        let single = quantify(&mixture(&target, &protocol, 15.0, 50), &model, &cfg, seed).unwrap().c_mix_hat;
        let double = quantify(&mixture(&target, &protocol, 30.0, 50), &model, &cfg, seed).unwrap().c_mix_hat;
        assert!((double / single - 2.0).abs() < 0.1, "{single} -> {double}");
    }
}

#[test]
fn pure_target_reduces_to_projection() {
    let (_, _, model) = learned();
    let f = &model.unit_signal;
    let y: Vec<f64> = f.iter().enumerate().map(|(i, v)| 12.0 * v + 1e-3 * ((i * 7919) % 13) as f64 / 13.0).collect();
    let projection = y.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() / f.iter().map(|b| b * b).sum::<f64>();
    let q = quantify(&Spectrum::new(model.grid.clone(), y).unwrap(), &model, &ModelConfig::default(), 8).unwrap();
    assert!((q.c_mix_hat - projection).abs() < q.c_mix_sd.max(1e-3), "{} vs {projection} (sd {})", q.c_mix_hat, q.c_mix_sd);
}
