use ramanquant::simulator::{
    gen_dataset, grid_descriptors, protocol_interferents, protocol_mixture, protocol_reference, protocol_target,
    SimProtocol,
};

fn protocol(n_interferents: usize, sigma: f64) -> SimProtocol {
    SimProtocol { n_interferents, sigma_mix: sigma, seed: 9, ..SimProtocol::default() }
}

#[test]
fn cells_share_target_and_reference() {
    let a = protocol(1, 1.0);
    let b = protocol(7, 5.0);
    assert_eq!(protocol_target(&a), protocol_target(&b));
    let t = protocol_target(&a);
    assert_eq!(protocol_reference(&a, &t).unwrap(), protocol_reference(&b, &t).unwrap());
}

#[test]
fn noise_level_only_rescales_the_noise() {
    let t = protocol_target(&protocol(3, 1.0));
    let (y1, g1) = protocol_mixture(&protocol(3, 1.0), &t, None, 4).unwrap();
    let (y3, g3) = protocol_mixture(&protocol(3, 3.0), &t, None, 4).unwrap();
    assert_eq!(g1, g3);
    let clean: Vec<f64> = (0..y1.len()).map(|i| g1.target_signal[i] + g1.interferent_signal[i] + g1.baseline[i]).collect();
    for i in 0..y1.len() {
        let (e1, e3) = (y1.intensity()[i] - clean[i], y3.intensity()[i] - clean[i]);
        assert!((e3 - 3.0 * e1).abs() < 1e-9);
    }
}

#[test]
fn more_interferents_extend_the_same_mixture() {
    let t = protocol_target(&protocol(1, 1.0));
    let (_, small) = protocol_mixture(&protocol(2, 2.0), &t, None, 7).unwrap();
    let (_, large) = protocol_mixture(&protocol(5, 2.0), &t, None, 7).unwrap();
    assert_eq!(small.concentrations[..], large.concentrations[..3]);
    assert_eq!(small.baseline, large.baseline);
}

#[test]
fn concentrations_fill_the_range() {
    let d = gen_dataset(&protocol(1, 1.0), 200).unwrap();
    let c = d.target_truth();
    assert!(c.iter().all(|v| (0.0..=60.0).contains(v)));
    let mean = c.iter().sum::<f64>() / c.len() as f64;
    assert!((mean - 30.0).abs() < 4.0);
}

#[test]
fn fixed_components_share_interferents() {
    let p = SimProtocol { redraw_interferents: false, ..protocol(3, 1.0) };
    let d = gen_dataset(&p, 5).unwrap();
    assert_eq!(d.meta.interferents.as_deref(), Some(&protocol_interferents(&p)[..]));
}

#[test]
fn grid_covers_every_cell_once() {
    let ds = grid_descriptors(&[1, 2, 3, 4, 5, 6, 7], &[1.0, 2.0, 3.0, 4.0, 5.0], 100, 0);
    assert_eq!(ds.len(), 35);
    let mut keys: Vec<(usize, u64)> = ds.iter().map(|d| (d.n_interferents, d.sigma.to_bits())).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 35);
}
