use qst_core::nn::{
    estimate_gradient, optimizer_step, particle_features, weight_head, AdamHyper, AdamState, HeadSpecs, ModelParameters,
    PARTICLE_FEATURES,
};
use qst_core::rng::stream;
use rand::Rng;

/// Banks of random distances; the target weights rank particles by inverse distance.
fn toy_banks() -> Vec<(Vec<[f64; PARTICLE_FEATURES]>, Vec<f64>)> {
    let mut rng = stream(17, 0);
    (0..8)
        .map(|t| {
            let feats: Vec<[f64; PARTICLE_FEATURES]> = (0..10)
                .map(|_| {
                    let l2 = rng.random_range(0.02..0.5);
                    particle_features(l2 * rng.random_range(1.2..2.0), l2, 1000, t)
                })
                .collect();
            let inv: Vec<f64> = feats.iter().map(|f| 1.0 / f[1]).collect();
            let s: f64 = inv.iter().sum();
            (feats, inv.iter().map(|x| x / s).collect())
        })
        .collect()
}

fn toy_loss(base: &ModelParameters, values: &[f64], banks: &[(Vec<[f64; PARTICLE_FEATURES]>, Vec<f64>)]) -> f64 {
    let p = base.with_values(values.to_vec()).unwrap();
    banks
        .iter()
        .map(|(f, target)| {
            let (w, _) = weight_head(&p, f).unwrap();
            w.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum()
}

#[test]
fn weight_head_learns_inverse_distance_ranking() {
    let banks = toy_banks();
    let base = ModelParameters::init(HeadSpecs::with_hidden(vec![8]), 0.5, 0.1, 3).unwrap();
    let mut values = base.values.clone();
    let initial = toy_loss(&base, &values, &banks);
    let mut rng = stream(18, 0);
    let mut adam = AdamState::new(values.len());
    let hyper = AdamHyper {
        learning_rate: 0.05,
        ..AdamHyper::default()
    };
    for _ in 0..200 {
        let g = estimate_gradient(|v, _| toy_loss(&base, v, &banks), &values, &mut rng, 8, 0.01);
        optimizer_step(&mut values, &g.grad, &mut adam, &hyper);
    }
    let last = toy_loss(&base, &values, &banks);
    assert!(last <= 0.5 * initial, "loss {initial} -> {last}");
}
