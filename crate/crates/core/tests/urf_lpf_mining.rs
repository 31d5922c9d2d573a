use fast_core::lpf::{invert, train_inverter, ImplicitProjection, SamplePair};
use fast_core::metrics::recall;
use fast_core::mining::{
    mine_from_prior, mine_positives, negative_similarity_scores, negatives_only_baseline, DEFAULT_CAP_FACTOR,
    DEFAULT_POOL_FACTOR,
};
use fast_core::numeric::dot;
use fast_core::synthgen::{generate, make_feedback, prior_sampler, GeneratorSpec, Nonlinearity};
use fast_core::urf::{
    augment_latents, empirical_gaussian, mean_difference, svm_normal, MeanDifference, SvmConfig,
};
use fast_core::{fit_filter, LatentVector, SampleId};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn lv(v: &[f64]) -> LatentVector {
    LatentVector::new(v.to_vec()).unwrap()
}

fn cloud(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), 1..8)
}

fn to_latents(v: &[Vec<f64>]) -> Vec<LatentVector> {
    v.iter().map(|x| lv(x)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mean_difference_ignores_translation(zn in cloud(3), zp in cloud(3), shift in prop::collection::vec(-50.0f64..50.0, 3)) {
        let Ok(base) = mean_difference(&to_latents(&zn), &to_latents(&zp)) else { return Ok(()); };
        let moved = |c: &[Vec<f64>]| -> Vec<LatentVector> {
            c.iter().map(|x| lv(&x.iter().zip(&shift).map(|(a, b)| a + b).collect::<Vec<_>>())).collect()
        };
        let shifted = mean_difference(&moved(&zn), &moved(&zp)).unwrap();
        for (a, b) in base.direction().as_slice().iter().zip(shifted.direction().as_slice()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs() + shift.iter().map(|s| s.abs()).sum::<f64>()));
        }
    }

    #[test]
    fn mean_difference_is_antisymmetric(zn in cloud(4), zp in cloud(4)) {
        let (zn, zp) = (to_latents(&zn), to_latents(&zp));
        let Ok(fwd) = mean_difference(&zn, &zp) else { return Ok(()); };
        let back = mean_difference(&zp, &zn).unwrap();
        for (a, b) in fwd.direction().as_slice().iter().zip(back.direction().as_slice()) {
            prop_assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn mining_is_monotone_in_alpha(seed in 0u64..1000, a1 in 0.0f64..3.0, gap in 0.0f64..3.0) {
        let mut draw = prior_sampler(4, seed);
        let zn: Vec<LatentVector> = (0..10).map(|_| {
            let z = draw();
            lv(&z.as_slice().iter().enumerate().map(|(i, v)| if i == 0 { v + 3.0 } else { *v }).collect::<Vec<_>>())
        }).collect();
        let scores = negative_similarity_scores(&zn).unwrap();
        let candidates: Vec<LatentVector> = (0..300).map(|_| draw()).collect();
        let loose = mine_positives(&candidates, &scores, a1, usize::MAX).unwrap().mined;
        let strict = mine_positives(&candidates, &scores, a1 + gap, usize::MAX).unwrap().mined;
        for z in &strict {
            prop_assert!(loose.contains(z));
        }
        // Feedback negatives are never mined.
        prop_assert!(mine_positives(&zn, &scores, 0.0, usize::MAX).unwrap().mined.is_empty());
    }
}

#[test]
fn svm_on_jittered_xor_converges_with_loss() {
    let zn = vec![lv(&[1.0, 1.05]), lv(&[-1.0, -0.97])];
    let zp = vec![lv(&[1.02, -1.0]), lv(&[-1.0, 1.01])];
    let u = svm_normal(&zn, &zp, &SvmConfig::default()).unwrap();
    let w = u.direction().as_slice();
    // Orientation: negatives project higher on average.
    let mean_proj = |zs: &[LatentVector]| zs.iter().map(|z| dot(z.as_slice(), w)).sum::<f64>() / zs.len() as f64;
    assert!(mean_proj(&zn) > mean_proj(&zp));
}

#[test]
fn svm_axis_example() {
    let zn = vec![lv(&[1.0, 0.0]), lv(&[2.0, 0.0])];
    let zp = vec![lv(&[-1.0, 0.0]), lv(&[-2.0, 0.0])];
    let u = svm_normal(&zn, &zp, &SvmConfig::default()).unwrap();
    let w = u.direction().as_slice();
    assert!(w[1].atan2(w[0]).abs() < 1e-3);
}

#[test]
fn regularised_eigenvalues_respect_floor() {
    let mut draw = prior_sampler(32, 9);
    let z: Vec<LatentVector> = (0..20).map(|_| draw()).collect();
    let g = empirical_gaussian(&z, 1e-6).unwrap();
    let lambda = g.regularization();
    assert!((lambda - 1e-6 * g.covariance().trace() / 32.0).abs() < 1e-18);
    let eig = SymmetricEigen::new(g.regularized_covariance());
    // The sample covariance of 20 points in 32-D has a null space; loading lifts it.
    assert!(eig.eigenvalues.iter().all(|v| *v >= lambda * (1.0 - 1e-6) - 1e-15));
}

#[test]
fn isotropic_draws_centre_on_mean() {
    let g = fast_core::urf::EmpiricalGaussian::new(LatentVector::zeros(2), DMatrix::identity(2, 2), 0.0).unwrap();
    let draws = augment_latents(&g, 5000, 1).unwrap();
    for c in 0..2 {
        let m = draws.iter().map(|z| z.as_slice()[c]).sum::<f64>() / 5000.0;
        assert!(m.abs() < 0.06);
    }
}

#[test]
fn augmented_mean_difference_tracks_raw() {
    let mut draw = prior_sampler(6, 21);
    let zn: Vec<LatentVector> = (0..20).map(|_| draw()).collect();
    let zp: Vec<LatentVector> = (0..20)
        .map(|_| lv(&draw().as_slice().iter().map(|v| v - 1.0).collect::<Vec<_>>()))
        .collect();
    let raw = mean_difference(&zn, &zp).unwrap();
    let cfg = fast_core::urf::AugmentConfig {
        count: 50_000,
        ..Default::default()
    };
    let aug = mean_difference(&cfg.augment_class(&zn, 1).unwrap(), &cfg.augment_class(&zp, 2).unwrap()).unwrap();
    // Each class mean has variance about tr(cov)/n per coordinate: 3 sigma with n = 50020.
    let tol = 3.0 * (2.0 * 1.5 / 50_020f64).sqrt();
    for (a, b) in aug.direction().as_slice().iter().zip(raw.direction().as_slice()) {
        assert!((a - b).abs() < tol, "{a} vs {b}");
    }
}

fn linear_pairs(spec: &GeneratorSpec, n: usize, seed: u64) -> Vec<SamplePair> {
    generate(spec, n, seed).unwrap().pairs()
}

#[test]
fn inverter_recovers_linear_generator() {
    let spec = GeneratorSpec::random(5, 5, Nonlinearity::None, 0.1, 4).unwrap();
    let pairs = linear_pairs(&spec, 60, 8);
    let inv = train_inverter(&pairs, 0.0).unwrap();
    assert!(inv.fit_residual() < 1e-10);
    let a = DMatrix::from_row_slice(5, 5, spec.mixing_matrix());
    let a_inv = a.clone().try_inverse().unwrap();
    let w = DMatrix::from_row_slice(5, 5, inv.weights());
    assert!((&w - &a_inv).abs().max() < 1e-8);
    let b = nalgebra::DVector::from_column_slice(spec.offset());
    let expect_b = -(&a_inv * b);
    for (x, y) in inv.intercept().as_slice().iter().zip(expect_b.iter()) {
        assert!((x - y).abs() < 1e-8);
    }
    for p in linear_pairs(&spec, 20, 99) {
        let z = invert(&inv, &p.sample).unwrap();
        for (x, y) in z.as_slice().iter().zip(p.latent.as_slice()) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}

#[test]
fn ridge_trades_fit_for_shrinkage() {
    let spec = GeneratorSpec::random(4, 6, Nonlinearity::PiecewiseLinear, 0.1, 2).unwrap();
    let pairs = linear_pairs(&spec, 80, 3);
    let mut last = -1.0;
    for ridge in [0.0, 1e-3, 1e-1, 1.0, 10.0, 1e3] {
        let inv = train_inverter(&pairs, ridge).unwrap();
        assert!(inv.fit_residual() >= last - 1e-12);
        last = inv.fit_residual();
    }
    let huge = train_inverter(&pairs, 1e12).unwrap();
    assert!(huge.weights().iter().all(|w| w.abs() < 1e-6));
    // The nonlinear generator leaves a visible residual.
    assert!(train_inverter(&pairs, 0.0).unwrap().fit_residual() > 1e-6);
}

#[test]
fn constant_targets_give_zero_weights() {
    let z = lv(&[0.5, -2.0]);
    let pairs: Vec<SamplePair> = (0..10)
        .map(|i| SamplePair {
            latent: z.clone(),
            sample: vec![i as f64, (i * i) as f64 * 0.1, 1.0],
            sample_id: SampleId(i.to_string()),
        })
        .collect();
    let inv = train_inverter(&pairs, 0.5).unwrap();
    assert!(inv.weights().iter().all(|w| w.abs() < 1e-12));
    for (a, b) in inv.intercept().as_slice().iter().zip(z.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn mined_positives_beat_the_negatives_only_baseline() {
    let mut mined_recall = 0.0;
    let mut base_recall = 0.0;
    for seed in 0..5u64 {
        let spec = GeneratorSpec::random(16, 16, Nonlinearity::None, 0.1, seed).unwrap();
        let pool = generate(&spec, 2000, seed + 100).unwrap();
        let fb = make_feedback(&spec, &pool, 0, 20, seed + 200).unwrap();
        let scores = negative_similarity_scores(&fb.negative_latents()).unwrap();
        let mined = mine_from_prior(
            &scores,
            2.0,
            20,
            DEFAULT_POOL_FACTOR,
            DEFAULT_CAP_FACTOR,
            prior_sampler(16, seed + 300),
        )
        .unwrap();
        let fb = fb.with_mined_positives(&mined.mined).unwrap();
        let model = fit_filter(&fb, &ImplicitProjection::new(16), &MeanDifference).unwrap();
        let baseline = negatives_only_baseline(&fb.negative_latents(), "implicit").unwrap();
        let test = generate(&spec, 2000, seed + 400).unwrap();
        let dec = |m: &fast_core::FilterModel| -> Vec<fast_core::Decision> {
            test.latents.iter().map(|z| m.decide(z).unwrap()).collect()
        };
        mined_recall += recall(&dec(&model), &test.labels).unwrap() / 5.0;
        base_recall += recall(&dec(&baseline), &test.labels).unwrap() / 5.0;
    }
    assert!(mined_recall >= base_recall, "{mined_recall} < {base_recall}");
}
