use fast_core::lpf::ImplicitProjection;
use fast_core::manifest::filter_model_to_manifest;
use fast_core::synthgen::{generate, make_feedback, GeneratorSpec, Nonlinearity};
use fast_core::urf::MeanDifference;
use fast_core::{
    compute_threshold, decide, fit_filter, run_fast, similarity, FeedbackSet, LatentVector, SampleId,
    UndesiredDirection, UrfMethod, Verdict,
};
use proptest::prelude::*;

fn lv(v: &[f64]) -> LatentVector {
    LatentVector::new(v.to_vec()).unwrap()
}

fn labeled(prefix: &str, zs: &[LatentVector]) -> Vec<(SampleId, LatentVector)> {
    zs.iter()
        .enumerate()
        .map(|(i, z)| (SampleId(format!("{prefix}{i}")), z.clone()))
        .collect()
}

#[test]
fn one_dimensional_hand_trace() {
    let fb = FeedbackSet::new(
        labeled("p", &[lv(&[-2.0]), lv(&[-3.0])]),
        labeled("n", &[lv(&[2.0]), lv(&[3.0])]),
    )
    .unwrap();
    let out = run_fast(&fb, &ImplicitProjection::new(1), &MeanDifference, &[lv(&[1.0]), lv(&[-1.0])]).unwrap();
    assert_eq!(out.model.direction().direction().as_slice(), &[5.0]);
    assert_eq!(out.model.threshold(), 0.0);
    assert_eq!(out.kept, vec![lv(&[-1.0])]);
    assert_eq!(out.blocked, vec![lv(&[1.0])]);

    let empty = run_fast(&fb, &ImplicitProjection::new(1), &MeanDifference, &[]).unwrap();
    assert!(empty.kept.is_empty() && empty.blocked.is_empty());
}

#[test]
fn negatives_are_blocked_when_classes_separate_with_margin() {
    // w = e0, c = 0; feedback drawn only from |z0| > 1 so the classes are separated.
    let spec = GeneratorSpec::identity(4, lv(&[1.0, 0.0, 0.0, 0.0]), 0.0).unwrap();
    let pool = generate(&spec, 400, 3).unwrap();
    let keep_rows: Vec<usize> = (0..pool.len()).filter(|&i| pool.latents[i].as_slice()[0].abs() > 1.0).collect();
    let margin_pool = fast_core::synthgen::LabeledBatch {
        latents: keep_rows.iter().map(|&i| pool.latents[i].clone()).collect(),
        samples: keep_rows.iter().map(|&i| pool.samples[i].clone()).collect(),
        labels: keep_rows.iter().map(|&i| pool.labels[i]).collect(),
    };
    let fb = make_feedback(&spec, &margin_pool, 20, 20, 5).unwrap();
    // The oracle direction blocks every negative at the fitted threshold.
    let oracle = UndesiredDirection::new(spec.feature_direction().clone(), UrfMethod::MeanDifference, false).unwrap();
    let sims_n: Vec<f64> = fb.negatives().iter().map(|(_, z)| similarity(z, &oracle).unwrap()).collect();
    let sims_p: Vec<f64> = fb.positives().iter().map(|(_, z)| similarity(z, &oracle).unwrap()).collect();
    let t = compute_threshold(&sims_n, &sims_p).unwrap();
    assert!(sims_n.iter().all(|s| decide(*s, t).unwrap().verdict == Verdict::Block));

    let negatives = fb.negative_latents();
    let out = run_fast(&fb, &ImplicitProjection::new(4), &MeanDifference, &negatives).unwrap();
    assert_eq!(out.blocked.len(), negatives.len());
}

#[test]
fn fitted_model_reproduces_fit_time_decisions() {
    let spec = GeneratorSpec::random(8, 8, Nonlinearity::None, 0.2, 17).unwrap();
    let pool = generate(&spec, 500, 1).unwrap();
    let fb = make_feedback(&spec, &pool, 10, 10, 2).unwrap();
    let lpf = ImplicitProjection::new(8);
    let a = fit_filter(&fb, &lpf, &MeanDifference).unwrap();
    let b = fit_filter(&fb, &lpf, &MeanDifference).unwrap();
    assert_eq!(filter_model_to_manifest(&a), filter_model_to_manifest(&b));
    let fb_latents: Vec<LatentVector> = fb.negative_latents().into_iter().chain(fb.positive_latents()).collect();
    let first = run_fast(&fb, &lpf, &MeanDifference, &fb_latents).unwrap();
    let again: Vec<Verdict> = fb_latents.iter().map(|z| a.decide(z).unwrap().verdict).collect();
    let from_run: Vec<Verdict> = first.decisions.iter().map(|d| d.verdict).collect();
    assert_eq!(again, from_run);
}

#[test]
fn rejects_mixed_dimensions() {
    let fb = FeedbackSet::new(labeled("p", &[lv(&[0.0, 1.0])]), labeled("n", &[lv(&[1.0, 0.0])])).unwrap();
    let err = run_fast(&fb, &ImplicitProjection::new(2), &MeanDifference, &[lv(&[1.0])]);
    assert!(err.is_err());
    assert!(FeedbackSet::new(labeled("p", &[lv(&[0.0])]), labeled("n", &[lv(&[1.0, 0.0])])).is_err());
}

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, d)
}

fn nonzero(d: usize) -> impl Strategy<Value = Vec<f64>> {
    vec_strategy(d).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn similarity_is_scale_equivariant(z in vec_strategy(5), u in nonzero(5), alpha in 1e-3f64..1e3, t in -50.0f64..50.0) {
        let u1 = UndesiredDirection::new(lv(&u), UrfMethod::MeanDifference, false).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
        let u2 = UndesiredDirection::new(lv(&scaled), UrfMethod::MeanDifference, false).unwrap();
        let s1 = similarity(&lv(&z), &u1).unwrap();
        let s2 = similarity(&lv(&z), &u2).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-9 * (1.0 + s1.abs()));
        // Decisions agree away from the boundary.
        if (s1 - t).abs() > 1e-6 {
            prop_assert_eq!(decide(s1, t).unwrap().verdict, decide(s2, t).unwrap().verdict);
        }
    }

    #[test]
    fn similarity_is_linear(z1 in vec_strategy(4), z2 in vec_strategy(4), u in nonzero(4), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let u = UndesiredDirection::new(lv(&u), UrfMethod::SvmNormal, false).unwrap();
        let mix: Vec<f64> = z1.iter().zip(&z2).map(|(x, y)| a * x + b * y).collect();
        let lhs = similarity(&lv(&mix), &u).unwrap();
        let rhs = a * similarity(&lv(&z1), &u).unwrap() + b * similarity(&lv(&z2), &u).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs() + rhs.abs()));
    }

    #[test]
    fn threshold_is_grand_mean(values in prop::collection::vec(-1e3f64..1e3, 2..80)) {
        let s = values.len() / 2;
        let (neg, pos) = values[..2 * s].split_at(s);
        let t = compute_threshold(neg, pos).unwrap();
        // Independent oracle: exact dyadic sum after rounding inputs to 2^-20.
        let q: Vec<i128> = values[..2 * s].iter().map(|v| (v * 1048576.0).round() as i128).collect();
        let neg_q: Vec<f64> = q[..s].iter().map(|v| *v as f64 / 1048576.0).collect();
        let pos_q: Vec<f64> = q[s..].iter().map(|v| *v as f64 / 1048576.0).collect();
        let exact = q.iter().sum::<i128>() as f64 / 1048576.0 / (2 * s) as f64;
        let tq = compute_threshold(&neg_q, &pos_q).unwrap();
        prop_assert!((tq - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        let naive = values[..2 * s].iter().sum::<f64>() / (2 * s) as f64;
        prop_assert!((t - naive).abs() <= 1e-9 * (1.0 + naive.abs()));
    }

    #[test]
    fn run_fast_partitions_test_set(
        neg in prop::collection::vec(vec_strategy(3), 1..6),
        pos in prop::collection::vec(vec_strategy(3), 1..6),
        test in prop::collection::vec(vec_strategy(3), 0..30),
    ) {
        let fb = FeedbackSet::new(
            labeled("p", &pos.iter().map(|v| lv(v)).collect::<Vec<_>>()),
            labeled("n", &neg.iter().map(|v| lv(v)).collect::<Vec<_>>()),
        ).unwrap();
        let test: Vec<LatentVector> = test.iter().map(|v| lv(v)).collect();
        let Ok(out) = run_fast(&fb, &ImplicitProjection::new(3), &MeanDifference, &test) else {
            // Coinciding class means: nothing to partition.
            return Ok(());
        };
        prop_assert_eq!(out.kept.len() + out.blocked.len(), test.len());
        let mut k = 0;
        let mut b = 0;
        for (z, d) in test.iter().zip(&out.decisions) {
            prop_assert_eq!(d.verdict == Verdict::Block, d.similarity >= out.model.threshold());
            if d.is_blocked() {
                prop_assert_eq!(&out.blocked[b], z);
                b += 1;
            } else {
                prop_assert_eq!(&out.kept[k], z);
                k += 1;
            }
        }
    }
}
