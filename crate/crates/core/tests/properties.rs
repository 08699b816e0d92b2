use nalgebra::{Rotation3, Vector2, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lenspose_core::bodymodel::rodrigues;
use lenspose_core::evaluation::{mpjpe, pa_mpjpe, PelvisAnchor, LSP_PELVIS};
use lenspose_core::imaging::{forward_model, Psf};
use lenspose_core::numerics::{fft_convolve_2d, naive_convolve_2d, Grid, MultiChannelImage, Padding, Point3};
use lenspose_core::supervision::{
    loss_iuv, loss_regressor, loss_simcc, loss_total, simcc_decode, simcc_encode, IuvMap, IuvPrediction, LossParts,
    LossWeights, RegressorPrediction, RegressorTarget, SimccLogits,
};

fn grid(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Grid {
    Grid::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

fn points(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<Point3> {
    (0..n)
        .map(|_| Vector3::from_fn(|_, _| rng.random_range(-spread..spread)))
        .collect()
}

fn padding() -> impl Strategy<Value = Padding> {
    prop_oneof![Just(Padding::Linear), Just(Padding::Circular)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_matches_direct_sum(
        h in 1usize..40, w in 1usize..40, kh in 1usize..12, kw in 1usize..12,
        pad in padding(), seed in any::<u64>(),
    ) {
        prop_assume!(kh <= h && kw <= w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scene, kernel) = (grid(&mut rng, h, w), grid(&mut rng, kh, kw));
        let fast = fft_convolve_2d(&scene, &kernel, pad).unwrap();
        let slow = naive_convolve_2d(&scene, &kernel, pad).unwrap();
        prop_assert!(fast.max_abs_diff(&slow) < 1e-9);
    }

    #[test]
    fn forward_model_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, pad in padding(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = |rng: &mut ChaCha8Rng| {
            MultiChannelImage::new((0..3).map(|_| grid(rng, 20, 24)).collect()).unwrap()
        };
        let (x, y) = (img(&mut rng), img(&mut rng));
        let psf = Psf::synthetic_caustic(7, 9, 4, seed).unwrap();
        let mixed = MultiChannelImage::from_chw(
            3, 20, 24,
            x.to_chw().iter().zip(y.to_chw()).map(|(p, q)| a * p + b * q).collect(),
        ).unwrap();
        let lhs = forward_model(&mixed, &psf, pad).unwrap().to_chw();
        let fx = forward_model(&x, &psf, pad).unwrap().to_chw();
        let fy = forward_model(&y, &psf, pad).unwrap().to_chw();
        for ((l, p), q) in lhs.iter().zip(&fx).zip(&fy) {
            prop_assert!((l - (a * p + b * q)).abs() < 1e-9);
        }
    }

    #[test]
    fn pa_mpjpe_ignores_similarity_transforms(
        axis in prop::array::uniform3(-3.0f64..3.0),
        scale in 0.2f64..5.0,
        shift in prop::array::uniform3(-1000.0f64..1000.0),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = points(&mut rng, 14, 600.0);
        let pred: Vec<Point3> = gt.iter().map(|p| p + Vector3::from_fn(|_, _| rng.random_range(-40.0..40.0))).collect();
        let base = pa_mpjpe(&pred, &gt).unwrap();
        let r = Rotation3::new(Vector3::from(axis));
        let t = Vector3::from(shift);
        let moved: Vec<Point3> = pred.iter().map(|p| scale * (r * p) + t).collect();
        prop_assert!((pa_mpjpe(&moved, &gt).unwrap() - base).abs() < 1e-6);
    }

    #[test]
    fn rodrigues_is_a_proper_rotation(axis in prop::array::uniform3(-4.0f64..4.0), tiny in any::<bool>()) {
        let v = Vector3::from(axis) * if tiny { 1e-9 } else { 1.0 };
        let r = rodrigues(&v);
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        prop_assert!((r * v - v).norm() < 1e-12 * (1.0 + v.norm()));
    }

    #[test]
    fn simcc_round_trip_within_half_bin(
        w in 8usize..96, h in 8usize..96, k in 1usize..=3,
        fx in 0.0f64..=1.0, fy in 0.0f64..=1.0, smooth in any::<bool>(), sigma in 0.5f64..8.0,
    ) {
        let p = Vector2::new(fx * (w - 1) as f64, fy * (h - 1) as f64);
        let t = simcc_encode(&[p], w, h, k, if smooth { sigma } else { 0.0 }).unwrap();
        let back = simcc_decode(&t.x, &t.y, k).unwrap()[0];
        let bound = 0.5 / k as f64 + 1e-12;
        prop_assert!((back.x - p.x).abs() <= bound && (back.y - p.y).abs() <= bound);
    }

    #[test]
    fn losses_are_homogeneous_in_the_weights(c in 0.0f64..10.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = LossWeights {
            lambda_2d: rng.random_range(0.1..2.0),
            lambda_3d: rng.random_range(0.1..2.0),
            lambda_para: rng.random_range(0.1..2.0),
            lambda_xy: rng.random_range(0.1..2.0),
            lambda_pi: rng.random_range(0.1..2.0),
            lambda_uv: rng.random_range(0.1..2.0),
        };
        let wc = w.scaled(c);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        let vec = |rng: &mut ChaCha8Rng, n: usize| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();

        let pred = RegressorPrediction { theta: vec(&mut rng, 85), k2d: vec(&mut rng, 28), j3d: vec(&mut rng, 42) };
        let gt = RegressorTarget { theta: Some(vec(&mut rng, 85)), k2d: Some(vec(&mut rng, 28)), j3d: Some(vec(&mut rng, 42)) };
        let (a, b) = (loss_regressor(&pred, &gt, &w).unwrap(), loss_regressor(&pred, &gt, &wc).unwrap());
        prop_assert!(close(b.value, c * a.value));
        for (ga, gb) in a.grad.to_flat().iter().zip(b.grad.to_flat()) {
            prop_assert!(close(gb, c * ga));
        }

        let kps: Vec<_> = (0..4).map(|_| Vector2::new(rng.random_range(0.0..31.0), rng.random_range(0.0..23.0))).collect();
        let target = simcc_encode(&kps, 32, 24, 2, 2.0).unwrap();
        let logits = SimccLogits::zeros_like(&target);
        let logits = logits.with_flat(&vec(&mut rng, logits.to_flat().len()));
        let (sa, sb) = (loss_simcc(&logits, &target, &w).unwrap(), loss_simcc(&logits, &target, &wc).unwrap());
        prop_assert!(close(sb.value, c * sa.value));
        for (ga, gb) in sa.grad.to_flat().iter().zip(sb.grad.to_flat()) {
            prop_assert!(close(gb, c * ga));
        }

        let n = 8 * 8;
        let map = IuvMap {
            height: 8,
            width: 8,
            part_index: (0..n).map(|_| rng.random_range(0..=3u32)).collect(),
            u: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
            v: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
        };
        let shape = IuvPrediction::zeros(3, 8, 8);
        let iuv = shape.with_flat(&vec(&mut rng, shape.to_flat().len()));
        let (ia, ib) = (loss_iuv(&iuv, &map, &w).unwrap(), loss_iuv(&iuv, &map, &wc).unwrap());
        prop_assert!(close(ib.value, c * ia.value));
        for (ga, gb) in ia.grad.to_flat().iter().zip(ib.grad.to_flat()) {
            prop_assert!(close(gb, c * ga));
        }

        let parts = LossParts { regressor: a.value, simcc: sa.value, iuv: ia.value };
        prop_assert!(close(loss_total(&parts), a.value + sa.value + ia.value));
    }
}

#[test]
fn pa_mpjpe_below_mpjpe_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..100 {
        let gt = points(&mut rng, 14, 700.0);
        let pred = if i % 2 == 0 {
            points(&mut rng, 14, 700.0)
        } else {
            gt.iter()
                .map(|p| p + Vector3::from_fn(|_, _| rng.random_range(-80.0..80.0)))
                .collect()
        };
        let full = mpjpe(&pred, &gt, LSP_PELVIS).unwrap();
        let pa = pa_mpjpe(&pred, &gt).unwrap();
        assert!(pa <= full + 1e-9, "pair {i}: pa {pa} > mpjpe {full}");
    }
}

#[test]
fn identical_inputs_score_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gt = points(&mut rng, 14, 500.0);
    assert_eq!(
        format!("{:.2}", mpjpe(&gt, &gt, PelvisAnchor::Joint(0)).unwrap()),
        "0.00"
    );
    assert_eq!(format!("{:.2}", pa_mpjpe(&gt, &gt).unwrap()), "0.00");
}
