//! Property tests for the spec-level invariants that hold for arbitrary
//! inputs, not just the frozen fixtures.

use proptest::prelude::*;

use relu_spectra::datasets::{load_csv_labeled, load_idx, Split};
use relu_spectra::linalg::{svd, Matrix};
use relu_spectra::meanwidth::{
    gmw_set, sup_linear_over_hull_diff, sup_linear_over_hull_diff_lp, PointSet,
};
use relu_spectra::nnet::{
    checkpoint_from_json, checkpoint_to_json, CheckpointMeta, InitScheme, LayerSpec, MlpModel,
    ProductDenom,
};
use relu_spectra::spectra::{lipschitz_gap_with, Activation, ReluLayer};
use relu_spectra::Rng;

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-100.0..100.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relu_never_expands_distances(
        x in finite_vec(6),
        y in finite_vec(6),
        slope in 0.01..0.99f64,
    ) {
        let (lhs, rhs) = lipschitz_gap_with(Activation::Relu, &x, &y);
        prop_assert!(lhs <= rhs + 1e-12);
        let (lhs, rhs) = lipschitz_gap_with(Activation::LeakyRelu(slope), &x, &y);
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn bias_free_layers_are_nonnegatively_homogeneous(
        seed in any::<u64>(),
        alpha in 0.0..20.0f64,
    ) {
        let mut rng = Rng::new(seed);
        let a = Matrix::from_fn(4, 3, |_, _| rng.next_gaussian());
        let layer = ReluLayer::linear_part(a, Activation::Relu).unwrap();
        let x = rng.gaussian_vector(3);
        let scaled: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let lhs = layer.apply(&scaled).unwrap();
        let rhs = layer.apply(&x).unwrap();
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - alpha * r).abs() <= 1e-9 * (1.0 + alpha));
        }
    }

    #[test]
    fn hull_sup_closed_form_equals_lp(
        rows in proptest::collection::vec(finite_vec(3), 1..12),
        g in finite_vec(3),
    ) {
        let k = PointSet::from_rows(&rows).unwrap();
        let closed = sup_linear_over_hull_diff(&k, &g).unwrap();
        let lp = sup_linear_over_hull_diff_lp(&k, &g).unwrap();
        // Equality scales with the magnitude of the dot products involved.
        let scale = 1.0 + closed.abs();
        prop_assert!((closed - lp).abs() <= 1e-9 * scale);
    }

    #[test]
    fn width_is_translation_invariant_per_sample(
        rows in proptest::collection::vec(finite_vec(3), 1..10),
        shift in finite_vec(3),
        seed in any::<u64>(),
    ) {
        let k = PointSet::from_rows(&rows).unwrap();
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&shift).map(|(a, b)| a + b).collect())
            .collect();
        let kt = PointSet::from_rows(&shifted).unwrap();
        let e1 = gmw_set(&k, 20, &Rng::new(seed)).unwrap();
        let e2 = gmw_set(&kt, 20, &Rng::new(seed)).unwrap();
        for (a, b) in e1.per_sample_values.iter().zip(&e2.per_sample_values) {
            prop_assert!((a - b).abs() <= 1e-7 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn svd_reconstructs_arbitrary_small_matrices(
        rows in 1..6usize,
        cols in 1..6usize,
        seed in any::<u64>(),
        scale in 0.0..100.0f64,
    ) {
        let mut rng = Rng::new(seed);
        let a = Matrix::from_fn(rows, cols, |_, _| scale * rng.next_gaussian());
        let dec = svd(&a).unwrap();
        let tol = 1e-8 * dec.sigma.first().copied().unwrap_or(0.0).max(1.0);
        prop_assert!(a.sub(&dec.reconstruct()).max_abs() <= tol);
        for w in dec.sigma.windows(2) {
            prop_assert!(w[0] >= w[1] && w[1] >= 0.0);
        }
        let r = rows.min(cols);
        let gram = dec.u.matmul_tn(&dec.u);
        prop_assert!(gram.sub(&Matrix::identity(r)).max_abs() <= 1e-8);
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(
        seed in any::<u64>(),
        hidden in 1..6usize,
        rank in 1..4usize,
    ) {
        let mut rng = Rng::new(seed);
        let rank = rank.min(hidden);
        let model = MlpModel::new(
            4,
            &[
                LayerSpec::single(hidden, Activation::Relu),
                LayerSpec::double(hidden, rank, Activation::Relu),
            ],
            3,
            InitScheme::DoubleProduct { p: 2 },
            ProductDenom::InPlusIn,
            &mut rng,
        )
        .unwrap();
        let json = checkpoint_to_json(&model, CheckpointMeta { seed, step: 7 });
        let (reloaded, meta) = checkpoint_from_json(&json).unwrap();
        prop_assert_eq!(meta.seed, seed);
        let a = model.flatten_params();
        let b = reloaded.flatten_params();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn idx_round_trip_preserves_bytes(
        pixels in proptest::collection::vec(any::<u8>(), 8),
        labels in proptest::collection::vec(0u8..5, 2),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("img.idx");
        let lab_path = dir.path().join("lab.idx");
        let mut img = Vec::new();
        img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&pixels);
        let mut lab = Vec::new();
        lab.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        lab.extend_from_slice(&2u32.to_be_bytes());
        lab.extend_from_slice(&labels);
        std::fs::write(&img_path, &img).unwrap();
        std::fs::write(&lab_path, &lab).unwrap();

        let ds = load_idx(&img_path, &lab_path).unwrap();
        prop_assert_eq!(ds.len(), 2);
        for (i, &b) in pixels.iter().enumerate() {
            let expect = f64::from(b) / 255.0;
            prop_assert_eq!(ds.features().data()[i].to_bits(), expect.to_bits());
        }
        let got: Vec<u8> = ds.labels().iter().map(|&l| l as u8).collect();
        prop_assert_eq!(got, labels);
    }

    #[test]
    fn csv_round_trip_is_bit_exact(
        values in proptest::collection::vec(-1e6..1e6f64, 4),
        labels in proptest::collection::vec(0usize..3, 2),
    ) {
        // Shortest-round-trip decimal formatting reloads to the same bits.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut text = String::from("f0,f1,label\n");
        for (i, chunk) in values.chunks(2).enumerate() {
            text.push_str(&format!("{},{},{}\n", chunk[0], chunk[1], labels[i]));
        }
        std::fs::write(&path, &text).unwrap();
        let ds = load_csv_labeled(&path, 2, 3, 0).unwrap();
        prop_assert_eq!(ds.len(), 2);
        for (i, v) in values.iter().enumerate() {
            let got = ds.features().data()[i];
            prop_assert_eq!(got.to_bits(), v.to_bits());
        }
        let _ = ds.indices_of(Split::Train);
    }
}
