//! Probe a trained network with correctly vs. incorrectly classified data.
//!
//! Trains an MLP on overlapping blobs, draws equal-size subsets of correct
//! and incorrect samples, and reports per-layer bound-curve maxima and mean
//! widths of the activations as the subsets travel through the network.
//!
//! ```bash
//! cargo run --release --example correct_vs_incorrect
//! ```

use relu_spectra::datasets::{synth_blobs, Split};
use relu_spectra::meanwidth::{gmw_set, PointSet};
use relu_spectra::nnet::{
    accuracy, split_by_correctness, train, InitScheme, LayerSpec, MlpModel, ProductDenom,
    TrainConfig,
};
use relu_spectra::spectra::{
    rsv_upper_bound_curve, Activation, BoundInit, EvalSet, OptimizerConfig, ReluLayer,
};
use relu_spectra::{Matrix, Rng};

fn main() {
    // Overlapping blobs keep a healthy pool of misclassified samples.
    let dataset = synth_blobs(8, 32, 300, 1.3, 1001);
    let mut rng = Rng::new(2001);
    let model = MlpModel::new(
        dataset.dim(),
        &[
            LayerSpec::single(20, Activation::Relu),
            LayerSpec::single(20, Activation::Relu),
            LayerSpec::single(20, Activation::Relu),
        ],
        dataset.num_classes(),
        InitScheme::Glorot,
        ProductDenom::InPlusIn,
        &mut rng,
    )
    .unwrap();
    let run = train(
        model,
        &dataset,
        &TrainConfig {
            num_steps: 5000,
            batch_size: 32,
            learning_rate: 2e-3,
            seed: 3001,
            checkpoint_every: 5000,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let model = run.model;
    println!(
        "train accuracy {:.3}, test accuracy {:.3}",
        accuracy(&model, &dataset, Split::Train).unwrap(),
        accuracy(&model, &dataset, Split::Test).unwrap()
    );

    let mut srng = Rng::new(4001);
    let (correct, incorrect) =
        split_by_correctness(&model, &dataset, Split::Train, 128, &mut srng).unwrap();
    println!("subsets: {} correct / {} incorrect samples\n", correct.len(), incorrect.len());

    let propagate = |points: &Matrix, depth: usize| -> Matrix {
        if depth == 0 {
            points.clone()
        } else {
            model.forward(points).unwrap().activations[depth - 1].clone()
        }
    };

    println!("max bound of each layer's curve (inputs propagated through the layers above):");
    println!(" layer   correct    incorrect");
    for (idx, layer) in model.layers.iter().enumerate() {
        let relu_layer = ReluLayer::new(
            layer.effective_weights(),
            layer.bias().to_vec(),
            layer.activation(),
        )
        .unwrap();
        let mut row = Vec::new();
        for subset in [&correct, &incorrect] {
            let eval = EvalSet::from_points(
                propagate(subset.points(), idx),
                dataset.name(),
                "probe",
            );
            let curve = rsv_upper_bound_curve(
                &relu_layer,
                &eval,
                &OptimizerConfig {
                    steps: 300,
                    learning_rate: 1e-3,
                    batch_size: None,
                    seed: 5001 + idx as u64,
                    init: BoundInit::SvdWarmStart,
                },
            )
            .unwrap();
            row.push(curve.monotone_bounds.iter().cloned().fold(0.0f64, f64::max));
        }
        println!("   {idx}   {:>8.3}   {:>8.3}", row[0], row[1]);
    }

    println!("\ngaussian mean width of the propagated subsets (depth 0 = inputs):");
    println!(" depth   correct    incorrect");
    for depth in 0..=model.layers.len() {
        let wc = gmw_set(
            &PointSet::new(propagate(correct.points(), depth)),
            100,
            &Rng::new(6001 + depth as u64),
        )
        .unwrap();
        let wi = gmw_set(
            &PointSet::new(propagate(incorrect.points(), depth)),
            100,
            &Rng::new(7001 + depth as u64),
        )
        .unwrap();
        println!("   {depth}   {:>8.3}   {:>8.3}", wc.value, wi.value);
    }
}
