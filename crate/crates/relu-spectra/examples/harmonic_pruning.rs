//! Harmonic pruning end to end, on labels planted by a rank-2 map.
//!
//! Trains a small MLP, then greedily zeroes the least harmful smallest
//! singular value across layers (rebuilding each pruned layer in double
//! form), retraining when a criterion fires. Accuracy holds until some
//! layer drops below the planted rank, then collapses to the guessing
//! baseline as the ranks reach zero.
//!
//! ```bash
//! cargo run --release --example harmonic_pruning
//! ```

use relu_spectra::datasets::{synth_lowrank, Split};
use relu_spectra::nnet::{
    accuracy, train, InitScheme, LayerSpec, MlpModel, ProductDenom, TrainConfig,
};
use relu_spectra::pruning::{harmonic_prune, PruneConfig, StopRule};
use relu_spectra::spectra::Activation;
use relu_spectra::Rng;

fn main() {
    let (dataset, _) = synth_lowrank(3, 8, 2, 2000, 0.0, 51);
    let mut rng = Rng::new(52);
    let model = MlpModel::new(
        dataset.dim(),
        &[
            LayerSpec::single(8, Activation::Relu),
            LayerSpec::single(8, Activation::Relu),
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
            num_steps: 3000,
            batch_size: 64,
            seed: 53,
            checkpoint_every: 3000,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let baseline = accuracy(&run.model, &dataset, Split::Train).unwrap();
    println!(
        "trained baseline: {:.4} train accuracy, {} parameters",
        baseline,
        run.model.param_count()
    );

    let config = PruneConfig {
        retrain_learning_rate: 2e-3,
        stop: StopRule::Exhaustion,
        seed: 54,
        ..PruneConfig::default()
    };
    let state = harmonic_prune(run.model, &dataset, &config).unwrap();

    println!("\n iter  layer  rank  params   train    test   retrained");
    for r in &state.history {
        println!(
            "{:>5}  {:>5}  {:>4}  {:>6}  {:.4}  {:.4}   {}",
            r.iteration,
            r.layer,
            r.rank_after,
            r.param_count,
            r.train_accuracy,
            r.test_accuracy,
            r.retrained
        );
    }
    println!(
        "\nexhausted after {} iterations; final accuracy {:.4} (guessing baseline {:.4})",
        state.iteration,
        accuracy(&state.model, &dataset, Split::Train).unwrap(),
        1.0 / dataset.num_classes() as f64
    );
}
