//! Train a small MLP on synthetic blobs and round-trip a checkpoint.
//!
//! ```bash
//! cargo run --release --example train_mlp
//! ```

use relu_spectra::datasets::{synth_blobs, Split};
use relu_spectra::nnet::{
    accuracy, checkpoint_from_json, checkpoint_to_json, loss_only, train, CheckpointMeta,
    InitScheme, LayerSpec, MlpModel, ProductDenom, TrainConfig,
};
use relu_spectra::spectra::Activation;
use relu_spectra::Rng;

fn main() {
    let dataset = synth_blobs(4, 8, 250, 3.0, 42);
    println!(
        "dataset: {} samples, {} features, {} classes",
        dataset.len(),
        dataset.dim(),
        dataset.num_classes()
    );

    let mut rng = Rng::new(43);
    let model = MlpModel::new(
        dataset.dim(),
        &[
            LayerSpec::single(16, Activation::Relu),
            LayerSpec::single(16, Activation::Relu),
        ],
        dataset.num_classes(),
        InitScheme::Glorot,
        ProductDenom::InPlusIn,
        &mut rng,
    )
    .unwrap();
    println!("model: {} parameters", model.param_count());

    let config = TrainConfig {
        num_steps: 2000,
        batch_size: 32,
        checkpoint_every: 500,
        seed: 44,
        ..TrainConfig::default()
    };
    let run = train(model, &dataset, &config).unwrap();

    println!("\n step    loss     train    test");
    let features = dataset.features_of(Split::Train);
    let labels = dataset.labels_of(Split::Train);
    for cp in &run.checkpoints {
        println!(
            "{:>5}   {:.4}   {:.4}   {:.4}",
            cp.step,
            loss_only(&cp.model, &features, &labels).unwrap(),
            accuracy(&cp.model, &dataset, Split::Train).unwrap(),
            accuracy(&cp.model, &dataset, Split::Test).unwrap()
        );
    }

    // Checkpoints reload bit-exactly.
    let json = checkpoint_to_json(&run.model, CheckpointMeta { seed: 44, step: 2000 });
    let (reloaded, _) = checkpoint_from_json(&json).unwrap();
    assert_eq!(run.model.flatten_params(), reloaded.flatten_params());
    println!("\ncheckpoint JSON round-trip: bit-exact ({} bytes)", json.len());
}
