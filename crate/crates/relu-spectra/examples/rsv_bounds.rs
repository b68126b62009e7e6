//! Upper bounds on the singular values of ReLU layers vs. the linear curve.
//!
//! Draws 4x4 weight matrices from a few distributions, computes the
//! per-rank bound curve of `relu(Ax)` over a dense sphere sample, and
//! prints it next to the linear singular values. The nonlinearity buys a
//! visible drop, especially at low ranks.
//!
//! ```bash
//! cargo run --release --example rsv_bounds
//! ```

use relu_spectra::spectra::{
    rsv_upper_bound_curve, Activation, BoundInit, EvalSet, OptimizerConfig, ReluLayer,
};
use relu_spectra::{Matrix, Rng};

fn main() {
    let n = 4;
    let xs = EvalSet::sphere_sample(n, EvalSet::default_sphere_count(n), 7);
    let config = OptimizerConfig {
        steps: 1000,
        learning_rate: 1e-3,
        batch_size: None,
        seed: 11,
        init: BoundInit::SvdWarmStart,
    };

    let mut rng = Rng::new(3);
    let cases: Vec<(&str, Matrix)> = vec![
        (
            "normal(0, 1)",
            Matrix::from_fn(n, n, |_, _| rng.next_gaussian()),
        ),
        (
            "normal(0, 100)",
            Matrix::from_fn(n, n, |_, _| 10.0 * rng.next_gaussian()),
        ),
        (
            "uniform(0, 1)",
            Matrix::from_fn(n, n, |_, _| rng.next_f64()),
        ),
        (
            "uniform(-1, 1)",
            Matrix::from_fn(n, n, |_, _| 2.0 * rng.next_f64() - 1.0),
        ),
    ];

    for (label, a) in cases {
        let layer = ReluLayer::linear_part(a, Activation::Relu).unwrap();
        let curve = rsv_upper_bound_curve(&layer, &xs, &config).unwrap();
        println!("weights ~ {label}");
        println!("  k   linear sigma    bound      drop");
        for (i, &k) in curve.k_values.iter().enumerate() {
            let sigma = curve.linear_curve[i];
            let bound = curve.monotone_bounds[i];
            println!(
                "  {k}   {sigma:>12.6}   {bound:>8.6}   {:>5.1}%",
                100.0 * (sigma - bound) / sigma.max(1e-12)
            );
        }
        println!();
    }
}
