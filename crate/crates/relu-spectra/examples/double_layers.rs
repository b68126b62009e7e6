//! Double layers: rank-factorized weights and their initialization.
//!
//! A double layer `relu(WMx + b)` caps the weight rank at the inner
//! dimension and saves parameters once `k < mn/(m+n)`. The product
//! initialization draws factor entries as products of `p` normal samples,
//! calibrated so the product matrix hits the usual variance target.
//!
//! ```bash
//! cargo run --release --example double_layers
//! ```

use relu_spectra::linalg::singular_value_curve;
use relu_spectra::nnet::{
    double_p_product_init, InitScheme, LayerSpec, MlpModel, ProductDenom,
};
use relu_spectra::spectra::Activation;
use relu_spectra::Rng;

fn main() {
    // Variance of the product-matrix entries vs. the 4/(n+n) target.
    let (m, n, k) = (50usize, 50usize, 10usize);
    let target = 4.0 / (n + n) as f64;
    println!("product init, {m}x{k} * {k}x{n}, target Var((WM)_ij) = {target}");
    for p in [1usize, 2, 3] {
        let mut rng = Rng::new(100 + p as u64);
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..200 {
            let (w, mm, _) = double_p_product_init(m, n, k, p, ProductDenom::InPlusIn, &mut rng);
            let prod = w.matmul(&mm);
            acc += prod.data().iter().map(|x| x * x).sum::<f64>();
            count += prod.data().len();
        }
        println!("  p = {p}: empirical variance {:.5}", acc / count as f64);
    }

    // The rank cap is structural, not statistical.
    let mut rng = Rng::new(9);
    let (w, mm, _) = double_p_product_init(8, 8, 3, 2, ProductDenom::InPlusIn, &mut rng);
    let sigma = singular_value_curve(&w.matmul(&mm)).unwrap();
    let significant = sigma.iter().filter(|s| **s > 1e-9).count();
    println!("\n8x8 layer with inner dimension 3: {significant} nonzero singular values");

    // Parameter accounting for the 3072 -> 100/100/100 -> 10 architectures.
    let mut rng = Rng::new(10);
    let double = MlpModel::new(
        3072,
        &[
            LayerSpec::double(100, 18, Activation::Relu),
            LayerSpec::double(100, 8, Activation::Relu),
            LayerSpec::double(100, 6, Activation::Relu),
        ],
        10,
        InitScheme::DoubleProduct { p: 1 },
        ProductDenom::InPlusIn,
        &mut rng,
    )
    .unwrap();
    let single = MlpModel::new(
        3072,
        &[
            LayerSpec::single(100, Activation::Relu),
            LayerSpec::single(100, Activation::Relu),
            LayerSpec::single(100, Activation::Relu),
        ],
        10,
        InitScheme::Glorot,
        ProductDenom::InPlusIn,
        &mut rng,
    )
    .unwrap();
    println!(
        "\nwidth-100 network, ranks 18/8/6: {} parameters (plain layers: {})",
        double.param_count(),
        single.param_count()
    );

    // A double layer wins exactly below the mn/(m+n) threshold.
    let (m, n) = (12usize, 9usize);
    println!("\nparameter counts for a {m}x{n} layer (threshold mn/(m+n) = {:.2}):", (m * n) as f64 / (m + n) as f64);
    for k in 1..=9usize {
        let single = m * n + m;
        let double = k * (m + n) + m;
        println!(
            "  k = {k}: double {double:>4} vs single {single:>4}  {}",
            if double < single { "smaller" } else { "not smaller" }
        );
    }
}
