//! Mean widths of operators, linear and nonlinear.
//!
//! For a matrix the width has two equivalent Monte Carlo routes (through
//! `A'u` and through the singular values); for a general nonnegatively
//! homogeneous map it is estimated from a finite domain sample and bounded
//! by the operator norm.
//!
//! ```bash
//! cargo run --release --example operator_width
//! ```

use relu_spectra::meanwidth::{
    c_const, gmw_operator_general, gmw_operator_linear, gmw_operator_linear_sigma, PointSet,
};
use relu_spectra::spectra::{operator_norm_over_set, Activation, EvalSet, ReluLayer};
use relu_spectra::{Matrix, Rng};

fn main() {
    // Identity: every direction contributes exactly 2 c_n.
    let eye = Matrix::identity(4);
    let est = gmw_operator_linear(&eye, 100, &Rng::new(1)).unwrap();
    println!(
        "width of the identity on R^4: {:.6}  (2 c_4 = {:.6})",
        est.value,
        2.0 * c_const(4)
    );

    // Random rectangular operators: the two routes agree within Monte Carlo
    // error.
    let mut rng = Rng::new(2);
    println!("\nrandom 5x3 operators, two estimators:");
    println!("  via A'u        via sigma      |z|");
    for trial in 0..5u64 {
        let a = Matrix::from_fn(5, 3, |_, _| rng.next_gaussian());
        let e1 = gmw_operator_linear(&a, 3000, &Rng::new(10 + trial)).unwrap();
        let e2 = gmw_operator_linear_sigma(&a, 3000, &Rng::new(20 + trial)).unwrap();
        let z = (e1.value - e2.value).abs() / e1.stderr().hypot(e2.stderr());
        println!("  {:<12.6}   {:<12.6}   {z:.2}", e1.value, e2.value);
    }

    // A ReLU layer as a general operator: estimate from a dense sample of
    // the unit sphere, and compare with the operator-norm bound.
    let layer = ReluLayer::linear_part(Matrix::identity(2), Activation::Relu).unwrap();
    let sample = EvalSet::sphere_sample(2, 1024, 5);
    let domain = PointSet::from_eval_set(&sample);
    let est = gmw_operator_general(|x| layer.apply(x).unwrap(), &domain, 1000, &Rng::new(6))
        .unwrap();
    let norm = operator_norm_over_set(&layer, &sample).unwrap();
    println!(
        "\nwidth of relu(I_2 .): {:.4}  <=  2 c_2 ||.||_* = {:.4}",
        est.value,
        2.0 * c_const(2) * norm
    );
}
