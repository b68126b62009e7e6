//! Gaussian and spherical mean widths of finite point sets.
//!
//! Shows the Monte Carlo estimator against analytic values, the closed-form
//! hull supremum against the simplex LP, and the Gaussian/spherical ratio
//! against the gamma-ratio constant.
//!
//! ```bash
//! cargo run --release --example mean_width
//! ```

use relu_spectra::meanwidth::{
    c_const, gmw_set, smw_set, sup_linear_over_hull_diff, sup_linear_over_hull_diff_lp, PointSet,
};
use relu_spectra::Rng;

fn main() {
    // Two antipodal points: the width is 2 E|g_1| = 2 sqrt(2/pi).
    let pair = PointSet::from_rows(&[vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]]).unwrap();
    let est = gmw_set(&pair, 10_000, &Rng::new(1)).unwrap();
    let analytic = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
    println!(
        "gaussian width of {{e1, -e1}}: {:.4} +- {:.4}  (analytic {:.4})",
        est.value,
        est.stderr(),
        analytic
    );

    // A dense sphere sample approaches the width of the ball, 2 c_n.
    let mut rng = Rng::new(2);
    let sphere = PointSet::from_rows(
        &(0..4096).map(|_| rng.sphere_vector(3)).collect::<Vec<_>>(),
    )
    .unwrap();
    let est = gmw_set(&sphere, 200, &Rng::new(3)).unwrap();
    println!(
        "gaussian width of a sphere sample in R^3: {:.4}  (ball width {:.4})",
        est.value,
        2.0 * c_const(3)
    );

    // Gaussian vs spherical widths differ by exactly c_n in expectation.
    let mut rng = Rng::new(4);
    let cloud = PointSet::from_rows(&(0..30).map(|_| rng.gaussian_vector(4)).collect::<Vec<_>>())
        .unwrap();
    let g = gmw_set(&cloud, 4000, &Rng::new(5)).unwrap();
    let s = smw_set(&cloud, 4000, &Rng::new(6)).unwrap();
    println!(
        "gaussian/spherical ratio on a random cloud: {:.4}  (c_4 = {:.4})",
        g.value / s.value,
        c_const(4)
    );

    // The closed form max-min equals the simplex LP over hull coefficients.
    let mut rng = Rng::new(7);
    let k = PointSet::from_rows(&(0..20).map(|_| rng.gaussian_vector(4)).collect::<Vec<_>>())
        .unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let dir = rng.gaussian_vector(4);
        let closed = sup_linear_over_hull_diff(&k, &dir).unwrap();
        let lp = sup_linear_over_hull_diff_lp(&k, &dir).unwrap();
        worst = worst.max((closed - lp).abs());
    }
    println!("closed form vs simplex LP, max |difference| over 10 directions: {worst:.2e}");

    // The constant itself, small and large.
    for n in [1usize, 2, 3, 4, 100, 1_000_000] {
        println!("c_{n} = {:.10}", c_const(n));
    }
}
