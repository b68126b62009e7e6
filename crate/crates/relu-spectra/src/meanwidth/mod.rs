//! Gaussian and spherical mean widths of finite sets and of operators.
//!
//! The Gaussian mean width of a set `K` is the expected supremum of a
//! standard-Gaussian linear functional over `K - K`; its square behaves like
//! an effective dimension. Widths are invariant under convexification, so
//! for finite sets the supremum over `hull(K) - hull(K)` reduces to a
//! closed-form max-minus-min of dot products — which this module computes
//! directly, keeping the equivalent linear program (solved by a small dense
//! simplex) as an independent cross-check route.

pub mod simplex;

use thiserror::Error;

use crate::linalg::{dot, norm2, svd, LinalgError, Matrix};
use crate::rng::Rng;
use crate::spectra::EvalSet;

#[derive(Debug, Error)]
pub enum MeanWidthError {
    #[error("direction of length {found} does not match point dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Simplex(#[from] simplex::SimplexError),
}

/// Finite point set, one point per row.
#[derive(Debug, Clone)]
pub struct PointSet {
    points: Matrix,
}

impl PointSet {
    pub fn new(points: Matrix) -> Self {
        PointSet { points }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MeanWidthError> {
        Ok(PointSet {
            points: Matrix::from_rows(rows)?,
        })
    }

    pub fn from_eval_set(xs: &EvalSet) -> Self {
        PointSet {
            points: xs.points().clone(),
        }
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }
}

/// `c_n = sqrt(2) * Gamma((n+1)/2) / Gamma(n/2)`, the expected norm of a
/// standard Gaussian vector in `R^n`; converts spherical widths to Gaussian
/// ones. Evaluated through log-gamma differences so large `n` cannot
/// overflow.
pub fn c_const(n: usize) -> f64 {
    assert!(n >= 1, "c_const requires n >= 1");
    let half_n = n as f64 / 2.0;
    let ln_ratio = libm::lgamma(half_n + 0.5) - libm::lgamma(half_n);
    (ln_ratio + 0.5 * std::f64::consts::LN_2).exp()
}

/// `sup { <g, x> : x in hull(K) - hull(K) }` in closed form.
///
/// A linear functional over a difference of hulls attains its supremum at
/// vertices, so the value is `max_i <g, k_i> - min_i <g, k_i>`.
pub fn sup_linear_over_hull_diff(k: &PointSet, g: &[f64]) -> Result<f64, MeanWidthError> {
    if g.len() != k.dim() {
        return Err(MeanWidthError::DimensionMismatch {
            expected: k.dim(),
            found: g.len(),
        });
    }
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for i in 0..k.len() {
        let v = dot(k.points.row(i), g);
        max = max.max(v);
        min = min.min(v);
    }
    Ok(max - min)
}

/// Same supremum through the linear program over hull coefficients:
/// maximize `<g, K'a - K'b>` with `sum a = sum b = 1`, `a, b >= 0`.
/// Kept as an independent route for cross-checking the closed form.
pub fn sup_linear_over_hull_diff_lp(k: &PointSet, g: &[f64]) -> Result<f64, MeanWidthError> {
    if g.len() != k.dim() {
        return Err(MeanWidthError::DimensionMismatch {
            expected: k.dim(),
            found: g.len(),
        });
    }
    let count = k.len();
    let kg: Vec<f64> = (0..count).map(|i| dot(k.points.row(i), g)).collect();
    // Variables (a : b); minimize <(-Kg : Kg), (a : b)> and negate.
    let mut c = Vec::with_capacity(2 * count);
    c.extend(kg.iter().map(|v| -v));
    c.extend(kg.iter());
    let mut a = vec![0.0; 2 * 2 * count];
    for j in 0..count {
        a[j] = 1.0; // sum of alpha = 1
        a[2 * count + count + j] = 1.0; // sum of beta = 1
    }
    let b = [1.0, 1.0];
    let sol = simplex::solve(&c, &a, &b, 2, 2 * count)?;
    Ok(-sol.objective)
}

/// Monte Carlo width estimate with its per-sample values retained.
#[derive(Debug, Clone)]
pub struct WidthEstimate {
    /// Arithmetic mean of `per_sample_values`.
    pub value: f64,
    pub num_samples: usize,
    pub per_sample_values: Vec<f64>,
    pub seed: u64,
}

impl WidthEstimate {
    fn from_samples(per_sample_values: Vec<f64>, seed: u64) -> Self {
        let n = per_sample_values.len();
        let value = per_sample_values.iter().sum::<f64>() / n as f64;
        WidthEstimate {
            value,
            num_samples: n,
            per_sample_values,
            seed,
        }
    }

    /// Standard error of the mean, from the per-sample spread.
    pub fn stderr(&self) -> f64 {
        let n = self.num_samples as f64;
        if self.num_samples < 2 {
            return 0.0;
        }
        let var = self
            .per_sample_values
            .iter()
            .map(|v| (v - self.value) * (v - self.value))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }

    /// CSV with per-sample rows followed by a summary row.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sample_index,value,stderr,n,seed\n");
        for (i, v) in self.per_sample_values.iter().enumerate() {
            out.push_str(&format!("{i},{v},,,\n"));
        }
        out.push_str(&format!(
            "mean,{},{},{},{}\n",
            self.value,
            self.stderr(),
            self.num_samples,
            self.seed
        ));
        out
    }
}

/// Gaussian mean width of a finite set, averaged over `num_g` draws.
///
/// Each draw uses the sub-stream `seed ^ sample_index` so samples can be
/// evaluated in any order; the mean is accumulated in index order.
pub fn gmw_set(k: &PointSet, num_g: usize, rng: &Rng) -> Result<WidthEstimate, MeanWidthError> {
    assert!(num_g >= 1 && !k.is_empty());
    let dim = k.dim();
    let mut samples = Vec::with_capacity(num_g);
    for i in 0..num_g {
        let g = rng.derive(i as u64).gaussian_vector(dim);
        samples.push(sup_linear_over_hull_diff(k, &g)?);
    }
    Ok(WidthEstimate::from_samples(samples, rng.seed()))
}

/// Spherical mean width: directions drawn uniformly from the unit sphere.
pub fn smw_set(k: &PointSet, num_u: usize, rng: &Rng) -> Result<WidthEstimate, MeanWidthError> {
    assert!(num_u >= 1 && !k.is_empty());
    let dim = k.dim();
    let mut samples = Vec::with_capacity(num_u);
    for i in 0..num_u {
        let u = rng.derive(i as u64).sphere_vector(dim);
        samples.push(sup_linear_over_hull_diff(k, &u)?);
    }
    Ok(WidthEstimate::from_samples(samples, rng.seed()))
}

/// Gaussian mean width of a linear operator: `2 c_m E ||A' u||` over
/// uniform sphere directions `u` in the output space.
pub fn gmw_operator_linear(
    a: &Matrix,
    num_u: usize,
    rng: &Rng,
) -> Result<WidthEstimate, MeanWidthError> {
    assert!(num_u >= 1);
    let m = a.rows();
    let scale = 2.0 * c_const(m);
    let mut samples = Vec::with_capacity(num_u);
    for i in 0..num_u {
        let u = rng.derive(i as u64).sphere_vector(m);
        // ||A' u||
        let at_u: Vec<f64> = (0..a.cols())
            .map(|j| (0..m).map(|r| a.get(r, j) * u[r]).sum())
            .collect();
        samples.push(scale * norm2(&at_u));
    }
    Ok(WidthEstimate::from_samples(samples, rng.seed()))
}

/// Same estimator routed through the singular values: `2 c_m E ||S' u||`.
/// Equivalent to [`gmw_operator_linear`] by rotation invariance; exposed as
/// the second algebraic route for cross-checks.
pub fn gmw_operator_linear_sigma(
    a: &Matrix,
    num_u: usize,
    rng: &Rng,
) -> Result<WidthEstimate, MeanWidthError> {
    assert!(num_u >= 1);
    let m = a.rows();
    let sigma = svd(a)?.sigma;
    let scale = 2.0 * c_const(m);
    let mut samples = Vec::with_capacity(num_u);
    for i in 0..num_u {
        let u = rng.derive(i as u64).sphere_vector(m);
        let val: f64 = sigma
            .iter()
            .zip(&u)
            .map(|(s, ui)| s * s * ui * ui)
            .sum::<f64>()
            .sqrt();
        samples.push(scale * val);
    }
    Ok(WidthEstimate::from_samples(samples, rng.seed()))
}

/// Width of a general nonnegatively homogeneous operator from a finite
/// sample of its domain: `2 c_m E max_x <u, f(x)>`.
///
/// The supremum over the continuous unit ball is replaced by a max over the
/// sample, so the estimate is biased downward with sparse samples. The
/// origin always belongs to the ball and maps to zero, so it is included
/// implicitly; per-sample values are therefore non-negative.
pub fn gmw_operator_general(
    layer_fn: impl Fn(&[f64]) -> Vec<f64>,
    domain_sample: &PointSet,
    num_u: usize,
    rng: &Rng,
) -> Result<WidthEstimate, MeanWidthError> {
    assert!(num_u >= 1 && !domain_sample.is_empty());
    let images: Vec<Vec<f64>> = (0..domain_sample.len())
        .map(|i| layer_fn(domain_sample.points.row(i)))
        .collect();
    let m = images[0].len();
    let scale = 2.0 * c_const(m);
    let mut samples = Vec::with_capacity(num_u);
    for i in 0..num_u {
        let u = rng.derive(i as u64).sphere_vector(m);
        let best = images
            .iter()
            .map(|y| dot(&u, y))
            .fold(0.0f64, f64::max); // 0 accounts for the origin
        samples.push(scale * best);
    }
    Ok(WidthEstimate::from_samples(samples, rng.seed()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_2_OVER_PI: f64 = 0.7978845608028654;

    #[test]
    fn c_const_closed_forms() {
        assert!((c_const(1) - SQRT_2_OVER_PI).abs() < 1e-10);
        assert!((c_const(2) - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-10);
        assert!((c_const(4) - 0.75 * (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
        let big = c_const(1_000_000);
        assert!(big.is_finite());
        // E||g|| in R^n approaches sqrt(n).
        assert!((big - 1000.0).abs() < 0.1, "{big}");
    }

    #[test]
    fn hull_sup_triangle() {
        let k = PointSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = sup_linear_over_hull_diff(&k, &[2.0, 1.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn hull_sup_singleton_is_zero() {
        let k = PointSet::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(sup_linear_over_hull_diff(&k, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn lp_matches_closed_form_on_random_instances() {
        let mut rng = Rng::new(31);
        for _ in 0..25 {
            let rows: Vec<Vec<f64>> = (0..20).map(|_| rng.gaussian_vector(4)).collect();
            let k = PointSet::from_rows(&rows).unwrap();
            let g = rng.gaussian_vector(4);
            let closed = sup_linear_over_hull_diff(&k, &g).unwrap();
            let lp = sup_linear_over_hull_diff_lp(&k, &g).unwrap();
            assert!((closed - lp).abs() <= 1e-9, "closed {closed} lp {lp}");
        }
    }

    #[test]
    fn gmw_of_plus_minus_e1() {
        // sup over K - K is 2|g_1|, so the width is 2 E|g_1| = 2 sqrt(2/pi).
        let k = PointSet::from_rows(&[vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]]).unwrap();
        let est = gmw_set(&k, 10_000, &Rng::new(5)).unwrap();
        let expect = 2.0 * SQRT_2_OVER_PI;
        assert!(
            (est.value - expect).abs() <= 3.0 * est.stderr(),
            "{} vs {expect} (se {})",
            est.value,
            est.stderr()
        );
    }

    #[test]
    fn gmw_of_origin_is_zero() {
        let k = PointSet::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let est = gmw_set(&k, 100, &Rng::new(1)).unwrap();
        assert_eq!(est.value, 0.0);
        let est = smw_set(&k, 100, &Rng::new(1)).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn gmw_of_dense_sphere_sample_approaches_ball_width() {
        let mut rng = Rng::new(13);
        let rows: Vec<Vec<f64>> = (0..4096).map(|_| rng.sphere_vector(3)).collect();
        let k = PointSet::from_rows(&rows).unwrap();
        let est = gmw_set(&k, 200, &Rng::new(17)).unwrap();
        let expect = 2.0 * c_const(3);
        assert!(
            (est.value - expect).abs() <= 0.05 * expect,
            "{} vs {expect}",
            est.value
        );
    }

    #[test]
    fn smw_of_plus_minus_e1_in_plane() {
        // E|u_1| on the circle is 2/pi, so the width is 4/pi.
        let k = PointSet::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let est = smw_set(&k, 10_000, &Rng::new(3)).unwrap();
        let expect = 4.0 / std::f64::consts::PI;
        assert!((est.value - expect).abs() <= 3.0 * est.stderr());
    }

    #[test]
    fn gaussian_to_spherical_ratio_is_c_n() {
        let mut rng = Rng::new(41);
        let rows: Vec<Vec<f64>> = (0..15).map(|_| rng.gaussian_vector(4)).collect();
        let k = PointSet::from_rows(&rows).unwrap();
        let g = gmw_set(&k, 4000, &Rng::new(7)).unwrap();
        let s = smw_set(&k, 4000, &Rng::new(8)).unwrap();
        let ratio = g.value / s.value;
        // Combined relative error of the two Monte Carlo estimates.
        let rel = (g.stderr() / g.value).hypot(s.stderr() / s.value);
        let expect = c_const(4);
        assert!(
            (ratio - expect).abs() <= 3.0 * rel * expect,
            "ratio {ratio} expect {expect}"
        );
    }

    #[test]
    fn hull_and_translation_invariance() {
        let mut rng = Rng::new(53);
        let rows: Vec<Vec<f64>> = (0..10).map(|_| rng.gaussian_vector(3)).collect();
        let k = PointSet::from_rows(&rows).unwrap();

        // Adding midpoints of pairs leaves every per-sample supremum intact.
        let mut aug = rows.clone();
        for i in 0..5 {
            let a = &rows[2 * i];
            let b = &rows[2 * i + 1];
            aug.push(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect());
        }
        let ka = PointSet::from_rows(&aug).unwrap();
        let e1 = gmw_set(&k, 500, &Rng::new(9)).unwrap();
        let e2 = gmw_set(&ka, 500, &Rng::new(9)).unwrap();
        assert!((e1.value - e2.value).abs() <= 1e-12);

        // Translation cancels in K - K, exactly per sample.
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&[5.0, -3.0, 2.0]).map(|(x, t)| x + t).collect())
            .collect();
        let kt = PointSet::from_rows(&shifted).unwrap();
        let e3 = gmw_set(&kt, 500, &Rng::new(9)).unwrap();
        for (a, b) in e1.per_sample_values.iter().zip(&e3.per_sample_values) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn scaling_homogeneity_per_sample() {
        let mut rng = Rng::new(61);
        let rows: Vec<Vec<f64>> = (0..8).map(|_| rng.gaussian_vector(3)).collect();
        let k = PointSet::from_rows(&rows).unwrap();
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|x| 2.5 * x).collect())
            .collect();
        let ks = PointSet::from_rows(&scaled).unwrap();
        let e1 = gmw_set(&k, 200, &Rng::new(2)).unwrap();
        let e2 = gmw_set(&ks, 200, &Rng::new(2)).unwrap();
        for (a, b) in e1.per_sample_values.iter().zip(&e2.per_sample_values) {
            assert!((2.5 * a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn operator_width_of_zero_and_identity() {
        let zero = Matrix::zeros(3, 3);
        let est = gmw_operator_linear(&zero, 50, &Rng::new(4)).unwrap();
        assert_eq!(est.value, 0.0);

        // Identity: every sample contributes exactly 2 c_n.
        let eye = Matrix::identity(4);
        let est = gmw_operator_linear(&eye, 50, &Rng::new(4)).unwrap();
        let expect = 2.0 * c_const(4);
        assert!((est.value - expect).abs() <= 1e-10);
        for v in &est.per_sample_values {
            assert!((v - expect).abs() <= 1e-10);
        }
    }

    #[test]
    fn operator_width_two_routes_agree() {
        let mut rng = Rng::new(71);
        for trial in 0..5 {
            let a = Matrix::from_fn(5, 3, |_, _| rng.next_gaussian());
            let e1 = gmw_operator_linear(&a, 3000, &Rng::new(100 + trial)).unwrap();
            let e2 = gmw_operator_linear_sigma(&a, 3000, &Rng::new(200 + trial)).unwrap();
            let combined = e1.stderr().hypot(e2.stderr());
            assert!(
                (e1.value - e2.value).abs() <= 3.0 * combined,
                "{} vs {}",
                e1.value,
                e2.value
            );
        }
    }

    #[test]
    fn general_operator_width_matches_linear_on_identity() {
        let sample = crate::spectra::EvalSet::sphere_sample(2, 1024, 19);
        let k = PointSet::from_eval_set(&sample);
        let est = gmw_operator_general(|x| x.to_vec(), &k, 500, &Rng::new(23)).unwrap();
        let expect = 2.0 * c_const(2);
        assert!(
            (est.value - expect).abs() <= 0.05 * expect,
            "{} vs {expect}",
            est.value
        );
    }

    #[test]
    fn general_operator_width_bounded_by_operator_norm() {
        use crate::spectra::{operator_norm_over_set, Activation, EvalSet, ReluLayer};
        let layer = ReluLayer::linear_part(Matrix::identity(2), Activation::Relu).unwrap();
        let sample = EvalSet::sphere_sample(2, 1024, 37);
        let k = PointSet::from_eval_set(&sample);
        let est = gmw_operator_general(
            |x| layer.apply(x).unwrap(),
            &k,
            500,
            &Rng::new(29),
        )
        .unwrap();
        let norm = operator_norm_over_set(&layer, &sample).unwrap();
        assert!(est.value <= 2.0 * c_const(2) * norm + 1e-9);

        let zero_est = gmw_operator_general(|x| vec![0.0; x.len()], &k, 50, &Rng::new(1)).unwrap();
        assert_eq!(zero_est.value, 0.0);
    }

    #[test]
    fn width_csv_has_summary_row() {
        let k = PointSet::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let est = gmw_set(&k, 10, &Rng::new(2)).unwrap();
        let csv = est.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "sample_index,value,stderr,n,seed");
        assert_eq!(lines.len(), 12);
        assert!(lines[11].starts_with("mean,"));
    }
}
