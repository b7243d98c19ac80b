//! Gauss-Hermite quadrature (Golub-Welsch).

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    /// Weights for `∫ e^{−x²} f(x) dx`.
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "at least one node");
        let mut j = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64 / 2.0).sqrt();
            j[(k - 1, k)] = b;
            j[(k, k - 1)] = b;
        }
        let eig = j.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// `E[f(X)]` for `X ~ N(0, σ²)`.
    pub fn gaussian_mean(&self, sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
        let s = std::f64::consts::SQRT_2 * sigma;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(s * x))
            .sum::<f64>()
            / std::f64::consts::PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let gh = GaussHermite::new(20);
        assert!((gh.gaussian_mean(1.3, |_| 1.0) - 1.0).abs() < 1e-13);
        assert!((gh.gaussian_mean(1.3, |x| x * x) - 1.69).abs() < 1e-12);
        assert!((gh.gaussian_mean(0.7, |x| x.powi(4)) - 3.0 * 0.7f64.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_exponential_moment() {
        let gh = GaussHermite::new(32);
        let (z, s): (f64, f64) = (1.7, 0.3);
        let exact = 1.0 / (1.0 + 2.0 * z * s * s).sqrt();
        assert!((gh.gaussian_mean(s, |x| (-z * x * x).exp()) - exact).abs() < 1e-14);
    }
}
