//! Gauss–Hermite quadrature for standard-Gaussian expectations.

/// Nodes and weights for ∫ e^{-x²} f(x) dx ≈ Σ w_i f(x_i).
///
/// Newton iteration on the orthonormal Hermite recurrence; weights are the
/// Christoffel numbers. Nodes come out sorted ascending.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;

    let mut z = 0.0f64;
    for i in 0..m {
        // Initial guesses for roots in descending order (largest first).
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Orthonormal recurrence: p_{j}(z), j = 0..n.
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// E_{g~N(0,1)}[f(g)] by Gauss–Hermite with `n` nodes.
pub fn gaussian_expect<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let (nodes, weights) = gauss_hermite(n);
    let scale = std::f64::consts::PI.sqrt();
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        acc += w * f(std::f64::consts::SQRT_2 * x);
    }
    acc / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        for n in [64, 128] {
            assert!((gaussian_expect(|_| 1.0, n) - 1.0).abs() < 1e-13);
            assert!(gaussian_expect(|g| g, n).abs() < 1e-13);
            assert!((gaussian_expect(|g| g * g, n) - 1.0).abs() < 1e-12);
            assert!((gaussian_expect(|g| g.powi(4), n) - 3.0).abs() < 1e-11);
            assert!((gaussian_expect(|g| g.powi(6), n) - 15.0).abs() < 1e-10);
        }
    }

    #[test]
    fn lognormal_mean() {
        // E[e^g] = e^{1/2}.
        let got = gaussian_expect(|g| g.exp(), 96);
        assert!((got - 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn nodes_are_symmetric_and_weights_positive() {
        let (x, w) = gauss_hermite(64);
        for i in 0..64 {
            assert!((x[i] + x[63 - i]).abs() < 1e-12);
            assert!(w[i] > 0.0);
        }
        // total weight is √π
        let total: f64 = w.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }
}
