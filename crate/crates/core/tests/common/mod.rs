//! Shared oracles for integration tests: Gauss-Hermite quadrature and a
//! central finite-difference gradient. Both are independent of the library's
//! own evaluation paths.

/// Nodes and weights of n-point Gauss-Hermite quadrature
/// (`integral of f(x) exp(-x^2) dx ~= sum w_i f(x_i)`), by Newton iteration
/// on the Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const EPS: f64 = 3e-14;
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= EPS {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    // Nodes come out descending on the first half; callers only need the
    // (node, weight) pairing, but sanity-check the rule before handing it out.
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let total: f64 = weights.iter().sum();
    assert!(
        (total - sqrt_pi).abs() < 1e-10,
        "GH weights sum {total}, expected sqrt(pi)"
    );
    let second_moment: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(x, w)| w * x * x)
        .sum();
    assert!(
        (second_moment - sqrt_pi / 2.0).abs() < 1e-9,
        "GH second moment {second_moment}"
    );
    (nodes, weights)
}

/// Central finite-difference gradient with per-coordinate steps
/// `h = scale * (1 + |x_k|)`.
pub fn finite_difference_gradient<F>(f: F, x: &[f64], scale: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut grad = vec![0.0; x.len()];
    let mut point = x.to_vec();
    for k in 0..x.len() {
        let h = scale * (1.0 + x[k].abs());
        point[k] = x[k] + h;
        let up = f(&point);
        point[k] = x[k] - h;
        let down = f(&point);
        point[k] = x[k];
        grad[k] = (up - down) / (2.0 * h);
    }
    grad
}
