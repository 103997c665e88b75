//! Variance ratios on a long path against exact expectations under the
//! stationary Poisson law of the Poisson-INAR(1) process.

use pvqmle_core::inference::variance_ratio_point;
use pvqmle_core::math::ln_factorial;

type M2 = [[f64; 2]; 2];

fn inv(m: M2) -> M2 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

fn mul(a: M2, b: M2) -> M2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn add_outer(m: &mut M2, w: f64, u: [f64; 2], v: [f64; 2]) {
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] += w * u[i] * v[j];
        }
    }
}

/// Population `log10` ratios for `(a, ω)` from conditional cumulants of
/// `Bin(x, a) + Poisson(ω)` and the stationary `Poisson(ω/(1-a))` law.
fn exact(a: f64, omega: f64) -> (f64, f64) {
    let mean = omega / (1.0 - a);
    let (mut h_u, mut h_r, mut i_r) = ([[0.0; 2]; 2], [[0.0; 2]; 2], [[0.0; 2]; 2]);
    for x in 0..400u64 {
        let xf = x as f64;
        let px = (-mean + xf * mean.ln() - ln_factorial(x)).exp();
        let nu = omega + a * (1.0 - a) * xf;
        let dl = [1.0, xf];
        let dn = [1.0, (1.0 - 2.0 * a) * xf];
        let k3 = xf * a * (1.0 - a) * (1.0 - 2.0 * a) + omega;
        let k4 = xf * a * (1.0 - a) * (1.0 - 6.0 * a * (1.0 - a)) + omega;
        add_outer(&mut h_u, px / nu, dl, dl);
        add_outer(&mut h_r, px / nu, dl, dl);
        add_outer(&mut h_r, px / (2.0 * nu * nu), dn, dn);
        add_outer(&mut i_r, px / nu, dl, dl);
        add_outer(&mut i_r, px * k3 / (2.0 * nu.powi(3)), dl, dn);
        add_outer(&mut i_r, px * k3 / (2.0 * nu.powi(3)), dn, dl);
        add_outer(&mut i_r, px * (k4 + 2.0 * nu * nu) / (4.0 * nu.powi(4)), dn, dn);
    }
    let unrestricted = inv(h_u);
    let hr = inv(h_r);
    let restricted = mul(mul(hr, i_r), hr);
    (
        (unrestricted[1][1] / restricted[1][1]).log10(),
        (unrestricted[0][0] / restricted[0][0]).log10(),
    )
}

#[test]
fn long_path_matches_exact_expectations() {
    for (i, (a, omega)) in [(0.85, 3.0), (0.5, 1.0), (0.05, 0.25)].into_iter().enumerate() {
        let (ea, eo) = exact(a, omega);
        let v = variance_ratio_point(a, omega, 400_000, 70 + i as u64).unwrap();
        assert!((v.log10_ratio_a - ea).abs() < 0.02, "({a}, {omega}) a: {} vs {ea}", v.log10_ratio_a);
        assert!((v.log10_ratio_omega - eo).abs() < 0.02, "({a}, {omega}) omega: {} vs {eo}", v.log10_ratio_omega);
    }
}

#[test]
fn sign_structure() {
    let (high_a, high_o) = exact(0.85, 3.0);
    assert!(high_a > 0.5 && high_o > 0.5);
    let (low_a, low_o) = exact(0.05, 0.25);
    assert!(low_a < 0.0 && low_o < 0.0);
}
