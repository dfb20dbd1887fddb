use std::f64::consts::PI;

use proptest::prelude::*;
use qipf::wavefunction::{
    hermite_normalized, hermite_sequence, mode_wavefunction, psi_eval, ModeSpec,
};
use qipf::{ipf, KernelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Explicit physicists' Hermite polynomials of orders 0 through 6, as
/// coefficient lists in ascending powers.
const EXPLICIT: [&[f64]; 7] = [
    &[1.0],
    &[0.0, 2.0],
    &[-2.0, 0.0, 4.0],
    &[0.0, -12.0, 0.0, 8.0],
    &[12.0, 0.0, -48.0, 0.0, 16.0],
    &[0.0, 120.0, 0.0, -160.0, 0.0, 32.0],
    &[-120.0, 0.0, 720.0, 0.0, -480.0, 0.0, 64.0],
];

/// Value and the sum of absolute term magnitudes, which sets the scale at
/// which two evaluations of the polynomial can be compared.
fn explicit(n: usize, y: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut scale = 0.0;
    for (p, c) in EXPLICIT[n].iter().enumerate() {
        let t = c * y.powi(p as i32);
        v += t;
        scale += t.abs();
    }
    (v, scale)
}

#[test]
fn recurrence_matches_explicit_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let y: f64 = rng.random_range(-3.0..3.0);
        let h = hermite_sequence(y, 6);
        for n in 0..=6 {
            let (v, scale) = explicit(n, y);
            assert!(
                (h[n] - v).abs() <= 1e-9 * scale,
                "H{n}({y}) = {} vs {v}",
                h[n]
            );
        }
    }
}

/// n-th derivative of `f` by the central difference stencil, refined with
/// Richardson extrapolation over `levels` halvings of the step.
fn nth_derivative(f: impl Fn(f64) -> f64, y: f64, n: usize, h0: f64, levels: usize) -> f64 {
    let stencil = |h: f64| {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=n {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * f(y + (n as f64 / 2.0 - j as f64) * h);
            binom = binom * (n - j) as f64 / (j + 1) as f64;
        }
        acc / h.powi(n as i32)
    };
    let mut table: Vec<f64> = (0..=levels)
        .map(|j| stencil(h0 / 2f64.powi(j as i32)))
        .collect();
    let mut factor = 4.0;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        factor *= 4.0;
    }
    table[0]
}

#[test]
fn recurrence_matches_generating_function() {
    let g = |y: f64| (-y * y).exp();
    for n in 0..=8 {
        for y in [-2.0f64, -1.0, 0.0, 1.0, 2.0] {
            let fd = if n % 2 == 0 { 1.0 } else { -1.0 }
                * (y * y).exp()
                * nth_derivative(g, y, n, 0.4, 3);
            let h = hermite_sequence(y, n)[n];
            let tol = 1e-3 * h.abs().max(1.0);
            assert!((fd - h).abs() <= tol, "n={n} y={y}: {fd} vs {h}");
        }
    }
}

#[test]
fn normalized_order_zero() {
    let v = hermite_normalized(&hermite_sequence(0.37, 0), &[0]).unwrap();
    assert!((v[0] - PI.powf(-0.25)).abs() < 1e-15);
    assert!((v[0] - 0.75113).abs() < 1e-5);
}

#[test]
fn normalized_gram_matrix_is_identity() {
    let orders: Vec<usize> = (0..=10).map(|j| 2 * j).collect();
    let step = 1e-3;
    let points = (24.0 / step) as usize;
    let mut gram = vec![vec![0.0; orders.len()]; orders.len()];
    for p in 0..=points {
        let y = -12.0 + p as f64 * step;
        let w = if p == 0 || p == points { 0.5 } else { 1.0 } * step * (-y * y).exp();
        let all = hermite_sequence(y, 20);
        let even: Vec<f64> = orders.iter().map(|&n| all[n]).collect();
        let h = hermite_normalized(&even, &orders).unwrap();
        for a in 0..orders.len() {
            for b in 0..orders.len() {
                gram[a][b] += w * h[a] * h[b];
            }
        }
    }
    for a in 0..orders.len() {
        for b in 0..orders.len() {
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!(
                (gram[a][b] - expect).abs() < 1e-6,
                "G[{a}][{b}] = {}",
                gram[a][b]
            );
        }
    }
}

proptest! {
    #[test]
    fn psi_squared_is_ipf(samples in prop::collection::vec(-3.0f64..3.0, 1..30), x in -4.0f64..4.0, sigma in 0.3f64..2.0) {
        let cfg = KernelConfig::new(sigma).unwrap();
        let pe = psi_eval(x, &samples, &cfg).unwrap();
        prop_assert!(pe.psi > 0.0);
        prop_assert!((pe.psi * pe.psi - ipf(x, &samples, &cfg).unwrap()).abs() < 1e-12);
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (f64, Vec<f64>, KernelConfig) {
    let n = rng.random_range(1..25);
    let samples: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x = rng.random_range(-2.5..2.5);
    let sigma = rng.random_range(0.3..1.5);
    (x, samples, KernelConfig::new(sigma).unwrap())
}

#[test]
fn psi_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (x, samples, cfg) = random_instance(&mut rng);
        let h = cfg.fd_step;
        let psi = |t: f64| psi_eval(t, &samples, &cfg).unwrap().psi;
        let pe = psi_eval(x, &samples, &cfg).unwrap();
        let d1 = (psi(x + h) - psi(x - h)) / (2.0 * h);
        let d2 = (psi(x + h) - 2.0 * psi(x) + psi(x - h)) / (h * h);
        // absolute floor covers cancellation in the second difference
        assert!(
            (pe.dpsi - d1).abs() <= 1e-5 * pe.dpsi.abs() + 1e-8,
            "{} vs {d1}",
            pe.dpsi
        );
        assert!(
            (pe.d2psi - d2).abs() <= 1e-5 * pe.d2psi.abs() + 1e-7,
            "{} vs {d2}",
            pe.d2psi
        );
    }
}

#[test]
fn mode_laplacians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spec = ModeSpec::new(10);
    for _ in 0..50 {
        let (x, samples, cfg) = random_instance(&mut rng);
        let pe = psi_eval(x, &samples, &cfg).unwrap();
        for k in 1..=10 {
            let f = |t: f64| {
                let p = psi_eval(t, &samples, &cfg).unwrap();
                mode_wavefunction(&p, k, &spec).unwrap().0
            };
            let (_, lap) = mode_wavefunction(&pe, k, &spec).unwrap();
            if lap.abs() <= 1e-6 {
                continue;
            }
            let fd = nth_derivative(f, x, 2, 1e-3, 2);
            assert!((lap - fd).abs() <= 1e-4 * lap.abs(), "k={k}: {lap} vs {fd}");
        }
    }
}
