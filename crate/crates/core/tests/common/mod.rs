#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// Tanh-sinh quadrature of `f` over `[a, b]`. The integrand receives the node
/// and its distances to both endpoints, computed without cancellation, so
/// algebraic endpoint singularities are handled.
pub fn tanh_sinh(f: impl Fn(f64, f64, f64) -> f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    let h = 1.0 / 64.0;
    let mut sum = 0.0;
    for k in -384i32..=384 {
        let t = k as f64 * h;
        let u = FRAC_PI_2 * t.sinh();
        let to_a = len / (1.0 + (-2.0 * u).exp());
        let to_b = len / (1.0 + (2.0 * u).exp());
        if to_a <= 0.0 || to_b <= 0.0 {
            continue;
        }
        let w = len * FRAC_PI_2 * t.cosh() / (2.0 * u.cosh() * u.cosh());
        sum += w * f(a + to_a, to_a, to_b);
    }
    sum * h
}

/// `t^(-beta) / Gamma(1 - beta)`.
pub fn weakly_singular(beta: f64, t: f64) -> f64 {
    t.powf(-beta) / libm::tgamma(1.0 - beta)
}
