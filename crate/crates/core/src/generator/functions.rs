//! Test functions with known integrals.

use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
    /// Interval the samples are drawn from.
    pub support: (f64, f64),
    /// Interval covered by the histogram; samples outside only count in `N_exc`.
    pub range: (f64, f64),
    /// `integral of |f|` over `support`.
    pub support_mass: f64,
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

fn quartic(x: f64) -> f64 {
    (x.powi(4) - 0.8 * x * x) / 0.171964
}

fn exponential_alpha() -> f64 {
    3.0 * 9f64.exp() / (6f64.exp() - 1.0)
}

fn exponential(x: f64) -> f64 {
    exponential_alpha() * (-3.0 * x).exp()
}

pub fn gaussian(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

fn gaussian_mass(lo: f64, hi: f64, mu: f64, sigma: f64) -> f64 {
    let cdf = |x: f64| 0.5 * libm::erfc(-(x - mu) / (sigma * SQRT_2));
    cdf(hi) - cdf(lo)
}

fn triple_gaussian(x: f64) -> f64 {
    0.2 * gaussian(x, 0.0, 0.2) + 0.4 * (gaussian(x, 2.0, 1.0) + gaussian(x, -2.0, 1.0))
}

pub fn functions() -> [TestFunction; 3] {
    [
        TestFunction {
            name: "quartic_polynomial",
            f: quartic,
            support: (-1.0, 1.0),
            range: (-1.0, 1.0),
            support_mass: 1.0,
        },
        TestFunction {
            name: "exponential",
            f: exponential,
            support: (1.0, 3.0),
            range: (1.0, 2.8),
            support_mass: 1.0,
        },
        TestFunction {
            name: "triple_gaussian",
            f: triple_gaussian,
            support: (-5.0, 5.0),
            range: (-5.0, 5.0),
            support_mass: 0.2 * gaussian_mass(-5.0, 5.0, 0.0, 0.2)
                + 0.4 * (gaussian_mass(-5.0, 5.0, 2.0, 1.0) + gaussian_mass(-5.0, 5.0, -2.0, 1.0)),
        },
    ]
}

/// Exact name, or a prefix matching exactly one function.
pub fn lookup(name: &str) -> Result<TestFunction, super::GeneratorError> {
    let all = functions();
    if let Some(f) = all.iter().find(|f| f.name == name) {
        return Ok(*f);
    }
    let matches: Vec<_> = all
        .iter()
        .filter(|f| !name.is_empty() && f.name.starts_with(name))
        .collect();
    match matches.as_slice() {
        [one] => Ok(**one),
        [] => Err(super::GeneratorError::UnknownFunction(name.to_string())),
        _ => Err(super::GeneratorError::AmbiguousFunction(name.to_string())),
    }
}
