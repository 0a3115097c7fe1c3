//! Gauss–Legendre rules and composite quadrature.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Nodes and weights of the n-point rule on [0, 1].
pub fn unit_rule(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n).expect("quadrature order must be positive");
    GaussLegendre::new(n)
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Composite rule: `panels` equal panels on [a, b], `rule` on each.
pub fn composite<T, F>(a: f64, b: f64, panels: usize, rule: &[(f64, f64)], mut f: F) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    F: FnMut(f64) -> T,
{
    let width = (b - a) / panels as f64;
    let mut acc = T::default();
    for k in 0..panels {
        let lo = a + width * k as f64;
        for &(x, w) in rule {
            acc = acc + f(lo + width * x) * (w * width);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rule_integrates_polynomials() {
        let r = unit_rule(4);
        let s: f64 = r.iter().map(|&(x, w)| w * x.powi(7)).sum();
        assert!((s - 0.125).abs() < 1e-15);
    }

    #[test]
    fn composite_sine() {
        let r = unit_rule(8);
        let v: f64 = composite(0.0, std::f64::consts::PI, 10, &r, f64::sin);
        assert!((v - 2.0).abs() < 1e-14);
    }
}
