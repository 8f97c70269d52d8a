//! Root moduli of the low-degree lag polynomials.

use num_complex::Complex64;

/// Moduli of the roots of `c[0] + c[1] z + ... + c[n] z^n`.
///
/// Leading coefficients that are negligible relative to the rest are dropped;
/// the roots they would contribute are far outside the unit circle.
pub fn root_moduli(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut degree = coeffs.len().saturating_sub(1);
    while degree > 0 && coeffs[degree].abs() <= 1e-12 * scale {
        degree -= 1;
    }
    match degree {
        0 => Vec::new(),
        1 => vec![(coeffs[0] / coeffs[1]).abs()],
        _ => durand_kerner(&coeffs[..=degree]).into_iter().map(|z| z.norm()).collect(),
    }
}

fn durand_kerner(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |z: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    // Cauchy bound keeps the starting circle around every root.
    let radius = 1.0 + monic[..n].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * radius).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let zi = roots[i];
            let denom = (0..n).filter(|&j| j != i).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (zi - roots[j]));
            let step = eval(zi) / denom;
            if step.is_finite() {
                roots[i] = zi - step;
                delta = delta.max(step.norm());
            }
        }
        if delta < 1e-14 * radius {
            break;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn linear_and_constant() {
        assert!(root_moduli(&[1.0]).is_empty());
        assert_eq!(root_moduli(&[1.0, -0.5]), vec![2.0]);
        assert_eq!(root_moduli(&[1.0, 0.0]), Vec::<f64>::new());
    }

    #[test]
    fn quadratic_and_cubic() {
        // (1 - z/2)(1 - z/4) = 1 - 0.75 z + 0.125 z^2
        let m = sorted(root_moduli(&[1.0, -0.75, 0.125]));
        assert!((m[0] - 2.0).abs() < 1e-10 && (m[1] - 4.0).abs() < 1e-10);
        // 1 + z^2/4: roots ±2i
        let m = root_moduli(&[1.0, 0.0, 0.25]);
        assert!(m.iter().all(|r| (r - 2.0).abs() < 1e-10));
        // (1 - z)(1 + z/3)(1 - z/5)
        let c = [1.0, -1.0 + 1.0 / 3.0 - 0.2, -1.0 / 3.0 + 0.2 - 1.0 / 15.0, 1.0 / 15.0];
        let m = sorted(root_moduli(&c));
        for (got, want) in m.iter().zip([1.0, 3.0, 5.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }
}
