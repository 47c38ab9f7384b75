use nanosqueeze_core::specfun::{
    riccati_functions, riccati_functions_scaled, spherical_bessel_j, spherical_bessel_j_seq,
    spherical_bessel_y, spherical_hankel1_seq,
};
use nanosqueeze_core::C64;
use proptest::prelude::*;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn double_factorial(m: usize) -> f64 {
    (1..=m).rev().step_by(2).map(|k| k as f64).product()
}

/// Ascending series with explicit factorials, independent of the library path.
fn series(n: usize, z: C64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    let mut factorial = 1.0;
    let mut zpow = C64::new(1.0, 0.0);
    for k in 0..40 {
        if k > 0 {
            factorial *= k as f64;
            zpow *= -z * z * 0.5;
        }
        sum += zpow / (factorial * double_factorial(2 * n + 2 * k + 1));
    }
    // z^n split to avoid intermediate underflow before the division
    let mut pre = C64::new(1.0, 0.0);
    for _ in 0..n {
        pre *= z;
    }
    pre * sum
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).norm() <= tol * b.norm().max(a.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn wronskian_identity(n in 0usize..=80, log_mod in -2.0f64..3.0, arg in 0.0f64..std::f64::consts::FRAC_PI_2) {
        let z = C64::from_polar(10f64.powf(log_mod), arg);
        // scaled form: W exp(-|Im z| - i z) = i exp(-i Re z) for Im z >= 0
        let (psi, xi) = riccati_functions_scaled(n, z).unwrap();
        let w = psi.value * xi.derivative - psi.derivative * xi.value;
        let expected = I * C64::new(0.0, -z.re).exp();
        prop_assert!((w - expected).norm() < 1e-10, "n={} z={} w={}", n, z, w);
        if let Ok((psi, xi)) = riccati_functions(n, z) {
            let w = psi.value * xi.derivative - psi.derivative * xi.value;
            prop_assert!((w - I).norm() < 1e-10, "unscaled n={} z={} w={}", n, z, w);
        }
    }

    #[test]
    fn three_term_recurrence(n in 1usize..=79, log_mod in -1.0f64..2.5, arg in 0.0f64..std::f64::consts::FRAC_PI_2) {
        let z = C64::from_polar(10f64.powf(log_mod), arg);
        let j = spherical_bessel_j_seq(n + 1, z).unwrap();
        let lhs = j[n - 1] + j[n + 1];
        let rhs = (2 * n + 1) as f64 / z * j[n];
        prop_assume!(lhs.norm() > 1e-280);
        prop_assert!(close(lhs, rhs, 1e-10), "j: {} vs {}", lhs, rhs);
        let h = spherical_hankel1_seq(n + 1, z);
        prop_assume!(h.is_ok());
        let h = h.unwrap();
        let lhs = h[n - 1] + h[n + 1];
        let rhs = (2 * n + 1) as f64 / z * h[n];
        prop_assert!(close(lhs, rhs, 1e-10), "h: {} vs {}", lhs, rhs);
    }

    #[test]
    fn downward_evaluation_matches_series(n in 0usize..=80, log_mod in -3.0f64..0.5, arg in 0.0f64..std::f64::consts::PI) {
        let z = C64::from_polar(10f64.powf(log_mod), arg);
        let v = spherical_bessel_j(n, z).unwrap();
        let s = series(n, z);
        // both underflow together deep in the small-argument corner
        prop_assume!(s.norm() > 1e-290);
        prop_assert!(close(v, s, 1e-10), "n={} z={} {} vs {}", n, z, v, s);
    }
}

#[test]
fn y_recurrence_on_real_axis() {
    let z = C64::new(1.7, 0.0);
    for n in 1..20 {
        let lhs = spherical_bessel_y(n - 1, z).unwrap() + spherical_bessel_y(n + 1, z).unwrap();
        let rhs = (2 * n + 1) as f64 / z * spherical_bessel_y(n, z).unwrap();
        assert!(close(lhs, rhs, 1e-10), "n={n}");
    }
}
