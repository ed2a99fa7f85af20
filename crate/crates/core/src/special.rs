//! Integer-order Bessel functions of the first kind.

/// `J_n(x)` for integer `n` and real `x`, by Miller's backward recurrence
/// normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        let v = bessel_j(-n, x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let order = n as usize;
    let reach = order.max(x.ceil() as usize);
    // Starting index well beyond both the order and the turning point.
    let mut start = reach + 20 + (40.0 * reach as f64).sqrt() as usize;
    if start % 2 == 1 {
        start += 1;
    }

    let mut next = 0.0f64; // J_{k+1}
    let mut current = 1e-300f64; // J_k
    let mut wanted = 0.0f64;
    let mut normalization = 0.0f64;
    for k in (0..=start).rev() {
        if k == order {
            wanted = current;
        }
        if k % 2 == 0 {
            normalization += if k == 0 { current } else { 2.0 * current };
        }
        if k == 0 {
            break;
        }
        let previous = 2.0 * k as f64 / x * current - next;
        next = current;
        current = previous;
        if current.abs() > 1e250 {
            next *= 1e-250;
            current *= 1e-250;
            wanted *= 1e-250;
            normalization *= 1e-250;
        }
    }
    wanted / normalization
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// `J_n(x) = (1/2π) ∫_0^{2π} cos(nτ − x sin τ) dτ` by the trapezoidal
    /// rule, exponentially accurate for this periodic integrand.
    fn integral_oracle(n: i32, x: f64) -> f64 {
        let m = 4096;
        (0..m)
            .map(|k| {
                let tau = 2.0 * PI * k as f64 / m as f64;
                (n as f64 * tau - x * tau.sin()).cos()
            })
            .sum::<f64>()
            / m as f64
    }

    #[test]
    fn matches_integral_representation() {
        for n in -12..=40 {
            for &x in &[0.01, 0.3, 1.0, 1.8412, 2.5, 8.0, 11.3137, 16.0, 40.0, 80.0] {
                let a = bessel_j(n, x);
                let b = integral_oracle(n, x);
                assert!((a - b).abs() < 1e-13, "J_{n}({x}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn reference_values() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
        // Abramowitz & Stegun table 9.1
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((bessel_j(1, -1.0) + 0.440_050_585_744_933_5).abs() < 1e-15);
    }

    #[test]
    fn first_maximum_of_j1() {
        // golden-section on the oracle, then compare the implementation
        let (mut a, mut b) = (1.0, 3.0);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-10 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if integral_oracle(1, c) > integral_oracle(1, d) {
                b = d;
            } else {
                a = c;
            }
        }
        let x = 0.5 * (a + b);
        assert!((x - 1.8412).abs() < 1e-4);
        assert!((bessel_j(1, x) - 0.5819).abs() < 1e-4);
    }
}
