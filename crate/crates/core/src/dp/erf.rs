use std::f64::consts::PI;

use super::DpError;

/// `x` with `erf(x) = gamma`, for `gamma` in (−1, 1).
///
/// Starts from Giles' single-precision approximation and polishes with Newton
/// steps against `libm::erf`. For `|gamma| > 0.5` the residual is taken on
/// `erfc` so that levels close to 1 keep their relative precision.
pub fn inverse_erf(gamma: f64) -> Result<f64, DpError> {
    if !(gamma.abs() < 1.0) {
        return Err(DpError::InvalidConfidence(gamma));
    }
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let sign = gamma.signum();
    let g = gamma.abs();
    let mut x = giles_seed(g);
    let two_over_sqrt_pi = 2.0 / PI.sqrt();
    let tail = 1.0 - g;
    for _ in 0..8 {
        let residual = if g > 0.5 {
            tail - libm::erfc(x)
        } else {
            libm::erf(x) - g
        };
        let slope = two_over_sqrt_pi * (-x * x).exp();
        let step = residual / slope;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(sign * x)
}

fn giles_seed(x: f64) -> f64 {
    let mut w = -((1.0 - x) * (1.0 + x)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        let mut p = 2.810_226_36e-08;
        for c in [
            3.432_739_39e-07,
            -3.523_387_7e-06,
            -4.391_506_54e-06,
            0.000_218_580_87,
            -0.001_253_725_03,
            -0.004_177_681_64,
            0.246_640_727,
            1.501_409_41,
        ] {
            p = c + p * w;
        }
        p
    } else {
        w = w.sqrt() - 3.0;
        let mut p = -0.000_200_214_257;
        for c in [
            0.000_100_950_558,
            0.001_349_343_22,
            -0.003_673_428_44,
            0.005_739_507_73,
            -0.007_622_461_3,
            0.009_438_870_47,
            1.001_674_06,
            2.832_976_82,
        ] {
            p = c + p * w;
        }
        p
    };
    p * x
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent inversion by bisection on `erf`.
    fn bisect(gamma: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if libm::erf(mid) < gamma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn known_values() {
        assert_eq!(inverse_erf(0.0).unwrap(), 0.0);
        // Frozen from the bisection oracle.
        assert!((inverse_erf(0.95).unwrap() - 1.385_903_824_349_678).abs() < 1e-12);
        assert!((inverse_erf(0.975).unwrap() - bisect(0.975)).abs() < 1e-10);
        assert!((inverse_erf(-0.5).unwrap() + bisect(0.5)).abs() < 1e-10);
    }

    #[test]
    fn matches_bisection_across_levels() {
        for i in 1..1000 {
            let g = i as f64 / 1000.0;
            let x = inverse_erf(g).unwrap();
            assert!((x - bisect(g)).abs() < 1e-10, "gamma {g}");
        }
        for g in [0.999_9, 0.999_999, 0.999_999_999, 1.0 - 1e-15] {
            let x = inverse_erf(g).unwrap();
            let back = libm::erfc(x);
            assert!(((1.0 - g) - back).abs() <= 1e-6 * (1.0 - g), "gamma {g}");
        }
    }

    #[test]
    fn round_trip() {
        for i in 1..=99 {
            let g = i as f64 / 100.0;
            assert!((libm::erf(inverse_erf(g).unwrap()) - g).abs() < 1e-9);
        }
    }

    #[test]
    fn domain() {
        assert!(inverse_erf(1.0).is_err());
        assert!(inverse_erf(1.5).is_err());
        assert!(inverse_erf(f64::NAN).is_err());
    }
}
