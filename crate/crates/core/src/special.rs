//! Special functions not covered by `libm`.

use crate::{Error, Result};

pub const FRAC_2_SQRT_PI: f64 = core::f64::consts::FRAC_2_SQRT_PI;

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// d/dx erf(x).
#[inline]
pub fn erf_prime(x: f64) -> f64 {
    FRAC_2_SQRT_PI * libm::exp(-x * x)
}

/// Inverse error function on (-1, 1).
///
/// Single-precision rational guess (Giles 2010) polished with two Halley steps.
pub fn erfinv(y: f64) -> Result<f64> {
    if !(y > -1.0 && y < 1.0) {
        return Err(Error::Domain(alloc::format!("erfinv argument {y} outside (-1, 1)")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut w = -libm::log((1.0 - y) * (1.0 + y));
    let mut p;
    if w < 5.0 {
        w -= 2.5;
        p = 2.810_226_36e-08;
        p = 3.432_739_39e-07 + p * w;
        p = -3.523_387_7e-06 + p * w;
        p = -4.391_506_54e-06 + p * w;
        p = 0.000_218_580_87 + p * w;
        p = -0.001_253_725_03 + p * w;
        p = -0.004_177_681_64 + p * w;
        p = 0.246_640_727 + p * w;
        p = 1.501_409_41 + p * w;
    } else {
        w = libm::sqrt(w) - 3.0;
        p = -0.000_200_214_257;
        p = 0.000_100_950_558 + p * w;
        p = 0.001_349_343_22 + p * w;
        p = -0.003_673_428_44 + p * w;
        p = 0.005_739_507_73 + p * w;
        p = -0.007_622_461_3 + p * w;
        p = 0.009_438_870_47 + p * w;
        p = 1.001_674_06 + p * w;
        p = 2.832_976_82 + p * w;
    }
    let mut x = p * y;
    for _ in 0..3 {
        let err = erf(x) - y;
        let d = erf_prime(x);
        x -= err / (d + x * err);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfinv_round_trips() {
        for &y in &[-0.999, -0.9, -0.3, 1e-6, 0.2, 0.75, 0.999_999] {
            let x = erfinv(y).unwrap();
            assert!((erf(x) - y).abs() < 1e-14, "y={y}");
        }
    }

    #[test]
    fn erfinv_rejects_bounds() {
        assert!(erfinv(1.0).is_err());
        assert!(erfinv(-1.5).is_err());
    }

    #[test]
    fn erfinv_known_value() {
        // erf(-2.326753765513524...) = -0.999
        let x = erfinv(2.0 * 0.0005 - 1.0).unwrap();
        assert!((x + 2.326_753_765_513_524).abs() < 1e-12);
    }
}
