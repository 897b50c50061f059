//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64) -> Segment {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[breaks[0], breaks.last()]`, starting from the given
/// partition and repeatedly bisecting the segment with the largest error
/// estimate until the summed estimate drops below `abs_tol`.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    max_segments: usize,
) -> Result<f64> {
    assert!(breaks.len() >= 2, "need at least one interval");
    let mut heap: BinaryHeap<Segment> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&mut f, w[0], w[1]))
        .collect();
    loop {
        let error: f64 = heap.iter().map(|s| s.error).sum();
        let value: f64 = heap.iter().map(|s| s.value).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Numeric(
                "integrand produced a non-finite value".into(),
            ));
        }
        if error <= abs_tol {
            return Ok(value);
        }
        if heap.len() >= max_segments {
            return Err(Error::Quadrature {
                error,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            return Err(Error::Quadrature {
                error,
                intervals: heap.len() + 1,
            });
        }
        heap.push(gk15(&mut f, worst.lo, mid));
        heap.push(gk15(&mut f, mid, worst.hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, &[0.0, 1.0], 1e-14, 10).unwrap();
        assert!((v - (1.0 / 6.0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn peaked_integrand_with_breakpoints() {
        // narrow Gaussian bump centred at 0.3, total mass 1
        let s = 1e-4;
        let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
        let f = |x: f64| norm * (-0.5 * ((x - 0.3) / s).powi(2)).exp();
        let breaks = [0.0, 0.3 - 10.0 * s, 0.3, 0.3 + 10.0 * s, 1.0];
        let v = integrate(f, &breaks, 1e-10, 1000).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn singular_endpoint() {
        // ∫₀¹ x^(-1/2) dx = 2
        let v = integrate(|x| x.powf(-0.5), &[0.0, 1.0], 1e-8, 2000).unwrap();
        assert!((v - 2.0).abs() < 1e-7);
    }

    #[test]
    fn reports_non_convergence() {
        let r = integrate(|x| (1.0 / x).sin() / x, &[0.0, 1.0], 1e-12, 8);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
