//! Scalar auxiliary functions: the weighted primitive `H^α`, truncations,
//! entropy and the temperature floor `μ`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

// 15-point Kronrod nodes with the embedded 7-point Gauss rule (QUADPACK qk15).
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Returns the estimate and its error bound; the interval with the largest
/// error is bisected until the total error drops below `abs_tol` or
/// `max_intervals` is reached.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if total_err <= abs_tol || parts.len() >= max_intervals {
            let total: f64 = parts.iter().map(|p| p.2).sum();
            return (total, total_err);
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

fn check_h_alpha_args(s: f64, sigma: f64, alpha: f64, k: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("H^α needs α ∈ [0, 1), got {alpha}")));
    }
    if !(s >= 0.0) || !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "H^α needs s ≥ 0 and σ ≥ 0, got s = {s}, σ = {sigma}"
        )));
    }
    if !(k > 0.0) || k < sigma {
        return Err(Error::Contract(format!(
            "H^α needs K > 0 and K ≥ σ, got K = {k}, σ = {sigma}"
        )));
    }
    Ok(())
}

/// `H^α(s, σ) = ∫₀^s (K / (K + τ − σ))^α dτ`.
///
/// Evaluated through the exact antiderivative
/// `K^α ((K − σ + s)^{1−α} − (K − σ)^{1−α}) / (1 − α)`.
pub fn h_alpha(s: f64, sigma: f64, alpha: f64, k: f64) -> Result<f64> {
    check_h_alpha_args(s, sigma, alpha, k)?;
    Ok(h_alpha_unchecked(s, sigma, alpha, k))
}

#[inline]
pub(crate) fn h_alpha_unchecked(s: f64, sigma: f64, alpha: f64, k: f64) -> f64 {
    if alpha == 0.0 {
        return s;
    }
    let base = k - sigma;
    let e = 1.0 - alpha;
    k.powf(alpha) * ((base + s).powf(e) - base.powf(e)) / e
}

/// `H^α` by adaptive quadrature of its defining integral (absolute tolerance
/// 1e-12); independent of the closed form used by [`h_alpha`].
pub fn h_alpha_quadrature(s: f64, sigma: f64, alpha: f64, k: f64) -> Result<f64> {
    check_h_alpha_args(s, sigma, alpha, k)?;
    let (v, _) = integrate_adaptive(
        |tau| (k / (k + tau - sigma)).powf(alpha),
        0.0,
        s,
        1e-12,
        4000,
    );
    Ok(v)
}

/// `T_m(z) = sign(z) min(|z|, m)`.
pub fn truncate(z: f64, m: f64) -> f64 {
    z.clamp(-m, m)
}

/// Smoothed truncation `T_{m,δ}`: identity for `|z| ≤ m − δ`, constant `±m`
/// for `|z| ≥ m + δ`, and on the window in between a blend whose slope
/// `1 − g(s)` follows the quintic smoothstep `g(s) = 6s⁵ − 15s⁴ + 10s³`,
/// `s = (|z| − m + δ) / 2δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    m: f64,
    delta: f64,
}

impl TruncationParams {
    pub fn new(m: f64, delta: f64) -> Result<Self> {
        if !(m > 0.0) || !(delta > 0.0) || delta >= m {
            return Err(Error::Parameter(format!(
                "truncation needs 0 < δ < m, got m = {m}, δ = {delta}"
            )));
        }
        Ok(Self { m, delta })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Constant `C` in `|T''| ≤ C/δ` (the maximum of `g'/2`).
    pub const SECOND_DERIVATIVE_CONSTANT: f64 = 15.0 / 16.0;

    fn window(&self, a: f64) -> f64 {
        (a - (self.m - self.delta)) / (2.0 * self.delta)
    }

    pub fn value(&self, z: f64) -> f64 {
        let a = z.abs();
        let v = if a <= self.m - self.delta {
            a
        } else if a >= self.m + self.delta {
            self.m
        } else {
            let s = self.window(a);
            // ∫₀^s g = s⁶ − 3s⁵ + 5s⁴/2
            let big_g = s.powi(4) * (s * s - 3.0 * s + 2.5);
            (self.m - self.delta) + 2.0 * self.delta * (s - big_g)
        };
        v.copysign(z)
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let a = z.abs();
        if a <= self.m - self.delta {
            1.0
        } else if a >= self.m + self.delta {
            0.0
        } else {
            let s = self.window(a);
            1.0 - s * s * s * (s * (6.0 * s - 15.0) + 10.0)
        }
    }

    pub fn second_derivative(&self, z: f64) -> f64 {
        let a = z.abs();
        if a <= self.m - self.delta || a >= self.m + self.delta {
            0.0
        } else {
            let s = self.window(a);
            let g1 = 30.0 * s * s * (1.0 - s) * (1.0 - s);
            -(g1 / (2.0 * self.delta)).copysign(z)
        }
    }
}

/// `η = ln θ`.
pub fn entropy_of(theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("entropy needs θ > 0, got {theta}")));
    }
    Ok(theta.ln())
}

/// Temperature floor `μ = min(inf θ₀, inf θ̂)`; must be positive.
pub fn compute_mu(theta0_min: f64, hat_theta_min: f64) -> Result<f64> {
    if !theta0_min.is_finite() || !hat_theta_min.is_finite() {
        return Err(Error::Inadmissible(format!(
            "temperature minima must be finite, got {theta0_min} and {hat_theta_min}"
        )));
    }
    let mu = theta0_min.min(hat_theta_min);
    if mu <= 0.0 {
        return Err(Error::Inadmissible(format!("μ > 0 required, got μ = {mu}")));
    }
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gauss_kronrod_integrates_polynomials_and_smooth_functions() {
        let (v, _) = integrate_adaptive(|x| x.powi(13) - 3.0 * x * x, 0.0, 2.0, 1e-13, 100);
        let exact = 2f64.powi(14) / 14.0 - 8.0;
        assert!((v - exact).abs() < 1e-10 * exact.abs());
        let (v, _) = integrate_adaptive(f64::sin, 0.0, std::f64::consts::PI, 1e-14, 100);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn h_alpha_at_alpha_zero_is_identity() {
        assert_eq!(h_alpha(7.0, 3.0, 0.0, 10.0).unwrap(), 7.0);
        assert!((h_alpha_quadrature(7.0, 3.0, 0.0, 10.0).unwrap() - 7.0).abs() < 1e-13);
    }

    #[test]
    fn h_alpha_closed_form_matches_quadrature() {
        for &(s, sigma, alpha, k) in &[
            (5.0, 0.0, 0.3, 2.0),
            (0.2, 1.5, 0.49, 3.0),
            (100.0, 3.0, 0.1, 3.0),
            (1.0, 2.9999, 0.9, 3.0),
        ] {
            let a = h_alpha(s, sigma, alpha, k).unwrap();
            let b = h_alpha_quadrature(s, sigma, alpha, k).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn h_alpha_rejects_alpha_one() {
        assert!(matches!(h_alpha(1.0, 0.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(
            h_alpha(1.0, 2.0, 0.5, 1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate(3.0, 5.0), 3.0);
        assert_eq!(truncate(-7.0, 5.0), -5.0);
        assert_eq!(truncate(5.0, 5.0), 5.0);
    }

    #[test]
    fn mollified_truncation_identity_region() {
        let t = TruncationParams::new(4.0, 1.0).unwrap();
        assert_eq!(t.value(2.0), 2.0);
        assert_eq!(t.derivative(0.0), 1.0);
        assert_eq!(t.second_derivative(0.0), 0.0);
        assert_eq!(t.value(10.0), 4.0);
        assert_eq!(t.value(-10.0), -4.0);
        assert!(TruncationParams::new(1.0, 1.0).is_err());
    }

    #[test]
    fn mollified_truncation_is_c2_at_window_edges() {
        let t = TruncationParams::new(3.0, 0.5).unwrap();
        let eps = 1e-9;
        for &edge in &[2.5, 3.5] {
            assert!((t.value(edge - eps) - t.value(edge + eps)).abs() < 1e-8);
            assert!((t.derivative(edge - eps) - t.derivative(edge + eps)).abs() < 1e-7);
            assert!(
                (t.second_derivative(edge - eps) - t.second_derivative(edge + eps)).abs() < 1e-6
            );
        }
    }

    #[test]
    fn mollified_truncation_derivatives_match_finite_differences() {
        let t = TruncationParams::new(2.0, 0.75).unwrap();
        let h = 1e-5;
        for k in 0..200 {
            let z = 1.0 + 2.0 * k as f64 / 199.0;
            let d1 = (t.value(z + h) - t.value(z - h)) / (2.0 * h);
            let d2 = (t.derivative(z + h) - t.derivative(z - h)) / (2.0 * h);
            assert!((d1 - t.derivative(z)).abs() < 1e-8);
            assert!((d2 - t.second_derivative(z)).abs() < 1e-6);
        }
    }

    #[test]
    fn second_derivative_bound_by_dense_scan() {
        let m = 2.0;
        let delta = 0.4;
        let t = TruncationParams::new(m, delta).unwrap();
        let max = (0..10_000)
            .map(|k| m - delta + 2.0 * delta * k as f64 / 9_999.0)
            .map(|z| t.second_derivative(z).abs())
            .fold(0.0_f64, f64::max);
        let c = max * delta;
        assert!(c <= TruncationParams::SECOND_DERIVATIVE_CONSTANT + 1e-12);
        assert!(c >= TruncationParams::SECOND_DERIVATIVE_CONSTANT - 1e-6);
    }

    #[test]
    fn entropy_and_mu() {
        assert_eq!(entropy_of(1.0).unwrap(), 0.0);
        assert!((entropy_of(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert!(entropy_of(0.0).is_err());
        assert_eq!(compute_mu(2.0, 1.5).unwrap(), 1.5);
        assert_eq!(compute_mu(1.0, 1.0).unwrap(), 1.0);
        assert!(matches!(compute_mu(0.5, -1.0), Err(Error::Inadmissible(_))));
    }

    proptest! {
        #[test]
        fn h_alpha_increasing_and_zero_at_origin(s in 0.0..100.0f64, ds in 1e-6..10.0f64, frac in 0.0..1.0f64, alpha in 0.0..0.99f64) {
            let k = 5.0;
            let sigma = frac * k;
            prop_assert_eq!(h_alpha(0.0, sigma, alpha, k).unwrap(), 0.0);
            prop_assert!(h_alpha(s + ds, sigma, alpha, k).unwrap() > h_alpha(s, sigma, alpha, k).unwrap());
        }

        #[test]
        fn mollified_truncation_properties(z in -20.0..20.0f64, m in 0.5..10.0f64, frac in 0.01..0.99f64) {
            let t = TruncationParams::new(m, frac * m).unwrap();
            let delta = frac * m;
            prop_assert!((t.value(z) - truncate(z, m)).abs() <= delta + 1e-12);
            if z > 0.0 {
                prop_assert!(t.derivative(z) >= -1e-15 && t.derivative(z) <= 1.0 + 1e-15);
                prop_assert!(t.second_derivative(z) <= 0.0);
                prop_assert!(t.value(z) <= truncate(z, m) + 1e-12);
            }
        }

        #[test]
        fn entropy_inverts_exp(x in -50.0..50.0f64) {
            let e = entropy_of(x.exp()).unwrap();
            prop_assert!((e - x).abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()));
        }
    }
}
