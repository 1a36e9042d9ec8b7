//! Scalar abstraction and the small numeric kernels shared by the scoring code.
//!
//! Everything that turns observations into degrees, aggregates degrees, or
//! compares score vectors is written against [`Scalar`] so the same code runs
//! on `f32` and `f64`. The domain stores keep their numbers as `f64`; the
//! aliases in the crate root pin the concrete type used there.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Degree in `[0, 1]` for an observed value against an optimal/reject pair.
///
/// The map is `clamp((observed - reject) / (optimal - reject), 0, 1)`, so the
/// sign of `optimal - reject` decides whether larger or smaller observations
/// are better. A NaN observation scores 0.
pub fn satisfaction<S: Scalar>(observed: S, optimal: S, reject: S) -> S {
    let raw = (observed - reject) / (optimal - reject);
    if raw.is_nan() {
        return S::zero();
    }
    raw.max(S::zero()).min(S::one())
}

/// Weighted arithmetic mean with weights normalized to sum 1.
///
/// Returns `None` for an empty input or a non-positive weight total.
pub fn weighted_mean<S, I>(pairs: I) -> Option<S>
where
    S: Scalar,
    I: IntoIterator<Item = (S, S)>,
{
    let mut num = S::zero();
    let mut den = S::zero();
    let mut any = false;
    for (value, weight) in pairs {
        num = num + value * weight;
        den = den + weight;
        any = true;
    }
    if !any || den <= S::zero() {
        return None;
    }
    Some((num / den).max(S::zero()).min(S::one()))
}

/// True when `a` and `b` agree to a relative tolerance of `eps` (absolute near 0).
pub fn approx_eq<S: Scalar>(a: S, b: S, eps: S) -> bool {
    let scale = a.abs().max(b.abs()).max(S::one());
    (a - b).abs() <= eps * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_are_exact() {
        assert_eq!(satisfaction(100.0_f64, 100.0, 500.0), 1.0);
        assert_eq!(satisfaction(500.0_f64, 100.0, 500.0), 0.0);
        assert_eq!(satisfaction(300.0_f64, 100.0, 500.0), 0.5);
        assert_eq!(satisfaction(300.0_f32, 100.0, 500.0), 0.5);
    }

    #[test]
    fn clamps_past_anchors() {
        assert_eq!(satisfaction(50.0_f64, 100.0, 500.0), 1.0);
        assert_eq!(satisfaction(900.0_f64, 100.0, 500.0), 0.0);
        // larger-is-better orientation
        assert_eq!(satisfaction(12.0_f64, 10.0, 0.0), 1.0);
        assert_eq!(satisfaction(5.0_f64, 10.0, 0.0), 0.5);
        assert_eq!(satisfaction(f64::NAN, 10.0, 0.0), 0.0);
    }

    #[test]
    fn weighted_mean_normalizes() {
        assert_eq!(weighted_mean([(1.0_f64, 2.0), (0.0, 2.0)]), Some(0.5));
        assert_eq!(weighted_mean::<f64, _>([]), None);
        assert_eq!(weighted_mean([(1.0_f64, 0.0)]), None);
    }
}
