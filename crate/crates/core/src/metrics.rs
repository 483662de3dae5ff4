//! Quantification error measures.

use crate::{Error, Result, Scalar};

/// Default smoothing constant for [`nkld`].
pub const NKLD_EPSILON: f64 = 1e-8;

fn same_length<T>(p: &[T], theta: &[T]) -> Result<()> {
    if p.len() != theta.len() {
        return Err(Error::LengthMismatch { expected: p.len(), got: theta.len() });
    }
    Ok(())
}

/// Absolute error `sum_i |p_i - theta_i|`; ranges over `[0, 2]`.
pub fn ae<T: Scalar>(p: &[T], theta: &[T]) -> Result<T> {
    same_length(p, theta)?;
    Ok(p.iter().zip(theta).map(|(&a, &b)| (a - b).abs()).sum())
}

/// Normalised Kullback-Leibler divergence `2 e^KLD / (1 + e^KLD) - 1`, after
/// smoothing both distributions as `(v + eps) / (1 + L eps)`.
pub fn nkld<T: Scalar>(p: &[T], theta: &[T], epsilon: T) -> Result<T> {
    same_length(p, theta)?;
    let l = T::of(p.len() as f64);
    let smooth = |v: T| (v + epsilon) / (T::one() + l * epsilon);
    let kld: T = p
        .iter()
        .zip(theta)
        .map(|(&a, &b)| {
            let (a, b) = (smooth(a), smooth(b));
            if a > T::zero() {
                a * (a / b).ln()
            } else {
                T::zero()
            }
        })
        .sum();
    // 2 e^k / (1 + e^k) - 1 == tanh(k / 2), which does not overflow.
    Ok((kld.max(T::zero()) / T::of(2.0)).tanh())
}
