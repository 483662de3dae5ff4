//! Distances between histograms used by the distribution-matching quantifiers.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Histogram distance selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Topsoe,
    Hellinger,
    L1,
}

impl Distance {
    /// Evaluates the distance; callers guarantee equal lengths.
    pub fn eval<T: Scalar>(self, p: &[T], q: &[T]) -> T {
        match self {
            Distance::Topsoe => topsoe_unchecked(p, q),
            Distance::Hellinger => hellinger_unchecked(p, q),
            Distance::L1 => l1_unchecked(p, q),
        }
    }
}

fn check_lengths<T>(p: &[T], q: &[T]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { expected: p.len(), got: q.len() });
    }
    Ok(())
}

/// `sum_i p_i ln(2 p_i / (p_i + q_i)) + q_i ln(2 q_i / (p_i + q_i))`, with `0 ln 0 = 0`.
pub fn topsoe<T: Scalar>(p: &[T], q: &[T]) -> Result<T> {
    check_lengths(p, q)?;
    Ok(topsoe_unchecked(p, q))
}

fn topsoe_unchecked<T: Scalar>(p: &[T], q: &[T]) -> T {
    let two = T::of(2.0);
    let term = |a: T, m: T| if a > T::zero() { a * (two * a / m).ln() } else { T::zero() };
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = a + b;
            if m <= T::zero() {
                T::zero()
            } else {
                term(a, m) + term(b, m)
            }
        })
        .sum::<T>()
        .max(T::zero())
}

/// `sqrt(sum_i (sqrt p_i - sqrt q_i)^2)`, ranging over `[0, sqrt 2]` for distributions.
pub fn hellinger<T: Scalar>(p: &[T], q: &[T]) -> Result<T> {
    check_lengths(p, q)?;
    Ok(hellinger_unchecked(p, q))
}

fn hellinger_unchecked<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let d = a.max(T::zero()).sqrt() - b.max(T::zero()).sqrt();
            d * d
        })
        .sum::<T>()
        .sqrt()
}

pub fn l1<T: Scalar>(p: &[T], q: &[T]) -> Result<T> {
    check_lengths(p, q)?;
    Ok(l1_unchecked(p, q))
}

fn l1_unchecked<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum()
}
