//! Closed-form compatibility tests for pairs of binary qubit measurements.
//!
//! For `A = (a0, a)` and `B = (b0, b)` the pair is jointly measurable iff
//!
//! ```text
//! (1 - h_A² - h_B²)(1 - a0²/h_A² - b0²/h_B²) <= (⟨a, b⟩ - a0 b0)²
//! h(x0, x) = ½[√((1 + x0)² - |x|²) + √((1 - x0)² - |x|²)]
//! ```
//!
//! For unbiased pairs this collapses to `f(a, b) = |a|² + |b|² - ⟨a, b⟩² <= 1`,
//! equivalently `g(a, b) = |a + b| + |a - b| <= 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::{dot3, norm3, BlochPovm, TOL_VALID};

/// Margins this close to zero are treated as lying on the boundary, which
/// counts as compatible. Covers rounding in the `h²` products.
pub const BOUNDARY_SNAP: f64 = 1e-12;

/// Both sides of the qubit compatibility inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatVerdict {
    pub compatible: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; non-negative iff compatible.
    pub margin: f64,
}

fn radicands(bias: f64, sharp: f64) -> Result<(f64, f64)> {
    let s2 = sharp * sharp;
    let plus = (1.0 + bias) * (1.0 + bias) - s2;
    let minus = (1.0 - bias) * (1.0 - bias) - s2;
    if plus < -TOL_VALID || minus < -TOL_VALID || sharp < 0.0 {
        return Err(Error::Domain(format!(
            "h undefined at bias {bias}, sharpness {sharp}"
        )));
    }
    Ok((plus.max(0.0), minus.max(0.0)))
}

/// `h(x0, |x|)`.
pub fn h_func(bias: f64, sharp: f64) -> Result<f64> {
    let (plus, minus) = radicands(bias, sharp)?;
    Ok(0.5 * (plus.sqrt() + minus.sqrt()))
}

/// `h²` expanded as `½(1 + x0² - |x|²) + ½√(r₊ r₋)`, exact at `x0 = 0`.
fn h_squared(bias: f64, sharp: f64) -> Result<f64> {
    let (plus, minus) = radicands(bias, sharp)?;
    Ok(0.5 * (1.0 + bias * bias - sharp * sharp) + 0.5 * (plus * minus).sqrt())
}

fn bias_ratio(bias: f64, h2: f64) -> Result<f64> {
    if bias == 0.0 {
        Ok(0.0)
    } else if h2 > 0.0 {
        Ok(bias * bias / h2)
    } else {
        Err(Error::Domain(format!("h vanishes at nonzero bias {bias}")))
    }
}

pub(crate) fn verdict_unchecked(a0: f64, a: &[f64; 3], b0: f64, b: &[f64; 3]) -> Result<CompatVerdict> {
    let ha2 = h_squared(a0, norm3(a))?;
    let hb2 = h_squared(b0, norm3(b))?;
    let lhs = (1.0 - ha2 - hb2) * (1.0 - bias_ratio(a0, ha2)? - bias_ratio(b0, hb2)?);
    let corr = dot3(a, b) - a0 * b0;
    let rhs = corr * corr;
    let mut margin = rhs - lhs;
    if margin.abs() <= BOUNDARY_SNAP {
        margin = 0.0;
    }
    Ok(CompatVerdict {
        compatible: margin >= 0.0,
        lhs,
        rhs,
        margin,
    })
}

/// Decides joint measurability of two binary qubit POVMs.
pub fn yu_compatible(a: &BlochPovm, b: &BlochPovm) -> Result<CompatVerdict> {
    a.validate()?;
    b.validate()?;
    verdict_unchecked(a.bias, &a.vec, b.bias, &b.vec)
}

/// `f(a, b) = |a|² + |b|² - ⟨a, b⟩²`; an unbiased pair is incompatible iff `f > 1`.
pub fn unbiased_f(a: &[f64; 3], b: &[f64; 3]) -> Result<f64> {
    for v in [a, b] {
        if norm3(v) > 1.0 + TOL_VALID {
            return Err(Error::Validity(format!("Bloch vector {v:?} longer than 1")));
        }
    }
    let ab = dot3(a, b);
    Ok(dot3(a, a) + dot3(b, b) - ab * ab)
}

/// `g(a, b) = |a + b| + |a - b|`; an unbiased pair is incompatible iff `g > 2`.
pub fn busch_g(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let sum = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let diff = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    norm3(&sum) + norm3(&diff)
}

/// Whether `(a, b, s)` (lengths and direction cosine) lies in the unbiased
/// incompatible region `s² < a⁻² + b⁻² - (ab)⁻²`.
pub fn region_membership(a: f64, b: f64, s: f64) -> bool {
    if a <= 0.0 || b <= 0.0 {
        return false;
    }
    a * a + b * b - 1.0 - a * a * b * b * s * s > 0.0
}
