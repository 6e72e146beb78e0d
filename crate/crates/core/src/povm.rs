//! Qubit effects in Bloch form, Hermitian operators and POVM tensors.
//!
//! A binary qubit POVM is stored as a bias `a0` and a Bloch vector `a`; its
//! effects are
//!
//! ```text
//! A_1 = ½[(1 - a0)·1 - a·σ]      A_2 = ½[(1 + a0)·1 + a·σ]
//! ```
//!
//! and the pair is a valid measurement iff `|a| <= 1 - |a0|`. General
//! measurements on `C^d` with `n` outcome indices are [`PovmTensor`]s: a
//! row-major array of [`HermitianOp`] indexed by `(i_1, ..., i_n)`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on `|a| <= 1 - |a0|` and `a0 ∈ [-1, 1]`.
pub const TOL_VALID: f64 = 1e-10;
/// Maximum entrywise deviation from `H = H†`.
pub const TOL_HERM: f64 = 1e-10;
/// Maximum entrywise deviation of an effect sum from the identity.
pub const TOL_SUM: f64 = 1e-10;
/// Most negative eigenvalue still accepted as positive semidefinite.
pub const TOL_PSD: f64 = 1e-9;

/// A `d × d` complex Hermitian matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOp {
    dim: usize,
    entries: Vec<Complex64>,
}

impl HermitianOp {
    /// Builds an operator from row-major entries, checking hermiticity to [`TOL_HERM`].
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("operator dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::Shape(format!(
                "expected {} entries for a {dim}x{dim} operator, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let op = HermitianOp { dim, entries };
        let defect = op.hermiticity_defect();
        if !(defect <= TOL_HERM) {
            return Err(Error::Validity(format!(
                "operator is not Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(op)
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOp {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.entries[i * dim + i] = Complex64::new(c, 0.0);
        }
        op
    }

    /// `c0·1 + c1·σx + c2·σy + c3·σz`.
    pub fn from_pauli(c: [f64; 4]) -> Self {
        let [c0, x, y, z] = c;
        HermitianOp {
            dim: 2,
            entries: vec![
                Complex64::new(c0 + z, 0.0),
                Complex64::new(x, -y),
                Complex64::new(x, y),
                Complex64::new(c0 - z, 0.0),
            ],
        }
    }

    /// Identity and Pauli coefficients of a qubit operator; `None` when `dim != 2`.
    pub fn pauli_coefficients(&self) -> Option<[f64; 4]> {
        if self.dim != 2 {
            return None;
        }
        let [h00, h01, h10, h11] = [self.entries[0], self.entries[1], self.entries[2], self.entries[3]];
        Some([
            0.5 * (h00.re + h11.re),
            0.5 * (h01.re + h10.re),
            0.5 * (h10.im - h01.im),
            0.5 * (h00.re - h11.re),
        ])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    /// `max |H_ij - conj(H_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                let diff = (self.get(r, c) - self.get(c, r).conj()).norm();
                worst = worst.max(diff);
            }
        }
        worst
    }

    /// Entrywise maximum norm of `self - other`.
    pub fn max_abs_diff(&self, other: &HermitianOp) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order.
    ///
    /// Qubit operators use the closed form `½(tr ± √(tr² - 4 det))`; larger
    /// dimensions diagonalise the real symmetric embedding `[[Re, -Im], [Im, Re]]`,
    /// whose spectrum is that of `H` with every eigenvalue doubled.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.entries[0].re],
            2 => {
                let mean = 0.5 * (self.entries[0].re + self.entries[3].re);
                let half_gap = 0.5 * (self.entries[0].re - self.entries[3].re);
                let off = 0.5 * (self.entries[1] + self.entries[2].conj());
                let radius = (half_gap * half_gap + off.norm_sqr()).sqrt();
                vec![mean - radius, mean + radius]
            }
            d => {
                let embed = DMatrix::from_fn(2 * d, 2 * d, |r, c| {
                    let z = self.get(r % d, c % d);
                    match (r < d, c < d) {
                        (true, true) | (false, false) => z.re,
                        (true, false) => -z.im,
                        (false, true) => z.im,
                    }
                });
                let mut ev: Vec<f64> = SymmetricEigen::new(embed).eigenvalues.iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                ev.into_iter().step_by(2).collect()
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &HermitianOp) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += b * c;
        }
    }
}

impl Add for &HermitianOp {
    type Output = HermitianOp;

    fn add(self, rhs: &HermitianOp) -> HermitianOp {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl Sub for &HermitianOp {
    type Output = HermitianOp;

    fn sub(self, rhs: &HermitianOp) -> HermitianOp {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &HermitianOp {
    type Output = HermitianOp;

    fn mul(self, c: f64) -> HermitianOp {
        HermitianOp {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * c).collect(),
        }
    }
}

/// Binary qubit POVM in Bloch form: bias `a0` and Bloch vector `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochPovm {
    pub bias: f64,
    pub vec: [f64; 3],
}

impl BlochPovm {
    pub fn new(bias: f64, vec: [f64; 3]) -> Result<Self> {
        let p = BlochPovm { bias, vec };
        p.validate()?;
        Ok(p)
    }

    pub fn unbiased(vec: [f64; 3]) -> Result<Self> {
        Self::new(0.0, vec)
    }

    /// `|a|`.
    pub fn sharpness(&self) -> f64 {
        norm3(&self.vec)
    }

    /// `|a0|`.
    pub fn biasedness(&self) -> f64 {
        self.bias.abs()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bias.is_finite() || self.vec.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validity("non-finite Bloch parameters".into()));
        }
        if self.bias.abs() > 1.0 + TOL_VALID {
            return Err(Error::Validity(format!("bias {} outside [-1, 1]", self.bias)));
        }
        let excess = self.sharpness() - (1.0 - self.bias.abs());
        if excess > TOL_VALID {
            return Err(Error::Validity(format!(
                "sharpness {:.6} exceeds 1 - |bias| = {:.6}",
                self.sharpness(),
                1.0 - self.bias.abs()
            )));
        }
        Ok(())
    }

    /// Effect for `outcome` in `{1, 2}`.
    pub fn effect(&self, outcome: usize) -> Result<HermitianOp> {
        self.validate()?;
        match outcome {
            1 | 2 => Ok(effects_unchecked(self.bias, self.vec)[outcome - 1].clone()),
            _ => Err(Error::Shape(format!("outcome {outcome} not in {{1, 2}}"))),
        }
    }

    pub fn effects(&self) -> Result<[HermitianOp; 2]> {
        self.validate()?;
        Ok(effects_unchecked(self.bias, self.vec))
    }

    /// Inverse of [`BlochPovm::effects`].
    pub fn from_effects(a1: &HermitianOp, a2: &HermitianOp) -> Result<Self> {
        let (Some(c1), Some(c2)) = (a1.pauli_coefficients(), a2.pauli_coefficients()) else {
            return Err(Error::Shape(format!(
                "Bloch form needs 2x2 effects, got {}x{} and {}x{}",
                a1.dim(),
                a1.dim(),
                a2.dim(),
                a2.dim()
            )));
        };
        let defect = (a1 + a2).max_abs_diff(&HermitianOp::identity(2));
        if defect > TOL_SUM {
            return Err(Error::Completeness { defect, tol: TOL_SUM });
        }
        Self::new(c2[0] - c1[0], [c2[1] - c1[1], c2[2] - c1[2], c2[3] - c1[3]])
    }

    /// The measurement as a single-index tensor `(A_1, A_2)`.
    pub fn to_tensor(&self) -> Result<PovmTensor> {
        PovmTensor::from_effects(self.effects()?.to_vec())
    }
}

/// The two effects of `(bias, vec)` without checking validity.
pub fn effects_unchecked(bias: f64, vec: [f64; 3]) -> [HermitianOp; 2] {
    let [x, y, z] = vec;
    [
        HermitianOp::from_pauli([0.5 * (1.0 - bias), -0.5 * x, -0.5 * y, -0.5 * z]),
        HermitianOp::from_pauli([0.5 * (1.0 + bias), 0.5 * x, 0.5 * y, 0.5 * z]),
    ]
}

/// Strictly positive weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Shape("empty probability vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::Validity(format!("weight {w} is not strictly positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > TOL_SUM {
            return Err(Error::Validity(format!("weights sum to {total}, not 1")));
        }
        Ok(ProbabilityVector(weights))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

/// An `n`-index array of Hermitian operators with outcome shape `(k_1, ..., k_n)`.
///
/// Elements are stored row-major over the multi-index, so the last index
/// varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PovmTensorRepr", into = "PovmTensorRepr")]
pub struct PovmTensor {
    dim: usize,
    shape: Vec<usize>,
    elements: Vec<HermitianOp>,
}

impl PovmTensor {
    pub fn new(dim: usize, shape: Vec<usize>, elements: Vec<HermitianOp>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!("invalid outcome shape {shape:?}")));
        }
        let count: usize = shape.iter().product();
        if elements.len() != count {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {count} elements, got {}",
                elements.len()
            )));
        }
        if let Some(bad) = elements.iter().find(|e| e.dim() != dim) {
            return Err(Error::Shape(format!(
                "element of dimension {} in a tensor of dimension {dim}",
                bad.dim()
            )));
        }
        Ok(PovmTensor { dim, shape, elements })
    }

    /// Single-index measurement from its effects.
    pub fn from_effects(effects: Vec<HermitianOp>) -> Result<Self> {
        let dim = effects
            .first()
            .map(HermitianOp::dim)
            .ok_or_else(|| Error::Shape("no effects".into()))?;
        let k = effects.len();
        Self::new(dim, vec![k], effects)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of outcome indices `n`.
    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn elements(&self) -> &[HermitianOp] {
        &self.elements
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &k)| acc * k + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for (slot, &k) in idx.iter_mut().zip(&self.shape).rev() {
            *slot = flat % k;
            flat /= k;
        }
        idx
    }

    pub fn get(&self, index: &[usize]) -> &HermitianOp {
        &self.elements[self.flat_index(index)]
    }

    /// Sum of all elements.
    pub fn total(&self) -> HermitianOp {
        let mut acc = HermitianOp::zeros(self.dim);
        for e in &self.elements {
            acc.add_scaled(1.0, e);
        }
        acc
    }
}

#[derive(Serialize, Deserialize)]
struct PovmTensorRepr {
    dim: usize,
    shape: Vec<usize>,
    elements: Vec<Vec<Complex64>>,
}

impl TryFrom<PovmTensorRepr> for PovmTensor {
    type Error = Error;

    fn try_from(r: PovmTensorRepr) -> Result<Self> {
        let elements = r
            .elements
            .into_iter()
            .map(|e| HermitianOp::new(r.dim, e))
            .collect::<Result<Vec<_>>>()?;
        PovmTensor::new(r.dim, r.shape, elements)
    }
}

impl From<PovmTensor> for PovmTensorRepr {
    fn from(t: PovmTensor) -> Self {
        PovmTensorRepr {
            dim: t.dim,
            shape: t.shape,
            elements: t.elements.into_iter().map(|e| e.entries).collect(),
        }
    }
}

/// Outcome of [`validate_povm`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub min_eigenvalue: f64,
    pub completeness_defect: f64,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: min eigenvalue {:.6e}, completeness defect {:.3e}",
            if self.ok { "valid POVM" } else { "not a POVM" },
            self.min_eigenvalue,
            self.completeness_defect
        )
    }
}

/// Checks positivity of every element and `Σ M = 1_d`, both to `tol`.
pub fn validate_povm(t: &PovmTensor, tol: f64) -> ValidationReport {
    let min_eigenvalue = t
        .elements
        .iter()
        .map(HermitianOp::min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    let completeness_defect = t.total().max_abs_diff(&HermitianOp::identity(t.dim));
    ValidationReport {
        ok: min_eigenvalue >= -tol && completeness_defect <= tol,
        min_eigenvalue,
        completeness_defect,
    }
}

pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    dot3(v, v).sqrt()
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
