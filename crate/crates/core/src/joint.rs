//! Explicit joint measurements.
//!
//! Given POVMs `A^(1), ..., A^(n)`, strictly positive probability vectors
//! `p^(l)` and a Hermitian tensor `T` whose marginals are `p^(l)·1_d`,
//!
//! ```text
//! M_{i_1...i_n} = (Π_l p^(l)_{i_l}) Σ_l A^(l)_{i_l} / p^(l)_{i_l} - (n - 1) T_{i_1...i_n}
//! ```
//!
//! always has marginals `A^(l)`; the measurements are jointly measurable iff
//! some admissible `T` makes `M` positive. For two qubit measurements `T` is
//! fixed by one Hermitian block `X = ½[(1 - x0)·1 - x·σ]`, and positivity of
//! the four `M_ij` reduces to four second-order-cone inequalities in `(x0, x)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::busch_g;
use crate::error::{Error, Result};
use crate::povm::{norm3, BlochPovm, HermitianOp, PovmTensor, ProbabilityVector, TOL_SUM};

/// A tensor in `J(p^(1) ⊗ 1_d, ..., p^(n) ⊗ 1_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseTensor {
    tensor: PovmTensor,
}

impl NoiseTensor {
    /// Wraps `tensor` after checking that its marginals are `p^(l)·1_d`.
    pub fn new(tensor: PovmTensor, p_vectors: &[ProbabilityVector]) -> Result<Self> {
        check_noise_marginals(&tensor, p_vectors)?;
        Ok(NoiseTensor { tensor })
    }

    pub fn tensor(&self) -> &PovmTensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> PovmTensor {
        self.tensor
    }
}

fn check_noise_marginals(t: &PovmTensor, p_vectors: &[ProbabilityVector]) -> Result<()> {
    if t.rank() != p_vectors.len() {
        return Err(Error::Shape(format!(
            "noise tensor has {} indices but {} probability vectors were given",
            t.rank(),
            p_vectors.len()
        )));
    }
    for (axis, p) in p_vectors.iter().enumerate() {
        let m = marginal(t, axis)?;
        if m.shape()[0] != p.len() {
            return Err(Error::Shape(format!(
                "axis {axis} has {} outcomes, probability vector has {}",
                m.shape()[0],
                p.len()
            )));
        }
        for (e, &w) in m.elements().iter().zip(p.weights()) {
            let defect = e.max_abs_diff(&HermitianOp::scaled_identity(t.dim(), w));
            if defect > TOL_SUM {
                return Err(Error::Precondition(format!(
                    "noise tensor marginal on axis {axis} deviates from p·1 by {defect:.3e}"
                )));
            }
        }
    }
    Ok(())
}

/// The product choice `T = (Π_l p^(l)_{i_l}) · 1_d`.
pub fn build_t_product(p_vectors: &[ProbabilityVector], dim: usize) -> Result<NoiseTensor> {
    if p_vectors.is_empty() {
        return Err(Error::Shape("no probability vectors".into()));
    }
    if dim == 0 {
        return Err(Error::Shape("dimension must be positive".into()));
    }
    let shape: Vec<usize> = p_vectors.iter().map(ProbabilityVector::len).collect();
    let count: usize = shape.iter().product();
    let mut elements = Vec::with_capacity(count);
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..count {
        let w: f64 = idx.iter().zip(p_vectors).map(|(&i, p)| p.weights()[i]).product();
        elements.push(HermitianOp::scaled_identity(dim, w));
        advance(&mut idx, &shape);
    }
    Ok(NoiseTensor { tensor: PovmTensor::new(dim, shape, elements)? })
}

/// Row-major increment of a multi-index.
fn advance(idx: &mut [usize], shape: &[usize]) {
    for (i, &k) in idx.iter_mut().zip(shape).rev() {
        *i += 1;
        if *i < k {
            return;
        }
        *i = 0;
    }
}

/// Sum of `t` over every index except `axis`.
pub fn marginal(t: &PovmTensor, axis: usize) -> Result<PovmTensor> {
    if axis >= t.rank() {
        return Err(Error::Shape(format!("axis {axis} out of range for rank {}", t.rank())));
    }
    let k = t.shape()[axis];
    let mut out = vec![HermitianOp::zeros(t.dim()); k];
    let mut idx = vec![0usize; t.rank()];
    for e in t.elements() {
        out[idx[axis]].add_scaled(1.0, e);
        advance(&mut idx, t.shape());
    }
    PovmTensor::new(t.dim(), vec![k], out)
}

fn check_inputs(marginals: &[PovmTensor], p_vectors: &[ProbabilityVector]) -> Result<usize> {
    if marginals.is_empty() {
        return Err(Error::Shape("no measurements".into()));
    }
    if marginals.len() != p_vectors.len() {
        return Err(Error::Shape(format!(
            "{} measurements but {} probability vectors",
            marginals.len(),
            p_vectors.len()
        )));
    }
    let dim = marginals[0].dim();
    for (l, (a, p)) in marginals.iter().zip(p_vectors).enumerate() {
        if a.rank() != 1 {
            return Err(Error::Shape(format!("measurement {l} must have a single outcome index")));
        }
        if a.dim() != dim {
            return Err(Error::Shape(format!("measurement {l} acts on C^{}, expected C^{dim}", a.dim())));
        }
        if a.shape()[0] != p.len() {
            return Err(Error::Shape(format!(
                "measurement {l} has {} outcomes, probability vector {}",
                a.shape()[0],
                p.len()
            )));
        }
    }
    Ok(dim)
}

/// `Σ_l (Π_ℓ p^(ℓ)) A^(l)_{i_l} / p^(l)_{i_l}` over the full outcome grid; `scale` multiplies it.
fn weighted_sum(marginals: &[PovmTensor], p_vectors: &[ProbabilityVector], dim: usize, scale: f64) -> Result<PovmTensor> {
    let shape: Vec<usize> = p_vectors.iter().map(ProbabilityVector::len).collect();
    let count: usize = shape.iter().product();
    let mut elements = Vec::with_capacity(count);
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..count {
        let prod: f64 = idx.iter().zip(p_vectors).map(|(&i, p)| p.weights()[i]).product();
        let mut acc = HermitianOp::zeros(dim);
        for (l, (a, p)) in marginals.iter().zip(p_vectors).enumerate() {
            let i = idx[l];
            acc.add_scaled(scale * prod / p.weights()[i], &a.elements()[i]);
        }
        elements.push(acc);
        advance(&mut idx, &shape);
    }
    PovmTensor::new(dim, shape, elements)
}

/// The intermediate POVM `G = (Π p)/n · Σ_l A^(l)/p^(l)`, whose marginals are
/// `A^(l)/n + (1 - 1/n) p^(l)·1_d`.
pub fn g_tensor(marginals: &[PovmTensor], p_vectors: &[ProbabilityVector]) -> Result<PovmTensor> {
    let dim = check_inputs(marginals, p_vectors)?;
    weighted_sum(marginals, p_vectors, dim, 1.0 / marginals.len() as f64)
}

/// The candidate joint measurement for caller-supplied `T`.
///
/// Marginals and completeness hold for any admissible `T`; positivity does
/// not, so run [`crate::povm::validate_povm`] on the result.
pub fn build_m_thm1(
    marginals: &[PovmTensor],
    p_vectors: &[ProbabilityVector],
    noise: &NoiseTensor,
) -> Result<PovmTensor> {
    let dim = check_inputs(marginals, p_vectors)?;
    let t = noise.tensor();
    if t.dim() != dim {
        return Err(Error::Shape(format!("noise tensor acts on C^{}, expected C^{dim}", t.dim())));
    }
    check_noise_marginals(t, p_vectors)?;
    let base = weighted_sum(marginals, p_vectors, dim, 1.0)?;
    let n_minus_1 = (marginals.len() - 1) as f64;
    let elements = base
        .elements()
        .iter()
        .zip(t.elements())
        .map(|(b, t)| {
            let mut m = b.clone();
            m.add_scaled(-n_minus_1, t);
            m
        })
        .collect();
    PovmTensor::new(dim, base.shape().to_vec(), elements)
}

/// Bloch parameters `(x0, x)` of the block `X` of a qubit noise tensor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitNoiseParam {
    pub x0: f64,
    pub x: [f64; 3],
}

impl QubitNoiseParam {
    /// `X = ½[(1 - x0)·1 - x·σ]`.
    pub fn block(&self) -> HermitianOp {
        HermitianOp::from_pauli([0.5 * (1.0 - self.x0), -0.5 * self.x[0], -0.5 * self.x[1], -0.5 * self.x[2]])
    }

    /// `T = [[X, p·1 - X], [q·1 - X, X + (1 - q - p)·1]]` for `p_1 = p`, `q_1 = q`.
    pub fn to_noise_tensor(&self, p: f64, q: f64) -> Result<NoiseTensor> {
        let pv = [ProbabilityVector::new(vec![p, 1.0 - p])?, ProbabilityVector::new(vec![q, 1.0 - q])?];
        let x = self.block();
        let t11 = x.clone();
        let t12 = &HermitianOp::scaled_identity(2, p) - &x;
        let t21 = &HermitianOp::scaled_identity(2, q) - &x;
        let t22 = &x + &HermitianOp::scaled_identity(2, 1.0 - q - p);
        NoiseTensor::new(PovmTensor::new(2, vec![2, 2], vec![t11, t12, t21, t22])?, &pv)
    }
}

/// Right side minus left side of each of the four positivity inequalities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSlack(pub [f64; 4]);

impl ConstraintSlack {
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_feasible(&self) -> bool {
        self.min() >= 0.0
    }
}

fn slack(a0: f64, a: &[f64; 3], b0: f64, b: &[f64; 3], p: f64, q: f64, x0: f64, x: &[f64; 3]) -> [f64; 4] {
    let comb = |ca: f64, cb: f64, cx: f64| {
        norm3(&[ca * a[0] + cb * b[0] + cx * x[0], ca * a[1] + cb * b[1] + cx * x[1], ca * a[2] + cb * b[2] + cx * x[2]])
    };
    [
        (q + p - 1.0) - (q * a0 + p * b0 - x0) - comb(q, p, -1.0),
        (2.0 - q - p) - (x0 + (1.0 - q) * a0 - p * b0) - comb(1.0 - q, -p, 1.0),
        (2.0 - q - p) - (x0 - q * a0 + (1.0 - p) * b0) - comb(-q, 1.0 - p, 1.0),
        (q + p - 1.0) + (x0 + (1.0 - q) * a0 + (1.0 - p) * b0) - comb(1.0 - q, 1.0 - p, 1.0),
    ]
}

/// Slack of each `M_ij >= 0` constraint for the qubit noise block `(x0, x)`.
///
/// Constraint `k` corresponds to `M_11, M_12, M_21, M_22` in that order; each
/// element is `½[c·1 + w·σ]` and is positive iff `|w| <= c`.
pub fn qubit_constraints(a: &BlochPovm, b: &BlochPovm, p: f64, q: f64, noise: &QubitNoiseParam) -> ConstraintSlack {
    ConstraintSlack(slack(a.bias, &a.vec, b.bias, &b.vec, p, q, noise.x0, &noise.x))
}

/// `M(A, B; p, q; T(noise))` as a `2 × 2` tensor of qubit operators.
pub fn qubit_joint(a: &BlochPovm, b: &BlochPovm, p: f64, q: f64, noise: &QubitNoiseParam) -> Result<PovmTensor> {
    let pv = [ProbabilityVector::new(vec![p, 1.0 - p])?, ProbabilityVector::new(vec![q, 1.0 - q])?];
    let t = noise.to_noise_tensor(p, q)?;
    build_m_thm1(&[a.to_tensor()?, b.to_tensor()?], &pv, &t)
}

/// Joint measurement of an unbiased pair with `p = q = ½`, `x = 0` and
/// `y0 = 2 x0` at the midpoint of `[|a + b|, 2 - |a - b|]`; `None` when that
/// interval is empty.
pub fn construct_unbiased_witness(a: &BlochPovm, b: &BlochPovm) -> Result<Option<(QubitNoiseParam, PovmTensor)>> {
    a.validate()?;
    b.validate()?;
    if a.bias != 0.0 || b.bias != 0.0 {
        return Err(Error::Precondition(format!(
            "closed-form witness needs unbiased measurements, got biases {} and {}",
            a.bias, b.bias
        )));
    }
    if busch_g(&a.vec, &b.vec) > 2.0 {
        return Ok(None);
    }
    let u = norm3(&[a.vec[0] + b.vec[0], a.vec[1] + b.vec[1], a.vec[2] + b.vec[2]]);
    let v = norm3(&[a.vec[0] - b.vec[0], a.vec[1] - b.vec[1], a.vec[2] - b.vec[2]]);
    let y0 = 0.5 * (u + 2.0 - v);
    let noise = QubitNoiseParam { x0: 0.5 * y0, x: [0.0; 3] };
    let m = qubit_joint(a, b, 0.5, 0.5, &noise)?;
    Ok(Some((noise, m)))
}

/// Points per axis of each zoom level.
const ZOOM_POINTS: usize = 5;
const ZOOM_LEVELS: usize = 60;
const ZOOM_SHRINK: f64 = 0.6;

/// Brute-force search for a feasible qubit noise block.
///
/// Scans `(x0, x)` over the regular grid of `[-1, 1]^4` with `resolution`
/// points per axis and returns the lowest-index point whose minimum slack is
/// at least `margin`. If none qualifies, the best grid point seeds a sequence
/// of shrinking `5^4` grids centred on the running best point. The minimum
/// slack is concave in `(x0, x)`, so the zoom climbs toward its maximum.
///
/// Any returned point is a verified witness; `None` is not a proof of
/// incompatibility. The result does not depend on the rayon pool size.
pub fn feasibility_oracle(
    a: &BlochPovm,
    b: &BlochPovm,
    p: f64,
    q: f64,
    resolution: usize,
    margin: f64,
) -> Result<Option<QubitNoiseParam>> {
    if resolution < 8 {
        return Err(Error::Precondition(format!("oracle resolution must be >= 8, got {resolution}")));
    }
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        return Err(Error::Precondition(format!("p = {p}, q = {q} must lie in (0, 1)")));
    }
    a.validate()?;
    b.validate()?;

    let eval = |pt: [f64; 4]| -> f64 {
        slack(a.bias, &a.vec, b.bias, &b.vec, p, q, pt[0], &[pt[1], pt[2], pt[3]])
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    };
    let step = 2.0 / (resolution - 1) as f64;
    let coarse = |flat: usize| -> [f64; 4] {
        let mut pt = [0.0; 4];
        let mut rem = flat;
        for c in pt.iter_mut().rev() {
            *c = -1.0 + step * (rem % resolution) as f64;
            rem /= resolution;
        }
        pt
    };
    let total = resolution.pow(4);

    if let Some(flat) = (0..total).into_par_iter().find_first(|&i| eval(coarse(i)) >= margin) {
        return Ok(Some(to_param(coarse(flat))));
    }

    let (_, best) = (0..total)
        .into_par_iter()
        .map(|i| (eval(coarse(i)), i))
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), better);
    let mut center = coarse(best);
    let mut half = step;
    for _ in 0..ZOOM_LEVELS {
        let mut level_best = (f64::NEG_INFINITY, center);
        for flat in 0..ZOOM_POINTS.pow(4) {
            let mut pt = center;
            let mut rem = flat;
            for c in pt.iter_mut().rev() {
                let k = (rem % ZOOM_POINTS) as f64;
                *c += half * (2.0 * k / (ZOOM_POINTS - 1) as f64 - 1.0);
                rem /= ZOOM_POINTS;
            }
            let v = eval(pt);
            if v >= margin {
                return Ok(Some(to_param(pt)));
            }
            if v > level_best.0 {
                level_best = (v, pt);
            }
        }
        center = level_best.1;
        half *= ZOOM_SHRINK;
        if half < 1e-12 {
            break;
        }
    }
    Ok(None)
}

fn better(x: (f64, usize), y: (f64, usize)) -> (f64, usize) {
    match x.0.total_cmp(&y.0) {
        std::cmp::Ordering::Greater => x,
        std::cmp::Ordering::Less => y,
        std::cmp::Ordering::Equal => if x.1 <= y.1 { x } else { y },
    }
}

fn to_param(pt: [f64; 4]) -> QubitNoiseParam {
    QubitNoiseParam { x0: pt[0], x: [pt[1], pt[2], pt[3]] }
}
