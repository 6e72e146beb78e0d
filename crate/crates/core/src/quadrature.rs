//! Adaptive Gauss–Legendre quadrature.
//!
//! Each interval is integrated with an `n`-point Gauss–Legendre rule and
//! compared against the sum over its two halves; intervals that disagree by
//! more than their share of the tolerance are bisected. Square-root edges at
//! region boundaries are absorbed by repeated bisection toward the edge.
//! Nested integrals are built by calling [`integrate`] inside an integrand; a
//! failed inner integral yields NaN, which the outer call reports.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const DEFAULT_ORDER: usize = 10;
const MAX_DEPTH: u32 = 100;
/// Integrand calls allowed per [`integrate`] call, nested calls counted separately.
const MAX_EVALS: u64 = 1 << 27;

/// Nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Roots of `P_n` by Newton iteration from the Chebyshev-like initial guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Fixed-rule estimate of `∫_a^b f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Value, accumulated error estimate and number of integrand calls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: u64,
}

struct Adaptive<'r, F> {
    rule: &'r GaussLegendre,
    f: F,
    evals: u64,
    error: f64,
    exhausted: bool,
}

impl<F: FnMut(f64) -> f64> Adaptive<'_, F> {
    fn estimate(&mut self, a: f64, b: f64) -> f64 {
        self.evals += self.rule.order() as u64;
        self.rule.integrate(&mut self.f, a, b)
    }

    fn refine(&mut self, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let left = self.estimate(a, mid);
        let right = self.estimate(mid, b);
        let halves = left + right;
        let diff = (halves - whole).abs();
        if !halves.is_finite() {
            return f64::NAN;
        }
        // below round-off of the running value no further bisection can help
        let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
        if diff <= tol.max(floor) || mid <= a || mid >= b {
            self.error += diff;
            return halves;
        }
        if depth >= MAX_DEPTH || self.evals >= MAX_EVALS {
            self.exhausted = true;
            self.error += diff;
            return halves;
        }
        self.refine(a, mid, left, 0.5 * tol, depth + 1) + self.refine(mid, b, right, 0.5 * tol, depth + 1)
    }
}

/// `∫_a^b f` to absolute tolerance `tol` with the default 10-point rule.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    thread_local! {
        static RULE: GaussLegendre = GaussLegendre::new(DEFAULT_ORDER);
    }
    RULE.with(|rule| integrate_with(rule, f, a, b, tol))
}

pub fn integrate_with<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadResult> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("non-finite limits [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    let mut ad = Adaptive { rule, f, evals: 0, error: 0.0, exhausted: false };
    let whole = ad.estimate(a, b);
    let value = if whole.is_finite() { ad.refine(a, b, whole, tol, 0) } else { f64::NAN };
    if !value.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    if ad.exhausted {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] within depth {MAX_DEPTH} and {MAX_EVALS} evaluations (error estimate {:.3e}, tol {tol:.1e})",
            ad.error
        )));
    }
    Ok(QuadResult { value, error: ad.error, evals: ad.evals })
}

/// Inner-integral helper: the value, or NaN so the enclosing integral fails.
pub(crate) fn inner<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate(f, a, b, tol).map_or(f64::NAN, |q| q.value)
}
