//! Volumes, expectations and incompatibility probabilities.
//!
//! Three routes are provided: closed forms (`vol_*`), deterministic nested
//! quadrature over `(a, b, s)` (lengths of the two Bloch vectors and the cosine
//! of their angle), and Monte Carlo over [`MeasureSpec`]s.
//!
//! Monte Carlo runs are split into fixed chunks of [`CHUNK`] samples. Chunk `c`
//! reads its pairs from counter `c · CHUNK · PAIR_WORDS` of one stream, so the
//! estimate is a function of `(seed, n)` alone, whatever the rayon pool size.

use std::cell::Cell;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::verdict_unchecked;
use crate::error::{Error, Result};
use crate::povm::dot3;
use crate::quadrature::{self, inner};
use crate::sampling::{draw_pair, MeasureSpec, RngStream, PAIR_WORDS};

/// Samples per Monte Carlo work unit.
pub const CHUNK: u64 = 1 << 14;
/// Stream used by [`prob_mc`] and [`vol_njm_mc`].
pub const PROB_STREAM: u64 = 0;
/// Stream used by [`expectation_mc`].
pub const EXPECTATION_STREAM: u64 = 1;
/// Grid cell `(i, j)` of an `r × r` grid uses stream `GRID_STREAM_BASE + i·r + j`.
pub const GRID_STREAM_BASE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mc,
    Quadrature,
    ClosedForm,
}

/// A computed quantity with its uncertainty and provenance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub value: f64,
    /// Binomial or sample standard error for Monte Carlo; 0 otherwise.
    pub stderr: f64,
    /// Samples drawn, or integrand evaluations for quadrature.
    #[serde(rename = "n")]
    pub samples_or_nodes: u64,
    pub seed: Option<u64>,
    pub method: Method,
}

impl EstimateResult {
    fn closed_form(value: f64) -> Self {
        EstimateResult { value, stderr: 0.0, samples_or_nodes: 0, seed: None, method: Method::ClosedForm }
    }

    fn quadrature(value: f64, nodes: u64) -> Self {
        EstimateResult { value, stderr: 0.0, samples_or_nodes: nodes, seed: None, method: Method::Quadrature }
    }

    fn proportion(hits: u64, n: u64, seed: u64) -> Self {
        let v = hits as f64 / n as f64;
        EstimateResult {
            value: v,
            stderr: (v * (1.0 - v) / n as f64).sqrt(),
            samples_or_nodes: n,
            seed: Some(seed),
            method: Method::Mc,
        }
    }
}

/// Lebesgue volume of `{(x0, x) ∈ R^4 : |x0| + |x| <= 1}`: `2π/3`.
pub fn vol_v() -> f64 {
    2.0 * PI / 3.0
}

/// Volume of all qubit measurement pairs, `vol(V)²`.
pub fn vol_pairs() -> f64 {
    vol_v() * vol_v()
}

/// `vol(V)` as `∫ (4π/3)(1 - |x0|)³ dx0`, split at the kink.
pub fn vol_v_quadrature(tol: f64) -> Result<EstimateResult> {
    let f = |x0: f64| 4.0 * PI / 3.0 * (1.0 - x0.abs()).powi(3);
    let lo = quadrature::integrate(f, -1.0, 0.0, 0.5 * tol)?;
    let hi = quadrature::integrate(f, 0.0, 1.0, 0.5 * tol)?;
    Ok(EstimateResult::quadrature(lo.value + hi.value, lo.evals + hi.evals))
}

/// Volume of the section at fixed biases: `(4π/3)² (1 - |a0|)³ (1 - |b0|)³`.
pub fn vol_section(a0: f64, b0: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&a0) || !(-1.0..=1.0).contains(&b0) {
        return Err(Error::Domain(format!("biases ({a0}, {b0}) outside [-1, 1]²")));
    }
    let ball = 4.0 * PI / 3.0;
    Ok(ball * ball * (1.0 - a0.abs()).powi(3) * (1.0 - b0.abs()).powi(3))
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("tolerance must be positive, got {tol}")))
    }
}

/// `∫_{Ω_NJM} w(a, b, s) da db ds` over the unbiased incompatible region
/// `a ∈ (0, 1)`, `b ∈ (√(1 - a²), 1)`, `|s| < √(a² + b² - 1)/(ab)`.
pub fn unbiased_region_integral<W: Fn(f64, f64, f64) -> f64>(weight: W, tol: f64) -> Result<EstimateResult> {
    check_tol(tol)?;
    let evals = Cell::new(0u64);
    let q = quadrature::integrate(
        |a| {
            let lo = (1.0 - a * a).sqrt();
            inner(
                |b| {
                    let smax = s_window(a, b, lo);
                    inner(
                        |s| {
                            evals.set(evals.get() + 1);
                            weight(a, b, s)
                        },
                        -smax,
                        smax,
                        1e-3 * tol,
                    )
                },
                lo,
                1.0,
                1e-2 * tol,
            )
        },
        0.0,
        1.0,
        0.5 * tol,
    )?;
    Ok(EstimateResult::quadrature(q.value, evals.get()))
}

/// Half-width `√(a² + b² - 1)/(ab)` of the incompatible `s` window, with the
/// radicand written as `(b - lo)(b + lo)`, `lo = √(1 - a²)`, so that it stays
/// accurate next to the lower `b` limit.
fn s_window(a: f64, b: f64, lo: f64) -> f64 {
    ((b - lo) * (b + lo)).max(0.0).sqrt() / (a * b)
}

/// `∫ w(a, b, s) da db ds` over `[0, 1]² × [-1, 1]`.
fn full_domain_integral<W: Fn(f64, f64, f64) -> f64>(weight: W, tol: f64) -> Result<EstimateResult> {
    check_tol(tol)?;
    let evals = Cell::new(0u64);
    let q = quadrature::integrate(
        |a| {
            inner(
                |b| {
                    inner(
                        |s| {
                            evals.set(evals.get() + 1);
                            weight(a, b, s)
                        },
                        -1.0,
                        1.0,
                        1e-3 * tol,
                    )
                },
                0.0,
                1.0,
                1e-2 * tol,
            )
        },
        0.0,
        1.0,
        0.5 * tol,
    )?;
    Ok(EstimateResult::quadrature(q.value, evals.get()))
}

/// Joint density `(9/2) a² b²` of `(a, b, s)` for unbiased random pairs.
fn unbiased_density(a: f64, b: f64) -> f64 {
    4.5 * a * a * b * b
}

fn f_of(a: f64, b: f64, s: f64) -> f64 {
    a * a + b * b - a * a * b * b * s * s
}

fn g_of(a: f64, b: f64, s: f64) -> f64 {
    let base = a * a + b * b;
    let cross = 2.0 * a * b * s;
    (base + cross).max(0.0).sqrt() + (base - cross).max(0.0).sqrt()
}

/// `∫_{Ω_NJM} w(a, b)` for weights free of `s`: the `s` window is
/// integrated exactly, leaving a two-dimensional quadrature.
fn unbiased_region_integral_2d<W: Fn(f64, f64) -> f64>(weight: W, tol: f64) -> Result<EstimateResult> {
    check_tol(tol)?;
    let evals = Cell::new(0u64);
    let q = quadrature::integrate(
        |a| {
            let lo = (1.0 - a * a).sqrt();
            inner(
                |b| {
                    evals.set(evals.get() + 1);
                    2.0 * s_window(a, b, lo) * weight(a, b)
                },
                lo,
                1.0,
                1e-2 * tol,
            )
        },
        0.0,
        1.0,
        0.5 * tol,
    )?;
    Ok(EstimateResult::quadrature(q.value, evals.get()))
}

/// Incompatibility probability of a random unbiased pair by quadrature.
pub fn prob_unbiased_quadrature(tol: f64) -> Result<EstimateResult> {
    unbiased_region_integral_2d(unbiased_density, tol)
}

/// Lebesgue volumes `(vol(Ω̃_NJM), vol(Ω̃))` of the incompatible and the
/// full unbiased pair sets, with `vol(Ω̃) = (4π)²/9`. The first comes from
/// `N_3² ∫ a² b² p_3(s)` over the incompatible region.
pub fn unbiased_lebesgue_volumes(tol: f64) -> Result<(EstimateResult, EstimateResult)> {
    let n3 = 4.0 * PI;
    let scale = n3 * n3;
    let mut njm = unbiased_region_integral_2d(|a, b| a * a * b * b * 0.5, tol / scale)?;
    njm.value *= scale;
    Ok((njm, EstimateResult::closed_form(scale / 9.0)))
}

/// `E[f]` over all unbiased pairs.
pub fn expectation_f(tol: f64) -> Result<EstimateResult> {
    full_domain_integral(|a, b, s| unbiased_density(a, b) * f_of(a, b, s), tol)
}

/// `E[g]` over all unbiased pairs.
pub fn expectation_g(tol: f64) -> Result<EstimateResult> {
    full_domain_integral(|a, b, s| unbiased_density(a, b) * g_of(a, b, s), tol)
}

/// `∫_{Ω_NJM} f p`: the expectation integral restricted to incompatible pairs.
pub fn expectation_f_restricted(tol: f64) -> Result<EstimateResult> {
    unbiased_region_integral(|a, b, s| unbiased_density(a, b) * f_of(a, b, s), tol)
}

/// `∫_{Ω_NJM} g p`.
pub fn expectation_g_restricted(tol: f64) -> Result<EstimateResult> {
    unbiased_region_integral(|a, b, s| unbiased_density(a, b) * g_of(a, b, s), tol)
}

/// Lower limit of `a` in the `(λ, 0)` section, as a function of `(b, s)`.
/// The radicand is kept in factored form; the expanded polynomial loses
/// about half its digits near the edge of the window.
fn lambda_a_lower(l: f64, b: f64, s: f64) -> f64 {
    let one_minus_b2 = (1.0 - b) * (1.0 + b);
    let one_minus_s2 = (1.0 - s) * (1.0 + s);
    let r = one_minus_b2 * (1.0 / (1.0 - b * b * s * s) - l * l / (b * b * one_minus_s2));
    if r.is_nan() {
        return 0.0;
    }
    r.max(0.0).sqrt()
}

/// Incompatibility probability of a random pair with biases `(λ, 0)` by
/// nested quadrature over `b ∈ (√|λ|, 1)` and the admissible `s` window;
/// the `a ∈ (a_lower(b, s), 1 - |λ|)` integral is done in closed form.
pub fn prob_lambda_section(lambda: f64, tol: f64) -> Result<EstimateResult> {
    if !(lambda.abs() < 1.0) {
        return Err(Error::Domain(format!("|lambda| must be < 1, got {lambda}")));
    }
    check_tol(tol)?;
    let l = lambda.abs();
    let cap = 1.0 - l;
    let norm = 4.5 / cap.powi(3);
    let evals = Cell::new(0u64);
    let q = quadrature::integrate(
        |b| {
            let smax = ((b * b - l) / (b * b * cap)).max(0.0).sqrt().min(1.0);
            inner(
                |s| {
                    let lo = lambda_a_lower(l, b, s);
                    if lo >= cap {
                        return 0.0;
                    }
                    evals.set(evals.get() + 1);
                    b * b * (cap.powi(3) - lo.powi(3)) / 3.0
                },
                -smax,
                smax,
                1e-2 * tol / norm,
            )
        },
        l.sqrt(),
        1.0,
        0.5 * tol / norm,
    )?;
    Ok(EstimateResult::quadrature(norm * q.value, evals.get()))
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::Domain("sample count must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn chunk_bounds(n: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let chunks = usize::try_from(n.div_ceil(CHUNK)).expect("chunk count fits usize");
    (0..chunks).into_par_iter().map(move |c| {
        let c = c as u64;
        (c * CHUNK, ((c + 1) * CHUNK).min(n))
    })
}

/// Number of incompatible pairs among samples `0..n` of `(seed, stream)`.
pub fn count_incompatible(spec: &MeasureSpec, n: u64, seed: u64, stream: u64) -> Result<u64> {
    spec.validate()?;
    chunk_bounds(n)
        .map(|(start, end)| {
            let mut rng = RngStream::at(seed, stream, start * PAIR_WORDS);
            let mut hits = 0u64;
            for _ in start..end {
                let (a, b) = draw_pair(&mut rng, spec);
                if !verdict_unchecked(a.bias, &a.vec, b.bias, &b.vec)?.compatible {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .try_reduce(|| 0, |x, y| Ok(x + y))
}

/// Monte Carlo incompatibility probability under `spec`.
pub fn prob_mc(spec: &MeasureSpec, n: u64, seed: u64) -> Result<EstimateResult> {
    check_n(n)?;
    let hits = count_incompatible(spec, n, seed, PROB_STREAM)?;
    Ok(EstimateResult::proportion(hits, n, seed))
}

/// `vol(Θ_NJM) = Pr[incompatible] · vol(V)²` from the general measure.
pub fn vol_njm_mc(n: u64, seed: u64) -> Result<EstimateResult> {
    let p = prob_mc(&MeasureSpec::General, n, seed)?;
    Ok(EstimateResult { value: p.value * vol_pairs(), stderr: p.stderr * vol_pairs(), ..p })
}

/// Monte Carlo `(E[f], E[g])` over unbiased pairs, with sample standard errors.
pub fn expectation_mc(n: u64, seed: u64) -> Result<(EstimateResult, EstimateResult)> {
    check_n(n)?;
    let spec = MeasureSpec::Unbiased;
    let partials: Vec<[f64; 4]> = chunk_bounds(n)
        .map(|(start, end)| {
            let mut rng = RngStream::at(seed, EXPECTATION_STREAM, start * PAIR_WORDS);
            let mut acc = [0.0; 4];
            for _ in start..end {
                let (a, b) = draw_pair(&mut rng, &spec);
                let ab = dot3(&a.vec, &b.vec);
                let f = dot3(&a.vec, &a.vec) + dot3(&b.vec, &b.vec) - ab * ab;
                let g = crate::criterion::busch_g(&a.vec, &b.vec);
                acc[0] += f;
                acc[1] += f * f;
                acc[2] += g;
                acc[3] += g * g;
            }
            acc
        })
        .collect();
    let mut tot = [0.0; 4];
    for p in &partials {
        for k in 0..4 {
            tot[k] += p[k];
        }
    }
    let nf = n as f64;
    let summarize = |sum: f64, sumsq: f64| {
        let mean = sum / nf;
        let var = ((sumsq / nf - mean * mean) * nf / (nf - 1.0).max(1.0)).max(0.0);
        EstimateResult { value: mean, stderr: (var / nf).sqrt(), samples_or_nodes: n, seed: Some(seed), method: Method::Mc }
    };
    Ok((summarize(tot[0], tot[1]), summarize(tot[2], tot[3])))
}

/// Monte Carlo incompatibility probabilities over a grid of bias sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityGrid {
    pub a0_nodes: Vec<f64>,
    pub b0_nodes: Vec<f64>,
    /// `values[i][j]` is the estimate at `(a0_nodes[i], b0_nodes[j])`.
    pub values: Vec<Vec<EstimateResult>>,
}

impl ProbabilityGrid {
    pub fn get(&self, i: usize, j: usize) -> &EstimateResult {
        &self.values[i][j]
    }

    /// `a0,b0,prob,stderr,n` with one row per cell, `a0` outermost.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a0,b0,prob,stderr,n\n");
        for (i, &a0) in self.a0_nodes.iter().enumerate() {
            for (j, &b0) in self.b0_nodes.iter().enumerate() {
                let e = &self.values[i][j];
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    format_sig(a0, 9),
                    format_sig(b0, 9),
                    format_sig(e.value, 9),
                    format_sig(e.stderr, 9),
                    e.samples_or_nodes
                );
            }
        }
        out
    }
}

/// `resolution` evenly spaced nodes on `[-1, 1]`, endpoints included.
pub fn grid_nodes(resolution: usize) -> Vec<f64> {
    let last = (resolution - 1) as f64;
    (0..resolution).map(|i| -1.0 + (2 * i) as f64 / last).collect()
}

/// Section-measure estimates over a `resolution × resolution` grid of `(a0, b0)`.
pub fn prob_grid(resolution: usize, n_per_cell: u64, seed: u64) -> Result<ProbabilityGrid> {
    if resolution < 3 {
        return Err(Error::Domain(format!("grid resolution must be >= 3, got {resolution}")));
    }
    check_n(n_per_cell)?;
    let nodes = grid_nodes(resolution);
    let cells: Vec<EstimateResult> = (0..resolution * resolution)
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell / resolution, cell % resolution);
            let spec = MeasureSpec::Section { a0: nodes[i], b0: nodes[j] };
            let hits = count_incompatible(&spec, n_per_cell, seed, GRID_STREAM_BASE + cell as u64)?;
            Ok(EstimateResult::proportion(hits, n_per_cell, seed))
        })
        .collect::<Result<_>>()?;
    let values = cells.chunks(resolution).map(<[_]>::to_vec).collect();
    Ok(ProbabilityGrid { a0_nodes: nodes.clone(), b0_nodes: nodes, values })
}

/// `x` with `sig` significant digits, `%g` style: plain notation for
/// moderate exponents, scientific otherwise, trailing zeros dropped.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Unit-ball pair moments used by the expectation cross-checks: `E[a²]`,
/// `E[s²]` under `p_3`.
pub fn unbiased_moments() -> (f64, f64) {
    (3.0 / 5.0, 1.0 / 3.0)
}
