//! Random measurement pairs and the law of the inner product of random unit vectors.
//!
//! Every draw comes from an [`RngStream`]: ChaCha8 keyed by `seed`, with the
//! ChaCha stream number set to `stream_id` and the word position set from
//! `counter`. One counter step is one `u64`. Each logical sample consumes a
//! fixed number of counter steps, so sample `i` of a run can be produced by
//! any worker by jumping to `i * PAIR_WORDS`.
//!
//! Fixed transforms of the raw words:
//!
//! * uniform: top 53 bits scaled to `[0, 1)`;
//! * normals: Box–Muller on two uniforms, giving two normals per pair of words;
//! * direction in `R^m`: `2⌈m/2⌉` words of normals, normalised;
//! * radius in a ball of radius `c`: `c · U^{1/3}` (density `∝ r²`);
//! * general bias: `|x0| = 1 - (1 - U)^{1/4}` (density `4(1 - |x0|)³`), sign
//!   from the lowest bit of the same word.

use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::BlochPovm;

/// Counter steps consumed by one measurement: bias, radius, four direction words.
pub const POVM_WORDS: u64 = 6;
/// Counter steps consumed by one measurement pair.
pub const PAIR_WORDS: u64 = 2 * POVM_WORDS;

const UNIT_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Counter-addressed random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    core: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::at(seed, stream_id, 0)
    }

    /// Stream positioned so that the next draw is word `counter`.
    pub fn at(seed: u64, stream_id: u64, counter: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(seed);
        core.set_stream(stream_id);
        core.set_word_pos(2 * counter as u128);
        RngStream { seed, stream_id, counter, core }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.core.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        word_to_unit(self.next_u64())
    }
}

fn word_to_unit(w: u64) -> f64 {
    (w >> 11) as f64 * UNIT_53
}

fn box_muller(rng: &mut RngStream) -> (f64, f64) {
    let u1 = rng.uniform();
    let u2 = rng.uniform();
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}

fn unit_vector3(rng: &mut RngStream) -> [f64; 3] {
    let (x, y) = box_muller(rng);
    let (z, _) = box_muller(rng);
    let n = (x * x + y * y + z * z).sqrt();
    if n > 0.0 {
        [x / n, y / n, z / n]
    } else {
        [0.0, 0.0, 1.0]
    }
}

/// Uniform point on the unit sphere `S^{m-1} ⊂ R^m`.
pub fn sample_unit_sphere(rng: &mut RngStream, m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::Domain(format!("sphere sampling needs m >= 2, got {m}")));
    }
    let mut v = Vec::with_capacity(m + 1);
    while v.len() < m {
        let (a, b) = box_muller(rng);
        v.push(a);
        v.push(b);
    }
    v.truncate(m);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    } else {
        v[0] = 1.0;
    }
    Ok(v)
}

/// Radius with density `∝ r²` on `[0, cap]`.
pub fn sample_sharpness(rng: &mut RngStream, cap: f64) -> Result<f64> {
    if !(cap > 0.0 && cap <= 1.0) {
        return Err(Error::Domain(format!("sharpness cap must lie in (0, 1], got {cap}")));
    }
    Ok(cap * rng.uniform().cbrt())
}

/// The distribution a random pair of measurements is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureSpec {
    /// Zero biases, Bloch vectors uniform in the unit ball.
    Unbiased,
    /// Each `(x0, x)` uniform (Lebesgue) on `{ |x0| + |x| <= 1 }`.
    General,
    /// Fixed biases, Bloch vectors uniform in balls of radius `1 - |a0|`, `1 - |b0|`.
    Section { a0: f64, b0: f64 },
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<()> {
        if let MeasureSpec::Section { a0, b0 } = *self {
            for (name, v) in [("a0", a0), ("b0", b0)] {
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!("section bias {name} = {v} outside [-1, 1]")));
                }
            }
        }
        Ok(())
    }
}

fn draw_povm(rng: &mut RngStream, fixed_bias: Option<f64>) -> BlochPovm {
    let bias_word = rng.next_u64();
    let bias = fixed_bias.unwrap_or_else(|| {
        let t = 1.0 - (1.0 - word_to_unit(bias_word)).powf(0.25);
        if bias_word & 1 == 1 { -t } else { t }
    });
    let r = (1.0 - bias.abs()) * rng.uniform().cbrt();
    let dir = unit_vector3(rng);
    BlochPovm { bias, vec: [r * dir[0], r * dir[1], r * dir[2]] }
}

/// Draws a pair without validating `spec`; consumes exactly [`PAIR_WORDS`].
pub(crate) fn draw_pair(rng: &mut RngStream, spec: &MeasureSpec) -> (BlochPovm, BlochPovm) {
    let (fa, fb) = match *spec {
        MeasureSpec::Unbiased => (Some(0.0), Some(0.0)),
        MeasureSpec::General => (None, None),
        MeasureSpec::Section { a0, b0 } => (Some(a0), Some(b0)),
    };
    let a = draw_povm(rng, fa);
    let b = draw_povm(rng, fb);
    (a, b)
}

/// One random pair of measurements under `spec`.
pub fn sample_pair(rng: &mut RngStream, spec: &MeasureSpec) -> Result<(BlochPovm, BlochPovm)> {
    spec.validate()?;
    Ok(draw_pair(rng, spec))
}

/// `C_m = Γ(m/2) / (√π Γ((m-1)/2))` via `C_{m+2} = C_m · m/(m-1)` from
/// `C_2 = 1/π`, `C_3 = 1/2`.
fn inner_product_constant(m: usize) -> f64 {
    let (mut c, mut k) = if m % 2 == 0 { (1.0 / PI, 2) } else { (0.5, 3) };
    while k < m {
        c *= k as f64 / (k as f64 - 1.0);
        k += 2;
    }
    c
}

/// Density `p_m(s) = C_m (1 - s²)^{(m-3)/2}` of `⟨u, v⟩` for independent
/// uniform unit vectors in `R^m`. For `m = 2` the endpoints return `+∞`.
pub fn density_inner_product(s: f64, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::Domain(format!("inner-product law needs m >= 2, got {m}")));
    }
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("inner product {s} outside [-1, 1]")));
    }
    let c = inner_product_constant(m);
    Ok(match m {
        3 => c,
        _ => c * (1.0 - s * s).powf((m as f64 - 3.0) / 2.0),
    })
}

/// `P[⟨u, v⟩ <= s] = ½ + C_m J_{m-3}(s)` with `J_k(s) = ∫_0^s (1 - t²)^{k/2} dt`,
/// from `J_{-1} = asin s`, `J_0 = s` and
/// `J_k = [s (1 - s²)^{k/2} + k J_{k-2}] / (k + 1)`.
pub fn inner_product_cdf(s: f64, m: usize) -> Result<f64> {
    density_inner_product(s.clamp(-1.0, 1.0), m)?;
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("inner product {s} outside [-1, 1]")));
    }
    let k_max = m as i64 - 3;
    let w = (1.0 - s) * (1.0 + s);
    let (mut j, mut k) = if k_max % 2 == 0 { (s, 0) } else { (s.asin(), -1) };
    while k < k_max {
        k += 2;
        j = (s * w.powf(k as f64 / 2.0) + k as f64 * j) / (k as f64 + 1.0);
    }
    Ok((0.5 + inner_product_constant(m) * j).clamp(0.0, 1.0))
}

/// Surface measure `N_m = 2π^{m/2} / Γ(m/2)` of `S^{m-1}`.
pub fn norm_constant(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("sphere dimension must be >= 1".into()));
    }
    let (mut n, mut k) = if m % 2 == 0 { (2.0 * PI, 2) } else { (2.0, 1) };
    while k < m {
        n *= 2.0 * PI / k as f64;
        k += 2;
    }
    Ok(n)
}
