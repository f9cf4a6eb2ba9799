//! Conditional-density families `g_n(x | x_1, ..., x_{n-1})` driving the
//! enumeration, together with intensity profiles for the count models.
//!
//! Steps are 1-based: `eval(n, x, history)` reads `history[..n-1]` as the
//! previously drawn coordinates.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Binary digits available from an exact 53-bit scaling of a double in (0,1).
pub const MANTISSA_DIGITS: u32 = 53;

/// Deepest digit a history coordinate may be asked for.
pub const MAX_DIGIT_DEPTH: u32 = 52;

/// Largest step accepted by the shrinking family (its bound is `2^n`).
const SHRINKING_MAX_STEP: usize = 1000;

pub trait DensityFamily: Send + Sync {
    fn name(&self) -> &str;

    fn eval(&self, step: usize, x: f64, history: &[f64]) -> Result<f64>;

    /// Finite upper bound on `sup_x eval(step, x, history)`.
    fn sup_bound(&self, step: usize, history: &[f64]) -> Result<f64>;

    /// Declared truth of the divergent-series condition. Not derived.
    fn diverges(&self) -> bool;

    /// `g_n(. | history)` is one fixed density for every step and history.
    fn stationary(&self) -> bool {
        false
    }

    /// Draws `x_step` from `g_step(. | history)`. `None` when the family has
    /// no direct sampler; samplers are only used as independent oracles.
    fn sample_next(
        &self,
        _step: usize,
        _history: &[f64],
        _rng: &mut dyn RngCore,
    ) -> Option<Result<f64>> {
        None
    }
}

impl fmt::Debug for dyn DensityFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DensityFamily({})", self.name())
    }
}

fn check_step(step: usize) -> Result<()> {
    if step == 0 {
        Err(Error::contract("steps are numbered from 1"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl DensityFamily for Uniform {
    fn name(&self) -> &str {
        "uniform"
    }
    fn eval(&self, step: usize, _x: f64, _history: &[f64]) -> Result<f64> {
        check_step(step)?;
        Ok(1.0)
    }
    fn sup_bound(&self, _step: usize, _history: &[f64]) -> Result<f64> {
        Ok(1.0)
    }
    fn diverges(&self) -> bool {
        true
    }
    fn stationary(&self) -> bool {
        true
    }
    fn sample_next(&self, _: usize, _: &[f64], rng: &mut dyn RngCore) -> Option<Result<f64>> {
        Some(Ok(rng::open01(rng)))
    }
}

/// Density `2x`, CDF `x^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Triangular;

fn triangular_draw(rng: &mut dyn RngCore) -> f64 {
    // max of two uniforms has CDF x^2
    rng::open01(rng).max(rng::open01(rng))
}

impl DensityFamily for Triangular {
    fn name(&self) -> &str {
        "triangular"
    }
    fn eval(&self, step: usize, x: f64, _history: &[f64]) -> Result<f64> {
        check_step(step)?;
        Ok(2.0 * x)
    }
    fn sup_bound(&self, _step: usize, _history: &[f64]) -> Result<f64> {
        Ok(2.0)
    }
    fn diverges(&self) -> bool {
        true
    }
    fn stationary(&self) -> bool {
        true
    }
    fn sample_next(&self, _: usize, _: &[f64], rng: &mut dyn RngCore) -> Option<Result<f64>> {
        Some(Ok(triangular_draw(rng)))
    }
}

/// Uniform on odd steps, triangular on even steps.
#[derive(Debug, Clone, Copy, Default)]
pub struct Alternating;

impl DensityFamily for Alternating {
    fn name(&self) -> &str {
        "alternating"
    }
    fn eval(&self, step: usize, x: f64, _history: &[f64]) -> Result<f64> {
        check_step(step)?;
        Ok(if step % 2 == 1 { 1.0 } else { 2.0 * x })
    }
    fn sup_bound(&self, step: usize, _history: &[f64]) -> Result<f64> {
        Ok(if step % 2 == 1 { 1.0 } else { 2.0 })
    }
    fn diverges(&self) -> bool {
        true
    }
    fn sample_next(&self, step: usize, _: &[f64], rng: &mut dyn RngCore) -> Option<Result<f64>> {
        Some(Ok(if step % 2 == 1 {
            rng::open01(rng)
        } else {
            triangular_draw(rng)
        }))
    }
}

/// Independent steps, step `n` uniform on `(0, 2^-n)`. Satisfies absolute
/// continuity but its density series converges at every `x > 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Shrinking;

impl DensityFamily for Shrinking {
    fn name(&self) -> &str {
        "shrinking"
    }
    fn eval(&self, step: usize, x: f64, _history: &[f64]) -> Result<f64> {
        check_step(step)?;
        let width = (-(step as f64)).exp2();
        Ok(if x < width { 1.0 / width } else { 0.0 })
    }
    fn sup_bound(&self, step: usize, _history: &[f64]) -> Result<f64> {
        if step > SHRINKING_MAX_STEP {
            return Err(Error::UnsupportedFamily(format!(
                "shrinking family bound 2^{step} is not representable"
            )));
        }
        Ok((step as f64).exp2())
    }
    fn diverges(&self) -> bool {
        false
    }
    fn sample_next(&self, step: usize, _: &[f64], rng: &mut dyn RngCore) -> Option<Result<f64>> {
        Some(Ok(rng::open01(rng) * (-(step as f64)).exp2()))
    }
}

// ---------------------------------------------------------------------------
// Binary digits

/// `floor(x * 2^depth)`: the first `depth` binary digits of `x` as an integer.
pub fn leading_digits(x: f64, depth: u32) -> u64 {
    debug_assert!(depth <= MANTISSA_DIGITS);
    (x * (depth as f64).exp2()).floor() as u64
}

/// Digits `first..=last` (1-based) of a history coordinate, most significant
/// first. Fails when the expansion is not unique through `last` (the value is
/// a dyadic rational with at most `last` digits) or when `last` exceeds the
/// available precision.
pub fn digit_block(x: f64, first: u32, last: u32) -> Result<u64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::DegenerateInput(format!("{x} is not in (0,1)")));
    }
    if last > MAX_DIGIT_DEPTH {
        return Err(Error::DegenerateInput(format!(
            "digit {last} needed but only {MAX_DIGIT_DEPTH} are reliable"
        )));
    }
    if first == 0 || first > last + 1 {
        return Err(Error::contract(format!("bad digit range {first}..={last}")));
    }
    if first == last + 1 {
        return Ok(0);
    }
    let scaled = x * (last as f64).exp2();
    if scaled.fract() == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "{x:e} terminates within {last} binary digits; expansion is ambiguous"
        )));
    }
    let all = scaled.floor() as u64;
    Ok(all & ((1u64 << (last - first + 1)) - 1))
}

/// Draw in (0,1) whose first `depth` digits are `pattern`; remaining digits
/// uniform, with the 53rd digit set so the expansion never terminates early.
fn fill_below(pattern: u64, depth: u32, rng: &mut dyn RngCore) -> f64 {
    debug_assert!(depth <= MAX_DIGIT_DEPTH);
    let free = MANTISSA_DIGITS - depth;
    let low = (rng.next_u64() >> (64 - free)) | 1;
    let m = (pattern << free) | low;
    m as f64 / (MANTISSA_DIGITS as f64).exp2()
}

/// Dyadic interval `[numerator, numerator + 1) * 2^-depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DyadicInterval {
    pub numerator: u64,
    pub depth: u32,
}

impl DyadicInterval {
    pub fn contains(&self, x: f64) -> bool {
        leading_digits(x, self.depth) == self.numerator
    }

    pub fn bounds(&self) -> (f64, f64) {
        let scale = (-(self.depth as f64)).exp2();
        (self.numerator as f64 * scale, (self.numerator + 1) as f64 * scale)
    }
}

/// The digit-sharing sequence: digits `k..=2k-1` of `X_k` are the first `k`
/// digits of `X_{k+1}`; all other digits are fair and independent.
///
/// The `permuted` variant presents the same process in the order
/// `X_2, X_1, X_4, X_3, ...`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DigitShare {
    pub permuted: bool,
}

impl DigitShare {
    pub fn original() -> Self {
        DigitShare { permuted: false }
    }

    pub fn permuted() -> Self {
        DigitShare { permuted: true }
    }

    fn history_at(history: &[f64], index: usize) -> Result<f64> {
        history.get(index).copied().ok_or_else(|| {
            Error::contract(format!(
                "history has {} points, coordinate {} needed",
                history.len(),
                index + 1
            ))
        })
    }

    /// Support of `g_step(. | history)`, or `None` when it is all of (0,1).
    pub fn support(&self, step: usize, history: &[f64]) -> Result<Option<DyadicInterval>> {
        check_step(step)?;
        if !self.permuted {
            if step == 1 {
                return Ok(None);
            }
            let k = (step - 1) as u32;
            let prev = Self::history_at(history, step - 2)?;
            let numerator = digit_block(prev, k, 2 * k - 1)?;
            return Ok(Some(DyadicInterval {
                numerator,
                depth: k,
            }));
        }
        if step % 2 == 1 {
            // an even-indexed original, independent of everything drawn so far
            return Ok(None);
        }
        // step 2j draws X_{2j-1}; its digits 1..=2j-2 come from X_{2j-2} and
        // digits 2j-1..=4j-3 are the leading digits of X_{2j}
        let j = (step / 2) as u32;
        let depth = 4 * j - 3;
        if depth > MAX_DIGIT_DEPTH {
            return Err(Error::DegenerateInput(format!(
                "step {step} needs {depth} digits of history"
            )));
        }
        let high = if j >= 2 {
            let x_prev = Self::history_at(history, 2 * j as usize - 4)?;
            digit_block(x_prev, 2 * j - 2, 4 * j - 5)?
        } else {
            0
        };
        let x_next = Self::history_at(history, 2 * j as usize - 2)?;
        let low = digit_block(x_next, 1, 2 * j - 1)?;
        Ok(Some(DyadicInterval {
            numerator: (high << (2 * j - 1)) | low,
            depth,
        }))
    }
}

impl DensityFamily for DigitShare {
    fn name(&self) -> &str {
        if self.permuted {
            "digit-share-permuted"
        } else {
            "digit-share"
        }
    }

    fn eval(&self, step: usize, x: f64, history: &[f64]) -> Result<f64> {
        Ok(match self.support(step, history)? {
            None => 1.0,
            Some(iv) if iv.contains(x) => (iv.depth as f64).exp2(),
            Some(_) => 0.0,
        })
    }

    fn sup_bound(&self, step: usize, _history: &[f64]) -> Result<f64> {
        check_step(step)?;
        let depth = match (self.permuted, step % 2) {
            (false, _) => step - 1,
            (true, 1) => 0,
            (true, _) => 2 * step - 3,
        };
        Ok((depth as f64).exp2())
    }

    fn diverges(&self) -> bool {
        self.permuted
    }

    fn sample_next(
        &self,
        step: usize,
        history: &[f64],
        rng: &mut dyn RngCore,
    ) -> Option<Result<f64>> {
        Some(self.support(step, history).map(|s| match s {
            None => rng::open01(rng),
            Some(iv) => fill_below(iv.numerator, iv.depth, rng),
        }))
    }
}

/// Built-in families selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Uniform,
    Triangular,
    Alternating,
    DigitShare,
    DigitSharePermuted,
    Shrinking,
}

impl FamilyKind {
    pub fn build(self) -> Arc<dyn DensityFamily> {
        match self {
            FamilyKind::Uniform => Arc::new(Uniform),
            FamilyKind::Triangular => Arc::new(Triangular),
            FamilyKind::Alternating => Arc::new(Alternating),
            FamilyKind::DigitShare => Arc::new(DigitShare::original()),
            FamilyKind::DigitSharePermuted => Arc::new(DigitShare::permuted()),
            FamilyKind::Shrinking => Arc::new(Shrinking),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        <Self as clap::ValueEnum>::from_str(name, false).map_err(|_| Error::UnknownName(name.into()))
    }
}

pub fn uniform_family() -> Arc<dyn DensityFamily> {
    Arc::new(Uniform)
}

pub fn triangular_family() -> Arc<dyn DensityFamily> {
    Arc::new(Triangular)
}

pub fn alternating_family() -> Arc<dyn DensityFamily> {
    Arc::new(Alternating)
}

pub fn digit_share_family() -> Arc<dyn DensityFamily> {
    Arc::new(DigitShare::original())
}

pub fn digit_share_permuted_family() -> Arc<dyn DensityFamily> {
    Arc::new(DigitShare::permuted())
}

pub fn shrinking_family() -> Arc<dyn DensityFamily> {
    Arc::new(Shrinking)
}

/// `f_n(x_1..x_n) = prod_k g_k(x_k | x_1..x_{k-1})`.
pub fn joint_density(family: &dyn DensityFamily, prefix: &[f64]) -> Result<f64> {
    if prefix.is_empty() {
        return Err(Error::EmptyInput("joint_density prefix"));
    }
    if let Some(x) = prefix.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
        return Err(Error::contract(format!("coordinate {x} outside (0,1)")));
    }
    let mut f = 1.0;
    for (k, &x) in prefix.iter().enumerate() {
        f *= family.eval(k + 1, x, &prefix[..k])?;
        if f == 0.0 {
            break;
        }
    }
    Ok(f)
}

/// Draws `X_1..X_n` with the family's own sampler.
pub fn sample_history(
    family: &dyn DensityFamily,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let mut history = Vec::with_capacity(n);
    for step in 1..=n {
        let x = family.sample_next(step, &history, rng).ok_or_else(|| {
            Error::UnsupportedDiagnostic(format!("family {} has no direct sampler", family.name()))
        })??;
        history.push(x);
    }
    Ok(history)
}

// ---------------------------------------------------------------------------
// Divergence diagnostic

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    /// Partial sums still grew over the second half of the terms.
    Increasing,
    /// Partial sums were constant over the second half of the terms.
    Constant,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeSums {
    pub x: f64,
    pub half_sum: f64,
    pub final_sum: f64,
    pub trend: Trend,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceDiagnostic {
    pub family: String,
    pub declared_divergent: bool,
    pub n_terms: usize,
    pub probes: Vec<ProbeSums>,
    pub fraction_constant: f64,
    pub note: &'static str,
}

const DIAGNOSTIC_NOTE: &str =
    "numerical diagnostic only: finitely many partial sums at finitely many probes cannot certify divergence";

/// Partial sums `sum_{k <= n_terms} g_k(x | X_1..X_{k-1})` at the given
/// probes, along one history drawn from the family's own sampler.
pub fn divergence_diagnostic_at(
    family: &dyn DensityFamily,
    n_terms: usize,
    probes: &[f64],
    seed: u64,
) -> Result<DivergenceDiagnostic> {
    if n_terms == 0 {
        return Err(Error::contract("n_terms must be at least 1"));
    }
    let mut rng = rng::stream(seed, Purpose::Sampler);
    let history = sample_history(family, n_terms - 1, &mut rng)?;
    let half = n_terms.div_ceil(2);
    let mut out = Vec::with_capacity(probes.len());
    for &x in probes {
        let mut sum = 0.0;
        let mut half_sum = 0.0;
        for k in 1..=n_terms {
            sum += family.eval(k, x, &history[..k - 1])?;
            if k == half {
                half_sum = sum;
            }
        }
        out.push(ProbeSums {
            x,
            half_sum,
            final_sum: sum,
            trend: if sum > half_sum {
                Trend::Increasing
            } else {
                Trend::Constant
            },
        });
    }
    let constant = out.iter().filter(|p| p.trend == Trend::Constant).count();
    Ok(DivergenceDiagnostic {
        family: family.name().to_string(),
        declared_divergent: family.diverges(),
        n_terms,
        fraction_constant: if out.is_empty() {
            0.0
        } else {
            constant as f64 / out.len() as f64
        },
        probes: out,
        note: DIAGNOSTIC_NOTE,
    })
}

/// [`divergence_diagnostic_at`] with uniformly drawn probes.
pub fn divergence_diagnostic(
    family: &dyn DensityFamily,
    n_terms: usize,
    n_probes: usize,
    seed: u64,
) -> Result<DivergenceDiagnostic> {
    let mut rng = rng::stream(seed, Purpose::Probe);
    let probes: Vec<f64> = (0..n_probes).map(|_| rng::open01(&mut rng)).collect();
    divergence_diagnostic_at(family, n_terms, &probes, seed)
}

// ---------------------------------------------------------------------------
// Intensity profiles

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rate {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub rate: Rate,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Piecewise-constant, possibly infinite intensity `r` on (0,1). When `r` is
/// the sum `f_1 + f_2 + ...` of the densities of an independent sequence,
/// the unordered sample has Poisson fragment counts with mean `int_B r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntensityProfile {
    pieces: Vec<Piece>,
}

impl IntensityProfile {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidProfile("no pieces".into()));
        }
        let mut edge = 0.0;
        for p in &pieces {
            if p.start != edge {
                return Err(Error::InvalidProfile(format!(
                    "piece starts at {} but previous ends at {}",
                    p.start, edge
                )));
            }
            if !(p.end > p.start) {
                return Err(Error::InvalidProfile(format!(
                    "empty piece {}:{}",
                    p.start, p.end
                )));
            }
            if let Rate::Finite(r) = p.rate {
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(Error::InvalidProfile(format!("bad rate {r}")));
                }
            }
            edge = p.end;
        }
        if edge != 1.0 {
            return Err(Error::InvalidProfile(format!("pieces end at {edge}, not 1")));
        }
        Ok(IntensityProfile { pieces })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(vec![Piece {
            start: 0.0,
            end: 1.0,
            rate: Rate::Finite(rate),
        }])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Parses `start:end:rate` items separated by commas, e.g.
    /// `0:0.5:inf,0.5:1:2.0`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut pieces = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let fields: Vec<&str> = item.split(':').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::InvalidProfile(format!("`{item}` is not start:end:rate")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidProfile(format!("`{s}` is not a number")))
            };
            let rate = match fields[2].to_ascii_lowercase().as_str() {
                "inf" | "infinite" | "infinity" => Rate::Infinite,
                other => Rate::Finite(num(other)?),
            };
            pieces.push(Piece {
                start: num(fields[0])?,
                end: num(fields[1])?,
                rate,
            });
        }
        Self::new(pieces)
    }

    /// `int_B r` over a union of intervals; `None` if `B` meets an infinite piece.
    pub fn mass(&self, set: &[(f64, f64)]) -> Option<f64> {
        let mut total = 0.0;
        for &(a, b) in set {
            for p in &self.pieces {
                let overlap = b.min(p.end) - a.max(p.start);
                if overlap > 0.0 {
                    match p.rate {
                        Rate::Finite(r) => total += r * overlap,
                        Rate::Infinite => return None,
                    }
                }
            }
        }
        Some(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dyadic midpoint grid; exact for the built-in families at shallow steps.
    fn grid_integral(f: impl Fn(f64) -> f64) -> f64 {
        let n = 1usize << 14;
        (0..n).map(|i| f((i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64
    }

    fn all_families() -> Vec<Arc<dyn DensityFamily>> {
        vec![
            uniform_family(),
            triangular_family(),
            alternating_family(),
            digit_share_family(),
            digit_share_permuted_family(),
            shrinking_family(),
        ]
    }

    #[test]
    fn uniform_values() {
        let u = uniform_family();
        assert_eq!(u.eval(1, 0.3, &[]).unwrap(), 1.0);
        assert_eq!(u.eval(7, 0.999, &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(joint_density(&*u, &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap(), 1.0);
        assert!(u.diverges());
    }

    #[test]
    fn triangular_values() {
        let t = triangular_family();
        assert_eq!(t.eval(1, 0.5, &[]).unwrap(), 1.0);
        let near_one = t.eval(3, 1.0 - 1e-12, &[]).unwrap();
        assert!((near_one - 2.0).abs() < 1e-11);
        assert!((grid_integral(|x| 2.0 * x) - 1.0).abs() < 1e-12);
        assert_eq!(joint_density(&*t, &[0.5, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn alternating_values() {
        let a = alternating_family();
        assert_eq!(a.eval(1, 0.8, &[]).unwrap(), 1.0);
        assert!((a.eval(2, 0.8, &[0.3]).unwrap() - 1.6).abs() < 1e-15);
        assert_eq!(a.eval(4, 0.25, &[0.1, 0.2, 0.3]).unwrap(), 0.5);
        assert_eq!(a.sup_bound(3, &[]).unwrap(), 1.0);
        assert_eq!(a.sup_bound(4, &[]).unwrap(), 2.0);
    }

    #[test]
    fn shrinking_values() {
        let s = shrinking_family();
        assert_eq!(s.eval(1, 0.25, &[]).unwrap(), 2.0);
        assert_eq!(s.eval(3, 0.5, &[]).unwrap(), 0.0);
        let total: f64 = (1..=200).map(|n| s.eval(n, 0.3, &[]).unwrap()).sum();
        assert_eq!(total, 2.0);
        assert!(!s.diverges());
        assert!(s.sup_bound(SHRINKING_MAX_STEP + 1, &[]).is_err());
    }

    #[test]
    fn digit_share_step_two() {
        let d = digit_share_family();
        let x1 = 0.3; // first digit 0
        assert_eq!(d.eval(2, 0.2, &[x1]).unwrap(), 2.0);
        assert_eq!(d.eval(2, 0.7, &[x1]).unwrap(), 0.0);
        let x1 = 0.8; // first digit 1
        assert_eq!(d.eval(2, 0.7, &[x1]).unwrap(), 2.0);
        assert_eq!(d.eval(2, 0.2, &[x1]).unwrap(), 0.0);
        assert!(!d.diverges());
    }

    #[test]
    fn digit_share_support_length_is_exact() {
        let d = DigitShare::original();
        let mut rng = rng::stream(17, Purpose::Sampler);
        let history = sample_history(&d, 26, &mut rng).unwrap();
        for n in 1..26 {
            let iv = d.support(n + 1, &history[..n]).unwrap().unwrap();
            assert_eq!(iv.depth as usize, n);
            // numerator fits in n digits, so the interval is a genuine
            // length-2^-n dyadic cell of (0,1)
            assert!(iv.numerator < 1u64 << n);
            assert!(iv.contains(history[n]));
            assert_eq!(d.sup_bound(n + 1, &[]).unwrap(), (n as f64).exp2());
        }
    }

    #[test]
    fn digit_share_recursion_on_digits() {
        // the sampler honours beta_{k+1,l} = beta_{k,k+l-1}
        let d = DigitShare::original();
        let mut rng = rng::stream(3, Purpose::Sampler);
        let h = sample_history(&d, 20, &mut rng).unwrap();
        let digit = |x: f64, l: u32| leading_digits(x, l) & 1;
        for k in 1..20u32 {
            for l in 1..=k {
                assert_eq!(digit(h[k as usize], l), digit(h[k as usize - 1], k + l - 1));
            }
        }
    }

    #[test]
    fn digit_share_rejects_deep_history() {
        let d = DigitShare::original();
        let mut rng = rng::stream(3, Purpose::Sampler);
        let h = sample_history(&d, 27, &mut rng).unwrap();
        // step 28 needs digits 27..=53 of X_27
        assert!(matches!(
            d.eval(28, 0.5, &h),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn digit_share_rejects_terminating_history() {
        let d = DigitShare::original();
        // 0.5 = 0.1000.. = 0.0111..; its first digit is ambiguous
        assert!(matches!(
            d.eval(2, 0.3, &[0.5]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            d.eval(3, 0.3, &[0.3, 0.375]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn joint_density_zero_outside_digit_support() {
        let d = digit_share_family();
        assert_eq!(joint_density(&*d, &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(joint_density(&*d, &[0.3, 0.2]).unwrap(), 2.0);
    }

    #[test]
    fn permuted_even_originals_have_unit_density() {
        let p = DigitShare::permuted();
        let mut rng = rng::stream(8, Purpose::Sampler);
        let h = sample_history(&p, 26, &mut rng).unwrap();
        for step in (1..=25).step_by(2) {
            for i in 0..1000 {
                let x = (i as f64 + 0.5) / 1000.0;
                assert_eq!(p.eval(step, x, &h[..step - 1]).unwrap(), 1.0);
            }
        }
        assert!(p.diverges());
    }

    #[test]
    fn permuted_matches_original_joint_law() {
        // f(x2, x1, x4, x3) under the permuted order equals f(x1, x2, x3, x4)
        // under the original order, for histories drawn from the original
        let o = DigitShare::original();
        let p = DigitShare::permuted();
        let mut rng = rng::stream(21, Purpose::Sampler);
        for _ in 0..100 {
            let x = sample_history(&o, 8, &mut rng).unwrap();
            let w: Vec<f64> = x.chunks(2).flat_map(|c| [c[1], c[0]]).collect();
            let fo = joint_density(&o, &x).unwrap();
            let fp = joint_density(&p, &w).unwrap();
            assert!(fo > 0.0);
            assert_eq!(fo, fp);
        }
    }

    #[test]
    fn normalization_on_grid() {
        let mut rng = rng::stream(2, Purpose::Sampler);
        for fam in all_families() {
            let max_step = if fam.name().starts_with("digit-share-permuted") {
                6
            } else {
                12
            };
            let history = sample_history(&*fam, max_step, &mut rng).unwrap();
            for step in 1..=max_step {
                let h = &history[..step - 1];
                let integral = grid_integral(|x| fam.eval(step, x, h).unwrap());
                assert!(
                    (integral - 1.0).abs() < 1e-6,
                    "{} step {step}: {integral}",
                    fam.name()
                );
                let bound = fam.sup_bound(step, h).unwrap();
                for i in 0..10_000 {
                    let x = (i as f64 + 0.5) / 10_000.0;
                    assert!(fam.eval(step, x, h).unwrap() <= bound);
                }
            }
        }
    }

    #[test]
    fn joint_density_is_product_of_conditionals() {
        let mut rng = rng::stream(4, Purpose::Sampler);
        for fam in all_families() {
            let h = sample_history(&*fam, 6, &mut rng).unwrap();
            let direct: f64 = (1..=6)
                .map(|k| fam.eval(k, h[k - 1], &h[..k - 1]).unwrap())
                .product();
            let joint = joint_density(&*fam, &h).unwrap();
            assert!((joint - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn diagnostic_sums() {
        let u = uniform_family();
        let d = divergence_diagnostic(&*u, 100, 5, 1).unwrap();
        assert!(d.probes.iter().all(|p| p.final_sum == 100.0));
        assert_eq!(d.fraction_constant, 0.0);

        let s = shrinking_family();
        let d = divergence_diagnostic_at(&*s, 100, &[0.3], 1).unwrap();
        assert_eq!(d.probes[0].final_sum, 2.0);
        assert_eq!(d.probes[0].trend, Trend::Constant);

        let t = triangular_family();
        let d = divergence_diagnostic_at(&*t, 100, &[0.5], 1).unwrap();
        assert_eq!(d.probes[0].final_sum, 100.0);
    }

    struct NoSampler;
    impl DensityFamily for NoSampler {
        fn name(&self) -> &str {
            "no-sampler"
        }
        fn eval(&self, _: usize, _: f64, _: &[f64]) -> Result<f64> {
            Ok(1.0)
        }
        fn sup_bound(&self, _: usize, _: &[f64]) -> Result<f64> {
            Ok(1.0)
        }
        fn diverges(&self) -> bool {
            true
        }
    }

    #[test]
    fn diagnostic_needs_sampler() {
        assert!(matches!(
            divergence_diagnostic(&NoSampler, 10, 3, 1),
            Err(Error::UnsupportedDiagnostic(_))
        ));
    }

    #[test]
    fn family_names_round_trip() {
        for name in [
            "uniform",
            "triangular",
            "alternating",
            "digit-share",
            "digit-share-permuted",
            "shrinking",
        ] {
            assert_eq!(FamilyKind::parse(name).unwrap().build().name(), name);
        }
        assert!(FamilyKind::parse("gaussian").is_err());
    }

    #[test]
    fn profile_parsing() {
        let p = IntensityProfile::parse("0:0.5:inf,0.5:1:2.0").unwrap();
        assert_eq!(p.pieces().len(), 2);
        assert_eq!(p.pieces()[0].rate, Rate::Infinite);
        assert_eq!(p.mass(&[(0.5, 0.75)]), Some(0.5));
        assert_eq!(p.mass(&[(0.4, 0.6)]), None);
        assert!(IntensityProfile::parse("0:0.5:1").is_err());
        assert!(IntensityProfile::parse("0:0.5:1,0.6:1:1").is_err());
        assert!(IntensityProfile::parse("0:1:-1").is_err());
        assert!(IntensityProfile::parse("0:1").is_err());
    }
}
