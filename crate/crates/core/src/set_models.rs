//! Concrete random countable sets: the combined unordered-sample / Poisson
//! construction, the rational-shift set whose plain selectors are biased, and
//! the dependent-fragment construction where one fragment encodes a point of
//! the other.

use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::densities::{digit_block, IntensityProfile, Rate};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Serialize)]
pub struct CountSample {
    pub points: Vec<f64>,
    pub profile: IntensityProfile,
    /// Per piece: `Some(n)` when the piece has infinite rate and only `n`
    /// sample points were drawn.
    pub truncation: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountResult {
    pub count: usize,
    /// The set meets an infinite-rate piece, so the count reflects the
    /// truncation rather than the set.
    pub truncation_dependent: bool,
}

/// Poisson counts with uniform positions on finite-rate pieces; `truncate_n`
/// i.i.d. uniform points on each infinite-rate piece.
pub fn combined_sample(
    profile: &IntensityProfile,
    truncate_n: usize,
    seed: u64,
) -> Result<CountSample> {
    if truncate_n == 0 {
        return Err(Error::contract("truncate_n must be at least 1"));
    }
    let mut rng = rng::stream(seed, Purpose::Model);
    let mut points = Vec::new();
    let mut truncation = Vec::with_capacity(profile.pieces().len());
    for piece in profile.pieces() {
        let count = match piece.rate {
            Rate::Finite(r) => {
                let mean = r * piece.len();
                truncation.push(None);
                if mean > 0.0 {
                    let dist = Poisson::new(mean)
                        .map_err(|e| Error::InvalidProfile(e.to_string()))?;
                    dist.sample(&mut rng) as usize
                } else {
                    0
                }
            }
            Rate::Infinite => {
                truncation.push(Some(truncate_n));
                truncate_n
            }
        };
        for _ in 0..count {
            points.push(piece.start + piece.len() * rng::open01(&mut rng));
        }
    }
    Ok(CountSample {
        points,
        profile: profile.clone(),
        truncation,
    })
}

/// Number of sample points in a finite union of open intervals.
pub fn count_in(sample: &CountSample, set: &[(f64, f64)]) -> CountResult {
    let count = sample
        .points
        .iter()
        .filter(|&&x| set.iter().any(|&(a, b)| x > a && x < b))
        .count();
    CountResult {
        count,
        truncation_dependent: sample.profile.mass(set).is_none(),
    }
}

/// Stern's diatomic sequence.
fn fusc(mut n: u64) -> u64 {
    let (mut a, mut b) = (1u64, 0u64);
    while n > 0 {
        if n & 1 == 1 {
            b += a;
        } else {
            a += b;
        }
        n >>= 1;
    }
    b
}

/// Fixed enumeration of the rationals: index 0 is 0, then `+q_k, -q_k` for the
/// Calkin-Wilf sequence `q_k = fusc(k) / fusc(k+1)`.
pub fn rational_by_index(index: u64) -> (i64, u64) {
    if index == 0 {
        return (0, 1);
    }
    let k = index.div_ceil(2);
    let (p, q) = (fusc(k) as i64, fusc(k + 1));
    if index % 2 == 1 {
        (p, q)
    } else {
        (-p, q)
    }
}

/// The non-randomized selector `omega -> frac(omega/2 + q)` of the set
/// `(omega/2 + Q) ∩ (0,1)`, with `omega` uniform.
pub fn rational_shift_selector(seed: u64, q_index: u64) -> f64 {
    let (p, q) = rational_by_index(q_index);
    let shift = p as f64 / q as f64;
    let mut rng = rng::stream(seed, Purpose::Selector);
    loop {
        let omega = rng::open01(&mut rng);
        let z = 0.5 * omega + shift;
        let frac = z - z.floor();
        if frac > 0.0 && frac < 1.0 {
            return frac;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentRule {
    /// Digit 1 puts the smaller of the pair first.
    OneMeansMin,
    /// The complement: digit 1 puts the larger first.
    OneMeansMax,
}

#[derive(Debug, Clone, Serialize)]
pub struct FragmentDigits {
    /// `Y_1..Y_{4 k_max}`.
    pub y: Vec<f64>,
    pub true_digits: Vec<u8>,
    pub reconstructed: Vec<u8>,
}

impl FragmentDigits {
    pub fn exact(&self) -> bool {
        self.true_digits == self.reconstructed
    }
}

/// Builds `Y` from independent `Z`'s (odd ones uniform on (0,1/2), even ones on
/// (1/2,1)); digit `k` of `2 Y_1` decides the order of `(Z_{4k-2}, Z_{4k})`
/// in `(Y_{4k-2}, Y_{4k})`. The digits are then read back from the upper
/// fragment alone.
pub fn dependent_fragments(seed: u64, k_max: u32, rule: AssignmentRule) -> Result<FragmentDigits> {
    if !(1..=52).contains(&k_max) {
        return Err(Error::contract("digit depth must be in 1..=52"));
    }
    let len = 4 * k_max as usize;
    let mut rng = rng::stream(seed, Purpose::Model);
    // z[i] holds Z_{i+1}
    let z: Vec<f64> = (1..=len)
        .map(|i| {
            let u = rng::open01(&mut rng);
            if i % 2 == 1 {
                0.5 * u
            } else {
                0.5 + 0.5 * u
            }
        })
        .collect();
    let mut y = z.clone();
    let two_y1 = 2.0 * y[0];
    let mut true_digits = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let digit = digit_block(two_y1, k, k)? as u8;
        true_digits.push(digit);
        let (a, b) = (4 * k as usize - 2, 4 * k as usize);
        let (lo, hi) = (z[a - 1].min(z[b - 1]), z[a - 1].max(z[b - 1]));
        let min_first = (digit == 1) == (rule == AssignmentRule::OneMeansMin);
        let (first, second) = if min_first { (lo, hi) } else { (hi, lo) };
        y[a - 1] = first;
        y[b - 1] = second;
    }
    let reconstructed = (1..=k_max as usize)
        .map(|k| {
            let less = y[4 * k - 3] < y[4 * k - 1];
            let digit = match rule {
                AssignmentRule::OneMeansMin => less,
                AssignmentRule::OneMeansMax => !less,
            };
            digit as u8
        })
        .collect();
    Ok(FragmentDigits {
        y,
        true_digits,
        reconstructed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_empty() {
        let p = IntensityProfile::constant(0.0).unwrap();
        let s = combined_sample(&p, 10, 1).unwrap();
        assert!(s.points.is_empty());
        assert_eq!(count_in(&s, &[(0.0, 1.0)]).count, 0);
    }

    #[test]
    fn points_stay_in_their_pieces() {
        let p = IntensityProfile::parse("0:0.5:inf,0.5:0.75:0,0.75:1:40").unwrap();
        let s = combined_sample(&p, 200, 3).unwrap();
        assert_eq!(s.truncation, vec![Some(200), None, None]);
        assert!(s.points.iter().all(|&x| !(x > 0.5 && x < 0.75)));
        assert_eq!(s.points.iter().filter(|&&x| x < 0.5).count(), 200);
        assert!(count_in(&s, &[(0.4, 0.6)]).truncation_dependent);
        assert!(!count_in(&s, &[(0.8, 0.9)]).truncation_dependent);
    }

    #[test]
    fn empty_set_counts_nothing() {
        let p = IntensityProfile::constant(5.0).unwrap();
        let s = combined_sample(&p, 1, 2).unwrap();
        assert_eq!(count_in(&s, &[]).count, 0);
        assert_eq!(count_in(&s, &[(0.0, 1.0)]).count, s.points.len());
    }

    #[test]
    fn rational_enumeration_prefix() {
        let got: Vec<_> = (0..9).map(rational_by_index).collect();
        assert_eq!(
            got,
            vec![(0, 1), (1, 1), (-1, 1), (1, 2), (-1, 2), (2, 1), (-2, 1), (1, 3), (-1, 3)]
        );
    }

    #[test]
    fn zero_shift_selector_is_half_omega() {
        for seed in 0..1000 {
            let z = rational_shift_selector(seed, 0);
            assert!(z > 0.0 && z < 0.5);
        }
    }

    #[test]
    fn shifted_selector_lies_in_shifted_half() {
        // q = 1/2 maps omega/2 onto (1/2, 1)
        for seed in 0..200 {
            let z = rational_shift_selector(seed, 3);
            assert!(z > 0.5 && z < 1.0);
        }
    }

    #[test]
    fn fragments_reconstruct_exactly() {
        for seed in 0..200 {
            let f = dependent_fragments(seed, 52, AssignmentRule::OneMeansMin).unwrap();
            assert!(f.exact());
            assert!(f.y.iter().enumerate().all(|(i, &v)| if i % 2 == 0 {
                v < 0.5
            } else {
                v > 0.5
            }));
        }
    }

    #[test]
    fn complemented_rule_reconstructs_with_complemented_decoder() {
        for seed in 0..100 {
            let a = dependent_fragments(seed, 20, AssignmentRule::OneMeansMin).unwrap();
            let b = dependent_fragments(seed, 20, AssignmentRule::OneMeansMax).unwrap();
            assert!(b.exact());
            assert_eq!(a.true_digits, b.true_digits);
        }
    }

    #[test]
    fn digit_depth_bounds() {
        assert!(dependent_fragments(1, 0, AssignmentRule::OneMeansMin).is_err());
        assert!(dependent_fragments(1, 53, AssignmentRule::OneMeansMin).is_err());
    }
}
