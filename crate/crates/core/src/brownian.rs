//! Brownian paths on a uniform grid and their local minima.

use std::collections::BTreeSet;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    /// Grid size: values at `t_i = i/n`, `i = 0..=n`.
    pub n: usize,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl BrownianPath {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::contract("a path needs at least 3 grid values"));
        }
        if values[0] != 0.0 {
            return Err(Error::contract("path must start at 0"));
        }
        Ok(BrownianPath {
            n: values.len() - 1,
            values,
            seed: 0,
        })
    }

    pub fn position(&self, index: usize) -> f64 {
        index as f64 / self.n as f64
    }

    /// Time reversal `t -> 1 - t`, re-anchored at 0.
    pub fn reversed(&self) -> BrownianPath {
        let end = self.values[self.n];
        BrownianPath {
            n: self.n,
            values: self.values.iter().rev().map(|v| v - end).collect(),
            seed: self.seed,
        }
    }
}

/// Cumulative sum of i.i.d. `N(0, 1/n)` increments.
pub fn simulate_path(n: usize, seed: u64) -> Result<BrownianPath> {
    if n < 2 {
        return Err(Error::contract("grid size must be at least 2"));
    }
    let mut rng = rng::stream(seed, Purpose::Path);
    let sd = (1.0 / n as f64).sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += sd * z;
        values.push(w);
    }
    Ok(BrownianPath { n, values, seed })
}

/// Levy midpoint construction on `n = 2^levels`: endpoint first, then each
/// dyadic midpoint from its two neighbours plus independent bridge noise.
pub fn simulate_bridge(levels: u32, seed: u64) -> Result<BrownianPath> {
    if levels == 0 || levels > 30 {
        return Err(Error::contract("bridge levels must be in 1..=30"));
    }
    let n = 1usize << levels;
    let mut rng = rng::stream(seed, Purpose::Path);
    let mut values = vec![0.0; n + 1];
    values[n] = StandardNormal.sample(&mut rng);
    let mut span = n;
    while span > 1 {
        let half = span / 2;
        let sd = (span as f64 / (4.0 * n as f64)).sqrt();
        for left in (0..n).step_by(span) {
            let z: f64 = StandardNormal.sample(&mut rng);
            values[left + half] = 0.5 * (values[left] + values[left + span]) + sd * z;
        }
        span = half;
    }
    Ok(BrownianPath { n, values, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinimaSource {
    Discrete,
    DyadicArgmin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaSet {
    pub n: usize,
    /// Grid indices, ascending.
    pub indices: Vec<usize>,
    pub source: MinimaSource,
    /// Exact float ties met along the way (neighbour ties for the discrete
    /// source, argmin ties for the dyadic one).
    pub ties: usize,
}

impl MinimaSet {
    pub fn positions(&self) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&i| i as f64 / self.n as f64)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Interior grid points strictly below both neighbours.
pub fn local_minima(path: &BrownianPath) -> MinimaSet {
    let v = &path.values;
    let mut indices = Vec::with_capacity(path.n / 3);
    let mut ties = 0;
    for i in 1..path.n {
        if v[i - 1] == v[i] || v[i] == v[i + 1] {
            ties += 1;
            continue;
        }
        if v[i - 1] > v[i] && v[i] < v[i + 1] {
            indices.push(i);
        }
    }
    MinimaSet {
        n: path.n,
        indices,
        source: MinimaSource::Discrete,
        ties,
    }
}

/// Leftmost argmin over `lo..=hi` and whether the minimum value repeats.
fn argmin(values: &[f64], lo: usize, hi: usize) -> (usize, bool) {
    let mut best = lo;
    let mut tie = false;
    for i in lo + 1..=hi {
        if values[i] < values[best] {
            best = i;
            tie = false;
        } else if values[i] == values[best] {
            tie = true;
        }
    }
    (best, tie)
}

/// Grid argmins over every dyadic interval `[j 2^-d, (j+1) 2^-d]`,
/// `d = 0..=depth`, keeping those that fall strictly inside their interval.
pub fn dyadic_argmin_enumeration(path: &BrownianPath, depth: u32) -> Result<MinimaSet> {
    if depth == 0 || depth >= usize::BITS || (1usize << depth) > path.n {
        return Err(Error::contract(format!(
            "depth {depth} needs 1 <= 2^depth <= n = {}",
            path.n
        )));
    }
    let n = path.n;
    let mut found = BTreeSet::new();
    let mut ties = 0;
    for d in 0..=depth {
        let cells = 1usize << d;
        for j in 0..cells {
            let lo = (j * n).div_ceil(cells);
            let hi = ((j + 1) * n) / cells;
            if hi <= lo + 1 {
                continue;
            }
            let (i, tie) = argmin(&path.values, lo, hi);
            ties += tie as usize;
            if i != lo && i != hi {
                found.insert(i);
            }
        }
    }
    Ok(MinimaSet {
        n,
        indices: found.into_iter().collect(),
        source: MinimaSource::DyadicArgmin,
        ties,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArgminSelection {
    pub position: f64,
    pub tie: bool,
}

/// Global grid argmin: a natural non-randomized selector.
pub fn argmin_selector(path: &BrownianPath) -> ArgminSelection {
    let (i, tie) = argmin(&path.values, 0, path.n);
    ArgminSelection {
        position: path.position(i),
        tie,
    }
}

/// Local minimum nearest to the probe `v` (leftmost on an exact distance tie).
pub fn nearest_selector(path: &BrownianPath, v: f64) -> Result<f64> {
    nearest_in(&local_minima(path).positions(), v)
}

/// Nearest element of an ascending list of positions.
pub fn nearest_in(positions: &[f64], v: f64) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::EmptyMinima);
    }
    let k = positions.partition_point(|&p| p < v);
    let right = positions.get(k).copied();
    let left = k.checked_sub(1).map(|i| positions[i]);
    Ok(match (left, right) {
        (Some(l), Some(r)) => {
            if v - l <= r - v {
                l
            } else {
                r
            }
        }
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => unreachable!(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FragmentStat {
    pub start: f64,
    pub end: f64,
    pub count: usize,
    /// Minima positions mapped affinely onto (0,1).
    pub rescaled: Vec<f64>,
}

pub fn fragment_stats(path: &BrownianPath, intervals: &[(f64, f64)]) -> Result<Vec<FragmentStat>> {
    fragment_stats_of(&local_minima(path).positions(), intervals)
}

pub fn fragment_stats_of(positions: &[f64], intervals: &[(f64, f64)]) -> Result<Vec<FragmentStat>> {
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::contract("fragment intervals overlap"));
        }
    }
    if sorted.iter().any(|&(a, b)| !(a >= 0.0 && b <= 1.0 && a < b)) {
        return Err(Error::contract("fragment intervals must lie in (0,1)"));
    }
    Ok(intervals
        .iter()
        .map(|&(a, b)| {
            let rescaled: Vec<f64> = positions
                .iter()
                .filter(|&&p| p > a && p < b)
                .map(|&p| (p - a) / (b - a))
                .collect();
            FragmentStat {
                start: a,
                end: b,
                count: rescaled.len(),
                rescaled,
            }
        })
        .collect())
}
