//! Race enumeration of strip points.
//!
//! Step `n` extracts the remaining strip point minimising
//! `(y - H_{n-1}(x)) / g_n(x | X_1..X_{n-1})` (with `y/0 = inf`), records the
//! minimum as the race time `T_n`, and raises the barrier
//! `H_n = H_{n-1} + T_n g_n(. | X_1..X_{n-1})`.
//!
//! The minimum ranges over the whole infinite strip. Only a finite prefix is
//! ever generated: with strip level `L`, every ungenerated point has ratio at
//! least `(L - maxH) / sup g_n` where `maxH = sum_k T_k sup g_k`, so once the
//! best generated ratio is below that floor it is the global minimum.
//! Otherwise the strip is extended and the scan repeats.
//!
//! When the family's density is the same at every step, all ratios fall by
//! the same `T_n` per step, so the pool is kept in a heap ordered by
//! `y / g(x)` instead of being scanned.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::Serialize;

use crate::densities::DensityFamily;
use crate::error::{Error, Result};
use crate::strip::{PointId, StripProcess};

/// Default hard cap on the strip level an enumeration may request.
pub const DEFAULT_LEVEL_CAP: f64 = 1e4;

/// Tolerance for the barrier-separation check.
pub const BARRIER_TOL: f64 = 1e-12;

/// Grid size for `int (M - H_n)^+ dx`.
pub const INTEGRAL_GRID: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extraction {
    pub step: usize,
    pub id: PointId,
    pub x: f64,
    pub y: f64,
    pub time: f64,
}

#[derive(Clone)]
pub struct EnumerationState {
    family: Arc<dyn DensityFamily>,
    stationary: bool,
    strip_seed: u64,
    level_cap: f64,
    history: Vec<f64>,
    times: Vec<f64>,
    /// `partial[n] = T_1 + ... + T_n`, summed in step order.
    partial: Vec<f64>,
    extracted: Vec<Extraction>,
    /// `sum_k T_k sup g_k`, an upper bound on `H_n`.
    max_h: f64,
    /// Strip points already absorbed into the pool.
    seen: usize,
    pool: Pool,
    // Heap entries popped for exact re-ranking within one step.
    held: Vec<Keyed>,
}

/// Untaken generated points.
#[derive(Clone)]
enum Pool {
    // Parallel arrays with a cached barrier value `H_n(x)`. The cache is
    // summed in step order, so it equals `eval_h` bit for bit.
    Scan {
        id: Vec<PointId>,
        x: Vec<f64>,
        y: Vec<f64>,
        h: Vec<f64>,
        g: Vec<f64>,
    },
    // With one fixed density g every ratio is `y/g(x) - S_{n-1}`, so the
    // race order is the order of `y/g(x)` and a heap replaces the scan.
    Heap(BinaryHeap<Reverse<Keyed>>),
}

#[derive(Debug, Clone, Copy)]
struct Keyed {
    key: f64,
    id: PointId,
    x: f64,
    y: f64,
}

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.id.cmp(&other.id))
    }
}

/// Keys within this relative distance of the smallest are re-ranked by their
/// exact ratio; rounding moves a ratio by a few ulps at most.
const KEY_SLACK: f64 = 1e-9;

impl std::fmt::Debug for EnumerationState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnumerationState")
            .field("family", &self.family.name())
            .field("strip_seed", &self.strip_seed)
            .field("steps", &self.times.len())
            .finish()
    }
}

impl EnumerationState {
    pub fn new(strip: &StripProcess, family: Arc<dyn DensityFamily>) -> Self {
        let stationary = family.stationary();
        EnumerationState {
            family,
            stationary,
            strip_seed: strip.seed(),
            level_cap: DEFAULT_LEVEL_CAP,
            history: Vec::new(),
            times: Vec::new(),
            partial: vec![0.0],
            extracted: Vec::new(),
            max_h: 0.0,
            seen: 0,
            held: Vec::new(),
            pool: if stationary {
                Pool::Heap(BinaryHeap::new())
            } else {
                Pool::Scan {
                    id: Vec::new(),
                    x: Vec::new(),
                    y: Vec::new(),
                    h: Vec::new(),
                    g: Vec::new(),
                }
            },
        }
    }

    pub fn with_level_cap(mut self, cap: f64) -> Self {
        self.level_cap = cap;
        self
    }

    pub fn family(&self) -> &dyn DensityFamily {
        &*self.family
    }

    pub fn steps(&self) -> usize {
        self.times.len()
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn extracted(&self) -> &[Extraction] {
        &self.extracted
    }

    pub fn level_cap(&self) -> f64 {
        self.level_cap
    }

    /// `H_n(x) = sum_{k <= n} T_k g_k(x | X_1..X_{k-1})`.
    pub fn eval_h(&self, x: f64) -> Result<f64> {
        self.eval_h_at(self.times.len(), x)
    }

    /// Barrier after the first `steps` steps. For a stationary family this
    /// is evaluated as `(T_1 + ... + T_steps) g(x)`.
    pub fn eval_h_at(&self, steps: usize, x: f64) -> Result<f64> {
        if steps > self.times.len() {
            return Err(Error::contract(format!(
                "barrier after {steps} steps requested, {} taken",
                self.times.len()
            )));
        }
        if self.stationary {
            return Ok(self.partial[steps] * self.family.eval(1, x, &[])?);
        }
        let mut h = 0.0;
        for k in 0..steps {
            h += self.times[k] * self.family.eval(k + 1, x, &self.history[..k])?;
        }
        Ok(h)
    }

    fn check_strip(&self, strip: &StripProcess) -> Result<()> {
        if strip.seed() != self.strip_seed {
            return Err(Error::contract(format!(
                "enumeration bound to strip {} stepped with strip {}",
                self.strip_seed,
                strip.seed()
            )));
        }
        Ok(())
    }

    fn absorb(&mut self, strip: &StripProcess) -> Result<()> {
        while self.seen < strip.len() {
            let p = strip.point(self.seen);
            let h = if self.stationary { 0.0 } else { self.eval_h(p.x)? };
            let gx = if self.stationary {
                self.family.eval(1, p.x, &[])?
            } else {
                0.0
            };
            match &mut self.pool {
                Pool::Scan { id, x, y, h: hs, .. } => {
                    id.push(self.seen);
                    x.push(p.x);
                    y.push(p.y);
                    hs.push(h);
                }
                // a point with g(x) = 0 never wins
                Pool::Heap(heap) if gx > 0.0 => heap.push(Reverse(Keyed {
                    key: p.y / gx,
                    id: self.seen,
                    x: p.x,
                    y: p.y,
                })),
                Pool::Heap(_) => {}
            }
            self.seen += 1;
        }
        Ok(())
    }

    /// Extracts the next race winner, extending the strip as far as the
    /// truncation certificate requires.
    pub fn step(&mut self, strip: &mut StripProcess) -> Result<Extraction> {
        self.check_strip(strip)?;
        let n = self.times.len() + 1;
        let sup_g = self.family.sup_bound(n, &self.history)?;
        if !(sup_g.is_finite() && sup_g > 0.0) {
            return Err(Error::UnsupportedFamily(format!(
                "{} has bound {} at step {}",
                self.family.name(),
                sup_g,
                n
            )));
        }
        self.absorb(strip)?;
        let (id, x, y, ratio) = loop {
            let level = strip.level();
            let target = match self.best_candidate(n)? {
                Some(c) => {
                    let needed = self.max_h + c.ratio * sup_g;
                    if needed <= level {
                        if let Some(second) = c.tie {
                            self.restore();
                            return Err(Error::RaceTie {
                                step: n,
                                first: c.id,
                                second,
                                ratio: c.ratio,
                            });
                        }
                        break self.take(c);
                    }
                    self.restore();
                    needed
                }
                None => (2.0 * level).max(level + 1.0),
            };
            if level >= self.level_cap {
                return Err(Error::ResourceLimit {
                    requested: target,
                    cap: self.level_cap,
                });
            }
            strip.extend_to_level(target.min(self.level_cap))?;
            self.absorb(strip)?;
        };
        if !(ratio > 0.0) {
            return Err(Error::NonPositiveRaceTime { step: n, time: ratio });
        }

        let e = Extraction {
            step: n,
            id,
            x,
            y,
            time: ratio,
        };
        self.history.push(x);
        self.times.push(ratio);
        self.partial.push(self.partial[n - 1] + ratio);
        self.max_h += ratio * sup_g;
        self.extracted.push(e);
        Ok(e)
    }

    /// Smallest ratio among generated points, with its pool slot.
    fn best_candidate(&mut self, n: usize) -> Result<Option<Candidate>> {
        let family = &*self.family;
        let history = &self.history;
        match &mut self.pool {
            Pool::Scan { id, x, y, h, g } => {
                g.resize(id.len(), 0.0);
                let mut best: Option<(usize, f64)> = None;
                let mut tie = None;
                for i in 0..id.len() {
                    let gi = family.eval(n, x[i], history)?;
                    g[i] = gi;
                    if gi <= 0.0 {
                        continue;
                    }
                    let r = (y[i] - h[i]) / gi;
                    match best {
                        Some((_, b)) if r > b => {}
                        Some((_, b)) if r == b => tie = Some(id[i]),
                        _ => {
                            best = Some((i, r));
                            tie = None;
                        }
                    }
                }
                Ok(best.map(|(i, ratio)| Candidate {
                    slot: i,
                    id: id[i],
                    ratio,
                    tie,
                }))
            }
            Pool::Heap(heap) => {
                let Some(Reverse(top)) = heap.peek().copied() else {
                    return Ok(None);
                };
                let s = self.partial[n - 1];
                let bound = top.key + KEY_SLACK * (top.key.abs() + s.abs());
                while let Some(Reverse(k)) = heap.peek().copied() {
                    if k.key > bound {
                        break;
                    }
                    heap.pop();
                    self.held.push(k);
                }
                let mut best: Option<(usize, f64)> = None;
                let mut tie = None;
                for (i, k) in self.held.iter().enumerate() {
                    let gk = family.eval(n, k.x, history)?;
                    let r = (k.y - s * gk) / gk;
                    match best {
                        Some((_, b)) if r > b => {}
                        Some((_, b)) if r == b => tie = Some(k.id),
                        _ => {
                            best = Some((i, r));
                            tie = None;
                        }
                    }
                }
                Ok(best.map(|(i, ratio)| Candidate {
                    slot: i,
                    id: self.held[i].id,
                    ratio,
                    tie,
                }))
            }
        }
    }

    /// Returns points set aside by `best_candidate` to the heap.
    fn restore(&mut self) {
        if let Pool::Heap(heap) = &mut self.pool {
            heap.extend(self.held.drain(..).map(Reverse));
        }
    }

    /// Removes the winner from the pool and raises the cached barrier.
    fn take(&mut self, c: Candidate) -> (PointId, f64, f64, f64) {
        match &mut self.pool {
            Pool::Scan { id, x, y, h, g } => {
                for j in 0..id.len() {
                    h[j] += c.ratio * g[j];
                }
                let out = (id.swap_remove(c.slot), x.swap_remove(c.slot), y.swap_remove(c.slot));
                h.swap_remove(c.slot);
                g.swap_remove(c.slot);
                (out.0, out.1, out.2, c.ratio)
            }
            Pool::Heap(_) => {
                let k = self.held.swap_remove(c.slot);
                self.restore();
                (k.id, k.x, k.y, c.ratio)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    slot: usize,
    id: PointId,
    ratio: f64,
    tie: Option<PointId>,
}

impl EnumerationState {
    /// Strip points with `y < window` not yet extracted.
    pub fn residual_below(&self, strip: &StripProcess, window: f64) -> Result<usize> {
        let total = strip.points_below(window)?.len();
        let taken = self.extracted.iter().filter(|e| e.y < window).count();
        Ok(total - taken)
    }

    /// Recomputes the race from scratch over every generated strip point and
    /// counts violations of its defining properties.
    pub fn audit(&self, strip: &StripProcess) -> Result<Audit> {
        self.check_strip(strip)?;
        let mut taken_at = vec![usize::MAX; strip.len()];
        for e in &self.extracted {
            taken_at[e.id] = e.step;
        }
        let mut audit = Audit::default();
        for (k, e) in self.extracted.iter().enumerate() {
            let hist = &self.history[..k];
            let g = self.family.eval(k + 1, e.x, hist)?;
            let h_prev = self.eval_h_at(k, e.x)?;
            if (e.y - h_prev) / g != e.time {
                audit.time_mismatches += 1;
            }
            if !(e.y > h_prev - BARRIER_TOL) {
                audit.below_barrier += 1;
            }
            for (id, p) in strip.points().iter().enumerate() {
                if taken_at[id] <= k + 1 {
                    continue;
                }
                let gp = self.family.eval(k + 1, p.x, hist)?;
                if gp > 0.0 {
                    let r = (p.y - self.eval_h_at(k, p.x)?) / gp;
                    audit.ratio_checks += 1;
                    if r < e.time {
                        audit.race_violations += 1;
                    }
                }
            }
        }
        for (id, p) in strip.points().iter().enumerate() {
            if taken_at[id] == usize::MAX && !(p.y > self.eval_h(p.x)? - BARRIER_TOL) {
                audit.below_barrier += 1;
            }
        }
        let mut ids: Vec<PointId> = self.extracted.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        ids.dedup();
        audit.duplicates = self.extracted.len() - ids.len();
        Ok(audit)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Audit {
    pub ratio_checks: usize,
    pub race_violations: usize,
    pub below_barrier: usize,
    pub time_mismatches: usize,
    pub duplicates: usize,
}

impl Audit {
    pub fn clean(&self) -> bool {
        self.race_violations == 0
            && self.below_barrier == 0
            && self.time_mismatches == 0
            && self.duplicates == 0
    }
}

pub fn step(state: &mut EnumerationState, strip: &mut StripProcess) -> Result<Extraction> {
    state.step(strip)
}

pub fn run_n(
    strip: &mut StripProcess,
    family: Arc<dyn DensityFamily>,
    n: usize,
) -> Result<EnumerationState> {
    run_n_capped(strip, family, n, DEFAULT_LEVEL_CAP)
}

pub fn run_n_capped(
    strip: &mut StripProcess,
    family: Arc<dyn DensityFamily>,
    n: usize,
    level_cap: f64,
) -> Result<EnumerationState> {
    if n == 0 {
        return Err(Error::contract("run_n needs at least one step"));
    }
    let mut state = EnumerationState::new(strip, family).with_level_cap(level_cap);
    for _ in 0..n {
        state.step(strip)?;
    }
    Ok(state)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionProfile {
    pub family: String,
    pub window: f64,
    /// `|Pi_{n,M}|` for `n = 0..`.
    pub residuals: Vec<usize>,
    /// Grid value of `int_0^1 (M - H_n(x))^+ dx` for the same `n`.
    pub integrals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    /// Step at which the level cap stopped the profile early.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncated_at: Option<usize>,
}

pub fn exhaustion_profile(
    strip: &mut StripProcess,
    family: Arc<dyn DensityFamily>,
    window: f64,
    n_max: usize,
    level_cap: f64,
) -> Result<ExhaustionProfile> {
    if !(window > 0.0) {
        return Err(Error::contract("window must be positive"));
    }
    if window > strip.level() {
        strip.extend_to_level(window)?;
    }
    let warning = (!family.diverges()).then(|| {
        format!(
            "family {} is not divergent; the window will not be exhausted",
            family.name()
        )
    });
    let grid: Vec<f64> = (0..INTEGRAL_GRID)
        .map(|i| (i as f64 + 0.5) / INTEGRAL_GRID as f64)
        .collect();
    let mut grid_h = vec![0.0; INTEGRAL_GRID];
    let integral = |h: &[f64]| h.iter().map(|v| (window - v).max(0.0)).sum::<f64>() / h.len() as f64;

    let mut state = EnumerationState::new(strip, family.clone()).with_level_cap(level_cap);
    let mut residuals = vec![state.residual_below(strip, window)?];
    let mut integrals = vec![integral(&grid_h)];
    let mut truncated_at = None;
    for n in 1..=n_max {
        let t = match state.step(strip) {
            Ok(e) => e.time,
            Err(Error::ResourceLimit { .. }) => {
                truncated_at = Some(n);
                break;
            }
            Err(e) => return Err(e),
        };
        let hist = &state.history()[..n - 1];
        for (h, &x) in grid_h.iter_mut().zip(&grid) {
            *h += t * family.eval(n, x, hist)?;
        }
        residuals.push(state.residual_below(strip, window)?);
        integrals.push(integral(&grid_h));
    }
    Ok(ExhaustionProfile {
        family: family.name().to_string(),
        window,
        residuals,
        integrals,
        warning,
        truncated_at,
    })
}
