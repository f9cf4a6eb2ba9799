//! Several enumerations of one strip realization.
//!
//! Every enumeration with a divergent family eventually extracts every strip
//! point, so two of them list the same countable set in two orders. That is
//! checked exactly, on strip-point identities, inside finite windows
//! `{y < M}` that each enumeration has exhausted.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::densities::{alternating_family, triangular_family, uniform_family, DensityFamily};
use crate::enumeration::{EnumerationState, Extraction};
use crate::error::{Error, Result};
use crate::strip::{new_strip, PointId, StripProcess};

/// Outcome of stepping an enumeration until a window is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exhaustion {
    Exhausted,
    /// The level cap stopped the enumeration first.
    CapReached,
}

/// Extra stopping conditions for [`step_until`].
#[derive(Debug, Clone, Copy, Default)]
struct Also {
    min_steps: usize,
    extract: Option<PointId>,
}

/// Steps until no strip point below `window` is left, at least `also.min_steps`
/// steps are taken and `also.extract` has been extracted.
fn step_until(
    state: &mut EnumerationState,
    strip: &mut StripProcess,
    window: f64,
    also: Also,
) -> Result<Exhaustion> {
    if window > strip.level() {
        strip.extend_to_level(window)?;
    }
    let total = strip.points_below(window)?.len();
    let mut taken = state.extracted().iter().filter(|e| e.y < window).count();
    let mut pending = also
        .extract
        .filter(|id| !state.extracted().iter().any(|e| e.id == *id));
    while taken < total || state.steps() < also.min_steps || pending.is_some() {
        match state.step(strip) {
            Ok(e) => {
                taken += (e.y < window) as usize;
                if pending == Some(e.id) {
                    pending = None;
                }
            }
            Err(Error::ResourceLimit { .. }) => return Ok(Exhaustion::CapReached),
            Err(e) => return Err(e),
        }
    }
    Ok(Exhaustion::Exhausted)
}

fn window_ids(seq: &[Extraction], window: f64) -> BTreeSet<PointId> {
    seq.iter().filter(|e| e.y < window).map(|e| e.id).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CoupledSample {
    pub strip_seed: u64,
    pub families: [String; 2],
    pub window: f64,
    pub window_total: usize,
    pub seq_a: Vec<Extraction>,
    pub seq_b: Vec<Extraction>,
    /// For each window point of A, in A's order, its index in `seq_b`.
    pub permutation: Vec<Option<usize>>,
    pub exhausted: bool,
}

impl CoupledSample {
    pub fn window_ids_a(&self) -> BTreeSet<PointId> {
        window_ids(&self.seq_a, self.window)
    }

    pub fn window_ids_b(&self) -> BTreeSet<PointId> {
        window_ids(&self.seq_b, self.window)
    }

    pub fn sets_equal(&self) -> bool {
        self.window_ids_a() == self.window_ids_b()
    }

    /// The permutation maps A's window positions one-to-one onto exactly
    /// B's window positions.
    pub fn permutation_bijective(&self) -> bool {
        let mut image = BTreeSet::new();
        for p in &self.permutation {
            match p {
                Some(i) if self.seq_b[*i].y < self.window => {
                    if !image.insert(*i) {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        let targets: BTreeSet<usize> = self
            .seq_b
            .iter()
            .enumerate()
            .filter(|(_, e)| e.y < self.window)
            .map(|(i, _)| i)
            .collect();
        image == targets
    }
}

fn positions(seq: &[Extraction]) -> HashMap<PointId, usize> {
    seq.iter().enumerate().map(|(i, e)| (e.id, i)).collect()
}

pub fn couple(
    seed: u64,
    fam_a: Arc<dyn DensityFamily>,
    fam_b: Arc<dyn DensityFamily>,
    window: f64,
    level_cap: f64,
) -> Result<CoupledSample> {
    if !(window > 0.0) {
        return Err(Error::contract("window must be positive"));
    }
    for f in [&fam_a, &fam_b] {
        if !f.diverges() {
            return Err(Error::contract(format!(
                "family {} is not divergent and cannot exhaust a window",
                f.name()
            )));
        }
    }
    let mut strip = new_strip(seed);
    let mut a = EnumerationState::new(&strip, fam_a.clone()).with_level_cap(level_cap);
    let mut b = EnumerationState::new(&strip, fam_b.clone()).with_level_cap(level_cap);
    let ea = step_until(&mut a, &mut strip, window, Also::default())?;
    let eb = step_until(&mut b, &mut strip, window, Also::default())?;
    let window_total = strip.points_below(window)?.len();

    let in_b = positions(b.extracted());
    let permutation = a
        .extracted()
        .iter()
        .filter(|e| e.y < window)
        .map(|e| in_b.get(&e.id).copied())
        .collect();
    Ok(CoupledSample {
        strip_seed: seed,
        families: [fam_a.name().to_string(), fam_b.name().to_string()],
        window,
        window_total,
        seq_a: a.extracted().to_vec(),
        seq_b: b.extracted().to_vec(),
        permutation,
        exhausted: ea == Exhaustion::Exhausted && eb == Exhaustion::Exhausted,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Figure1 {
    pub seed: u64,
    pub n_points: usize,
    pub families: [String; 3],
    /// First `n_points` extractions of each family.
    pub orderings: [Vec<Extraction>; 3],
    /// `permutations[i][j][k]`: index in ordering `j` of the `k`-th point of
    /// ordering `i`, when it is among the first `n_points` there.
    pub permutations: Vec<Vec<Vec<Option<usize>>>>,
    /// Window holding exactly the `n_points` lowest strip points.
    pub window: f64,
    /// All three enumerations exhausted the window and agree on its points.
    pub window_sets_equal: bool,
}

impl Figure1 {
    /// Columns `rank, x_uniform, x_triangular, x_alternating, y`, with `y`
    /// the height of the uniform ordering's point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,x_uniform,x_triangular,x_alternating,y\n");
        for k in 0..self.n_points {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                k + 1,
                self.orderings[0][k].x,
                self.orderings[1][k].x,
                self.orderings[2][k].x,
                self.orderings[0][k].y,
            ));
        }
        out
    }
}

/// The uniform, triangular and alternating orderings of one strip.
pub fn figure1(seed: u64, n_points: usize, level_cap: f64) -> Result<Figure1> {
    if n_points == 0 {
        return Err(Error::contract("figure1 needs at least one point"));
    }
    let fams = [uniform_family(), triangular_family(), alternating_family()];
    let mut strip = new_strip(seed);
    // generate until the strip has n_points + 1 points
    let mut level = n_points as f64;
    while strip.len() <= n_points {
        strip.extend_to_level(level)?;
        level *= 2.0;
    }
    let window = 0.5 * (strip.point(n_points - 1).y + strip.point(n_points).y);

    let mut states = Vec::with_capacity(3);
    let mut all_exhausted = true;
    for fam in &fams {
        let mut st = EnumerationState::new(&strip, fam.clone()).with_level_cap(level_cap);
        let ex = step_until(
            &mut st,
            &mut strip,
            window,
            Also {
                min_steps: n_points,
                extract: None,
            },
        )?;
        all_exhausted &= ex == Exhaustion::Exhausted;
        states.push(st);
    }
    if !all_exhausted {
        return Err(Error::ResourceLimit {
            requested: f64::NAN,
            cap: level_cap,
        });
    }
    let sets: Vec<BTreeSet<PointId>> = states
        .iter()
        .map(|s| window_ids(s.extracted(), window))
        .collect();
    let window_sets_equal = sets.iter().all(|s| *s == sets[0] && s.len() == n_points);

    let orderings: [Vec<Extraction>; 3] =
        std::array::from_fn(|i| states[i].extracted()[..n_points].to_vec());
    let permutations = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| {
                    let pos = positions(&orderings[j]);
                    orderings[i].iter().map(|e| pos.get(&e.id).copied()).collect()
                })
                .collect()
        })
        .collect();
    Ok(Figure1 {
        seed,
        n_points,
        families: std::array::from_fn(|i| fams[i].name().to_string()),
        orderings,
        permutations,
        window,
        window_sets_equal,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PartReport {
    pub strip_seed: u64,
    pub part_family: String,
    pub full_family: String,
    pub window: f64,
    pub window_total: usize,
    pub full_exhausted: bool,
    pub part_steps: usize,
    /// The level cap stopped the part enumeration before `part_steps`.
    pub part_capped: bool,
    pub part_window_ids: Vec<PointId>,
    pub inclusion_holds: bool,
    pub strictly_fewer: bool,
    pub coverage_fraction: f64,
}

/// Runs a non-exhausting "part" family next to a divergent one on a shared
/// strip and checks that the part's window points are among the full
/// enumeration's.
pub fn couple_part(
    seed: u64,
    part: Arc<dyn DensityFamily>,
    full: Arc<dyn DensityFamily>,
    window: f64,
    part_steps: usize,
    level_cap: f64,
) -> Result<PartReport> {
    if !full.diverges() {
        return Err(Error::contract(format!(
            "full family {} must be divergent",
            full.name()
        )));
    }
    if !(window > 0.0) {
        return Err(Error::contract("window must be positive"));
    }
    let mut strip = new_strip(seed);
    strip.extend_to_level(window)?;
    let mut p = EnumerationState::new(&strip, part.clone()).with_level_cap(level_cap);
    let mut part_capped = false;
    for _ in 0..part_steps {
        match p.step(&mut strip) {
            Ok(_) => {}
            Err(Error::ResourceLimit { .. }) => {
                part_capped = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut f = EnumerationState::new(&strip, full.clone()).with_level_cap(level_cap);
    let ex = step_until(&mut f, &mut strip, window, Also::default())?;

    let part_ids = window_ids(p.extracted(), window);
    let full_ids = window_ids(f.extracted(), window);
    let window_total = strip.points_below(window)?.len();
    Ok(PartReport {
        strip_seed: seed,
        part_family: part.name().to_string(),
        full_family: full.name().to_string(),
        window,
        window_total,
        full_exhausted: ex == Exhaustion::Exhausted,
        part_steps: p.steps(),
        part_capped,
        inclusion_holds: part_ids.is_subset(&full_ids),
        strictly_fewer: part_ids.len() < full_ids.len(),
        coverage_fraction: if full_ids.is_empty() {
            1.0
        } else {
            part_ids.len() as f64 / full_ids.len() as f64
        },
        part_window_ids: part_ids.into_iter().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Selection {
    pub x: f64,
    pub y: f64,
    pub id: PointId,
    /// Index of the selected point in the family's extraction sequence.
    pub position_in_family: Option<usize>,
    pub exhausted: bool,
}

/// Couples `family` with the uniform family on one strip and selects the
/// uniform enumeration's first point. Its law is uniform on (0,1), and it is
/// a point of the set the family enumerates.
pub fn uniform_selector(
    seed: u64,
    family: Arc<dyn DensityFamily>,
    window: f64,
    level_cap: f64,
) -> Result<Selection> {
    if !family.diverges() {
        return Err(Error::contract(format!(
            "family {} must be divergent",
            family.name()
        )));
    }
    let mut strip = new_strip(seed);
    let mut u = EnumerationState::new(&strip, uniform_family()).with_level_cap(level_cap);
    let chosen = u.step(&mut strip)?;

    let mut f = EnumerationState::new(&strip, family).with_level_cap(level_cap);
    let ex = step_until(
        &mut f,
        &mut strip,
        window,
        Also {
            min_steps: 0,
            extract: Some(chosen.id),
        },
    )?;
    let position_in_family = f.extracted().iter().position(|e| e.id == chosen.id);
    Ok(Selection {
        x: chosen.x,
        y: chosen.y,
        id: chosen.id,
        position_in_family,
        exhausted: ex == Exhaustion::Exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::shrinking_family;
    use crate::enumeration::DEFAULT_LEVEL_CAP;

    #[test]
    fn same_family_identity_permutation() {
        let c = couple(3, uniform_family(), uniform_family(), 3.0, DEFAULT_LEVEL_CAP).unwrap();
        assert_eq!(c.seq_a, c.seq_b);
        let n = c.permutation.len();
        assert_eq!(c.permutation, (0..n).map(Some).collect::<Vec<_>>());
        assert!(c.sets_equal() && c.permutation_bijective());
    }

    #[test]
    fn uniform_and_triangular_agree_on_window() {
        for seed in 0..20 {
            let c = couple(seed, uniform_family(), triangular_family(), 3.0, DEFAULT_LEVEL_CAP)
                .unwrap();
            assert!(c.exhausted);
            assert!(c.sets_equal(), "seed {seed}");
            assert!(c.permutation_bijective(), "seed {seed}");
            assert_eq!(c.window_ids_a().len(), c.window_total);
        }
    }

    #[test]
    fn non_divergent_family_is_rejected() {
        assert!(couple(1, uniform_family(), shrinking_family(), 1.0, DEFAULT_LEVEL_CAP).is_err());
    }

    #[test]
    fn figure1_orderings() {
        let f = figure1(7, 10, DEFAULT_LEVEL_CAP).unwrap();
        // uniform order is height order: the first ten strip points
        let ids: Vec<_> = f.orderings[0].iter().map(|e| e.id).collect();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        assert!(f.window_sets_equal);
        assert_eq!(f.to_csv().lines().count(), 11);
    }

    #[test]
    fn triangular_order_is_sorted_by_height_over_twice_x() {
        // brute force: every point with y/(2x) <= v lies below 2v
        for seed in 0..10 {
            let f = figure1(seed, 10, DEFAULT_LEVEL_CAP).unwrap();
            let mut strip = new_strip(seed);
            strip.extend_to_level(200.0).unwrap();
            let mut keyed: Vec<(f64, PointId)> = strip
                .points()
                .iter()
                .enumerate()
                .map(|(i, p)| (p.y / (2.0 * p.x), i))
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            assert!(keyed[9].0 <= 100.0);
            let want: Vec<PointId> = keyed[..10].iter().map(|k| k.1).collect();
            let got: Vec<PointId> = f.orderings[1].iter().map(|e| e.id).collect();
            assert_eq!(got, want, "seed {seed}");
        }
    }

    #[test]
    fn part_inclusion() {
        for seed in 0..20 {
            let r = couple_part(seed, shrinking_family(), uniform_family(), 3.0, 10, DEFAULT_LEVEL_CAP)
                .unwrap();
            assert!(r.full_exhausted && r.inclusion_holds);
        }
        let same = couple_part(4, uniform_family(), uniform_family(), 3.0, 200, DEFAULT_LEVEL_CAP)
            .unwrap();
        assert!(same.inclusion_holds && !same.strictly_fewer);
        assert_eq!(same.coverage_fraction, 1.0);
    }

    #[test]
    fn selector_is_lowest_point_and_member() {
        for seed in 0..30 {
            let s = uniform_selector(seed, triangular_family(), 1.0, DEFAULT_LEVEL_CAP).unwrap();
            let mut strip = new_strip(seed);
            strip.extend_to_level(s.y).unwrap();
            assert_eq!(s.id, 0);
            assert_eq!(s.x, strip.point(0).x);
            assert!(s.position_in_family.is_some());
        }
    }
}
