//! Monte Carlo checks against laws computed by hand. Significance 10^-3
//! throughout; every seed is fixed.

use randset::brownian::{argmin_selector, local_minima, nearest_selector, simulate_bridge, simulate_path};
use randset::coupling::couple_part;
use randset::densities::{
    divergence_diagnostic_at, shrinking_family, uniform_family, IntensityProfile, Trend,
};
use randset::enumeration::DEFAULT_LEVEL_CAP;
use randset::replicate;
use randset::set_models::{
    combined_sample, count_in, dependent_fragments, rational_shift_selector, AssignmentRule,
};
use randset::stats::{ks_one_sample, mean_z, normal_cdf, SIGMA_BOUND};

const SIG: f64 = 1e-3;

fn uniform_on(a: f64, b: f64) -> impl Fn(f64) -> f64 {
    move |x| ((x - a) / (b - a)).clamp(0.0, 1.0)
}

#[test]
fn part_coupling_misses_the_right_half() {
    // the shrinking family never reaches x > 1/2, and a window of height 3
    // holds a point there with probability 1 - e^{-3/2}
    let n = 400;
    let rows = replicate::try_map(11, n, |_, s| {
        couple_part(s, shrinking_family(), uniform_family(), 3.0, 10, DEFAULT_LEVEL_CAP)
    })
    .unwrap();
    assert!(rows.iter().all(|r| r.full_exhausted && r.inclusion_holds));
    let fewer = rows.iter().filter(|r| r.strictly_fewer).count() as f64 / n as f64;
    let bound = 1.0 - (-1.5f64).exp();
    let se = (bound * (1.0 - bound) / n as f64).sqrt();
    assert!(fewer >= bound - SIGMA_BOUND * se, "strictly fewer in {fewer}");
    let right_half = rows
        .iter()
        .filter(|r| r.part_window_ids.is_empty() && r.window_total > 0)
        .count();
    assert!(right_half > 0);
}

#[test]
fn rational_shift_selector_is_uniform_on_its_half() {
    for q in [0u64, 1, 4, 7] {
        let xs = replicate::map(3 + q, 2000, |_, s| rational_shift_selector(s, q));
        let (a, b) = match q {
            0 | 1 | 2 | 5 | 6 => (0.0, 0.5),
            // shifts of 1/2 and 1/3
            3 | 4 => (0.5, 1.0),
            _ => (1.0 / 3.0, 5.0 / 6.0),
        };
        let r = ks_one_sample("shift", &xs, uniform_on(a, b), SIG).unwrap();
        assert!(r.pass, "q index {q}: {}", r.line());
    }
}

#[test]
fn nearest_minimum_to_a_fixed_probe_is_not_uniform() {
    let xs = replicate::try_map(5, 300, |_, s| {
        let path = simulate_path(2000, s)?;
        nearest_selector(&path, 0.5)
    })
    .unwrap();
    assert!(xs.iter().all(|x| (x - 0.5).abs() < 0.05));
    let r = ks_one_sample("fixed probe", &xs, uniform_on(0.0, 1.0), SIG).unwrap();
    assert!(!r.pass);
}

#[test]
fn argmin_is_stable_under_refinement_and_reverses() {
    let gaps = replicate::try_map(17, 200, |_, s| {
        let fine = simulate_bridge(12, s)?;
        let coarse_values: Vec<f64> = fine.values.iter().step_by(2).copied().collect();
        let coarse = randset::brownian::BrownianPath::from_values(coarse_values)?;
        let a = argmin_selector(&fine);
        let rev = argmin_selector(&fine.reversed());
        assert!(a.tie || (a.position + rev.position - 1.0).abs() < 1e-12);
        Ok::<_, randset::Error>((a.position - argmin_selector(&coarse).position).abs())
    })
    .unwrap();
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    assert!(sorted[sorted.len() / 2] < 1e-2, "median shift {}", sorted[sorted.len() / 2]);
}

#[test]
fn path_increments_are_gaussian() {
    let n = 1000;
    let path = simulate_path(n, 23).unwrap();
    let z: Vec<f64> = path
        .values
        .windows(2)
        .map(|w| (w[1] - w[0]) * (n as f64).sqrt())
        .collect();
    assert!(ks_one_sample("increments", &z, normal_cdf, SIG).unwrap().pass);
    assert_eq!(path.values[0], 0.0);
}

#[test]
fn bridge_marginals() {
    let rows = replicate::try_map(29, 2000, |_, s| {
        let b = simulate_bridge(6, s)?;
        Ok::<_, randset::Error>((b.values[64], b.values[32], b.values[16]))
    })
    .unwrap();
    let end: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mid: Vec<f64> = rows.iter().map(|r| r.1 / 0.5f64.sqrt()).collect();
    let quarter: Vec<f64> = rows.iter().map(|r| r.2 / 0.25f64.sqrt()).collect();
    for (name, xs) in [("W(1)", end), ("W(1/2)", mid), ("W(1/4)", quarter)] {
        let r = ks_one_sample(name, &xs, normal_cdf, SIG).unwrap();
        assert!(r.pass, "{}", r.line());
    }
    // W(1/2) - W(1/4) is independent of W(1/4) with variance 1/4
    let inc: Vec<f64> = rows.iter().map(|r| (r.1 - r.2) / 0.5).collect();
    assert!(ks_one_sample("increment", &inc, normal_cdf, SIG).unwrap().pass);
}

#[test]
fn minima_have_no_ties_and_count_near_quarter() {
    let n = 4000;
    let counts: Vec<f64> = replicate::try_map(31, 300, |_, s| {
        let m = local_minima(&simulate_path(n, s)?);
        assert_eq!(m.ties, 0);
        Ok::<_, randset::Error>(m.len() as f64)
    })
    .unwrap();
    let z = mean_z(&counts, (n - 1) as f64 / 4.0);
    assert!(z.abs() < SIGMA_BOUND, "z = {z}");
}

#[test]
fn infinite_profile_hits_every_set_it_meets() {
    let p = IntensityProfile::parse("0:0.5:inf,0.5:1:1").unwrap();
    let rows = replicate::try_map(37, 2000, |_, s| {
        let sample = combined_sample(&p, 1000, s)?;
        Ok::<_, randset::Error>((
            count_in(&sample, &[(0.2, 0.21)]),
            count_in(&sample, &[(0.6, 0.7)]),
        ))
    })
    .unwrap();
    let hit = rows.iter().filter(|r| r.0.count > 0).count();
    assert!(rows.iter().all(|r| r.0.truncation_dependent && !r.1.truncation_dependent));
    // the cell is 2% of the infinite piece: empty w.p. 0.98^1000, about 2e-9
    assert_eq!(hit, rows.len());
    let far: Vec<f64> = rows.iter().map(|r| r.1.count as f64).collect();
    assert!(mean_z(&far, 0.1).abs() < SIGMA_BOUND);
    assert!((p.mass(&[(0.6, 0.7)]).unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(p.mass(&[(0.4, 0.6)]), None);
}

#[test]
fn fragment_marginals_survive_the_reordering() {
    let rows = replicate::try_map(41, 2000, |_, s| dependent_fragments(s, 5, AssignmentRule::OneMeansMin)).unwrap();
    let y1: Vec<f64> = rows.iter().map(|r| r.y[0]).collect();
    let y4: Vec<f64> = rows.iter().map(|r| r.y[3]).collect();
    let y2: Vec<f64> = rows.iter().map(|r| r.y[1]).collect();
    assert!(ks_one_sample("Y1", &y1, uniform_on(0.0, 0.5), SIG).unwrap().pass);
    assert!(ks_one_sample("Y2", &y2, uniform_on(0.5, 1.0), SIG).unwrap().pass);
    assert!(ks_one_sample("Y4", &y4, uniform_on(0.5, 1.0), SIG).unwrap().pass);
    assert!(rows.iter().all(|r| r.exact()));
}

#[test]
fn complemented_rule_also_reconstructs() {
    for s in 0..200 {
        let r = dependent_fragments(s, 20, AssignmentRule::OneMeansMax).unwrap();
        assert!(r.exact());
    }
}

#[test]
fn divergence_diagnostic_examples() {
    let probes = [0.01, 0.1, 0.3, 0.5, 0.9];
    let u = divergence_diagnostic_at(&*uniform_family(), 20, &probes, 1).unwrap();
    assert!(u.probes.iter().all(|p| p.trend == Trend::Increasing));
    assert!((u.probes[0].final_sum - 20.0).abs() < 1e-12);
    assert!(u.declared_divergent);
    let s = divergence_diagnostic_at(&*shrinking_family(), 20, &probes, 1).unwrap();
    assert!(s.probes.iter().all(|p| p.trend == Trend::Constant));
    assert_eq!(s.fraction_constant, 1.0);
    // x = 0.3 lies in (0, 2^-n) only for n = 1
    assert_eq!(s.probes[2].final_sum, 2.0);
    assert!(!s.declared_divergent);
}
