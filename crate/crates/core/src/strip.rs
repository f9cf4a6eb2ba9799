//! Unit-intensity Poisson point process on the strip (0,1) x [0, inf).
//!
//! Points are generated bottom-up as a ladder: heights are partial sums of
//! Exp(1) gaps and horizontal coordinates are independent U(0,1) draws. The
//! process is append-only and extends lazily; a generated prefix never changes.

use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Generation index of a strip point. Identity comparisons between
/// enumerations of the same strip use this, never float coordinates.
pub type PointId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripPoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct StripProcess {
    seed: u64,
    points: Vec<StripPoint>,
    level: f64,
    rng: ChaCha20Rng,
    /// Next point of the ladder, drawn but above `level`.
    pending: StripPoint,
}

impl StripProcess {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng::stream(seed, Purpose::Strip);
        let pending = Self::draw(&mut rng, 0.0);
        StripProcess {
            seed,
            points: Vec::new(),
            level: 0.0,
            rng,
            pending,
        }
    }

    /// A strip with a prescribed prefix: exactly `points` lie at or below
    /// `level`, and the process continues as a fresh ladder above `level`.
    pub fn from_points(seed: u64, points: &[(f64, f64)], level: f64) -> Result<Self> {
        let mut prev = f64::NEG_INFINITY;
        for (i, &(x, y)) in points.iter().enumerate() {
            if !(x > 0.0 && x < 1.0 && y >= 0.0 && y <= level) {
                return Err(Error::contract(format!(
                    "point ({x}, {y}) is outside the strip below level {level}"
                )));
            }
            if y <= prev {
                return Err(Error::PointCollision { index: i, y });
            }
            prev = y;
        }
        let mut rng = rng::stream(seed, Purpose::Strip);
        let pending = Self::draw(&mut rng, level);
        Ok(StripProcess {
            seed,
            points: points.iter().map(|&(x, y)| StripPoint { x, y }).collect(),
            level,
            rng,
            pending,
        })
    }

    fn draw(rng: &mut ChaCha20Rng, below: f64) -> StripPoint {
        let gap = rng::exp1(rng);
        let x = rng::open01(rng);
        StripPoint { x, y: below + gap }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Every point with `y <= level` has been generated.
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[StripPoint] {
        &self.points
    }

    pub fn point(&self, id: PointId) -> StripPoint {
        self.points[id]
    }

    /// Generates every point with `y <= level`.
    pub fn extend_to_level(&mut self, level: f64) -> Result<()> {
        if level.is_nan() || level < self.level {
            return Err(Error::contract(format!(
                "cannot extend strip from level {} down to {}",
                self.level, level
            )));
        }
        while self.pending.y <= level {
            let p = self.pending;
            if let Some(last) = self.points.last() {
                if p.y <= last.y {
                    return Err(Error::PointCollision {
                        index: self.points.len(),
                        y: p.y,
                    });
                }
            }
            self.points.push(p);
            self.pending = Self::draw(&mut self.rng, p.y);
        }
        self.level = level;
        Ok(())
    }

    /// All generated points with `y < level`, in ascending `y`.
    pub fn points_below(&self, level: f64) -> Result<&[StripPoint]> {
        if level > self.level {
            return Err(Error::contract(format!(
                "window {} exceeds generated level {}",
                level, self.level
            )));
        }
        let end = self.points.partition_point(|p| p.y < level);
        Ok(&self.points[..end])
    }

    pub fn count_in_rect(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<usize> {
        Ok(self
            .points_below(y1)?
            .iter()
            .filter(|p| p.x > x0 && p.x < x1 && p.y > y0)
            .count())
    }

    /// CSV with a `#` header line carrying seed and level; 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# seed={} level={:.16e}\nx,y\n", self.seed, self.level);
        for p in &self.points {
            out.push_str(&format!("{:.16e},{:.16e}\n", p.x, p.y));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "level": self.level,
            "points": self.points.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
        })
    }
}

pub fn new_strip(seed: u64) -> StripProcess {
    StripProcess::new(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_strip_is_empty() {
        let s = new_strip(42);
        assert_eq!(s.level(), 0.0);
        assert!(s.points_below(0.0).unwrap().is_empty());
    }

    #[test]
    fn same_seed_same_points() {
        let mut a = new_strip(42);
        let mut b = new_strip(42);
        a.extend_to_level(5.0).unwrap();
        b.extend_to_level(5.0).unwrap();
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn different_seeds_differ() {
        let mut a = new_strip(42);
        let mut b = new_strip(43);
        a.extend_to_level(20.0).unwrap();
        b.extend_to_level(20.0).unwrap();
        assert_ne!(a.points()[0], b.points()[0]);
    }

    #[test]
    fn extend_to_current_level_is_noop() {
        let mut s = new_strip(1);
        s.extend_to_level(0.0).unwrap();
        assert!(s.is_empty());
        s.extend_to_level(2.0).unwrap();
        let before = s.points().to_vec();
        s.extend_to_level(2.0).unwrap();
        assert_eq!(before, s.points());
    }

    #[test]
    fn lowering_level_is_rejected() {
        let mut s = new_strip(1);
        s.extend_to_level(2.0).unwrap();
        assert!(matches!(
            s.extend_to_level(1.0),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn window_beyond_level_is_rejected() {
        let mut s = new_strip(1);
        s.extend_to_level(2.0).unwrap();
        assert!(s.points_below(2.5).is_err());
    }

    #[test]
    fn full_window_returns_everything() {
        let mut s = new_strip(9);
        s.extend_to_level(10.0).unwrap();
        assert_eq!(s.points_below(10.0).unwrap().len(), s.len());
        assert!(s.points().iter().all(|p| p.y <= 10.0));
    }

    #[test]
    fn points_are_in_strip_and_ascending() {
        let mut s = new_strip(5);
        s.extend_to_level(50.0).unwrap();
        for w in s.points().windows(2) {
            assert!(w[0].y < w[1].y);
        }
        assert!(s.points().iter().all(|p| p.x > 0.0 && p.x < 1.0 && p.y >= 0.0));
    }

    #[test]
    fn csv_header_and_rows() {
        let mut s = new_strip(3);
        s.extend_to_level(2.0).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# seed=3 level="));
        assert_eq!(lines.next().unwrap(), "x,y");
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), s.len());
        for (row, p) in rows.iter().zip(s.points()) {
            let mut it = row.split(',').map(|v| v.parse::<f64>().unwrap());
            assert_eq!(it.next().unwrap(), p.x);
            assert_eq!(it.next().unwrap(), p.y);
        }
    }
}
