//! Time and volume discretizations.
//!
//! The volume cell is tied to the time step (`dy = L * dt`), so one step of
//! full-rate exercise consumes exactly one cell. All region tests below are
//! therefore integer comparisons on (step, level) indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("T", format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::param("N", "step count must be at least 1"));
        }
        Ok(Self {
            horizon,
            steps,
            dt: horizon / steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of step `i`.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// Consumed-volume levels `y_j = 1 - j * dy`, `j = 0..=M`.
///
/// `j` counts the cells still available: `j = 0` is the exhausted boundary
/// `y = 1`, and full-rate exercise moves from level `j` to `j - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeGrid {
    rate_cap: f64,
    dy: f64,
    levels: usize,
    steps: usize,
}

impl VolumeGrid {
    /// Default truncation: `y_M` is the smallest level at or above
    /// `1 - L*T - dy`, i.e. `M = N + 1`, one level below the diagonal at t = 0.
    pub fn new(time: &TimeGrid, rate_cap: f64) -> Result<Self> {
        Self::with_levels(time, rate_cap, time.steps() + 1)
    }

    /// A grid with an explicit deepest level. `levels` must be at least `N`
    /// so the grid spans the whole constrained region `y >= 1 - L*T`.
    pub fn with_levels(time: &TimeGrid, rate_cap: f64, levels: usize) -> Result<Self> {
        if !(rate_cap.is_finite() && rate_cap > 0.0) {
            return Err(Error::param("L", format!("rate cap must be positive, got {rate_cap}")));
        }
        if levels < time.steps() {
            return Err(Error::InvalidGrid(format!(
                "{levels} volume levels do not reach 1 - L*T (need at least N = {})",
                time.steps()
            )));
        }
        Ok(Self {
            rate_cap,
            dy: rate_cap * time.dt(),
            levels,
            steps: time.steps(),
        })
    }

    pub fn rate_cap(&self) -> f64 {
        self.rate_cap
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    /// Deepest level index `M`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Number of stored levels, `M + 1`.
    pub fn len(&self) -> usize {
        self.levels + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn y(&self, j: usize) -> f64 {
        1.0 - j as f64 * self.dy
    }

    /// Level index of `y`, if `y` sits on the grid (within a relative 1e-9 of a cell).
    pub fn level_of(&self, y: f64) -> Option<usize> {
        let cells = (1.0 - y) / self.dy;
        let j = cells.round();
        if j < 0.0 || (cells - j).abs() > 1e-9 * j.max(1.0) || j as usize > self.levels {
            return None;
        }
        Some(j as usize)
    }

    /// `y_j <= 1 - L(T - t_i)`: the remaining volume covers every remaining step.
    pub fn is_unconstrained(&self, step: usize, j: usize) -> bool {
        j + step >= self.steps
    }

    /// `y_j >= 1 - L*T`.
    pub fn is_constrained_region(&self, j: usize) -> bool {
        j <= self.steps
    }

    pub fn check_matches(&self, time: &TimeGrid) -> Result<()> {
        let expected = self.rate_cap * time.dt();
        if self.steps != time.steps() || (self.dy - expected).abs() > 1e-12 * expected {
            return Err(Error::GridMismatch(format!(
                "volume cell {} with {} steps, but L*dt = {} with {} steps",
                self.dy,
                self.steps,
                expected,
                time.steps()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grid_spans_horizon() {
        let g = TimeGrid::new(1.0, 3).unwrap();
        assert!((g.dt() * 3.0 - 1.0).abs() <= f64::EPSILON);
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(f64::NAN, 4).is_err());
    }

    #[test]
    fn volume_grid_covers_constrained_region() {
        let t = TimeGrid::new(1.0, 10).unwrap();
        let v = VolumeGrid::new(&t, 2.0).unwrap();
        assert_eq!(v.y(0), 1.0);
        assert_eq!(v.dy(), 2.0 * t.dt());
        assert!(v.y(v.levels()) <= 1.0 - 2.0 * 1.0);
        assert!(VolumeGrid::with_levels(&t, 2.0, 9).is_err());
        assert!(VolumeGrid::new(&t, 0.0).is_err());
    }

    #[test]
    fn region_tests_are_integer() {
        let t = TimeGrid::new(1.0, 4).unwrap();
        let v = VolumeGrid::new(&t, 1.0).unwrap();
        assert!(v.is_unconstrained(0, 4));
        assert!(!v.is_unconstrained(0, 3));
        assert!(v.is_unconstrained(3, 1));
        assert!(v.is_unconstrained(4, 0));
        assert_eq!(v.level_of(0.5), Some(2));
        assert_eq!(v.level_of(0.3), None);
        assert_eq!(v.level_of(1.5), None);
    }

    #[test]
    fn mismatch_is_detected() {
        let t = TimeGrid::new(1.0, 4).unwrap();
        let other = TimeGrid::new(1.0, 5).unwrap();
        let v = VolumeGrid::new(&t, 1.0).unwrap();
        assert!(v.check_matches(&t).is_ok());
        assert!(v.check_matches(&other).is_err());
    }
}
