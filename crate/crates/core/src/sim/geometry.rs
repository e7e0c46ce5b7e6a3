use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::model::TaskUniverse;

/// Rectangular region crossed by evenly spaced straight roads.
///
/// Horizontal roads run the full `length_m` along x; vertical roads run the
/// full `width_m` along y. Road `k` of `n` sits at `k * dim / (n + 1)`,
/// snapped to the PoI spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiGeometry {
    pub roads_h: u32,
    pub roads_v: u32,
    pub length_m: f64,
    pub width_m: f64,
    pub spacing_m: f64,
}

impl Default for RoiGeometry {
    fn default() -> Self {
        Self { roads_h: 3, roads_v: 3, length_m: 1135.0, width_m: 319.0, spacing_m: 1.0 }
    }
}

impl RoiGeometry {
    /// About 500 PoIs: two roads each way over 150 m x 100 m.
    pub fn scaled() -> Self {
        Self { roads_h: 2, roads_v: 2, length_m: 150.0, width_m: 100.0, spacing_m: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.spacing_m) || !positive(self.length_m) || !positive(self.width_m) {
            return Err(invalid("road dimensions and spacing must be positive"));
        }
        if self.roads_h + self.roads_v == 0 {
            return Err(invalid("geometry has no roads"));
        }
        if self.length_m < self.spacing_m || self.width_m < self.spacing_m {
            return Err(invalid("region is narrower than one PoI spacing"));
        }
        Ok(())
    }

    fn cells(&self, metres: f64) -> i64 {
        (metres / self.spacing_m).round() as i64
    }
}

/// PoIs on a spacing-unit integer lattice, deduplicated at road crossings.
#[derive(Clone, Debug)]
pub struct PoiGrid {
    spacing_m: f64,
    points: Vec<(i64, i64)>,
    index: HashMap<(i64, i64), usize>,
}

impl PoiGrid {
    pub fn generate(geometry: &RoiGeometry) -> Result<Self> {
        geometry.validate()?;
        let (nx, ny) = (geometry.cells(geometry.length_m), geometry.cells(geometry.width_m));
        let mut grid = PoiGrid { spacing_m: geometry.spacing_m, points: Vec::new(), index: HashMap::new() };
        for k in 1..=geometry.roads_h as i64 {
            let y = (k * ny + (geometry.roads_h as i64 + 1) / 2) / (geometry.roads_h as i64 + 1);
            (0..=nx).for_each(|x| grid.push((x, y)));
        }
        for k in 1..=geometry.roads_v as i64 {
            let x = (k * nx + (geometry.roads_v as i64 + 1) / 2) / (geometry.roads_v as i64 + 1);
            (0..=ny).for_each(|y| grid.push((x, y)));
        }
        Ok(grid)
    }

    fn push(&mut self, point: (i64, i64)) {
        if let std::collections::hash_map::Entry::Vacant(slot) = self.index.entry(point) {
            slot.insert(self.points.len());
            self.points.push(point);
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// PoI position in metres.
    pub fn position(&self, poi: usize) -> (f64, f64) {
        let (x, y) = self.points[poi];
        (x as f64 * self.spacing_m, y as f64 * self.spacing_m)
    }

    /// Every PoI within Euclidean distance `radius_m` of PoI `centre`, ascending.
    pub fn covered(&self, centre: usize, radius_m: f64) -> Vec<usize> {
        let (cx, cy) = self.points[centre];
        let reach = (radius_m / self.spacing_m + 1e-9).floor() as i64;
        let limit = (radius_m / self.spacing_m).powi(2) + 1e-9;
        let mut found = Vec::new();
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if ((dx * dx + dy * dy) as f64) <= limit {
                    if let Some(&poi) = self.index.get(&(cx + dx, cy + dy)) {
                        found.push(poi);
                    }
                }
            }
        }
        found.sort_unstable();
        found
    }

    /// Every PoI with the same coverage requirement.
    pub fn universe(&self, requirement: u32) -> Result<TaskUniverse> {
        TaskUniverse::uniform(self.len(), requirement)
    }
}
