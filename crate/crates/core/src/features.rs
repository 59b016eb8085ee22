//! Tile coding of `(x, y)` cell coordinates into sparse binary features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileCoderConfig {
    pub tilings: usize,
    /// Nominal tiles per side; the coder grows each tiling to cover its offset overhang.
    pub tiles_per_side: usize,
    pub tile_width: f64,
    /// Per-tiling `(dx, dy)` shift subtracted from the coordinates.
    pub offsets: Vec<[f64; 2]>,
    /// Largest coordinate value along each axis.
    pub max_coord: [f64; 2],
}

impl Default for TileCoderConfig {
    fn default() -> Self {
        let tilings = 4;
        let tile_width = 5.5;
        let step = tile_width / tilings as f64;
        TileCoderConfig {
            tilings,
            tiles_per_side: 2,
            tile_width,
            offsets: (0..tilings).map(|k| [-(k as f64) * step, -(k as f64) * step]).collect(),
            max_coord: [10.0, 10.0],
        }
    }
}

/// Active feature indices of one state; all features are binary.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    pub dim: usize,
    pub active: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TileCoder {
    config: TileCoderConfig,
    /// Smallest tile index per axis over all tilings, and the tile count per axis.
    origin: [i64; 2],
    counts: [usize; 2],
}

impl TileCoder {
    pub fn new(config: TileCoderConfig) -> Result<TileCoder> {
        let mut errors = Vec::new();
        if config.tilings == 0 {
            errors.push("tilings must be at least 1".to_string());
        }
        if !(config.tile_width.is_finite() && config.tile_width > 0.0) {
            errors.push("tile_width must be positive".to_string());
        }
        if config.offsets.len() != config.tilings {
            errors.push(format!(
                "offsets has {} entries, expected one per tiling ({})",
                config.offsets.len(),
                config.tilings
            ));
        }
        if config.offsets.iter().flatten().any(|o| !o.is_finite()) {
            errors.push("offsets must be finite".to_string());
        }
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }

        let tile = |coord: f64, off: f64| ((coord - off) / config.tile_width).floor() as i64;
        let mut origin = [i64::MAX; 2];
        let mut counts = [0usize; 2];
        for axis in 0..2 {
            let mut hi = i64::MIN;
            for off in &config.offsets {
                origin[axis] = origin[axis].min(tile(0.0, off[axis]));
                hi = hi.max(tile(config.max_coord[axis], off[axis]));
            }
            counts[axis] = (hi - origin[axis] + 1) as usize;
        }
        Ok(TileCoder { config, origin, counts })
    }

    pub fn config(&self) -> &TileCoderConfig {
        &self.config
    }

    /// Total number of features: tilings times the per-tiling tile count.
    pub fn feature_dim(&self) -> usize {
        self.config.tilings * self.counts[0] * self.counts[1]
    }

    pub fn features(&self, cell: Cell) -> FeatureVector {
        self.features_at(cell.x as f64, cell.y as f64)
    }

    pub fn features_at(&self, x: f64, y: f64) -> FeatureVector {
        let per_tiling = self.counts[0] * self.counts[1];
        let active = self
            .config
            .offsets
            .iter()
            .enumerate()
            .map(|(k, off)| {
                let col = ((x - off[0]) / self.config.tile_width).floor() as i64 - self.origin[0];
                let row = ((y - off[1]) / self.config.tile_width).floor() as i64 - self.origin[1];
                let col = col.clamp(0, self.counts[0] as i64 - 1) as usize;
                let row = row.clamp(0, self.counts[1] as i64 - 1) as usize;
                k * per_tiling + row * self.counts[0] + col
            })
            .collect();
        FeatureVector { dim: self.feature_dim(), active }
    }
}

/// Features of every state of a grid, flattened for the learners' inner loops.
#[derive(Clone, Debug)]
pub struct FeatureTable {
    dim: usize,
    per_state: usize,
    indices: Vec<usize>,
}

impl FeatureTable {
    pub fn new(coder: &TileCoder, grid: &GridSpec) -> FeatureTable {
        let mut indices = Vec::new();
        for &c in grid.states() {
            indices.extend(coder.features(c).active);
        }
        FeatureTable { dim: coder.feature_dim(), per_state: coder.config.tilings, indices }
    }

    /// Table from explicit per-state index lists (each the same length).
    pub fn from_rows(dim: usize, rows: &[Vec<usize>]) -> FeatureTable {
        let per_state = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == per_state && r.iter().all(|&i| i < dim)));
        FeatureTable { dim, per_state, indices: rows.concat() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, state: usize) -> &[usize] {
        &self.indices[state * self.per_state..(state + 1) * self.per_state]
    }

    pub fn num_states(&self) -> usize {
        self.indices.len().checked_div(self.per_state).unwrap_or(0)
    }
}
