//! A fully assembled prediction task: layout, sub-tasks and features.

use crate::error::Result;
use crate::features::{FeatureTable, TileCoder, TileCoderConfig};
use crate::grid::{build_grid, GridFile, GridSpec, Variant};
use crate::subtask::{active_table, build_subtasks, SubTask};

#[derive(Clone, Debug)]
pub struct Task {
    pub grid: GridSpec,
    pub subtasks: Vec<SubTask>,
    pub coder: TileCoder,
    pub features: FeatureTable,
    /// The two active sub-task ids per state index.
    pub active: Vec<[usize; 2]>,
}

impl Task {
    /// The shipped layout and default tile coder.
    pub fn new(variant: Variant) -> Task {
        let grid = build_grid(variant);
        Task::from_parts(grid, TileCoderConfig::default()).expect("default task is valid")
    }

    pub fn from_file(file: &GridFile, variant: Variant, coder: TileCoderConfig) -> Result<Task> {
        Task::from_parts(GridSpec::from_file(file, variant)?, coder)
    }

    pub fn from_parts(grid: GridSpec, coder: TileCoderConfig) -> Result<Task> {
        let coder = TileCoder::new(coder)?;
        let subtasks = build_subtasks(&grid);
        let active = active_table(&grid, &subtasks)?;
        let features = FeatureTable::new(&coder, &grid);
        Ok(Task { grid, subtasks, coder, features, active })
    }

    pub fn variant(&self) -> Variant {
        self.grid.variant()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }
}
