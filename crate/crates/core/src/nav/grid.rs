use serde::{Deserialize, Serialize};

/// Grid cell index; `i` runs along +x, `j` along +y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("map is not valid JSON: {0}")]
    Json(String),
    #[error("map has no rows")]
    Empty,
    #[error("row {row} has {len} cells, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
    #[error("row {row} contains {ch:?}; only '.' and '#' are allowed")]
    BadCell { row: usize, ch: char },
    #[error("resolution must be > 0, got {0}")]
    BadResolution(f64),
}

/// Free/occupied map. Cell (i, j) has its center at
/// `(origin_x + i * resolution, origin_y + j * resolution)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin_x: f64,
    origin_y: f64,
    occupied: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    resolution: f64,
    #[serde(default)]
    origin: Origin,
    rows: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Origin {
    x: f64,
    y: f64,
}

impl OccupancyGrid {
    /// Row-major `occupied` flags, row `j` holding cells `i = 0..width`.
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin_x: f64,
        origin_y: f64,
        occupied: Vec<bool>,
    ) -> Result<Self, MapError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(MapError::BadResolution(resolution));
        }
        if width == 0 || height == 0 {
            return Err(MapError::Empty);
        }
        assert_eq!(occupied.len(), width * height, "cell count must equal width * height");
        Ok(Self { width, height, resolution, origin_x, origin_y, occupied })
    }

    pub fn empty(width: usize, height: usize, resolution: f64) -> Self {
        Self::new(width, height, resolution, 0.0, 0.0, vec![false; width * height]).expect("valid empty grid")
    }

    /// Parses the JSON map format: `rows[j]` is a string of '.' (free) and
    /// '#' (occupied), character `i` being cell (i, j).
    pub fn from_map_json(text: &str) -> Result<Self, MapError> {
        let file: MapFile = serde_json::from_str(text).map_err(|e| MapError::Json(e.to_string()))?;
        let height = file.rows.len();
        if height == 0 {
            return Err(MapError::Empty);
        }
        let width = file.rows[0].chars().count();
        let mut occupied = Vec::with_capacity(width * height);
        for (row, line) in file.rows.iter().enumerate() {
            let len = line.chars().count();
            if len != width {
                return Err(MapError::Ragged { row, len, expected: width });
            }
            for ch in line.chars() {
                match ch {
                    '.' => occupied.push(false),
                    '#' => occupied.push(true),
                    ch => return Err(MapError::BadCell { row, ch }),
                }
            }
        }
        Self::new(width, height, file.resolution, file.origin.x, file.origin.y, occupied)
    }

    pub fn to_map_json(&self) -> String {
        let rows = (0..self.height)
            .map(|j| (0..self.width).map(|i| if self.is_occupied(Cell::new(i, j)) { '#' } else { '.' }).collect())
            .collect();
        let file = MapFile { resolution: self.resolution, origin: Origin { x: self.origin_x, y: self.origin_y }, rows };
        serde_json::to_string(&file).expect("map serializes")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.j * self.width + cell.i
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.i < self.width && cell.j < self.height
    }

    /// Out-of-bounds cells count as occupied.
    pub fn is_occupied(&self, cell: Cell) -> bool {
        !self.contains(cell) || self.occupied[self.index(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.is_occupied(cell)
    }

    pub fn set_occupied(&mut self, cell: Cell, occupied: bool) {
        let idx = self.index(cell);
        self.occupied[idx] = occupied;
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.occupied.iter().enumerate().filter(|(_, &o)| o).map(|(idx, _)| self.cell_at(idx))
    }

    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        (
            self.origin_x + cell.i as f64 * self.resolution,
            self.origin_y + cell.j as f64 * self.resolution,
        )
    }

    /// Nearest cell to a world point, or `None` outside the grid.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<Cell> {
        let fi = ((x - self.origin_x) / self.resolution).round();
        let fj = ((y - self.origin_y) / self.resolution).round();
        if !(fi.is_finite() && fj.is_finite()) || fi < 0.0 || fj < 0.0 {
            return None;
        }
        let cell = Cell::new(fi as usize, fj as usize);
        self.contains(cell).then_some(cell)
    }

    /// World point lies in a free cell of this grid.
    pub fn is_free_at(&self, x: f64, y: f64) -> bool {
        self.world_to_cell(x, y).is_some_and(|c| self.is_free(c))
    }
}
