use super::grid::{Cell, OccupancyGrid};

/// Grows obstacles by `radius` meters: a cell is occupied in the result iff
/// some occupied cell's center lies within `radius` of its center.
pub fn inflate(grid: &OccupancyGrid, radius: f64) -> OccupancyGrid {
    assert!(radius >= 0.0, "inflation radius must be non-negative");
    let r_cells = radius / grid.resolution();
    // tolerate float noise so e.g. 0.25 m on a 0.25 m grid reaches the 4-neighbors
    let limit = r_cells * r_cells + 1e-9;
    let reach = r_cells.floor() as isize;
    let disk: Vec<(isize, isize)> = (-reach..=reach)
        .flat_map(|di| (-reach..=reach).map(move |dj| (di, dj)))
        .filter(|&(di, dj)| ((di * di + dj * dj) as f64) <= limit)
        .collect();

    let mut out = grid.clone();
    let (w, h) = (grid.width() as isize, grid.height() as isize);
    for cell in grid.occupied_cells() {
        for &(di, dj) in &disk {
            let (i, j) = (cell.i as isize + di, cell.j as isize + dj);
            if (0..w).contains(&i) && (0..h).contains(&j) {
                out.set_occupied(Cell::new(i as usize, j as usize), true);
            }
        }
    }
    out
}
