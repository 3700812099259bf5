//! Garden areas: buildable cells partitioned by roads.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Cell, Point, Polygon, TerrainClass, TerrainGrid};
use crate::regions::label_components;
use crate::road::{lattice_edge, LatticeEdge, RoadNetwork, Vertex};

pub const MIN_AREA_CELLS: usize = 2;
pub const SMALL_AREA_M2: f64 = 400.0;
pub const LARGE_AREA_M2: f64 = 1600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AreaError {
    #[error("no buildable area: the grid has no Land or Ground cells")]
    NoBuildableArea,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub id: String,
    pub cells: Vec<Cell>,
    pub polygon: Polygon,
    pub center: Point,
    pub dominant_class: TerrainClass,
    pub water_adjacent: bool,
    pub road_adjacent: bool,
    pub area_m2: f64,
}

impl Area {
    /// Boundary edges of the polygon, in meters.
    pub fn boundary(&self) -> Vec<(Point, Point)> {
        self.polygon.edges().collect()
    }

    pub fn size_token(&self) -> &'static str {
        if self.area_m2 < SMALL_AREA_M2 {
            "small"
        } else if self.area_m2 > LARGE_AREA_M2 {
            "large"
        } else {
            "medium"
        }
    }

    /// Position of the centroid against the grid's thirds. Off-middle on both
    /// axes resolves to the axis with the larger normalized offset.
    pub fn position_token(&self, grid: &TerrainGrid) -> &'static str {
        let (ex, ey) = grid.extent();
        let dx = self.center.x / ex - 0.5;
        let dy = self.center.y / ey - 0.5;
        let third = 1.0 / 6.0;
        if dx.abs() <= third && dy.abs() <= third {
            "center"
        } else if dy.abs() >= dx.abs() {
            if dy > 0.0 {
                "north"
            } else {
                "south"
            }
        } else if dx > 0.0 {
            "east"
        } else {
            "west"
        }
    }
}

/// The lattice edge shared by two 4-adjacent cells given as indices.
fn shared_side(width: usize, a: usize, b: usize) -> LatticeEdge {
    let (lo, hi) = (a.min(b), a.max(b));
    let (x, y) = (hi % width, hi / width);
    if hi - lo == 1 {
        lattice_edge(Vertex::new(x, y), Vertex::new(x, y + 1))
    } else {
        lattice_edge(Vertex::new(x, y), Vertex::new(x + 1, y))
    }
}

/// Splits Land and Ground cells into areas. Road lattice edges separate the
/// cells on either side; components under two cells join their largest
/// neighbour. Areas come out largest first, named `area-0`, `area-1`, ...
pub fn segment(grid: &TerrainGrid, roads: &RoadNetwork) -> Result<Vec<Area>, AreaError> {
    let cuts = roads.edges();
    segment_with_cuts(grid, &cuts)
}

pub fn segment_with_cuts(
    grid: &TerrainGrid,
    cuts: &BTreeSet<LatticeEdge>,
) -> Result<Vec<Area>, AreaError> {
    let w = grid.width();
    let cells = grid.cells();
    let comps = label_components(
        w,
        grid.height(),
        |i| cells[i].is_buildable(),
        |a, b| !cuts.contains(&shared_side(w, a, b)),
    );
    if comps.is_empty() {
        return Err(AreaError::NoBuildableArea);
    }

    let mut label: Vec<Option<usize>> = comps.label.clone();
    let mut members = comps.members.clone();
    for id in 0..members.len() {
        if members[id].is_empty() || members[id].len() >= MIN_AREA_CELLS {
            continue;
        }
        let mut neighbours: BTreeSet<usize> = BTreeSet::new();
        for &i in &members[id] {
            for n in grid.neighbors4(grid.cell_at(i)) {
                if let Some(other) = label[grid.index(n)] {
                    if other != id {
                        neighbours.insert(other);
                    }
                }
            }
        }
        let target = neighbours
            .into_iter()
            .max_by(|&a, &b| members[a].len().cmp(&members[b].len()).then(b.cmp(&a)));
        if let Some(t) = target {
            let moved = std::mem::take(&mut members[id]);
            for &i in &moved {
                label[i] = Some(t);
            }
            members[t].extend(moved);
            members[t].sort_unstable();
        }
    }
    members.retain(|m| !m.is_empty());
    members.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));

    let cs = grid.cell_size();
    Ok(members
        .iter()
        .enumerate()
        .map(|(k, m)| build_area(grid, cuts, format!("area-{k}"), m, cs))
        .collect())
}

fn build_area(
    grid: &TerrainGrid,
    cuts: &BTreeSet<LatticeEdge>,
    id: String,
    members: &[usize],
    cs: f64,
) -> Area {
    let cells: Vec<Cell> = members.iter().map(|&i| grid.cell_at(i)).collect();
    let set: BTreeSet<Cell> = cells.iter().copied().collect();
    let n = cells.len() as f64;
    let sum = cells.iter().fold(Point::default(), |acc, &c| acc.add(grid.cell_center(c)));
    let ground = cells.iter().filter(|&&c| grid.get(c) == TerrainClass::Ground).count();
    let dominant_class =
        if 2 * ground >= cells.len() { TerrainClass::Ground } else { TerrainClass::Land };
    let water_adjacent = cells.iter().any(|&c| {
        grid.neighbors4(c).any(|nb| grid.get(nb) == TerrainClass::Waterbody)
    });
    let road_adjacent = cells.iter().any(|&c| cell_sides(c).iter().any(|e| cuts.contains(e)));
    Area {
        id,
        polygon: trace_cells(&set, cs),
        cells,
        center: sum.scale(1.0 / n),
        dominant_class,
        water_adjacent,
        road_adjacent,
        area_m2: n * cs * cs,
    }
}

fn cell_sides(c: Cell) -> [LatticeEdge; 4] {
    let (x, y) = (c.x, c.y);
    [
        lattice_edge(Vertex::new(x, y), Vertex::new(x + 1, y)),
        lattice_edge(Vertex::new(x + 1, y), Vertex::new(x + 1, y + 1)),
        lattice_edge(Vertex::new(x, y + 1), Vertex::new(x + 1, y + 1)),
        lattice_edge(Vertex::new(x, y), Vertex::new(x, y + 1)),
    ]
}

/// Rectilinear boundary of a cell set: outer rings counter-clockwise, holes
/// clockwise, collinear vertices removed.
pub fn trace_cells(cells: &BTreeSet<Cell>, cs: f64) -> Polygon {
    // Directed unit edges with the interior on the left.
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && cells.contains(&Cell::new(x as usize, y as usize));
    let mut out: BTreeMap<(i64, i64), Vec<(i64, i64)>> = BTreeMap::new();
    for c in cells {
        let (x, y) = (c.x as i64, c.y as i64);
        if !inside(x, y - 1) {
            out.entry((x, y)).or_default().push((x + 1, y));
        }
        if !inside(x + 1, y) {
            out.entry((x + 1, y)).or_default().push((x + 1, y + 1));
        }
        if !inside(x, y + 1) {
            out.entry((x + 1, y + 1)).or_default().push((x, y + 1));
        }
        if !inside(x - 1, y) {
            out.entry((x, y + 1)).or_default().push((x, y));
        }
    }

    let mut rings = Vec::new();
    while let Some((&start, _)) = out.iter().find(|(_, v)| !v.is_empty()) {
        let mut ring = vec![start];
        let mut prev = start;
        let mut here = out.get_mut(&start).expect("start").pop().expect("edge");
        while here != start {
            ring.push(here);
            let din = (here.0 - prev.0, here.1 - prev.1);
            let outs = out.get_mut(&here).expect("closed boundary");
            // At pinch points take the left turn so rings never cross.
            let pick = (0..outs.len())
                .max_by_key(|&k| {
                    let d = (outs[k].0 - here.0, outs[k].1 - here.1);
                    din.0 * d.1 - din.1 * d.0
                })
                .expect("outgoing edge");
            prev = here;
            here = outs.swap_remove(pick);
        }
        rings.push(simplify(&ring, cs));
    }
    Polygon::with_rings(rings)
}

fn simplify(ring: &[(i64, i64)], cs: f64) -> Vec<Point> {
    let n = ring.len();
    (0..n)
        .filter(|&k| {
            let a = ring[(k + n - 1) % n];
            let b = ring[k];
            let c = ring[(k + 1) % n];
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) != 0
        })
        .map(|k| Point::new(ring[k].0 as f64 * cs, ring[k].1 as f64 * cs))
        .collect()
}

/// One-line deterministic summary used by the asset-selection agent.
pub fn describe(area: &Area, grid: &TerrainGrid) -> String {
    format!(
        "id={} area_m2={} class={} water_adjacent={} road_adjacent={} position={} size={}",
        area.id,
        area.area_m2,
        area.dominant_class,
        area.water_adjacent,
        area.road_adjacent,
        area.position_token(grid),
        area.size_token(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ground(w: usize, h: usize) -> TerrainGrid {
        TerrainGrid::filled(w, h, 10.0, TerrainClass::Ground).unwrap()
    }

    fn vertical_cut(x: usize, h: usize) -> BTreeSet<LatticeEdge> {
        (0..h).map(|j| lattice_edge(Vertex::new(x, j), Vertex::new(x, j + 1))).collect()
    }

    #[test]
    fn straight_road_makes_two_areas() {
        let g = ground(20, 15);
        let areas = segment_with_cuts(&g, &vertical_cut(8, 15)).unwrap();
        assert_eq!(areas.len(), 2);
        assert_eq!(areas[0].cells.len(), 12 * 15);
        assert_eq!(areas[1].cells.len(), 8 * 15);
        assert_eq!(areas[0].id, "area-0");
        assert!(areas.iter().all(|a| a.road_adjacent));
        assert!((areas[0].polygon.area() - areas[0].area_m2).abs() < 1e-9);
        assert_eq!(areas[0].polygon.rings[0].len(), 4);
    }

    #[test]
    fn all_water_has_no_area() {
        let g = TerrainGrid::filled(6, 6, 10.0, TerrainClass::Waterbody).unwrap();
        assert_eq!(segment_with_cuts(&g, &BTreeSet::new()), Err(AreaError::NoBuildableArea));
    }

    #[test]
    fn singleton_joins_largest_neighbour() {
        let g = ground(6, 6);
        // Isolate cell (0, 0) behind a road on two sides.
        let cuts: BTreeSet<LatticeEdge> = [
            lattice_edge(Vertex::new(1, 0), Vertex::new(1, 1)),
            lattice_edge(Vertex::new(0, 1), Vertex::new(1, 1)),
        ]
        .into_iter()
        .collect();
        let areas = segment_with_cuts(&g, &cuts).unwrap();
        assert_eq!(areas.len(), 1);
        assert_eq!(areas[0].cells.len(), 36);
    }

    #[test]
    fn ring_with_hole() {
        let mut set = BTreeSet::new();
        for y in 0..3 {
            for x in 0..3 {
                if (x, y) != (1, 1) {
                    set.insert(Cell::new(x, y));
                }
            }
        }
        let poly = trace_cells(&set, 2.0);
        assert_eq!(poly.rings.len(), 2);
        assert!((poly.area() - 32.0).abs() < 1e-9);
        assert!(!poly.contains_point(Point::new(3.0, 3.0)));
        assert!(poly.contains_point(Point::new(1.0, 1.0)));
    }

    #[test]
    fn diagonal_pinch_traces_cleanly() {
        let set: BTreeSet<Cell> = [Cell::new(0, 0), Cell::new(1, 1), Cell::new(1, 0)].into_iter().collect();
        let poly = trace_cells(&set, 1.0);
        assert!((poly.area() - 3.0).abs() < 1e-9);
        let set: BTreeSet<Cell> = [Cell::new(0, 0), Cell::new(1, 1)].into_iter().collect();
        let poly = trace_cells(&set, 1.0);
        assert_eq!(poly.rings.len(), 2);
        assert!((poly.area() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn central_pond_side_area_summary() {
        let mut g = TerrainGrid::filled(20, 15, 10.0, TerrainClass::Outside).unwrap();
        // 5 x 2 Ground patch around the grid center with water just north.
        for y in 6..8 {
            for x in 8..13 {
                g.set(Cell::new(x, y), TerrainClass::Ground);
            }
        }
        for x in 8..13 {
            g.set(Cell::new(x, 8), TerrainClass::Waterbody);
        }
        let areas = segment_with_cuts(&g, &BTreeSet::new()).unwrap();
        assert_eq!(areas.len(), 1);
        let text = describe(&areas[0], &g);
        assert!(text.contains("position=center"), "{text}");
        assert!(text.contains("size=medium"), "{text}");
        assert!(text.contains("water_adjacent=true"), "{text}");
        assert!(text.contains("area_m2=1000"), "{text}");
        assert_eq!(text, describe(&areas[0], &g));
    }

    #[test]
    fn whole_grid_is_large() {
        let g = ground(20, 15);
        let areas = segment_with_cuts(&g, &BTreeSet::new()).unwrap();
        assert!(describe(&areas[0], &g).contains("size=large"));
        assert!(describe(&areas[0], &g).contains("position=center"));
    }

    #[test]
    fn position_tokens() {
        let g = ground(30, 30);
        let mut a = segment_with_cuts(&g, &BTreeSet::new()).unwrap().remove(0);
        a.center = Point::new(150.0, 280.0);
        assert_eq!(a.position_token(&g), "north");
        a.center = Point::new(10.0, 150.0);
        assert_eq!(a.position_token(&g), "west");
        a.center = Point::new(280.0, 5.0);
        assert_eq!(a.position_token(&g), "south");
    }
}
