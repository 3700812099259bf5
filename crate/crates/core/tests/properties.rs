use std::collections::{BTreeSet, VecDeque};

use garden_core::agents::SelectedObject;
use garden_core::area::{segment_with_cuts, Area};
use garden_core::assets::AssetLibrary;
use garden_core::constraints::{AreaConstraints, Constraint, ConstraintKind};
use garden_core::geometry::{Cell, Obb2D, TerrainClass, TerrainGrid};
use garden_core::layout::{solve_area, LayoutError, LossParams, LossWeights, SolverConfig};
use garden_core::road::{lattice_edge, LatticeEdge, Vertex};
use proptest::prelude::*;

const CS: f64 = 10.0;

fn grid_strategy() -> impl Strategy<Value = TerrainGrid> {
    (4usize..10, 4usize..10).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop::sample::select(vec![0u8, 1, 2, 3, 3, 2]), w * h).prop_map(move |codes| {
            let cells = codes
                .into_iter()
                .map(|c| TerrainClass::ALL.into_iter().find(|t| t.code() == c).unwrap())
                .collect();
            TerrainGrid::from_cells(w, h, CS, cells).unwrap()
        })
    })
}

fn interior_edges(g: &TerrainGrid) -> Vec<LatticeEdge> {
    let mut out = Vec::new();
    for i in 0..=g.width() {
        for j in 0..=g.height() {
            if i < g.width() && j > 0 && j < g.height() {
                out.push(lattice_edge(Vertex::new(i, j), Vertex::new(i + 1, j)));
            }
            if j < g.height() && i > 0 && i < g.width() {
                out.push(lattice_edge(Vertex::new(i, j), Vertex::new(i, j + 1)));
            }
        }
    }
    out
}

fn with_cuts() -> impl Strategy<Value = (TerrainGrid, BTreeSet<LatticeEdge>)> {
    grid_strategy().prop_flat_map(|g| {
        let edges = interior_edges(&g);
        let n = edges.len();
        prop::collection::vec(any::<bool>(), n).prop_map(move |mask| {
            let cuts = edges.iter().zip(&mask).filter(|(_, &m)| m).map(|(e, _)| *e).collect();
            (g.clone(), cuts)
        })
    })
}

fn connected(cells: &[Cell]) -> bool {
    let set: BTreeSet<Cell> = cells.iter().copied().collect();
    let mut seen = BTreeSet::from([cells[0]]);
    let mut queue = VecDeque::from([cells[0]]);
    while let Some(c) = queue.pop_front() {
        let (x, y) = (c.x as i64, c.y as i64);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            if x + dx < 0 || y + dy < 0 {
                continue;
            }
            let n = Cell::new((x + dx) as usize, (y + dy) as usize);
            if set.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == set.len()
}

/// Exact containment for an axis-aligned rectangle in a union of grid cells:
/// every cell meeting the rectangle's interior must belong to the area.
fn inside_cells(rect: &Obb2D, area: &Area) -> bool {
    let cells: BTreeSet<Cell> = area.cells.iter().copied().collect();
    let (lo, hi) = (rect.min(), rect.max());
    if lo.x < 0.0 || lo.y < 0.0 {
        return false;
    }
    let (x0, x1) = ((lo.x / CS).floor() as usize, (hi.x / CS).ceil() as usize);
    let (y0, y1) = ((lo.y / CS).floor() as usize, (hi.y / CS).ceil() as usize);
    (x0..x1).all(|x| (y0..y1).all(|y| cells.contains(&Cell::new(x, y))))
}

fn open_overlap(a: &Obb2D, b: &Obb2D) -> bool {
    let (al, ah, bl, bh) = (a.min(), a.max(), b.min(), b.max());
    al.x < bh.x && bl.x < ah.x && al.y < bh.y && bl.y < ah.y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn areas_partition_buildable_cells((grid, cuts) in with_cuts()) {
        let buildable: BTreeSet<Cell> = (0..grid.len())
            .map(|i| grid.cell_at(i))
            .filter(|c| grid.get(*c).is_buildable())
            .collect();
        match segment_with_cuts(&grid, &cuts) {
            Err(_) => prop_assert!(buildable.is_empty()),
            Ok(areas) => {
                let mut seen = BTreeSet::new();
                for w in areas.windows(2) {
                    prop_assert!(w[0].cells.len() >= w[1].cells.len());
                }
                for a in &areas {
                    prop_assert!(!a.cells.is_empty());
                    prop_assert!(connected(&a.cells));
                    prop_assert!((a.area_m2 - a.cells.len() as f64 * CS * CS).abs() < 1e-9);
                    prop_assert!((a.polygon.area() - a.area_m2).abs() < 1e-6);
                    for c in &a.cells {
                        prop_assert!(seen.insert(*c), "cell {:?} in two areas", c);
                    }
                }
                prop_assert_eq!(seen, buildable);
            }
        }
    }

    #[test]
    fn solver_output_is_hard_feasible(
        (grid, cuts) in with_cuts(),
        picks in prop::collection::vec(0usize..24, 1..6),
        kinds in prop::collection::vec((0usize..8, 0usize..6), 0..6),
    ) {
        let Ok(areas) = segment_with_cuts(&grid, &cuts) else { return Ok(()) };
        let area = &areas[0];
        let lib = AssetLibrary::bundled();
        let sel: Vec<SelectedObject> = picks
            .iter()
            .enumerate()
            .map(|(k, &i)| SelectedObject { instance: format!("o{k}"), asset: lib.records()[i].clone() })
            .collect();
        let mut cons = AreaConstraints::new();
        for (kind, other) in kinds {
            let kind = ConstraintKind::ALL[kind];
            let owner = other % sel.len();
            let c = if kind.is_relational() {
                let rel = (owner + 1 + other) % sel.len();
                if rel == owner {
                    continue;
                }
                Constraint::with(kind, sel[rel].instance.clone())
            } else {
                Constraint::global(kind)
            };
            cons.entry(sel[owner].instance.clone()).or_default().push(c);
        }
        let cfg = SolverConfig { iterations: 10, max_depth_backtracks: 10, ..SolverConfig::default() };
        match solve_area(area, &sel, &cons, &cfg, &LossWeights::default(), &LossParams::default()) {
            Ok(s) => {
                prop_assert_eq!(s.placements.len(), sel.len());
                let fps: Vec<Obb2D> = s.placements.iter().map(|p| p.footprint()).collect();
                for (i, a) in fps.iter().enumerate() {
                    prop_assert!(inside_cells(a, area), "{:?} leaves the area", a);
                    for b in &fps[i + 1..] {
                        prop_assert!(!open_overlap(a, b), "{:?} overlaps {:?}", a, b);
                    }
                }
                prop_assert!(s.report.total >= 0.0);
            }
            Err(LayoutError::NoValidPlacement { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }
}
