//! 4-connected component labeling on grids.

use crate::geometry::{TerrainClass, TerrainGrid};

/// Components of a cell subset. `label[i]` is `None` for excluded cells.
#[derive(Debug, Clone)]
pub struct Components {
    pub label: Vec<Option<usize>>,
    /// Member cell indices per component, in ascending index order.
    pub members: Vec<Vec<usize>>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Labels 4-connected components over cells where `include` holds; two
/// neighbouring included cells join when `joined(a, b)` is true.
/// Components are numbered in order of their lowest cell index.
pub fn label_components(
    width: usize,
    height: usize,
    include: impl Fn(usize) -> bool,
    joined: impl Fn(usize, usize) -> bool,
) -> Components {
    let n = width * height;
    let mut label = vec![None; n];
    let mut members = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start].is_some() || !include(start) {
            continue;
        }
        let id = members.len();
        let mut comp = Vec::new();
        label[start] = Some(id);
        stack.push(start);
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if label[j].is_none() && include(j) && joined(i, j) {
                    label[j] = Some(id);
                    stack.push(j);
                }
            };
            if x + 1 < width {
                visit(i + 1);
            }
            if x > 0 {
                visit(i - 1);
            }
            if y + 1 < height {
                visit(i + width);
            }
            if y > 0 {
                visit(i - width);
            }
        }
        comp.sort_unstable();
        members.push(comp);
    }
    Components { label, members }
}

/// Same-class regions of the whole grid.
pub fn class_regions(grid: &TerrainGrid) -> Components {
    let cells = grid.cells();
    label_components(grid.width(), grid.height(), |_| true, |a, b| cells[a] == cells[b])
}

/// Regions of a single class.
pub fn regions_of(grid: &TerrainGrid, class: TerrainClass) -> Components {
    let cells = grid.cells();
    label_components(grid.width(), grid.height(), |i| cells[i] == class, |_, _| true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_has_singletons() {
        let w = 6;
        let h = 4;
        let comps = label_components(w, h, |i| (i % w + i / w) % 2 == 0, |_, _| true);
        assert_eq!(comps.len(), 12);
        assert!(comps.members.iter().all(|m| m.len() == 1));
    }

    #[test]
    fn class_regions_on_stripes() {
        let rows: Vec<Vec<u8>> = (0..4).map(|_| vec![3, 3, 1, 1, 2]).collect();
        let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
        let g = TerrainGrid::from_codes(&refs, 1.0).unwrap();
        let comps = class_regions(&g);
        assert_eq!(comps.len(), 3);
        assert_eq!(regions_of(&g, TerrainClass::Waterbody).members[0].len(), 8);
    }
}
