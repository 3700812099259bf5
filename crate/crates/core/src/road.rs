//! Explorative road synthesis on the cell-corner lattice.
//!
//! Roads run along cell sides. Each lattice edge therefore separates two
//! cells (one may lie off the grid, which reads as Outside), and its score
//! comes from the classes on either side. Legs between waypoints are found by
//! a least-cost search whose state carries the heading, the current straight
//! run length and the bridge count, so the run cap and the bridge budget are
//! enforced exactly.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{catmull_rom_spline, Cell, GridEdge, Point, TerrainClass, TerrainGrid};
use crate::regions::label_components;

/// Base cost that keeps every finite edge cost positive.
pub const BASE_EDGE_COST: f64 = 101.0;
pub const COVERAGE_THRESHOLD: f64 = 0.6;
pub const COVERAGE_RADIUS_CELLS: usize = 3;
pub const MAX_COVERAGE_ROUNDS: usize = 3;
pub const SPLINE_SAMPLES: usize = 6;
/// Turns closer together than this many edges pay the turn-density penalty.
pub const TURN_SPACING: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoadError {
    #[error("no valid entrance: every boundary cell is Outside or Waterbody")]
    NoValidEntrance,
    #[error("unroutable: {0}")]
    Unroutable(String),
    #[error("invalid road parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadParams {
    pub num_entrances: usize,
    pub num_keypoints: usize,
    pub main_road_width: f64,
    pub complexity: f64,
}

impl Default for RoadParams {
    fn default() -> Self {
        Self { num_entrances: 2, num_keypoints: 3, main_road_width: 3.0, complexity: 0.5 }
    }
}

impl RoadParams {
    /// Longest unpenalized straight run, in edges.
    pub fn max_straight(&self) -> usize {
        4 - (2.0 * self.complexity.clamp(0.0, 1.0)).floor() as usize
    }

    pub fn validate(&self, cell_size: f64) -> Result<(), RoadError> {
        if self.num_entrances < 1 {
            return Err(RoadError::InvalidParams("need at least one entrance".into()));
        }
        if !(1.0..=cell_size).contains(&self.main_road_width) {
            return Err(RoadError::InvalidParams(format!(
                "road width {} outside [1, {cell_size}]",
                self.main_road_width
            )));
        }
        if !(0.0..=1.0).contains(&self.complexity) {
            return Err(RoadError::InvalidParams("complexity outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeScoreWeights {
    pub border_bonus: f64,
    pub waterfront_bonus: f64,
    pub outside_penalty: f64,
    pub water_cross_penalty: f64,
    pub straight_run_penalty: f64,
    pub turn_density_penalty: f64,
}

impl Default for EdgeScoreWeights {
    fn default() -> Self {
        Self {
            border_bonus: 2.0,
            waterfront_bonus: 3.0,
            outside_penalty: -100.0,
            water_cross_penalty: -8.0,
            straight_run_penalty: -1.0,
            turn_density_penalty: -0.5,
        }
    }
}

/// Corner of the cell lattice, `0 <= i <= width`, `0 <= j <= height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub i: usize,
    pub j: usize,
}

impl Vertex {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    pub fn to_point(self, cell_size: f64) -> Point {
        Point::new(self.i as f64 * cell_size, self.j as f64 * cell_size)
    }
}

/// Undirected lattice edge with `a < b`.
pub type LatticeEdge = (Vertex, Vertex);

pub fn lattice_edge(a: Vertex, b: Vertex) -> LatticeEdge {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// The two cells separated by a lattice edge, as signed coordinates.
pub fn edge_sides(e: LatticeEdge) -> [(i64, i64); 2] {
    let (a, b) = e;
    let (i, j) = (a.i as i64, a.j as i64);
    if a.j == b.j {
        // horizontal, a is the west end
        [(i, j - 1), (i, j)]
    } else {
        // vertical, a is the south end
        [(i - 1, j), (i, j)]
    }
}

/// The lattice edge shared by two 4-adjacent cells.
pub fn grid_edge_to_lattice(e: &GridEdge) -> LatticeEdge {
    let (a, b) = (e.a, e.b);
    if a.y == b.y {
        let x = a.x.max(b.x);
        lattice_edge(Vertex::new(x, a.y), Vertex::new(x, a.y + 1))
    } else {
        let y = a.y.max(b.y);
        lattice_edge(Vertex::new(a.x, y), Vertex::new(a.x + 1, y))
    }
}

/// Local score for a road running between two cells of the given classes.
/// Off-grid sides read as Outside.
pub fn score_sides(a: TerrainClass, b: TerrainClass, w: &EdgeScoreWeights) -> f64 {
    use TerrainClass::*;
    match (a, b) {
        (Outside, Outside) => w.outside_penalty,
        (Waterbody, Waterbody) => w.water_cross_penalty,
        _ => {
            let mut s = 0.0;
            if (a == Waterbody) != (b == Waterbody) {
                s += w.waterfront_bonus;
            }
            if a != b && a != Outside && b != Outside {
                s += w.border_bonus;
            }
            s
        }
    }
}

pub fn score_edge(grid: &TerrainGrid, e: &GridEdge, w: &EdgeScoreWeights) -> f64 {
    score_sides(grid.get(e.a), grid.get(e.b), w)
}

pub fn score_lattice_edge(grid: &TerrainGrid, e: LatticeEdge, w: &EdgeScoreWeights) -> f64 {
    let [s0, s1] = edge_sides(e);
    score_sides(grid.get_signed(s0.0, s0.1), grid.get_signed(s1.0, s1.1), w)
}

pub fn is_waterfront(grid: &TerrainGrid, e: LatticeEdge) -> bool {
    let [s0, s1] = edge_sides(e);
    let a = grid.get_signed(s0.0, s0.1) == TerrainClass::Waterbody;
    let b = grid.get_signed(s1.0, s1.1) == TerrainClass::Waterbody;
    a != b
}

pub fn is_water_crossing(grid: &TerrainGrid, e: LatticeEdge) -> bool {
    let [s0, s1] = edge_sides(e);
    grid.get_signed(s0.0, s0.1) == TerrainClass::Waterbody
        && grid.get_signed(s1.0, s1.1) == TerrainClass::Waterbody
}

/// A lattice vertex is inside Outside when all four surrounding cells are Outside.
pub fn vertex_in_outside(grid: &TerrainGrid, v: Vertex) -> bool {
    let (i, j) = (v.i as i64, v.j as i64);
    [(i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)]
        .iter()
        .all(|&(x, y)| grid.get_signed(x, y) == TerrainClass::Outside)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub entrances: Vec<Vertex>,
    pub keypoints: Vec<Cell>,
    /// Lattice polylines, one per routed leg.
    pub segments: Vec<Vec<Vertex>>,
    /// Smoothed polylines in meters, parallel to `segments`.
    pub splines: Vec<Vec<Point>>,
    pub width: f64,
    pub max_straight: usize,
    pub cell_size: f64,
}

impl RoadNetwork {
    pub fn edges(&self) -> BTreeSet<LatticeEdge> {
        self.segments
            .iter()
            .flat_map(|s| s.windows(2).map(|w| lattice_edge(w[0], w[1])))
            .collect()
    }

    pub fn vertices(&self) -> BTreeSet<Vertex> {
        self.segments.iter().flatten().copied().chain(self.entrances.iter().copied()).collect()
    }

    /// Number of maximal water-crossing runs over all segments.
    pub fn bridge_count(&self, grid: &TerrainGrid) -> usize {
        self.segments
            .iter()
            .map(|s| {
                let mut count = 0;
                let mut wet = false;
                for w in s.windows(2) {
                    let now = is_water_crossing(grid, lattice_edge(w[0], w[1]));
                    if now && !wet {
                        count += 1;
                    }
                    wet = now;
                }
                count
            })
            .sum()
    }

    /// Whether the union of segments plus entrances forms one connected graph.
    pub fn is_connected(&self) -> bool {
        let verts: Vec<Vertex> = self.vertices().into_iter().collect();
        if verts.is_empty() {
            return true;
        }
        let index: BTreeMap<Vertex, usize> = verts.iter().enumerate().map(|(k, v)| (*v, k)).collect();
        let mut parent: Vec<usize> = (0..verts.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (a, b) in self.edges() {
            let (ra, rb) = (find(&mut parent, index[&a]), find(&mut parent, index[&b]));
            parent[ra] = rb;
        }
        let root = find(&mut parent, 0);
        (0..verts.len()).all(|k| find(&mut parent, k) == root)
    }

    /// Longest straight run (in edges) within any segment.
    pub fn longest_straight_run(&self) -> usize {
        self.segments.iter().map(|s| longest_run(s)).max().unwrap_or(0)
    }
}

pub fn longest_run(path: &[Vertex]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut last: Option<(i64, i64)> = None;
    for w in path.windows(2) {
        let d = (w[1].i as i64 - w[0].i as i64, w[1].j as i64 - w[0].j as i64);
        run = if Some(d) == last { run + 1 } else { 1 };
        last = Some(d);
        best = best.max(run);
    }
    best
}

pub fn turn_count(path: &[Vertex]) -> usize {
    let dirs: Vec<(i64, i64)> = path
        .windows(2)
        .map(|w| (w[1].i as i64 - w[0].i as i64, w[1].j as i64 - w[0].j as i64))
        .collect();
    dirs.windows(2).filter(|d| d[0] != d[1]).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    North,
    East,
    South,
    West,
}

const SIDES: [Side; 4] = [Side::North, Side::East, Side::South, Side::West];

fn side_candidates(grid: &TerrainGrid, side: Side) -> Vec<Vertex> {
    let (w, h) = (grid.width(), grid.height());
    let ok = |c: (i64, i64)| grid.get_signed(c.0, c.1).is_buildable();
    match side {
        Side::North => (1..w).map(|i| Vertex::new(i, h)).filter(|v| ok((v.i as i64 - 1, h as i64 - 1)) || ok((v.i as i64, h as i64 - 1))).collect(),
        Side::South => (1..w).map(|i| Vertex::new(i, 0)).filter(|v| ok((v.i as i64 - 1, 0)) || ok((v.i as i64, 0))).collect(),
        Side::East => (1..h).map(|j| Vertex::new(w, j)).filter(|v| ok((w as i64 - 1, v.j as i64 - 1)) || ok((w as i64 - 1, v.j as i64))).collect(),
        Side::West => (1..h).map(|j| Vertex::new(0, j)).filter(|v| ok((0, v.j as i64 - 1)) || ok((0, v.j as i64))).collect(),
    }
}

/// Samples `n` entrances on the outer boundary, cycling sides N, E, S, W from
/// a random starting side. Each entrance touches a Land or Ground cell.
pub fn sample_entrances(
    grid: &TerrainGrid,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vertex>, RoadError> {
    let mut pools: Vec<Vec<Vertex>> = SIDES.iter().map(|&s| side_candidates(grid, s)).collect();
    let total: usize = pools.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(RoadError::NoValidEntrance);
    }
    let start = rng.gen_range(0..4);
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while out.len() < n.min(total) {
        let pool = &mut pools[(start + k) % 4];
        k += 1;
        if pool.is_empty() {
            continue;
        }
        let idx = rng.gen_range(0..pool.len());
        out.push(pool.remove(idx));
    }
    Ok(out)
}

/// Buildable regions, largest first (ties by lowest cell index).
fn buildable_regions(grid: &TerrainGrid) -> Vec<Vec<usize>> {
    let cells = grid.cells();
    let mut comps =
        label_components(grid.width(), grid.height(), |i| cells[i].is_buildable(), |_, _| true).members;
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
}

fn sample_keypoints(grid: &TerrainGrid, n: usize, rng: &mut impl Rng) -> Vec<Cell> {
    let regions = buildable_regions(grid);
    let mut out: Vec<Cell> = Vec::new();
    if regions.is_empty() {
        return out;
    }
    for k in 0..n {
        let region = &regions[k % regions.len()];
        let free: Vec<usize> =
            region.iter().copied().filter(|&i| !out.contains(&grid.cell_at(i))).collect();
        if free.is_empty() {
            continue;
        }
        out.push(grid.cell_at(free[rng.gen_range(0..free.len())]));
    }
    out
}

fn cell_corners(c: Cell) -> [Vertex; 4] {
    [
        Vertex::new(c.x, c.y),
        Vertex::new(c.x + 1, c.y),
        Vertex::new(c.x, c.y + 1),
        Vertex::new(c.x + 1, c.y + 1),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Heading {
    dir: usize,
    run: usize,
    wet: bool,
}

const NO_DIR: usize = 4;
const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[derive(Copy, Clone)]
struct Frontier {
    cost: f64,
    state: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.state.cmp(&self.state))
    }
}

struct LegSearch<'a> {
    grid: &'a TerrainGrid,
    weights: &'a EdgeScoreWeights,
    max_straight: usize,
    /// Hard limit on straight runs; steps past `max_straight` up to it pay.
    cap: usize,
    budget: usize,
    vw: usize,
    vh: usize,
}

struct LegResult {
    path: Vec<Vertex>,
    end: Heading,
    bridges: usize,
}

impl<'a> LegSearch<'a> {
    fn new(grid: &'a TerrainGrid, params: &RoadParams, weights: &'a EdgeScoreWeights) -> Self {
        let max_straight = params.max_straight();
        Self {
            grid,
            weights,
            max_straight,
            cap: max_straight + 1,
            budget: params.num_entrances,
            vw: grid.width() + 1,
            vh: grid.height() + 1,
        }
    }

    fn vertex_index(&self, v: Vertex) -> usize {
        v.j * self.vw + v.i
    }

    fn state_index(&self, v: usize, h: Heading, bridges: usize) -> usize {
        (((v * 5 + h.dir) * (self.cap + 1) + h.run) * (self.budget + 1) + bridges) * 2 + h.wet as usize
    }

    fn decode(&self, mut s: usize) -> (usize, Heading, usize) {
        let wet = s % 2 == 1;
        s /= 2;
        let bridges = s % (self.budget + 1);
        s /= self.budget + 1;
        let run = s % (self.cap + 1);
        s /= self.cap + 1;
        let dir = s % 5;
        (s / 5, Heading { dir, run, wet }, bridges)
    }

    fn search(
        &self,
        start: Vertex,
        heading: Heading,
        bridges_used: usize,
        goals: &BTreeSet<Vertex>,
    ) -> Option<LegResult> {
        if goals.contains(&start) {
            return Some(LegResult { path: vec![start], end: heading, bridges: 0 });
        }
        let n_states = self.vw * self.vh * 5 * (self.cap + 1) * (self.budget + 1) * 2;
        let mut dist = vec![f64::INFINITY; n_states];
        let mut prev = vec![usize::MAX; n_states];
        let mut heap = BinaryHeap::new();
        let s0 = self.state_index(self.vertex_index(start), heading, bridges_used);
        dist[s0] = 0.0;
        heap.push(Frontier { cost: 0.0, state: s0 });
        let turn_penalty = -self.weights.turn_density_penalty;
        let run_penalty = -self.weights.straight_run_penalty;

        while let Some(Frontier { cost, state }) = heap.pop() {
            if cost > dist[state] {
                continue;
            }
            let (vi, h, bridges) = self.decode(state);
            let v = Vertex::new(vi % self.vw, vi / self.vw);
            if goals.contains(&v) {
                let mut path = vec![v];
                let mut s = state;
                while prev[s] != usize::MAX {
                    s = prev[s];
                    let (pi, _, _) = self.decode(s);
                    path.push(Vertex::new(pi % self.vw, pi / self.vw));
                }
                path.reverse();
                return Some(LegResult { path, end: h, bridges: bridges - bridges_used });
            }
            for (d, &(dx, dy)) in DIRS.iter().enumerate() {
                if h.dir != NO_DIR && d == (h.dir + 2) % 4 {
                    continue;
                }
                let (ni, nj) = (v.i as i64 + dx, v.j as i64 + dy);
                if ni < 0 || nj < 0 || ni >= self.vw as i64 || nj >= self.vh as i64 {
                    continue;
                }
                let nv = Vertex::new(ni as usize, nj as usize);
                if vertex_in_outside(self.grid, nv) && !goals.contains(&nv) {
                    continue;
                }
                let straight = d == h.dir;
                let raw_run = if straight { h.run + 1 } else { 1 };
                if raw_run > self.cap {
                    continue;
                }
                let run = raw_run;
                let e = lattice_edge(v, nv);
                let score = score_lattice_edge(self.grid, e, self.weights);
                let mut step = BASE_EDGE_COST - score;
                if !step.is_finite() {
                    continue;
                }
                let wet = is_water_crossing(self.grid, e);
                let nb = bridges + (wet && !h.wet) as usize;
                if nb > self.budget {
                    continue;
                }
                if raw_run > self.max_straight {
                    step += run_penalty;
                }
                if !straight && h.dir != NO_DIR && h.run < TURN_SPACING {
                    step += turn_penalty;
                }
                let ns = self.state_index(self.vertex_index(nv), Heading { dir: d, run, wet }, nb);
                let nc = cost + step;
                if nc < dist[ns] {
                    dist[ns] = nc;
                    prev[ns] = state;
                    heap.push(Frontier { cost: nc, state: ns });
                }
            }
        }
        None
    }
}

fn nearest_chain(start: Point, keypoints: &[(Cell, Point)]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..keypoints.len()).collect();
    let mut order = Vec::with_capacity(keypoints.len());
    let mut here = start;
    while !remaining.is_empty() {
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                here.dist(keypoints[a].1).total_cmp(&here.dist(keypoints[b].1)).then(a.cmp(&b))
            })
            .expect("non-empty");
        let k = remaining.remove(pos);
        here = keypoints[k].1;
        order.push(k);
    }
    order
}

/// Fraction of non-Outside cells whose center lies within
/// `COVERAGE_RADIUS_CELLS + 0.5` cells (Chebyshev) of a network vertex.
pub fn coverage(grid: &TerrainGrid, vertices: &BTreeSet<Vertex>) -> f64 {
    let covered = covered_mask(grid, vertices);
    let mut total = 0usize;
    let mut hit = 0usize;
    for (idx, class) in grid.cells().iter().enumerate() {
        if *class != TerrainClass::Outside {
            total += 1;
            hit += covered[idx] as usize;
        }
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

fn covered_mask(grid: &TerrainGrid, vertices: &BTreeSet<Vertex>) -> Vec<bool> {
    let r = COVERAGE_RADIUS_CELLS as i64;
    let mut mask = vec![false; grid.len()];
    for v in vertices {
        // Cell x is within reach of vertex i when x in [i - r - 1, i + r].
        for y in (v.j as i64 - r - 1)..=(v.j as i64 + r) {
            for x in (v.i as i64 - r - 1)..=(v.i as i64 + r) {
                if grid.in_bounds(x, y) {
                    mask[y as usize * grid.width() + x as usize] = true;
                }
            }
        }
    }
    mask
}

/// Picks the uncovered buildable component farthest from the network and
/// returns its cell closest to the component centroid.
fn remote_keypoint(grid: &TerrainGrid, vertices: &BTreeSet<Vertex>) -> Option<Cell> {
    let covered = covered_mask(grid, vertices);
    let cells = grid.cells();
    let comps = label_components(
        grid.width(),
        grid.height(),
        |i| cells[i].is_buildable() && !covered[i],
        |_, _| true,
    );
    let cs = grid.cell_size();
    let net: Vec<Point> = vertices.iter().map(|v| v.to_point(cs)).collect();
    let mut best: Option<(f64, Cell)> = None;
    for comp in &comps.members {
        let n = comp.len() as f64;
        let centroid = comp.iter().fold(Point::default(), |acc, &i| acc.add(grid.cell_center(grid.cell_at(i))));
        let centroid = centroid.scale(1.0 / n);
        let rep = comp
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = grid.cell_center(grid.cell_at(a)).dist(centroid);
                let db = grid.cell_center(grid.cell_at(b)).dist(centroid);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("non-empty component");
        let rep_cell = grid.cell_at(rep);
        let p = grid.cell_center(rep_cell);
        let d = net.iter().map(|q| q.dist(p)).fold(f64::INFINITY, f64::min);
        if best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, rep_cell));
        }
    }
    best.map(|(_, c)| c)
}

/// Routes a connected road network through sampled entrances and keypoints,
/// then smooths it.
pub fn route(
    grid: &TerrainGrid,
    params: &RoadParams,
    weights: &EdgeScoreWeights,
    rng: &mut impl Rng,
) -> Result<RoadNetwork, RoadError> {
    params.validate(grid.cell_size())?;
    let entrances = sample_entrances(grid, params.num_entrances, rng)?;
    let mut keypoints = sample_keypoints(grid, params.num_keypoints, rng);
    route_through(grid, params, weights, entrances, &mut keypoints)
}

/// Least-cost lattice path for a single leg from a standing start, or `None`
/// when no finite-cost path exists.
pub fn route_leg(
    grid: &TerrainGrid,
    params: &RoadParams,
    weights: &EdgeScoreWeights,
    from: Vertex,
    to: Vertex,
) -> Option<Vec<Vertex>> {
    let search = LegSearch::new(grid, params, weights);
    let start = Heading { dir: NO_DIR, run: 0, wet: false };
    search.search(from, start, 0, &BTreeSet::from([to])).map(|l| l.path)
}

/// Deterministic part of [`route`] once entrances and keypoints are fixed.
pub fn route_through(
    grid: &TerrainGrid,
    params: &RoadParams,
    weights: &EdgeScoreWeights,
    entrances: Vec<Vertex>,
    keypoints: &mut Vec<Cell>,
) -> Result<RoadNetwork, RoadError> {
    let max_straight = params.max_straight();
    let search = LegSearch::new(grid, params, weights);
    let cs = grid.cell_size();
    let mut round = 0;
    loop {
        let segments = connect(&search, grid, &entrances, keypoints)?;
        let mut network = RoadNetwork {
            entrances: entrances.clone(),
            keypoints: keypoints.clone(),
            segments,
            splines: Vec::new(),
            width: params.main_road_width,
            max_straight,
            cell_size: cs,
        };
        let verts = network.vertices();
        let cov = coverage(grid, &verts);
        if cov >= COVERAGE_THRESHOLD {
            smooth(&mut network);
            return Ok(network);
        }
        if round == MAX_COVERAGE_ROUNDS {
            return Err(RoadError::Unroutable(format!(
                "coverage {:.1}% below {:.0}% after {MAX_COVERAGE_ROUNDS} extra keypoints",
                cov * 100.0,
                COVERAGE_THRESHOLD * 100.0
            )));
        }
        match remote_keypoint(grid, &verts) {
            Some(c) => keypoints.push(c),
            None => {
                return Err(RoadError::Unroutable(format!(
                    "coverage {:.1}% and no uncovered buildable cell to visit",
                    cov * 100.0
                )))
            }
        }
        round += 1;
    }
}

fn connect(
    search: &LegSearch<'_>,
    grid: &TerrainGrid,
    entrances: &[Vertex],
    keypoints: &[Cell],
) -> Result<Vec<Vec<Vertex>>, RoadError> {
    let cs = grid.cell_size();
    let kp: Vec<(Cell, Point)> = keypoints.iter().map(|&c| (c, grid.cell_center(c))).collect();
    let first = entrances[0];
    let order = nearest_chain(first.to_point(cs), &kp);

    let mut segments: Vec<Vec<Vertex>> = Vec::new();
    let mut here = first;
    let mut heading = Heading { dir: NO_DIR, run: 0, wet: false };
    let mut bridges = 0usize;

    let mut targets: Vec<(BTreeSet<Vertex>, String)> = order
        .iter()
        .map(|&k| {
            let goals: BTreeSet<Vertex> = cell_corners(kp[k].0).into_iter().collect();
            (goals, format!("keypoint ({}, {})", kp[k].0.x, kp[k].0.y))
        })
        .collect();
    if let Some(&last) = entrances.get(1) {
        targets.push((BTreeSet::from([last]), format!("entrance ({}, {})", last.i, last.j)));
    }

    for (goals, label) in targets {
        let leg = search
            .search(here, heading, bridges, &goals)
            .ok_or_else(|| RoadError::Unroutable(format!("no path to {label}")))?;
        bridges += leg.bridges;
        here = *leg.path.last().expect("non-empty path");
        heading = leg.end;
        if leg.path.len() > 1 {
            segments.push(leg.path);
        }
    }

    for &extra in entrances.iter().skip(2) {
        let network: BTreeSet<Vertex> = segments.iter().flatten().copied().chain([first]).collect();
        let leg = search
            .search(extra, Heading { dir: NO_DIR, run: 0, wet: false }, bridges, &network)
            .ok_or_else(|| RoadError::Unroutable(format!("entrance ({}, {}) cannot join", extra.i, extra.j)))?;
        bridges += leg.bridges;
        if leg.path.len() > 1 {
            segments.push(leg.path);
        }
    }
    Ok(segments)
}

/// Populates `splines`: each segment is reduced to its endpoints, junctions
/// and turning vertices, then interpolated with a centripetal Catmull–Rom
/// spline.
pub fn smooth(network: &mut RoadNetwork) {
    let cs = network.cell_size;
    let mut degree: BTreeMap<Vertex, usize> = BTreeMap::new();
    for (a, b) in network.edges() {
        *degree.entry(a).or_default() += 1;
        *degree.entry(b).or_default() += 1;
    }
    let endpoints: BTreeSet<Vertex> = network
        .segments
        .iter()
        .filter_map(|s| Some([*s.first()?, *s.last()?]))
        .flatten()
        .collect();
    let is_junction = |v: &Vertex| degree.get(v).copied().unwrap_or(0) >= 3 || endpoints.contains(v);

    network.splines = network
        .segments
        .iter()
        .map(|seg| {
            let ctrl = control_vertices(seg, is_junction);
            let pts: Vec<Point> = ctrl.iter().map(|v| v.to_point(cs)).collect();
            match catmull_rom_spline(&pts, SPLINE_SAMPLES) {
                Ok(s) => s,
                Err(_) => pts,
            }
        })
        .collect();
}

pub fn control_vertices(seg: &[Vertex], is_junction: impl Fn(&Vertex) -> bool) -> Vec<Vertex> {
    let n = seg.len();
    let mut out = Vec::new();
    for k in 0..n {
        let keep = k == 0 || k == n - 1 || is_junction(&seg[k]) || {
            let d0 = (seg[k].i as i64 - seg[k - 1].i as i64, seg[k].j as i64 - seg[k - 1].j as i64);
            let d1 = (seg[k + 1].i as i64 - seg[k].i as i64, seg[k + 1].j as i64 - seg[k].j as i64);
            d0 != d1
        };
        if keep {
            out.push(seg[k]);
        }
    }
    out
}
