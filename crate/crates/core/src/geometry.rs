//! Shared domain types and planar geometry primitives.
//!
//! World frame: origin at grid corner (0, 0), `x` points east along the grid
//! width, `y` points north along the grid height. Cell `(i, j)` has its center
//! at `((i + 0.5) * cell_size, (j + 0.5) * cell_size)`. All lengths are meters.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("too few points for spline: got {0}, need at least 2")]
    TooFewPoints(usize),
    #[error("invalid terrain code {0}, expected 0..=3")]
    InvalidTerrainCode(u8),
    #[error("invalid rotation {0}, expected one of 0, 90, 180, 270")]
    InvalidRotation(i64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Terrain cell label. Codes are fixed: Outside=0, Waterbody=1, Land=2, Ground=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum TerrainClass {
    Outside = 0,
    Waterbody = 1,
    Land = 2,
    Ground = 3,
}

impl TerrainClass {
    pub const ALL: [TerrainClass; 4] = [
        TerrainClass::Outside,
        TerrainClass::Waterbody,
        TerrainClass::Land,
        TerrainClass::Ground,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            TerrainClass::Outside => "Outside",
            TerrainClass::Waterbody => "Waterbody",
            TerrainClass::Land => "Land",
            TerrainClass::Ground => "Ground",
        }
    }

    pub fn is_buildable(self) -> bool {
        matches!(self, TerrainClass::Land | TerrainClass::Ground)
    }
}

impl TryFrom<u8> for TerrainClass {
    type Error = GeometryError;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        match code {
            0 => Ok(TerrainClass::Outside),
            1 => Ok(TerrainClass::Waterbody),
            2 => Ok(TerrainClass::Land),
            3 => Ok(TerrainClass::Ground),
            other => Err(GeometryError::InvalidTerrainCode(other)),
        }
    }
}

impl From<TerrainClass> for u8 {
    fn from(c: TerrainClass) -> u8 {
        c.code()
    }
}

impl fmt::Display for TerrainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Integer cell coordinate: `x` is the column (east), `y` the row (north).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Row-major lattice of terrain classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct TerrainGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    cells: Vec<TerrainClass>,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    cells: Vec<TerrainClass>,
}

impl TryFrom<RawGrid> for TerrainGrid {
    type Error = GeometryError;

    fn try_from(raw: RawGrid) -> Result<Self, Self::Error> {
        TerrainGrid::from_cells(raw.width, raw.height, raw.cell_size, raw.cells)
    }
}

impl From<TerrainGrid> for RawGrid {
    fn from(g: TerrainGrid) -> Self {
        RawGrid { width: g.width, height: g.height, cell_size: g.cell_size, cells: g.cells }
    }
}

impl TerrainGrid {
    pub const DEFAULT_WIDTH: usize = 20;
    pub const DEFAULT_HEIGHT: usize = 15;
    pub const DEFAULT_CELL_SIZE: f64 = 10.0;

    pub fn filled(
        width: usize,
        height: usize,
        cell_size: f64,
        class: TerrainClass,
    ) -> Result<Self, GeometryError> {
        Self::from_cells(width, height, cell_size, vec![class; width * height])
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        cell_size: f64,
        cells: Vec<TerrainClass>,
    ) -> Result<Self, GeometryError> {
        if width < 4 || height < 4 {
            return Err(GeometryError::InvalidGrid(format!(
                "grid must be at least 4x4, got {width}x{height}"
            )));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(GeometryError::InvalidGrid(format!("cell size {cell_size} must be positive")));
        }
        if cells.len() != width * height {
            return Err(GeometryError::InvalidGrid(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(Self { width, height, cell_size, cells })
    }

    /// Parses rows of integer codes, first row is `y = 0`.
    pub fn from_codes(rows: &[&[u8]], cell_size: f64) -> Result<Self, GeometryError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut cells = Vec::with_capacity(width * height);
        for row in rows {
            if row.len() != width {
                return Err(GeometryError::InvalidGrid("ragged rows".into()));
            }
            for &code in row.iter() {
                cells.push(TerrainClass::try_from(code)?);
            }
        }
        Self::from_cells(width, height, cell_size, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cells(&self) -> &[TerrainClass] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [TerrainClass] {
        &mut self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.cell_size, self.height as f64 * self.cell_size)
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    #[inline]
    pub fn cell_at(&self, idx: usize) -> Cell {
        Cell::new(idx % self.width, idx / self.width)
    }

    #[inline]
    pub fn get(&self, c: Cell) -> TerrainClass {
        self.cells[self.index(c)]
    }

    /// Class at signed coordinates; anything off the grid reads as Outside.
    pub fn get_signed(&self, x: i64, y: i64) -> TerrainClass {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            TerrainClass::Outside
        } else {
            self.cells[y as usize * self.width + x as usize]
        }
    }

    pub fn set(&mut self, c: Cell, class: TerrainClass) {
        let i = self.index(c);
        self.cells[i] = class;
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    pub fn neighbors4(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        const D: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        D.iter().filter_map(move |&(dx, dy)| {
            let nx = c.x as i64 + dx;
            let ny = c.y as i64 + dy;
            self.in_bounds(nx, ny).then(|| Cell::new(nx as usize, ny as usize))
        })
    }

    pub fn cell_center(&self, c: Cell) -> Point {
        Point::new((c.x as f64 + 0.5) * self.cell_size, (c.y as f64 + 0.5) * self.cell_size)
    }

    pub fn count(&self, class: TerrainClass) -> usize {
        self.cells.iter().filter(|&&c| c == class).count()
    }

    /// Raw byte codes, row-major.
    pub fn codes(&self) -> Vec<u8> {
        self.cells.iter().map(|c| c.code()).collect()
    }
}

/// Two 4-adjacent cells. The road lattice edge it names is the cell side they share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridEdge {
    pub a: Cell,
    pub b: Cell,
}

impl GridEdge {
    pub fn new(a: Cell, b: Cell) -> Result<Self, GeometryError> {
        let d = a.x.abs_diff(b.x) + a.y.abs_diff(b.y);
        if d != 1 {
            return Err(GeometryError::InvalidGrid(format!("cells {a:?} and {b:?} are not 4-adjacent")));
        }
        Ok(Self { a, b })
    }
}

/// Snapped heading in degrees. 0 faces +y (north), 90 faces +x (east),
/// 180 faces -y, 270 faces -x (clockwise seen from above).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> i64 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    pub fn facing(self) -> Point {
        match self {
            Rotation::R0 => Point::new(0.0, 1.0),
            Rotation::R90 => Point::new(1.0, 0.0),
            Rotation::R180 => Point::new(0.0, -1.0),
            Rotation::R270 => Point::new(-1.0, 0.0),
        }
    }

    pub fn swaps_extents(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }

    pub fn next(self) -> Rotation {
        match self {
            Rotation::R0 => Rotation::R90,
            Rotation::R90 => Rotation::R180,
            Rotation::R180 => Rotation::R270,
            Rotation::R270 => Rotation::R0,
        }
    }
}

impl TryFrom<i64> for Rotation {
    type Error = GeometryError;

    fn try_from(deg: i64) -> Result<Self, Self::Error> {
        match deg {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            other => Err(GeometryError::InvalidRotation(other)),
        }
    }
}

impl From<Rotation> for i64 {
    fn from(r: Rotation) -> i64 {
        r.degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Ground elevation under the object; derived, not optimized.
    pub z: f64,
    pub rotation: Rotation,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, rotation: Rotation) -> Self {
        Self { x, y, z: 0.0, rotation }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Rectangle footprint. `l` runs along the object's local x axis and `w`
/// along its local y; a 90 or 270 degree rotation swaps the world extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obb2D {
    pub center: Point,
    pub l: f64,
    pub w: f64,
    pub rotation: Rotation,
}

impl Obb2D {
    pub fn new(center: Point, l: f64, w: f64, rotation: Rotation) -> Self {
        Self { center, l, w, rotation }
    }

    /// World-axis half extents `(hx, hy)`.
    pub fn half_extents(&self) -> (f64, f64) {
        if self.rotation.swaps_extents() {
            (self.w / 2.0, self.l / 2.0)
        } else {
            (self.l / 2.0, self.w / 2.0)
        }
    }

    pub fn min(&self) -> Point {
        let (hx, hy) = self.half_extents();
        Point::new(self.center.x - hx, self.center.y - hy)
    }

    pub fn max(&self) -> Point {
        let (hx, hy) = self.half_extents();
        Point::new(self.center.x + hx, self.center.y + hy)
    }

    pub fn area(&self) -> f64 {
        self.l * self.w
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.l > 0.0 && self.w > 0.0)
    }

    pub fn corners(&self) -> [Point; 4] {
        let lo = self.min();
        let hi = self.max();
        [lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)]
    }

    /// Interior overlap; rectangles that only touch along an edge or corner do not overlap.
    pub fn overlaps(&self, other: &Obb2D) -> bool {
        let (a0, a1) = (self.min(), self.max());
        let (b0, b1) = (other.min(), other.max());
        a1.x.min(b1.x) - a0.x.max(b0.x) > EPS && a1.y.min(b1.y) - a0.y.max(b0.y) > EPS
    }

    /// Half-width of the rectangle's projection onto unit direction `u`.
    pub fn projected_half_extent(&self, u: Point) -> f64 {
        let (hx, hy) = self.half_extents();
        hx * u.x.abs() + hy * u.y.abs()
    }
}

/// Closed region bounded by one or more rings (outer boundary plus holes).
/// Inside-ness uses the even-odd rule over all rings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polygon {
    pub rings: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { rings: vec![vertices] }
    }

    pub fn with_rings(rings: Vec<Vec<Point>>) -> Self {
        Self { rings }
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`, counter-clockwise.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings.iter().flat_map(|ring| {
            let n = ring.len();
            (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
        })
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.rings.is_empty() {
            return Err(GeometryError::DegeneratePolygon("no rings".into()));
        }
        for ring in &self.rings {
            if ring.len() < 3 {
                return Err(GeometryError::DegeneratePolygon(format!(
                    "ring has {} vertices, need at least 3",
                    ring.len()
                )));
            }
            if ring_signed_area(ring).abs() <= EPS {
                return Err(GeometryError::DegeneratePolygon("zero-area ring".into()));
            }
        }
        Ok(())
    }

    /// Signed area summed over rings (holes wound clockwise subtract).
    pub fn area(&self) -> f64 {
        self.rings.iter().map(|r| ring_signed_area(r)).sum::<f64>().abs()
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.rings.iter().flatten() {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Even-odd point containment. Points on the boundary are unspecified;
    /// callers that care should check `point_to_boundary_distance` first.
    pub fn contains_point(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// True when the rectangle lies inside the closed region: its center is
    /// inside and no boundary edge passes through the rectangle's open interior.
    pub fn contains_rect(&self, rect: &Obb2D) -> bool {
        if rect.is_degenerate() {
            return false;
        }
        let lo = rect.min();
        let hi = rect.max();
        if self.edges().any(|(a, b)| segment_crosses_open_rect(a, b, lo, hi)) {
            return false;
        }
        self.contains_point(rect.center)
    }
}

fn ring_signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    s / 2.0
}

/// Segment–open-rectangle intersection via Liang–Barsky clipping against the
/// closed box, then testing whether the clipped chord's midpoint is interior.
fn segment_crosses_open_rect(a: Point, b: Point, lo: Point, hi: Point) -> bool {
    let d = b.sub(a);
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for (p, q) in [
        (-d.x, a.x - lo.x),
        (d.x, hi.x - a.x),
        (-d.y, a.y - lo.y),
        (d.y, hi.y - a.y),
    ] {
        if p.abs() < 1e-15 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 > t1 {
        return false;
    }
    let tm = (t0 + t1) / 2.0;
    let m = a.add(d.scale(tm));
    m.x > lo.x + EPS && m.x < hi.x - EPS && m.y > lo.y + EPS && m.y < hi.y - EPS
}

pub fn point_to_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

/// Minimum distance from `p` to any boundary edge of `poly`.
pub fn point_to_boundary_distance(p: Point, poly: &Polygon) -> Result<f64, GeometryError> {
    poly.validate()?;
    Ok(poly
        .edges()
        .map(|(a, b)| point_to_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min))
}

/// Minimum distance from `p` to an open polyline.
pub fn point_to_polyline_distance(p: Point, line: &[Point]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => p.dist(*only),
        _ => line
            .windows(2)
            .map(|w| point_to_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Forward ray hit test against a footprint rectangle (closed). A ray starting
/// inside the rectangle hits it.
pub fn ray_intersects_box(origin: Point, dir: Point, rect: &Obb2D) -> bool {
    if rect.is_degenerate() || (dir.x == 0.0 && dir.y == 0.0) {
        return false;
    }
    let lo = rect.min();
    let hi = rect.max();
    let mut t_near = 0.0_f64;
    let mut t_far = f64::INFINITY;
    for (o, d, l, h) in [(origin.x, dir.x, lo.x, hi.x), (origin.y, dir.y, lo.y, hi.y)] {
        if d.abs() < 1e-15 {
            if o < l || o > h {
                return false;
            }
        } else {
            let mut ta = (l - o) / d;
            let mut tb = (h - o) / d;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t_near = t_near.max(ta);
            t_far = t_far.min(tb);
            if t_near > t_far {
                return false;
            }
        }
    }
    true
}

/// Centripetal Catmull–Rom interpolation through `control_points`.
///
/// Boundary segments duplicate the end point, which reduces the end tangent to
/// the adjacent chord. Output has `(n - 1) * samples_per_segment + 1` points.
pub fn catmull_rom_spline(
    control_points: &[Point],
    samples_per_segment: usize,
) -> Result<Vec<Point>, GeometryError> {
    let n = control_points.len();
    if n < 2 {
        return Err(GeometryError::TooFewPoints(n));
    }
    let s = samples_per_segment.max(1);
    let knot = |a: Point, b: Point| a.dist(b).sqrt();
    let p = control_points;

    // Tangent at p[i], expressed per unit knot parameter.
    let tangent = |i: usize| -> Point {
        if i == 0 || i == n - 1 {
            let (a, b) = if i == 0 { (p[0], p[1]) } else { (p[n - 2], p[n - 1]) };
            let dt = knot(a, b);
            return if dt > 0.0 { b.sub(a).scale(1.0 / dt) } else { Point::default() };
        }
        let (p0, p1, p2) = (p[i - 1], p[i], p[i + 1]);
        let d0 = knot(p0, p1);
        let d1 = knot(p1, p2);
        if d0 == 0.0 || d1 == 0.0 {
            let dt = d0 + d1;
            return if dt > 0.0 { p2.sub(p0).scale(1.0 / dt) } else { Point::default() };
        }
        p1.sub(p0)
            .scale(1.0 / d0)
            .sub(p2.sub(p0).scale(1.0 / (d0 + d1)))
            .add(p2.sub(p1).scale(1.0 / d1))
    };

    let mut out = Vec::with_capacity((n - 1) * s + 1);
    for i in 0..n - 1 {
        let (a, b) = (p[i], p[i + 1]);
        let dt = knot(a, b);
        let m0 = tangent(i).scale(dt);
        let m1 = tangent(i + 1).scale(dt);
        for k in 0..s {
            if k == 0 {
                out.push(a);
                continue;
            }
            let u = k as f64 / s as f64;
            let u2 = u * u;
            let u3 = u2 * u;
            let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
            let h10 = u3 - 2.0 * u2 + u;
            let h01 = -2.0 * u3 + 3.0 * u2;
            let h11 = u3 - u2;
            out.push(a.scale(h00).add(m0.scale(h10)).add(b.scale(h01)).add(m1.scale(h11)));
        }
    }
    out.push(p[n - 1]);
    Ok(out)
}
