//! Constraint losses and the anchored depth-first placement solver.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::SelectedObject;
use crate::area::Area;
use crate::assets::AssetRecord;
use crate::constraints::{AreaConstraints, Constraint, ConstraintKind, ConstraintType};
use crate::geometry::{point_to_polyline_distance, point_to_segment_distance, ray_intersects_box, Obb2D, Point, Polygon, Pose2D, Rotation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("object {0:?} has constraints but no placement")]
    UnplacedObject(String),
    #[error("no valid placement in {area}; deepest partial assignment placed {placed:?}")]
    NoValidPlacement { area: String, placed: Vec<String> },
    #[error("constraint on {object:?} refers to unknown object {rel:?}")]
    UnknownObject { object: String, rel: String },
    #[error("invalid layout parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentMode {
    /// Aligned when either axis matches.
    #[default]
    MinAxis,
    /// Both axis hinges added together.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossParams {
    pub d_e: f64,
    /// Middle threshold; `None` means a quarter of the area's smaller extent.
    pub d_m: Option<f64>,
    pub r_l: f64,
    pub r_h: f64,
    pub f_back: f64,
    pub d_n: f64,
    pub d_f: f64,
    pub eps: f64,
    pub f_rot: f64,
    pub back_cone_half_angle: f64,
    pub back_band: [f64; 2],
    pub alignment: AlignmentMode,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            d_e: 3.0,
            d_m: None,
            r_l: 2.0,
            r_h: 8.0,
            f_back: 1.0,
            d_n: 5.0,
            d_f: 15.0,
            eps: 0.5,
            f_rot: 1.0,
            back_cone_half_angle: 45.0,
            back_band: [1.0, 6.0],
            alignment: AlignmentMode::MinAxis,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let positive = [self.d_e, self.r_l, self.r_h, self.d_n, self.d_f, self.eps, self.back_cone_half_angle];
        if positive.iter().any(|v| !(*v > 0.0)) || self.d_m.is_some_and(|d| !(d > 0.0)) {
            return Err(LayoutError::InvalidParams("thresholds must be positive".into()));
        }
        if self.r_l >= self.r_h {
            return Err(LayoutError::InvalidParams("r_l must be below r_h".into()));
        }
        if self.d_n >= self.d_f {
            return Err(LayoutError::InvalidParams("d_n must be below d_f".into()));
        }
        if !(self.back_band[0] >= 0.0 && self.back_band[0] <= self.back_band[1]) {
            return Err(LayoutError::InvalidParams("back_band must be an ordered interval".into()));
        }
        Ok(())
    }

    pub fn middle_threshold(&self, polygon: &Polygon) -> f64 {
        self.d_m.unwrap_or_else(|| {
            let (lo, hi) = polygon.bbox();
            0.25 * (hi.x - lo.x).min(hi.y - lo.y)
        })
    }
}

/// Balancing weights for the global, position, distance, alignment and
/// rotation families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub global: f64,
    pub position: f64,
    pub distance: f64,
    pub alignment: f64,
    pub rotation: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { global: 2.0, position: 0.5, distance: 1.8, alignment: 0.5, rotation: 0.5 }
    }
}

impl LossWeights {
    pub fn get(&self, t: ConstraintType) -> f64 {
        match t {
            ConstraintType::Global => self.global,
            ConstraintType::Position => self.position,
            ConstraintType::Distance => self.distance,
            ConstraintType::Alignment => self.alignment,
            ConstraintType::Rotation => self.rotation,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            global: self.global * c,
            position: self.position * c,
            distance: self.distance * c,
            alignment: self.alignment * c,
            rotation: self.rotation * c,
        }
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        if [self.global, self.position, self.distance, self.alignment, self.rotation].iter().any(|w| !(*w >= 0.0)) {
            return Err(LayoutError::InvalidParams("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grid_step: f64,
    /// Number of anchor candidates explored.
    pub iterations: usize,
    pub max_depth_backtracks: usize,
    /// Kept for configuration compatibility; the search is deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { grid_step: 2.0, iterations: 100, max_depth_backtracks: 50, seed: 0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), LayoutError> {
        if !(self.grid_step > 0.0) || self.iterations == 0 {
            return Err(LayoutError::InvalidParams("grid_step must be positive and iterations at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub instance: String,
    pub area: String,
    pub asset: AssetRecord,
    pub pose: Pose2D,
}

impl PlacedObject {
    pub fn footprint(&self) -> Obb2D {
        footprint_of(&self.asset, &self.pose)
    }

    /// Scene-unique name `area/instance`.
    pub fn qualified_name(&self) -> String {
        format!("{}/{}", self.area, self.instance)
    }
}

pub fn footprint_of(asset: &AssetRecord, pose: &Pose2D) -> Obb2D {
    Obb2D::new(pose.position(), asset.size[0], asset.size[1], pose.rotation)
}

fn hinge(x: f64) -> f64 {
    x.max(0.0)
}

fn boundary_distance(p: Point, poly: &Polygon) -> f64 {
    poly.edges().map(|(a, b)| point_to_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
}

/// Gap between two footprints along the line joining their centers.
pub fn center_gap(a: &Obb2D, b: &Obb2D) -> f64 {
    let d = b.center.sub(a.center);
    let n = d.norm();
    if n == 0.0 {
        return 0.0;
    }
    let u = d.scale(1.0 / n);
    hinge(n - a.projected_half_extent(u) - b.projected_half_extent(u))
}

/// Edge or middle placement of one object within its area.
pub fn loss_global(obj: &Obb2D, area_polygon: &Polygon, area_center: Point, kind: ConstraintKind, p: &LossParams) -> f64 {
    match kind {
        ConstraintKind::Edge => hinge((boundary_distance(obj.center, area_polygon) - p.d_e) / p.d_e),
        ConstraintKind::Middle => {
            let d_m = p.middle_threshold(area_polygon);
            hinge((obj.center.dist(area_center) - d_m) / d_m)
        }
        _ => 0.0,
    }
}

/// `around` keeps the gap within `[r_l, r_h]`; `backed_up` wants `a` in the
/// rear cone of `b` at a gap inside the back band.
pub fn loss_position(a: &Obb2D, b: &Obb2D, kind: ConstraintKind, p: &LossParams) -> f64 {
    let gap = center_gap(a, b);
    match kind {
        ConstraintKind::Around => hinge(p.r_l - gap) + hinge(gap - p.r_h),
        ConstraintKind::BackedUp => {
            let rear = b.rotation.facing().scale(-1.0);
            let v = a.center.sub(b.center);
            let n = v.norm();
            let in_cone = n > 0.0 && v.dot(rear) / n >= p.back_cone_half_angle.to_radians().cos() - 1e-12;
            let in_band = gap >= p.back_band[0] && gap <= p.back_band[1];
            if in_cone && in_band {
                0.0
            } else {
                p.f_back
            }
        }
        _ => 0.0,
    }
}

pub fn loss_distance(a: &Obb2D, b: &Obb2D, kind: ConstraintKind, p: &LossParams) -> f64 {
    let d = a.center.dist(b.center);
    match kind {
        ConstraintKind::Near => hinge((d - p.d_n) / p.d_n),
        ConstraintKind::Far => hinge((p.d_f - d) / p.d_f),
        _ => 0.0,
    }
}

pub fn loss_alignment(a: &Obb2D, b: &Obb2D, p: &LossParams) -> f64 {
    let hx = hinge(((a.center.x - b.center.x).abs() - p.eps) / p.eps);
    let hy = hinge(((a.center.y - b.center.y).abs() - p.eps) / p.eps);
    match p.alignment {
        AlignmentMode::MinAxis => hx.min(hy),
        AlignmentMode::Sum => hx + hy,
    }
}

/// Zero when `a`'s forward ray hits `b`'s footprint.
pub fn loss_rotation(a: &Obb2D, b: &Obb2D, p: &LossParams) -> f64 {
    if ray_intersects_box(a.center, a.rotation.facing(), b) {
        0.0
    } else {
        p.f_rot
    }
}

/// Unweighted loss of one relational constraint.
pub fn relation_loss(kind: ConstraintKind, a: &Obb2D, b: &Obb2D, p: &LossParams) -> f64 {
    match kind.constraint_type() {
        ConstraintType::Global => 0.0,
        ConstraintType::Position => loss_position(a, b, kind, p),
        ConstraintType::Distance => loss_distance(a, b, kind, p),
        ConstraintType::Alignment => loss_alignment(a, b, p),
        ConstraintType::Rotation => loss_rotation(a, b, p),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    /// Unweighted sums per constraint family.
    pub by_type: BTreeMap<String, f64>,
}

impl LossReport {
    fn add(&mut self, t: ConstraintType, raw: f64, w: &LossWeights) {
        *self.by_type.entry(t.as_str().to_string()).or_default() += raw;
        self.total += w.get(t) * raw;
    }

    pub fn merge(&mut self, other: &LossReport) {
        self.total += other.total;
        for (k, v) in &other.by_type {
            *self.by_type.entry(k.clone()).or_default() += v;
        }
    }
}

/// Loss of a single constraint instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintLoss {
    pub object: String,
    pub constraint: Constraint,
    pub raw: f64,
    pub weighted: f64,
}

/// Per-instance losses in constraint order.
pub fn constraint_losses(
    placements: &[PlacedObject],
    constraints: &AreaConstraints,
    area: &Area,
    w: &LossWeights,
    p: &LossParams,
) -> Result<Vec<ConstraintLoss>, LayoutError> {
    let fp: BTreeMap<&str, Obb2D> = placements.iter().map(|o| (o.instance.as_str(), o.footprint())).collect();
    let find = |name: &str| fp.get(name).copied().ok_or_else(|| LayoutError::UnplacedObject(name.to_string()));
    let mut out = Vec::new();
    for (obj, list) in constraints {
        let a = find(obj)?;
        for c in list {
            let raw = match &c.rel {
                None => loss_global(&a, &area.polygon, area.center, c.kind, p),
                Some(r) => relation_loss(c.kind, &a, &find(r)?, p),
            };
            out.push(ConstraintLoss {
                object: obj.clone(),
                constraint: c.clone(),
                raw,
                weighted: w.get(c.constraint_type()) * raw,
            });
        }
    }
    Ok(out)
}

/// Weighted objective over every constraint instance of one area.
pub fn total_loss(
    placements: &[PlacedObject],
    constraints: &AreaConstraints,
    area: &Area,
    w: &LossWeights,
    p: &LossParams,
) -> Result<LossReport, LayoutError> {
    let mut report = LossReport::default();
    for t in ConstraintType::ALL {
        report.by_type.insert(t.as_str().to_string(), 0.0);
    }
    for l in constraint_losses(placements, constraints, area, w, p)? {
        report.add(l.constraint.constraint_type(), l.raw, w);
    }
    Ok(report)
}

/// Grid points `min + k * step` over the polygon's bounding box, row by row
/// in `(x, y)` lexicographic order.
pub fn grid_points(polygon: &Polygon, step: f64) -> Vec<Point> {
    let (lo, hi) = polygon.bbox();
    let nx = ((hi.x - lo.x) / step + 1e-9).floor() as usize;
    let ny = ((hi.y - lo.y) / step + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            out.push(Point::new(lo.x + i as f64 * step, lo.y + j as f64 * step));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub placements: Vec<PlacedObject>,
    pub report: LossReport,
    pub anchors_tried: usize,
    pub nodes: usize,
}

struct Item {
    /// Feasible poses inside the area, in `(x, y, rotation)` order.
    poses: Vec<(Pose2D, Obb2D)>,
}

struct Rel {
    kind: ConstraintKind,
    owner: usize,
    other: usize,
}

struct Search<'a> {
    items: Vec<Item>,
    unary: Vec<Vec<ConstraintKind>>,
    rels: Vec<Rel>,
    polygon: &'a Polygon,
    center: Point,
    w: &'a LossWeights,
    p: &'a LossParams,
    order: Vec<usize>,
    placed: Vec<Option<usize>>,
    best: f64,
    best_assignment: Option<Vec<usize>>,
    tries: Vec<usize>,
    limit: usize,
    nodes: usize,
    deepest: Vec<usize>,
}

impl<'a> Search<'a> {
    fn unary_loss(&self, k: usize, fp: &Obb2D) -> f64 {
        self.unary[k]
            .iter()
            .map(|&kind| self.w.global * loss_global(fp, self.polygon, self.center, kind, self.p))
            .sum()
    }

    /// Loss added by putting item `k` at pose `idx` given the current placements.
    fn incremental(&self, k: usize, fp: &Obb2D) -> f64 {
        let mut total = self.unary_loss(k, fp);
        for r in &self.rels {
            let (a, b) = if r.owner == k {
                match self.placed[r.other] {
                    Some(j) => (*fp, self.items[r.other].poses[j].1),
                    None => continue,
                }
            } else if r.other == k {
                match self.placed[r.owner] {
                    Some(j) => (self.items[r.owner].poses[j].1, *fp),
                    None => continue,
                }
            } else {
                continue;
            };
            total += self.w.get(r.kind.constraint_type()) * relation_loss(r.kind, &a, &b, self.p);
        }
        total
    }

    fn collides(&self, fp: &Obb2D) -> bool {
        self.placed
            .iter()
            .enumerate()
            .any(|(k, p)| p.is_some_and(|j| self.items[k].poses[j].1.overlaps(fp)))
    }

    fn dfs(&mut self, depth: usize, partial: f64) {
        self.nodes += 1;
        if depth > self.deepest.len() {
            self.deepest = self.order[..depth].to_vec();
        }
        if depth == self.order.len() {
            if partial < self.best {
                self.best = partial;
                self.best_assignment = Some(self.placed.iter().map(|p| p.expect("complete")).collect());
            }
            return;
        }
        let k = self.order[depth];
        let mut children: Vec<(f64, usize)> = self.items[k]
            .poses
            .iter()
            .enumerate()
            .filter(|(_, (_, fp))| !self.collides(fp))
            .map(|(j, (_, fp))| (self.incremental(k, fp), j))
            .collect();
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (inc, j) in children {
            if partial + inc >= self.best || self.tries[depth] >= self.limit {
                break;
            }
            self.tries[depth] += 1;
            self.placed[k] = Some(j);
            self.dfs(depth + 1, partial + inc);
            self.placed[k] = None;
            if self.best <= 0.0 {
                return;
            }
        }
    }
}

fn rotation_matters(k: usize, unary_and_rels: &[Rel]) -> bool {
    unary_and_rels.iter().any(|r| {
        (r.owner == k && r.kind == ConstraintKind::FaceTo) || (r.other == k && r.kind == ConstraintKind::BackedUp)
    })
}

/// Optional tie-break preferences; they never change the optimal loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlacementHints {
    /// Among anchor candidates of equal own loss, those closer to any of
    /// these polylines are tried first.
    pub attractors: Vec<Vec<Point>>,
    /// When some anchor candidate lies within this distance of an
    /// attractor, candidates farther away are dropped.
    pub anchor_radius: Option<f64>,
}

/// Places every selected object inside the area, minimizing the weighted
/// loss subject to containment and non-overlap.
pub fn solve_area(
    area: &Area,
    selected: &[SelectedObject],
    constraints: &AreaConstraints,
    cfg: &SolverConfig,
    w: &LossWeights,
    p: &LossParams,
) -> Result<Solution, LayoutError> {
    solve_area_with(area, selected, constraints, cfg, w, p, &PlacementHints::default())
}

pub fn solve_area_with(
    area: &Area,
    selected: &[SelectedObject],
    constraints: &AreaConstraints,
    cfg: &SolverConfig,
    w: &LossWeights,
    p: &LossParams,
    hints: &PlacementHints,
) -> Result<Solution, LayoutError> {
    cfg.validate()?;
    w.validate()?;
    p.validate()?;
    if selected.is_empty() {
        return Ok(Solution { placements: Vec::new(), report: LossReport::default(), anchors_tried: 0, nodes: 0 });
    }
    let index: BTreeMap<&str, usize> = selected.iter().enumerate().map(|(k, o)| (o.instance.as_str(), k)).collect();
    let mut unary = vec![Vec::new(); selected.len()];
    let mut rels = Vec::new();
    for (obj, list) in constraints {
        let Some(&owner) = index.get(obj.as_str()) else {
            return Err(LayoutError::UnplacedObject(obj.clone()));
        };
        for c in list {
            match &c.rel {
                None => unary[owner].push(c.kind),
                Some(r) => {
                    let other = *index
                        .get(r.as_str())
                        .ok_or_else(|| LayoutError::UnknownObject { object: obj.clone(), rel: r.clone() })?;
                    rels.push(Rel { kind: c.kind, owner, other });
                }
            }
        }
    }

    let points = grid_points(&area.polygon, cfg.grid_step);
    let mut cache: BTreeMap<(u64, u64, i64), Vec<(Pose2D, Obb2D)>> = BTreeMap::new();
    let mut items = Vec::with_capacity(selected.len());
    for (k, obj) in selected.iter().enumerate() {
        let (l, wd) = (obj.asset.size[0], obj.asset.size[1]);
        let rotations: Vec<Rotation> = if rotation_matters(k, &rels) {
            Rotation::ALL.to_vec()
        } else if l == wd {
            vec![Rotation::R0]
        } else {
            vec![Rotation::R0, Rotation::R90]
        };
        let mut poses = Vec::new();
        for pt in &points {
            for &rot in &rotations {
                let pose = Pose2D::new(pt.x, pt.y, rot);
                let fp = footprint_of(&obj.asset, &pose);
                poses.push((pose, fp));
            }
        }
        let key = (l.to_bits(), wd.to_bits(), rotations.len() as i64);
        let feasible = cache
            .entry(key)
            .or_insert_with(|| poses.into_iter().filter(|(_, fp)| area.polygon.contains_rect(fp)).collect())
            .clone();
        items.push(Item { poses: feasible });
    }

    let anchor = (0..selected.len())
        .find(|&k| !unary[k].is_empty())
        .unwrap_or_else(|| {
            (0..selected.len())
                .max_by(|&a, &b| {
                    selected[a].asset.footprint().total_cmp(&selected[b].asset.footprint()).then(b.cmp(&a))
                })
                .expect("non-empty")
        });
    let mut rest: Vec<usize> = (0..selected.len()).filter(|&k| k != anchor).collect();
    rest.sort_by(|&a, &b| selected[b].asset.footprint().total_cmp(&selected[a].asset.footprint()).then(a.cmp(&b)));
    let order: Vec<usize> = std::iter::once(anchor).chain(rest).collect();

    let mut search = Search {
        items,
        unary,
        rels,
        polygon: &area.polygon,
        center: area.center,
        w,
        p,
        placed: vec![None; selected.len()],
        tries: vec![0; order.len()],
        order,
        best: f64::INFINITY,
        best_assignment: None,
        limit: cfg.max_depth_backtracks.max(1),
        nodes: 0,
        deepest: Vec::new(),
    };

    let attraction = |c: Point| {
        hints.attractors.iter().map(|line| point_to_polyline_distance(c, line)).fold(f64::INFINITY, f64::min)
    };
    let mut anchor_cands: Vec<(f64, f64, usize)> = search.items[anchor]
        .poses
        .iter()
        .enumerate()
        .map(|(j, (_, fp))| (search.unary_loss(anchor, fp), attraction(fp.center), j))
        .collect();
    if let Some(r) = hints.anchor_radius {
        if anchor_cands.iter().any(|c| c.1 <= r) {
            anchor_cands.retain(|c| c.1 <= r);
        }
    }
    anchor_cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    anchor_cands.truncate(cfg.iterations);

    let mut anchors_tried = 0;
    for (own, _, j) in anchor_cands {
        if own >= search.best {
            break;
        }
        anchors_tried += 1;
        search.tries.iter_mut().for_each(|t| *t = 0);
        search.placed[anchor] = Some(j);
        search.dfs(1, own);
        search.placed[anchor] = None;
        if search.best <= 0.0 {
            break;
        }
    }

    let Some(assignment) = search.best_assignment.clone() else {
        let placed = search.deepest.iter().map(|&k| selected[k].instance.clone()).collect();
        return Err(LayoutError::NoValidPlacement { area: area.id.clone(), placed });
    };
    let placements: Vec<PlacedObject> = selected
        .iter()
        .zip(&assignment)
        .enumerate()
        .map(|(k, (obj, &j))| PlacedObject {
            instance: obj.instance.clone(),
            area: area.id.clone(),
            asset: obj.asset.clone(),
            pose: search.items[k].poses[j].0,
        })
        .collect();
    let report = total_loss(&placements, constraints, area, w, p)?;
    Ok(Solution { placements, report, anchors_tried, nodes: search.nodes })
}
