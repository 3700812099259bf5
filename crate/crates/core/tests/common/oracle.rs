//! Exhaustive-enumeration oracle for the placement solver and a seeded
//! generator of small solver instances.

#![allow(dead_code)]

use garden_core::agents::SelectedObject;
use garden_core::area::Area;
use garden_core::assets::AssetLibrary;
use garden_core::constraints::{AreaConstraints, Constraint, ConstraintKind};
use garden_core::geometry::{Point, Polygon, Pose2D, Rotation, TerrainClass};
use garden_core::layout::{grid_points, total_loss, LossParams, LossWeights, PlacedObject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn area(polygon: Polygon) -> Area {
    let (lo, hi) = polygon.bbox();
    Area {
        id: "area-0".into(),
        cells: vec![],
        center: Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0),
        area_m2: polygon.area(),
        polygon,
        dominant_class: TerrainClass::Ground,
        water_adjacent: false,
        road_adjacent: false,
    }
}

pub fn object(name: &str, l: f64, w: f64) -> SelectedObject {
    let mut asset = AssetLibrary::bundled().get("camellia").unwrap().clone();
    asset.name = name.into();
    asset.size = [l, w, 1.0];
    asset.minp = [-l / 2.0, -w / 2.0, 0.0];
    asset.maxp = [l / 2.0, w / 2.0, 1.0];
    SelectedObject { instance: name.into(), asset }
}

pub fn placed(o: &SelectedObject, pose: Pose2D) -> PlacedObject {
    PlacedObject { instance: o.instance.clone(), area: "area-0".into(), asset: o.asset.clone(), pose }
}

/// Minimum loss over every hard-feasible assignment of (grid point, rotation)
/// pairs, or `None` when nothing fits.
pub fn oracle(a: &Area, sel: &[SelectedObject], cons: &AreaConstraints, step: f64, w: &LossWeights) -> Option<f64> {
    let pts = grid_points(&a.polygon, step);
    let options: Vec<Vec<PlacedObject>> = sel
        .iter()
        .map(|o| {
            pts.iter()
                .flat_map(|p| Rotation::ALL.map(|r| placed(o, Pose2D::new(p.x, p.y, r))))
                .filter(|po| a.polygon.contains_rect(&po.footprint()))
                .collect()
        })
        .collect();
    let mut best: Option<f64> = None;
    let mut current = Vec::new();
    enumerate(&options, 0, &mut current, &mut |assignment| {
        let l = total_loss(assignment, cons, a, w, &LossParams::default()).unwrap().total;
        if best.is_none_or(|b| l < b) {
            best = Some(l);
        }
    });
    best
}

pub fn enumerate(options: &[Vec<PlacedObject>], k: usize, current: &mut Vec<PlacedObject>, f: &mut impl FnMut(&[PlacedObject])) {
    if k == options.len() {
        f(current);
        return;
    }
    for o in &options[k] {
        let fp = o.footprint();
        if current.iter().any(|c| c.footprint().overlaps(&fp)) {
            continue;
        }
        current.push(o.clone());
        enumerate(options, k + 1, current, f);
        current.pop();
    }
}

pub fn random_instance(seed: u64) -> (Area, Vec<SelectedObject>, AreaConstraints) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sx = [6.0, 8.0, 10.0][rng.gen_range(0..3)];
    let sy = [6.0, 8.0, 10.0][rng.gen_range(0..3)];
    let polygon = if rng.gen_bool(0.3) {
        Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(sx, 0.0),
            Point::new(sx, sy / 2.0),
            Point::new(sx / 2.0, sy / 2.0),
            Point::new(sx / 2.0, sy),
            Point::new(0.0, sy),
        ])
    } else {
        Polygon::rect(0.0, 0.0, sx, sy)
    };
    let n = rng.gen_range(1..=3);
    let names: Vec<String> = (0..n).map(|k| format!("o{k}")).collect();
    let sel: Vec<SelectedObject> = names
        .iter()
        .map(|name| object(name, rng.gen_range(1..=3) as f64, rng.gen_range(1..=2) as f64))
        .collect();
    let mut cons = AreaConstraints::new();
    if rng.gen_bool(0.7) {
        let kind = if rng.gen_bool(0.5) { ConstraintKind::Edge } else { ConstraintKind::Middle };
        cons.entry(names[0].clone()).or_default().push(Constraint::global(kind));
    }
    let relational = [
        ConstraintKind::Around,
        ConstraintKind::BackedUp,
        ConstraintKind::Near,
        ConstraintKind::Far,
        ConstraintKind::Aligned,
        ConstraintKind::FaceTo,
    ];
    for i in 1..n {
        for _ in 0..rng.gen_range(1..=2) {
            let j = rng.gen_range(0..i);
            let kind = relational[rng.gen_range(0..relational.len())];
            let (owner, other) = if rng.gen_bool(0.5) { (i, j) } else { (j, i) };
            cons.entry(names[owner].clone()).or_default().push(Constraint::with(kind, names[other].clone()));
        }
    }
    (area(polygon), sel, cons)
}
