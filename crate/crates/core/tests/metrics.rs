use std::collections::BTreeMap;

use garden_core::area::segment_with_cuts;
use garden_core::assets::AssetLibrary;
use garden_core::constraints::ConstraintSpec;
use garden_core::geometry::{Point, Pose2D, Rotation, TerrainClass, TerrainGrid};
use garden_core::layout::PlacedObject;
use garden_core::metrics::{
    box_counting_dimension, class_diversity, fractal_dimension, path_score, path_score_from_distances, PathScoreConfig,
    Raster, BOX_SIZES, RASTER_SIZE,
};
use garden_core::road::RoadNetwork;
use garden_core::scene::{Provenance, Scene};
use proptest::prelude::*;

fn scene(placements: Vec<(&str, f64, f64)>, splines: Vec<Vec<Point>>) -> Scene {
    let grid = TerrainGrid::filled(20, 15, 10.0, TerrainClass::Ground).unwrap();
    let areas = segment_with_cuts(&grid, &Default::default()).unwrap();
    let lib = AssetLibrary::bundled();
    let placements = placements
        .into_iter()
        .enumerate()
        .map(|(k, (name, x, y))| PlacedObject {
            instance: format!("{name}#{k}"),
            area: areas[0].id.clone(),
            asset: lib.get(name).unwrap().clone(),
            pose: Pose2D::new(x, y, Rotation::R0),
        })
        .collect();
    Scene {
        revision: 1,
        terrain: grid,
        roads: RoadNetwork {
            entrances: vec![],
            keypoints: vec![],
            segments: vec![],
            splines,
            width: 3.0,
            max_straight: 3,
            cell_size: 10.0,
        },
        areas,
        constraints: ConstraintSpec::default(),
        placements,
        provenance: Provenance {
            prompt: "test".into(),
            seed: 0,
            backend: "rule".into(),
            stages: BTreeMap::new(),
            parameters: serde_json::Value::Null,
            tool_version: String::new(),
            warnings: vec![],
        },
    }
}

/// Right-angle Sierpinski triangle by recursive subdivision: each level keeps
/// the lower-left, lower-right and upper-left quadrants.
fn sierpinski(size: usize, depth: u32) -> Raster {
    fn fill(r: &mut Raster, x: usize, y: usize, s: usize, depth: u32) {
        if depth == 0 {
            for dy in 0..s {
                for dx in 0..s - dy {
                    r.set(x + dx, y + dy);
                }
            }
            return;
        }
        let h = s / 2;
        fill(r, x, y, h, depth - 1);
        fill(r, x + h, y, h, depth - 1);
        fill(r, x, y + h, h, depth - 1);
    }
    let mut r = Raster::new(size);
    fill(&mut r, 0, 0, size, depth);
    r
}

#[test]
fn sierpinski_oracle() {
    let fd = box_counting_dimension(&sierpinski(RASTER_SIZE, 7), &BOX_SIZES);
    let expected = 3f64.ln() / 2f64.ln();
    assert!((fd - expected).abs() < 0.05, "fd {fd}");
}

#[test]
fn path_score_on_scenes() {
    let road = vec![vec![Point::new(0.0, 50.0), Point::new(200.0, 50.0)]];
    let s = scene(vec![("main hall", 100.0, 50.0), ("tower", 40.0, 56.0), ("study", 150.0, 74.0)], road.clone());
    let (ps, ratio) = path_score(&s, &PathScoreConfig::default());
    assert!((ps - 1.5).abs() < 1e-9);
    assert!((ratio.unwrap() - 2.0 / 3.0).abs() < 1e-12);

    // Small architecture and plants are not key spots.
    let none = scene(vec![("gate house", 100.0, 50.0), ("black pine", 60.0, 50.0)], road);
    assert_eq!(path_score(&none, &PathScoreConfig::default()), (0.0, None));
}

#[test]
fn class_diversity_counts_distinct_names() {
    let s = scene((0..10).map(|k| ("camellia", 10.0 + 5.0 * k as f64, 20.0)).collect(), vec![]);
    assert_eq!(class_diversity(&s, 24).0, 1);
    let names = ["camellia", "osmanthus", "taihu rock", "stone lantern", "study"];
    let s = scene(names.iter().enumerate().map(|(k, n)| (*n, 20.0 + 30.0 * k as f64, 40.0)).collect(), vec![]);
    assert_eq!(class_diversity(&s, 24), (5, 5.0 / 24.0));
}

#[test]
fn empty_scene_has_zero_dimension() {
    assert_eq!(fractal_dimension(&scene(vec![], vec![])), 0.0);
}

fn content() -> impl Strategy<Value = (Vec<(usize, f64, f64)>, Vec<Vec<(f64, f64)>>)> {
    (
        prop::collection::vec((0usize..24, 30.0..160.0f64, 30.0..110.0f64), 8..15),
        prop::collection::vec(prop::collection::vec((20.0..170.0f64, 20.0..120.0f64), 3..8), 2..4),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn path_score_is_monotone(ds in prop::collection::vec(0.0..40.0f64, 1..10), k in 0usize..10, bump in 0.0..20.0f64) {
        let k = k % ds.len();
        let mut farther = ds.clone();
        farther[k] += bump;
        prop_assert!(path_score_from_distances(&farther, 12.0).0 <= path_score_from_distances(&ds, 12.0).0 + 1e-12);
    }

    #[test]
    fn translation_by_one_cell_barely_moves_fd((objs, lines) in content()) {
        let lib = AssetLibrary::bundled();
        let build = |dx: f64| {
            let placed = objs.iter().map(|(i, x, y)| (lib.records()[*i].name.as_str(), x + dx, *y)).collect();
            let splines = lines.iter().map(|l| l.iter().map(|(x, y)| Point::new(x + dx, *y)).collect()).collect();
            scene(placed, splines)
        };
        let a = fractal_dimension(&build(0.0));
        let b = fractal_dimension(&build(10.0));
        prop_assert!((a - b).abs() < 0.1, "{} vs {}", a, b);
    }
}
