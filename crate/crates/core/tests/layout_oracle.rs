//! Solver optimality against the exhaustive oracle, plus the weight scaling
//! property.

mod common;

use common::oracle::{area, object, oracle, placed, random_instance};
use garden_core::constraints::{AreaConstraints, Constraint, ConstraintKind};
use garden_core::geometry::{Polygon, Pose2D, Rotation};
use garden_core::layout::{solve_area, total_loss, LayoutError, LossParams, LossWeights, PlacedObject, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn four_metre_area_matches_oracle() {
    let a = area(Polygon::rect(0.0, 0.0, 4.0, 4.0));
    let sel = vec![object("A", 1.0, 1.0), object("B", 1.0, 1.0)];
    let mut cons = AreaConstraints::new();
    cons.insert("A".into(), vec![Constraint::global(ConstraintKind::Middle)]);
    cons.insert("B".into(), vec![Constraint::with(ConstraintKind::Near, "A")]);
    let cfg = SolverConfig { grid_step: 1.0, ..SolverConfig::default() };
    let w = LossWeights::default();
    let s = solve_area(&a, &sel, &cons, &cfg, &w, &LossParams::default()).unwrap();
    assert_eq!(s.report.total, oracle(&a, &sel, &cons, 1.0, &w).unwrap());
}

#[test]
fn fifty_seeded_instances_match_oracle() {
    let w = LossWeights::default();
    let cfg = SolverConfig::default();
    let mut positive = 0;
    for seed in 0..50 {
        let (a, sel, cons) = random_instance(seed);
        let expected = oracle(&a, &sel, &cons, cfg.grid_step, &w);
        positive += usize::from(expected.is_some_and(|l| l > 0.0));
        match solve_area(&a, &sel, &cons, &cfg, &w, &LossParams::default()) {
            Ok(s) => assert_eq!(Some(s.report.total), expected, "seed {seed}"),
            Err(LayoutError::NoValidPlacement { .. }) => assert_eq!(expected, None, "seed {seed}"),
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    eprintln!("instances with a positive optimum: {positive}");
    assert!(positive >= 5);
}

#[test]
fn weight_scaling_is_linear_and_keeps_argmin() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = LossParams::default();
    let w = LossWeights::default();
    for seed in 0..100 {
        let (a, sel, cons) = random_instance(1000 + seed);
        let (lo, hi) = a.polygon.bbox();
        let placements: Vec<PlacedObject> = sel
            .iter()
            .map(|o| {
                let pose = Pose2D::new(
                    rng.gen_range(lo.x..hi.x),
                    rng.gen_range(lo.y..hi.y),
                    Rotation::ALL[rng.gen_range(0..4)],
                );
                placed(o, pose)
            })
            .collect();
        let c = rng.gen_range(0.1..10.0);
        let base = total_loss(&placements, &cons, &a, &w, &p).unwrap().total;
        let scaled = total_loss(&placements, &cons, &a, &w.scaled(c), &p).unwrap().total;
        assert!((scaled - c * base).abs() <= 1e-9 * (1.0 + c * base), "seed {seed}");
    }
    for seed in 0..20 {
        let (a, sel, cons) = random_instance(2000 + seed);
        let cfg = SolverConfig::default();
        let r1 = solve_area(&a, &sel, &cons, &cfg, &w, &p);
        let r2 = solve_area(&a, &sel, &cons, &cfg, &w.scaled(4.0), &p);
        match (r1, r2) {
            (Ok(s1), Ok(s2)) => assert_eq!(s1.placements, s2.placements, "seed {seed}"),
            (Err(_), Err(_)) => {}
            _ => panic!("seed {seed}: feasibility changed under scaling"),
        }
    }
}
