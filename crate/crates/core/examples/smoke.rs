use garden_core::agents::RuleBackend;
use garden_core::assets::AssetLibrary;
use garden_core::metrics::{compute_metrics, PathScoreConfig};
use garden_core::pipeline::{generate, PipelineConfig};
use garden_core::road::coverage;

fn main() {
    let lib = AssetLibrary::bundled();
    let backend = RuleBackend::default();
    let cfg = PipelineConfig::default();
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    for seed in 0..n {
        let t = std::time::Instant::now();
        let scene = generate("a classical garden with a pond", seed, &backend, &lib, &cfg).unwrap();
        let m = compute_metrics(&scene, lib.len(), &PathScoreConfig::default());
        let cov = coverage(&scene.terrain, &scene.roads.vertices());
        println!(
            "seed {seed} {:.2}s areas {} objs {} path_s {:.2} ratio {:?} ks {} fd {:.3} div {} cov {:.2} conn {} run {}/{} viol {} warn {}",
            t.elapsed().as_secs_f64(), scene.areas.len(), scene.placements.len(), m.path_s, m.reachable_keyspot_ratio, m.keyspots,
            m.fractal_dim, m.class_div_raw, cov, scene.roads.is_connected(), scene.roads.longest_straight_run(), scene.roads.max_straight,
            scene.hard_violations().len(), scene.provenance.warnings.len()
        );
    }
}
