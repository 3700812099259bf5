//! Scene metrics: road proximity of key spots, class diversity and the
//! box-counting fractal dimension of the occupancy raster.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::assets::AssetCategory;
use crate::geometry::{point_to_polyline_distance, point_to_segment_distance, Point};
use crate::scene::Scene;

pub const RASTER_SIZE: usize = 256;
pub const BOX_SIZES: [usize; 7] = [2, 4, 8, 16, 32, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathScoreConfig {
    pub phi: f64,
    pub keyspot_min_footprint: f64,
}

impl Default for PathScoreConfig {
    fn default() -> Self {
        Self { phi: 12.0, keyspot_min_footprint: 25.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub path_s: f64,
    pub class_div_raw: usize,
    pub class_div_norm: f64,
    pub fractal_dim: f64,
    /// Absent when the scene has no key spots.
    pub reachable_keyspot_ratio: Option<f64>,
    pub keyspots: usize,
}

/// Clamped proximity sum over key-spot road distances, and the share of key
/// spots within `phi`.
pub fn path_score_from_distances(distances: &[f64], phi: f64) -> (f64, Option<f64>) {
    let s = distances.iter().map(|d| (1.0 - d / phi).clamp(0.0, 1.0)).sum();
    if distances.is_empty() {
        return (0.0, None);
    }
    let reached = distances.iter().filter(|&&d| d <= phi).count();
    (s, Some(reached as f64 / distances.len() as f64))
}

/// Distance from each key spot center to the nearest road spline.
pub fn keyspot_distances(scene: &Scene, cfg: &PathScoreConfig) -> Vec<f64> {
    scene
        .placements
        .iter()
        .filter(|p| p.asset.category == AssetCategory::Architecture && p.asset.footprint() >= cfg.keyspot_min_footprint)
        .map(|p| {
            scene
                .roads
                .splines
                .iter()
                .map(|s| point_to_polyline_distance(p.pose.position(), s))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn path_score(scene: &Scene, cfg: &PathScoreConfig) -> (f64, Option<f64>) {
    path_score_from_distances(&keyspot_distances(scene, cfg), cfg.phi)
}

pub fn class_diversity(scene: &Scene, library_size: usize) -> (usize, f64) {
    let raw = scene.placements.iter().map(|p| p.asset.name.as_str()).collect::<BTreeSet<_>>().len();
    let norm = if library_size == 0 { 0.0 } else { raw as f64 / library_size as f64 };
    (raw, norm)
}

/// Square binary image, row-major, row 0 at the south edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub size: usize,
    pub data: Vec<bool>,
}

impl Raster {
    pub fn new(size: usize) -> Self {
        Self { size, data: vec![false; size * size] }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.size + x]
    }

    pub fn set(&mut self, x: usize, y: usize) {
        self.data[y * self.size + x] = true;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Number of `r x r` boxes holding at least one set pixel.
    pub fn occupied_boxes(&self, r: usize) -> usize {
        let n = self.size.div_ceil(r);
        let mut occupied = vec![false; n * n];
        for y in 0..self.size {
            for x in 0..self.size {
                if self.get(x, y) {
                    occupied[(y / r) * n + x / r] = true;
                }
            }
        }
        occupied.iter().filter(|&&b| b).count()
    }
}

/// Negated least-squares slope of `ln N_r` against `ln r`; zero for an
/// empty raster.
pub fn box_counting_dimension(raster: &Raster, sizes: &[usize]) -> f64 {
    if raster.count() == 0 {
        return 0.0;
    }
    let pts: Vec<(f64, f64)> =
        sizes.iter().map(|&r| ((r as f64).ln(), (raster.occupied_boxes(r) as f64).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

/// Rasterizes object footprints and road strips over the garden extent.
pub fn rasterize(scene: &Scene, size: usize) -> Raster {
    let (ex, ey) = scene.terrain.extent();
    let (sx, sy) = (ex / size as f64, ey / size as f64);
    let mut r = Raster::new(size);
    let center = |px: usize, py: usize| Point::new((px as f64 + 0.5) * sx, (py as f64 + 0.5) * sy);
    let pixel_range = |lo: f64, hi: f64, s: f64| {
        let a = ((lo / s - 0.5).ceil().max(0.0)) as usize;
        let b = ((hi / s - 0.5).floor().min(size as f64 - 1.0)).max(-1.0);
        (a, b)
    };
    for p in &scene.placements {
        let fp = p.footprint();
        let (lo, hi) = (fp.min(), fp.max());
        let (x0, x1) = pixel_range(lo.x, hi.x, sx);
        let (y0, y1) = pixel_range(lo.y, hi.y, sy);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        for py in y0..=y1 as usize {
            for px in x0..=x1 as usize {
                r.set(px, py);
            }
        }
    }
    let half = scene.roads.width / 2.0;
    for spline in &scene.roads.splines {
        for seg in spline.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let (x0, x1) = pixel_range(a.x.min(b.x) - half, a.x.max(b.x) + half, sx);
            let (y0, y1) = pixel_range(a.y.min(b.y) - half, a.y.max(b.y) + half, sy);
            if x1 < 0.0 || y1 < 0.0 {
                continue;
            }
            for py in y0..=y1 as usize {
                for px in x0..=x1 as usize {
                    if point_to_segment_distance(center(px, py), a, b) <= half {
                        r.set(px, py);
                    }
                }
            }
        }
    }
    r
}

pub fn fractal_dimension(scene: &Scene) -> f64 {
    box_counting_dimension(&rasterize(scene, RASTER_SIZE), &BOX_SIZES)
}

pub fn compute_metrics(scene: &Scene, library_size: usize, cfg: &PathScoreConfig) -> MetricsReport {
    let distances = keyspot_distances(scene, cfg);
    let (path_s, ratio) = path_score_from_distances(&distances, cfg.phi);
    let (raw, norm) = class_diversity(scene, library_size);
    MetricsReport {
        path_s,
        class_div_raw: raw,
        class_div_norm: norm,
        fractal_dim: fractal_dimension(scene),
        reachable_keyspot_ratio: ratio,
        keyspots: distances.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_score_examples() {
        let (s, ratio) = path_score_from_distances(&[0.0, 6.0, 24.0], 12.0);
        assert!((s - 1.5).abs() < 1e-12);
        assert!((ratio.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(path_score_from_distances(&[], 12.0), (0.0, None));
        assert_eq!(path_score_from_distances(&[24.0], 12.0).0, 0.0);
    }

    #[test]
    fn full_and_line_rasters() {
        let mut full = Raster::new(RASTER_SIZE);
        full.data.iter_mut().for_each(|b| *b = true);
        assert!((box_counting_dimension(&full, &BOX_SIZES) - 2.0).abs() < 0.02);
        let mut line = Raster::new(RASTER_SIZE);
        (0..RASTER_SIZE).for_each(|x| line.set(x, 100));
        assert!((box_counting_dimension(&line, &BOX_SIZES) - 1.0).abs() < 0.05);
        assert_eq!(box_counting_dimension(&Raster::new(RASTER_SIZE), &BOX_SIZES), 0.0);
    }
}
