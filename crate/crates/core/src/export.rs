//! Scene artifacts: heightmap, terrain map, object list, construction SVG
//! and the full scene document.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{TerrainClass, TerrainGrid};
use crate::scene::Scene;

pub const HEIGHTMAP_UPSAMPLE: usize = 8;
pub const HEIGHTMAP_OFFSET_M: f64 = 10.0;
pub const WATER_ELEVATION: f64 = -1.5;
pub const LAND_ELEVATION: [f64; 2] = [0.5, 3.0];
/// Value-noise lattice spacing in cells.
pub const NOISE_PERIOD: usize = 3;
pub const SVG_METERS_PER_PX: f64 = 0.25;

pub const FILE_HEIGHTMAP: &str = "heightmap.pgm";
pub const FILE_TERRAIN: &str = "terrain.csv";
pub const FILE_OBJECTS: &str = "objects.json";
pub const FILE_SVG: &str = "layout.svg";
pub const FILE_SCENE: &str = "scene.json";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid scene document {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Per-cell ground elevation in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationMap {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub values: Vec<f64>,
}

impl ElevationMap {
    /// Water sits below grade, Land follows seeded value noise, everything
    /// else is at zero.
    pub fn from_grid(grid: &TerrainGrid, seed: u64) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let lw = w / NOISE_PERIOD + 2;
        let lh = h / NOISE_PERIOD + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6865_6967_6874);
        let lattice: Vec<f64> = (0..lw * lh).map(|_| rng.gen::<f64>()).collect();
        let noise = |i: usize, j: usize| {
            let u = i as f64 / NOISE_PERIOD as f64;
            let v = j as f64 / NOISE_PERIOD as f64;
            let (i0, j0) = (u.floor() as usize, v.floor() as usize);
            let (fu, fv) = (u - i0 as f64, v - j0 as f64);
            let at = |a: usize, b: usize| lattice[b * lw + a];
            let top = at(i0, j0) * (1.0 - fu) + at(i0 + 1, j0) * fu;
            let bot = at(i0, j0 + 1) * (1.0 - fu) + at(i0 + 1, j0 + 1) * fu;
            top * (1.0 - fv) + bot * fv
        };
        let mut values = Vec::with_capacity(w * h);
        for j in 0..h {
            for i in 0..w {
                let c = grid.cells()[j * w + i];
                values.push(match c {
                    TerrainClass::Waterbody => WATER_ELEVATION,
                    TerrainClass::Land => LAND_ELEVATION[0] + (LAND_ELEVATION[1] - LAND_ELEVATION[0]) * noise(i, j),
                    TerrainClass::Ground | TerrainClass::Outside => 0.0,
                });
            }
        }
        Self { width: w, height: h, cell_size: grid.cell_size(), values }
    }

    fn at(&self, i: i64, j: i64) -> f64 {
        let i = i.clamp(0, self.width as i64 - 1) as usize;
        let j = j.clamp(0, self.height as i64 - 1) as usize;
        self.values[j * self.width + i]
    }

    /// Bilinear interpolation between cell centers, in cell units.
    pub fn sample_cells(&self, u: f64, v: f64) -> f64 {
        let (i0, j0) = (u.floor(), v.floor());
        let (fu, fv) = (u - i0, v - j0);
        let (i0, j0) = (i0 as i64, j0 as i64);
        let bottom = self.at(i0, j0) * (1.0 - fu) + self.at(i0 + 1, j0) * fu;
        let top = self.at(i0, j0 + 1) * (1.0 - fu) + self.at(i0 + 1, j0 + 1) * fu;
        bottom * (1.0 - fv) + top * fv
    }

    /// Elevation at a world position in meters.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        self.sample_cells(x / self.cell_size - 0.5, y / self.cell_size - 0.5)
    }
}

/// 16-bit binary PGM, north up, `(elevation + 10 m) * 1000` per sample.
pub fn heightmap_pgm(scene: &Scene) -> Vec<u8> {
    let elev = ElevationMap::from_grid(&scene.terrain, scene.provenance.seed);
    let (w, h) = (elev.width * HEIGHTMAP_UPSAMPLE, elev.height * HEIGHTMAP_UPSAMPLE);
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    out.reserve(w * h * 2);
    let k = HEIGHTMAP_UPSAMPLE as f64;
    for row in 0..h {
        let py = h - 1 - row;
        for px in 0..w {
            let e = elev.sample_cells((px as f64 + 0.5) / k - 0.5, (py as f64 + 0.5) / k - 0.5);
            let v = ((e + HEIGHTMAP_OFFSET_M) * 1000.0).round().clamp(0.0, 65535.0) as u16;
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

/// One line per grid row starting at row 0, integer class codes.
pub fn terrain_csv(grid: &TerrainGrid) -> String {
    let mut s = String::new();
    for row in grid.cells().chunks(grid.width()) {
        let line: Vec<String> = row.iter().map(|c| c.code().to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct ObjectRecord<'a> {
    name: &'a str,
    path: &'a str,
    x: f64,
    y: f64,
    z: f64,
    rotation: i64,
    l: f64,
    w: f64,
    h: f64,
    area_id: &'a str,
}

fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn objects_json(scene: &Scene) -> String {
    let records: Vec<ObjectRecord> = scene
        .placements
        .iter()
        .map(|p| ObjectRecord {
            name: &p.instance,
            path: &p.asset.path,
            x: round6(p.pose.x),
            y: round6(p.pose.y),
            z: round6(p.pose.z),
            rotation: p.pose.rotation.degrees(),
            l: round6(p.asset.size[0]),
            w: round6(p.asset.size[1]),
            h: round6(p.asset.size[2]),
            area_id: &p.area,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&records).expect("object records serialize");
    s.push('\n');
    s
}

fn class_fill(c: TerrainClass) -> &'static str {
    match c {
        TerrainClass::Outside => "#d9d9d9",
        TerrainClass::Waterbody => "#8ec5e8",
        TerrainClass::Land => "#a9c98b",
        TerrainClass::Ground => "#efe3c2",
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Top-down construction map at 0.25 m per pixel, north up.
pub fn layout_svg(scene: &Scene) -> String {
    let grid = &scene.terrain;
    let (ex, ey) = grid.extent();
    let k = 1.0 / SVG_METERS_PER_PX;
    let px = |x: f64| x * k;
    let py = |y: f64| (ey - y) * k;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        px(ex),
        ey * k,
        px(ex),
        ey * k
    );
    let _ = writeln!(s, r#"<g id="terrain">"#);
    let cs = grid.cell_size();
    for j in 0..grid.height() {
        for i in 0..grid.width() {
            let c = grid.cells()[j * grid.width() + i];
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                px(i as f64 * cs),
                py((j + 1) as f64 * cs),
                cs * k,
                cs * k,
                class_fill(c)
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="roads" fill="none" stroke="#b08d57" stroke-linecap="round" stroke-linejoin="round">"##);
    for spline in &scene.roads.splines {
        let pts: Vec<String> = spline.iter().map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y))).collect();
        let _ = writeln!(s, r#"<polyline stroke-width="{:.2}" points="{}"/>"#, scene.roads.width * k, pts.join(" "));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="areas" fill="none" stroke="#555555" stroke-dasharray="8 4">"##);
    for a in &scene.areas {
        let mut d = String::new();
        for ring in &a.polygon.rings {
            for (n, p) in ring.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if n == 0 { "M" } else { "L" }, px(p.x), py(p.y));
            }
            d.push_str("Z ");
        }
        let _ = writeln!(s, r#"<path id="{}" d="{}"/>"#, xml_escape(&a.id), d.trim_end());
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="objects" font-family="sans-serif" font-size="10">"#);
    for p in &scene.placements {
        let fp = p.footprint();
        let (lo, hi) = (fp.min(), fp.max());
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#8c5a3c" fill-opacity="0.6" stroke="#4a2e1f"/>"##,
            px(lo.x),
            py(hi.y),
            (hi.x - lo.x) * k,
            (hi.y - lo.y) * k
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(p.pose.x),
            py(p.pose.y),
            xml_escape(&p.instance)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

pub fn scene_json(scene: &Scene) -> String {
    let mut s = serde_json::to_string_pretty(scene).expect("scene serializes");
    s.push('\n');
    s
}

pub fn load_scene(path: &Path) -> Result<Scene, ExportError> {
    let text = fs::read_to_string(path).map_err(|source| ExportError::Io { path: path.to_path_buf(), source })?;
    parse_scene(&text).map_err(|message| ExportError::Parse { path: path.to_path_buf(), message })
}

pub fn parse_scene(text: &str) -> Result<Scene, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    let err = |source| ExportError::Io { path: path.to_path_buf(), source };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(err)?;
    fs::rename(&tmp, path).map_err(err)
}

/// Writes the five artifacts into `out_dir`, creating it if needed.
pub fn export_scene(scene: &Scene, out_dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    fs::create_dir_all(out_dir).map_err(|source| ExportError::Io { path: out_dir.to_path_buf(), source })?;
    let files: [(&str, Vec<u8>); 5] = [
        (FILE_HEIGHTMAP, heightmap_pgm(scene)),
        (FILE_TERRAIN, terrain_csv(&scene.terrain).into_bytes()),
        (FILE_OBJECTS, objects_json(scene).into_bytes()),
        (FILE_SVG, layout_svg(scene).into_bytes()),
        (FILE_SCENE, scene_json(scene).into_bytes()),
    ];
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = out_dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}
