//! File-based scene workspace: one directory per scene holding `scene.json`
//! and the export artifacts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use garden_core::export::{export_scene, load_scene, ExportError, FILE_SCENE};
use garden_core::scene::Scene;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("scene {0} not found")]
    NotFound(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Export(#[from] ExportError),
}

#[derive(Debug, Clone)]
pub struct WorkspaceStore {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl WorkspaceStore {
    /// Opens (creating if needed) a workspace and clears leftovers of
    /// interrupted creations.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let io_err = |source| StoreError::Io { path: root.clone(), source };
        fs::create_dir_all(&root).map_err(io_err)?;
        for entry in fs::read_dir(&root).map_err(io_err)? {
            let entry = entry.map_err(io_err)?;
            if entry.file_name().to_string_lossy().starts_with(".tmp-") {
                let _ = fs::remove_dir_all(entry.path());
            }
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn scene_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    /// Stores a new scene under a fresh random id. The directory appears
    /// complete or not at all.
    pub fn create(&self, scene: &Scene) -> Result<String, StoreError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let tmp = self.root.join(format!(".tmp-{id}"));
        export_scene(scene, &tmp)?;
        let dir = self.scene_dir(&id);
        fs::rename(&tmp, &dir).map_err(|source| StoreError::Io { path: dir, source })?;
        Ok(id)
    }

    pub fn exists(&self, id: &str) -> bool {
        valid_id(id) && self.scene_dir(id).join(FILE_SCENE).is_file()
    }

    pub fn load(&self, id: &str) -> Result<Scene, StoreError> {
        if !self.exists(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        Ok(load_scene(&self.scene_dir(id).join(FILE_SCENE))?)
    }

    /// Rewrites an existing scene; every file is replaced atomically and
    /// `scene.json` goes last.
    pub fn save(&self, id: &str, scene: &Scene) -> Result<(), StoreError> {
        if !self.exists(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        export_scene(scene, &self.scene_dir(id))?;
        Ok(())
    }

    /// Ids of all complete scenes, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let io_err = |source| StoreError::Io { path: self.root.clone(), source };
        let mut ids: Vec<String> = fs::read_dir(&self.root)
            .map_err(io_err)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|id| self.exists(id))
            .collect();
        ids.sort();
        Ok(ids)
    }
}
