//! Procedural Jiangnan garden synthesis.

pub mod agents;
pub mod area;
pub mod assets;
pub mod constraints;
pub mod export;
pub mod geometry;
pub mod layout;
pub mod metrics;
pub mod pipeline;
pub mod regions;
pub mod road;
pub mod scene;
pub mod terrain;
