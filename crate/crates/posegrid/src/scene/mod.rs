//! Synthetic multi-person scene generation, heatmap+PAF rasterization, and
//! stick-figure rendering — the closed-loop data world the pipeline trains
//! and evaluates in.

mod maps;
mod render;
mod synth;

pub use maps::{rasterize_maps, MapConfig, MapStack, HM_CHANNELS, MAP_CHANNELS, PAF_CHANNELS};
pub use render::{render_background, render_stickfigure, RenderedImage, StickStyle, PALETTE};
pub use synth::{synthesize_scene, PoseSource, RoomConfig};

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::kinematics::{project_weak_perspective, Scene};
use crate::{Real, Result, IMG_SIZE};

/// Image-space keypoints for one person; `vis[j] == false` means joint j is
/// ignored by every consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonKeypoints {
    pub pts: Vec<[Real; 2]>,
    pub vis: Vec<bool>,
}

impl PersonKeypoints {
    pub fn all_visible(pts: Vec<[Real; 2]>) -> Self {
        let vis = vec![true; pts.len()];
        PersonKeypoints { pts, vis }
    }
}

/// Per-person 2D keypoints for a whole frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Keypoints2D {
    pub persons: Vec<PersonKeypoints>,
}

/// Project a scene and mark joints outside the image as invisible.
pub fn scene_keypoints(scene: &Scene) -> Result<Keypoints2D> {
    let projected = project_weak_perspective(scene)?;
    let persons = projected
        .into_iter()
        .map(|pts| {
            let vis = pts
                .iter()
                .map(|p| {
                    p[0] >= 0.0
                        && p[0] < IMG_SIZE as Real
                        && p[1] >= 0.0
                        && p[1] < IMG_SIZE as Real
                })
                .collect();
            PersonKeypoints { pts, vis }
        })
        .collect();
    Ok(Keypoints2D { persons })
}

/// Write scenes as JSON-lines, one scene per line.
pub fn write_scenes_jsonl<P: AsRef<Path>>(path: P, scenes: &[Scene]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in scenes {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_scenes_jsonl<P: AsRef<Path>>(path: P) -> Result<Vec<Scene>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut scenes = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let scene: Scene = serde_json::from_str(&line)?;
        scene.validate()?;
        scenes.push(scene);
    }
    Ok(scenes)
}
