//! Multi-person scene composition: sampled single-person poses, random
//! rigid orientation, and rejection-sampled room placement.

use crate::embedding::{decode, AaeModel, PoseEmbedding};
use crate::kinematics::{
    forward_kinematics, place_global, rigid_transform, Camera, Person, RigidParams, Root, Scene,
};
use crate::skeleton::{sample_local_pose, JointLimits, LocalPose, SkeletonTopology};
use crate::{Error, Real, Result, Rng};

/// 3D room bounds (meters, camera coordinates) and placement constraints.
#[derive(Debug, Clone)]
pub struct RoomConfig {
    pub x: (Real, Real),
    pub y: (Real, Real),
    pub depth: (Real, Real),
    pub min_separation: Real,
    pub capacity: (usize, usize),
    pub max_retries: usize,
    /// Pitch/roll sampled uniformly in +-tilt; yaw covers the full circle.
    pub tilt: Real,
}

impl Default for RoomConfig {
    fn default() -> Self {
        RoomConfig {
            x: (-1.2, 1.2),
            y: (-0.5, 0.5),
            depth: (2.0, 6.0),
            min_separation: 0.4,
            capacity: (1, 4),
            max_retries: 100,
            tilt: 15.0_f64.to_radians(),
        }
    }
}

impl RoomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.x.0 >= self.x.1 || self.y.0 >= self.y.1 || self.depth.0 >= self.depth.1 {
            return Err(Error::Scene("degenerate room bounds".into()));
        }
        if self.depth.0 <= 0.0 {
            return Err(Error::Scene("room must lie at positive depth".into()));
        }
        if self.capacity.0 < 1 || self.capacity.0 > self.capacity.1 {
            return Err(Error::Scene("bad capacity range".into()));
        }
        Ok(())
    }
}

/// Where single-person poses come from: the artificial sampler over joint
/// limits, or uniform-prior decodes through a trained decoder (these carry
/// their embedding into the scene record).
pub enum PoseSource<'a> {
    Sampler(&'a JointLimits),
    Decoder(&'a AaeModel),
}

impl PoseSource<'_> {
    fn draw(&self, rng: &mut Rng) -> (LocalPose, Option<Vec<Real>>) {
        match self {
            PoseSource::Sampler(limits) => (sample_local_pose(limits, rng), None),
            PoseSource::Decoder(model) => {
                let phi = PoseEmbedding::uniform(rng);
                let pose = decode(model, &phi);
                (pose, Some(phi.values().to_vec()))
            }
        }
    }
}

fn dist3(a: &[Real; 3], b: &[Real; 3]) -> Real {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Compose one scene: person count uniform in the capacity range, poses from
/// `source`, full-circle yaw with small pitch/roll, roots uniform in the
/// room with pairwise separation enforced by rejection.
pub fn synthesize_scene(
    source: &PoseSource,
    topo: &SkeletonTopology,
    room: &RoomConfig,
    cam: &Camera,
    seed: u64,
    rng: &mut Rng,
) -> Result<Scene> {
    room.validate()?;
    cam.validate()?;
    let n = room.capacity.0 + rng.below(room.capacity.1 - room.capacity.0 + 1);
    let mut persons: Vec<Person> = Vec::with_capacity(n);
    let mut pelvises: Vec<[Real; 3]> = Vec::new();

    for _ in 0..n {
        let (p_l, phi) = source.draw(rng);
        let yaw = rng.range(0.0, std::f64::consts::TAU);
        let roll = rng.range(-room.tilt, room.tilt);
        let pitch = rng.range(-room.tilt, room.tilt);
        let c = RigidParams::from_angles(roll, yaw, pitch);

        let mut placed = None;
        for _ in 0..room.max_retries {
            let x = rng.range(room.x.0, room.x.1);
            let y = rng.range(room.y.0, room.y.1);
            let d = rng.range(room.depth.0, room.depth.1);
            let pelvis = [x, y, d];
            if pelvises
                .iter()
                .all(|p| dist3(p, &pelvis) >= room.min_separation)
            {
                placed = Some(pelvis);
                break;
            }
        }
        let pelvis = placed.ok_or_else(|| {
            Error::Scene(format!(
                "could not separate {n} persons by {} m after {} retries",
                room.min_separation, room.max_retries
            ))
        })?;

        let root = Root {
            rx: cam.cx + cam.focal * pelvis[0] / pelvis[2],
            ry: cam.cy + cam.focal * pelvis[1] / pelvis[2],
            d: pelvis[2],
        };
        let p_c = forward_kinematics(&p_l, topo)?;
        let p_r = rigid_transform(&p_c, &c)?;
        let mut person = place_global(&p_r, root, cam)?;
        person.rigid = Some(c);
        person.phi = phi;
        pelvises.push(pelvis);
        persons.push(person);
    }

    let scene = Scene {
        persons,
        camera: *cam,
        seed,
    };
    scene.validate()?;
    Ok(scene)
}
