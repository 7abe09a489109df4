//! The transform chain from local pose vectors to camera-space scenes and
//! image keypoints: forward kinematics, rigid orientation, global placement,
//! and weak-perspective projection.
//!
//! Each stage exists twice: a tape variant (suffix `_t`) operating on
//! tracked tensors so gradients flow end to end, and a plain wrapper over
//! an inference tape for data generation and evaluation.

use serde::{Deserialize, Serialize};

use crate::skeleton::{norm3, LocalPose, SkeletonTopology};
use crate::{Error, Real, Result, Tape, Tensor};

/// Pinhole intrinsics plus the reference depth used as the neutral fill for
/// grid depth channels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub focal: Real,
    pub cx: Real,
    pub cy: Real,
    pub ref_depth: Real,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if self.focal <= 0.0 || self.ref_depth <= 0.0 {
            return Err(Error::Scene("camera needs positive focal and depth".into()));
        }
        Ok(())
    }

    /// Back-project an image point at depth d to camera coordinates.
    pub fn back_project(&self, u: Real, v: Real, d: Real) -> [Real; 3] {
        [
            d * (u - self.cx) / self.focal,
            d * (v - self.cy) / self.focal,
            d,
        ]
    }

    /// Full-perspective projection of a camera-space point.
    pub fn project_point(&self, p: &[Real; 3]) -> [Real; 2] {
        [
            self.cx + self.focal * p[0] / p[2],
            self.cy + self.focal * p[1] / p[2],
        ]
    }
}

/// View-invariant joint positions in meters, pelvis at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPose(pub Vec<[Real; 3]>);

/// Canonical pose after the camera-facing rotation; pelvis still at origin.
#[derive(Debug, Clone, PartialEq)]
pub struct RootRelativePose(pub Vec<[Real; 3]>);

/// Six reals: (sin, cos) pairs for the Z, Y, X rotation angles, renormalized
/// to the unit circle before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidParams(pub [Real; 6]);

impl RigidParams {
    pub const IDENTITY: RigidParams = RigidParams([0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);

    pub fn from_angles(z: Real, y: Real, x: Real) -> Self {
        RigidParams([z.sin(), z.cos(), y.sin(), y.cos(), x.sin(), x.cos()])
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            let (s, c) = (self.0[2 * k], self.0[2 * k + 1]);
            if s * s + c * c < 1e-12 {
                return Err(Error::Pose(format!("degenerate sin/cos pair {k}")));
            }
        }
        Ok(())
    }

    /// Rotation matrix R = Rz * Ry * Rx (intrinsic Z-Y-X), rows major,
    /// applied to column vectors; pairs renormalized first.
    pub fn matrix(&self) -> [[Real; 3]; 3] {
        let mut sc = [0.0; 6];
        for k in 0..3 {
            let (s, c) = (self.0[2 * k], self.0[2 * k + 1]);
            let n = (s * s + c * c).sqrt();
            sc[2 * k] = s / n;
            sc[2 * k + 1] = c / n;
        }
        let (s1, c1, s2, c2, s3, c3) = (sc[0], sc[1], sc[2], sc[3], sc[4], sc[5]);
        [
            [c1 * c2, c1 * s2 * s3 - s1 * c3, c1 * s2 * c3 + s1 * s3],
            [s1 * c2, s1 * s2 * s3 + c1 * c3, s1 * s2 * c3 - c1 * s3],
            [-s2, c2 * s3, c2 * c3],
        ]
    }
}

/// Root record of one person: image-pixel root location plus absolute depth.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Root {
    pub rx: Real,
    pub ry: Real,
    pub d: Real,
}

/// One person in camera-centered coordinates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Person {
    pub joints: Vec<[Real; 3]>,
    pub root: Root,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rigid: Option<RigidParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<Real>>,
}

/// A multi-person 3D scene with the camera it was composed for.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Scene {
    pub persons: Vec<Person>,
    pub camera: Camera,
    pub seed: u64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        if self.persons.is_empty() {
            return Err(Error::Scene("scene has no persons".into()));
        }
        for (i, p) in self.persons.iter().enumerate() {
            if p.root.d <= 0.0 {
                return Err(Error::Scene(format!("person {i} has depth {}", p.root.d)));
            }
            let pelvis = self.camera.back_project(p.root.rx, p.root.ry, p.root.d);
            let got = p.joints[0];
            let err = (0..3).map(|k| (pelvis[k] - got[k]).abs()).fold(0.0, Real::max);
            if err > 1e-6 {
                return Err(Error::Scene(format!(
                    "person {i}: pelvis disagrees with root record by {err}"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Small tape-tensor vector helpers.

fn vec3_const(tape: &Tape, v: [Real; 3]) -> Tensor {
    let _ = tape;
    Tensor::new(vec![3], v.to_vec())
}

fn vdot(tape: &Tape, a: &Tensor, b: &Tensor) -> Tensor {
    tape.dot(a, b)
}

fn vcross(tape: &Tape, a: &Tensor, b: &Tensor) -> Tensor {
    let (a0, a1, a2) = (tape.element(a, 0), tape.element(a, 1), tape.element(a, 2));
    let (b0, b1, b2) = (tape.element(b, 0), tape.element(b, 1), tape.element(b, 2));
    let c0 = tape.sub(&tape.mul(&a1, &b2), &tape.mul(&a2, &b1));
    let c1 = tape.sub(&tape.mul(&a2, &b0), &tape.mul(&a0, &b2));
    let c2 = tape.sub(&tape.mul(&a0, &b1), &tape.mul(&a1, &b0));
    tape.stack0(&[&c0, &c1, &c2])
}

fn vnormalize(tape: &Tape, v: &Tensor) -> Tensor {
    let n2 = vdot(tape, v, v);
    let inv = tape.recip(&tape.sqrt(&n2));
    tape.scale_by(v, &inv)
}

/// Linear combination x*axes.0 + y*axes.1 + z*axes.2 of frame axes by the
/// components of a local vector.
fn frame_apply(tape: &Tape, axes: &(Tensor, Tensor, Tensor), v: &Tensor) -> Tensor {
    let (vx, vy, vz) = (tape.element(v, 0), tape.element(v, 1), tape.element(v, 2));
    let a = tape.scale_by(&axes.0, &vx);
    let b = tape.scale_by(&axes.1, &vy);
    let c = tape.scale_by(&axes.2, &vz);
    tape.add(&tape.add(&a, &b), &c)
}

/// Child frame for a joint whose bone points along (unit) `z`: +x from
/// Gram-Schmidt of world +y against z, world +x when parallel, +y = z cross x.
fn frame_from_z(tape: &Tape, z: &Tensor) -> (Tensor, Tensor, Tensor) {
    let world_y = vec3_const(tape, [0.0, 1.0, 0.0]);
    let d = vdot(tape, &world_y, z);
    let proj = tape.scale_by(z, &d);
    let mut x_raw = tape.sub(&world_y, &proj);
    let n2 = vdot(tape, &x_raw, &x_raw).item();
    if n2 < 1e-12 {
        let world_x = vec3_const(tape, [1.0, 0.0, 0.0]);
        let d = vdot(tape, &world_x, z);
        let proj = tape.scale_by(z, &d);
        x_raw = tape.sub(&world_x, &proj);
    }
    let x = vnormalize(tape, &x_raw);
    let y = vcross(tape, z, &x);
    (x, y, z.clone())
}

// ---------------------------------------------------------------------------
// Forward kinematics.

/// Root-to-leaf accumulation of bone directions into joint positions.
/// `p_l` is a [num_limbs, 3] tensor of unit vectors (row j-1 for joint j);
/// output is [num_joints, 3] with the pelvis at the origin.
pub fn forward_kinematics_t(tape: &Tape, p_l: &Tensor, topo: &SkeletonTopology) -> Tensor {
    let n = topo.num_joints();
    assert_eq!(p_l.shape(), &[n - 1, 3], "local pose shape");
    for row in 0..n - 1 {
        let v = &p_l.values()[row * 3..row * 3 + 3];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        assert!(
            (norm - 1.0).abs() < 1e-6,
            "local vector {row} has norm {norm}"
        );
    }

    let identity = (
        vec3_const(tape, [1.0, 0.0, 0.0]),
        vec3_const(tape, [0.0, 1.0, 0.0]),
        vec3_const(tape, [0.0, 0.0, 1.0]),
    );
    let mut positions: Vec<Option<Tensor>> = vec![None; n];
    let mut frames: Vec<Option<(Tensor, Tensor, Tensor)>> = vec![None; n];
    positions[0] = Some(vec3_const(tape, [0.0, 0.0, 0.0]));
    frames[0] = Some(identity);

    for &j in topo.topo_order().iter().skip(1) {
        let parent = topo.parent(j) as usize;
        let v = tape.row(p_l, topo.pose_row(j));
        let dir = frame_apply(tape, frames[parent].as_ref().unwrap(), &v);
        let step = tape.mul_const(&dir, topo.bone_length(j));
        let pos = tape.add(positions[parent].as_ref().unwrap(), &step);
        positions[j] = Some(pos);
        frames[j] = Some(frame_from_z(tape, &dir));
    }

    let rows: Vec<Tensor> = positions.into_iter().map(Option::unwrap).collect();
    let refs: Vec<&Tensor> = rows.iter().collect();
    tape.stack0(&refs)
}

pub fn forward_kinematics(p_l: &LocalPose, topo: &SkeletonTopology) -> Result<CanonicalPose> {
    if p_l.num_vectors() != topo.num_limbs() {
        return Err(Error::Pose(format!(
            "pose has {} vectors for {} limbs",
            p_l.num_vectors(),
            topo.num_limbs()
        )));
    }
    let tape = Tape::inference();
    let t = Tensor::new(vec![topo.num_limbs(), 3], p_l.flat());
    let out = forward_kinematics_t(&tape, &t, topo);
    Ok(CanonicalPose(tensor_to_points(&out)))
}

// ---------------------------------------------------------------------------
// Rigid orientation.

/// Build the Z-Y-X rotation matrix from renormalized (sin, cos) pairs as a
/// tracked [3,3] tensor (rows major).
pub fn rotation_from_pairs_t(tape: &Tape, pairs: &Tensor) -> Tensor {
    assert_eq!(pairs.len(), 6, "rigid params are 6 reals");
    for k in 0..3 {
        let (s, c) = (pairs.values()[2 * k], pairs.values()[2 * k + 1]);
        assert!(s * s + c * c >= 1e-12, "degenerate sin/cos pair {k}");
    }
    let mut sc = Vec::with_capacity(6);
    for k in 0..3 {
        let s = tape.element(pairs, 2 * k);
        let c = tape.element(pairs, 2 * k + 1);
        let n2 = tape.add(&tape.mul(&s, &s), &tape.mul(&c, &c));
        let inv = tape.recip(&tape.sqrt(&n2));
        sc.push(tape.mul(&s, &inv));
        sc.push(tape.mul(&c, &inv));
    }
    let (s1, c1, s2, c2, s3, c3) = (&sc[0], &sc[1], &sc[2], &sc[3], &sc[4], &sc[5]);
    let m = |a: &Tensor, b: &Tensor| tape.mul(a, b);
    let r00 = m(c1, c2);
    let r01 = tape.sub(&m(&m(c1, s2), s3), &m(s1, c3));
    let r02 = tape.add(&m(&m(c1, s2), c3), &m(s1, s3));
    let r10 = m(s1, c2);
    let r11 = tape.add(&m(&m(s1, s2), s3), &m(c1, c3));
    let r12 = tape.sub(&m(&m(s1, s2), c3), &m(c1, s3));
    let r20 = tape.neg(s2);
    let r21 = m(c2, s3);
    let r22 = m(c2, c3);
    let flat = tape.stack0(&[&r00, &r01, &r02, &r10, &r11, &r12, &r20, &r21, &r22]);
    tape.reshape(&flat, vec![3, 3])
}

/// Rotate every joint: rows p' = p R^T, i.e. p' = R p for column vectors.
pub fn rigid_transform_t(tape: &Tape, pose: &Tensor, pairs: &Tensor) -> Tensor {
    let r = rotation_from_pairs_t(tape, pairs);
    // Assemble R^T by stacking columns of R as rows.
    let mut cols = Vec::with_capacity(9);
    for c in 0..3 {
        for rw in 0..3 {
            cols.push(tape.element(&r, rw * 3 + c));
        }
    }
    let refs: Vec<&Tensor> = cols.iter().collect();
    let rt = tape.reshape(&tape.stack0(&refs), vec![3, 3]);
    tape.matmul(pose, &rt)
}

pub fn rigid_transform(p_c: &CanonicalPose, c: &RigidParams) -> Result<RootRelativePose> {
    c.validate()?;
    let tape = Tape::inference();
    let pose = points_to_tensor(&p_c.0);
    let pairs = Tensor::new(vec![6], c.0.to_vec());
    let out = rigid_transform_t(&tape, &pose, &pairs);
    Ok(RootRelativePose(tensor_to_points(&out)))
}

// ---------------------------------------------------------------------------
// Global placement.

/// Translate a root-relative pose to the camera-space location given by the
/// image-pixel root (rx, ry) back-projected at tracked depth `d` (rank-0).
pub fn place_global_t(
    tape: &Tape,
    p_r: &Tensor,
    root_px: (Real, Real),
    d: &Tensor,
    cam: &Camera,
) -> Tensor {
    assert!(d.values()[0] > 0.0, "depth must be positive");
    let dir = [
        (root_px.0 - cam.cx) / cam.focal,
        (root_px.1 - cam.cy) / cam.focal,
        1.0,
    ];
    let offset = tape.scale_by(&vec3_const(tape, dir), d);
    let n = p_r.shape()[0];
    let ones = Tensor::new(vec![n, 1], vec![1.0; n]);
    let offset_row = tape.reshape(&offset, vec![1, 3]);
    let broadcast = tape.matmul(&ones, &offset_row);
    tape.add(p_r, &broadcast)
}

pub fn place_global(p_r: &RootRelativePose, root: Root, cam: &Camera) -> Result<Person> {
    if root.d <= 0.0 {
        return Err(Error::Scene(format!("non-positive depth {}", root.d)));
    }
    let tape = Tape::inference();
    let pose = points_to_tensor(&p_r.0);
    let d = Tensor::scalar(root.d);
    let out = place_global_t(&tape, &pose, (root.rx, root.ry), &d, cam);
    Ok(Person {
        joints: tensor_to_points(&out),
        root,
        rigid: None,
        phi: None,
    })
}

// ---------------------------------------------------------------------------
// Weak-perspective projection.

/// Project one person's [n,3] camera-space joints with the single scale
/// focal / d_root. `d_root` is the tracked pelvis depth (rank-0). Output is
/// [n,2] pixel keypoints.
pub fn project_weak_perspective_t(
    tape: &Tape,
    joints: &Tensor,
    d_root: &Tensor,
    cam: &Camera,
) -> Tensor {
    assert!(d_root.values()[0] > 0.0, "depth must be positive");
    let n = joints.shape()[0];
    // Select X,Y columns via a constant [3,2] matrix.
    let sel = Tensor::new(vec![3, 2], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let xy = tape.matmul(joints, &sel);
    let scale = tape.mul_const(&tape.recip(d_root), cam.focal);
    let scaled = tape.scale_by(&xy, &scale);
    let centers = Tensor::new(vec![n, 2], [cam.cx, cam.cy].repeat(n));
    tape.add(&scaled, &centers)
}

/// Per-person image keypoints for a whole scene.
pub fn project_weak_perspective(scene: &Scene) -> Result<Vec<Vec<[Real; 2]>>> {
    let tape = Tape::inference();
    let mut out = Vec::with_capacity(scene.persons.len());
    for p in &scene.persons {
        if p.root.d <= 0.0 {
            return Err(Error::Scene("non-positive person depth".into()));
        }
        let joints = points_to_tensor(&p.joints);
        let d = Tensor::scalar(p.root.d);
        let k = project_weak_perspective_t(&tape, &joints, &d, &scene.camera);
        out.push(
            k.values()
                .chunks(2)
                .map(|c| [c[0], c[1]])
                .collect::<Vec<_>>(),
        );
    }
    Ok(out)
}

/// Scalar reference implementation of the weak-perspective projection:
/// u = cx + f*(X - Xr)/dr + f*Xr/dr, per coordinate.
pub fn project_weak_perspective_scalar(
    joints: &[[Real; 3]],
    root: &[Real; 3],
    cam: &Camera,
) -> Vec<[Real; 2]> {
    joints
        .iter()
        .map(|j| {
            [
                cam.cx + cam.focal * (j[0] - root[0]) / root[2] + cam.focal * root[0] / root[2],
                cam.cy + cam.focal * (j[1] - root[1]) / root[2] + cam.focal * root[1] / root[2],
            ]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Conversions.

pub fn points_to_tensor(points: &[[Real; 3]]) -> Tensor {
    Tensor::new(
        vec![points.len(), 3],
        points.iter().flatten().copied().collect(),
    )
}

pub fn tensor_to_points(t: &Tensor) -> Vec<[Real; 3]> {
    assert_eq!(t.shape()[1], 3);
    t.values().chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

pub fn bone_length_errors(pose: &[[Real; 3]], topo: &SkeletonTopology) -> Real {
    let mut worst: Real = 0.0;
    for (parent, child) in topo.limbs() {
        let d = [
            pose[child][0] - pose[parent][0],
            pose[child][1] - pose[parent][1],
            pose[child][2] - pose[parent][2],
        ];
        worst = worst.max((norm3(&d) - topo.bone_length(child)).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{default_skeleton, parse_skeleton, sample_local_pose};
    use crate::Rng;

    fn test_cam() -> Camera {
        Camera {
            focal: 180.0,
            cx: 111.5,
            cy: 111.5,
            ref_depth: 4.0,
        }
    }

    #[test]
    fn straight_chain_stacks_along_z() {
        let (topo, _) = parse_skeleton(
            "version 1\njoint pelvis -\njoint a pelvis 1.0 0 3.14159265 0 6.283185\n\
             joint b a 1.0 0 3.14159265 0 6.283185\n",
        )
        .unwrap();
        let p_l = LocalPose::new(vec![[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]).unwrap();
        let pose = forward_kinematics(&p_l, &topo).unwrap();
        assert_eq!(pose.0[0], [0.0, 0.0, 0.0]);
        for (got, want) in pose.0[1].iter().zip([0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in pose.0[2].iter().zip([0.0, 0.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bone_lengths_conserved_through_chain() {
        let (topo, limits) = default_skeleton();
        let mut rng = Rng::new(21);
        let cam = test_cam();
        for i in 0..100 {
            let p_l = sample_local_pose(&limits, &mut rng);
            let p_c = forward_kinematics(&p_l, &topo).unwrap();
            assert!(bone_length_errors(&p_c.0, &topo) < 1e-9);
            let c = RigidParams::from_angles(
                rng.range(0.0, 6.28),
                rng.range(0.0, 6.28),
                rng.range(0.0, 6.28),
            );
            let p_r = rigid_transform(&p_c, &c).unwrap();
            assert!(bone_length_errors(&p_r.0, &topo) < 1e-9);
            let root = Root {
                rx: rng.range(40.0, 180.0),
                ry: rng.range(40.0, 180.0),
                d: rng.range(2.0, 6.0),
            };
            let person = place_global(&p_r, root, &cam).unwrap();
            assert!(bone_length_errors(&person.joints, &topo) < 1e-9, "iter {i}");
        }
    }

    #[test]
    fn identity_pairs_are_identity() {
        let (topo, limits) = default_skeleton();
        let mut rng = Rng::new(3);
        let p_c = forward_kinematics(&sample_local_pose(&limits, &mut rng), &topo).unwrap();
        let p_r = rigid_transform(&p_c, &RigidParams::IDENTITY).unwrap();
        for (a, b) in p_c.0.iter().zip(&p_r.0) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ninety_degrees_about_vertical_maps_x_to_negative_z() {
        // Rotation about the middle (Y) axis only: (1,0,0) -> (0,0,-1).
        let c = RigidParams::from_angles(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        let m = c.matrix();
        let v = [1.0, 0.0, 0.0];
        let rotated: Vec<Real> = (0..3)
            .map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
            .collect();
        assert!((rotated[0]).abs() < 1e-12);
        assert!((rotated[1]).abs() < 1e-12);
        assert!((rotated[2] + 1.0).abs() < 1e-12);
        // And the tape path agrees with the explicit 3x3 oracle.
        let p_c = CanonicalPose(vec![[1.0, 0.0, 0.0]]);
        let p_r = rigid_transform(&p_c, &c).unwrap();
        assert!((p_r.0[0][0]).abs() < 1e-9);
        assert!((p_r.0[0][2] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_matrices_are_orthonormal_after_renormalization() {
        let mut rng = Rng::new(8);
        for _ in 0..200 {
            let raw: Vec<Real> = (0..6).map(|_| rng.range(-2.0, 2.0)).collect();
            let c = RigidParams([raw[0], raw[1], raw[2], raw[3], raw[4], raw[5]]);
            if c.validate().is_err() {
                continue;
            }
            let m = c.matrix();
            for r in 0..3 {
                for cidx in 0..3 {
                    let dot: Real = (0..3).map(|k| m[r][k] * m[cidx][k]).sum();
                    let want = if r == cidx { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn degenerate_pair_is_rejected() {
        let c = RigidParams([0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn root_at_principal_point_backprojects_to_axis() {
        let cam = test_cam();
        let p_r = RootRelativePose(vec![[0.0, 0.0, 0.0], [0.3, 0.1, -0.2]]);
        let person = place_global(
            &p_r,
            Root {
                rx: cam.cx,
                ry: cam.cy,
                d: 3.0,
            },
            &cam,
        )
        .unwrap();
        assert!((person.joints[0][0]).abs() < 1e-12);
        assert!((person.joints[0][1]).abs() < 1e-12);
        assert!((person.joints[0][2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pinhole_backprojection_hand_case() {
        // r_x = cx + f, d = 2 -> pelvis X = 2.
        let cam = test_cam();
        let p_r = RootRelativePose(vec![[0.0, 0.0, 0.0]]);
        let person = place_global(
            &p_r,
            Root {
                rx: cam.cx + cam.focal,
                ry: cam.cy,
                d: 2.0,
            },
            &cam,
        )
        .unwrap();
        assert!((person.joints[0][0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn placement_preserves_intra_person_differences() {
        let (topo, limits) = default_skeleton();
        let mut rng = Rng::new(12);
        let cam = test_cam();
        let p_c = forward_kinematics(&sample_local_pose(&limits, &mut rng), &topo).unwrap();
        let p_r = rigid_transform(&p_c, &RigidParams::from_angles(1.0, 2.0, 0.3)).unwrap();
        let person = place_global(
            &p_r,
            Root {
                rx: 80.0,
                ry: 120.0,
                d: 4.2,
            },
            &cam,
        )
        .unwrap();
        for a in 0..topo.num_joints() {
            for b in 0..topo.num_joints() {
                for k in 0..3 {
                    let before = p_r.0[a][k] - p_r.0[b][k];
                    let after = person.joints[a][k] - person.joints[b][k];
                    assert!((before - after).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn negative_depth_is_an_error() {
        let cam = test_cam();
        let p_r = RootRelativePose(vec![[0.0, 0.0, 0.0]]);
        assert!(place_global(
            &p_r,
            Root {
                rx: 0.0,
                ry: 0.0,
                d: -1.0
            },
            &cam
        )
        .is_err());
    }

    #[test]
    fn projection_matches_scalar_oracle() {
        let (topo, limits) = default_skeleton();
        let mut rng = Rng::new(77);
        let cam = test_cam();
        for _ in 0..50 {
            let p_c = forward_kinematics(&sample_local_pose(&limits, &mut rng), &topo).unwrap();
            let p_r = rigid_transform(
                &p_c,
                &RigidParams::from_angles(rng.range(0.0, 6.28), rng.range(0.0, 6.28), 0.0),
            )
            .unwrap();
            let root = Root {
                rx: rng.range(30.0, 190.0),
                ry: rng.range(30.0, 190.0),
                d: rng.range(2.0, 6.0),
            };
            let person = place_global(&p_r, root, &cam).unwrap();
            let scene = Scene {
                persons: vec![person.clone()],
                camera: cam,
                seed: 0,
            };
            let got = &project_weak_perspective(&scene).unwrap()[0];
            let want = project_weak_perspective_scalar(&person.joints, &person.joints[0], &cam);
            for (g, w) in got.iter().zip(&want) {
                assert!((g[0] - w[0]).abs() < 1e-9 && (g[1] - w[1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pelvis_on_axis_projects_to_principal_point() {
        let cam = test_cam();
        let scene = Scene {
            persons: vec![Person {
                joints: vec![[0.0, 0.0, cam.ref_depth]],
                root: Root {
                    rx: cam.cx,
                    ry: cam.cy,
                    d: cam.ref_depth,
                },
                rigid: None,
                phi: None,
            }],
            camera: cam,
            seed: 0,
        };
        let k = project_weak_perspective(&scene).unwrap();
        assert!((k[0][0][0] - cam.cx).abs() < 1e-12);
        assert!((k[0][0][1] - cam.cy).abs() < 1e-12);
    }

    #[test]
    fn doubling_depth_halves_projected_extents() {
        let (topo, limits) = default_skeleton();
        let mut rng = Rng::new(31);
        let cam = test_cam();
        let p_c = forward_kinematics(&sample_local_pose(&limits, &mut rng), &topo).unwrap();
        let p_r = rigid_transform(&p_c, &RigidParams::from_angles(0.7, 1.9, 0.1)).unwrap();
        let near = place_global(
            &p_r,
            Root {
                rx: 100.0,
                ry: 90.0,
                d: 2.5,
            },
            &cam,
        )
        .unwrap();
        let far = place_global(
            &p_r,
            Root {
                rx: 100.0,
                ry: 90.0,
                d: 5.0,
            },
            &cam,
        )
        .unwrap();
        let scene = |p: Person| Scene {
            persons: vec![p],
            camera: cam,
            seed: 0,
        };
        let kn = &project_weak_perspective(&scene(near)).unwrap()[0];
        let kf = &project_weak_perspective(&scene(far)).unwrap()[0];
        for j in 0..topo.num_joints() {
            for a in 0..2 {
                let extent_near = kn[j][a] - kn[0][a];
                let extent_far = kf[j][a] - kf[0][a];
                assert!((extent_near - 2.0 * extent_far).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flip_equivariance_of_projection_is_exact() {
        // Mirror the scene about the principal plane (X -> -X), project,
        // and compare with projecting then flipping u -> 2*cx - u.
        let (topo, limits) = default_skeleton();
        let mut rng = Rng::new(55);
        let cam = test_cam();
        for _ in 0..100 {
            let p_c = forward_kinematics(&sample_local_pose(&limits, &mut rng), &topo).unwrap();
            let p_r = rigid_transform(
                &p_c,
                &RigidParams::from_angles(rng.range(0.0, 6.28), rng.range(0.0, 6.28), 0.2),
            )
            .unwrap();
            let root = Root {
                rx: rng.range(30.0, 190.0),
                ry: rng.range(30.0, 190.0),
                d: rng.range(2.0, 6.0),
            };
            let person = place_global(&p_r, root, &cam).unwrap();
            let mut mirrored = person.clone();
            for j in mirrored.joints.iter_mut() {
                j[0] = -j[0];
            }
            mirrored.root.rx = 2.0 * cam.cx - mirrored.root.rx;
            let scene = Scene {
                persons: vec![person],
                camera: cam,
                seed: 0,
            };
            let mscene = Scene {
                persons: vec![mirrored],
                camera: cam,
                seed: 0,
            };
            let k = &project_weak_perspective(&scene).unwrap()[0];
            let km = &project_weak_perspective(&mscene).unwrap()[0];
            for j in 0..topo.num_joints() {
                assert!((km[j][0] - (2.0 * cam.cx - k[j][0])).abs() < 1e-9);
                assert!((km[j][1] - k[j][1]).abs() < 1e-9);
            }
        }
    }
}
