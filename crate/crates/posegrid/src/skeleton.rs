//! Skeleton topology, per-joint angle limit tables, and uniform sampling of
//! local parent-relative unit-vector poses.

use crate::{Error, Real, Result, Rng};

const TAU: Real = std::f64::consts::TAU;
const UNIT_TOL: Real = 1e-6;
/// Slack applied to range membership so sampled boundary values round-trip.
const RANGE_EPS: Real = 1e-9;

/// Joint tree with fixed bone lengths. Joint 0 is always the root (pelvis);
/// every non-root joint contributes one limb (parent -> joint edge).
#[derive(Debug, Clone)]
pub struct SkeletonTopology {
    names: Vec<String>,
    parents: Vec<isize>,
    bone_lengths: Vec<Real>,
}

impl SkeletonTopology {
    pub fn new(names: Vec<String>, parents: Vec<isize>, bone_lengths: Vec<Real>) -> Result<Self> {
        let topo = SkeletonTopology {
            names,
            parents,
            bone_lengths,
        };
        topo.validate()?;
        Ok(topo)
    }

    fn validate(&self) -> Result<()> {
        let n = self.names.len();
        if n < 2 {
            return Err(Error::Skeleton("at least two joints required".into()));
        }
        if self.parents.len() != n || self.bone_lengths.len() != n {
            return Err(Error::Skeleton("field lengths disagree".into()));
        }
        let roots = self.parents.iter().filter(|&&p| p == -1).count();
        if roots != 1 || self.parents[0] != -1 {
            return Err(Error::Skeleton(
                "exactly one root required, at index 0".into(),
            ));
        }
        for (j, &p) in self.parents.iter().enumerate().skip(1) {
            if p < 0 || p as usize >= n {
                return Err(Error::Skeleton(format!("joint {j} has invalid parent {p}")));
            }
            if self.bone_lengths[j] <= 0.0 {
                return Err(Error::Skeleton(format!(
                    "joint {} has non-positive bone length",
                    self.names[j]
                )));
            }
            // Walk to the root; a cycle would exceed n hops.
            let mut cur = p;
            let mut hops = 0;
            while cur != -1 {
                cur = self.parents[cur as usize];
                hops += 1;
                if hops > n {
                    return Err(Error::Skeleton("parent links contain a cycle".into()));
                }
            }
        }
        Ok(())
    }

    pub fn num_joints(&self) -> usize {
        self.names.len()
    }

    pub fn num_limbs(&self) -> usize {
        self.names.len() - 1
    }

    pub fn parent(&self, j: usize) -> isize {
        self.parents[j]
    }

    pub fn bone_length(&self, j: usize) -> Real {
        self.bone_lengths[j]
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Directed parent->child edges, one per non-root joint, in joint order.
    pub fn limbs(&self) -> Vec<(usize, usize)> {
        (1..self.num_joints())
            .map(|j| (self.parents[j] as usize, j))
            .collect()
    }

    /// Joint indices ordered so parents precede children.
    pub fn topo_order(&self) -> Vec<usize> {
        let n = self.num_joints();
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        order.push(0);
        placed[0] = true;
        while order.len() < n {
            for j in 1..n {
                if !placed[j] && placed[self.parents[j] as usize] {
                    order.push(j);
                    placed[j] = true;
                }
            }
        }
        order
    }

    /// (left, right) joint index pairs derived from `l_`/`r_` name prefixes.
    pub fn mirror_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (j, name) in self.names.iter().enumerate() {
            if let Some(rest) = name.strip_prefix("l_") {
                if let Some(r) = self.joint_index(&format!("r_{rest}")) {
                    pairs.push((j, r));
                }
            }
        }
        pairs
    }

    /// Row in a [`LocalPose`] holding the unit vector for joint `j`.
    pub fn pose_row(&self, j: usize) -> usize {
        assert!(j > 0, "root has no local vector");
        j - 1
    }
}

/// Closed polar/azimuth interval for one joint, radians, in the parent
/// frame. `gamma.0` may be negative so ranges can cross zero; membership is
/// modulo 2*pi.
#[derive(Debug, Clone, Copy)]
pub struct AngleRange {
    pub theta: (Real, Real),
    pub gamma: (Real, Real),
}

impl AngleRange {
    pub fn validate(&self) -> Result<()> {
        let (t1, t2) = self.theta;
        let (g1, g2) = self.gamma;
        if !(0.0 <= t1 && t1 <= t2 && t2 <= std::f64::consts::PI) {
            return Err(Error::Skeleton(format!("bad polar range [{t1}, {t2}]")));
        }
        if !(g1 <= g2 && (0.0..=TAU).contains(&g2) && g1 >= -TAU && g2 - g1 <= TAU) {
            return Err(Error::Skeleton(format!("bad azimuth range [{g1}, {g2}]")));
        }
        Ok(())
    }

    pub fn contains_theta(&self, theta: Real) -> bool {
        theta >= self.theta.0 - RANGE_EPS && theta <= self.theta.1 + RANGE_EPS
    }

    pub fn contains_gamma(&self, gamma: Real) -> bool {
        let width = self.gamma.1 - self.gamma.0;
        let offset = (gamma - self.gamma.0).rem_euclid(TAU);
        offset <= width + RANGE_EPS || offset >= TAU - RANGE_EPS
    }
}

/// Per non-root joint angle limits, aligned with topology joint indices
/// (entry 0 is the root and carries no range).
#[derive(Debug, Clone)]
pub struct JointLimits {
    ranges: Vec<Option<AngleRange>>,
}

impl JointLimits {
    pub fn new(ranges: Vec<Option<AngleRange>>) -> Result<Self> {
        for r in ranges.iter().flatten() {
            r.validate()?;
        }
        if ranges.is_empty() || ranges[0].is_some() {
            return Err(Error::Skeleton("root entry must carry no range".into()));
        }
        if ranges.iter().skip(1).any(|r| r.is_none()) {
            return Err(Error::Skeleton("every non-root joint needs a range".into()));
        }
        Ok(JointLimits { ranges })
    }

    pub fn range(&self, joint: usize) -> &AngleRange {
        self.ranges[joint].as_ref().expect("non-root joint")
    }

    pub fn num_joints(&self) -> usize {
        self.ranges.len()
    }
}

/// Unit direction vectors for every non-root joint, expressed in its
/// parent-relative local frame. Row `j - 1` belongs to joint `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPose(Vec<[Real; 3]>);

impl LocalPose {
    pub fn new(vectors: Vec<[Real; 3]>) -> Result<Self> {
        for (i, v) in vectors.iter().enumerate() {
            let n = norm3(v);
            if (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::Pose(format!("vector {i} has norm {n}")));
            }
        }
        Ok(LocalPose(vectors))
    }

    /// Normalize rows to exact unit length and wrap. Used by producers whose
    /// output is architecturally normalized already.
    pub fn from_raw_normalized(vectors: Vec<[Real; 3]>) -> Self {
        let vs = vectors
            .into_iter()
            .map(|v| {
                let n = norm3(&v).max(1e-12);
                [v[0] / n, v[1] / n, v[2] / n]
            })
            .collect();
        LocalPose(vs)
    }

    pub fn vectors(&self) -> &[[Real; 3]] {
        &self.0
    }

    pub fn num_vectors(&self) -> usize {
        self.0.len()
    }

    pub fn flat(&self) -> Vec<Real> {
        self.0.iter().flatten().copied().collect()
    }

    pub fn from_flat(flat: &[Real]) -> Result<Self> {
        if flat.len() % 3 != 0 {
            return Err(Error::Pose("flat pose length not divisible by 3".into()));
        }
        LocalPose::new(flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
    }
}

pub fn norm3(v: &[Real; 3]) -> Real {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Unit vector for polar angle `theta` (from +z) and azimuth `gamma`
/// (from +x toward +y).
pub fn unit_from_angles(theta: Real, gamma: Real) -> [Real; 3] {
    [
        theta.sin() * gamma.cos(),
        theta.sin() * gamma.sin(),
        theta.cos(),
    ]
}

/// Recover (theta, gamma in [0, 2*pi)) from a unit vector.
pub fn angles_from_unit(v: &[Real; 3]) -> (Real, Real) {
    let theta = v[2].clamp(-1.0, 1.0).acos();
    let gamma = v[1].atan2(v[0]).rem_euclid(TAU);
    (theta, gamma)
}

/// Draw each joint's (theta, gamma) uniformly from its range.
pub fn sample_local_pose(limits: &JointLimits, rng: &mut Rng) -> LocalPose {
    let mut vectors = Vec::with_capacity(limits.num_joints() - 1);
    for j in 1..limits.num_joints() {
        let r = limits.range(j);
        let theta = rng.range(r.theta.0, r.theta.1);
        let gamma = rng.range(r.gamma.0, r.gamma.1);
        vectors.push(unit_from_angles(theta, gamma));
    }
    LocalPose(vectors)
}

/// Per-joint range membership for a pose. Non-root joint `j` maps to entry
/// `j - 1`. Azimuth is unconstrained where the polar angle is degenerate
/// (sin theta ~ 0), since gamma is then unrecoverable.
#[derive(Debug, Clone)]
pub struct LimitsReport {
    pub per_joint: Vec<bool>,
    pub all: bool,
}

pub fn check_limits(pose: &LocalPose, limits: &JointLimits) -> Result<LimitsReport> {
    if pose.num_vectors() != limits.num_joints() - 1 {
        return Err(Error::Pose(format!(
            "pose has {} vectors, limits cover {}",
            pose.num_vectors(),
            limits.num_joints() - 1
        )));
    }
    let mut per_joint = Vec::with_capacity(pose.num_vectors());
    for (row, v) in pose.vectors().iter().enumerate() {
        let n = norm3(v);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::Pose(format!("vector {row} has norm {n}")));
        }
        let (theta, gamma) = angles_from_unit(v);
        let r = limits.range(row + 1);
        let gamma_ok = theta.sin().abs() < RANGE_EPS || r.contains_gamma(gamma);
        per_joint.push(r.contains_theta(theta) && gamma_ok);
    }
    let all = per_joint.iter().all(|&b| b);
    Ok(LimitsReport { per_joint, all })
}

/// Parse the structured-text skeleton definition (see `data/skeleton.txt`).
pub fn parse_skeleton(text: &str) -> Result<(SkeletonTopology, JointLimits)> {
    let mut version: Option<u32> = None;
    let mut names: Vec<String> = Vec::new();
    let mut parent_names: Vec<Option<String>> = Vec::new();
    let mut lengths: Vec<Real> = Vec::new();
    let mut ranges: Vec<Option<AngleRange>> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Skeleton(format!("line {}: {msg}", lineno + 1));
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "version" => {
                if tokens.len() != 2 || version.is_some() {
                    return Err(bad("malformed or duplicate version line"));
                }
                version = Some(
                    tokens[1]
                        .parse()
                        .map_err(|_| bad("version must be an integer"))?,
                );
            }
            "joint" => {
                let parse_f = |s: &str| -> Result<Real> {
                    s.parse().map_err(|_| bad(&format!("bad number `{s}`")))
                };
                match tokens.len() {
                    3 if tokens[2] == "-" => {
                        names.push(tokens[1].to_string());
                        parent_names.push(None);
                        lengths.push(0.0);
                        ranges.push(None);
                    }
                    8 => {
                        names.push(tokens[1].to_string());
                        parent_names.push(Some(tokens[2].to_string()));
                        lengths.push(parse_f(tokens[3])?);
                        ranges.push(Some(AngleRange {
                            theta: (parse_f(tokens[4])?, parse_f(tokens[5])?),
                            gamma: (parse_f(tokens[6])?, parse_f(tokens[7])?),
                        }));
                    }
                    _ => return Err(bad("joint line needs 3 (root) or 8 fields")),
                }
                let name = names.last().unwrap();
                if names[..names.len() - 1].contains(name) {
                    return Err(bad(&format!("duplicate joint `{name}`")));
                }
            }
            other => {
                return Err(bad(&format!("unknown directive `{other}`")));
            }
        }
    }

    match version {
        Some(1) => {}
        Some(v) => return Err(Error::Skeleton(format!("unsupported version {v}"))),
        None => return Err(Error::Skeleton("missing version line".into())),
    }
    let parents: Vec<isize> = parent_names
        .iter()
        .map(|p| match p {
            None => Ok(-1),
            Some(name) => names
                .iter()
                .position(|n| n == name)
                .map(|i| i as isize)
                .ok_or_else(|| Error::Skeleton(format!("unknown parent `{name}`"))),
        })
        .collect::<Result<_>>()?;

    let topo = SkeletonTopology::new(names, parents, lengths)?;
    let limits = JointLimits::new(ranges)?;
    if limits.num_joints() != topo.num_joints() {
        return Err(Error::Skeleton("limit table does not cover topology".into()));
    }
    Ok((topo, limits))
}

const DEFAULT_SKELETON: &str = include_str!("../data/skeleton.txt");

/// The 15-joint skeleton shipped with the crate: pelvis, neck, head, and
/// left/right shoulder, elbow, wrist, hip, knee, ankle. 14 limbs; standard
/// anthropometric bone lengths summing to roughly 1.7 m of stature.
pub fn default_skeleton() -> (SkeletonTopology, JointLimits) {
    parse_skeleton(DEFAULT_SKELETON).expect("embedded skeleton table is valid")
}
