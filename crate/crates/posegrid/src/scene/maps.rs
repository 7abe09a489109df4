//! Heatmap + part-affinity-field rasterization onto the 28x28 map grid.

use super::Keypoints2D;
use crate::skeleton::SkeletonTopology;
use crate::{pixel_to_cell, Error, Real, Result, Tensor, MAP_SIZE};

pub const HM_CHANNELS: usize = 15;
pub const PAF_CHANNELS: usize = 28;
pub const MAP_CHANNELS: usize = HM_CHANNELS + PAF_CHANNELS;

#[derive(Debug, Clone, Copy)]
pub struct MapConfig {
    /// Gaussian bump width in grid cells.
    pub sigma: Real,
    /// Half-width of the PAF support band in grid cells.
    pub paf_width: Real,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            sigma: 0.8,
            paf_width: 1.0,
        }
    }
}

/// 28x28x43 stack: per-joint heatmaps (max over persons) followed by two
/// PAF channels per limb (x then y, averaged over contributing persons).
#[derive(Debug, Clone, PartialEq)]
pub struct MapStack {
    values: Vec<Real>,
}

impl MapStack {
    pub fn from_values(values: Vec<Real>) -> Result<Self> {
        if values.len() != MAP_SIZE * MAP_SIZE * MAP_CHANNELS {
            return Err(Error::Scene("map stack size mismatch".into()));
        }
        let m = MapStack { values };
        m.validate()?;
        Ok(m)
    }

    pub fn values(&self) -> &[Real] {
        &self.values
    }

    pub fn at(&self, y: usize, x: usize, c: usize) -> Real {
        self.values[(y * MAP_SIZE + x) * MAP_CHANNELS + c]
    }

    /// One channel as a dense [MAP_SIZE * MAP_SIZE] plane.
    pub fn channel(&self, c: usize) -> Vec<Real> {
        (0..MAP_SIZE * MAP_SIZE)
            .map(|i| self.values[i * MAP_CHANNELS + c])
            .collect()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![MAP_SIZE, MAP_SIZE, MAP_CHANNELS],
            self.values.clone(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..MAP_SIZE * MAP_SIZE {
            for c in 0..HM_CHANNELS {
                let v = self.values[i * MAP_CHANNELS + c];
                if !(0.0..=1.0 + 1e-9).contains(&v) {
                    return Err(Error::Scene(format!("heatmap value {v} out of [0,1]")));
                }
            }
            for limb in 0..PAF_CHANNELS / 2 {
                let x = self.values[i * MAP_CHANNELS + HM_CHANNELS + 2 * limb];
                let y = self.values[i * MAP_CHANNELS + HM_CHANNELS + 2 * limb + 1];
                if (x * x + y * y).sqrt() > 1.0 + 1e-6 {
                    return Err(Error::Scene("PAF vector norm exceeds 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Rasterize keypoints into the heatmap+PAF stack. Keypoints whose cell
/// coordinates fall far outside the grid are clipped (skipped); invisible
/// joints never contribute.
pub fn rasterize_maps(k: &Keypoints2D, topo: &SkeletonTopology, cfg: &MapConfig) -> MapStack {
    assert_eq!(topo.num_joints(), HM_CHANNELS, "map layout is 15-joint");
    let cells = MAP_SIZE * MAP_SIZE;
    let mut values = vec![0.0; cells * MAP_CHANNELS];

    // Heatmaps: max over persons of Gaussian bumps.
    let margin = 5.0 * cfg.sigma;
    for j in 0..HM_CHANNELS {
        for person in &k.persons {
            if !person.vis[j] {
                continue;
            }
            let cx = pixel_to_cell(person.pts[j][0]);
            let cy = pixel_to_cell(person.pts[j][1]);
            if cx < -margin
                || cx > MAP_SIZE as Real - 1.0 + margin
                || cy < -margin
                || cy > MAP_SIZE as Real - 1.0 + margin
            {
                continue;
            }
            for y in 0..MAP_SIZE {
                for x in 0..MAP_SIZE {
                    let d2 = (y as Real - cy).powi(2) + (x as Real - cx).powi(2);
                    let g = (-d2 / (2.0 * cfg.sigma * cfg.sigma)).exp();
                    let slot = &mut values[(y * MAP_SIZE + x) * MAP_CHANNELS + j];
                    if g > *slot {
                        *slot = g;
                    }
                }
            }
        }
    }

    // PAFs: unit limb direction painted on the segment band, averaged over
    // contributing persons.
    for (limb, (parent, child)) in topo.limbs().into_iter().enumerate() {
        let mut sum = vec![(0.0, 0.0); cells];
        let mut count = vec![0u32; cells];
        for person in &k.persons {
            if !person.vis[parent] || !person.vis[child] {
                continue;
            }
            let p0 = (
                pixel_to_cell(person.pts[parent][0]),
                pixel_to_cell(person.pts[parent][1]),
            );
            let p1 = (
                pixel_to_cell(person.pts[child][0]),
                pixel_to_cell(person.pts[child][1]),
            );
            let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
            let len = (dx * dx + dy * dy).sqrt();
            if len < 1e-9 {
                continue;
            }
            let dir = (dx / len, dy / len);
            for y in 0..MAP_SIZE {
                for x in 0..MAP_SIZE {
                    let vx = x as Real - p0.0;
                    let vy = y as Real - p0.1;
                    let proj = vx * dir.0 + vy * dir.1;
                    let perp = (vx * dir.1 - vy * dir.0).abs();
                    if proj >= 0.0 && proj <= len && perp <= cfg.paf_width {
                        let i = y * MAP_SIZE + x;
                        sum[i].0 += dir.0;
                        sum[i].1 += dir.1;
                        count[i] += 1;
                    }
                }
            }
        }
        for i in 0..cells {
            if count[i] > 0 {
                values[i * MAP_CHANNELS + HM_CHANNELS + 2 * limb] = sum[i].0 / count[i] as Real;
                values[i * MAP_CHANNELS + HM_CHANNELS + 2 * limb + 1] = sum[i].1 / count[i] as Real;
            }
        }
    }

    MapStack { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell_to_pixel;
    use crate::scene::PersonKeypoints;
    use crate::skeleton::default_skeleton;

    fn empty_person() -> PersonKeypoints {
        PersonKeypoints {
            pts: vec![[0.0, 0.0]; 15],
            vis: vec![false; 15],
        }
    }

    #[test]
    fn single_joint_at_cell_center_peaks_at_one() {
        let (topo, _) = default_skeleton();
        let mut person = empty_person();
        person.pts[0] = [cell_to_pixel(10.0), cell_to_pixel(12.0)];
        person.vis[0] = true;
        let k = Keypoints2D {
            persons: vec![person],
        };
        let m = rasterize_maps(&k, &topo, &MapConfig::default());
        assert!((m.at(12, 10, 0) - 1.0).abs() < 1e-12);
        // Argmax sits at the quantized keypoint.
        let plane = m.channel(0);
        let argmax = plane
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 12 * MAP_SIZE + 10);
        m.validate().unwrap();
    }

    #[test]
    fn horizontal_limb_paints_unit_x_on_segment_and_zero_far_away() {
        let (topo, _) = default_skeleton();
        // Limb 0 is pelvis(0) -> neck(1).
        let mut person = empty_person();
        person.pts[0] = [cell_to_pixel(5.0), cell_to_pixel(14.0)];
        person.pts[1] = [cell_to_pixel(15.0), cell_to_pixel(14.0)];
        person.vis[0] = true;
        person.vis[1] = true;
        let k = Keypoints2D {
            persons: vec![person],
        };
        let m = rasterize_maps(&k, &topo, &MapConfig::default());
        let (cx, cy) = (HM_CHANNELS, HM_CHANNELS + 1);
        assert!((m.at(14, 10, cx) - 1.0).abs() < 1e-12);
        assert!(m.at(14, 10, cy).abs() < 1e-12);
        assert!(m.at(3, 25, cx).abs() < 1e-12);
        assert!(m.at(3, 25, cy).abs() < 1e-12);
        m.validate().unwrap();
    }

    #[test]
    fn opposite_overlapping_limbs_average_below_unit_norm() {
        let (topo, _) = default_skeleton();
        let mut a = empty_person();
        a.pts[0] = [cell_to_pixel(5.0), cell_to_pixel(10.0)];
        a.pts[1] = [cell_to_pixel(15.0), cell_to_pixel(10.0)];
        a.vis[0] = true;
        a.vis[1] = true;
        // Same segment, opposite direction, slightly tilted so the average
        // is strictly inside the unit disc.
        let mut b = empty_person();
        b.pts[0] = [cell_to_pixel(15.0), cell_to_pixel(10.5)];
        b.pts[1] = [cell_to_pixel(5.0), cell_to_pixel(9.5)];
        b.vis[0] = true;
        b.vis[1] = true;
        let k = Keypoints2D {
            persons: vec![a.clone(), b.clone()],
        };
        let m = rasterize_maps(&k, &topo, &MapConfig::default());
        // Direct average oracle at a mid-segment cell covered by both.
        let ka = Keypoints2D { persons: vec![a] };
        let kb = Keypoints2D { persons: vec![b] };
        let ma = rasterize_maps(&ka, &topo, &MapConfig::default());
        let mb = rasterize_maps(&kb, &topo, &MapConfig::default());
        let (cx, cy) = (HM_CHANNELS, HM_CHANNELS + 1);
        let both = (10usize, 10usize);
        assert!(ma.at(both.0, both.1, cx).abs() > 0.9);
        assert!(mb.at(both.0, both.1, cx).abs() > 0.9);
        let want_x = (ma.at(both.0, both.1, cx) + mb.at(both.0, both.1, cx)) / 2.0;
        let want_y = (ma.at(both.0, both.1, cy) + mb.at(both.0, both.1, cy)) / 2.0;
        assert!((m.at(both.0, both.1, cx) - want_x).abs() < 1e-12);
        assert!((m.at(both.0, both.1, cy) - want_y).abs() < 1e-12);
        let norm = (m.at(both.0, both.1, cx).powi(2) + m.at(both.0, both.1, cy).powi(2)).sqrt();
        assert!(norm < 1.0);
        m.validate().unwrap();
    }

    #[test]
    fn person_order_does_not_matter() {
        let (topo, limits) = default_skeleton();
        let cam = crate::kinematics::Camera {
            focal: 180.0,
            cx: 111.5,
            cy: 111.5,
            ref_depth: 4.0,
        };
        let room = super::super::RoomConfig {
            capacity: (3, 3),
            ..Default::default()
        };
        let mut rng = crate::Rng::new(17);
        let scene = super::super::synthesize_scene(
            &super::super::PoseSource::Sampler(&limits),
            &topo,
            &room,
            &cam,
            0,
            &mut rng,
        )
        .unwrap();
        let k = super::super::scene_keypoints(&scene).unwrap();
        let mut rev = k.clone();
        rev.persons.reverse();
        let a = rasterize_maps(&k, &topo, &MapConfig::default());
        let b = rasterize_maps(&rev, &topo, &MapConfig::default());
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn off_grid_keypoints_are_clipped() {
        let (topo, _) = default_skeleton();
        let mut person = empty_person();
        person.pts[0] = [-4000.0, -4000.0];
        person.vis[0] = true;
        let k = Keypoints2D {
            persons: vec![person],
        };
        let m = rasterize_maps(&k, &topo, &MapConfig::default());
        assert!(m.values().iter().all(|&v| v == 0.0));
    }
}
