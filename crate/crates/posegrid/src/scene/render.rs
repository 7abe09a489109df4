//! Anti-aliased stick-figure rendering over randomized backgrounds, the
//! desk-scale stand-in for a real unpaired image corpus.

use crate::kinematics::Scene;
use crate::scene::scene_keypoints;
use crate::skeleton::SkeletonTopology;
use crate::{Real, Result, Rng, Tensor, IMG_SIZE};

/// Fixed per-person-index colors, shared with the SVG exporter.
pub const PALETTE: [[Real; 3]; 8] = [
    [0.92, 0.30, 0.24],
    [0.18, 0.55, 0.85],
    [0.22, 0.75, 0.35],
    [0.95, 0.72, 0.18],
    [0.65, 0.35, 0.80],
    [0.20, 0.75, 0.75],
    [0.90, 0.45, 0.65],
    [0.80, 0.60, 0.35],
];

#[derive(Debug, Clone)]
pub struct StickStyle {
    /// Limb capsule radius in meters (projected per person depth).
    pub limb_radius_m: Real,
    pub joint_radius_m: Real,
    /// Uniform background base-color range and per-pixel noise amplitude.
    pub bg_lo: Real,
    pub bg_hi: Real,
    pub bg_noise: Real,
}

impl Default for StickStyle {
    fn default() -> Self {
        StickStyle {
            limb_radius_m: 0.045,
            joint_radius_m: 0.06,
            bg_lo: 0.08,
            bg_hi: 0.45,
            bg_noise: 0.03,
        }
    }
}

/// 224x224x3 image, channels last, values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    values: Vec<Real>,
}

impl RenderedImage {
    pub fn values(&self) -> &[Real] {
        &self.values
    }

    pub fn pixel(&self, y: usize, x: usize) -> [Real; 3] {
        let i = (y * IMG_SIZE + x) * 3;
        [self.values[i], self.values[i + 1], self.values[i + 2]]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![IMG_SIZE, IMG_SIZE, 3], self.values.clone())
    }

    pub fn from_values(values: Vec<Real>) -> Result<Self> {
        if values.len() != IMG_SIZE * IMG_SIZE * 3 {
            return Err(crate::Error::Scene("image size mismatch".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(crate::Error::Scene("image value out of [0,1]".into()));
        }
        Ok(RenderedImage { values })
    }
}

/// Flat random base color plus per-pixel noise, clamped to [0,1].
pub fn render_background(style: &StickStyle, rng: &mut Rng) -> RenderedImage {
    let base = [
        rng.range(style.bg_lo, style.bg_hi),
        rng.range(style.bg_lo, style.bg_hi),
        rng.range(style.bg_lo, style.bg_hi),
    ];
    let mut values = Vec::with_capacity(IMG_SIZE * IMG_SIZE * 3);
    for _ in 0..IMG_SIZE * IMG_SIZE {
        for c in base {
            values.push((c + rng.range(-style.bg_noise, style.bg_noise)).clamp(0.0, 1.0));
        }
    }
    RenderedImage { values }
}

fn blend(img: &mut [Real], y: usize, x: usize, color: &[Real; 3], cov: Real) {
    let i = (y * IMG_SIZE + x) * 3;
    for c in 0..3 {
        img[i + c] = (cov * color[c] + (1.0 - cov) * img[i + c]).clamp(0.0, 1.0);
    }
}

fn draw_capsule(img: &mut [Real], a: [Real; 2], b: [Real; 2], r: Real, color: &[Real; 3]) {
    let x_lo = (a[0].min(b[0]) - r - 1.0).floor().max(0.0) as usize;
    let x_hi = (a[0].max(b[0]) + r + 1.0).ceil().min(IMG_SIZE as Real - 1.0) as usize;
    let y_lo = (a[1].min(b[1]) - r - 1.0).floor().max(0.0) as usize;
    let y_hi = (a[1].max(b[1]) + r + 1.0).ceil().min(IMG_SIZE as Real - 1.0) as usize;
    if x_lo > x_hi || y_lo > y_hi {
        return;
    }
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let (px, py) = (x as Real - a[0], y as Real - a[1]);
            let t = if len2 > 1e-12 {
                ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (ex, ey) = (px - t * dx, py - t * dy);
            let dist = (ex * ex + ey * ey).sqrt();
            let cov = (r + 0.5 - dist).clamp(0.0, 1.0);
            if cov > 0.0 {
                blend(img, y, x, color, cov);
            }
        }
    }
}

/// Painter's-order stick figures: persons drawn far-to-near so nearer
/// persons overdraw, limbs as anti-aliased capsules plus joint discs.
/// Deterministic under the caller's rng.
pub fn render_stickfigure(
    scene: &Scene,
    topo: &SkeletonTopology,
    style: &StickStyle,
    rng: &mut Rng,
) -> Result<RenderedImage> {
    let mut image = render_background(style, rng);
    let keypoints = scene_keypoints(scene)?;

    let mut order: Vec<usize> = (0..scene.persons.len()).collect();
    order.sort_by(|&a, &b| {
        scene.persons[b]
            .root
            .d
            .partial_cmp(&scene.persons[a].root.d)
            .unwrap()
            .then(a.cmp(&b))
    });

    for &pi in &order {
        let person = &scene.persons[pi];
        let pts = &keypoints.persons[pi].pts;
        let color = &PALETTE[pi % PALETTE.len()];
        let limb_r = style.limb_radius_m * scene.camera.focal / person.root.d;
        let joint_r = style.joint_radius_m * scene.camera.focal / person.root.d;
        for (parent, child) in topo.limbs() {
            draw_capsule(&mut image.values, pts[parent], pts[child], limb_r, color);
        }
        for p in pts {
            draw_capsule(&mut image.values, *p, *p, joint_r, color);
        }
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{Camera, Person, Root};
    use crate::scene::{synthesize_scene, PoseSource, RoomConfig};
    use crate::skeleton::default_skeleton;

    fn cam() -> Camera {
        Camera {
            focal: 180.0,
            cx: 111.5,
            cy: 111.5,
            ref_depth: 4.0,
        }
    }

    #[test]
    fn background_is_pure_base_plus_noise_and_deterministic() {
        let style = StickStyle::default();
        let a = render_background(&style, &mut Rng::new(5));
        let b = render_background(&style, &mut Rng::new(5));
        assert_eq!(a, b);
        // All pixels near one shared base color.
        let mut rng = Rng::new(5);
        let base = [
            rng.range(style.bg_lo, style.bg_hi),
            rng.range(style.bg_lo, style.bg_hi),
            rng.range(style.bg_lo, style.bg_hi),
        ];
        for y in (0..IMG_SIZE).step_by(13) {
            for x in (0..IMG_SIZE).step_by(13) {
                let px = a.pixel(y, x);
                for c in 0..3 {
                    assert!((px[c] - base[c]).abs() <= style.bg_noise + 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_person_inks_all_14_segments() {
        let (topo, limits) = default_skeleton();
        let room = RoomConfig {
            capacity: (1, 1),
            depth: (2.5, 3.5),
            ..RoomConfig::default()
        };
        let mut rng = Rng::new(11);
        let scene = synthesize_scene(
            &PoseSource::Sampler(&limits),
            &topo,
            &room,
            &cam(),
            0,
            &mut rng.derive(0),
        )
        .unwrap();
        let style = StickStyle::default();
        let img = render_stickfigure(&scene, &topo, &style, &mut Rng::new(77)).unwrap();
        let bg = render_background(&style, &mut Rng::new(77));
        // Pixel-trace oracle: each limb midpoint pixel differs from the
        // untouched background render.
        let k = scene_keypoints(&scene).unwrap();
        let mut inked = 0;
        for (parent, child) in topo.limbs() {
            let mid = [
                (k.persons[0].pts[parent][0] + k.persons[0].pts[child][0]) / 2.0,
                (k.persons[0].pts[parent][1] + k.persons[0].pts[child][1]) / 2.0,
            ];
            let (x, y) = (mid[0].round() as usize, mid[1].round() as usize);
            if x < IMG_SIZE && y < IMG_SIZE && img.pixel(y, x) != bg.pixel(y, x) {
                inked += 1;
            }
        }
        assert_eq!(inked, 14);
    }

    #[test]
    fn nearer_person_overdraws_farther_at_intersection() {
        let (topo, _) = default_skeleton();
        let camera = cam();
        // Two single-joint stand-ins sharing the projected pelvis pixel:
        // use full skeletons placed on the principal axis at two depths.
        let make = |d: Real| {
            let joints = vec![[0.0, 0.0, d]; 15];
            Person {
                joints,
                root: Root {
                    rx: camera.cx,
                    ry: camera.cy,
                    d,
                },
                rigid: None,
                phi: None,
            }
        };
        let scene = Scene {
            persons: vec![make(2.0), make(5.0)],
            camera,
            seed: 0,
        };
        let style = StickStyle::default();
        let img = render_stickfigure(&scene, &topo, &style, &mut Rng::new(3)).unwrap();
        // The shared pixel must carry person 0's palette color (nearer).
        let px = img.pixel(camera.cy as usize, camera.cx as usize);
        for c in 0..3 {
            assert!((px[c] - PALETTE[0][c]).abs() < 1e-9);
        }
    }

    #[test]
    fn rendering_is_bit_deterministic() {
        let (topo, limits) = default_skeleton();
        let room = RoomConfig::default();
        let mut rng = Rng::new(21);
        let scene = synthesize_scene(
            &PoseSource::Sampler(&limits),
            &topo,
            &room,
            &cam(),
            0,
            &mut rng,
        )
        .unwrap();
        let style = StickStyle::default();
        let a = render_stickfigure(&scene, &topo, &style, &mut Rng::new(9)).unwrap();
        let b = render_stickfigure(&scene, &topo, &style, &mut Rng::new(9)).unwrap();
        assert!(a
            .values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
