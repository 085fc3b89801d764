//! Procedural scenes: value-noise background plus striped convex polygons,
//! observed through a translating window.

use crate::error::{NebiError, Result};
use crate::image::{ColorSpace, PlanarImage};
use crate::rng::{mix64, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub objects: usize,
    pub octaves: usize,
    /// Global translation per frame, pixels.
    pub drift: (f64, f64),
    /// Per-frame jitter: offsets get an extra uniform displacement inside a
    /// disc of radius `jitter / 2`, so consecutive frames move by at most
    /// `|drift| + jitter`.
    pub jitter: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            height: 128,
            width: 128,
            objects: 6,
            octaves: 4,
            drift: (0.0, 0.0),
            jitter: 0.0,
        }
    }
}

/// Per-frame motion is capped so frames remain alignable.
pub const MAX_MOTION_PX: f64 = 4.0;

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(NebiError::Config("scene resolution too small".into()));
        }
        let motion = self.drift.0.hypot(self.drift.1) + self.jitter;
        if !(self.jitter >= 0.0) || !(motion <= MAX_MOTION_PX + 1e-12) {
            return Err(NebiError::Config(format!(
                "drift + jitter = {motion} px/frame exceeds {MAX_MOTION_PX}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Polygon {
    verts: Vec<(f64, f64)>,
    color: [f64; 3],
    stripe_freq: f64,
    stripe_dir: (f64, f64),
    stripe_phase: f64,
    stripe_contrast: f64,
}

impl Polygon {
    fn contains(&self, x: f64, y: f64) -> bool {
        // Convex, counter-clockwise vertices.
        let n = self.verts.len();
        (0..n).all(|i| {
            let (ax, ay) = self.verts[i];
            let (bx, by) = self.verts[(i + 1) % n];
            (bx - ax) * (y - ay) - (by - ay) * (x - ax) >= 0.0
        })
    }

    fn shade(&self, x: f64, y: f64) -> [f64; 3] {
        let t = (x * self.stripe_dir.0 + y * self.stripe_dir.1) * self.stripe_freq + self.stripe_phase;
        let m = 1.0 + self.stripe_contrast * t.sin();
        self.color.map(|c| c * m)
    }
}

/// A static scene defined on the whole plane.
#[derive(Debug, Clone)]
pub struct Scene {
    noise_key: u64,
    base_cell: f64,
    octaves: usize,
    tint: [f64; 3],
    polygons: Vec<Polygon>,
}

fn lattice(key: u64, ix: i64, iy: i64, octave: usize, channel: usize) -> f64 {
    let h = mix64(
        key ^ mix64((ix as u64).wrapping_mul(0x9E37_79B9) ^ (iy as u64).rotate_left(32))
            ^ ((octave as u64) << 56 | (channel as u64) << 48),
    );
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

impl Scene {
    pub fn random(cfg: &SceneConfig, rng: &mut Rng) -> Self {
        let size = cfg.height.max(cfg.width) as f64;
        let tint = [0, 1, 2].map(|_| rng.uniform_range(0.7, 1.0));
        // Objects may lie partly outside the first frame; drift brings them in.
        let margin = 0.25 * size;
        let polygons = (0..cfg.objects)
            .map(|_| {
                let cx = rng.uniform_range(-margin, cfg.width as f64 + margin);
                let cy = rng.uniform_range(-margin, cfg.height as f64 + margin);
                let r = rng.uniform_range(0.08, 0.25) * size;
                let k = 3 + rng.below(4) as usize;
                let mut angles: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.0, std::f64::consts::TAU)).collect();
                angles.sort_by(f64::total_cmp);
                let verts = angles.iter().map(|a| (cx + r * a.cos(), cy + r * a.sin())).collect();
                let dir = rng.uniform_range(0.0, std::f64::consts::PI);
                Polygon {
                    verts,
                    color: [0, 1, 2].map(|_| rng.uniform_range(0.1, 0.85)),
                    stripe_freq: rng.uniform_range(0.2, 1.2),
                    stripe_dir: (dir.cos(), dir.sin()),
                    stripe_phase: rng.uniform_range(0.0, std::f64::consts::TAU),
                    stripe_contrast: rng.uniform_range(0.0, 0.15),
                }
            })
            .collect();
        Scene {
            noise_key: rng.next_u64(),
            base_cell: size / 4.0,
            octaves: cfg.octaves,
            tint,
            polygons,
        }
    }

    fn value_noise(&self, x: f64, y: f64, channel: usize) -> f64 {
        let mut amp = 1.0;
        let mut cell = self.base_cell;
        let (mut sum, mut norm) = (0.0, 0.0);
        for o in 0..self.octaves {
            let (u, v) = (x / cell, y / cell);
            let (ix, iy) = (u.floor(), v.floor());
            let (fx, fy) = (smooth(u - ix), smooth(v - iy));
            let (ix, iy) = (ix as i64, iy as i64);
            let l = |dx, dy| lattice(self.noise_key, ix + dx, iy + dy, o, channel);
            let top = l(0, 0) + (l(1, 0) - l(0, 0)) * fx;
            let bot = l(0, 1) + (l(1, 1) - l(0, 1)) * fx;
            sum += amp * (top + (bot - top) * fy);
            norm += amp;
            amp *= 0.5;
            cell *= 0.5;
        }
        if norm > 0.0 {
            sum / norm
        } else {
            0.5
        }
    }

    /// sRGB value at scene coordinates, in `[0, 1]`.
    pub fn sample(&self, x: f64, y: f64) -> [f64; 3] {
        // Polygons are painted in order; later ones occlude earlier ones.
        if let Some(p) = self.polygons.iter().rev().find(|p| p.contains(x, y)) {
            return p.shade(x, y).map(|v| v.clamp(0.0, 1.0));
        }
        [0, 1, 2].map(|c| (0.1 + 0.8 * self.value_noise(x, y, c) * self.tint[c]).clamp(0.0, 1.0))
    }

    /// Frame whose pixel `(x, y)` shows scene point `(x - ox, y - oy)`, i.e.
    /// content displaced by `(ox, oy)`.
    pub fn render(&self, height: usize, width: usize, offset: (f64, f64)) -> PlanarImage {
        let mut data = vec![0.0f32; 3 * height * width];
        let n = height * width;
        for y in 0..height {
            for x in 0..width {
                let v = self.sample(x as f64 - offset.0, y as f64 - offset.1);
                for c in 0..3 {
                    data[c * n + y * width + x] = v[c] as f32;
                }
            }
        }
        PlanarImage::new(3, height, width, ColorSpace::Srgb, data).expect("render dims")
    }
}

/// Content offset of each frame: `k * drift` plus jitter.
pub fn frame_offsets(cfg: &SceneConfig, n_frames: usize, rng: &mut Rng) -> Vec<(f64, f64)> {
    (0..n_frames)
        .map(|k| {
            let (jx, jy) = if cfg.jitter > 0.0 {
                let r = 0.5 * cfg.jitter * rng.uniform().sqrt();
                let a = rng.uniform_range(0.0, std::f64::consts::TAU);
                (r * a.cos(), r * a.sin())
            } else {
                (0.0, 0.0)
            };
            (k as f64 * cfg.drift.0 + jx, k as f64 * cfg.drift.1 + jy)
        })
        .collect()
}

pub fn generate_scene_sequence(cfg: &SceneConfig, n_frames: usize, rng: &mut Rng) -> Result<Vec<PlanarImage>> {
    cfg.validate()?;
    if n_frames < 2 {
        return Err(NebiError::Config("a sequence needs at least two frames".into()));
    }
    let scene = Scene::random(cfg, rng);
    let offsets = frame_offsets(cfg, n_frames, rng);
    Ok(offsets
        .into_iter()
        .map(|o| scene.render(cfg.height, cfg.width, o))
        .collect())
}
