//! Synthetic infrared sequences with per-pixel ground truth.
//!
//! A scene is a textured background with an optional translating,
//! flickering fire disc and an optional smoke plume whose radius grows
//! linearly while it drifts. Region textures are advected with the region,
//! so optical flow inside fire and smoke follows the analytic displacement
//! returned by [`true_displacement`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{FlowField, Frame, LabelMap, SemanticClass};

/// Minimum gap between consecutive band intensities.
pub const MIN_BAND_SEPARATION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireSpec {
    /// Center `(x, y)` at frame 0, in pixels.
    pub center: (f64, f64),
    /// Translation per frame.
    pub velocity: (f64, f64),
    pub radius: f64,
    pub intensity: f64,
    /// Relative intensity modulation amplitude.
    pub flicker: f64,
    /// Flicker period in frames.
    pub flicker_period: f64,
    /// Peak-to-peak amplitude of the advected texture.
    pub texture: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmokeSpec {
    /// Plume center `(x, y)` at frame 0.
    pub source: (f64, f64),
    pub radius: f64,
    /// Radius growth per frame; positive values expand the plume.
    pub expansion: f64,
    pub drift: (f64, f64),
    pub intensity: f64,
    pub texture: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub intensity: f64,
    pub texture: f64,
    /// Standard deviation of the per-pixel Gaussian noise added everywhere.
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
    pub fire: Option<FireSpec>,
    pub smoke: Option<SmokeSpec>,
    pub background: BackgroundSpec,
    /// Maximum per-frame camera offset in pixels along each axis.
    #[serde(default)]
    pub camera_jitter: f64,
    /// Lattice spacing of the value-noise textures, in pixels.
    pub texture_scale: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width < 2 || self.height < 2 {
            return bad(format!(
                "frame size {}x{} below 2x2",
                self.width, self.height
            ));
        }
        if self.frames < 2 {
            return bad(format!("need at least 2 frames, got {}", self.frames));
        }
        if !(self.texture_scale > 0.0) {
            return bad("texture_scale must be > 0".into());
        }
        if !(self.background.noise_std >= 0.0) || !(self.camera_jitter >= 0.0) {
            return bad("noise_std and camera_jitter must be >= 0".into());
        }
        let mut bands = vec![("background", self.background.intensity)];
        if let Some(s) = &self.smoke {
            if !(s.radius >= 0.0) || s.radius + s.expansion * ((self.frames - 1) as f64) < 0.0 {
                return bad("smoke radius must stay >= 0".into());
            }
            bands.push(("smoke", s.intensity));
        }
        if let Some(f) = &self.fire {
            if !(f.radius >= 0.0) {
                return bad("fire radius must be >= 0".into());
            }
            if !(f.flicker_period > 0.0) {
                return bad("flicker_period must be > 0".into());
            }
            bands.push(("fire", f.intensity));
        }
        for w in bands.windows(2) {
            if w[1].1 - w[0].1 < MIN_BAND_SEPARATION {
                return bad(format!(
                    "{} intensity {} must exceed {} intensity {} by at least {MIN_BAND_SEPARATION}",
                    w[1].0, w[1].1, w[0].0, w[0].1
                ));
            }
        }
        if bands.iter().any(|(_, v)| !(0.0..=1.0).contains(v)) {
            return bad("band intensities must lie in [0, 1]".into());
        }
        Ok(())
    }

    fn smoke_radius(&self, t: f64) -> Option<f64> {
        self.smoke.as_ref().map(|s| s.radius + s.expansion * t)
    }
}

/// Smooth periodic value noise in `[0, 1]`.
#[derive(Debug, Clone)]
struct Texture {
    size: usize,
    scale: f64,
    lattice: Vec<f64>,
}

impl Texture {
    const SIZE: usize = 32;

    fn new(rng: &mut ChaCha8Rng, scale: f64) -> Self {
        let n = Self::SIZE;
        Self {
            size: n,
            scale,
            lattice: (0..n * n).map(|_| rng.random::<f64>()).collect(),
        }
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = (x / self.scale, y / self.scale);
        let (x0, y0) = (gx.floor(), gy.floor());
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(gx - x0), smooth(gy - y0));
        let n = self.size as i64;
        let at = |i: i64, j: i64| self.lattice[(j.rem_euclid(n) * n + i.rem_euclid(n)) as usize];
        let (i, j) = (x0 as i64, y0 as i64);
        let top = at(i, j) * (1.0 - tx) + at(i + 1, j) * tx;
        let bot = at(i, j + 1) * (1.0 - tx) + at(i + 1, j + 1) * tx;
        top * (1.0 - ty) + bot * ty
    }
}

/// A generated sequence with its ground truth and the analytic motion.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    pub frames: Vec<Frame>,
    /// Semantic labels, `k = 3` with [`SemanticClass`] indices.
    pub truth: Vec<LabelMap>,
    /// Camera offset applied to each frame.
    pub offsets: Vec<(f64, f64)>,
}

fn class_at(spec: &SceneSpec, x: f64, y: f64, t: f64) -> SemanticClass {
    if let Some(f) = &spec.fire {
        let (cx, cy) = (f.center.0 + f.velocity.0 * t, f.center.1 + f.velocity.1 * t);
        if (x - cx).hypot(y - cy) < f.radius {
            return SemanticClass::Fire;
        }
    }
    if let (Some(s), Some(r)) = (&spec.smoke, spec.smoke_radius(t)) {
        let (cx, cy) = (s.source.0 + s.drift.0 * t, s.source.1 + s.drift.1 * t);
        if (x - cx).hypot(y - cy) < r {
            return SemanticClass::Smoke;
        }
    }
    SemanticClass::Background
}

pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bg_tex = Texture::new(&mut rng, spec.texture_scale);
    let smoke_tex = Texture::new(&mut rng, spec.texture_scale);
    let fire_tex = Texture::new(&mut rng, spec.texture_scale);
    let phase = rng.random::<f64>() * 2.0 * PI;
    let offsets: Vec<(f64, f64)> = (0..spec.frames)
        .map(|t| {
            if t == 0 || spec.camera_jitter == 0.0 {
                (0.0, 0.0)
            } else {
                let j = spec.camera_jitter;
                (rng.random_range(-j..=j), rng.random_range(-j..=j))
            }
        })
        .collect();
    let noise = Normal::new(0.0, spec.background.noise_std.max(0.0))
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;

    let (w, h) = (spec.width, spec.height);
    let mut frames = Vec::with_capacity(spec.frames);
    let mut truth = Vec::with_capacity(spec.frames);
    for (ti, &(ox, oy)) in offsets.iter().enumerate() {
        let t = ti as f64;
        let mut data = Vec::with_capacity(w * h);
        let mut labels = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                let (x, y) = (c as f64 + ox, r as f64 + oy);
                let class = class_at(spec, x, y, t);
                let value = match class {
                    SemanticClass::Fire => {
                        let f = spec.fire.as_ref().unwrap();
                        let flick =
                            1.0 + f.flicker * (2.0 * PI * t / f.flicker_period + phase).sin();
                        let tex = fire_tex.sample(x - f.velocity.0 * t, y - f.velocity.1 * t);
                        f.intensity * flick + f.texture * (tex - 0.5)
                    }
                    SemanticClass::Smoke => {
                        let s = spec.smoke.as_ref().unwrap();
                        let (cx, cy) = (s.source.0 + s.drift.0 * t, s.source.1 + s.drift.1 * t);
                        let shrink = if s.radius > 0.0 {
                            s.radius / spec.smoke_radius(t).unwrap()
                        } else {
                            1.0
                        };
                        let tex = smoke_tex.sample(
                            s.source.0 + (x - cx) * shrink,
                            s.source.1 + (y - cy) * shrink,
                        );
                        s.intensity + s.texture * (tex - 0.5)
                    }
                    SemanticClass::Background => {
                        spec.background.intensity
                            + spec.background.texture * (bg_tex.sample(x, y) - 0.5)
                    }
                };
                let n = if spec.background.noise_std > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                data.push((value + n).clamp(0.0, 1.0));
                labels.push(class.index());
            }
        }
        frames.push(Frame::new(w, h, data)?);
        truth.push(LabelMap::new(w, h, 3, labels)?);
    }
    Ok(Scene {
        spec: spec.clone(),
        frames,
        truth,
        offsets,
    })
}

/// Displacement of the scene content at each pixel of frame `t` between
/// frames `t` and `t + 1`, in image coordinates.
pub fn true_displacement(scene: &Scene, t: usize) -> Result<FlowField> {
    let spec = &scene.spec;
    if t + 1 >= spec.frames {
        return Err(Error::InvalidParameter(format!(
            "frame {t} has no successor in a {}-frame scene",
            spec.frames
        )));
    }
    let (o0, o1) = (scene.offsets[t], scene.offsets[t + 1]);
    // content at world point p appears at pixel p - offset
    let cam = (o0.0 - o1.0, o0.1 - o1.1);
    let tf = t as f64;
    FlowField::from_fn(spec.width, spec.height, |r, c| {
        let (x, y) = (c as f64 + o0.0, r as f64 + o0.1);
        let world = match class_at(spec, x, y, tf) {
            SemanticClass::Fire => spec.fire.as_ref().unwrap().velocity,
            SemanticClass::Smoke => {
                let s = spec.smoke.as_ref().unwrap();
                let (cx, cy) = (s.source.0 + s.drift.0 * tf, s.source.1 + s.drift.1 * tf);
                let ratio = spec.smoke_radius(tf + 1.0).unwrap() / spec.smoke_radius(tf).unwrap();
                (
                    s.drift.0 + (x - cx) * (ratio - 1.0),
                    s.drift.1 + (y - cy) * (ratio - 1.0),
                )
            }
            SemanticClass::Background => (0.0, 0.0),
        };
        (world.0 + cam.0, world.1 + cam.1)
    })
}

/// Names of the pinned benchmark scenes, in suite order.
pub const SCENE_NAMES: [&str; 5] = [
    "small_fire",
    "medium_fire",
    "smoke_only",
    "fire_smoke_basic",
    "camera_jitter",
];

fn base(name: &str, seed: u64) -> SceneSpec {
    SceneSpec {
        name: name.into(),
        width: 64,
        height: 64,
        frames: 20,
        seed,
        fire: None,
        smoke: None,
        background: BackgroundSpec {
            intensity: 0.1,
            texture: 0.0,
            noise_std: 0.03,
        },
        camera_jitter: 0.0,
        texture_scale: 4.0,
    }
}

fn fire(center: (f64, f64), velocity: (f64, f64), radius: f64) -> FireSpec {
    FireSpec {
        center,
        velocity,
        radius,
        intensity: 0.9,
        flicker: 0.05,
        flicker_period: 6.0,
        texture: 0.1,
    }
}

fn smoke(source: (f64, f64), radius: f64, expansion: f64, drift: (f64, f64)) -> SmokeSpec {
    SmokeSpec {
        source,
        radius,
        expansion,
        drift,
        intensity: 0.45,
        texture: 0.3,
    }
}

/// The pinned benchmark scene called `name`.
pub fn scene(name: &str) -> Result<SceneSpec> {
    let spec = match name {
        "small_fire" => SceneSpec {
            fire: Some(fire((30.0, 46.0), (0.3, 0.0), 5.0)),
            smoke: Some(smoke((30.0, 34.0), 5.0, 0.3, (0.2, -0.4))),
            ..base(name, 101)
        },
        "medium_fire" => SceneSpec {
            fire: Some(fire((32.0, 44.0), (-0.3, -0.2), 10.0)),
            smoke: Some(smoke((30.0, 24.0), 7.0, 0.4, (0.0, -0.3))),
            ..base(name, 202)
        },
        "smoke_only" => SceneSpec {
            smoke: Some(smoke((32.0, 36.0), 10.0, 0.6, (0.0, -0.5))),
            ..base(name, 303)
        },
        "fire_smoke_basic" => SceneSpec {
            fire: Some(fire((24.0, 48.0), (0.4, 0.0), 7.0)),
            smoke: Some(smoke((26.0, 30.0), 7.0, 0.5, (0.3, -0.4))),
            ..base(name, 404)
        },
        "camera_jitter" => SceneSpec {
            fire: Some(fire((34.0, 46.0), (0.0, -0.2), 7.0)),
            smoke: Some(smoke((34.0, 28.0), 7.0, 0.4, (-0.2, -0.3))),
            camera_jitter: 1.0,
            ..base(name, 505)
        },
        _ => {
            return Err(Error::UnknownScene {
                name: name.into(),
                valid: SCENE_NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(spec)
}

pub fn benchmark_suite() -> Vec<SceneSpec> {
    SCENE_NAMES.iter().map(|n| scene(n).unwrap()).collect()
}

/// A smooth random texture and a copy shifted one pixel to the right,
/// wrapping at the border. The true flow is `(1, 0)` everywhere.
pub fn translation_pair(width: usize, height: usize, seed: u64) -> Result<(Frame, Frame)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tex = Texture::new(&mut rng, 2.0);
    let value = |c: usize, r: usize| 0.05 + 0.9 * tex.sample(c as f64, r as f64);
    let a = Frame::from_fn(width, height, |r, c| value(c, r))?;
    let b = Frame::from_fn(width, height, |r, c| value((c + width - 1) % width, r))?;
    Ok((a, b))
}

/// Manifest describing a generated scene on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub scene: SceneSpec,
    pub frames: Vec<String>,
    pub truth: Vec<String>,
    pub classes: Vec<SemanticClass>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::divergence;

    fn static_spec() -> SceneSpec {
        SceneSpec {
            fire: Some(FireSpec {
                center: (10.0, 10.0),
                velocity: (0.0, 0.0),
                radius: 4.0,
                intensity: 0.9,
                flicker: 0.0,
                flicker_period: 5.0,
                texture: 0.1,
            }),
            smoke: Some(SmokeSpec {
                source: (20.0, 10.0),
                radius: 5.0,
                expansion: 0.0,
                drift: (0.0, 0.0),
                intensity: 0.5,
                texture: 0.1,
            }),
            background: BackgroundSpec {
                intensity: 0.1,
                texture: 0.05,
                noise_std: 0.0,
            },
            width: 32,
            height: 24,
            frames: 4,
            ..base("static", 9)
        }
    }

    #[test]
    fn static_noise_free_scene_repeats() {
        let s = generate(&static_spec()).unwrap();
        for t in 1..4 {
            assert_eq!(s.frames[t], s.frames[0]);
            assert_eq!(s.truth[t], s.truth[0]);
        }
    }

    #[test]
    fn zero_radius_fire_is_absent() {
        let mut spec = static_spec();
        spec.fire.as_mut().unwrap().radius = 0.0;
        let s = generate(&spec).unwrap();
        let fire = SemanticClass::Fire.index();
        assert!(s
            .truth
            .iter()
            .all(|m| m.labels().iter().all(|&l| l != fire)));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = scene("camera_jitter").unwrap();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = static_spec();
        spec.smoke.as_mut().unwrap().intensity = 0.2;
        assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))));
        let mut spec = static_spec();
        spec.frames = 1;
        assert!(generate(&spec).is_err());
        assert!(matches!(scene("forest"), Err(Error::UnknownScene { .. })));
    }

    #[test]
    fn class_means_are_ordered() {
        for spec in benchmark_suite() {
            let s = generate(&spec).unwrap();
            for (f, m) in s.frames.iter().zip(&s.truth) {
                let mut sum = [0.0; 3];
                let mut cnt = [0usize; 3];
                for (&v, &l) in f.data().iter().zip(m.labels()) {
                    sum[l] += v;
                    cnt[l] += 1;
                }
                let means: Vec<f64> = (0..3)
                    .filter(|&c| cnt[c] > 0)
                    .map(|c| sum[c] / cnt[c] as f64)
                    .collect();
                assert!(
                    means.windows(2).all(|w| w[0] < w[1]),
                    "{}: {means:?}",
                    spec.name
                );
            }
        }
    }

    #[test]
    fn smoke_expands_and_background_is_still() {
        for spec in benchmark_suite()
            .into_iter()
            .filter(|s| s.camera_jitter == 0.0)
        {
            let s = generate(&spec).unwrap();
            for t in 0..spec.frames - 1 {
                let div = divergence(&true_displacement(&s, t).unwrap());
                let m = &s.truth[t];
                let (w, h) = m.dims();
                let mut acc = [(0.0, 0usize); 3];
                for r in 1..h - 1 {
                    for c in 1..w - 1 {
                        let l = m.get(r, c);
                        let same = [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
                            .iter()
                            .all(|&(rr, cc)| m.get(rr, cc) == l);
                        if same {
                            acc[l].0 += div.get(r, c);
                            acc[l].1 += 1;
                        }
                    }
                }
                let smoke = SemanticClass::Smoke.index();
                let bg = SemanticClass::Background.index();
                assert!(acc[smoke].0 / acc[smoke].1 as f64 > 0.0);
                assert!((acc[bg].0 / acc[bg].1 as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn translation_pair_shifts_right() {
        let (a, b) = translation_pair(16, 8, 3).unwrap();
        for r in 0..8 {
            for c in 1..16 {
                assert_eq!(b.get(r, c), a.get(r, c - 1));
            }
        }
    }
}
