//! Deterministic synthetic tracking data.
//!
//! Objects move with constant velocity plus jitter and bounce off the arena
//! walls. Each object draws a gender, shirt colour and pant colour; its
//! appearance vector has two halves. The first half is the sum of
//! world-fixed prototypes of its three attributes, so objects sharing an
//! attribute look alike there. The second half is a per-object style
//! vector. A [`DomainProfile`] maps these clean vectors into a domain by
//! plane rotations followed by a translation; per-frame Gaussian noise is
//! added afterwards.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{argument, Error, Result};
use crate::graph::{BBox, Detection};
use crate::guidance::LanguageEmbeddingStore;
use crate::io::{
    compose_instance_description, compose_scene_description, AnnotationSet, InstanceAttributes,
    SceneAttributes,
};
use crate::metrics::TrackBox;

pub const GENDERS: [&str; 2] = ["male", "female"];
pub const COLORS: [&str; 6] = ["red", "blue", "green", "black", "white", "yellow"];
pub const CAMERAS: [&str; 2] = ["static", "moving"];
pub const VIEWPOINTS: [&str; 3] = ["low", "medium", "high"];
pub const CONDITIONS: [&str; 4] = ["on a sunny day", "on a cloudy day", "at night", "indoors"];

/// Mean length in frames of an occlusion spell.
const MEAN_OCCLUSION: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_objects: usize,
    pub num_frames: u32,
    pub arena_width: f64,
    pub arena_height: f64,
    /// Standard deviation of the initial per-axis speed, pixels per frame.
    pub velocity_scale: f64,
    pub appearance_dim: usize,
    pub appearance_noise: f64,
    /// Approximate fraction of frames in which an object is occluded.
    pub occlusion_rate: f64,
    /// Probability that a visible object is not detected in a frame.
    pub detection_drop_rate: f64,
    /// Scale of the per-object style vectors relative to the attribute half.
    pub style_scale: f64,
    /// Standard deviation of detection box jitter, as a fraction of box size.
    pub box_jitter: f64,
    pub seed: u64,
    /// Seed of the attribute prototypes, shared by every sequence.
    pub world_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_objects: 8,
            num_frames: 150,
            arena_width: 960.0,
            arena_height: 540.0,
            velocity_scale: 3.0,
            appearance_dim: 32,
            appearance_noise: 0.1,
            occlusion_rate: 0.0,
            detection_drop_rate: 0.0,
            style_scale: 1.0,
            box_jitter: 0.0,
            seed: 0,
            world_seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_objects < 1 {
            return bad("num_objects must be >= 1");
        }
        if self.num_frames < 1 {
            return bad("num_frames must be >= 1");
        }
        if self.appearance_dim < 2 {
            return bad("appearance_dim must be >= 2");
        }
        if !(self.arena_width >= 200.0 && self.arena_height >= 200.0) {
            return bad("arena must be at least 200x200 pixels");
        }
        for (name, r) in [
            ("occlusion_rate", self.occlusion_rate),
            ("detection_drop_rate", self.detection_drop_rate),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        for (name, v) in [
            ("velocity_scale", self.velocity_scale),
            ("appearance_noise", self.appearance_noise),
            ("style_scale", self.style_scale),
            ("box_jitter", self.box_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn attribute_dims(&self) -> usize {
        self.appearance_dim / 2
    }
}

/// Appearance domain: rotations in the coordinate planes
/// `(rotate_from + 2k, rotate_from + 2k + 1)`, then a translation.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainProfile {
    pub label: String,
    pub scene: SceneAttributes,
    pub rotation_deg: f64,
    pub rotate_from: usize,
    pub translation: Vec<f64>,
}

impl DomainProfile {
    pub fn identity(label: &str, scene: SceneAttributes, dim: usize) -> Self {
        Self {
            label: label.to_string(),
            scene,
            rotation_deg: 0.0,
            rotate_from: 0,
            translation: vec![0.0; dim],
        }
    }

    /// Rotates and translates only the style half, leaving the
    /// attribute-driven half untouched. `offset` is the norm of the
    /// translation, whose direction is fixed by `seed`.
    pub fn style_shift(
        label: &str,
        scene: SceneAttributes,
        dim: usize,
        rotation_deg: f64,
        offset: f64,
        seed: u64,
    ) -> Self {
        let from = dim / 2;
        Self {
            label: label.to_string(),
            scene,
            rotation_deg,
            rotate_from: from,
            translation: seeded_direction(dim, from, offset, seed),
        }
    }

    /// Rotates every plane and translates the whole vector.
    pub fn full_shift(
        label: &str,
        scene: SceneAttributes,
        dim: usize,
        rotation_deg: f64,
        offset: f64,
        seed: u64,
    ) -> Self {
        Self {
            label: label.to_string(),
            scene,
            rotation_deg,
            rotate_from: 0,
            translation: seeded_direction(dim, 0, offset, seed),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.translation.len() != dim {
            return argument(format!(
                "domain {} is for dimension {}, got {dim}",
                self.label,
                self.translation.len()
            ));
        }
        Ok(())
    }

    fn rotate(&self, x: &mut [f64], angle_deg: f64) {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let mut i = self.rotate_from;
        while i + 1 < x.len() {
            let (a, b) = (x[i], x[i + 1]);
            x[i] = c * a - s * b;
            x[i + 1] = s * a + c * b;
            i += 2;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x.len())?;
        let mut y = x.to_vec();
        self.rotate(&mut y, self.rotation_deg);
        for (v, t) in y.iter_mut().zip(&self.translation) {
            *v += t;
        }
        Ok(y)
    }

    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y.len())?;
        let mut x: Vec<f64> = y
            .iter()
            .zip(&self.translation)
            .map(|(v, t)| v - t)
            .collect();
        self.rotate(&mut x, -self.rotation_deg);
        Ok(x)
    }
}

fn seeded_direction(dim: usize, from: usize, norm: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![0.0; dim];
    for x in v.iter_mut().skip(from) {
        *x = rng.sample(StandardNormal);
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x *= norm / n);
    }
    v
}

/// Re-expresses appearance vectors recorded under `from` in domain `to`;
/// boxes and ids are untouched.
pub fn apply_domain_shift(
    detections: &[Detection],
    from: &DomainProfile,
    to: &DomainProfile,
) -> Result<Vec<Detection>> {
    detections
        .iter()
        .map(|d| {
            let clean = from.invert(&d.appearance)?;
            Ok(Detection {
                appearance: to.apply(&clean)?,
                ..d.clone()
            })
        })
        .collect()
}

/// A generated sequence in tracker-ready form.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSequence {
    pub num_frames: u32,
    pub detections: Vec<Detection>,
    /// Ground-truth boxes with their visibility.
    pub gt: Vec<(TrackBox, f64)>,
    pub annotations: AnnotationSet,
}

impl SynthSequence {
    pub fn gt_boxes(&self) -> Vec<TrackBox> {
        self.gt.iter().map(|(b, _)| *b).collect()
    }
}

struct Prototypes {
    gender: Vec<Vec<f64>>,
    shirt: Vec<Vec<f64>>,
    pant: Vec<Vec<f64>>,
}

fn prototypes(world_seed: u64, dims: usize) -> Prototypes {
    let mut rng = ChaCha8Rng::seed_from_u64(world_seed);
    let scale = 1.0 / (dims as f64).sqrt();
    let mut table = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                (0..dims)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect()
    };
    Prototypes {
        gender: table(GENDERS.len()),
        shirt: table(COLORS.len()),
        pant: table(COLORS.len()),
    }
}

fn position_of(list: &[&str], value: &str) -> usize {
    list.iter()
        .position(|v| *v == value)
        .expect("attribute from the vocabulary")
}

/// Clean (domain-free, noise-free) appearance of an object.
pub fn clean_appearance(cfg: &SynthConfig, attrs: &InstanceAttributes, style: &[f64]) -> Vec<f64> {
    let dims = cfg.attribute_dims();
    let p = prototypes(cfg.world_seed, dims);
    let g = &p.gender[position_of(&GENDERS, &attrs.gender)];
    let s = &p.shirt[position_of(&COLORS, &attrs.shirt_color)];
    let t = &p.pant[position_of(&COLORS, &attrs.pant_color)];
    let mut out: Vec<f64> = (0..dims).map(|i| g[i] + s[i] + t[i]).collect();
    out.extend_from_slice(style);
    out
}

fn reflect(pos: &mut f64, vel: &mut f64, lo: f64, hi: f64) {
    if *pos < lo {
        *pos = 2.0 * lo - *pos;
        *vel = -*vel;
    }
    if *pos > hi {
        *pos = 2.0 * hi - *pos;
        *vel = -*vel;
    }
    *pos = pos.clamp(lo, hi);
}

/// Generates one sequence. Objects have ids `1..=num_objects`; detections
/// carry their ground-truth id. Frames where an object is occluded have
/// visibility below 0.5 and appear neither as detection nor as ground truth.
pub fn gen_sequence(cfg: &SynthConfig, domain: &DomainProfile) -> Result<SynthSequence> {
    cfg.validate()?;
    let dim = cfg.appearance_dim;
    domain.check(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let style_dims = dim - cfg.attribute_dims();
    let style_sd = cfg.style_scale / (style_dims.max(1) as f64).sqrt();
    let noise = Normal::new(0.0, cfg.appearance_noise).map_err(|e| Error::Config(e.to_string()))?;
    let spell_start = cfg.occlusion_rate / MEAN_OCCLUSION;

    struct Obj {
        x: f64,
        y: f64,
        vx: f64,
        vy: f64,
        w: f64,
        h: f64,
        appearance: Vec<f64>,
        occluded_for: u32,
        visibility: f64,
    }
    let mut instances = std::collections::BTreeMap::new();
    let mut objects = Vec::with_capacity(cfg.num_objects);
    for id in 1..=cfg.num_objects as u32 {
        let attrs = InstanceAttributes {
            gender: GENDERS.choose(&mut rng).expect("nonempty").to_string(),
            shirt_color: COLORS.choose(&mut rng).expect("nonempty").to_string(),
            pant_color: COLORS.choose(&mut rng).expect("nonempty").to_string(),
        };
        let style: Vec<f64> = (0..style_dims)
            .map(|_| style_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let appearance = domain.apply(&clean_appearance(cfg, &attrs, &style))?;
        let h = rng.random_range(60.0..120.0);
        let w = 0.4 * h;
        objects.push(Obj {
            x: rng.random_range(0.0..cfg.arena_width - w),
            y: rng.random_range(0.0..cfg.arena_height - h),
            vx: cfg.velocity_scale * rng.sample::<f64, _>(StandardNormal),
            vy: cfg.velocity_scale * rng.sample::<f64, _>(StandardNormal),
            w,
            h,
            appearance,
            occluded_for: 0,
            visibility: 1.0,
        });
        instances.insert(id, attrs);
    }

    let mut detections = Vec::new();
    let mut gt = Vec::new();
    let mut ever_visible = vec![false; objects.len()];
    for frame in 1..=cfg.num_frames {
        for (k, o) in objects.iter_mut().enumerate() {
            let id = k as u32 + 1;
            if frame > 1 {
                o.vx += 0.1 * cfg.velocity_scale * rng.sample::<f64, _>(StandardNormal);
                o.vy += 0.1 * cfg.velocity_scale * rng.sample::<f64, _>(StandardNormal);
                o.x += o.vx;
                o.y += o.vy;
                reflect(&mut o.x, &mut o.vx, 0.0, cfg.arena_width - o.w);
                reflect(&mut o.y, &mut o.vy, 0.0, cfg.arena_height - o.h);
            }
            if o.occluded_for > 0 {
                o.occluded_for -= 1;
            } else if frame > 1 && spell_start > 0.0 && rng.random_bool(spell_start) {
                o.occluded_for = rng.random_range(1..=(2.0 * MEAN_OCCLUSION) as u32);
                o.visibility = rng.random_range(0.0..0.45);
            }
            if o.occluded_for == 0 {
                o.visibility = 1.0;
            }
            let dropped = cfg.detection_drop_rate > 0.0 && rng.random_bool(cfg.detection_drop_rate);
            let jitter: [f64; 4] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal));
            let noise_draw: Vec<f64> = (0..dim).map(|_| noise.sample(&mut rng)).collect();
            if o.visibility < 0.5 {
                continue;
            }
            ever_visible[k] = true;
            let truth = BBox::new(o.x, o.y, o.w, o.h);
            gt.push((TrackBox::new(frame, id, truth), o.visibility));
            if dropped {
                continue;
            }
            let bbox = BBox::new(
                o.x + cfg.box_jitter * o.w * jitter[0],
                o.y + cfg.box_jitter * o.h * jitter[1],
                o.w * (1.0 + cfg.box_jitter * jitter[2]).max(0.5),
                o.h * (1.0 + cfg.box_jitter * jitter[3]).max(0.5),
            );
            let appearance = o
                .appearance
                .iter()
                .zip(&noise_draw)
                .map(|(a, n)| a + n)
                .collect();
            let det = Detection {
                frame,
                bbox,
                appearance,
                confidence: 1.0,
                visibility: o.visibility,
                gt_id: Some(id),
            };
            detections.push(det);
        }
    }
    // Only objects seen well enough at least once are annotated.
    let instances = instances
        .into_iter()
        .filter(|(id, _)| ever_visible[*id as usize - 1])
        .collect();
    let annotations = AnnotationSet {
        scene: domain.scene.clone(),
        instances,
    };
    Ok(SynthSequence {
        num_frames: cfg.num_frames,
        detections,
        gt,
        annotations,
    })
}

/// Unit vector derived from the SHA-256 of `master_seed` and the
/// description.
pub fn pseudo_text_encoder(description: &str, dim: usize, master_seed: u64) -> Result<Vec<f64>> {
    if dim < 2 {
        return argument("text dimension must be >= 2");
    }
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(description.as_bytes());
    let seed: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Every instance and scene description the generator can produce.
pub fn vocabulary_descriptions() -> Vec<String> {
    let mut out = Vec::new();
    for g in GENDERS {
        for s in COLORS {
            for p in COLORS {
                let attrs = InstanceAttributes {
                    gender: g.into(),
                    shirt_color: s.into(),
                    pant_color: p.into(),
                };
                out.push(compose_instance_description(&attrs).expect("complete attributes"));
            }
        }
    }
    for c in CAMERAS {
        for v in VIEWPOINTS {
            for cond in CONDITIONS {
                let attrs = SceneAttributes {
                    camera: c.into(),
                    viewpoint: v.into(),
                    condition: cond.into(),
                };
                out.push(compose_scene_description(&attrs).expect("complete attributes"));
            }
        }
    }
    out
}

/// Pseudo-encodes the given descriptions (duplicates are ignored).
pub fn build_store(
    descriptions: &[String],
    dim: usize,
    master_seed: u64,
) -> Result<LanguageEmbeddingStore> {
    let mut unique: Vec<&String> = descriptions.iter().collect();
    unique.sort();
    unique.dedup();
    let records = unique
        .into_iter()
        .map(|d| Ok((d.clone(), pseudo_text_encoder(d, dim, master_seed)?)))
        .collect::<Result<Vec<_>>>()?;
    LanguageEmbeddingStore::from_records(dim, records)
}

/// Descriptions referenced by a set of annotations.
pub fn annotation_descriptions(sets: &[&AnnotationSet]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for set in sets {
        out.push(set.scene_description()?);
        for attrs in set.instances.values() {
            out.push(compose_instance_description(attrs)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> SceneAttributes {
        SceneAttributes {
            camera: "static".into(),
            viewpoint: "medium".into(),
            condition: "on a sunny day".into(),
        }
    }

    #[test]
    fn deterministic_and_complete() {
        let cfg = SynthConfig {
            num_objects: 3,
            num_frames: 20,
            ..Default::default()
        };
        let d = DomainProfile::identity("A", scene(), 32);
        let a = gen_sequence(&cfg, &d).unwrap();
        assert_eq!(a, gen_sequence(&cfg, &d).unwrap());
        assert_eq!(a.detections.len(), 60);
        assert_eq!(a.gt.len(), 60);
        assert_eq!(a.annotations.instances.len(), 3);
    }

    #[test]
    fn boxes_stay_in_arena() {
        let cfg = SynthConfig {
            num_objects: 6,
            num_frames: 200,
            velocity_scale: 12.0,
            occlusion_rate: 0.2,
            ..Default::default()
        };
        let s = gen_sequence(&cfg, &DomainProfile::identity("A", scene(), 32)).unwrap();
        for (b, _) in &s.gt {
            assert!(b.bbox.left >= 0.0 && b.bbox.left + b.bbox.width <= cfg.arena_width + 1e-9);
            assert!(b.bbox.top >= 0.0 && b.bbox.top + b.bbox.height <= cfg.arena_height + 1e-9);
        }
        assert!(s.gt.len() < 1200);
    }

    #[test]
    fn shift_round_trip() {
        let a = DomainProfile::identity("A", scene(), 8);
        let b = DomainProfile::full_shift("B", scene(), 8, 60.0, 1.0, 3);
        let x = vec![0.3, -1.0, 2.0, 0.5, 0.1, 0.0, -0.7, 1.1];
        let y = b.apply(&x).unwrap();
        let back = b.invert(&y).unwrap();
        assert!(x.iter().zip(&back).all(|(p, q)| (p - q).abs() < 1e-12));
        assert_eq!(a.apply(&x).unwrap(), x);
        assert!(a.apply(&[1.0]).is_err());
    }

    #[test]
    fn pseudo_encoder_is_unit_and_stable() {
        let a = pseudo_text_encoder("A male person wearing a red shirt and black pants", 512, 1)
            .unwrap();
        assert_eq!(
            a,
            pseudo_text_encoder("A male person wearing a red shirt and black pants", 512, 1)
                .unwrap()
        );
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
        assert_ne!(
            a,
            pseudo_text_encoder("A male person wearing a red shirt and black pants", 512, 2)
                .unwrap()
        );
        assert!(pseudo_text_encoder("x", 1, 0).is_err());
    }

    #[test]
    fn vocabulary_is_injective() {
        let v = vocabulary_descriptions();
        let mut u = v.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), v.len());
        assert_eq!(v.len(), 72 + 24);
    }
}
