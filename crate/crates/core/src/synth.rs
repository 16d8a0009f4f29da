//! Deterministic synthetic detection scenes with controllable difficulty.
//!
//! A scene is a grid of per-anchor feature vectors. Objects are planted as
//! localized signature bumps whose contrast against the background noise
//! decreases with difficulty level; distractors are object-like bumps with no
//! ground-truth label. Channels 0..3 carry the contrast-scaled presence
//! signature; channels 4..7 carry box-offset geometry that is only
//! informative inside a bump (the background marginal matches the in-box
//! range, so geometry alone does not reveal presence).

use crate::assignment::AnchorGrid;
use crate::boxes::{iou, BBox};
use crate::error::{Error, Result};
use crate::Scalar;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Number of feature channels per anchor.
pub const FEATURE_DIM: usize = 8;
/// Presence signature written to channels 0..3, scaled by contrast.
pub const SIGNATURE: [Scalar; 4] = [1.0, 0.8, -0.6, 0.5];
/// Scale dividing box offsets on the geometry channels 4..7.
pub const GEOMETRY_SCALE: Scalar = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One labeled object instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSample {
    pub gt_box: BBox<Scalar>,
    /// Difficulty level 1 (easiest) to 4 (hardest).
    pub difficulty: u8,
    /// Membership in the manually-selected easy set; mostly true for
    /// levels 1-2, noisily flipped at `easy_label_noise`.
    pub is_easy_labeled: bool,
    pub object_id: u64,
}

/// One synthetic scene: feature field plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: u64,
    pub split: Split,
    /// Row-major `anchors x FEATURE_DIM` feature field.
    pub features: Vec<Scalar>,
    pub objects: Vec<ObjectSample>,
    /// Unlabeled object-like bumps, kept for diagnostics.
    pub distractors: Vec<BBox<Scalar>>,
}

impl Scene {
    pub fn gt_boxes(&self) -> Vec<BBox<Scalar>> {
        self.objects.iter().map(|o| o.gt_box).collect()
    }

    pub fn feature(&self, anchor: usize) -> &[Scalar] {
        &self.features[anchor * FEATURE_DIM..(anchor + 1) * FEATURE_DIM]
    }
}

/// Generation parameters. Deterministic given `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub n_train_scenes: usize,
    pub n_test_scenes: usize,
    pub seed: u64,
    /// Fractions of objects per difficulty level, summing to 1.
    pub difficulty_mix: [f64; 4],
    /// Expected distractors per scene.
    pub distractor_rate: f64,
    /// Probability that an object's easy-set flag is flipped.
    pub easy_label_noise: f64,
    pub grid_width: usize,
    pub grid_height: usize,
    pub stride: Scalar,
    /// Signal contrast per difficulty level.
    pub contrasts: [Scalar; 4],
    pub distractor_contrast: Scalar,
    /// Standard deviation of the background noise on the signature channels.
    pub noise_std: Scalar,
    /// Common amplitude applied to the signature channels (signal and noise
    /// alike, so it leaves the signal-to-noise ratio untouched). Larger values
    /// let the detector reach saturating confidences with smaller weights.
    pub feature_gain: Scalar,
    /// Per-difficulty annotation noise: the labeled box is the true bump
    /// shifted and rescaled by up to this fraction of its size. Noisy hard
    /// labels are what make indiscriminate training on them costly.
    pub box_jitter: [Scalar; 4],
    pub objects_per_scene_min: usize,
    pub objects_per_scene_max: usize,
    pub box_size_min: Scalar,
    pub box_size_max: Scalar,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_train_scenes: 500,
            n_test_scenes: 150,
            seed: 1,
            difficulty_mix: [0.25, 0.25, 0.25, 0.25],
            distractor_rate: 1.0,
            easy_label_noise: 0.05,
            grid_width: 48,
            grid_height: 27,
            stride: 8.0,
            contrasts: [1.0, 0.85, 0.7, 0.5],
            distractor_contrast: 0.54,
            noise_std: 0.12,
            feature_gain: 6.0,
            box_jitter: [0.0, 0.0, 0.1, 0.3],
            objects_per_scene_min: 1,
            objects_per_scene_max: 3,
            box_size_min: 18.0,
            box_size_max: 48.0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.difficulty_mix.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.difficulty_mix.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
            return Err(Error::domain("difficulty_mix must be fractions summing to 1"));
        }
        if self.n_train_scenes == 0 || self.n_test_scenes == 0 {
            return Err(Error::domain("scene counts must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.easy_label_noise) {
            return Err(Error::domain("easy_label_noise must lie in [0,1]"));
        }
        if self.distractor_rate < 0.0 {
            return Err(Error::domain("distractor_rate must be >= 0"));
        }
        if !(self.feature_gain > 0.0) {
            return Err(Error::domain("feature_gain must be > 0"));
        }
        if self.box_jitter.iter().any(|&j| !(0.0..1.0).contains(&j)) {
            return Err(Error::domain("box_jitter entries must lie in [0,1)"));
        }
        if self.objects_per_scene_min == 0 || self.objects_per_scene_min > self.objects_per_scene_max {
            return Err(Error::domain("invalid objects-per-scene range"));
        }
        if self.box_size_min < 2.0 * self.stride || self.box_size_min > self.box_size_max {
            return Err(Error::domain(
                "box_size_min must be >= 2*stride (so the core region covers an anchor center)",
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> AnchorGrid<Scalar> {
        AnchorGrid::new(self.grid_width, self.grid_height, self.stride).expect("valid grid")
    }

    pub fn scene_size(&self) -> (Scalar, Scalar) {
        self.grid().scene_size()
    }
}

/// Generated dataset: disjoint train/test splits.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub train: Vec<Scene>,
    pub test: Vec<Scene>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn standard_normal(rng: &mut impl RngCore) -> f64 {
    // Box-Muller; two fresh uniforms per draw keeps the stream simple.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn sample_box(spec: &DatasetSpec, rng: &mut impl RngCore) -> BBox<Scalar> {
    let (sw, sh) = spec.scene_size();
    let w = rng.gen_range(spec.box_size_min..spec.box_size_max);
    let h = rng.gen_range(spec.box_size_min..spec.box_size_max);
    let cx = rng.gen_range(w / 2.0..sw - w / 2.0);
    let cy = rng.gen_range(h / 2.0..sh - h / 2.0);
    BBox::new(cx, cy, w, h).expect("positive extent")
}

/// Noisy annotation of a true bump: shift and rescale by up to `jit` of the
/// bump size, clamped so the labeled box stays inside the scene and keeps a
/// usable core region.
fn jitter_box(
    spec: &DatasetSpec,
    rng: &mut impl RngCore,
    b: &BBox<Scalar>,
    jit: Scalar,
) -> BBox<Scalar> {
    let (sw, sh) = spec.scene_size();
    let w = (b.w * (1.0 + jit * rng.gen_range(-1.0..1.0)))
        .clamp(spec.box_size_min, spec.box_size_max);
    let h = (b.h * (1.0 + jit * rng.gen_range(-1.0..1.0)))
        .clamp(spec.box_size_min, spec.box_size_max);
    let cx = (b.cx + jit * b.w * rng.gen_range(-0.5..0.5)).clamp(w / 2.0, sw - w / 2.0);
    let cy = (b.cy + jit * b.h * rng.gen_range(-0.5..0.5)).clamp(h / 2.0, sh - h / 2.0);
    BBox::new(cx, cy, w, h).expect("positive extent")
}

fn place_disjoint(
    spec: &DatasetSpec,
    rng: &mut impl RngCore,
    existing: &[BBox<Scalar>],
) -> Option<BBox<Scalar>> {
    for _ in 0..40 {
        let b = sample_box(spec, rng);
        if existing.iter().all(|e| iou(e, &b) < 0.05) {
            return Some(b);
        }
    }
    None
}

fn stamp_bump(spec: &DatasetSpec, features: &mut [Scalar], bump: &BBox<Scalar>, contrast: Scalar) {
    let grid = spec.grid();
    let (x1, y1, x2, y2) = bump.corners();
    for a in 0..grid.len() {
        let (ax, ay) = grid.center(a);
        if !bump.contains(ax, ay) {
            continue;
        }
        let u = (ax - x1) / bump.w;
        let v = (ay - y1) / bump.h;
        // Square root flattens the profile so core anchors see close to the
        // full contrast while the value still falls to zero at the box edge.
        let win =
            ((std::f64::consts::PI * u).sin() * (std::f64::consts::PI * v).sin()).max(0.0).sqrt();
        let f = &mut features[a * FEATURE_DIM..(a + 1) * FEATURE_DIM];
        for (c, s) in SIGNATURE.iter().enumerate() {
            f[c] += spec.feature_gain * contrast * win * s;
        }
        // Geometry channels overwrite the background sample inside the bump.
        f[4] = (ax - x1) / GEOMETRY_SCALE;
        f[5] = (ay - y1) / GEOMETRY_SCALE;
        f[6] = (x2 - ax) / GEOMETRY_SCALE;
        f[7] = (y2 - ay) / GEOMETRY_SCALE;
    }
}

fn generate_scene(spec: &DatasetSpec, scene_id: u64, split: Split) -> Scene {
    let salt = match split {
        Split::Train => 0x7261696e,
        Split::Test => 0x74657374,
    };
    let mut rng =
        ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ splitmix64(scene_id ^ salt)));
    let grid = spec.grid();

    // Background: noise on the signature channels, box-range uniforms on the
    // geometry channels so geometry carries no presence information.
    let mut features = vec![0.0; grid.len() * FEATURE_DIM];
    let geo_max = spec.box_size_max / GEOMETRY_SCALE;
    for a in 0..grid.len() {
        let f = &mut features[a * FEATURE_DIM..(a + 1) * FEATURE_DIM];
        for c in 0..4 {
            f[c] = spec.feature_gain * spec.noise_std * standard_normal(&mut rng);
        }
        for c in 4..FEATURE_DIM {
            f[c] = rng.gen_range(0.0..geo_max);
        }
    }

    let n_objects = rng.gen_range(spec.objects_per_scene_min..=spec.objects_per_scene_max);
    let mut boxes: Vec<BBox<Scalar>> = Vec::new();
    let mut objects = Vec::new();
    for local in 0..n_objects {
        let Some(b) = place_disjoint(spec, &mut rng, &boxes) else {
            break;
        };
        boxes.push(b);
        let roll: f64 = rng.gen_range(0.0..1.0);
        let mut acc = 0.0;
        let mut difficulty = 4u8;
        for (k, frac) in spec.difficulty_mix.iter().enumerate() {
            acc += frac;
            if roll < acc {
                difficulty = (k + 1) as u8;
                break;
            }
        }
        let mut easy = difficulty <= 2;
        if rng.gen_range(0.0..1.0) < spec.easy_label_noise {
            easy = !easy;
        }
        stamp_bump(spec, &mut features, &b, spec.contrasts[(difficulty - 1) as usize]);
        let jit = spec.box_jitter[(difficulty - 1) as usize];
        let gt_box = if jit > 0.0 { jitter_box(spec, &mut rng, &b, jit) } else { b };
        objects.push(ObjectSample {
            gt_box,
            difficulty,
            is_easy_labeled: easy,
            object_id: scene_id * 16 + local as u64,
        });
    }

    // Distractors: object-like bumps, no label, disjoint from everything.
    let mut distractors = Vec::new();
    let mut expected = spec.distractor_rate;
    while expected > 0.0 {
        let take = if expected >= 1.0 {
            true
        } else {
            rng.gen_range(0.0..1.0) < expected
        };
        expected -= 1.0;
        if !take {
            continue;
        }
        if let Some(b) = place_disjoint(spec, &mut rng, &boxes) {
            boxes.push(b);
            stamp_bump(spec, &mut features, &b, spec.distractor_contrast);
            distractors.push(b);
        }
    }

    Scene { scene_id, split, features, objects, distractors }
}

/// Generate both splits. Bit-identical for identical specs.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let train = (0..spec.n_train_scenes)
        .map(|i| generate_scene(spec, i as u64, Split::Train))
        .collect();
    let test = (0..spec.n_test_scenes)
        .map(|i| generate_scene(spec, (spec.n_train_scenes + i) as u64, Split::Test))
        .collect();
    Ok(Dataset { spec: spec.clone(), train, test })
}

/// Scenes with only easy-labeled objects kept; scenes whose labels all drop
/// out remain as background-only scenes.
pub fn easy_subset(scenes: &[Scene]) -> Vec<Scene> {
    scenes
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.objects.retain(|o| o.is_easy_labeled);
            s
        })
        .collect()
}

const MAGIC: &[u8; 4] = b"SPLD";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FileHeader {
    format_version: u32,
    spec: DatasetSpec,
    split: Split,
    n_scenes: usize,
}

/// Write one split to a versioned binary file (header echoes the spec).
pub fn save_scenes(path: &Path, spec: &DatasetSpec, split: Split, scenes: &[Scene]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    let header = serde_json::to_vec(&FileHeader {
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        split,
        n_scenes: scenes.len(),
    })
    .map_err(|e| Error::Format(e.to_string()))?;
    w.write_u32::<LittleEndian>(header.len() as u32)?;
    w.write_all(&header)?;
    for s in scenes {
        w.write_u64::<LittleEndian>(s.scene_id)?;
        w.write_u32::<LittleEndian>(s.objects.len() as u32)?;
        for o in &s.objects {
            for x in [o.gt_box.cx, o.gt_box.cy, o.gt_box.w, o.gt_box.h] {
                w.write_f64::<LittleEndian>(x)?;
            }
            w.write_u8(o.difficulty)?;
            w.write_u8(o.is_easy_labeled as u8)?;
            w.write_u64::<LittleEndian>(o.object_id)?;
        }
        w.write_u32::<LittleEndian>(s.distractors.len() as u32)?;
        for b in &s.distractors {
            for x in [b.cx, b.cy, b.w, b.h] {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        w.write_u64::<LittleEndian>(s.features.len() as u64)?;
        for &f in &s.features {
            w.write_f64::<LittleEndian>(f)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read one split back; exact round trip of [`save_scenes`].
pub fn load_scenes(path: &Path) -> Result<(DatasetSpec, Split, Vec<Scene>)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let hlen = r.read_u32::<LittleEndian>()? as usize;
    let mut hbuf = vec![0u8; hlen];
    r.read_exact(&mut hbuf)?;
    let header: FileHeader =
        serde_json::from_slice(&hbuf).map_err(|e| Error::Format(e.to_string()))?;
    let mut scenes = Vec::with_capacity(header.n_scenes);
    for _ in 0..header.n_scenes {
        let scene_id = r.read_u64::<LittleEndian>()?;
        let n_obj = r.read_u32::<LittleEndian>()? as usize;
        let mut objects = Vec::with_capacity(n_obj);
        for _ in 0..n_obj {
            let cx = r.read_f64::<LittleEndian>()?;
            let cy = r.read_f64::<LittleEndian>()?;
            let w = r.read_f64::<LittleEndian>()?;
            let h = r.read_f64::<LittleEndian>()?;
            let difficulty = r.read_u8()?;
            let easy = r.read_u8()? != 0;
            let object_id = r.read_u64::<LittleEndian>()?;
            objects.push(ObjectSample {
                gt_box: BBox::new(cx, cy, w, h)?,
                difficulty,
                is_easy_labeled: easy,
                object_id,
            });
        }
        let n_dis = r.read_u32::<LittleEndian>()? as usize;
        let mut distractors = Vec::with_capacity(n_dis);
        for _ in 0..n_dis {
            let cx = r.read_f64::<LittleEndian>()?;
            let cy = r.read_f64::<LittleEndian>()?;
            let w = r.read_f64::<LittleEndian>()?;
            let h = r.read_f64::<LittleEndian>()?;
            distractors.push(BBox::new(cx, cy, w, h)?);
        }
        let flen = r.read_u64::<LittleEndian>()? as usize;
        let mut features = Vec::with_capacity(flen);
        for _ in 0..flen {
            features.push(r.read_f64::<LittleEndian>()?);
        }
        scenes.push(Scene { scene_id, split: header.split, features, objects, distractors });
    }
    Ok((header.spec, header.split, scenes))
}
