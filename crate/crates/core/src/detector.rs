//! Tiny differentiable per-anchor detector and the Adam optimizer.
//!
//! Each anchor's feature vector is mapped through a two-layer MLP to five
//! raw outputs: one confidence logit (squashed with a logistic) and four box
//! offsets (softplus-activated, scaled to scene units). Gradients of the
//! SPL-weighted scene loss are computed analytically; the CIOU part uses the
//! dual-number path in [`crate::boxes`].

use crate::assignment::{AnchorAssignment, AnchorGrid, AnchorLabel, PredictionMaps};
use crate::boxes::{ciou_loss_grad_offsets, BBox};
use crate::error::{Error, Result};
use crate::spl::WeightVector;
use crate::synth::{Scene, FEATURE_DIM};
use crate::Scalar;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub feature_dim: usize,
    pub hidden: usize,
    /// Scene units per unit of softplus output on the offset channels.
    pub offset_scale: Scalar,
    /// Variance of the zero-mean normal parameter initialization.
    pub init_variance: Scalar,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            feature_dim: FEATURE_DIM,
            hidden: 16,
            offset_scale: 16.0,
            init_variance: 0.01,
        }
    }
}

const OUT: usize = 5;

/// Flat parameter buffer: `w1 (h x d) | b1 (h) | w2 (5 x h) | b2 (5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub cfg: DetectorConfig,
    pub data: Vec<Scalar>,
}

fn softplus(x: Scalar) -> Scalar {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: Scalar) -> Scalar {
    1.0 / (1.0 + (-x).exp())
}

impl DetectorParams {
    pub fn n_params(cfg: &DetectorConfig) -> usize {
        cfg.hidden * cfg.feature_dim + cfg.hidden + OUT * cfg.hidden + OUT
    }

    /// Random init: normal with mean 0 and the configured variance.
    pub fn init(cfg: DetectorConfig, rng: &mut impl RngCore) -> Self {
        use rand::Rng;
        let std = cfg.init_variance.sqrt();
        let n = Self::n_params(&cfg);
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            data.push(std * z);
        }
        Self { cfg, data }
    }

    pub fn zeros(cfg: DetectorConfig) -> Self {
        let n = Self::n_params(&cfg);
        Self { cfg, data: vec![0.0; n] }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let d = self.cfg.feature_dim;
        let h = self.cfg.hidden;
        (h * d, h * d + h, h * d + h + OUT * h)
    }

    /// Forward pass over every anchor of the scene.
    pub fn forward(&self, scene: &Scene, grid: &AnchorGrid<Scalar>) -> Result<PredictionMaps<Scalar>> {
        Ok(self.forward_cached(scene, grid)?.0)
    }

    /// Forward pass that also returns the activations needed by
    /// [`DetectorParams::backward`].
    pub fn forward_cached(
        &self,
        scene: &Scene,
        grid: &AnchorGrid<Scalar>,
    ) -> Result<(PredictionMaps<Scalar>, ForwardCache)> {
        let d = self.cfg.feature_dim;
        let h = self.cfg.hidden;
        if scene.features.len() != grid.len() * d {
            return Err(Error::contract(format!(
                "scene feature length {} does not match grid {}x{} with d={d}",
                scene.features.len(),
                grid.width,
                grid.height
            )));
        }
        let (ob1, ow2, ob2) = self.offsets();
        let w1 = &self.data[..h * d];
        let b1 = &self.data[ob1..ob1 + h];
        let w2 = &self.data[ow2..ow2 + OUT * h];
        let b2 = &self.data[ob2..ob2 + OUT];

        let n = grid.len();
        let mut conf = Vec::with_capacity(n);
        let mut reg = Vec::with_capacity(n);
        let mut a1 = vec![0.0; n * h];
        let mut s1 = vec![0.0; n * h];
        let mut off_sig = vec![[0.0; 4]; n];

        for a in 0..n {
            let f = scene.feature(a);
            let act = &mut a1[a * h..(a + 1) * h];
            let sig = &mut s1[a * h..(a + 1) * h];
            for k in 0..h {
                let row = &w1[k * d..(k + 1) * d];
                let mut z = b1[k];
                for c in 0..d {
                    z += row[c] * f[c];
                }
                act[k] = softplus(z);
                sig[k] = sigmoid(z);
            }
            let mut z2 = [0.0; OUT];
            for j in 0..OUT {
                let row = &w2[j * h..(j + 1) * h];
                let mut z = b2[j];
                for k in 0..h {
                    z += row[k] * act[k];
                }
                z2[j] = z;
            }
            conf.push(sigmoid(z2[0]));
            let mut o = [0.0; 4];
            for j in 0..4 {
                o[j] = self.cfg.offset_scale * softplus(z2[j + 1]);
                off_sig[a][j] = sigmoid(z2[j + 1]);
            }
            reg.push(o);
        }

        let maps = PredictionMaps { width: grid.width, height: grid.height, conf, reg };
        Ok((maps, ForwardCache { a1, s1, off_sig }))
    }

    /// Analytic gradient of the SPL-weighted scene loss.
    ///
    /// Returns the weighted total loss and the gradient in parameter layout.
    /// `maps`/`cache` must come from [`DetectorParams::forward_cached`] on
    /// the same scene with the current parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        scene: &Scene,
        grid: &AnchorGrid<Scalar>,
        maps: &PredictionMaps<Scalar>,
        cache: &ForwardCache,
        assignment: &AnchorAssignment,
        gt: &[BBox<Scalar>],
        v: &WeightVector<Scalar>,
        alpha: Scalar,
        n_fixed: Scalar,
    ) -> Result<(Scalar, Vec<Scalar>)> {
        let d = self.cfg.feature_dim;
        let h = self.cfg.hidden;
        if v.len() != gt.len() {
            return Err(Error::contract("weight vector length mismatch"));
        }
        // Mirror of the loss normalizer: anchors of nonzero-weight objects.
        let mut active = 0usize;
        for (i, anchors) in assignment.object_anchors.iter().enumerate() {
            if v[i] != 0.0 {
                active += anchors.len();
            }
        }
        let norm = if active > 0 { active as Scalar } else { n_fixed };
        let inv_n = 1.0 / norm;

        let (ob1, ow2, ob2) = self.offsets();
        let w2 = &self.data[ow2..ow2 + OUT * h];

        let mut grad = vec![0.0; self.data.len()];
        let mut neg_loss = 0.0;
        let mut weighted_obj = 0.0;
        let mut per_object = vec![0.0; gt.len()];

        for (a, label) in assignment.labels.iter().enumerate() {
            let conf = maps.conf[a];
            // dL/d(conf), dL/d(offset_j) for this anchor.
            let dconf;
            let mut doff = [0.0; 4];
            match label {
                AnchorLabel::Ignore => continue,
                AnchorLabel::Negative => {
                    neg_loss += conf * conf;
                    dconf = 2.0 * conf * inv_n;
                }
                AnchorLabel::Positive(i) => {
                    let i = *i;
                    let vi = v[i];
                    let (ax, ay) = grid.center(a);
                    let (lc, gc) = {
                        let diff = conf - 1.0;
                        (diff * diff, 2.0 * diff)
                    };
                    let (lr, gr) = ciou_loss_grad_offsets(&gt[i], ax, ay, maps.reg[a])?;
                    per_object[i] += lc + alpha * lr;
                    if vi != 0.0 {
                        let w = vi * inv_n;
                        dconf = w * gc;
                        for j in 0..4 {
                            doff[j] = w * alpha * gr[j];
                        }
                    } else {
                        continue;
                    }
                }
            }

            // Through the output activations.
            let mut dz2 = [0.0; OUT];
            dz2[0] = dconf * conf * (1.0 - conf);
            for j in 0..4 {
                dz2[j + 1] = doff[j] * self.cfg.offset_scale * cache.off_sig[a][j];
            }

            let act = &cache.a1[a * h..(a + 1) * h];
            let sig = &cache.s1[a * h..(a + 1) * h];
            let f = scene.feature(a);
            for j in 0..OUT {
                let g = dz2[j];
                if g == 0.0 {
                    continue;
                }
                let gw2 = &mut grad[ow2 + j * h..ow2 + (j + 1) * h];
                for k in 0..h {
                    gw2[k] += g * act[k];
                }
                grad[ob2 + j] += g;
            }
            for k in 0..h {
                let mut da = 0.0;
                for j in 0..OUT {
                    da += w2[j * h + k] * dz2[j];
                }
                let dz1 = da * sig[k];
                if dz1 == 0.0 {
                    continue;
                }
                let gw1 = &mut grad[k * d..(k + 1) * d];
                for c in 0..d {
                    gw1[c] += dz1 * f[c];
                }
                grad[ob1 + k] += dz1;
            }
        }

        for i in 0..gt.len() {
            weighted_obj += v[i] * per_object[i];
        }
        let loss = (neg_loss + weighted_obj) * inv_n;
        Ok((loss, grad))
    }
}

/// Activations cached by the forward pass for reuse in backward.
pub struct ForwardCache {
    /// Hidden activations (softplus), `anchors x hidden`.
    pub a1: Vec<Scalar>,
    /// Hidden activation derivatives (logistic), `anchors x hidden`.
    pub s1: Vec<Scalar>,
    /// Logistic of the raw offset outputs, per anchor.
    pub off_sig: Vec<[Scalar; 4]>,
}

/// Adam optimizer state with per-epoch learning-rate decay.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Scalar>,
    pub v: Vec<Scalar>,
    pub step: u64,
    pub learning_rate: Scalar,
    pub decay_per_epoch: Scalar,
    pub beta1: Scalar,
    pub beta2: Scalar,
    pub epsilon: Scalar,
}

impl OptimizerState {
    pub fn new(n_params: usize, learning_rate: Scalar, decay_per_epoch: Scalar) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            learning_rate,
            decay_per_epoch,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One Adam update with bias correction.
    pub fn step(&mut self, params: &mut DetectorParams, grads: &[Scalar]) -> Result<()> {
        if grads.len() != params.data.len() {
            return Err(Error::contract("gradient length mismatch"));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                epoch: 0,
                detail: "non-finite gradient".to_string(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..grads.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params.data[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
        }
        Ok(())
    }

    /// Apply the per-epoch learning-rate decay.
    pub fn end_epoch(&mut self) {
        self.learning_rate *= self.decay_per_epoch;
    }
}

const CKPT_MAGIC: &[u8; 4] = b"SPLC";
const CKPT_VERSION: u32 = 1;

/// Model + optimizer + epoch counter, round-trip exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: u64,
    pub params: DetectorParams,
    pub optimizer: OptimizerState,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(CKPT_MAGIC)?;
        w.write_u32::<LittleEndian>(CKPT_VERSION)?;
        let cfg = serde_json::to_vec(&self.params.cfg).map_err(|e| Error::Format(e.to_string()))?;
        w.write_u32::<LittleEndian>(cfg.len() as u32)?;
        w.write_all(&cfg)?;
        w.write_u64::<LittleEndian>(self.epoch)?;
        w.write_u64::<LittleEndian>(self.params.data.len() as u64)?;
        for &x in &self.params.data {
            w.write_f64::<LittleEndian>(x)?;
        }
        for &x in self.optimizer.m.iter().chain(&self.optimizer.v) {
            w.write_f64::<LittleEndian>(x)?;
        }
        w.write_u64::<LittleEndian>(self.optimizer.step)?;
        for x in [
            self.optimizer.learning_rate,
            self.optimizer.decay_per_epoch,
            self.optimizer.beta1,
            self.optimizer.beta2,
            self.optimizer.epsilon,
        ] {
            w.write_f64::<LittleEndian>(x)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CKPT_MAGIC {
            return Err(Error::Format("not a checkpoint file".to_string()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != CKPT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let clen = r.read_u32::<LittleEndian>()? as usize;
        let mut cbuf = vec![0u8; clen];
        r.read_exact(&mut cbuf)?;
        let cfg: DetectorConfig =
            serde_json::from_slice(&cbuf).map_err(|e| Error::Format(e.to_string()))?;
        let epoch = r.read_u64::<LittleEndian>()?;
        let n = r.read_u64::<LittleEndian>()? as usize;
        if n != DetectorParams::n_params(&cfg) {
            return Err(Error::Format("parameter count mismatch".to_string()));
        }
        let mut read_vec = |len: usize| -> Result<Vec<Scalar>> {
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                v.push(r.read_f64::<LittleEndian>()?);
            }
            Ok(v)
        };
        let data = read_vec(n)?;
        let m = read_vec(n)?;
        let vv = read_vec(n)?;
        let step = r.read_u64::<LittleEndian>()?;
        let learning_rate = r.read_f64::<LittleEndian>()?;
        let decay_per_epoch = r.read_f64::<LittleEndian>()?;
        let beta1 = r.read_f64::<LittleEndian>()?;
        let beta2 = r.read_f64::<LittleEndian>()?;
        let epsilon = r.read_f64::<LittleEndian>()?;
        Ok(Checkpoint {
            epoch,
            params: DetectorParams { cfg, data },
            optimizer: OptimizerState {
                m,
                v: vv,
                step,
                learning_rate,
                decay_per_epoch,
                beta1,
                beta2,
                epsilon,
            },
        })
    }
}
