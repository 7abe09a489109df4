//! Generative pose embedding: an adversarial autoencoder over local poses
//! with a uniform prior on [-1,1]^32. The encoder ends in tanh so every
//! embedding is in range; the decoder ends in a per-joint normalization so
//! every decode is a valid unit-vector pose. After training the decoder is
//! frozen and shared by the whole pipeline.

use std::path::Path;

use crate::nn::{adam_for, named_params, restore_params, step_model, Act, Bound, Mlp};
use crate::skeleton::LocalPose;
use crate::{Error, Real, Result, Rng, Tape, Tensor};

pub const LATENT_DIM: usize = 32;

/// A 32-dimensional pose code, every component in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PoseEmbedding(Vec<Real>);

impl PoseEmbedding {
    pub fn new(values: Vec<Real>) -> Result<Self> {
        if values.len() != LATENT_DIM {
            return Err(Error::Pose(format!(
                "embedding has {} components",
                values.len()
            )));
        }
        if values.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Pose("embedding component out of [-1,1]".into()));
        }
        Ok(PoseEmbedding(values))
    }

    /// Clamp hand-made inputs into range; the bool reports whether any
    /// component needed clamping (network outputs never do, being
    /// tanh-bounded).
    pub fn clamped(values: Vec<Real>) -> (Self, bool) {
        let mut clamped = false;
        let vs = values
            .into_iter()
            .map(|v| {
                let c = v.clamp(-1.0, 1.0);
                clamped |= c != v;
                c
            })
            .collect();
        (PoseEmbedding(vs), clamped)
    }

    pub fn values(&self) -> &[Real] {
        &self.0
    }

    pub fn uniform(rng: &mut Rng) -> Self {
        PoseEmbedding((0..LATENT_DIM).map(|_| rng.range(-1.0, 1.0)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct AaeConfig {
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub lr: Real,
    pub batch: usize,
    pub iters: usize,
    pub holdout: usize,
    pub adv_weight: Real,
    pub log_every: usize,
}

impl Default for AaeConfig {
    fn default() -> Self {
        AaeConfig {
            enc_hidden: vec![256, 256],
            dec_hidden: vec![256, 256],
            disc_hidden: vec![128],
            lr: 1e-4,
            batch: 32,
            iters: 12_000,
            holdout: 2_000,
            adv_weight: 1.0,
            log_every: 250,
        }
    }
}

/// Encoder, decoder, and latent discriminator. `num_vectors` is the local
/// pose row count (14 for the default skeleton).
pub struct AaeModel {
    pub enc: Mlp,
    pub dec: Mlp,
    pub disc: Mlp,
    pub num_vectors: usize,
}

impl AaeModel {
    pub fn init(cfg: &AaeConfig, num_vectors: usize, rng: &mut Rng) -> Self {
        let input = num_vectors * 3;
        let mut enc_sizes = vec![input];
        enc_sizes.extend(&cfg.enc_hidden);
        enc_sizes.push(LATENT_DIM);
        let mut dec_sizes = vec![LATENT_DIM];
        dec_sizes.extend(&cfg.dec_hidden);
        dec_sizes.push(input);
        let mut disc_sizes = vec![LATENT_DIM];
        disc_sizes.extend(&cfg.disc_hidden);
        disc_sizes.push(1);
        let mut dec = Mlp::init(
            dec_sizes,
            Act::LeakyRelu(0.1),
            Act::Linear,
            &mut rng.derive(2),
        );
        // Bias the raw output toward unit +z rows so even the untrained
        // decoder (and the all-zero embedding) normalizes cleanly.
        let last = dec.params().len() - 1;
        let bias: Vec<Real> = (0..input)
            .map(|i| if i % 3 == 2 { 0.5 } else { 0.0 })
            .collect();
        dec.params_mut()[last] = Tensor::new(vec![input], bias);
        AaeModel {
            enc: Mlp::init(
                enc_sizes,
                Act::LeakyRelu(0.1),
                Act::Tanh,
                &mut rng.derive(1),
            ),
            dec,
            disc: Mlp::init(
                disc_sizes,
                Act::LeakyRelu(0.1),
                Act::Linear,
                &mut rng.derive(3),
            ),
            num_vectors,
        }
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let meta = Tensor::new(vec![2], vec![LATENT_DIM as Real, self.num_vectors as Real]);
        let enc_sizes = sizes_tensor(&self.enc);
        let dec_sizes = sizes_tensor(&self.dec);
        let disc_sizes = sizes_tensor(&self.disc);
        let mut entries: Vec<(String, &Tensor)> = vec![
            ("meta.arch".into(), &meta),
            ("meta.enc_sizes".into(), &enc_sizes),
            ("meta.dec_sizes".into(), &dec_sizes),
            ("meta.disc_sizes".into(), &disc_sizes),
        ];
        entries.extend(named_params("enc", self.enc.params()));
        entries.extend(named_params("dec", self.dec.params()));
        entries.extend(named_params("disc", self.disc.params()));
        let refs: Vec<(&str, &Tensor)> = entries.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        diffnum::checkpoint::save_file(path, &refs)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut entries = diffnum::checkpoint::load_file::<Real, _>(path)?;
        let take = |entries: &mut Vec<(String, Tensor)>, name: &str| {
            diffnum::checkpoint::take_tensor(entries, name).map_err(|e| Error::Model(e.to_string()))
        };
        let meta = take(&mut entries, "meta.arch")?;
        if meta.values()[0] as usize != LATENT_DIM {
            return Err(Error::Model("checkpoint latent dim mismatch".into()));
        }
        let num_vectors = meta.values()[1] as usize;
        let enc_sizes = tensor_sizes(&take(&mut entries, "meta.enc_sizes")?);
        let dec_sizes = tensor_sizes(&take(&mut entries, "meta.dec_sizes")?);
        let disc_sizes = tensor_sizes(&take(&mut entries, "meta.disc_sizes")?);
        let mut rng = Rng::new(0);
        let mut model = AaeModel {
            enc: Mlp::init(enc_sizes, Act::LeakyRelu(0.1), Act::Tanh, &mut rng),
            dec: Mlp::init(dec_sizes, Act::LeakyRelu(0.1), Act::Linear, &mut rng),
            disc: Mlp::init(disc_sizes, Act::LeakyRelu(0.1), Act::Linear, &mut rng),
            num_vectors,
        };
        restore_params("enc", model.enc.params_mut(), &mut entries)?;
        restore_params("dec", model.dec.params_mut(), &mut entries)?;
        restore_params("disc", model.disc.params_mut(), &mut entries)?;
        Ok(model)
    }
}

fn sizes_tensor(mlp: &Mlp) -> Tensor {
    Tensor::new(
        vec![mlp.sizes.len()],
        mlp.sizes.iter().map(|&s| s as Real).collect(),
    )
}

fn tensor_sizes(t: &Tensor) -> Vec<usize> {
    t.values().iter().map(|&v| v as usize).collect()
}

/// Decode a tracked [LATENT_DIM] embedding into a [num_vectors, 3] tensor of
/// exactly unit rows; differentiable with respect to the embedding.
pub fn decode_t(tape: &Tape, dec: &Mlp, bound: &Bound, phi: &Tensor, num_vectors: usize) -> Tensor {
    let x = tape.reshape(phi, vec![1, LATENT_DIM]);
    let raw = dec.forward(tape, bound, &x);
    let rows = tape.reshape(&raw, vec![num_vectors, 3]);
    normalize_rows_t(tape, &rows)
}

/// Row-normalize a [R,3] tensor. The squared norm is floored at 1e-24 so a
/// degenerate all-zero row cannot produce non-finite output.
pub fn normalize_rows_t(tape: &Tape, rows: &Tensor) -> Tensor {
    let r = rows.shape()[0];
    let sq = tape.mul(rows, rows);
    let ones = Tensor::new(vec![3, 1], vec![1.0; 3]);
    let norms2 = tape.matmul(&sq, &ones);
    let norms2 = tape.max_const(&tape.reshape(&norms2, vec![r]), 1e-24);
    let inv = tape.recip(&tape.sqrt(&norms2));
    tape.scale_rows(rows, &inv)
}

pub fn encode(model: &AaeModel, pose: &LocalPose) -> PoseEmbedding {
    let out = model.enc.forward_one(&pose.flat());
    PoseEmbedding(out)
}

pub fn decode(model: &AaeModel, phi: &PoseEmbedding) -> LocalPose {
    let tape = Tape::inference();
    let bound = model.dec.bind(&tape, false);
    let phi_t = Tensor::new(vec![LATENT_DIM], phi.values().to_vec());
    let rows = decode_t(&tape, &model.dec, &bound, &phi_t, model.num_vectors);
    LocalPose::from_raw_normalized(
        rows.values()
            .chunks(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect(),
    )
}

#[derive(Debug, Clone)]
pub struct AaeLogEntry {
    pub iter: usize,
    pub recon: Real,
    pub disc_loss: Real,
    pub gen_loss: Real,
}

#[derive(Debug, Clone, Default)]
pub struct AaeLog {
    pub entries: Vec<AaeLogEntry>,
}

/// Mean per-joint angular error (radians) of encode-decode round trips.
pub fn mean_angular_error(model: &AaeModel, poses: &[LocalPose]) -> Real {
    let mut total = 0.0;
    let mut count = 0usize;
    for p in poses {
        let dec = decode(model, &encode(model, p));
        for (u, v) in p.vectors().iter().zip(dec.vectors()) {
            let dot = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0);
            total += dot.acos();
            count += 1;
        }
    }
    total / count as Real
}

/// Discriminator accuracy separating prior draws from posterior codes;
/// 0.5 means the adversarial game is balanced.
pub fn disc_accuracy(model: &AaeModel, poses: &[LocalPose], rng: &mut Rng) -> Real {
    let mut correct = 0usize;
    for p in poses {
        let phi = encode(model, p);
        let fake_logit = model.disc.forward_one(phi.values())[0];
        if fake_logit <= 0.0 {
            correct += 1;
        }
        let z = PoseEmbedding::uniform(rng);
        let real_logit = model.disc.forward_one(z.values())[0];
        if real_logit > 0.0 {
            correct += 1;
        }
    }
    correct as Real / (2 * poses.len()) as Real
}

/// Alternating reconstruction / adversarial training. Deterministic under
/// the caller's rng: batch draws are keyed by iteration index.
pub fn train_aae(
    poses: &[LocalPose],
    cfg: &AaeConfig,
    rng: &mut Rng,
) -> Result<(AaeModel, AaeLog)> {
    if poses.is_empty() {
        return Err(Error::Train("empty pose dataset".into()));
    }
    if cfg.lr <= 0.0 {
        return Err(Error::Train("non-positive learning rate".into()));
    }
    let num_vectors = poses[0].num_vectors();
    let input = num_vectors * 3;
    let train_n = poses.len().saturating_sub(cfg.holdout).max(1);

    let flat: Vec<Real> = poses.iter().flat_map(|p| p.flat()).collect();
    let mut model = AaeModel::init(cfg, num_vectors, &mut rng.derive(101));

    let mut opt_enc = adam_for(model.enc.params(), cfg.lr);
    let mut opt_dec = adam_for(model.dec.params(), cfg.lr);
    let mut opt_disc = adam_for(model.disc.params(), cfg.lr);
    let mut opt_enc_adv = adam_for(model.enc.params(), cfg.lr);

    let batch_rng = rng.derive(202);
    let mut log = AaeLog::default();

    for iter in 0..cfg.iters {
        let mut brng = batch_rng.derive(iter as u64);
        let mut batch = Vec::with_capacity(cfg.batch * input);
        for _ in 0..cfg.batch {
            let idx = brng.below(train_n);
            batch.extend_from_slice(&flat[idx * input..(idx + 1) * input]);
        }
        let x = Tensor::new(vec![cfg.batch, input], batch);

        // (1) Reconstruction: mean per-joint (1 - cos) between input and
        // normalized decode, a smooth surrogate for angular error.
        let recon = {
            let tape = Tape::new();
            let enc_b = model.enc.bind(&tape, true);
            let dec_b = model.dec.bind(&tape, true);
            let phi = model.enc.forward(&tape, &enc_b, &x);
            let raw = model.dec.forward(&tape, &dec_b, &phi);
            let rows = tape.reshape(&raw, vec![cfg.batch * num_vectors, 3]);
            let unit = normalize_rows_t(&tape, &rows);
            let target = tape.reshape(&x, vec![cfg.batch * num_vectors, 3]);
            let dots = tape.mul(&unit, &target);
            let ones = Tensor::new(vec![3, 1], vec![1.0; 3]);
            let per_row = tape.matmul(&dots, &ones);
            let loss = tape.add_const(&tape.neg(&tape.mean_all(&per_row)), 1.0);
            let grads = tape.backward(&loss)?;
            step_model(&mut opt_enc, model.enc.params_mut(), &enc_b, &grads)?;
            step_model(&mut opt_dec, model.dec.params_mut(), &dec_b, &grads)?;
            loss.item()
        };

        // (2) Discriminator: separate uniform prior draws from posterior
        // codes (non-saturating logistic loss).
        let mut zrng = batch_rng.derive(0x5A5A_0000 ^ iter as u64);
        let mut zvals = Vec::with_capacity(cfg.batch * LATENT_DIM);
        for _ in 0..cfg.batch * LATENT_DIM {
            zvals.push(zrng.range(-1.0, 1.0));
        }
        let z = Tensor::new(vec![cfg.batch, LATENT_DIM], zvals);
        let disc_loss = {
            let tape = Tape::new();
            let enc_b = model.enc.bind(&tape, false);
            let disc_b = model.disc.bind(&tape, true);
            let phi = model.enc.forward(&tape, &enc_b, &x).detach();
            let real = model.disc.forward(&tape, &disc_b, &z);
            let fake = model.disc.forward(&tape, &disc_b, &phi);
            let l_real = tape.mean_all(&tape.softplus(&tape.neg(&real)));
            let l_fake = tape.mean_all(&tape.softplus(&fake));
            let loss = tape.add(&l_real, &l_fake);
            let grads = tape.backward(&loss)?;
            step_model(&mut opt_disc, model.disc.params_mut(), &disc_b, &grads)?;
            loss.item()
        };

        // (3) Generator: the encoder fools the (frozen) discriminator.
        let gen_loss = {
            let tape = Tape::new();
            let enc_b = model.enc.bind(&tape, true);
            let disc_b = model.disc.bind(&tape, false);
            let phi = model.enc.forward(&tape, &enc_b, &x);
            let logit = model.disc.forward(&tape, &disc_b, &phi);
            let loss = tape.mul_const(
                &tape.mean_all(&tape.softplus(&tape.neg(&logit))),
                cfg.adv_weight,
            );
            let grads = tape.backward(&loss)?;
            step_model(&mut opt_enc_adv, model.enc.params_mut(), &enc_b, &grads)?;
            loss.item()
        };

        if iter % cfg.log_every == 0 || iter + 1 == cfg.iters {
            log.entries.push(AaeLogEntry {
                iter,
                recon,
                disc_loss,
                gen_loss,
            });
        }
    }
    Ok((model, log))
}
