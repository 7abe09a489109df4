//! Small neural-network plumbing shared by the embedding and pipeline nets:
//! linear/conv layers, activations, parameter binding onto tapes, and
//! checkpoint round-trips.

use crate::{Adam, AdamConfig, Error, Real, Result, Rng, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Act {
    Linear,
    LeakyRelu(Real),
    Tanh,
    Sigmoid,
}

impl Act {
    pub fn apply(&self, tape: &Tape, x: &Tensor) -> Tensor {
        match self {
            Act::Linear => x.clone(),
            Act::LeakyRelu(slope) => tape.leaky_relu(x, *slope),
            Act::Tanh => tape.tanh(x),
            Act::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// Xavier-uniform initialization.
fn init_weights(rng: &mut Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<Real> {
    let limit = (6.0 / (fan_in + fan_out) as Real).sqrt();
    (0..n).map(|_| rng.range(-limit, limit)).collect()
}

/// Parameters bound to one tape: tracked for training, detached constants
/// when frozen. Index order matches the owning model's `params()`.
pub struct Bound {
    pub tensors: Vec<Tensor>,
}

fn bind(params: &[Tensor], tape: &Tape, train: bool) -> Bound {
    let tensors = params
        .iter()
        .map(|p| if train { tape.param(p) } else { p.detach() })
        .collect();
    Bound { tensors }
}

// ---------------------------------------------------------------------------
// Multi-layer perceptron.

/// Fully connected stack. `sizes` lists layer widths input-first; params are
/// stored [w0, b0, w1, b1, ...] with w: [in, out].
#[derive(Clone)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub hidden: Act,
    pub output: Act,
    params: Vec<Tensor>,
}

impl Mlp {
    pub fn init(sizes: Vec<usize>, hidden: Act, output: Act, rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2);
        let mut params = Vec::new();
        for (li, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut lrng = rng.derive(li as u64);
            params.push(Tensor::new(
                vec![fan_in, fan_out],
                init_weights(&mut lrng, fan_in, fan_out, fan_in * fan_out),
            ));
            params.push(Tensor::zeros(vec![fan_out]));
        }
        Mlp {
            sizes,
            hidden,
            output,
            params,
        }
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn bind(&self, tape: &Tape, train: bool) -> Bound {
        bind(&self.params, tape, train)
    }

    /// x: [B, sizes[0]] -> [B, sizes.last()].
    pub fn forward(&self, tape: &Tape, bound: &Bound, x: &Tensor) -> Tensor {
        let layers = self.sizes.len() - 1;
        let mut h = x.clone();
        for li in 0..layers {
            let w = &bound.tensors[2 * li];
            let b = &bound.tensors[2 * li + 1];
            h = tape.matmul(&h, w);
            h = tape.add_channels(&h, b);
            let act = if li + 1 == layers {
                self.output
            } else {
                self.hidden
            };
            h = act.apply(tape, &h);
        }
        h
    }

    /// Values-only forward for a single input row.
    pub fn forward_one(&self, x: &[Real]) -> Vec<Real> {
        let tape = Tape::inference();
        let xt = Tensor::new(vec![1, x.len()], x.to_vec());
        let bound = self.bind(&tape, false);
        self.forward(&tape, &bound, &xt).values().to_vec()
    }
}

// ---------------------------------------------------------------------------
// Convolutional stack.

#[derive(Debug, Clone, Copy)]
pub struct ConvSpec {
    pub k: usize,
    pub c_out: usize,
    pub stride: usize,
    pub act: Act,
}

/// Plain conv stack, NHWC, same-padding (pad = k/2). Params are stored
/// [w0, b0, w1, b1, ...] with w: [k, k, c_in, c_out].
#[derive(Clone)]
pub struct ConvNet {
    pub c_in: usize,
    pub specs: Vec<ConvSpec>,
    params: Vec<Tensor>,
}

impl ConvNet {
    pub fn init(c_in: usize, specs: Vec<ConvSpec>, rng: &mut Rng) -> Self {
        let mut params = Vec::new();
        let mut c_prev = c_in;
        for (li, s) in specs.iter().enumerate() {
            let fan_in = s.k * s.k * c_prev;
            let fan_out = s.k * s.k * s.c_out;
            let mut lrng = rng.derive(li as u64);
            params.push(Tensor::new(
                vec![s.k, s.k, c_prev, s.c_out],
                init_weights(&mut lrng, fan_in, fan_out, fan_in * s.c_out),
            ));
            params.push(Tensor::zeros(vec![s.c_out]));
            c_prev = s.c_out;
        }
        ConvNet {
            c_in,
            specs,
            params,
        }
    }

    pub fn c_out(&self) -> usize {
        self.specs.last().expect("non-empty net").c_out
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn bind(&self, tape: &Tape, train: bool) -> Bound {
        bind(&self.params, tape, train)
    }

    /// x: [B,H,W,c_in] -> [B,H',W',c_out].
    pub fn forward(&self, tape: &Tape, bound: &Bound, x: &Tensor) -> Tensor {
        let mut h = x.clone();
        for (li, s) in self.specs.iter().enumerate() {
            let w = &bound.tensors[2 * li];
            let b = &bound.tensors[2 * li + 1];
            h = tape.conv2d(&h, w, s.stride, s.k / 2);
            h = tape.add_channels(&h, b);
            h = s.act.apply(tape, &h);
        }
        h
    }
}

// ---------------------------------------------------------------------------
// Checkpoint helpers.

/// Append a model's parameters to a checkpoint entry list under
/// `prefix.w0/b0/w1/...`.
pub fn named_params<'a>(prefix: &str, params: &'a [Tensor]) -> Vec<(String, &'a Tensor)> {
    params
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let kind = if i % 2 == 0 { "w" } else { "b" };
            (format!("{prefix}.{kind}{}", i / 2), t)
        })
        .collect()
}

/// Restore parameters saved by [`named_params`], shape-checked against the
/// freshly initialized model.
pub fn restore_params(
    prefix: &str,
    params: &mut [Tensor],
    loaded: &mut Vec<(String, Tensor)>,
) -> Result<()> {
    for (i, p) in params.iter_mut().enumerate() {
        let kind = if i % 2 == 0 { "w" } else { "b" };
        let name = format!("{prefix}.{kind}{}", i / 2);
        let t = diffnum::checkpoint::take_tensor(loaded, &name)
            .map_err(|e| Error::Model(e.to_string()))?;
        if t.shape() != p.shape() {
            return Err(Error::Model(format!(
                "checkpoint tensor `{name}` has shape {:?}, expected {:?}",
                t.shape(),
                p.shape()
            )));
        }
        *p = t;
    }
    Ok(())
}

/// Adam state for one model's parameter list.
pub fn adam_for(params: &[Tensor], lr: Real) -> Adam {
    Adam::new(AdamConfig::with_lr(lr), params)
}

/// Apply one update given gradients keyed by the bound (tracked) tensors.
pub fn step_model(
    opt: &mut Adam,
    params: &mut [Tensor],
    bound: &Bound,
    grads: &diffnum::Gradients<Real>,
) -> Result<()> {
    let gvec: Vec<Option<Vec<Real>>> = bound
        .tensors
        .iter()
        .map(|t| grads.get(t).map(|g| g.to_vec()))
        .collect();
    opt.apply(params, &gvec).map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_shapes_and_determinism() {
        let mut rng = Rng::new(7);
        let mlp = Mlp::init(vec![4, 8, 3], Act::LeakyRelu(0.1), Act::Tanh, &mut rng);
        let tape = Tape::inference();
        let x = Tensor::new(vec![2, 4], vec![0.1; 8]);
        let bound = mlp.bind(&tape, false);
        let y1 = mlp.forward(&tape, &bound, &x);
        let y2 = mlp.forward(&tape, &bound, &x);
        assert_eq!(y1.shape(), &[2, 3]);
        assert!(y1.bits_eq(&y2));
        assert!(y1.values().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn convnet_spatial_shapes() {
        let mut rng = Rng::new(9);
        let net = ConvNet::init(
            3,
            vec![
                ConvSpec {
                    k: 3,
                    c_out: 4,
                    stride: 2,
                    act: Act::LeakyRelu(0.1),
                },
                ConvSpec {
                    k: 1,
                    c_out: 6,
                    stride: 1,
                    act: Act::Linear,
                },
            ],
            &mut rng,
        );
        let tape = Tape::inference();
        let x = Tensor::zeros(vec![1, 8, 8, 3]);
        let bound = net.bind(&tape, false);
        let y = net.forward(&tape, &bound, &x);
        assert_eq!(y.shape(), &[1, 4, 4, 6]);
    }

    #[test]
    fn training_reduces_a_toy_regression_loss() {
        let mut rng = Rng::new(11);
        let mut mlp = Mlp::init(vec![2, 16, 1], Act::Tanh, Act::Linear, &mut rng);
        let xs = Tensor::new(
            vec![8, 2],
            (0..16).map(|i| (i as Real) * 0.1 - 0.8).collect(),
        );
        let target = Tensor::new(
            vec![8, 1],
            (0..8).map(|i| ((i as Real) * 0.2).sin()).collect(),
        );
        let mut opt = adam_for(mlp.params(), 1e-2);
        let loss_at = |mlp: &Mlp| {
            let tape = Tape::inference();
            let bound = mlp.bind(&tape, false);
            let y = mlp.forward(&tape, &bound, &xs);
            let d = tape.sub(&y, &target);
            tape.mean_all(&tape.mul(&d, &d)).item()
        };
        let before = loss_at(&mlp);
        for _ in 0..200 {
            let tape = Tape::new();
            let bound = mlp.bind(&tape, true);
            let y = mlp.forward(&tape, &bound, &xs);
            let d = tape.sub(&y, &target);
            let loss = tape.mean_all(&tape.mul(&d, &d));
            let grads = tape.backward(&loss).unwrap();
            drop(loss);
            step_model(&mut opt, mlp.params_mut(), &bound, &grads).unwrap();
        }
        let after = loss_at(&mlp);
        assert!(after < before * 0.1, "loss {before} -> {after}");
    }

    #[test]
    fn checkpoint_round_trip_restores_bits() {
        let mut rng = Rng::new(13);
        let mlp = Mlp::init(vec![3, 5, 2], Act::Tanh, Act::Linear, &mut rng);
        let entries: Vec<(String, &Tensor)> = named_params("enc", mlp.params());
        let refs: Vec<(&str, &Tensor)> = entries.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        let mut buf = Vec::new();
        diffnum::checkpoint::save(&mut buf, &refs).unwrap();
        let mut loaded = diffnum::checkpoint::load::<Real, _>(&buf[..]).unwrap();
        let mut fresh = Mlp::init(vec![3, 5, 2], Act::Tanh, Act::Linear, &mut Rng::new(99));
        restore_params("enc", fresh.params_mut(), &mut loaded).unwrap();
        for (a, b) in fresh.params().iter().zip(mlp.params()) {
            assert!(a.bits_eq(b));
        }
    }
}
