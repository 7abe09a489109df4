//! Elementwise, structural, and reduction primitives. Each op computes its
//! output eagerly and, when an input is tracked, records a pullback mapping
//! the output cotangent to input cotangents.
//!
//! Shape mismatches and non-finite outputs are programmer errors and panic.


use crate::tape::Tape;
use crate::tensor::{DiffTensor, Scalar};

impl<T: Scalar> Tape<T> {
    fn unary(
        &self,
        a: &DiffTensor<T>,
        op: &str,
        fwd: impl Fn(T) -> T,
        // vjp(x, y) where y = fwd(x): local derivative dy/dx
        vjp: impl Fn(T, T) -> T + Send + 'static,
    ) -> DiffTensor<T> {
        let vals: Vec<T> = a.values().iter().map(|&x| fwd(x)).collect();
        let out = DiffTensor::new(a.shape().to_vec(), vals);
        out.assert_finite(op);
        let Some(ai) = a.node_id() else { return out };
        let xs = a.values_arc();
        let ys = out.values_arc();
        self.record(
            out,
            Box::new(move |g, slots| slots.accum_with(ai, |i| g[i] * vjp(xs[i], ys[i]))),
        )
    }

    pub fn add(&self, a: &DiffTensor<T>, b: &DiffTensor<T>) -> DiffTensor<T> {
        assert_eq!(a.shape(), b.shape(), "add shape mismatch");
        let vals: Vec<T> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| x + y)
            .collect();
        let out = DiffTensor::new(a.shape().to_vec(), vals);
        let (an, bn) = (a.node_id(), b.node_id());
        if an.is_none() && bn.is_none() {
            return out;
        }
        self.record(
            out,
            Box::new(move |g, slots| {
                if let Some(ai) = an {
                    slots.accum_slice(ai, g);
                }
                if let Some(bi) = bn {
                    slots.accum_slice(bi, g);
                }
            }),
        )
    }

    pub fn sub(&self, a: &DiffTensor<T>, b: &DiffTensor<T>) -> DiffTensor<T> {
        assert_eq!(a.shape(), b.shape(), "sub shape mismatch");
        let vals: Vec<T> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| x - y)
            .collect();
        let out = DiffTensor::new(a.shape().to_vec(), vals);
        let (an, bn) = (a.node_id(), b.node_id());
        if an.is_none() && bn.is_none() {
            return out;
        }
        self.record(
            out,
            Box::new(move |g, slots| {
                if let Some(ai) = an {
                    slots.accum_slice(ai, g);
                }
                if let Some(bi) = bn {
                    slots.accum_with(bi, |i| -g[i]);
                }
            }),
        )
    }

    pub fn mul(&self, a: &DiffTensor<T>, b: &DiffTensor<T>) -> DiffTensor<T> {
        assert_eq!(a.shape(), b.shape(), "mul shape mismatch");
        let vals: Vec<T> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = DiffTensor::new(a.shape().to_vec(), vals);
        let (an, bn) = (a.node_id(), b.node_id());
        if an.is_none() && bn.is_none() {
            return out;
        }
        let (av, bv) = (a.values_arc(), b.values_arc());
        self.record(
            out,
            Box::new(move |g, slots| {
                if let Some(ai) = an {
                    slots.accum_with(ai, |i| g[i] * bv[i]);
                }
                if let Some(bi) = bn {
                    slots.accum_with(bi, |i| g[i] * av[i]);
                }
            }),
        )
    }

    pub fn neg(&self, a: &DiffTensor<T>) -> DiffTensor<T> {
        self.unary(a, "neg", |x| -x, |_, _| -T::one())
    }

    pub fn add_const(&self, a: &DiffTensor<T>, c: T) -> DiffTensor<T> {
        self.unary(a, "add_const", |x| x + c, |_, _| T::one())
    }

    pub fn mul_const(&self, a: &DiffTensor<T>, c: T) -> DiffTensor<T> {
        self.unary(a, "mul_const", |x| x * c, move |_, _| c)
    }

    /// |x|, with subgradient 0 at the kink.
    pub fn abs(&self, a: &DiffTensor<T>) -> DiffTensor<T> {
        self.unary(
            a,
            "abs",
            |x| x.abs(),
            |x, _| {
                if x > T::zero() {
                    T::one()
                } else if x < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            },
        )
    }

    pub fn tanh(&self, a: &DiffTensor<T>) -> DiffTensor<T> {
        self.unary(a, "tanh", |x| x.tanh(), |_, y| T::one() - y * y)
    }

    pub fn sigmoid(&self, a: &DiffTensor<T>) -> DiffTensor<T> {
        self.unary(a, "sigmoid", sigmoid_stable, |_, y| y * (T::one() - y))
    }

    /// ln(1 + e^x), computed in overflow-safe form; strictly positive.
    pub fn softplus(&self, a: &DiffTensor<T>) -> DiffTensor<T> {
        self.unary(a, "softplus", softplus_stable, |x, _| sigmoid_stable(x))
    }

    /// Domain x > 0.
    pub fn sqrt(&self, a: &DiffTensor<T>) -> DiffTensor<T> {
        self.unary(
            a,
            "sqrt",
            |x| x.sqrt(),
            |_, y| T::one() / (T::lit(2.0) * y),
        )
    }

    /// Domain x != 0.
    pub fn recip(&self, a: &DiffTensor<T>) -> DiffTensor<T> {
        self.unary(a, "recip", |x| T::one() / x, |_, y| -(y * y))
    }

    pub fn leaky_relu(&self, a: &DiffTensor<T>, slope: T) -> DiffTensor<T> {
        self.unary(
            a,
            "leaky_relu",
            move |x| if x > T::zero() { x } else { slope * x },
            move |x, _| if x > T::zero() { T::one() } else { slope },
        )
    }

    /// max(x, c) elementwise against a constant.
    pub fn max_const(&self, a: &DiffTensor<T>, c: T) -> DiffTensor<T> {
        self.unary(
            a,
            "max_const",
            move |x| x.max(c),
            move |x, _| if x > c { T::one() } else { T::zero() },
        )
    }

    /// Multiply every element by a rank-0 tensor.
    pub fn scale_by(&self, a: &DiffTensor<T>, s: &DiffTensor<T>) -> DiffTensor<T> {
        assert_eq!(s.len(), 1, "scale_by expects a scalar tensor");
        let sv = s.item();
        let vals: Vec<T> = a.values().iter().map(|&x| x * sv).collect();
        let out = DiffTensor::new(a.shape().to_vec(), vals);
        out.assert_finite("scale_by");
        let (an, sn) = (a.node_id(), s.node_id());
        if an.is_none() && sn.is_none() {
            return out;
        }
        let av = a.values_arc();
        self.record(
            out,
            Box::new(move |g, slots| {
                if let Some(ai) = an {
                    slots.accum_with(ai, |i| g[i] * sv);
                }
                if let Some(si) = sn {
                    let mut acc = T::zero();
                    for (gi, &xi) in g.iter().zip(av.iter()) {
                        acc = acc + *gi * xi;
                    }
                    let s = slots.slot_mut(si);
                    s[0] = s[0] + acc;
                }
            }),
        )
    }

    /// Scale each row of a [R,C] tensor by the matching entry of a [R]
    /// vector.
    pub fn scale_rows(&self, a: &DiffTensor<T>, s: &DiffTensor<T>) -> DiffTensor<T> {
        assert_eq!(a.shape().len(), 2, "scale_rows expects rank 2");
        let (r, c) = (a.shape()[0], a.shape()[1]);
        assert_eq!(s.len(), r, "row scale length mismatch");
        let sv = s.values();
        let vals: Vec<T> = a
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| x * sv[i / c])
            .collect();
        let out = DiffTensor::new(a.shape().to_vec(), vals);
        out.assert_finite("scale_rows");
        let (an, sn) = (a.node_id(), s.node_id());
        if an.is_none() && sn.is_none() {
            return out;
        }
        let (av, svc) = (a.values_arc(), s.values_arc());
        self.record(
            out,
            Box::new(move |g, slots| {
                if let Some(ai) = an {
                    slots.accum_with(ai, |i| g[i] * svc[i / c]);
                }
                if let Some(si) = sn {
                    let slot = slots.slot_mut(si);
                    for i in 0..r * c {
                        slot[i / c] = slot[i / c] + g[i] * av[i];
                    }
                }
            }),
        )
    }

    /// Broadcast-add `v` over the last axis (bias add).
    pub fn add_channels(&self, a: &DiffTensor<T>, v: &DiffTensor<T>) -> DiffTensor<T> {
        let c = *a.shape().last().expect("add_channels needs rank >= 1");
        assert_eq!(v.len(), c, "channel vector length mismatch");
        let vv = v.values();
        let vals: Vec<T> = a
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + vv[i % c])
            .collect();
        let out = DiffTensor::new(a.shape().to_vec(), vals);
        out.assert_finite("add_channels");
        let (an, vn) = (a.node_id(), v.node_id());
        if an.is_none() && vn.is_none() {
            return out;
        }
        self.record(
            out,
            Box::new(move |g, slots| {
                if let Some(ai) = an {
                    slots.accum_slice(ai, g);
                }
                if let Some(vi) = vn {
                    let s = slots.slot_mut(vi);
                    for (i, &gi) in g.iter().enumerate() {
                        s[i % c] = s[i % c] + gi;
                    }
                }
            }),
        )
    }

    /// Extract one element at flat index `i` as a rank-0 tensor.
    pub fn element(&self, a: &DiffTensor<T>, i: usize) -> DiffTensor<T> {
        let out = DiffTensor::scalar(a.values()[i]);
        let Some(ai) = a.node_id() else { return out };
        self.record(
            out,
            Box::new(move |g, slots| {
                let s = slots.slot_mut(ai);
                s[i] = s[i] + g[0];
            }),
        )
    }

    /// Slice `len` entries along axis 0, keeping rank.
    pub fn slice0(&self, a: &DiffTensor<T>, start: usize, len: usize) -> DiffTensor<T> {
        let shape = a.shape();
        assert!(!shape.is_empty(), "slice0 needs rank >= 1");
        assert!(start + len <= shape[0], "slice0 out of range");
        let inner: usize = shape[1..].iter().product();
        let mut out_shape = shape.to_vec();
        out_shape[0] = len;
        let vals = a.values()[start * inner..(start + len) * inner].to_vec();
        let out = DiffTensor::new(out_shape, vals);
        let Some(ai) = a.node_id() else { return out };
        self.record(
            out,
            Box::new(move |g, slots| {
                let s = slots.slot_mut(ai);
                for (k, &gk) in g.iter().enumerate() {
                    let idx = start * inner + k;
                    s[idx] = s[idx] + gk;
                }
            }),
        )
    }

    /// Row `i` along axis 0, dropping that axis.
    pub fn row(&self, a: &DiffTensor<T>, i: usize) -> DiffTensor<T> {
        let inner_shape = a.shape()[1..].to_vec();
        let sliced = self.slice0(a, i, 1);
        self.reshape(&sliced, inner_shape)
    }

    /// Slice a channel range along the last axis.
    pub fn slice_last(&self, a: &DiffTensor<T>, start: usize, len: usize) -> DiffTensor<T> {
        let shape = a.shape();
        let c = *shape.last().expect("slice_last needs rank >= 1");
        assert!(start + len <= c, "slice_last out of range");
        let rows = a.len() / c;
        let mut out_shape = shape.to_vec();
        *out_shape.last_mut().unwrap() = len;
        let av = a.values();
        let mut vals = Vec::with_capacity(rows * len);
        for r in 0..rows {
            vals.extend_from_slice(&av[r * c + start..r * c + start + len]);
        }
        let out = DiffTensor::new(out_shape, vals);
        let Some(ai) = a.node_id() else { return out };
        self.record(
            out,
            Box::new(move |g, slots| {
                let s = slots.slot_mut(ai);
                for r in 0..rows {
                    for k in 0..len {
                        let idx = r * c + start + k;
                        s[idx] = s[idx] + g[r * len + k];
                    }
                }
            }),
        )
    }

    /// Concatenate along the last axis; all inputs share leading shape.
    pub fn concat_last(&self, parts: &[&DiffTensor<T>]) -> DiffTensor<T> {
        assert!(!parts.is_empty());
        let lead = &parts[0].shape()[..parts[0].shape().len() - 1];
        let rows: usize = lead.iter().product();
        let widths: Vec<usize> = parts
            .iter()
            .map(|p| {
                assert_eq!(&p.shape()[..p.shape().len() - 1], lead, "concat_last lead");
                *p.shape().last().unwrap()
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut vals = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                vals.extend_from_slice(&p.values()[r * w..(r + 1) * w]);
            }
        }
        let mut out_shape = lead.to_vec();
        out_shape.push(total);
        let out = DiffTensor::new(out_shape, vals);
        let nodes: Vec<Option<crate::tape::NodeId>> =
            parts.iter().map(|p| p.node_id()).collect();
        if nodes.iter().all(|n| n.is_none()) {
            return out;
        }
        self.record(
            out,
            Box::new(move |g, slots| {
                let mut off = 0usize;
                for (pi, &w) in widths.iter().enumerate() {
                    if let Some(id) = nodes[pi] {
                        let s = slots.slot_mut(id);
                        for r in 0..rows {
                            for k in 0..w {
                                s[r * w + k] = s[r * w + k] + g[r * total + off + k];
                            }
                        }
                    }
                    off += w;
                }
            }),
        )
    }

    /// Stack equally shaped tensors along a new leading axis.
    pub fn stack0(&self, parts: &[&DiffTensor<T>]) -> DiffTensor<T> {
        assert!(!parts.is_empty());
        let inner_shape = parts[0].shape().to_vec();
        let inner: usize = inner_shape.iter().product();
        let mut vals = Vec::with_capacity(parts.len() * inner);
        for p in parts {
            assert_eq!(p.shape(), inner_shape.as_slice(), "stack0 shape mismatch");
            vals.extend_from_slice(p.values());
        }
        let mut out_shape = vec![parts.len()];
        out_shape.extend_from_slice(&inner_shape);
        let out = DiffTensor::new(out_shape, vals);
        let nodes: Vec<Option<crate::tape::NodeId>> =
            parts.iter().map(|p| p.node_id()).collect();
        if nodes.iter().all(|n| n.is_none()) {
            return out;
        }
        self.record(
            out,
            Box::new(move |g, slots| {
                for (k, node) in nodes.iter().enumerate() {
                    if let Some(id) = node {
                        slots.accum_slice(*id, &g[k * inner..(k + 1) * inner]);
                    }
                }
            }),
        )
    }

    /// Same data, new shape, gradient passes through unchanged.
    pub fn reshape(&self, a: &DiffTensor<T>, shape: Vec<usize>) -> DiffTensor<T> {
        let out = a.reshaped(shape);
        let Some(ai) = a.node_id() else { return out };
        self.record(
            out,
            Box::new(move |g, slots| slots.accum_slice(ai, g)),
        )
    }

    pub fn sum_all(&self, a: &DiffTensor<T>) -> DiffTensor<T> {
        let total = a.values().iter().fold(T::zero(), |acc, &x| acc + x);
        let out = DiffTensor::scalar(total);
        out.assert_finite("sum_all");
        let Some(ai) = a.node_id() else { return out };
        self.record(
            out,
            Box::new(move |g, slots| {
                let gv = g[0];
                slots.accum_with(ai, |_| gv);
            }),
        )
    }

    pub fn mean_all(&self, a: &DiffTensor<T>) -> DiffTensor<T> {
        let n = T::lit(a.len() as f64);
        let s = self.sum_all(a);
        self.mul_const(&s, T::one() / n)
    }

    /// Mean absolute difference: the L1 losses used across the pipeline.
    pub fn mean_abs_diff(&self, a: &DiffTensor<T>, b: &DiffTensor<T>) -> DiffTensor<T> {
        let d = self.sub(a, b);
        let d = self.abs(&d);
        self.mean_all(&d)
    }

    /// Dot product of two equally shaped tensors.
    pub fn dot(&self, a: &DiffTensor<T>, b: &DiffTensor<T>) -> DiffTensor<T> {
        let m = self.mul(a, b);
        self.sum_all(&m)
    }
}

pub(crate) fn sigmoid_stable<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softplus_stable<T: Scalar>(x: T) -> T {
    let cap = T::lit(30.0);
    if x > cap {
        x + (-x).exp().ln_1p()
    } else if x < -cap {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}
