//! Differentiation tape: an ordered record of primitive ops with pullback
//! closures. Ops append nodes during the forward pass; `backward` replays
//! the pullbacks in strict reverse order exactly once, producing gradients
//! for every parameter leaf.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::{DiffTensor, Scalar};

pub type NodeId = usize;

pub(crate) type Pullback<T> = Box<dyn Fn(&[T], &mut GradSlots<T>) + Send>;

struct Node<T> {
    len: usize,
    /// None marks a parameter leaf.
    pullback: Option<Pullback<T>>,
}

struct TapeInner<T> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

/// Accumulation buffer for cotangents, indexed by node id. Slots are
/// allocated lazily and dropped as soon as their pullback has run, so peak
/// memory tracks the live frontier of the reverse sweep.
pub struct GradSlots<T> {
    lens: Vec<usize>,
    slots: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> GradSlots<T> {
    fn new(lens: Vec<usize>) -> Self {
        let n = lens.len();
        GradSlots {
            lens,
            slots: vec![None; n],
        }
    }

    /// Zero-initialized gradient buffer for `id`; allocated on first touch.
    pub fn slot_mut(&mut self, id: NodeId) -> &mut [T] {
        let len = self.lens[id];
        self.slots[id].get_or_insert_with(|| vec![T::zero(); len])
    }

    pub fn accum_slice(&mut self, id: NodeId, g: &[T]) {
        let s = self.slot_mut(id);
        debug_assert_eq!(s.len(), g.len());
        for (d, &src) in s.iter_mut().zip(g.iter()) {
            *d = *d + src;
        }
    }

    pub fn accum_with(&mut self, id: NodeId, f: impl Fn(usize) -> T) {
        let s = self.slot_mut(id);
        for (i, d) in s.iter_mut().enumerate() {
            *d = *d + f(i);
        }
    }

    fn take(&mut self, id: NodeId) -> Option<Vec<T>> {
        self.slots[id].take()
    }
}

/// Gradients of a scalar loss with respect to parameter leaves, keyed by
/// node id.
pub struct Gradients<T> {
    by_node: HashMap<NodeId, Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for a tracked tensor, if it was a parameter reached by the
    /// backward sweep.
    pub fn get(&self, t: &DiffTensor<T>) -> Option<&[T]> {
        t.node_id().and_then(|id| self.by_id(id))
    }

    pub fn by_id(&self, id: NodeId) -> Option<&[T]> {
        self.by_node.get(&id).map(|v| v.as_slice())
    }

    /// Gradient for `t`, or zeros when the parameter was unreachable from
    /// the loss.
    pub fn get_or_zeros(&self, t: &DiffTensor<T>) -> Vec<T> {
        self.get(t)
            .map(|g| g.to_vec())
            .unwrap_or_else(|| vec![T::zero(); t.len()])
    }

    pub fn is_empty(&self) -> bool {
        self.by_node.is_empty()
    }
}

/// Single-threaded differentiation tape. Distinct tapes may live on
/// distinct threads; one tape is never shared.
pub struct Tape<T> {
    inner: RefCell<TapeInner<T>>,
    recording: bool,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            inner: RefCell::new(TapeInner {
                nodes: Vec::new(),
                consumed: false,
            }),
            recording: true,
        }
    }

    /// A tape that records nothing: every op runs values-only. Lets the
    /// same forward code serve training and inference.
    pub fn inference() -> Self {
        Tape {
            inner: RefCell::new(TapeInner {
                nodes: Vec::new(),
                consumed: false,
            }),
            recording: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn num_nodes(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    /// Register `t` as a differentiable parameter leaf on this tape.
    pub fn param(&self, t: &DiffTensor<T>) -> DiffTensor<T> {
        if !self.recording {
            return t.detach();
        }
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            len: t.len(),
            pullback: None,
        });
        t.detach().with_node(id)
    }

    /// Append an op node whose output is `out`. Returns `out` tagged with
    /// the new node id. Callers skip this entirely when no input is
    /// tracked.
    pub(crate) fn record(&self, out: DiffTensor<T>, pullback: Pullback<T>) -> DiffTensor<T> {
        debug_assert!(self.recording);
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            len: out.len(),
            pullback: Some(pullback),
        });
        out.with_node(id)
    }

    /// Reverse sweep from a scalar loss. Consumes the tape: a second call
    /// returns `Error::TapeConsumed`.
    pub fn backward(&self, loss: &DiffTensor<T>) -> Result<Gradients<T>> {
        self.backward_impl(loss, true)
    }

    /// Reverse sweep that leaves the tape reusable, for stepping several
    /// losses recorded on one shared forward pass.
    pub fn backward_retain(&self, loss: &DiffTensor<T>) -> Result<Gradients<T>> {
        self.backward_impl(loss, false)
    }

    fn backward_impl(&self, loss: &DiffTensor<T>, consume: bool) -> Result<Gradients<T>> {
        let mut inner = self.inner.borrow_mut();
        if inner.consumed {
            return Err(Error::TapeConsumed);
        }
        let loss_id = loss.node_id().ok_or(Error::UntrackedLoss)?;
        if loss.len() != 1 {
            return Err(Error::NonScalarLoss(loss.shape().to_vec()));
        }
        if consume {
            inner.consumed = true;
        }
        let inner = &*inner;

        let lens: Vec<usize> = inner.nodes.iter().map(|n| n.len).collect();
        let mut slots = GradSlots::new(lens);
        slots.slot_mut(loss_id)[0] = T::one();

        let mut by_node: HashMap<NodeId, Vec<T>> = HashMap::new();
        for id in (0..=loss_id).rev() {
            let Some(g) = slots.take(id) else { continue };
            match &inner.nodes[id].pullback {
                Some(pb) => pb(&g, &mut slots),
                None => {
                    by_node.insert(id, g);
                }
            }
        }
        Ok(Gradients { by_node })
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Tape::new()
    }
}
