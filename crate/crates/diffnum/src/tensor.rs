use std::fmt;
use std::sync::Arc;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::tape::NodeId;

/// Scalar types the tensor substrate is generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from f64 literals used in kernels.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dense row-major tensor of reals, optionally tracked on a differentiation
/// tape via `node`.
///
/// Values are shared behind an `Arc` so tape pullbacks can capture them
/// without copies; tensors are cheap to clone.
#[derive(Clone)]
pub struct DiffTensor<T> {
    shape: Vec<usize>,
    values: Arc<Vec<T>>,
    pub(crate) node: Option<NodeId>,
}

impl<T: Scalar> DiffTensor<T> {
    /// Build from raw parts. Panics if the value count does not match the
    /// shape product or any entry is non-finite.
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(
            values.len(),
            n,
            "value count {} does not match shape {:?}",
            values.len(),
            shape
        );
        let t = DiffTensor {
            shape,
            values: Arc::new(values),
            node: None,
        };
        t.assert_finite("new");
        t
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        DiffTensor {
            shape,
            values: Arc::new(vec![T::zero(); n]),
            node: None,
        }
    }

    pub fn full(shape: Vec<usize>, value: T) -> Self {
        let n: usize = shape.iter().product();
        let t = DiffTensor {
            shape,
            values: Arc::new(vec![value; n]),
            node: None,
        };
        t.assert_finite("full");
        t
    }

    pub fn scalar(value: T) -> Self {
        Self::new(vec![], vec![value])
    }

    pub fn from_f64s(shape: Vec<usize>, values: &[f64]) -> Self {
        Self::new(shape, values.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_arc(&self) -> Arc<Vec<T>> {
        Arc::clone(&self.values)
    }

    /// Mutable access to the underlying values; copies if the buffer is
    /// shared with a live tape. Clears any tape association.
    pub fn values_mut(&mut self) -> &mut Vec<T> {
        self.node = None;
        Arc::make_mut(&mut self.values)
    }

    /// The single element of a rank-0/singleton tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.values[0]
    }

    pub fn is_tracked(&self) -> bool {
        self.node.is_some()
    }

    pub fn node_id(&self) -> Option<NodeId> {
        self.node
    }

    /// Untracked view of the same values.
    pub fn detach(&self) -> Self {
        DiffTensor {
            shape: self.shape.clone(),
            values: Arc::clone(&self.values),
            node: None,
        }
    }

    /// Same data, new shape. Untracked (use `Tape::reshape` to keep the
    /// gradient path).
    pub fn reshaped(&self, shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(n, self.len(), "reshape {:?} -> {:?}", self.shape, shape);
        DiffTensor {
            shape,
            values: Arc::clone(&self.values),
            node: None,
        }
    }

    pub(crate) fn with_node(mut self, node: NodeId) -> Self {
        self.node = Some(node);
        self
    }

    pub fn assert_finite(&self, op: &str) {
        for (i, v) in self.values.iter().enumerate() {
            assert!(
                v.is_finite(),
                "non-finite value {v} at index {i} after op `{op}`"
            );
        }
    }

    /// Bitwise equality, used by freeze-contract tests.
    pub fn bits_eq(&self, other: &Self) -> bool {
        self.shape == other.shape
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .all(|(a, b)| a.to_f64().map(f64::to_bits) == b.to_f64().map(f64::to_bits))
    }
}

impl<T: Scalar> fmt::Debug for DiffTensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DiffTensor{:?}", self.shape)?;
        if self.len() <= 8 {
            write!(f, " {:?}", &self.values[..])?;
        }
        if let Some(id) = self.node {
            write!(f, " @node{id}")?;
        }
        Ok(())
    }
}
