//! Dense float tensor with explicit shape and canonical row-major layout.
//!
//! All activations and weights in this crate are carried by [`Tensor`].
//! Image-like data is ordered channels-first (C, H, W), and flattening
//! always follows the row-major traversal of that shape, so the linear
//! index of element `(c, h, w)` is `c*H*W + h*W + w`. The layout is
//! identical across runs and platforms, which makes downstream feature
//! caches and PCA inputs reproducible byte for byte.

use crate::error::{Error, Result};

/// Dense N-d array of `f32` values.
///
/// Invariants, enforced at construction: the shape is non-empty, every
/// extent is at least 1, and `shape.iter().product() == data.len()`.
/// Tensors are immutable after construction and cheap to share by
/// reference across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor from a shape and a buffer in canonical order.
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::ShapeMismatch("shape must have rank >= 1".into()));
        }
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} has a zero extent"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} expects {expected} elements, buffer holds {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        assert!(!shape.is_empty() && shape.iter().all(|&e| e >= 1));
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Tensor filled with a constant value.
    pub fn full(shape: Vec<usize>, value: f32) -> Self {
        let n: usize = shape.iter().product();
        assert!(!shape.is_empty() && shape.iter().all(|&e| e >= 1));
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The underlying buffer in canonical order.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Consumes the tensor, returning the raw buffer.
    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Extents as (C, H, W), for rank-3 image-like tensors.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::ShapeMismatch(format!(
                "expected rank-3 tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// Extents as (rows, cols), for rank-2 tensors.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::ShapeMismatch(format!(
                "expected rank-2 tensor, got shape {:?}",
                self.shape
            ))),
        }
    }
}

/// Relabels the shape without touching the buffer.
///
/// The element count must be preserved; no element is reordered.
pub fn reshape(t: &Tensor, new_shape: Vec<usize>) -> Result<Tensor> {
    let old: usize = t.shape.iter().product();
    let new: usize = new_shape.iter().product();
    if new_shape.is_empty() || new_shape.iter().any(|&e| e == 0) || old != new {
        return Err(Error::ShapeMismatch(format!(
            "cannot reshape {:?} ({} elements) to {:?} ({} elements)",
            t.shape, old, new_shape, new
        )));
    }
    Ok(Tensor {
        shape: new_shape,
        data: t.data.clone(),
    })
}

/// Rank-1 view of the tensor in canonical C,H,W row-major order.
pub fn flatten(t: &Tensor) -> Tensor {
    Tensor {
        shape: vec![t.data.len()],
        data: t.data.clone(),
    }
}

/// Elementwise sum of two tensors of identical shape.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch(format!(
            "add requires identical shapes, got {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| x + y)
        .collect();
    Ok(Tensor {
        shape: a.shape.clone(),
        data,
    })
}

/// Elementwise `max(x, 0)`.
pub fn relu(t: &Tensor) -> Tensor {
    Tensor {
        shape: t.shape.clone(),
        data: t.data.iter().map(|&x| x.max(0.0)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(n: usize) -> Vec<f32> {
        (1..=n).map(|i| i as f32).collect()
    }

    #[test]
    fn construction_checks_shape_product() {
        assert!(Tensor::new(vec![2, 3], seq(6)).is_ok());
        assert!(matches!(
            Tensor::new(vec![2, 3], seq(5)),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            Tensor::new(vec![2, 0], vec![]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            Tensor::new(vec![], vec![]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn reshape_is_a_relabeling() {
        let t = Tensor::new(vec![2, 3], seq(6)).unwrap();
        let r = reshape(&t, vec![3, 2]).unwrap();
        assert_eq!(r.shape(), &[3, 2]);
        assert_eq!(r.data(), t.data());
    }

    #[test]
    fn reshape_res5c_to_vector() {
        let t = Tensor::zeros(vec![7, 7, 2048]);
        let r = reshape(&t, vec![100_352]).unwrap();
        assert_eq!(r.shape(), &[100_352]);
    }

    #[test]
    fn reshape_rejects_product_change() {
        let t = Tensor::zeros(vec![4]);
        assert!(matches!(
            reshape(&t, vec![5]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn flatten_rank1_is_identity() {
        let t = Tensor::new(vec![4], seq(4)).unwrap();
        let f = flatten(&t);
        assert_eq!(f, t);
    }

    #[test]
    fn flatten_matches_index_arithmetic() {
        // Oracle: linear index of (c, h, w) is c*H*W + h*W + w.
        let (c_n, h_n, w_n) = (2, 2, 2);
        let data: Vec<f32> = (0..c_n * h_n * w_n).map(|i| (i * 7 + 3) as f32).collect();
        let t = Tensor::new(vec![c_n, h_n, w_n], data.clone()).unwrap();
        let f = flatten(&t);
        for c in 0..c_n {
            for h in 0..h_n {
                for w in 0..w_n {
                    let i = c * h_n * w_n + h * w_n + w;
                    assert_eq!(f.data()[i], data[i]);
                }
            }
        }
        assert_eq!(f.shape(), &[8]);
    }

    #[test]
    fn add_identities() {
        let a = Tensor::new(vec![2, 2], vec![1.0, -2.0, 3.5, 0.0]).unwrap();
        let z = Tensor::zeros(vec![2, 2]);
        assert_eq!(add(&a, &z).unwrap(), a);
        let neg = Tensor::new(vec![2, 2], a.data().iter().map(|x| -x).collect()).unwrap();
        assert_eq!(add(&a, &neg).unwrap(), z);
    }

    #[test]
    fn add_matches_loop_oracle() {
        let a = Tensor::new(vec![3, 4], (0..12).map(|i| (i as f32) * 0.37 - 2.0).collect()).unwrap();
        let b = Tensor::new(vec![3, 4], (0..12).map(|i| (i as f32) * -1.21 + 0.5).collect()).unwrap();
        let s = add(&a, &b).unwrap();
        for i in 0..12 {
            assert_eq!(s.data()[i], a.data()[i] + b.data()[i]);
        }
    }

    #[test]
    fn add_rejects_shape_mismatch() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![3, 2]);
        assert!(matches!(add(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn relu_clamps_negatives() {
        let t = Tensor::new(vec![4], vec![-3.0, -0.5, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&t).data(), &[0.0, 0.0, 0.0, 2.0]);
        let nonneg = Tensor::new(vec![3], vec![0.0, 1.0, 7.5]).unwrap();
        assert_eq!(relu(&nonneg), nonneg);
    }
}
