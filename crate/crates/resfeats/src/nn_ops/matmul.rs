//! Row-major matrix multiply with 64-bit accumulation.

/// C = A·B where A is m×k and B is k×n, all row-major f32 slices.
///
/// Accumulates each output row in f64 with a fixed i-k-j loop order, so
/// the result is bit-deterministic and keeps f64 precision until the
/// final f32 rounding.
pub fn matmul(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    assert_eq!(a.len(), m * k, "lhs length");
    assert_eq!(b.len(), k * n, "rhs length");
    let b64: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let mut out = vec![0.0f32; m * n];
    let mut row = vec![0.0f64; n];
    for i in 0..m {
        row.fill(0.0);
        for kk in 0..k {
            let aik = a[i * k + kk] as f64;
            if aik == 0.0 {
                continue;
            }
            let brow = &b64[kk * n..(kk + 1) * n];
            for (acc, &bv) in row.iter_mut().zip(brow) {
                *acc += aik * bv;
            }
        }
        for (o, &acc) in out[i * n..(i + 1) * n].iter_mut().zip(&row) {
            *o = acc as f32;
        }
    }
    out
}
