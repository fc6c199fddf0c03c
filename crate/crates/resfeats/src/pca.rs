//! PCA reduction of flattened features, with a validation-driven search
//! for the output dimension.
//!
//! Fitting picks its route by shape: when samples ≤ D it eigendecomposes
//! the samples×samples Gram matrix (D×D would be infeasible at
//! D ≈ 100k), otherwise the D×D covariance. Both run in f64 and agree on
//! the same principal subspace.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::svm::{svm_predict, svm_train, SvmParams};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct PcaModel {
    /// Column mean of the fit data, length D.
    pub mean: Tensor,
    /// Principal directions as rows, shape [n, D], orthonormal,
    /// descending explained variance. Row sign convention: the
    /// largest-magnitude coordinate of each row is positive (first such
    /// index on ties).
    pub basis: Tensor,
    /// Variance along each basis row, nonincreasing, length n.
    pub explained_variance: Tensor,
}

impl PcaModel {
    pub fn n(&self) -> usize {
        self.basis.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.basis.shape()[1]
    }
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let SymmetricEigen { eigenvalues, eigenvectors } = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).expect("finite"));
    let values: Vec<f64> = order.iter().map(|&i| eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eigenvectors.nrows(), order.len(), |r, c| {
        eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Flips each basis row so its largest-magnitude coordinate is positive;
/// ties take the first index in scan order.
fn apply_sign_convention(basis: &mut [f64], n: usize, d: usize) {
    for r in 0..n {
        let row = &mut basis[r * d..(r + 1) * d];
        let mut arg = 0;
        for (i, &v) in row.iter().enumerate() {
            if v.abs() > row[arg].abs() {
                arg = i;
            }
        }
        if row[arg] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }
}

/// Fits an n-component PCA to `x` (samples × D).
pub fn pca_fit(x: &Tensor, n: usize) -> Result<PcaModel> {
    let (s, d) = x.dims2()?;
    if s < 2 {
        return Err(Error::InvalidConfig(format!(
            "PCA needs at least 2 samples, got {s}"
        )));
    }
    let max_n = d.min(s - 1);
    if n == 0 || n > max_n {
        return Err(Error::InvalidConfig(format!(
            "n must be in 1..={max_n} for {s} samples of dimension {d}, got {n}"
        )));
    }

    let mut mean = vec![0.0f64; d];
    for i in 0..s {
        for (j, m) in mean.iter_mut().enumerate() {
            *m += x.data()[i * d + j] as f64;
        }
    }
    for m in &mut mean {
        *m /= s as f64;
    }

    // Centered data, row-major samples × D.
    let centered: Vec<f64> = (0..s * d)
        .map(|i| x.data()[i] as f64 - mean[i % d])
        .collect();
    if centered.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateData(
            "centered data is exactly zero; no variance to decompose".into(),
        ));
    }

    let denom = (s - 1) as f64;
    let mut basis = vec![0.0f64; n * d];
    let mut variances = Vec::with_capacity(n);

    if s <= d {
        // Gram route: G[i,j] = <c_i, c_j>; eigenvalues are (s−1)·variance
        // and basis rows come back through the data matrix.
        let gram = DMatrix::from_fn(s, s, |i, j| {
            let a = &centered[i * d..(i + 1) * d];
            let b = &centered[j * d..(j + 1) * d];
            a.iter().zip(b).map(|(&x, &y)| x * y).sum::<f64>()
        });
        let (values, vectors) = sorted_eigen(gram);
        let floor = values[0].max(0.0) * 1e-12;
        for r in 0..n {
            let lambda = values[r];
            if lambda <= floor || lambda <= 0.0 {
                return Err(Error::DegenerateData(format!(
                    "data rank is below the requested {n} components (component {} vanishes)",
                    r + 1
                )));
            }
            // v_r = Xᵀ u_r / sqrt(lambda); unit length by construction.
            let scale = 1.0 / lambda.sqrt();
            for i in 0..s {
                let u = vectors[(i, r)] * scale;
                if u == 0.0 {
                    continue;
                }
                let row = &centered[i * d..(i + 1) * d];
                let out = &mut basis[r * d..(r + 1) * d];
                for (o, &c) in out.iter_mut().zip(row) {
                    *o += u * c;
                }
            }
            variances.push(lambda / denom);
        }
    } else {
        // Covariance route: C = XᵀX / (s−1), eigenvectors are the basis.
        let cov = DMatrix::from_fn(d, d, |a, b| {
            let mut acc = 0.0f64;
            for i in 0..s {
                acc += centered[i * d + a] * centered[i * d + b];
            }
            acc / denom
        });
        let (values, vectors) = sorted_eigen(cov);
        let floor = values[0].max(0.0) * 1e-12;
        for r in 0..n {
            let lambda = values[r];
            if lambda <= floor || lambda <= 0.0 {
                return Err(Error::DegenerateData(format!(
                    "data rank is below the requested {n} components (component {} vanishes)",
                    r + 1
                )));
            }
            for j in 0..d {
                basis[r * d + j] = vectors[(j, r)];
            }
            variances.push(lambda);
        }
    }

    apply_sign_convention(&mut basis, n, d);
    Ok(PcaModel {
        mean: Tensor::new(vec![d], mean.iter().map(|&v| v as f32).collect())?,
        basis: Tensor::new(vec![n, d], basis.iter().map(|&v| v as f32).collect())?,
        explained_variance: Tensor::new(vec![n], variances.iter().map(|&v| v as f32).collect())?,
    })
}

/// basis · (x − mean), computed in f64.
pub fn pca_transform(m: &PcaModel, x: &Tensor) -> Result<Tensor> {
    let d = m.dim();
    if x.shape() != [d] {
        return Err(Error::ShapeMismatch(format!(
            "vector shape {:?} does not match PCA dimension {d}",
            x.shape()
        )));
    }
    let n = m.n();
    let mut out = Vec::with_capacity(n);
    for r in 0..n {
        let row = &m.basis.data()[r * d..(r + 1) * d];
        let mut acc = 0.0f64;
        for j in 0..d {
            acc += row[j] as f64 * (x.data()[j] as f64 - m.mean.data()[j] as f64);
        }
        out.push(acc as f32);
    }
    Tensor::new(vec![n], out)
}

/// Applies the transform to every row of a samples × D matrix.
pub fn pca_transform_batch(m: &PcaModel, x: &Tensor) -> Result<Tensor> {
    let (s, d) = x.dims2()?;
    if d != m.dim() {
        return Err(Error::ShapeMismatch(format!(
            "matrix dimension {d} does not match PCA dimension {}",
            m.dim()
        )));
    }
    let n = m.n();
    let mut out = Vec::with_capacity(s * n);
    for i in 0..s {
        let xi = Tensor::new(vec![d], x.data()[i * d..(i + 1) * d].to_vec())?;
        out.extend_from_slice(pca_transform(m, &xi)?.data());
    }
    Tensor::new(vec![s, n], out)
}

/// Picks the candidate n maximizing validation accuracy of a linear SVM
/// trained on the PCA-reduced training features; ties break to the
/// smaller n. Candidates that exceed the fittable maximum are skipped.
pub fn select_n(
    candidates: &[usize],
    train_x: &Tensor,
    train_y: &[usize],
    val_x: &Tensor,
    val_y: &[usize],
    svm: &SvmParams,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("empty candidate list for n".into()));
    }
    let (vs, _) = val_x.dims2()?;
    if vs != val_y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{vs} validation rows but {} labels",
            val_y.len()
        )));
    }
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut best: Option<(usize, f64)> = None;
    let mut tried = 0usize;
    for &n in &sorted {
        let model = match pca_fit(train_x, n) {
            Ok(m) => m,
            Err(Error::InvalidConfig(_)) | Err(Error::DegenerateData(_)) => continue,
            Err(e) => return Err(e),
        };
        tried += 1;
        let tr = pca_transform_batch(&model, train_x)?;
        let svm_model = svm_train(&tr, train_y, svm)?;
        let mut correct = 0usize;
        for i in 0..vs {
            let d = val_x.shape()[1];
            let xi = Tensor::new(vec![d], val_x.data()[i * d..(i + 1) * d].to_vec())?;
            let zi = pca_transform(&model, &xi)?;
            let (pred, _) = svm_predict(&svm_model, &zi)?;
            if svm_model.classes[pred] == val_y[i].to_string() {
                correct += 1;
            }
        }
        let acc = correct as f64 / vs.max(1) as f64;
        // Ascending scan: strictly-better accuracy moves the choice, so
        // ties keep the smaller n.
        if best.map_or(true, |(_, b)| acc > b) {
            best = Some((n, acc));
        }
    }
    if tried == 0 {
        return Err(Error::InvalidConfig(
            "no candidate n is fittable on the training data".into(),
        ));
    }
    Ok(best.expect("tried >= 1").0)
}

/// Writes the model as RFT1 entries `pca.mean`, `pca.basis`,
/// `pca.explained_variance`.
pub fn save_pca(m: &PcaModel, path: impl AsRef<Path>) -> Result<()> {
    let mut c = Container::new();
    c.insert("pca.mean", m.mean.clone());
    c.insert("pca.basis", m.basis.clone());
    c.insert("pca.explained_variance", m.explained_variance.clone());
    c.write(path)
}

pub fn load_pca(path: impl AsRef<Path>) -> Result<PcaModel> {
    let c = Container::read(path)?;
    let mean = c.require("pca.mean")?.clone();
    let basis = c.require("pca.basis")?.clone();
    let explained_variance = c.require("pca.explained_variance")?.clone();
    let (n, d) = basis.dims2()?;
    if mean.shape() != [d] || explained_variance.shape() != [n] {
        return Err(Error::CorruptFile(format!(
            "inconsistent PCA entries: basis {:?}, mean {:?}, variance {:?}",
            basis.shape(),
            mean.shape(),
            explained_variance.shape()
        )));
    }
    Ok(PcaModel { mean, basis, explained_variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(seed: u64, s: usize, d: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(vec![s, d], (0..s * d).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
    }

    fn orthonormality_defect(m: &PcaModel) -> f64 {
        let (n, d) = m.basis.dims2().unwrap();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let mut dot = 0.0f64;
                for j in 0..d {
                    dot += m.basis.data()[a * d + j] as f64 * m.basis.data()[b * d + j] as f64;
                }
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }

    #[test]
    fn line_through_origin_recovers_direction() {
        // Points t·(1,2,2)/3 for varied t: one direction of variance.
        let dir = [1.0f32 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
        let ts = [-2.0f32, -1.0, -0.5, 0.5, 1.0, 2.0];
        let data: Vec<f32> = ts.iter().flat_map(|&t| dir.iter().map(move |&d| t * d)).collect();
        let x = Tensor::new(vec![6, 3], data).unwrap();
        let m = pca_fit(&x, 1).unwrap();
        for (got, want) in m.basis.data().iter().zip(dir) {
            assert!((got - want).abs() <= 1e-5, "{got} vs {want}");
        }
        assert!(m.explained_variance.data()[0] > 0.0);
        // Residual variance beyond the line is zero: projections
        // reconstruct the points exactly.
        for (i, &t) in ts.iter().enumerate() {
            let xi = Tensor::new(vec![3], x.data()[i * 3..(i + 1) * 3].to_vec()).unwrap();
            let z = pca_transform(&m, &xi).unwrap();
            assert!((z.data()[0] - t).abs() <= 1e-5);
        }
    }

    #[test]
    fn gram_and_covariance_routes_agree() {
        // 8×20 forces the Gram route; an explicit covariance
        // eigendecomposition is the reference.
        let x = rand_matrix(1, 8, 20);
        let n = 3;
        let m = pca_fit(&x, n).unwrap();

        let (s, d) = (8usize, 20usize);
        let mut mean = vec![0.0f64; d];
        for i in 0..s {
            for j in 0..d {
                mean[j] += x.data()[i * d + j] as f64;
            }
        }
        for v in &mut mean {
            *v /= s as f64;
        }
        let cov = DMatrix::from_fn(d, d, |a, b| {
            let mut acc = 0.0;
            for i in 0..s {
                acc += (x.data()[i * d + a] as f64 - mean[a]) * (x.data()[i * d + b] as f64 - mean[b]);
            }
            acc / (s - 1) as f64
        });
        let (values, vectors) = sorted_eigen(cov);
        let mut want = vec![0.0f64; n * d];
        for r in 0..n {
            for j in 0..d {
                want[r * d + j] = vectors[(j, r)];
            }
        }
        apply_sign_convention(&mut want, n, d);
        for r in 0..n {
            assert!((m.explained_variance.data()[r] as f64 - values[r]).abs() <= 1e-5 * values[r].max(1.0));
            for j in 0..d {
                assert!(
                    (m.basis.data()[r * d + j] as f64 - want[r * d + j]).abs() <= 1e-5,
                    "row {r} col {j}"
                );
            }
        }
    }

    #[test]
    fn basis_is_orthonormal_and_variance_ordered() {
        for (seed, s, d, n) in [(2u64, 30, 10, 5), (3, 10, 30, 6), (4, 50, 20, 5)] {
            let x = rand_matrix(seed, s, d);
            let m = pca_fit(&x, n).unwrap();
            assert!(orthonormality_defect(&m) <= 1e-5);
            let ev = m.explained_variance.data();
            for pair in ev.windows(2) {
                assert!(pair[0] >= pair[1]);
            }
            assert!(ev.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn projection_energy_bounded_by_total_variance() {
        let x = rand_matrix(5, 40, 12);
        let m = pca_fit(&x, 8).unwrap();
        let (s, d) = (40usize, 12usize);
        let mut mean = vec![0.0f64; d];
        for i in 0..s {
            for j in 0..d {
                mean[j] += x.data()[i * d + j] as f64;
            }
        }
        for v in &mut mean {
            *v /= s as f64;
        }
        let mut total = 0.0f64;
        for i in 0..s {
            for j in 0..d {
                let c = x.data()[i * d + j] as f64 - mean[j];
                total += c * c;
            }
        }
        total /= (s - 1) as f64;
        let explained: f64 = m.explained_variance.data().iter().map(|&v| v as f64).sum();
        assert!(explained <= total * (1.0 + 1e-5), "{explained} > {total}");
    }

    #[test]
    fn transform_of_mean_is_zero_and_linear() {
        let x = rand_matrix(6, 20, 7);
        let m = pca_fit(&x, 3).unwrap();
        let z = pca_transform(&m, &m.mean).unwrap();
        assert!(z.data().iter().all(|&v| v.abs() <= 1e-6));

        // Linearity in (x − mean): doubling the offset doubles the image.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let offset: Vec<f32> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x1 = Tensor::new(
            vec![7],
            m.mean.data().iter().zip(&offset).map(|(&mu, &o)| mu + o).collect(),
        )
        .unwrap();
        let x2 = Tensor::new(
            vec![7],
            m.mean.data().iter().zip(&offset).map(|(&mu, &o)| mu + 2.0 * o).collect(),
        )
        .unwrap();
        let z1 = pca_transform(&m, &x1).unwrap();
        let z2 = pca_transform(&m, &x2).unwrap();
        for (a, b) in z2.data().iter().zip(z1.data()) {
            assert!((a - 2.0 * b).abs() <= 1e-5 * b.abs().max(1.0));
        }
    }

    #[test]
    fn reconstruction_error_equals_unexplained_variance() {
        let x = rand_matrix(8, 25, 9);
        let n = 4;
        let m = pca_fit(&x, n).unwrap();
        let (s, d) = (25usize, 9usize);
        // Mean reconstruction error over samples = total variance minus
        // explained variance (both per the s−1 normalizer).
        let mut err = 0.0f64;
        let mut total = 0.0f64;
        for i in 0..s {
            let xi = Tensor::new(vec![d], x.data()[i * d..(i + 1) * d].to_vec()).unwrap();
            let z = pca_transform(&m, &xi).unwrap();
            for j in 0..d {
                let centered = xi.data()[j] as f64 - m.mean.data()[j] as f64;
                total += centered * centered;
                let mut recon = 0.0f64;
                for r in 0..n {
                    recon += z.data()[r] as f64 * m.basis.data()[r * d + j] as f64;
                }
                err += (centered - recon) * (centered - recon);
            }
        }
        err /= (s - 1) as f64;
        total /= (s - 1) as f64;
        let explained: f64 = m.explained_variance.data().iter().map(|&v| v as f64).sum();
        assert!(
            (err - (total - explained)).abs() <= 1e-4 * total.max(1.0),
            "residual {err} vs {} ",
            total - explained
        );
    }

    #[test]
    fn rejects_bad_n_and_degenerate_data() {
        let x = rand_matrix(9, 10, 5);
        assert!(matches!(pca_fit(&x, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(pca_fit(&x, 6), Err(Error::InvalidConfig(_))));
        let one_row = rand_matrix(9, 1, 5);
        assert!(matches!(pca_fit(&one_row, 1), Err(Error::InvalidConfig(_))));
        let constant = Tensor::full(vec![10, 5], 3.25);
        assert!(matches!(pca_fit(&constant, 1), Err(Error::DegenerateData(_))));
        // Rank-1 data cannot produce 3 components.
        let dir = [1.0f32, 0.0, 0.0, 0.0];
        let data: Vec<f32> = (0..6).flat_map(|t| dir.iter().map(move |&d| t as f32 * d)).collect();
        let rank1 = Tensor::new(vec![6, 4], data).unwrap();
        assert!(matches!(pca_fit(&rank1, 3), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn transform_rejects_dimension_mismatch() {
        let x = rand_matrix(10, 10, 5);
        let m = pca_fit(&x, 2).unwrap();
        assert!(matches!(
            pca_transform(&m, &Tensor::zeros(vec![6])),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let x = rand_matrix(11, 12, 6);
        let m = pca_fit(&x, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pca.rft");
        save_pca(&m, &path).unwrap();
        let back = load_pca(&path).unwrap();
        assert_eq!(back.mean.data(), m.mean.data());
        assert_eq!(back.basis.data(), m.basis.data());
        assert_eq!(back.explained_variance.data(), m.explained_variance.data());
    }

    #[test]
    fn select_n_single_candidate_and_informative_subspace() {
        // Two informative dimensions carry the classes; the rest is noise.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = 10;
        let make = |rng: &mut ChaCha8Rng, count: usize| -> (Tensor, Vec<usize>) {
            let mut data = Vec::new();
            let mut y = Vec::new();
            for i in 0..count {
                let class = i % 2;
                let sign = if class == 0 { -1.0f32 } else { 1.0 };
                data.push(sign * 3.0 + rng.gen_range(-0.3..0.3));
                data.push(-sign * 3.0 + rng.gen_range(-0.3..0.3));
                for _ in 2..d {
                    data.push(rng.gen_range(-0.4f32..0.4));
                }
                y.push(class);
            }
            (Tensor::new(vec![count, d], data).unwrap(), y)
        };
        let (train_x, train_y) = make(&mut rng, 60);
        let (val_x, val_y) = make(&mut rng, 30);
        let p = SvmParams::default();

        assert_eq!(
            select_n(&[4], &train_x, &train_y, &val_x, &val_y, &p).unwrap(),
            4
        );
        // All candidates solve the task perfectly, so the tie rule picks
        // the smallest.
        let n = select_n(&[1, 2, 5, 8], &train_x, &train_y, &val_x, &val_y, &p).unwrap();
        assert_eq!(n, 1);
        assert!(matches!(
            select_n(&[], &train_x, &train_y, &val_x, &val_y, &p),
            Err(Error::InvalidConfig(_))
        ));
    }
}
