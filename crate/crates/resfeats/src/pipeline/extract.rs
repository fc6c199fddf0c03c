//! Feature extraction: preprocess each dataset image, run the network to
//! a tap, flatten, optionally project through a fitted PCA. Rows follow
//! dataset order; with augmentation each image contributes 16
//! consecutive rows in the documented view order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pca::{pca_transform, PcaModel};
use crate::pipeline::augment::augment16;
use crate::pipeline::dataset::{Dataset, Part};
use crate::pipeline::features::{FeatureMeta, FeatureSet};
use crate::pipeline::image::{preprocess, PreprocessConfig, RgbImage};
use crate::pipeline::ppm::read_ppm;
use crate::resnet::{ResNetModel, TapName};
use crate::tensor::{flatten, Tensor};

/// How each flattened tap output becomes a feature row. `None` keeps the
/// flattened activations as-is (flatten-only); `Pca` projects them
/// through an already-fitted model.
#[derive(Debug, Clone, Copy)]
pub enum Reduction<'a> {
    None,
    Pca(&'a PcaModel),
}

impl Reduction<'_> {
    fn describe(&self) -> String {
        match self {
            Reduction::None => "none".into(),
            Reduction::Pca(m) => format!("pca({})", m.n()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub preprocess: PreprocessConfig,
    pub augment16: bool,
    /// 1 = sequential (the bit-reproducible reference mode); 0 = one
    /// worker per core; n = fixed pool of n.
    pub workers: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { preprocess: PreprocessConfig::default(), augment16: false, workers: 1 }
    }
}

fn image_rows(
    model: &ResNetModel,
    tap: TapName,
    reduction: Reduction<'_>,
    opts: &ExtractOptions,
    img: &RgbImage,
) -> Result<Vec<Vec<f32>>> {
    let views: Vec<RgbImage> =
        if opts.augment16 { augment16(img)? } else { vec![img.clone()] };
    let mut rows = Vec::with_capacity(views.len());
    for view in &views {
        let input = preprocess(view, &opts.preprocess)?;
        let taps = model.forward_with_taps(&input, &[tap])?;
        let flat = flatten(&taps[&tap]);
        let row = match reduction {
            Reduction::None => flat,
            Reduction::Pca(m) => pca_transform(m, &flat)?,
        };
        rows.push(row.into_data());
    }
    Ok(rows)
}

pub fn extract_features(
    model: &ResNetModel,
    d: &Dataset,
    part: Part,
    tap: TapName,
    reduction: Reduction<'_>,
    opts: &ExtractOptions,
) -> Result<FeatureSet> {
    let indices = d.part_indices(part)?;
    if indices.is_empty() {
        return Err(Error::InvalidConfig("requested dataset part is empty".into()));
    }
    let work = |&i: &usize| -> Result<Vec<Vec<f32>>> {
        let img = read_ppm(&d.samples[i].0)?;
        image_rows(model, tap, reduction, opts, &img)
    };
    let per_image: Vec<Vec<Vec<f32>>> = if opts.workers == 1 {
        indices.iter().map(|i| work(i)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(|| indices.par_iter().map(work).collect::<Result<_>>())?
    };

    let views = if opts.augment16 { 16 } else { 1 };
    let dim = per_image[0][0].len();
    let mut data = Vec::with_capacity(indices.len() * views * dim);
    let mut labels = Vec::with_capacity(indices.len() * views);
    for (rows, &i) in per_image.iter().zip(&indices) {
        for row in rows {
            data.extend_from_slice(row);
            labels.push(d.samples[i].1);
        }
    }
    let features = Tensor::new(vec![labels.len(), dim], data)?;
    let meta = FeatureMeta {
        variant: model.variant.to_string(),
        tap: tap.to_string(),
        size: opts.preprocess.size,
        mean: opts.preprocess.mean,
        reduction: reduction.describe(),
        augment16: opts.augment16,
        classes: d.classes.clone(),
    };
    FeatureSet::new(features, labels, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pca::pca_fit;
    use crate::pipeline::dataset::ingest;
    use crate::pipeline::ppm::write_ppm;
    use crate::resnet::{build_resnet, Variant};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_tree(per_class: usize) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (class, base) in [("cold", [40.0, 60.0, 200.0]), ("warm", [200.0, 60.0, 40.0])] {
            let cdir = dir.path().join(class);
            std::fs::create_dir(&cdir).unwrap();
            for i in 0..per_class {
                let mut data = Vec::with_capacity(16 * 16 * 3);
                for _ in 0..16 * 16 {
                    for b in base {
                        data.push((b + rng.gen_range(-25.0..25.0f32)).clamp(0.0, 255.0));
                    }
                }
                let img = RgbImage::new(16, 16, data).unwrap();
                write_ppm(&img, cdir.join(format!("img_{i:02}.ppm"))).unwrap();
            }
        }
        dir
    }

    fn small_opts() -> ExtractOptions {
        ExtractOptions {
            preprocess: PreprocessConfig { size: 32, ..Default::default() },
            augment16: false,
            workers: 1,
        }
    }

    #[test]
    fn rows_follow_dataset_order_with_expected_dimension() {
        let tree = toy_tree(3);
        let d = ingest(tree.path()).unwrap();
        let model = build_resnet(&Variant::mini_default(), 2, 0).unwrap();
        let fs = extract_features(
            &model,
            &d,
            Part::All,
            TapName::Res5c,
            Reduction::None,
            &small_opts(),
        )
        .unwrap();
        assert_eq!(fs.rows(), 6);
        assert_eq!(fs.dim(), 128);
        assert_eq!(fs.labels, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(fs.meta.tap, "res5c");
        assert_eq!(fs.meta.variant, "mini");
        assert_eq!(fs.meta.reduction, "none");
    }

    #[test]
    fn re_extraction_is_bit_identical() {
        let tree = toy_tree(2);
        let d = ingest(tree.path()).unwrap();
        let model = build_resnet(&Variant::mini_default(), 2, 1).unwrap();
        let a = extract_features(&model, &d, Part::All, TapName::Res4f, Reduction::None, &small_opts())
            .unwrap();
        let b = extract_features(&model, &d, Part::All, TapName::Res4f, Reduction::None, &small_opts())
            .unwrap();
        let bits = |fs: &FeatureSet| -> Vec<u32> {
            fs.features.data().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn augmentation_multiplies_rows_by_sixteen() {
        let tree = toy_tree(2);
        let d = ingest(tree.path()).unwrap();
        let model = build_resnet(&Variant::mini_default(), 2, 0).unwrap();
        let opts = ExtractOptions { augment16: true, ..small_opts() };
        let fs = extract_features(&model, &d, Part::All, TapName::Res5c, Reduction::None, &opts)
            .unwrap();
        assert_eq!(fs.rows(), 64);
        assert!(fs.labels[..16].iter().all(|&l| l == 0));
        assert!(fs.labels[32..48].iter().all(|&l| l == 1));
        assert!(fs.meta.augment16);
    }

    #[test]
    fn pca_reduction_shrinks_rows_and_matches_separate_projection() {
        let tree = toy_tree(3);
        let d = ingest(tree.path()).unwrap();
        let model = build_resnet(&Variant::mini_default(), 2, 0).unwrap();
        let raw = extract_features(&model, &d, Part::All, TapName::Res5c, Reduction::None, &small_opts())
            .unwrap();
        let pca = pca_fit(&raw.features, 3).unwrap();
        let reduced = extract_features(
            &model,
            &d,
            Part::All,
            TapName::Res5c,
            Reduction::Pca(&pca),
            &small_opts(),
        )
        .unwrap();
        assert_eq!(reduced.dim(), 3);
        assert_eq!(reduced.meta.reduction, "pca(3)");
        let want = crate::pca::pca_transform_batch(&pca, &raw.features).unwrap();
        assert_eq!(reduced.features.data(), want.data());
    }

    #[test]
    fn parallel_extraction_matches_sequential() {
        let tree = toy_tree(2);
        let d = ingest(tree.path()).unwrap();
        let model = build_resnet(&Variant::mini_default(), 2, 2).unwrap();
        let seq = extract_features(&model, &d, Part::All, TapName::Res5c, Reduction::None, &small_opts())
            .unwrap();
        let opts = ExtractOptions { workers: 3, ..small_opts() };
        let par = extract_features(&model, &d, Part::All, TapName::Res5c, Reduction::None, &opts)
            .unwrap();
        assert_eq!(seq.features.data(), par.features.data());
        assert_eq!(seq.labels, par.labels);
    }
}
