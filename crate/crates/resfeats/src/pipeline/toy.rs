//! Synthetic three-class dataset for end-to-end exercises: classes
//! differ by per-channel color statistics, which any color-sensitive
//! feature pipeline should separate far above the 1/3 chance rate.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::pipeline::image::RgbImage;
use crate::pipeline::ppm::write_ppm;
use crate::resnet::{build_resnet, Variant};

pub const TOY_CLASSES: [&str; 3] = ["blue", "green", "red"];
pub const TOY_IMAGES_PER_CLASS: usize = 60;
pub const TOY_IMAGE_SIDE: usize = 32;
/// Name of the random Mini weight file emitted next to the classes.
pub const TOY_WEIGHTS: &str = "mini.rft";

const BASE_COLORS: [[f32; 3]; 3] = [
    [35.0, 55.0, 190.0],
    [45.0, 185.0, 60.0],
    [190.0, 45.0, 45.0],
];

/// Writes `out/{blue,green,red}/img_NNN.ppm` (60 each, 32×32) plus a
/// seeded random Mini weight file `out/mini.rft`. Fully determined by
/// the seed.
pub fn make_toy(out: impl AsRef<Path>, seed: u64) -> Result<()> {
    let out = out.as_ref();
    std::fs::create_dir_all(out)?;
    let noise = Normal::new(0.0f32, 18.0).expect("finite std");
    for (ci, class) in TOY_CLASSES.iter().enumerate() {
        let dir = out.join(class);
        std::fs::create_dir_all(&dir)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(11 + ci as u64);
        for i in 0..TOY_IMAGES_PER_CLASS {
            let jitter: [f32; 3] = [
                rng.gen_range(-12.0..12.0),
                rng.gen_range(-12.0..12.0),
                rng.gen_range(-12.0..12.0),
            ];
            let mut data = Vec::with_capacity(TOY_IMAGE_SIDE * TOY_IMAGE_SIDE * 3);
            for _ in 0..TOY_IMAGE_SIDE * TOY_IMAGE_SIDE {
                for c in 0..3 {
                    let v = BASE_COLORS[ci][c] + jitter[c] + noise.sample(&mut rng);
                    data.push(v.clamp(0.0, 255.0));
                }
            }
            let img = RgbImage::new(TOY_IMAGE_SIDE, TOY_IMAGE_SIDE, data)?;
            write_ppm(&img, dir.join(format!("img_{i:03}.ppm")))?;
        }
    }
    let model = build_resnet(&Variant::mini_default(), TOY_CLASSES.len(), seed)?;
    model.to_container().write(out.join(TOY_WEIGHTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::Container;
    use crate::pipeline::dataset::ingest;
    use crate::pipeline::ppm::read_ppm;

    #[test]
    fn emits_the_documented_tree_and_weights() {
        let dir = tempfile::tempdir().unwrap();
        make_toy(dir.path(), 0).unwrap();
        let d = ingest(dir.path()).unwrap();
        assert_eq!(d.classes, vec!["blue", "green", "red"]);
        assert_eq!(d.samples.len(), 180);
        let img = read_ppm(&d.samples[0].0).unwrap();
        assert_eq!((img.width, img.height), (32, 32));
        let c = Container::read(dir.path().join(TOY_WEIGHTS)).unwrap();
        assert!(c.get("stem.conv.weight").is_some());
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        make_toy(a.path(), 5).unwrap();
        make_toy(b.path(), 5).unwrap();
        for name in ["blue/img_000.ppm", "red/img_059.ppm", TOY_WEIGHTS] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
        let c = tempfile::tempdir().unwrap();
        make_toy(c.path(), 6).unwrap();
        let x = std::fs::read(a.path().join("blue/img_000.ppm")).unwrap();
        let y = std::fs::read(c.path().join("blue/img_000.ppm")).unwrap();
        assert_ne!(x, y);
    }

    #[test]
    fn class_color_statistics_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        make_toy(dir.path(), 1).unwrap();
        let mean_channel = |class: &str, c: usize| -> f32 {
            let img = read_ppm(dir.path().join(class).join("img_000.ppm")).unwrap();
            let sum: f32 = img.data.iter().skip(c).step_by(3).sum();
            sum / (32.0 * 32.0)
        };
        assert!(mean_channel("blue", 2) > mean_channel("blue", 0) + 60.0);
        assert!(mean_channel("green", 1) > mean_channel("green", 2) + 60.0);
        assert!(mean_channel("red", 0) > mean_channel("red", 1) + 60.0);
    }
}
