//! Directory-per-class dataset ingestion and seeded train/val/test
//! splitting. Ordering is lexicographic at both levels so two runs over
//! the same tree see the same sample indices.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pipeline::ppm::probe_ppm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Val,
    Test,
    All,
}

impl std::str::FromStr for Part {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Part::Train),
            "val" => Ok(Part::Val),
            "test" => Ok(Part::Test),
            "all" => Ok(Part::All),
            other => Err(Error::InvalidConfig(format!(
                "unknown dataset part {other:?}, expected train|val|test|all"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub per_class_train: usize,
    pub per_class_val: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    /// Class directory names, lexicographic; index = label.
    pub classes: Vec<String>,
    /// (image path, class index), class-major, files lexicographic.
    pub samples: Vec<(PathBuf, usize)>,
    pub split: Option<Split>,
}

impl Dataset {
    pub fn class_count(&self, class: usize) -> usize {
        self.samples.iter().filter(|(_, c)| *c == class).count()
    }

    /// Sample indices belonging to one part; `All` is every sample and
    /// the only part available before a split is assigned.
    pub fn part_indices(&self, part: Part) -> Result<Vec<usize>> {
        match (part, &self.split) {
            (Part::All, _) => Ok((0..self.samples.len()).collect()),
            (_, None) => Err(Error::InvalidConfig(
                "dataset has no split; request part \"all\" or split it first".into(),
            )),
            (Part::Train, Some(s)) => Ok(s.train.clone()),
            (Part::Val, Some(s)) => Ok(s.val.clone()),
            (Part::Test, Some(s)) => Ok(s.test.clone()),
        }
    }
}

/// Scans `root` for one subdirectory per class holding `.ppm` images.
/// Every listed image has its header validated up front.
pub fn ingest(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();
    let mut classes = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            classes.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    classes.sort();
    if classes.is_empty() {
        return Err(Error::NoClasses(format!(
            "{} contains no class subdirectories",
            root.display()
        )));
    }
    let mut samples = Vec::new();
    for (ci, class) in classes.iter().enumerate() {
        let dir = root.join(class);
        let mut files = Vec::new();
        for entry in std::fs::read_dir(&dir)? {
            let entry = entry?;
            let path = entry.path();
            if entry.file_type()?.is_file()
                && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
            {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(Error::EmptyClass(format!("{} holds no .ppm images", dir.display())));
        }
        files.sort();
        for path in files {
            probe_ppm(&path)?;
            samples.push((path, ci));
        }
    }
    Ok(Dataset { root: root.to_path_buf(), classes, samples, split: None })
}

/// Draws `per_class_train` then `per_class_val` samples per class
/// without replacement; the remainder is test. Each class shuffles on
/// its own seeded stream, so one class's split does not depend on
/// another's size.
pub fn split(d: &Dataset, per_class_train: usize, per_class_val: usize, seed: u64) -> Result<Dataset> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for ci in 0..d.classes.len() {
        let mut idx: Vec<usize> =
            (0..d.samples.len()).filter(|&i| d.samples[i].1 == ci).collect();
        if idx.len() <= per_class_train + per_class_val {
            return Err(Error::InsufficientSamples(format!(
                "class {:?} has {} samples, need more than {}",
                d.classes[ci],
                idx.len(),
                per_class_train + per_class_val
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ci as u64);
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..per_class_train]);
        val.extend_from_slice(&idx[per_class_train..per_class_train + per_class_val]);
        test.extend_from_slice(&idx[per_class_train + per_class_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    let mut out = d.clone();
    out.split = Some(Split { train, val, test, per_class_train, per_class_val, seed });
    Ok(out)
}
