use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::Tensor;
use crate::error::{arg_err, shape_err, Result};
use crate::image::{load_pnm, Image};

/// Labelled samples, all of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Tensor>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(inputs: Vec<Tensor>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(arg_err("dataset is empty"));
        }
        if inputs.len() != labels.len() {
            return Err(shape_err(format!("{} inputs but {} labels", inputs.len(), labels.len())));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(arg_err(format!("label {l} out of range for {} classes", class_names.len())));
        }
        let shape = inputs[0].shape();
        if let Some(i) = inputs.iter().position(|t| t.shape() != shape) {
            return Err(shape_err(format!("sample {i} has shape {:?}, expected {:?}", inputs[i].shape(), shape)));
        }
        Ok(Dataset { inputs, labels, class_names })
    }

    /// Images become `(channels, height, width)` tensors scaled to `[0, 1]`.
    pub fn from_images(items: &[(Image, usize)], class_names: Vec<String>) -> Result<Self> {
        let inputs = items.iter().map(|(img, _)| Tensor::from_image(img)).collect();
        Self::new(inputs, items.iter().map(|(_, l)| *l).collect(), class_names)
    }

    /// Reads `root/<class>/<file>.pgm|ppm`, classes and files in sorted order.
    pub fn load_dir(root: &Path) -> std::io::Result<Result<Self>> {
        let mut classes = BTreeMap::new();
        for entry in std::fs::read_dir(root)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                classes.insert(entry.file_name().to_string_lossy().into_owned(), entry.path());
            }
        }
        let mut items = Vec::new();
        for (label, dir) in classes.values().enumerate() {
            let mut files: Vec<_> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm" | "pnm")))
                .collect();
            files.sort();
            for f in files {
                match load_pnm(&std::fs::read(&f)?) {
                    Ok(img) => items.push((img, label)),
                    Err(e) => return Ok(Err(e)),
                }
            }
        }
        Ok(Self::from_images(&items, classes.into_keys().collect()))
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Shape of one sample.
    pub fn sample_shape(&self) -> &[usize] {
        self.inputs[0].shape()
    }

    /// Samples at `indices` stacked along a new leading axis.
    pub fn batch(&self, indices: &[usize]) -> (Vec<usize>, Vec<f64>, Vec<usize>) {
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(self.sample_shape());
        let mut data = Vec::with_capacity(indices.len() * self.inputs[0].numel());
        for &i in indices {
            data.extend_from_slice(self.inputs[i].data());
        }
        (shape, data, indices.iter().map(|&i| self.labels[i]).collect())
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

/// Seeded stratified split into `(train, test)`.
///
/// The test part gets `round(test_fraction * n)` samples, shared out across
/// classes by largest remainder. Every class with at least two samples keeps
/// at least one sample on each side.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 0.5) {
        return Err(arg_err(format!("test fraction must lie in (0, 0.5), got {test_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for members in &mut by_class {
        members.shuffle(&mut rng);
    }

    let n = ds.len();
    let target = (test_fraction * n as f64).round() as usize;
    let exact: Vec<f64> = by_class.iter().map(|m| test_fraction * m.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut assigned: usize = quota.iter().sum();
    for &c in order.iter().cycle().take(order.len() * 2) {
        if assigned >= target {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            assigned += 1;
        }
    }
    for (q, members) in quota.iter_mut().zip(&by_class) {
        if members.len() >= 2 {
            *q = (*q).clamp(1, members.len() - 1);
        }
    }

    let (mut train_idx, mut test_idx) = (Vec::new(), Vec::new());
    for (q, members) in quota.iter().zip(&by_class) {
        test_idx.extend_from_slice(&members[..*q]);
        train_idx.extend_from_slice(&members[*q..]);
    }
    train_idx.shuffle(&mut rng);
    test_idx.shuffle(&mut rng);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(arg_err(format!("split of {n} samples leaves one side empty")));
    }
    Ok((ds.subset(&train_idx), ds.subset(&test_idx)))
}
