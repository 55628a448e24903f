//! Labelled image folders: `NNNNN.ppm` files plus `labels.csv` with
//! `file,class` rows, classes numbered from 0.

use super::pnm::{load_image, save_ppm};
use super::synthetic::ShapeClass;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::fs;
use std::path::Path;

pub const LABELS_FILE: &str = "labels.csv";

pub fn write_classification_set(dir: impl AsRef<Path>, set: &[(Tensor, ShapeClass)]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io_at(dir, e))?;
    let mut csv = String::from("file,class\n");
    for (i, (img, class)) in set.iter().enumerate() {
        let name = format!("{:05}.ppm", i + 1);
        save_ppm(dir.join(&name), img)?;
        csv.push_str(&format!("{name},{}\n", class.index()));
    }
    let path = dir.join(LABELS_FILE);
    fs::write(&path, csv).map_err(|e| Error::io_at(&path, e))
}

pub fn load_classification_set(dir: impl AsRef<Path>) -> Result<Vec<(Tensor, usize)>> {
    let dir = dir.as_ref();
    let path = dir.join(LABELS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io_at(&path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (file, class) = line.split_once(',').ok_or_else(|| {
            Error::format(format!(
                "{}:{}: expected 'file,class'",
                path.display(),
                n + 1
            ))
        })?;
        let class: usize = class.trim().parse().map_err(|_| {
            Error::format(format!("{}:{}: bad class '{class}'", path.display(), n + 1))
        })?;
        out.push((load_image(dir.join(file.trim()))?, class));
    }
    if out.is_empty() {
        return Err(Error::format(format!("{} lists no images", path.display())));
    }
    Ok(out)
}
