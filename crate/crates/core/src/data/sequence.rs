//! OTB-style sequences: an `img/` directory of numbered frames plus
//! `groundtruth_rect.txt` with one `x,y,w,h` line per frame (comma, tab or
//! space separated, top-left convention).

use super::pnm;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::tensor::Tensor;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const GROUNDTRUTH_FILE: &str = "groundtruth_rect.txt";
pub const FRAME_DIR: &str = "img";

#[derive(Clone, Debug)]
pub enum FrameStore {
    Files(Vec<PathBuf>),
    Memory(Vec<Arc<Tensor>>),
}

#[derive(Clone, Debug)]
pub struct Sequence {
    pub name: String,
    pub frames: FrameStore,
    /// Ground truth for the leading frames; at least the first is present.
    pub groundtruth: Vec<BoundingBox>,
    /// `(width, height)` shared by every frame.
    pub frame_size: (usize, usize),
}

impl Sequence {
    pub fn in_memory(
        name: impl Into<String>,
        frames: Vec<Tensor>,
        groundtruth: Vec<BoundingBox>,
    ) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::contract("sequence needs at least one frame"))?;
        let (h, w, _) = first.dims3()?;
        for (i, f) in frames.iter().enumerate() {
            if f.dims3()? != (h, w, 3) {
                return Err(Error::contract(format!(
                    "frame {i} has a different size or channel count"
                )));
            }
        }
        if groundtruth.is_empty() {
            return Err(Error::contract("sequence needs a first-frame annotation"));
        }
        if groundtruth.len() > frames.len() {
            return Err(Error::contract("more annotations than frames"));
        }
        Ok(Sequence {
            name: name.into(),
            frames: FrameStore::Memory(frames.into_iter().map(Arc::new).collect()),
            groundtruth,
            frame_size: (w, h),
        })
    }

    pub fn len(&self) -> usize {
        match &self.frames {
            FrameStore::Files(v) => v.len(),
            FrameStore::Memory(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame(&self, i: usize) -> Result<Arc<Tensor>> {
        match &self.frames {
            FrameStore::Files(v) => {
                let p = v
                    .get(i)
                    .ok_or_else(|| Error::contract(format!("frame {i} out of range")))?;
                Ok(Arc::new(pnm::load_image(p)?))
            }
            FrameStore::Memory(v) => v
                .get(i)
                .cloned()
                .ok_or_else(|| Error::contract(format!("frame {i} out of range"))),
        }
    }

    pub fn first_box(&self) -> BoundingBox {
        self.groundtruth[0]
    }

    /// Loads every frame into memory.
    pub fn into_memory(self) -> Result<Self> {
        if let FrameStore::Memory(_) = self.frames {
            return Ok(self);
        }
        let frames = (0..self.len())
            .map(|i| self.frame(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sequence {
            frames: FrameStore::Memory(frames),
            ..self
        })
    }
}

/// Parses annotation text. Blank lines are ignored.
pub fn parse_groundtruth(text: &str) -> Result<Vec<BoundingBox>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f32> = line
            .split(|c: char| c == ',' || c == '\t' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(format!("annotation line {}: {e}", lineno + 1)))?;
        if vals.len() != 4 {
            return Err(Error::format(format!(
                "annotation line {}: expected 4 values, found {}",
                lineno + 1,
                vals.len()
            )));
        }
        out.push(BoundingBox::from_top_left(
            vals[0], vals[1], vals[2], vals[3],
        ));
    }
    Ok(out)
}

pub fn format_groundtruth(boxes: &[BoundingBox]) -> String {
    let mut s = String::new();
    for b in boxes {
        let (x, y, w, h) = b.top_left();
        s.push_str(&format!("{x},{y},{w},{h}\n"));
    }
    s
}

fn frame_number(p: &Path) -> Option<u64> {
    let ext = p.extension()?.to_str()?.to_ascii_lowercase();
    if !matches!(ext.as_str(), "ppm" | "pgm" | "pnm") {
        return None;
    }
    p.file_stem()?.to_str()?.parse().ok()
}

pub fn load_sequence(dir: impl AsRef<Path>) -> Result<Sequence> {
    let dir = dir.as_ref();
    let gt_path = dir.join(GROUNDTRUTH_FILE);
    let text = fs::read_to_string(&gt_path).map_err(|e| Error::io_at(&gt_path, e))?;
    let groundtruth = parse_groundtruth(&text)?;
    if groundtruth.is_empty() {
        return Err(Error::format(format!(
            "{} has no annotations",
            gt_path.display()
        )));
    }
    let img_dir = dir.join(FRAME_DIR);
    let mut frames: Vec<(u64, PathBuf)> = fs::read_dir(&img_dir)
        .map_err(|e| Error::io_at(&img_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| frame_number(&p).map(|n| (n, p)))
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(Error::format(format!(
            "no numbered frames in {}",
            img_dir.display()
        )));
    }
    if groundtruth.len() > frames.len() {
        return Err(Error::format(format!(
            "{} annotations but only {} frames",
            groundtruth.len(),
            frames.len()
        )));
    }
    let size = pnm::image_dimensions(&frames[0].1)?;
    for (_, p) in &frames[1..] {
        if pnm::image_dimensions(p)? != size {
            return Err(Error::format(format!(
                "frame {} differs in size from the first frame",
                p.display()
            )));
        }
    }
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    Ok(Sequence {
        name,
        frames: FrameStore::Files(frames.into_iter().map(|(_, p)| p).collect()),
        groundtruth,
        frame_size: size,
    })
}

/// Sequence directories under `root`: `root` itself when it holds a
/// ground-truth file, otherwise every subdirectory that does, sorted by name.
pub fn list_sequence_dirs(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    if root.join(GROUNDTRUTH_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io_at(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(GROUNDTRUTH_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::format(format!(
            "no sequences found under {}",
            root.display()
        )));
    }
    Ok(dirs)
}

/// Writes a sequence in the directory layout `load_sequence` reads.
pub fn write_sequence(seq: &Sequence, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let img = dir.join(FRAME_DIR);
    fs::create_dir_all(&img).map_err(|e| Error::io_at(&img, e))?;
    for i in 0..seq.len() {
        pnm::save_ppm(img.join(format!("{:04}.ppm", i + 1)), &*seq.frame(i)?)?;
    }
    let gt = dir.join(GROUNDTRUTH_FILE);
    fs::write(&gt, format_groundtruth(&seq.groundtruth)).map_err(|e| Error::io_at(&gt, e))
}

/// Tracker output: `frame_index,x,y,w,h` per line, top-left convention.
pub fn format_track(boxes: &[BoundingBox]) -> String {
    let mut s = String::new();
    for (i, b) in boxes.iter().enumerate() {
        let (x, y, w, h) = b.top_left();
        s.push_str(&format!("{i},{x:.3},{y:.3},{w:.3},{h:.3}\n"));
    }
    s
}
