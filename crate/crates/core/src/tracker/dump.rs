//! Binary per-frame response dump.
//!
//! Layout, all integers little-endian:
//! `b"TWBRESP\0"`, `u32 size`, `u32 scales`, then per frame
//! `u32 frame_index`, `u32 best_scale`, and `scales * size * size` `f32`
//! values: the combined maps in scale order, row-major.

use super::state::ScaleResponses;
use crate::error::{Error, Result};
use std::io::Write;

pub const RESPONSE_MAGIC: &[u8; 8] = b"TWBRESP\0";

pub struct ResponseDumpWriter<W: Write> {
    out: W,
    shape: Option<(usize, usize)>,
}

impl<W: Write> ResponseDumpWriter<W> {
    pub fn new(out: W) -> Self {
        ResponseDumpWriter { out, shape: None }
    }

    pub fn write_frame(&mut self, frame_index: usize, r: &ScaleResponses) -> Result<()> {
        let size = r.combined.first().map_or(0, |m| m.size());
        let shape = (size, r.combined.len());
        match self.shape {
            None => {
                self.out.write_all(RESPONSE_MAGIC)?;
                self.out.write_all(&(size as u32).to_le_bytes())?;
                self.out
                    .write_all(&(r.combined.len() as u32).to_le_bytes())?;
                self.shape = Some(shape);
            }
            Some(s) if s != shape => {
                return Err(Error::contract("response dump frames differ in shape"))
            }
            Some(_) => {}
        }
        self.out.write_all(&(frame_index as u32).to_le_bytes())?;
        self.out.write_all(&(r.best_scale as u32).to_le_bytes())?;
        for m in &r.combined {
            for v in m.scores.data() {
                self.out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
