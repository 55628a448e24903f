//! Weights container.
//!
//! ```text
//! offset 0   8 bytes   magic "TWBWGHT\0"
//! offset 8   8 bytes   header length N, u64 little-endian
//! offset 16  N bytes   UTF-8 JSON header
//! offset 16+N          raw little-endian f32 blocks, one per header
//!                      tensor entry, in header order
//! ```
//!
//! The header records the format version, byte order, element type,
//! what kind of parameters the file holds (`anet`, `snet`, `semantic_head`),
//! the profile name, free-form metadata and each tensor's name and shape.

use crate::error::{Error, Result};
use crate::networks::{ANet, NetworkProfile, Parameterized, SNet, SemanticHead, SemanticVariant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"TWBWGHT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsHeader {
    pub format: String,
    pub version: u32,
    pub endianness: String,
    pub dtype: String,
    pub kind: String,
    pub profile: String,
    #[serde(default)]
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightsFile {
    pub header: WeightsHeader,
    pub blocks: Vec<Vec<f32>>,
}

impl WeightsFile {
    pub fn from_params(
        kind: &str,
        profile: &str,
        meta: serde_json::Value,
        params: &impl Parameterized,
    ) -> Self {
        let mut tensors = Vec::new();
        let mut blocks = Vec::new();
        params.visit_params(&mut |name, shape, data| {
            tensors.push(TensorEntry {
                name: name.to_string(),
                shape: shape.to_vec(),
            });
            blocks.push(data.to_vec());
        });
        WeightsFile {
            header: WeightsHeader {
                format: "twinbranch-weights".into(),
                version: FORMAT_VERSION,
                endianness: "little".into(),
                dtype: "f32".into(),
                kind: kind.into(),
                profile: profile.into(),
                meta,
                tensors,
            },
            blocks,
        }
    }

    /// Copies the blocks into `target`, checking names and element counts
    /// against the target's own layout.
    pub fn apply_to(&self, target: &mut impl Parameterized) -> Result<()> {
        let mut expected = Vec::new();
        target
            .visit_params(&mut |name, shape, _| expected.push((name.to_string(), shape.to_vec())));
        for ((name, shape), entry) in expected.iter().zip(&self.header.tensors) {
            if *name != entry.name || *shape != entry.shape {
                return Err(Error::format(format!(
                    "layer {name}: model expects shape {shape:?}, file has {} with shape {:?}",
                    entry.name, entry.shape
                )));
            }
        }
        if expected.len() != self.header.tensors.len() {
            return Err(Error::format(format!(
                "weights file has {} tensors, model expects {}",
                self.header.tensors.len(),
                expected.len()
            )));
        }
        let mut i = 0;
        target.visit_params_mut(&mut |_, dst| {
            dst.copy_from_slice(&self.blocks[i]);
            i += 1;
        });
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let floats: usize = self.blocks.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(16 + header.len() + 4 * floats);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (block, entry) in self.blocks.iter().zip(&self.header.tensors) {
            if block.len() != entry.shape.iter().product::<usize>() {
                return Err(Error::contract(format!(
                    "block {} does not match its shape",
                    entry.name
                )));
            }
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::format("not a weights container (bad magic)"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[16..];
        if body.len() < hlen {
            return Err(Error::format("truncated weights header"));
        }
        let header: WeightsHeader = serde_json::from_slice(&body[..hlen])
            .map_err(|e| Error::format(format!("bad weights header: {e}")))?;
        if header.version != FORMAT_VERSION
            || header.endianness != "little"
            || header.dtype != "f32"
        {
            return Err(Error::format(format!(
                "unsupported weights encoding: version {} {} {}",
                header.version, header.endianness, header.dtype
            )));
        }
        let mut rest = &body[hlen..];
        let mut blocks = Vec::with_capacity(header.tensors.len());
        for entry in &header.tensors {
            let n: usize = entry.shape.iter().product();
            if rest.len() < 4 * n {
                return Err(Error::format(format!(
                    "truncated block for {}: need {} bytes, {} left",
                    entry.name,
                    4 * n,
                    rest.len()
                )));
            }
            let block = rest[..4 * n]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            blocks.push(block);
            rest = &rest[4 * n..];
        }
        if !rest.is_empty() {
            return Err(Error::format(format!(
                "{} trailing bytes after the last block",
                rest.len()
            )));
        }
        Ok(WeightsFile { header, blocks })
    }
}

pub fn save_weights(file: &WeightsFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, file.encode()?).map_err(|e| Error::io_at(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightsFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io_at(path, e))?;
    WeightsFile::decode(&bytes)
}

fn expect_kind(file: &WeightsFile, kind: &str) -> Result<()> {
    if file.header.kind != kind {
        return Err(Error::format(format!(
            "expected a '{kind}' weights file, found '{}'",
            file.header.kind
        )));
    }
    Ok(())
}

// Placeholder weights are overwritten entirely by `apply_to`.
fn scratch_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

pub fn save_anet(anet: &ANet, profile: &NetworkProfile, path: impl AsRef<Path>) -> Result<()> {
    save_weights(
        &WeightsFile::from_params("anet", &profile.name, serde_json::Value::Null, anet),
        path,
    )
}

pub fn load_anet(profile: &NetworkProfile, path: impl AsRef<Path>) -> Result<ANet> {
    let f = load_weights(path)?;
    expect_kind(&f, "anet")?;
    let mut a = ANet::init(profile, &mut scratch_rng());
    f.apply_to(&mut a)?;
    Ok(a)
}

pub fn save_snet(snet: &SNet, profile: &NetworkProfile, path: impl AsRef<Path>) -> Result<()> {
    save_weights(
        &WeightsFile::from_params("snet", &profile.name, serde_json::Value::Null, snet),
        path,
    )
}

pub fn load_snet(profile: &NetworkProfile, path: impl AsRef<Path>) -> Result<SNet> {
    let f = load_weights(path)?;
    expect_kind(&f, "snet")?;
    let mut s = SNet::init(profile, &mut scratch_rng())?;
    f.apply_to(&mut s)?;
    Ok(s)
}

pub fn save_head(
    head: &SemanticHead,
    profile: &NetworkProfile,
    path: impl AsRef<Path>,
) -> Result<()> {
    let meta = serde_json::to_value(head.variant)?;
    save_weights(
        &WeightsFile::from_params("semantic_head", &profile.name, meta, head),
        path,
    )
}

pub fn load_head(profile: &NetworkProfile, path: impl AsRef<Path>) -> Result<SemanticHead> {
    let f = load_weights(path)?;
    expect_kind(&f, "semantic_head")?;
    let variant: SemanticVariant = serde_json::from_value(f.header.meta.clone())
        .map_err(|e| Error::format(format!("semantic head metadata: {e}")))?;
    let mut h = SemanticHead::init(profile, variant, &mut scratch_rng());
    f.apply_to(&mut h)?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_bitwise() {
        let p = NetworkProfile::desk();
        let a = ANet::init(&p, &mut ChaCha8Rng::seed_from_u64(5));
        let f = WeightsFile::from_params("anet", "desk", serde_json::Value::Null, &a);
        let back = WeightsFile::decode(&f.encode().unwrap()).unwrap();
        assert_eq!(back, f);
        let mut b = ANet::init(&p, &mut ChaCha8Rng::seed_from_u64(6));
        back.apply_to(&mut b).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_profile_names_the_layer() {
        let desk = ANet::init(&NetworkProfile::desk(), &mut ChaCha8Rng::seed_from_u64(1));
        let f = WeightsFile::from_params("anet", "desk", serde_json::Value::Null, &desk);
        let mut paper = ANet::init(&NetworkProfile::paper(), &mut ChaCha8Rng::seed_from_u64(1));
        let err = f.apply_to(&mut paper).unwrap_err().to_string();
        assert!(err.contains("conv1.weight"), "{err}");
    }

    #[test]
    fn truncation_is_reported() {
        let a = ANet::init(&NetworkProfile::desk(), &mut ChaCha8Rng::seed_from_u64(1));
        let bytes = WeightsFile::from_params("anet", "desk", serde_json::Value::Null, &a)
            .encode()
            .unwrap();
        let err = WeightsFile::decode(&bytes[..bytes.len() - 3])
            .unwrap_err()
            .to_string();
        assert!(err.contains("truncated"), "{err}");
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(WeightsFile::decode(&extra).is_err());
        assert!(WeightsFile::decode(b"nonsense").is_err());
    }
}
