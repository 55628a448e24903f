//! Binary portable pixmap (P6) and graymap (P5) images, 8 bits per sample.
//! Pixels decode to `H x W x 3` tensors with values `v / 255`; graymaps are
//! replicated across the three channels.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::fs;
use std::path::Path;

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::format("file too short for a PNM header"));
    }
    let magic = [bytes[0], bytes[1]];
    if &magic != b"P6" && &magic != b"P5" {
        return Err(Error::format(format!(
            "unsupported magic number {:?} (expected P5 or P6)",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::format("truncated PNM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("malformed PNM header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("PNM header field out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format("missing whitespace after PNM maxval")),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format(format!(
            "only 8-bit PNM (maxval 255) is supported, got {maxval}"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::format("PNM image has zero size"));
    }
    Ok(Header {
        magic,
        width,
        height,
        data_start: pos,
    })
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Tensor> {
    let h = parse_header(bytes)?;
    let channels = if &h.magic == b"P6" { 3 } else { 1 };
    let need = h.width * h.height * channels;
    let raw = &bytes[h.data_start..];
    if raw.len() < need {
        return Err(Error::format(format!(
            "truncated pixel data: expected {need} bytes, found {}",
            raw.len()
        )));
    }
    let mut data = Vec::with_capacity(h.width * h.height * 3);
    if channels == 3 {
        data.extend(raw[..need].iter().map(|&b| b as f32 / 255.0));
    } else {
        for &b in &raw[..need] {
            let v = b as f32 / 255.0;
            data.extend_from_slice(&[v, v, v]);
        }
    }
    Tensor::new(vec![h.height, h.width, 3], data)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io_at(path, e))?;
    decode_pnm(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// `(width, height)` from the header alone.
pub fn image_dimensions(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    use std::io::Read;
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(64);
    fs::File::open(path)
        .and_then(|f| f.take(256).read_to_end(&mut buf))
        .map_err(|e| Error::io_at(path, e))?;
    let h = parse_header(&buf)?;
    Ok((h.width, h.height))
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes an `H x W x 3` tensor as P6.
pub fn encode_ppm(image: &Tensor) -> Result<Vec<u8>> {
    let (h, w, c) = image.dims3()?;
    if c != 3 {
        return Err(Error::contract(format!("P6 needs 3 channels, got {c}")));
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

/// Encodes channel 0 of an `H x W x C` tensor as P5.
pub fn encode_pgm(image: &Tensor) -> Result<Vec<u8>> {
    let (h, w, c) = image.dims3()?;
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().chunks_exact(c).map(|px| quantize(px[0])));
    Ok(out)
}

pub fn save_ppm(path: impl AsRef<Path>, image: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(image)?).map_err(|e| Error::io_at(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_known_p6() {
        let mut bytes = b"P6\n# comment\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 51, 102, 153, 204, 1, 2, 3, 4, 5, 6]);
        let t = decode_pnm(&bytes).unwrap();
        assert_eq!(t.shape(), &[2, 2, 3]);
        let expect: Vec<f32> = [0u8, 255, 51, 102, 153, 204, 1, 2, 3, 4, 5, 6]
            .iter()
            .map(|&b| b as f32 / 255.0)
            .collect();
        assert_eq!(t.data(), expect.as_slice());
    }

    #[test]
    fn p5_replicates_channels() {
        let mut bytes = b"P5 3 1 255\n".to_vec();
        bytes.extend_from_slice(&[10, 20, 30]);
        let t = decode_pnm(&bytes).unwrap();
        for px in t.data().chunks(3) {
            assert!(px[0] == px[1] && px[1] == px[2]);
        }
        assert_eq!(t.at3(0, 2, 1), 30.0 / 255.0);
    }

    #[test]
    fn malformed_inputs_error() {
        assert!(matches!(
            decode_pnm(b"P3\n1 1\n255\n0 0 0"),
            Err(Error::Format(_))
        ));
        let mut truncated = b"P6\n4 4\n255\n".to_vec();
        truncated.extend_from_slice(&[1, 2, 3]);
        assert!(matches!(decode_pnm(&truncated), Err(Error::Format(_))));
        assert!(decode_pnm(b"P6\n4").is_err());
        assert!(decode_pnm(b"").is_err());
        assert!(decode_pnm(b"P6\n1 1\n65535\n\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn ppm_roundtrip_is_bit_exact_on_quantized_values() {
        let t = Tensor::from_fn3(3, 4, 3, |y, x, c| {
            ((y * 12 + x * 3 + c) * 7 % 256) as f32 / 255.0
        });
        assert_eq!(decode_pnm(&encode_ppm(&t).unwrap()).unwrap(), t);
        let g = decode_pnm(&encode_pgm(&t).unwrap()).unwrap();
        assert_eq!(g.at3(1, 1, 2), t.at3(1, 1, 0));
    }
}
