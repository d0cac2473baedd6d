//! Binary containers for k-space samples and real images.
//!
//! K-space record, all integers little-endian:
//!
//! ```text
//! magic  "BFKSPACE"          8 bytes
//! version u32 = 1
//! frames, height, width      3 × u32
//! m                          u64, number of samples
//! mask checksum              32 bytes, SHA-256 (see `mask_checksum`)
//! samples                    m × (re f64, im f64)
//! ```
//!
//! The image record (`"BFIMAGE1"`, frames/height/width as u32, then f64
//! pixels) keeps ground truths exact where PGM would quantize them.

use std::fs;
use std::path::Path;

use bfdca_core::{Image, KSpaceData, SamplingMask, Shape};
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::imageio::MAX_PIXELS;

const KSPACE_MAGIC: &[u8; 8] = b"BFKSPACE";
const IMAGE_MAGIC: &[u8; 8] = b"BFIMAGE1";
const VERSION: u32 = 1;

/// SHA-256 over the three dimensions (u32 LE) followed by one byte per
/// location (1 = sampled).
pub fn mask_checksum(mask: &SamplingMask) -> [u8; 32] {
    let s = mask.shape();
    let mut h = Sha256::new();
    for d in [s.frames, s.height, s.width] {
        h.update((d as u32).to_le_bytes());
    }
    let bits: Vec<u8> = mask.selected().iter().map(|&b| u8::from(b)).collect();
    h.update(&bits);
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_kspace(mask: &SamplingMask, b: &KSpaceData) -> Result<Vec<u8>> {
    if b.len() != mask.m() {
        return Err(CliError::usage(format!("{} samples for a mask selecting {}", b.len(), mask.m())));
    }
    let s = mask.shape();
    let mut out = Vec::with_capacity(64 + 16 * b.len());
    out.extend_from_slice(KSPACE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [s.frames, s.height, s.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(b.len() as u64).to_le_bytes());
    out.extend_from_slice(&mask_checksum(mask));
    for c in &b.samples {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a record and checks it against `mask`.
pub fn decode_kspace(bytes: &[u8], mask: &SamplingMask) -> std::result::Result<KSpaceData, String> {
    let mut r = Reader::new(bytes);
    if r.take(8)? != KSPACE_MAGIC {
        return Err("not a k-space record".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported k-space record version {version}"));
    }
    let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let s = mask.shape();
    if dims != [s.frames, s.height, s.width] {
        return Err(format!(
            "record is {}x{}x{}, mask is {}x{}x{}",
            dims[0], dims[1], dims[2], s.frames, s.height, s.width
        ));
    }
    let m = r.u64()? as usize;
    if m != mask.m() {
        return Err(format!("record holds {m} samples, mask selects {}", mask.m()));
    }
    if r.take(32)? != mask_checksum(mask) {
        return Err("mask checksum mismatch".into());
    }
    let mut samples = Vec::with_capacity(m);
    for _ in 0..m {
        samples.push(Complex64::new(r.f64()?, r.f64()?));
    }
    r.finish()?;
    Ok(KSpaceData::new(samples))
}

pub fn write_kspace(path: &Path, mask: &SamplingMask, b: &KSpaceData) -> Result<()> {
    let bytes = encode_kspace(mask, b)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_kspace(path: &Path, mask: &SamplingMask) -> Result<KSpaceData> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_kspace(&bytes, mask).map_err(|e| CliError::io(path, e))
}

pub fn encode_image(img: &Image) -> Vec<u8> {
    let s = img.shape();
    let mut out = Vec::with_capacity(20 + 8 * img.len());
    out.extend_from_slice(IMAGE_MAGIC);
    for d in [s.frames, s.height, s.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in img.pixels() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_image(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut r = Reader::new(bytes);
    if r.take(8)? != IMAGE_MAGIC {
        return Err("not an image record".into());
    }
    let (f, h, w) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let n = f
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .filter(|&n| n > 0 && n <= MAX_PIXELS)
        .ok_or_else(|| format!("bad image dimensions {f}x{h}x{w}"))?;
    let px = (0..n).map(|_| r.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
    r.finish()?;
    Image::from_pixels(Shape::stack(h, w, f), px).map_err(|e| e.to_string())
}

pub fn write_image_record(path: &Path, img: &Image) -> Result<()> {
    fs::write(path, encode_image(img)).map_err(|e| CliError::io(path, e))
}

pub fn read_image_record(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_image(&bytes).map_err(|e| CliError::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos + n;
        let out = self.bytes.get(self.pos..end).ok_or_else(|| "truncated record".to_string())?;
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(&self) -> std::result::Result<(), String> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err("trailing bytes after record".into())
        }
    }
}
