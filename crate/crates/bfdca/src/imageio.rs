//! 8-bit grayscale image files. Pixels map to `[0, 1]` by division by 255.
//!
//! PGM (binary `P5`, maxval 255) is the canonical format; PNG is read and
//! written for convenience. Sampling masks are stored as PGM with 255 marking
//! a sampled frequency.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use bfdca_core::{Image, SamplingMask, Shape};

use crate::error::{CliError, Result};

/// Largest accepted pixel count, guarding allocations driven by file headers.
pub const MAX_PIXELS: usize = 1 << 26;

/// Decoded 8-bit raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray8 {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

pub fn load_image(path: &Path) -> Result<Image> {
    let g = read_gray(path)?;
    let px = g.data.iter().map(|&v| f64::from(v) / 255.0).collect();
    Ok(Image::from_pixels(Shape::new(g.height, g.width), px)?)
}

/// Writes a single-frame image, quantizing `round(255·clamp(v, 0, 1))`.
/// The format follows the extension: `.png` or anything else as PGM.
pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    if img.shape().frames != 1 {
        return Err(CliError::usage("only single-frame images can be saved"));
    }
    let data = img.pixels().iter().map(|&v| quantize(v)).collect();
    write_gray(
        path,
        &Gray8 {
            height: img.height(),
            width: img.width(),
            data,
        },
    )
}

pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn save_mask(mask: &SamplingMask, path: &Path) -> Result<()> {
    let s = mask.shape();
    if s.frames != 1 {
        return Err(CliError::usage("only single-frame masks can be saved"));
    }
    let data = mask.selected().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_gray(
        path,
        &Gray8 {
            height: s.height,
            width: s.width,
            data,
        },
    )
}

/// Pixels of at least 128 count as sampled.
pub fn load_mask(path: &Path) -> Result<SamplingMask> {
    let g = read_gray(path)?;
    let sel = g.data.iter().map(|&v| v >= 128).collect();
    Ok(SamplingMask::from_selected(Shape::new(g.height, g.width), sel)?)
}

pub fn read_gray(path: &Path) -> Result<Gray8> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let parsed = if bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(&bytes)
    } else {
        Err("unsupported format (expected binary PGM or PNG)".to_string())
    };
    parsed.map_err(|e| CliError::io(path, e))
}

pub fn write_gray(path: &Path, img: &Gray8) -> Result<()> {
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png { encode_png(img) } else { encode_pgm(img) };
    let bytes = bytes.map_err(|e| CliError::io(path, e))?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn check_dims(height: usize, width: usize) -> std::result::Result<usize, String> {
    match height.checked_mul(width) {
        Some(n) if n > 0 && n <= MAX_PIXELS => Ok(n),
        Some(0) => Err("empty image".into()),
        _ => Err(format!("dimensions {height}x{width} overflow the {MAX_PIXELS}-pixel limit")),
    }
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<Gray8, String> {
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        // whitespace and comments between tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let token = std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?;
        *field = token.parse().map_err(|_| "malformed PGM header".to_string())?;
    }
    let [width, height, maxval] = header;
    if maxval != 255 {
        return Err(format!("unsupported PGM maxval {maxval} (expected 255)"));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed PGM header".into());
    }
    pos += 1;
    let n = check_dims(height, width)?;
    let data = bytes
        .get(pos..pos + n)
        .ok_or_else(|| "truncated PGM raster".to_string())?
        .to_vec();
    Ok(Gray8 { height, width, data })
}

fn encode_pgm(img: &Gray8) -> std::result::Result<Vec<u8>, String> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    Ok(out)
}

fn decode_png(bytes: &[u8]) -> std::result::Result<Gray8, String> {
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err("unsupported PNG (expected 8-bit grayscale)".into());
    }
    let (width, height) = (info.width as usize, info.height as usize);
    check_dims(height, width)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    buf.truncate(frame.buffer_size());
    Ok(Gray8 { height, width, data: buf })
}

fn encode_png(img: &Gray8) -> std::result::Result<Vec<u8>, String> {
    let mut out = Vec::new();
    {
        let w = BufWriter::new(&mut out);
        let mut enc = png::Encoder::new(w, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| e.to_string())?;
        writer.write_image_data(&img.data).map_err(|e| e.to_string())?;
        writer.finish().map_err(|e| e.to_string())?;
    }
    Ok(out)
}
