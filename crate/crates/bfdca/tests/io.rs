use std::fs;

use bfdca::error::CliError;
use bfdca::imageio::{load_image, load_mask, read_gray, save_image, save_mask, write_gray, Gray8};
use bfdca::kspace::{decode_image, decode_kspace, encode_image, encode_kspace, read_kspace, write_kspace};
use bfdca_core::mask::make_radial_mask;
use bfdca_core::{Image, KSpaceData, SamplingMask, Shape};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pgm(h: usize, w: usize, data: &[u8]) -> Vec<u8> {
    let mut v = format!("P5\n# comment\n{w} {h}\n255\n").into_bytes();
    v.extend_from_slice(data);
    v
}

#[test]
fn all_zero_file_loads_as_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("z.pgm");
    fs::write(&p, pgm(4, 6, &[0; 24])).unwrap();
    let img = load_image(&p).unwrap();
    assert_eq!((img.height(), img.width()), (4, 6));
    assert!(img.pixels().iter().all(|&v| v == 0.0));
}

#[test]
fn full_intensity_loads_as_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.pgm");
    fs::write(&p, pgm(2, 2, &[255, 0, 255, 51])).unwrap();
    let img = load_image(&p).unwrap();
    assert_eq!(img.pixels(), &[1.0, 0.0, 1.0, 0.2]);
}

#[test]
fn save_then_load_within_half_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for ext in ["pgm", "png"] {
        let shape = Shape::new(8, 16);
        let px: Vec<f64> = (0..shape.len()).map(|_| rng.random::<f64>()).collect();
        let img = Image::from_pixels(shape, px).unwrap();
        let p = dir.path().join(format!("r.{ext}"));
        save_image(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back.shape(), shape);
        let err = img.pixels().iter().zip(back.pixels()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1.0 / 510.0 + 1e-15, "{ext}: {err}");
    }
}

#[test]
fn png_and_pgm_carry_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let g = Gray8 {
        height: 3,
        width: 5,
        data: (0..15).map(|i| (i * 17) as u8).collect(),
    };
    for name in ["a.pgm", "a.png"] {
        let p = dir.path().join(name);
        write_gray(&p, &g).unwrap();
        assert_eq!(read_gray(&p).unwrap(), g);
    }
}

#[test]
fn unsupported_formats_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, Vec<u8>); 4] = [
        ("ascii.pgm", b"P2\n2 2\n255\n0 0 0 0\n".to_vec()),
        ("deep.pgm", b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0".to_vec()),
        ("short.pgm", pgm(4, 4, &[0; 10])),
        ("junk.bin", b"hello".to_vec()),
    ];
    for (name, bytes) in cases {
        let p = dir.path().join(name);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(load_image(&p), Err(CliError::Io(_))), "{name}");
    }
    assert!(matches!(load_image(&dir.path().join("missing.pgm")), Err(CliError::Io(_))));
}

#[test]
fn oversized_header_is_rejected_before_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("huge.pgm");
    fs::write(&p, b"P5\n4000000000 4000000000\n255\n\0").unwrap();
    assert!(matches!(load_image(&p), Err(CliError::Io(_))));
}

#[test]
fn mask_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mask = make_radial_mask(32, 32, 0.3, 8, 4).unwrap();
    let p = dir.path().join("mask.pgm");
    save_mask(&mask, &p).unwrap();
    assert_eq!(load_mask(&p).unwrap(), mask);
    let raw = read_gray(&p).unwrap();
    assert!(raw.data.iter().all(|&v| v == 0 || v == 255));
}

fn random_samples(m: usize, seed: u64) -> KSpaceData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    KSpaceData::new((0..m).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect())
}

#[test]
fn kspace_record_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mask = make_radial_mask(16, 16, 0.5, 8, 1).unwrap().repeat(3);
    let b = random_samples(mask.m(), 2);
    let p = dir.path().join("k.bin");
    write_kspace(&p, &mask, &b).unwrap();
    assert_eq!(read_kspace(&p, &mask).unwrap(), b);
    let bytes = fs::read(&p).unwrap();
    assert_eq!(&bytes[..8], b"BFKSPACE");
    // header + checksum + 16 bytes per sample
    assert_eq!(bytes.len(), 8 + 4 + 12 + 8 + 32 + 16 * mask.m());
}

#[test]
fn kspace_record_rejects_other_mask_and_corruption() {
    let mask = make_radial_mask(16, 16, 0.5, 8, 1).unwrap();
    let b = random_samples(mask.m(), 3);
    let bytes = encode_kspace(&mask, &b).unwrap();
    // same count, different locations
    let mut sel = mask.selected().to_vec();
    let on = sel.iter().rposition(|&s| s).unwrap();
    let off = sel.iter().position(|&s| !s).unwrap();
    sel.swap(on, off);
    let other = SamplingMask::from_selected(mask.shape(), sel).unwrap();
    assert!(decode_kspace(&bytes, &other).unwrap_err().contains("checksum"));
    assert!(decode_kspace(&bytes[..bytes.len() - 1], &mask).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_kspace(&extra, &mask).is_err());
    let mut magic = bytes;
    magic[0] = b'X';
    assert!(decode_kspace(&magic, &mask).is_err());
    assert!(encode_kspace(&mask, &random_samples(mask.m() + 1, 0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn image_record_round_trip(frames in 1usize..4, h in 1usize..9, w in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape::stack(h, w, frames);
        let px: Vec<f64> = (0..shape.len()).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let img = Image::from_pixels(shape, px).unwrap();
        prop_assert_eq!(decode_image(&encode_image(&img)).unwrap(), img);
    }

    #[test]
    fn quantization_error_bound(v in 0.0f64..=1.0) {
        let q = bfdca::imageio::quantize(v);
        prop_assert!((f64::from(q) / 255.0 - v).abs() <= 1.0 / 510.0 + 1e-15);
    }
}
