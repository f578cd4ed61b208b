use std::io::Write;

use haarpsi::{decode_image, rgb_to_gray, rgb_to_yiq, DecodedImage, Error, ImagePlane};

#[test]
fn pgm_samples_decode_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.pgm");
    let mut bytes = b"P5\n2 2\n255\n".to_vec();
    bytes.extend_from_slice(&[0, 64, 128, 255]);
    std::fs::write(&path, bytes).unwrap();
    match decode_image(&path).unwrap() {
        DecodedImage::Gray(p) => assert_eq!(p.samples(), &[0.0, 64.0, 128.0, 255.0]),
        other => panic!("expected gray, got {other:?}"),
    }
}

#[test]
fn png_rgb_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("red.png");
    let red = haarpsi::ColorImage::new(
        ImagePlane::filled(1, 1, 255.0),
        ImagePlane::filled(1, 1, 0.0),
        ImagePlane::filled(1, 1, 0.0),
    )
    .unwrap();
    DecodedImage::Color(red).save(&path).unwrap();
    match decode_image(&path).unwrap() {
        DecodedImage::Color(c) => {
            assert_eq!((c.r().samples(), c.g().samples(), c.b().samples()), (&[255.0][..], &[0.0][..], &[0.0][..]));
            assert!((rgb_to_gray(&c).samples()[0] - 76.245).abs() < 1e-12);
        }
        other => panic!("expected colour, got {other:?}"),
    }
}

#[test]
fn lossless_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let plane = ImagePlane::from_fn(13, 7, |x, y| ((x * 37 + y * 11) % 256) as f64);
    for ext in ["png", "pgm"] {
        let path = dir.path().join(format!("plane.{ext}"));
        DecodedImage::Gray(plane.clone()).save(&path).unwrap();
        let back = decode_image(&path).unwrap();
        assert_eq!(back.to_gray(), plane, "{ext}");
        let again = dir.path().join(format!("again.{ext}"));
        back.save(&again).unwrap();
        assert_eq!(decode_image(&again).unwrap().to_gray(), plane);
    }
}

#[test]
fn sixteen_bit_scales_to_eight_bit_range() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("deep.pgm");
    let mut bytes = b"P5\n2 1\n65535\n".to_vec();
    bytes.extend_from_slice(&[0xff, 0xff, 0x01, 0x01]);
    std::fs::write(&path, bytes).unwrap();
    assert_eq!(decode_image(&path).unwrap().to_gray().samples(), &[255.0, 1.0]);
}

#[test]
fn truncated_file_is_a_corrupt_stream() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.png");
    DecodedImage::Gray(ImagePlane::from_fn(32, 32, |x, y| (x * y % 256) as f64))
        .save(&full)
        .unwrap();
    let bytes = std::fs::read(&full).unwrap();
    let cut = dir.path().join("cut.png");
    std::fs::File::create(&cut).unwrap().write_all(&bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(decode_image(&cut), Err(Error::CorruptImage { .. })));

    let pgm = dir.path().join("cut.pgm");
    std::fs::write(&pgm, b"P5\n4 4\n255\n\x00\x01").unwrap();
    assert!(matches!(decode_image(&pgm), Err(Error::CorruptImage { .. })));
}

#[test]
fn distinct_errors_for_missing_and_unknown_files() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(decode_image(dir.path().join("nope.png")), Err(Error::Io { .. })));
    let junk = dir.path().join("notes.txt");
    std::fs::write(&junk, "just some text, not pixels").unwrap();
    assert!(matches!(decode_image(&junk), Err(Error::UnsupportedFormat { .. })));
}

#[test]
fn gray_conversion_matches_luma_channel() {
    let c = haarpsi::ColorImage::new(
        ImagePlane::from_fn(5, 4, |x, y| (x * 50 + y) as f64),
        ImagePlane::from_fn(5, 4, |x, y| (y * 60 + x) as f64),
        ImagePlane::from_fn(5, 4, |x, y| ((x + y) * 20) as f64),
    )
    .unwrap();
    let (y, _, _) = rgb_to_yiq(&c);
    let g = rgb_to_gray(&c);
    for (a, b) in y.samples().iter().zip(g.samples()) {
        assert!((a - b).abs() <= 1e-12);
    }
}
