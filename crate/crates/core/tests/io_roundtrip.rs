use gsr_core::io::{add_gaussian_noise, load_image, load_mask, make_mask, save_image, save_mask};
use gsr_core::{Error, ImageBuffer};

fn ramp(h: usize, w: usize) -> ImageBuffer {
    ImageBuffer::from_fn(h, w, |r, c| ((r * 31 + c * 17) % 256) as f64 + 0.3)
}

#[test]
fn pgm_and_png_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = ramp(13, 9);
    for name in ["a.pgm", "a.png"] {
        let path = dir.path().join(name);
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.shape(), (13, 9));
        for (a, b) in back.pixels().iter().zip(img.pixels()) {
            assert_eq!(*a, b.round());
        }
    }
}

#[test]
fn raw_p5_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.pgm");
    let mut raw = b"P5\n2 2\n255\n".to_vec();
    raw.extend_from_slice(&[0, 255, 128, 64]);
    std::fs::write(&path, raw).unwrap();
    let img = load_image(&path).unwrap();
    assert_eq!(img.pixels(), &[0.0, 255.0, 128.0, 64.0]);
}

#[test]
fn save_clips_and_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.pgm");
    save_image(&ImageBuffer::new(1, 3, vec![-20.0, 127.5, 300.0]).unwrap(), &path).unwrap();
    assert_eq!(load_image(&path).unwrap().pixels(), &[0.0, 128.0, 255.0]);
}

fn write_png(path: &std::path::Path, depth: png::BitDepth, color: png::ColorType, data: &[u8]) {
    let file = std::fs::File::create(path).unwrap();
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 2, 1);
    enc.set_color(color);
    enc.set_depth(depth);
    let mut w = enc.write_header().unwrap();
    w.write_image_data(data).unwrap();
}

#[test]
fn sixteen_bit_png_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("deep.png");
    write_png(&path, png::BitDepth::Sixteen, png::ColorType::Grayscale, &[0, 1, 255, 255]);
    match load_image(&path) {
        Err(Error::Io { message, .. }) => assert!(message.contains("bit depth"), "{message}"),
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn color_png_uses_luminance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rgb.png");
    write_png(&path, png::BitDepth::Eight, png::ColorType::Rgb, &[255, 0, 0, 10, 20, 30]);
    let img = load_image(&path).unwrap();
    assert!((img.pixels()[0] - 0.299 * 255.0).abs() < 1e-12);
    assert!((img.pixels()[1] - (0.299 * 10.0 + 0.587 * 20.0 + 0.114 * 30.0)).abs() < 1e-12);
}

#[test]
fn unknown_format_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.bmp");
    std::fs::write(&path, b"BM....").unwrap();
    assert!(matches!(load_image(&path), Err(Error::Io { .. })));
    assert!(matches!(load_image(dir.path().join("nope.pgm")), Err(Error::Io { .. })));
}

#[test]
fn noise_statistics() {
    let n = 1000 * 1000;
    let zero = ImageBuffer::filled(1000, 1000, 0.0);
    let sigma = 25.0;
    let noisy = add_gaussian_noise(&zero, sigma, 2024).unwrap();
    let mean = noisy.mean();
    let std = noisy.variance().sqrt();
    assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    assert!((std / sigma - 1.0).abs() < 0.01, "std {std}");
    assert_eq!(noisy, add_gaussian_noise(&zero, sigma, 2024).unwrap());
    assert!(add_gaussian_noise(&zero, -1.0, 0).is_err());
}

#[test]
fn masks() {
    let m = make_mask((100, 100), 0.8, 9).unwrap();
    assert_eq!(m.missing_count(), 8000);
    assert_eq!(m.missing_count() + m.observed_count(), 10_000);
    assert_eq!(m, make_mask((100, 100), 0.8, 9).unwrap());
    assert_eq!(make_mask((7, 3), 0.5, 1).unwrap().missing_count(), 11);
    for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
        assert!(make_mask((4, 4), bad, 0).is_err());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pgm");
    save_mask(&m, &path).unwrap();
    assert_eq!(load_mask(&path).unwrap(), m);
    let applied = m.apply(&ImageBuffer::filled(100, 100, 9.0)).unwrap();
    assert_eq!(applied.pixels().iter().filter(|&&v| v == 0.0).count(), 8000);
}
