//! Image and mask files (PGM P2/P5, 8-bit PNG) and seeded degradations.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::RngExt;

use crate::error::{Error, Result};
use crate::image::{ImageBuffer, MaskBuffer};
use crate::random::{pcg, Gaussian, STREAM_MASK, STREAM_NOISE};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Load a grayscale image from PGM (P2/P5, maxval 255) or PNG. Color PNGs are
/// converted with luminance weights 0.299/0.587/0.114.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(&bytes).map_err(|msg| Error::io(path, msg))
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(&bytes).map_err(|msg| Error::io(path, msg))
    } else {
        Err(Error::io(path, "unsupported format: expected PGM (P2/P5) or PNG"))
    }
}

/// Write an image rounded to the nearest integer and clipped to `[0, 255]`.
/// `.png` paths are written as 8-bit grayscale PNG, anything else as binary PGM.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.pixels().iter().map(|&p| quantize(p)).collect();
    let is_png = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("png"))
        .unwrap_or(false);
    if is_png {
        write_png(path, img.width(), img.height(), &bytes)
    } else {
        std::fs::write(path, encode_pgm(img.width(), img.height(), &bytes)).map_err(|e| Error::io(path, e))
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Masks are stored as PGM/PNG with 0 = missing and 255 = observed.
pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskBuffer> {
    let img = load_image(path)?;
    MaskBuffer::new(
        img.height(),
        img.width(),
        img.pixels().iter().map(|&p| p > 0.0).collect(),
    )
}

pub fn save_mask(mask: &MaskBuffer, path: impl AsRef<Path>) -> Result<()> {
    let pixels = mask.flags().iter().map(|&o| if o { 255.0 } else { 0.0 }).collect();
    save_image(&ImageBuffer::new(mask.height(), mask.width(), pixels)?, path)
}

/// Random mask with exactly `round(ratio·N)` missing pixels, chosen by a
/// seeded Fisher–Yates shuffle of the pixel indices.
pub fn make_mask(shape: (usize, usize), missing_ratio: f64, seed: u64) -> Result<MaskBuffer> {
    if !(missing_ratio > 0.0 && missing_ratio < 1.0) {
        return Err(Error::invalid_param(format!(
            "missing ratio must lie in (0, 1), got {missing_ratio}"
        )));
    }
    let n = shape.0 * shape.1;
    if n == 0 {
        return Err(Error::invalid_input("mask shape must be non-empty"));
    }
    let missing = (missing_ratio * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = pcg(seed, STREAM_MASK);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut observed = vec![true; n];
    for &i in &order[..missing] {
        observed[i] = false;
    }
    MaskBuffer::new(shape.0, shape.1, observed)
}

/// Add i.i.d. `N(0, σ²)` noise, unclipped.
pub fn add_gaussian_noise(img: &ImageBuffer, sigma: f64, seed: u64) -> Result<ImageBuffer> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid_param(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut g = Gaussian::new(seed, STREAM_NOISE);
    let pixels = img.pixels().iter().map(|&p| p + sigma * g.sample()).collect();
    ImageBuffer::new(img.height(), img.width(), pixels)
}

fn encode_pgm(width: usize, height: usize, bytes: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(bytes);
    out
}

fn decode_pgm(bytes: &[u8]) -> std::result::Result<ImageBuffer, String> {
    let binary = &bytes[..2] == b"P5";
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        *field = next_token(bytes, &mut pos)?
            .parse()
            .map_err(|_| "malformed PGM header".to_string())?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err("PGM has zero width or height".into());
    }
    if maxval != 255 {
        return Err(format!("unsupported PGM maxval {maxval}; only 255 is accepted"));
    }
    let n = width * height;
    let pixels: Vec<f64> = if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = pos + 1;
        let raster = bytes
            .get(start..start + n)
            .ok_or_else(|| format!("PGM raster truncated: need {n} bytes"))?;
        raster.iter().map(|&b| b as f64).collect()
    } else {
        (0..n)
            .map(|_| {
                let v: u32 = next_token(bytes, &mut pos)?
                    .parse()
                    .map_err(|_| "malformed PGM sample".to_string())?;
                if v > 255 {
                    return Err(format!("PGM sample {v} exceeds maxval"));
                }
                Ok(v as f64)
            })
            .collect::<std::result::Result<_, String>>()?
    };
    ImageBuffer::new(height, width, pixels).map_err(|e| e.to_string())
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> std::result::Result<&'a str, String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err("unexpected end of PGM data".into());
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| "non-ASCII PGM header".to_string())
}

fn decode_png(bytes: &[u8]) -> std::result::Result<ImageBuffer, String> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(format!(
            "unsupported PNG bit depth {:?}; only 8-bit images are accepted",
            info.bit_depth
        ));
    }
    if info.color_type == png::ColorType::Indexed {
        return Err("palette PNGs are not supported".into());
    }
    let mut buf = vec![0; reader.output_buffer_size().ok_or("PNG too large")?];
    let frame = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let data = &buf[..frame.buffer_size()];
    let channels = match frame.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => unreachable!(),
    };
    let pixels = data
        .chunks_exact(channels)
        .map(|px| match channels {
            1 | 2 => px[0] as f64,
            _ => 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64,
        })
        .collect();
    ImageBuffer::new(h, w, pixels).map_err(|e| e.to_string())
}

fn write_png(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| Error::io(path, e))?;
    writer.write_image_data(bytes).map_err(|e| Error::io(path, e))?;
    writer.finish().map_err(|e| Error::io(path, e))
}
