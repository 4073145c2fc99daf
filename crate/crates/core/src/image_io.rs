//! Binary PGM (P5) / PPM (P6) reading and writing.
//!
//! Only maxval 255 is accepted. Intensities are stored normalized to
//! `[0, 1]`: a byte `v` loads as `v / 255.0` and an intensity `x` is written
//! as `round(x * 255)` (half away from zero).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("{path}: unsupported maxval {maxval} (only 255 is accepted)")]
    UnsupportedMaxval { path: PathBuf, maxval: u32 },
    #[error("{path}: truncated pixel data: expected {expected} bytes, found {found}")]
    TruncatedPixelData {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid image: {0}")]
    Invalid(String),
}

/// Normalized raster, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid(format!("dimensions {width}x{height} must be positive")));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Invalid(format!("channel count {channels} must be 1 or 3")));
        }
        let expected = width * height * channels;
        if pixels.len() != expected {
            return Err(ImageError::Invalid(format!(
                "pixel buffer holds {} values, expected {expected}",
                pixels.len()
            )));
        }
        if let Some((i, v)) = pixels.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::Invalid(format!("intensity {v} at index {i} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// Image with every element set to `value` (clamped into `[0, 1]`).
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value.clamp(0.0, 1.0); width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Intensity at `(x, y)` in channel `c`.
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }
}

/// Segmentation class map, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid(format!("dimensions {width}x{height} must be positive")));
        }
        if labels.len() != width * height {
            return Err(ImageError::Invalid(format!(
                "label buffer holds {} values, expected {}",
                labels.len(),
                width * height
            )));
        }
        Ok(Self { width, height, labels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Magic {
    P5,
    P6,
}

struct Header {
    magic: Magic,
    width: usize,
    height: usize,
    data_offset: usize,
}

fn malformed(path: &Path, reason: impl Into<String>) -> ImageError {
    ImageError::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads one whitespace-delimited header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' && bytes[*pos] != b'\r' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn parse_dimension(path: &Path, token: Option<&[u8]>, what: &str) -> Result<u32, ImageError> {
    let token = token.ok_or_else(|| malformed(path, format!("missing {what}")))?;
    std::str::from_utf8(token)
        .ok()
        .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
        .and_then(|s| s.parse::<u32>().ok())
        .ok_or_else(|| malformed(path, format!("{what} is not a decimal integer")))
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header, ImageError> {
    let mut pos = 0;
    let magic = match next_token(bytes, &mut pos) {
        Some(b"P5") => Magic::P5,
        Some(b"P6") => Magic::P6,
        Some(other) => {
            return Err(malformed(
                path,
                format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
        None => return Err(malformed(path, "empty file")),
    };
    let width = parse_dimension(path, next_token(bytes, &mut pos), "width")?;
    let height = parse_dimension(path, next_token(bytes, &mut pos), "height")?;
    let maxval = parse_dimension(path, next_token(bytes, &mut pos), "maxval")?;
    if width == 0 || height == 0 {
        return Err(malformed(path, format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval {
            path: path.to_path_buf(),
            maxval,
        });
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(malformed(path, "missing whitespace after maxval")),
    }
    Ok(Header {
        magic,
        width: width as usize,
        height: height as usize,
        data_offset: pos,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, ImageError> {
    fs::read(path).map_err(|source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn raster<'a>(path: &Path, bytes: &'a [u8], header: &Header, channels: usize) -> Result<&'a [u8], ImageError> {
    let expected = header.width * header.height * channels;
    let data = &bytes[header.data_offset..];
    if data.len() < expected {
        return Err(ImageError::TruncatedPixelData {
            path: path.to_path_buf(),
            expected,
            found: data.len(),
        });
    }
    Ok(&data[..expected])
}

/// Loads a P5 (1 channel) or P6 (3 channel) file with maxval 255.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let header = parse_header(path, &bytes)?;
    let channels = match header.magic {
        Magic::P5 => 1,
        Magic::P6 => 3,
    };
    let data = raster(path, &bytes, &header, channels)?;
    let pixels = data.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(Image {
        width: header.width,
        height: header.height,
        channels,
        pixels,
    })
}

/// Loads a P5 file as raw class identifiers (no scaling).
pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap, ImageError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let header = parse_header(path, &bytes)?;
    if header.magic != Magic::P5 {
        return Err(malformed(path, "label maps must be single-channel P5"));
    }
    let data = raster(path, &bytes, &header, 1)?;
    Ok(LabelMap {
        width: header.width,
        height: header.height,
        labels: data.to_vec(),
    })
}

/// Quantizes a normalized intensity to a byte, rounding half away from zero.
pub fn intensity_to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn write_netpbm(path: &Path, magic: &str, width: usize, height: usize, data: &[u8]) -> Result<(), ImageError> {
    let io_err = |source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = Vec::with_capacity(data.len() + 32);
    write!(out, "{magic}\n{width} {height}\n255\n").map_err(io_err)?;
    out.extend_from_slice(data);
    fs::write(path, out).map_err(io_err)
}

/// Writes P5 for single-channel images and P6 for RGB.
pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let data: Vec<u8> = img.pixels.iter().copied().map(intensity_to_byte).collect();
    write_netpbm(path.as_ref(), magic, img.width, img.height, &data)
}

pub fn write_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<(), ImageError> {
    write_netpbm(path.as_ref(), "P5", map.width, map.height, &map.labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn loads_p5_with_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(&dir, "a.pgm", b"P5\n2 2\n255\n\x00\xff\x80\x40");
        let img = load_image(&p).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 1));
        assert_eq!(img.pixels(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn loads_p6_white_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(&dir, "a.ppm", b"P6 1 1 255\n\xff\xff\xff");
        let img = load_image(&p).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.pixels(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn truncated_raster_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(&dir, "short.pgm", b"P5\n2 2\n255\n\x00\x01\x02");
        match load_image(&p) {
            Err(ImageError::TruncatedPixelData { path, expected, found }) => {
                assert_eq!(path, p);
                assert_eq!((expected, found), (4, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_comments_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(&dir, "c.pgm", b"P5\n# made by hand\n1 # inline\n2\n255\n\x07\x08");
        let img = load_image(&p).unwrap();
        assert_eq!((img.width(), img.height()), (1, 2));
    }

    #[test]
    fn rejects_other_maxval() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(&dir, "m.pgm", b"P5\n1 1\n65535\n\x00\x00");
        assert!(matches!(
            load_image(&p),
            Err(ImageError::UnsupportedMaxval { maxval: 65535, .. })
        ));
    }

    #[test]
    fn rejects_ascii_and_garbage_headers() {
        let dir = tempfile::tempdir().unwrap();
        for (name, bytes) in [
            ("ascii.pgm", &b"P2\n1 1\n255\n0\n"[..]),
            ("empty.pgm", &b""[..]),
            ("neg.pgm", &b"P5\n-1 1\n255\n\x00"[..]),
            ("zero.pgm", &b"P5\n0 1\n255\n"[..]),
            ("nows.pgm", &b"P5\n1 1\n255"[..]),
        ] {
            let p = write_raw(&dir, name, bytes);
            assert!(
                matches!(load_image(&p), Err(ImageError::MalformedHeader { .. })),
                "{name}"
            );
        }
    }

    #[test]
    fn label_map_loads_raw_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(&dir, "l.pgm", b"P5\n1 2\n255\n\x00\x07");
        assert_eq!(load_label_map(&p).unwrap().labels(), &[0, 7]);
    }

    #[test]
    fn label_map_rejects_p6_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p6 = write_raw(&dir, "l.ppm", b"P6\n1 1\n255\n\x00\x00\x00");
        let empty = write_raw(&dir, "e.pgm", b"");
        assert!(matches!(load_label_map(&p6), Err(ImageError::MalformedHeader { .. })));
        assert!(matches!(load_label_map(&empty), Err(ImageError::MalformedHeader { .. })));
    }

    #[test]
    fn writes_expected_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.pgm");
        write_image(&Image::new(2, 1, 1, vec![0.0, 1.0]).unwrap(), &p).unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"P5\n2 1\n255\n\x00\xff");
    }

    #[test]
    fn half_rounds_up() {
        assert_eq!(intensity_to_byte(0.5), 128);
        assert_eq!(intensity_to_byte(0.0), 0);
        assert_eq!(intensity_to_byte(1.0), 255);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_image("/nonexistent/frame.pgm"),
            Err(ImageError::Io { .. })
        ));
    }

    #[test]
    fn constructor_enforces_invariants() {
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(Image::new(2, 1, 1, vec![0.0]).is_err());
        assert!(LabelMap::new(2, 2, vec![0; 3]).is_err());
    }
}
