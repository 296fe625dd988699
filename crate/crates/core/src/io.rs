//! Frame and label-map file formats.
//!
//! Frames: binary PGM (`P5`, 8- or 16-bit) and grayscale PNG.
//! Label maps: 8-bit grayscale PNG whose pixel value is the label index.
//! Every writer goes through a temp file and a rename so readers never see
//! a partial file.

use std::cmp::Ordering;
use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::raster::{Frame, LabelMap, ScalarField};

/// Writes `bytes` to `path` via a sibling temp file and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let tmp = match dir {
        Some(d) => d.join(format!(".{}.tmp", file_name.to_string_lossy())),
        None => PathBuf::from(format!(".{}.tmp", file_name.to_string_lossy())),
    };
    let mut f = fs::File::create(&tmp).map_err(|e| Error::Io {
        path: tmp.clone(),
        source: e,
    })?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().ok();
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Loads a grayscale frame, normalizing by the source's bit depth.
pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png_frame(&bytes)
    } else {
        Err(Error::UnsupportedFormat(format!(
            "{}: not a binary PGM or PNG",
            path.display()
        )))
    }
}

struct PgmHeader {
    width: usize,
    height: usize,
    maxval: usize,
    data_offset: usize,
}

fn parse_pgm_header(bytes: &[u8]) -> Result<PgmHeader> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::CorruptData("truncated PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::CorruptData("malformed PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptData("malformed PGM header".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::CorruptData("malformed PGM header".into()));
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::UnsupportedFormat(format!("PGM maxval {maxval}")));
    }
    Ok(PgmHeader {
        width,
        height,
        maxval,
        data_offset: pos + 1,
    })
}

fn decode_pgm(bytes: &[u8]) -> Result<Frame> {
    let h = parse_pgm_header(bytes)?;
    let n = h.width * h.height;
    let payload = &bytes[h.data_offset..];
    let (raw, scale): (Vec<usize>, f64) = if h.maxval < 256 {
        if payload.len() < n {
            return Err(Error::CorruptData(format!(
                "PGM declares {n} pixels but holds {} bytes",
                payload.len()
            )));
        }
        (payload[..n].iter().map(|&b| b as usize).collect(), 255.0)
    } else {
        if payload.len() < 2 * n {
            return Err(Error::CorruptData(format!(
                "PGM declares {n} 16-bit pixels but holds {} bytes",
                payload.len()
            )));
        }
        (
            payload[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as usize)
                .collect(),
            65535.0,
        )
    };
    if let Some(v) = raw.iter().find(|&&v| v > h.maxval) {
        return Err(Error::CorruptData(format!(
            "PGM sample {v} exceeds maxval {}",
            h.maxval
        )));
    }
    Frame::new(
        h.width,
        h.height,
        raw.into_iter().map(|v| v as f64 / scale).collect(),
    )
}

fn decode_png_frame(bytes: &[u8]) -> Result<Frame> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::CorruptData(format!("PNG decode: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG color type {:?}, expected grayscale",
                other.color()
            )))
        }
    };
    Frame::new(w, h, data)
}

/// Encodes a frame as an 8-bit binary PGM.
pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.data().iter().map(|&v| (v * 255.0).round() as u8));
    out
}

pub fn save_frame_pgm(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_pgm(frame))
}

/// Compares file names so that embedded digit runs order numerically.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let na = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let nb = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let (da, db) = (&a[..na], &b[..nb]);
                let ta = trim_zeros(da);
                let tb = trim_zeros(db);
                let ord = ta
                    .len()
                    .cmp(&tb.len())
                    .then_with(|| ta.cmp(tb))
                    .then(na.cmp(&nb));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[na..];
                b = &b[nb..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn trim_zeros(d: &[u8]) -> &[u8] {
    let z = d.iter().take_while(|&&c| c == b'0').count();
    &d[z.min(d.len().saturating_sub(1))..]
}

/// Lists files in `dir` whose names match `pattern`, in natural order.
pub fn list_matching(dir: impl AsRef<Path>, pattern: &str) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let pat = glob::Pattern::new(pattern)
        .map_err(|e| Error::InvalidParameter(format!("bad glob `{pattern}`: {e}")))?;
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut named: Vec<(String, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_file() && pat.matches(&name) {
            named.push((name, entry.path()));
        }
    }
    named.sort_by(|a, b| natural_cmp(&a.0, &b.0));
    Ok(named.into_iter().map(|(_, p)| p).collect())
}

/// Loads every frame in `dir` matching `pattern`, ordered by file name.
pub fn load_sequence(dir: impl AsRef<Path>, pattern: &str) -> Result<Vec<(PathBuf, Frame)>> {
    let paths = list_matching(dir, pattern)?;
    if paths.len() < 2 {
        return Err(Error::TooFewFrames {
            found: paths.len(),
            needed: 2,
        });
    }
    let mut frames: Vec<(PathBuf, Frame)> = Vec::with_capacity(paths.len());
    for p in paths {
        let f = load_frame(&p)?;
        if let Some((_, first)) = frames.first() {
            if first.dims() != f.dims() {
                return Err(Error::dims(first.dims(), f.dims()));
            }
        }
        frames.push((p, f));
    }
    Ok(frames)
}

pub fn encode_png_gray(width: usize, height: usize, pixels: Vec<u8>) -> Result<Vec<u8>> {
    let img = GrayImage::from_raw(width as u32, height as u32, pixels)
        .ok_or_else(|| Error::CorruptData("pixel buffer size".into()))?;
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

pub fn encode_png_rgb(width: usize, height: usize, pixels: Vec<u8>) -> Result<Vec<u8>> {
    let img = RgbImage::from_raw(width as u32, height as u32, pixels)
        .ok_or_else(|| Error::CorruptData("pixel buffer size".into()))?;
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Writes a label map as an 8-bit grayscale PNG (pixel value = label).
pub fn save_labelmap(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    if map.k() > 256 {
        return Err(Error::InvalidParameter(format!(
            "k = {} does not fit in 8 bits",
            map.k()
        )));
    }
    let png = encode_png_gray(
        map.width(),
        map.height(),
        map.labels().iter().map(|&l| l as u8).collect(),
    )?;
    write_atomic(path.as_ref(), &png)
}

/// Reads a label map written by [`save_labelmap`], validating labels `< k`.
pub fn load_labelmap(path: impl AsRef<Path>, k: usize) -> Result<LabelMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .map_err(|e| Error::CorruptData(format!("{}: {e}", path.display())))?;
    let DynamicImage::ImageLuma8(g) = img else {
        return Err(Error::UnsupportedFormat(format!(
            "{}: label maps are 8-bit grayscale",
            path.display()
        )));
    };
    let (w, h) = (g.width() as usize, g.height() as usize);
    LabelMap::new(w, h, k, g.into_raw().into_iter().map(usize::from).collect())
}

/// Row-major CSV dump with 9 significant digits.
pub fn scalar_field_csv(field: &ScalarField) -> String {
    let mut s = String::new();
    for r in 0..field.height() {
        let row: Vec<String> = (0..field.width())
            .map(|c| format!("{:.8e}", field.get(r, c)))
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm(w: usize, h: usize, maxval: usize, payload: &[u8]) -> Vec<u8> {
        let mut v = format!("P5\n{w} {h}\n{maxval}\n").into_bytes();
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn pgm_all_max_is_one() {
        let f = decode_pgm(&pgm(4, 4, 255, &[255; 16])).unwrap();
        assert_eq!(f.dims(), (4, 4));
        assert!(f.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn pgm_linear_scaling() {
        let f = decode_pgm(&pgm(2, 2, 255, &[0, 51, 102, 204])).unwrap();
        assert_eq!(f.data(), &[0.0, 0.2, 0.4, 0.8]);
    }

    #[test]
    fn pgm_truncated_payload() {
        let bytes = pgm(10, 10, 255, &[7; 50]);
        assert!(matches!(decode_pgm(&bytes), Err(Error::CorruptData(_))));
    }

    #[test]
    fn pgm_sixteen_bit_and_comments() {
        let mut v = b"P5\n# made by hand\n2 2\n65535\n".to_vec();
        for x in [0u16, 65535, 32768, 1] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        let f = decode_pgm(&v).unwrap();
        assert_eq!(f.get(0, 1), 1.0);
        assert!((f.get(1, 0) - 32768.0 / 65535.0).abs() < 1e-15);
    }

    #[test]
    fn pgm_sample_above_maxval_rejected() {
        assert!(matches!(
            decode_pgm(&pgm(2, 1, 100, &[5, 101])),
            Err(Error::CorruptData(_))
        ));
    }

    #[test]
    fn natural_order_sorts_numbers() {
        let mut v = vec!["f10.pgm", "f2.pgm", "f1.pgm", "f010.pgm", "a.pgm"];
        v.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(v, vec!["a.pgm", "f1.pgm", "f2.pgm", "f10.pgm", "f010.pgm"]);
    }
}
