//! Loading user-supplied source frames (binary PPM or tensor files).

use std::path::{Path, PathBuf};

use crate::error::{NebiError, Result};
use crate::image::{ColorSpace, PlanarImage};
use crate::tensor_file::read_tensor;

fn ingest_err(path: &Path, msg: impl Into<String>) -> NebiError {
    NebiError::Ingest {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Parses a binary `P6` PPM with maxval 255 into an sRGB image in `[0, 1]`.
pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<PlanarImage> {
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(ingest_err(path, "truncated PPM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P6" {
        return Err(ingest_err(path, "not a binary P6 PPM"));
    }
    let mut num = |what: &str| -> Result<usize> {
        token()?
            .parse()
            .map_err(|_| ingest_err(path, format!("bad PPM {what}")))
    };
    let (w, h, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if maxval != 255 {
        return Err(ingest_err(path, format!("unsupported PPM maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let raster = &bytes[pos + 1..];
    if raster.len() < 3 * w * h {
        return Err(ingest_err(path, "truncated PPM raster"));
    }
    let n = w * h;
    let mut data = vec![0.0f32; 3 * n];
    for i in 0..n {
        for c in 0..3 {
            data[c * n + i] = raster[3 * i + c] as f32 / 255.0;
        }
    }
    PlanarImage::new(3, h, w, ColorSpace::Srgb, data).map_err(|e| ingest_err(path, e.to_string()))
}

/// Encodes a 3-channel image as binary PPM, clamping to `[0, 1]` and
/// rounding to 8 bits.
pub fn encode_ppm(img: &PlanarImage) -> Result<Vec<u8>> {
    if img.channels() != 3 {
        return Err(NebiError::ChannelCount {
            expected: 3,
            got: img.channels(),
        });
    }
    let (h, w) = (img.height(), img.width());
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                out.push((img.get(c, y, x).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    Ok(out)
}

fn load_frame(path: &Path) -> Result<PlanarImage> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "ppm" => {
            let bytes = std::fs::read(path).map_err(|e| NebiError::io(path, e))?;
            decode_ppm(&bytes, path)
        }
        "nebi" => {
            let arr = read_tensor(path).map_err(|e| ingest_err(path, e.to_string()))?;
            let img = PlanarImage::from_array(&arr, ColorSpace::Srgb).map_err(|e| ingest_err(path, e.to_string()))?;
            if img.channels() != 3 {
                return Err(ingest_err(path, format!("expected 3 channels, got {}", img.channels())));
            }
            Ok(img)
        }
        _ => Err(ingest_err(path, "unsupported extension")),
    }
}

/// Center crop to `size x size`.
pub fn center_crop(img: &PlanarImage, size: usize) -> Result<PlanarImage> {
    if size > img.height() || size > img.width() || size < 2 {
        return Err(NebiError::Config(format!(
            "cannot crop {}x{} to {size}",
            img.height(),
            img.width()
        )));
    }
    let y0 = (img.height() - size) / 2;
    let x0 = (img.width() - size) / 2;
    Ok(PlanarImage::from_fn(img.channels(), size, size, img.space(), |c, y, x| {
        img.get(c, y0 + y, x0 + x)
    }))
}

/// Loads every `.ppm`/`.nebi` file in `dir` in lexicographic order. All must
/// share one size. Frames are center-cropped to `crop` (or the largest even
/// square when `None`).
pub fn ingest_frames(dir: impl AsRef<Path>, crop: Option<usize>) -> Result<Vec<PlanarImage>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| NebiError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ppm" | "nebi")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(NebiError::Empty(format!("no .ppm or .nebi frames in {}", dir.display())));
    }
    let mut frames = Vec::with_capacity(paths.len());
    let mut size = None;
    for p in &paths {
        let img = load_frame(p)?;
        let s = (img.height(), img.width());
        match size {
            None => size = Some(s),
            Some(first) if first != s => {
                return Err(ingest_err(
                    p,
                    format!("size {}x{} differs from first frame {}x{}", s.0, s.1, first.0, first.1),
                ))
            }
            _ => {}
        }
        frames.push(img);
    }
    let (h, w) = size.expect("nonempty");
    let side = crop.unwrap_or(h.min(w) & !1);
    if !side.is_multiple_of(2) {
        return Err(NebiError::Config(format!("crop size {side} must be even")));
    }
    frames.iter().map(|f| center_crop(f, side)).collect()
}
