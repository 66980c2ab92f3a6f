//! Binary PGM (P5) / PPM (P6) with 8-bit samples and linear `[0,1] <-> [0,255]`
//! quantization. Masks are stored as PGM with values `{0, 255}`.

use std::fs;
use std::path::Path;

use super::{ImageGrid, Mask};
use crate::error::{Error, Result};

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode(img: &ImageGrid) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    out
}

pub fn encode_mask(m: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", m.width(), m.height()).into_bytes();
    out.extend(m.data().iter().map(|&v| if v == 1 { 255 } else { 0 }));
    out
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    offset: usize,
}

fn parse_header(bytes: &[u8]) -> std::result::Result<Header, String> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates maxval from the raster
    pos += 1;
    let channels = match tokens[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(format!("unsupported magic `{other}`")),
    };
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| format!("bad header field `{s}`"))
    };
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval != 255 {
        return Err(format!("only 8-bit files are supported, maxval = {maxval}"));
    }
    Ok(Header {
        channels,
        width,
        height,
        offset: pos,
    })
}

pub fn decode(bytes: &[u8]) -> std::result::Result<ImageGrid, String> {
    let h = parse_header(bytes)?;
    let n = h.width * h.height * h.channels;
    let raster = bytes
        .get(h.offset..h.offset + n)
        .ok_or_else(|| "raster shorter than header declares".to_string())?;
    ImageGrid::new(
        h.height,
        h.width,
        h.channels,
        raster.iter().map(|&b| f64::from(b) / 255.0).collect(),
    )
    .map_err(|e| e.to_string())
}

pub fn write_image(path: &Path, img: &ImageGrid) -> Result<()> {
    fs::write(path, encode(img)).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_mask(path: &Path, m: &Mask) -> Result<()> {
    fs::write(path, encode_mask(m)).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_image(path: &Path) -> Result<ImageGrid> {
    decode(&fs::read(path)?).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}

/// Reads a PGM mask; samples >= 128 are the known region.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let img = read_image(path)?;
    if img.channels() != 1 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "mask must be a PGM".into(),
        });
    }
    Mask::new(
        img.height(),
        img.width(),
        img.data().iter().map(|&v| u8::from(v >= 0.5)).collect(),
    )
}
