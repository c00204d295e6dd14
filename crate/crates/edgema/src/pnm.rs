//! Binary PGM (P5) and PPM (P6) readers and writers, 8-bit, maxval 255.
//!
//! Header comments (`#` to end of line) are accepted anywhere in the
//! whitespace following the magic number.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::{Frame, GrayFrame, RgbFrame};

/// Read a frame, dispatching on the magic number (P5 -> gray, P6 -> rgb).
pub fn read_frame(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (magic, rest) = split_magic(path, &bytes)?;
    match magic {
        b"P5" => {
            let (w, h, data) = parse_header_and_data(path, rest, 1)?;
            Ok(Frame::Gray(GrayFrame::new(w, h, data.to_vec()).map_err(
                |e| Error::malformed(path, e.to_string()),
            )?))
        }
        b"P6" => {
            let (w, h, data) = parse_header_and_data(path, rest, 3)?;
            Ok(Frame::Rgb(RgbFrame::new(w, h, data.to_vec()).map_err(
                |e| Error::malformed(path, e.to_string()),
            )?))
        }
        other => Err(Error::malformed(
            path,
            format!(
                "unsupported magic {:?}; only binary P5/P6 are accepted",
                String::from_utf8_lossy(other)
            ),
        )),
    }
}

pub fn read_pgm(path: &Path) -> Result<GrayFrame> {
    match read_frame(path)? {
        Frame::Gray(g) => Ok(g),
        Frame::Rgb(_) => Err(Error::malformed(path, "expected PGM (P5), found PPM (P6)")),
    }
}

pub fn write_pgm(frame: &GrayFrame, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(frame.intensities().len() + 32);
    write!(out, "P5\n{} {}\n255\n", frame.width(), frame.height()).expect("vec write");
    out.extend_from_slice(frame.intensities());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_ppm(frame: &RgbFrame, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(frame.pixels().len() + 32);
    write!(out, "P6\n{} {}\n255\n", frame.width(), frame.height()).expect("vec write");
    out.extend_from_slice(frame.pixels());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn split_magic<'a>(path: &Path, bytes: &'a [u8]) -> Result<(&'a [u8], &'a [u8])> {
    if bytes.len() < 2 {
        return Err(Error::malformed(path, "file too short for a PNM header"));
    }
    Ok((&bytes[..2], &bytes[2..]))
}

/// Parse `width height maxval` plus the single whitespace byte before the
/// raster, then return the raster slice of `width * height * channels` bytes.
fn parse_header_and_data<'a>(
    path: &Path,
    rest: &'a [u8],
    channels: usize,
) -> Result<(usize, usize, &'a [u8])> {
    let mut pos = 0;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        pos = skip_whitespace_and_comments(rest, pos);
        let start = pos;
        while pos < rest.len() && rest[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(Error::malformed(path, "malformed PNM header"));
        }
        let text = std::str::from_utf8(&rest[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::malformed(path, "header field out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::malformed(
            path,
            format!("only maxval 255 is supported, got {maxval}"),
        ));
    }
    if pos >= rest.len() || !rest[pos].is_ascii_whitespace() {
        return Err(Error::malformed(path, "missing whitespace before raster"));
    }
    pos += 1; // exactly one whitespace byte separates header and raster
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::malformed(path, "raster size overflow"))?;
    let data = rest
        .get(pos..pos + expected)
        .ok_or_else(|| Error::malformed(path, "truncated raster data"))?;
    Ok((width, height, data))
}

fn skip_whitespace_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}
