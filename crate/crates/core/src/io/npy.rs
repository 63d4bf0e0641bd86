//! Minimal NumPy `.npy` v1.0 reader/writer for 2-D little-endian matrices.
//!
//! Supported dtypes: `<f4`, `<f8`, `<i4`, `<i8`; `fortran_order` must be
//! false and `shape` a 2-tuple.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

pub fn read_npy(path: &Path) -> Result<Array2<f64>> {
    let mut file = File::open(path)?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    if buf.len() < 10 || &buf[..6] != MAGIC {
        return Err(Error::Parse(format!(
            "{}: missing NumPy magic bytes",
            path.display()
        )));
    }
    let (major, minor) = (buf[6], buf[7]);
    if major != 1 || minor != 0 {
        return Err(Error::Parse(format!(
            "{}: unsupported npy version {major}.{minor} (only 1.0)",
            path.display()
        )));
    }
    let header_len = u16::from_le_bytes([buf[8], buf[9]]) as usize;
    if buf.len() < 10 + header_len {
        return Err(Error::Parse(format!("{}: truncated header", path.display())));
    }
    let header = std::str::from_utf8(&buf[10..10 + header_len])
        .map_err(|_| Error::Parse(format!("{}: header is not ASCII", path.display())))?;
    let descr = extract_value(header, "descr")
        .ok_or_else(|| Error::Parse(format!("{}: header missing 'descr'", path.display())))?;
    let descr = descr.trim_matches(|c| c == '\'' || c == '"');
    let fortran = extract_value(header, "fortran_order")
        .ok_or_else(|| Error::Parse(format!("{}: header missing 'fortran_order'", path.display())))?;
    if fortran.trim() != "False" {
        return Err(Error::Parse(format!(
            "{}: fortran_order must be False",
            path.display()
        )));
    }
    let shape = extract_value(header, "shape")
        .ok_or_else(|| Error::Parse(format!("{}: header missing 'shape'", path.display())))?;
    let dims: Vec<usize> = shape
        .trim_matches(|c| c == '(' || c == ')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("{}: bad shape entry '{s}'", path.display())))
        })
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(Error::Parse(format!(
            "{}: expected a 2-D array, shape has {} dims",
            path.display(),
            dims.len()
        )));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let payload = &buf[10 + header_len..];
    let count = rows * cols;
    let values = match descr {
        "<f8" => decode(payload, count, 8, |b| f64::from_le_bytes(b.try_into().unwrap()))?,
        "<f4" => decode(payload, count, 4, |b| {
            f32::from_le_bytes(b.try_into().unwrap()) as f64
        })?,
        "<i8" => decode(payload, count, 8, |b| {
            i64::from_le_bytes(b.try_into().unwrap()) as f64
        })?,
        "<i4" => decode(payload, count, 4, |b| {
            i32::from_le_bytes(b.try_into().unwrap()) as f64
        })?,
        other => {
            return Err(Error::Parse(format!(
                "{}: unsupported dtype '{other}' (need <f4, <f8, <i4 or <i8)",
                path.display()
            )))
        }
    };
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Parse(e.to_string()))
}

fn decode<F: Fn(&[u8]) -> f64>(
    payload: &[u8],
    count: usize,
    width: usize,
    convert: F,
) -> Result<Vec<f64>> {
    if payload.len() < count * width {
        return Err(Error::Parse(format!(
            "npy payload too short: {} bytes for {} elements of width {}",
            payload.len(),
            count,
            width
        )));
    }
    Ok(payload[..count * width]
        .chunks_exact(width)
        .map(convert)
        .collect())
}

fn extract_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let quoted = format!("'{key}'");
    let start = header.find(&quoted)? + quoted.len();
    let rest = header[start..].trim_start().strip_prefix(':')?.trim_start();
    // value ends at the next top-level comma or closing brace
    let mut depth = 0usize;
    for (i, c) in rest.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                if depth == 0 {
                    return Some(rest[..i].trim());
                }
                depth -= 1;
                if depth == 0 {
                    return Some(rest[..=i].trim());
                }
            }
            ',' | '}' if depth == 0 => return Some(rest[..i].trim()),
            _ => {}
        }
    }
    Some(rest.trim())
}

/// Write a 2-D matrix as `.npy` v1.0 with dtype `<f8`, C order.
pub fn write_npy(path: &Path, data: &Array2<f64>) -> Result<()> {
    let header_dict = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': ({}, {}), }}",
        data.nrows(),
        data.ncols()
    );
    // pad with spaces so (10 + header len) is a multiple of 64, newline-terminated
    let unpadded = 10 + header_dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let mut header = header_dict.into_bytes();
    header.extend(std::iter::repeat(b' ').take(padding));
    header.push(b'\n');

    let mut file = File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&[1, 0])?;
    file.write_all(&(header.len() as u16).to_le_bytes())?;
    file.write_all(&header)?;
    for v in data.iter() {
        file.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}
