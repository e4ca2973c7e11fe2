//! Binary map files and the text point formats.
//!
//! Map layout (all little endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `MVFG`                  |
//! | 4      | 2    | format version (1)            |
//! | 6      | 2    | map kind ([`MapKind`] code)   |
//! | 8      | 4    | rows                          |
//! | 12     | 4    | cols                          |
//! | 16     | 8    | reserved, zero                |
//! | 24     | 4·rows·cols | `f32` values, row-major |
//!
//! `.dots` files hold one `person_id u v visible` line per person, `visible`
//! being `0` or `1`. Prediction files hold `u v [score]` (or `x y [score]`)
//! per line. Blank lines and lines starting with `#` are ignored in both.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::views::{ViewAnnotation, ViewEntry};
use super::{GridMap, MapKind};

pub const MAP_MAGIC: [u8; 4] = *b"MVFG";
pub const MAP_VERSION: u16 = 1;
pub const MAP_HEADER_LEN: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{file}: {message} at byte {offset} (expected {expected})")]
pub struct FormatError {
    pub file: String,
    pub offset: u64,
    pub expected: String,
    pub message: String,
}

impl FormatError {
    pub fn new(
        file: &str,
        offset: usize,
        expected: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        FormatError {
            file: file.to_string(),
            offset: offset as u64,
            expected: expected.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, err: &std::io::Error) -> Self {
        FormatError::new(
            &path.display().to_string(),
            0,
            "readable file",
            err.to_string(),
        )
    }
}

pub fn encode_map(map: &GridMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(MAP_HEADER_LEN + 4 * map.values.len());
    out.extend_from_slice(&MAP_MAGIC);
    out.extend_from_slice(&MAP_VERSION.to_le_bytes());
    out.extend_from_slice(&map.kind.code().to_le_bytes());
    out.extend_from_slice(&(map.rows as u32).to_le_bytes());
    out.extend_from_slice(&(map.cols as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    for v in &map.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a map; `file` names the source in errors.
pub fn decode_map(bytes: &[u8], file: &str) -> Result<GridMap, FormatError> {
    if bytes.len() < MAP_HEADER_LEN {
        return Err(FormatError::new(
            file,
            bytes.len(),
            "24-byte header",
            "truncated header",
        ));
    }
    if bytes[0..4] != MAP_MAGIC {
        return Err(FormatError::new(file, 0, "magic \"MVFG\"", "bad magic"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at =
        |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let version = u16_at(4);
    if version != MAP_VERSION {
        return Err(FormatError::new(
            file,
            4,
            format!("version {MAP_VERSION}"),
            format!("unsupported version {version}"),
        ));
    }
    let kind = MapKind::from_code(u16_at(6)).ok_or_else(|| {
        FormatError::new(
            file,
            6,
            "map kind 1..=6",
            format!("unknown map kind {}", u16_at(6)),
        )
    })?;
    let rows = u32_at(8) as usize;
    let cols = u32_at(12) as usize;
    let n = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FormatError::new(file, 8, "representable map size", "map size overflows"))?;
    let body = &bytes[MAP_HEADER_LEN..];
    if body.len() < n {
        return Err(FormatError::new(
            file,
            bytes.len(),
            format!("{n} bytes of map data"),
            "truncated map data",
        ));
    }
    if body.len() > n {
        return Err(FormatError::new(
            file,
            MAP_HEADER_LEN + n,
            "end of file",
            "trailing bytes",
        ));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for (k, chunk) in body.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(FormatError::new(
                file,
                MAP_HEADER_LEN + 4 * k,
                "finite value",
                "non-finite map value",
            ));
        }
        values.push(v);
    }
    Ok(GridMap {
        rows,
        cols,
        values,
        kind,
    })
}

pub fn write_map(path: &Path, map: &GridMap) -> std::io::Result<()> {
    std::fs::write(path, encode_map(map))
}

pub fn read_map(path: &Path) -> Result<GridMap, FormatError> {
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, &e))?;
    decode_map(&bytes, &path.display().to_string())
}

/// Iterates over non-comment lines with their starting byte offsets.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').filter_map(move |raw| {
        let start = offset;
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        let trimmed = line.trim();
        (!trimmed.is_empty() && !trimmed.starts_with('#')).then_some((start, line))
    })
}

/// Splits a line into whitespace-separated fields with their byte offsets.
fn fields(line: &str, base: usize) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((base + s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((base + s, &line[s..]));
    }
    out
}

fn parse_real(file: &str, (offset, tok): (usize, &str), what: &str) -> Result<f64, FormatError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| FormatError::new(file, offset, what, format!("invalid token '{tok}'")))
}

pub fn write_dots(annotation: &ViewAnnotation) -> String {
    let mut out = String::with_capacity(annotation.entries.len() * 40);
    for e in &annotation.entries {
        writeln!(
            out,
            "{} {} {} {}",
            e.person_id,
            e.u,
            e.v,
            u8::from(e.visible)
        )
        .unwrap();
    }
    out
}

pub fn parse_dots(text: &str, file: &str, camera_id: u32) -> Result<ViewAnnotation, FormatError> {
    let mut entries = Vec::new();
    for (start, line) in content_lines(text) {
        let f = fields(line, start);
        if f.len() != 4 {
            let at = f.get(f.len().min(3)).map_or(start + line.len(), |x| x.0);
            return Err(FormatError::new(
                file,
                at,
                "4 fields: person_id u v visible",
                format!("found {} fields", f.len()),
            ));
        }
        let person_id = f[0].1.parse::<u32>().map_err(|_| {
            FormatError::new(
                file,
                f[0].0,
                "person id",
                format!("invalid token '{}'", f[0].1),
            )
        })?;
        let u = parse_real(file, f[1], "u coordinate")?;
        let v = parse_real(file, f[2], "v coordinate")?;
        let visible = match f[3].1 {
            "0" => false,
            "1" => true,
            other => {
                return Err(FormatError::new(
                    file,
                    f[3].0,
                    "0 or 1",
                    format!("invalid token '{other}'"),
                ))
            }
        };
        entries.push(ViewEntry {
            person_id,
            u,
            v,
            visible,
        });
    }
    Ok(ViewAnnotation { camera_id, entries })
}

pub fn read_dots(path: &Path, camera_id: u32) -> Result<ViewAnnotation, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, &e))?;
    parse_dots(&text, &path.display().to_string(), camera_id)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPoint {
    pub x: f64,
    pub y: f64,
    pub score: Option<f64>,
}

pub fn parse_points(text: &str, file: &str) -> Result<Vec<ScoredPoint>, FormatError> {
    let mut points = Vec::new();
    for (start, line) in content_lines(text) {
        let f = fields(line, start);
        if !(2..=3).contains(&f.len()) {
            let at = f.first().map_or(start, |x| x.0);
            return Err(FormatError::new(
                file,
                at,
                "2 or 3 fields: x y [score]",
                format!("found {} fields", f.len()),
            ));
        }
        let x = parse_real(file, f[0], "first coordinate")?;
        let y = parse_real(file, f[1], "second coordinate")?;
        let score = f
            .get(2)
            .map(|&t| parse_real(file, t, "score"))
            .transpose()?;
        points.push(ScoredPoint { x, y, score });
    }
    Ok(points)
}

pub fn read_points(path: &Path) -> Result<Vec<ScoredPoint>, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, &e))?;
    parse_points(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let m = GridMap::from_values(
            2,
            3,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5],
            MapKind::GroundDensity,
        )
        .unwrap();
        let b = encode_map(&m);
        assert_eq!(b.len(), 24 + 24);
        assert_eq!(&b[0..4], b"MVFG");
        assert_eq!(&b[4..8], &[1, 0, 4, 0]);
        assert_eq!(&b[8..16], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&b[16..24], &[0; 8]);
        assert_eq!(&b[44..48], &6.5f32.to_le_bytes());
    }

    #[test]
    fn bad_magic_and_truncation() {
        let m = GridMap::filled(4, 4, 1.0, MapKind::PixelDensity);
        let mut b = encode_map(&m);
        let trunc = decode_map(&b[..b.len() - 3], "x.den").unwrap_err();
        assert_eq!(trunc.file, "x.den");
        assert_eq!(trunc.offset as usize, b.len() - 3);
        assert!(decode_map(&b[..10], "x.den")
            .unwrap_err()
            .message
            .contains("truncated"));
        b[1] = b'X';
        let err = decode_map(&b, "x.den").unwrap_err();
        assert_eq!(err.message, "bad magic");
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn dots_errors_carry_offsets() {
        let text = "0 1.5 2.5 1\n1 3 4 x\n";
        let err = parse_dots(text, "v.dots", 0).unwrap_err();
        assert_eq!(err.offset, 18);
        let err = parse_dots("0 1.5 2.5\n", "v.dots", 0).unwrap_err();
        assert!(err.expected.contains("4 fields"));
    }

    #[test]
    fn points_accept_optional_score_and_comments() {
        let pts = parse_points("# header\n1 2\n\n3 4 0.9\n", "p.txt").unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].score, Some(0.9));
        assert!(parse_points("1 2 3 4\n", "p.txt").is_err());
        assert!(parse_points("1 nan\n", "p.txt").is_err());
    }

    proptest! {
        #[test]
        fn map_round_trip(rows in 0usize..6, cols in 0usize..6, seed in any::<u32>()) {
            let values: Vec<f32> = (0..rows * cols).map(|i| ((i as u32).wrapping_mul(seed) % 1000) as f32 / 7.0).collect();
            let m = GridMap::from_values(rows, cols, values, MapKind::GroundFused).unwrap();
            prop_assert_eq!(decode_map(&encode_map(&m), "m").unwrap(), m);
        }

        #[test]
        fn dots_round_trip(entries in prop::collection::vec((any::<u32>(), -1e4f64..1e4, -1e4f64..1e4, any::<bool>()), 0..20)) {
            let ann = ViewAnnotation {
                camera_id: 3,
                entries: entries.into_iter().map(|(person_id, u, v, visible)| ViewEntry { person_id, u, v, visible }).collect(),
            };
            prop_assert_eq!(parse_dots(&write_dots(&ann), "d", 3).unwrap(), ann);
        }
    }
}
