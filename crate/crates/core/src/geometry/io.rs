//! Comma-separated point-cloud text format.
//!
//! One point per line, coordinates separated by commas. A leading line that
//! starts with `#` is a header and is skipped, as are blank lines. Ragged rows
//! are rejected with the offending line number.

use std::fmt::Write as _;
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};

pub fn parse_point_cloud(text: &str) -> Result<PointCloud> {
    let mut dim = 0usize;
    let mut coords = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let start = coords.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not a number: {:?}", field.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "non-finite coordinate".into(),
                });
            }
            coords.push(v);
        }
        let width = coords.len() - start;
        if dim == 0 {
            dim = width;
        } else if width != dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("row has {width} coordinates, expected {dim}"),
            });
        }
    }
    if dim == 0 {
        return Err(Error::Parse {
            line: 0,
            message: "no points, cannot infer dimension".into(),
        });
    }
    PointCloud::from_flat(dim, coords)
}

/// Shortest round-trip representation of each coordinate, so a written cloud
/// reads back bit-for-bit.
pub fn format_point_cloud(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * cloud.dim() * 20);
    let _ = writeln!(out, "# n={} dim={}", cloud.len(), cloud.dim());
    for p in cloud.iter() {
        for (k, x) in p.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{x:?}");
        }
        out.push('\n');
    }
    out
}

pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_point_cloud(&text)
}

pub fn write_point_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_point_cloud(cloud)).map_err(|e| Error::io(path, e))
}
