//! On-disk artifact formats.
//!
//! All binary formats are little-endian and start with a four-byte magic:
//!
//! * `VXC1`: `u32 n`, then `n^3` solid bits packed x fastest, least
//!   significant bit first.
//! * `PC3D`: `u32 count`, then `count * 3` `f32` coordinates.
//! * `KMAT`: `u32 n`, `u8 kind`, then `n^2` `f64` values row-major.
//!
//! 2D cells use PBM (`P1` ASCII or `P4` binary, 1 = solid). Datasets are
//! described by a JSON manifest; embeddings travel as CSV rows `id,e0,e1,...`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cell2d::UnitCell2D;
use crate::isogen::{PointCloud, VoxelCell};
use crate::metrics::{KernelKind, SquareMatrix};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {0:?}")]
    BadMagic(&'static str),
    #[error("file is truncated or has trailing bytes")]
    Length,
    #[error("{0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn invalid(msg: impl Into<String>) -> FormatError {
    FormatError::Invalid(msg.into())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a file, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let io = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

fn header<'a>(bytes: &'a [u8], magic: &'static str) -> Result<(u32, &'a [u8]), FormatError> {
    if bytes.len() < 8 {
        return Err(FormatError::Length);
    }
    if &bytes[..4] != magic.as_bytes() {
        return Err(FormatError::BadMagic(magic));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    Ok((n, &bytes[8..]))
}

fn pack_bits(bits: impl Iterator<Item = bool>, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len.div_ceil(8)];
    for (i, b) in bits.enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

pub fn encode_vxc(cell: &VoxelCell) -> Vec<u8> {
    let mut out = b"VXC1".to_vec();
    out.extend_from_slice(&(cell.n as u32).to_le_bytes());
    out.extend(pack_bits(cell.solid.iter().copied(), cell.solid.len()));
    out
}

/// Decodes a voxel cell; its density is recomputed from the bits.
pub fn decode_vxc(bytes: &[u8]) -> Result<VoxelCell, FormatError> {
    let (n, body) = header(bytes, "VXC1")?;
    let n = n as usize;
    let len = n.checked_pow(3).ok_or_else(|| invalid("voxel resolution overflows"))?;
    if n == 0 || body.len() != len.div_ceil(8) {
        return Err(FormatError::Length);
    }
    let solid = (0..len).map(|i| body[i / 8] & (1 << (i % 8)) != 0).collect();
    Ok(VoxelCell::from_solid(n, solid))
}

pub fn encode_pc3d(cloud: &PointCloud) -> Vec<u8> {
    let mut out = b"PC3D".to_vec();
    out.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    for p in &cloud.points {
        for c in p {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_pc3d(bytes: &[u8]) -> Result<PointCloud, FormatError> {
    let (count, body) = header(bytes, "PC3D")?;
    if body.len() != count as usize * 12 {
        return Err(FormatError::Length);
    }
    let points = body
        .chunks_exact(12)
        .map(|c| {
            let f = |k: usize| f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap()) as f64;
            [f(0), f(1), f(2)]
        })
        .collect::<Vec<_>>();
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("point cloud has non-finite coordinates"));
    }
    Ok(PointCloud::new(points))
}

pub fn encode_kmat(m: &SquareMatrix, kind: KernelKind) -> Vec<u8> {
    let mut out = b"KMAT".to_vec();
    out.extend_from_slice(&(m.n as u32).to_le_bytes());
    out.push(kind.code());
    for v in &m.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a matrix and checks that it is finite and symmetric to 1e-12.
pub fn decode_kmat(bytes: &[u8]) -> Result<(SquareMatrix, KernelKind), FormatError> {
    let (n, body) = header(bytes, "KMAT")?;
    let n = n as usize;
    let kind = body
        .first()
        .and_then(|&k| KernelKind::from_code(k))
        .ok_or_else(|| invalid("unknown matrix kind byte"))?;
    let body = &body[1..];
    if body.len() != n * n * 8 {
        return Err(FormatError::Length);
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let m = SquareMatrix { n, values };
    m.check_symmetric(1e-12)
        .map_err(|e| invalid(format!("matrix is not a symmetric finite matrix: {e}")))?;
    Ok((m, kind))
}

/// CSV mirror of a matrix: one row per line, shortest round-trip decimals.
pub fn matrix_csv(m: &SquareMatrix) -> String {
    let mut s = String::new();
    for i in 0..m.n {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn read_kmat(path: &Path) -> Result<(SquareMatrix, KernelKind), FormatError> {
    decode_kmat(&read_file(path)?)
}

pub fn write_kmat(path: &Path, m: &SquareMatrix, kind: KernelKind) -> Result<(), FormatError> {
    write_file(path, &encode_kmat(m, kind))
}

pub fn encode_pbm_ascii(cell: &UnitCell2D) -> String {
    let mut s = format!("P1\n{} {}\n", cell.width, cell.height);
    for y in 0..cell.height {
        let row: Vec<&str> = cell.row(y).map(|b| if b { "1" } else { "0" }).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn encode_pbm_binary(cell: &UnitCell2D) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", cell.width, cell.height).into_bytes();
    for y in 0..cell.height {
        let mut row = vec![0u8; cell.width.div_ceil(8)];
        for (x, b) in cell.row(y).enumerate() {
            if b {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend(row);
    }
    out
}

/// Parses `P1` or `P4` PBM data (`#` comments allowed in the header).
pub fn decode_pbm(bytes: &[u8]) -> Result<UnitCell2D, FormatError> {
    let mut pos = 0;
    let mut token = || -> Result<String, FormatError> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(FormatError::Length),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| !c.is_ascii_whitespace() && *c != b'#') {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let dim = |t: String| t.parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| invalid("bad PBM size"));
    let w = dim(token()?)?;
    let h = dim(token()?)?;
    let mut solid = Vec::with_capacity(w * h);
    match magic.as_str() {
        "P1" => {
            let rest = &bytes[pos..];
            let mut in_comment = false;
            for &c in rest {
                match c {
                    b'#' => in_comment = true,
                    b'\n' => in_comment = false,
                    b'0' | b'1' if !in_comment => solid.push(c == b'1'),
                    c if in_comment || c.is_ascii_whitespace() => {}
                    _ => return Err(invalid("unexpected byte in P1 raster")),
                }
            }
        }
        "P4" => {
            // exactly one whitespace byte separates the header from the raster
            let start = pos + 1;
            let stride = w.div_ceil(8);
            let raster = bytes.get(start..).ok_or(FormatError::Length)?;
            if raster.len() != stride * h {
                return Err(FormatError::Length);
            }
            for y in 0..h {
                for x in 0..w {
                    solid.push(raster[y * stride + x / 8] & (0x80 >> (x % 8)) != 0);
                }
            }
        }
        _ => return Err(FormatError::BadMagic("P1 or P4")),
    }
    if solid.len() != w * h {
        return Err(FormatError::Length);
    }
    Ok(UnitCell2D::new(w, h, solid))
}

/// One dataset member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub family_id: String,
    /// Solid fraction (voxel density or pixel volume fraction).
    pub density: f64,
    /// `.vxc` for 3D cells, `.pbm` for 2D cells; relative to the manifest.
    pub cell_path: String,
    #[serde(default)]
    pub cloud_path: Option<String>,
    #[serde(default)]
    pub properties: Option<Vec<f64>>,
    #[serde(default)]
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative paths resolve against.
    pub root: PathBuf,
}

/// A manifest cell loaded from disk.
#[derive(Debug, Clone)]
pub enum LoadedCell {
    Voxel(VoxelCell),
    Pixel(UnitCell2D),
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let entries: Vec<ManifestEntry> = serde_json::from_slice(&read_file(path)?)?;
        let mut ids = std::collections::HashSet::new();
        for e in &entries {
            if !ids.insert(e.id.as_str()) {
                return Err(invalid(format!("duplicate manifest id {:?}", e.id)));
            }
        }
        Ok(Self {
            entries,
            root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn to_json(entries: &[ManifestEntry]) -> Result<String, FormatError> {
        Ok(serde_json::to_string_pretty(entries)? + "\n")
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Loads a cell and verifies its recomputed density against the entry.
    pub fn load_cell(&self, e: &ManifestEntry) -> Result<LoadedCell, FormatError> {
        let bytes = read_file(&self.resolve(&e.cell_path))?;
        let (cell, density) = if bytes.starts_with(b"VXC1") {
            let c = decode_vxc(&bytes)?;
            let d = c.density;
            (LoadedCell::Voxel(c), d)
        } else {
            let c = decode_pbm(&bytes)?;
            let d = c.volume_fraction();
            (LoadedCell::Pixel(c), d)
        };
        if (density - e.density).abs() > 1e-9 {
            return Err(invalid(format!(
                "{}: recomputed density {density} does not match manifest density {}",
                e.id, e.density
            )));
        }
        Ok(cell)
    }

    pub fn load_cloud(&self, e: &ManifestEntry) -> Result<PointCloud, FormatError> {
        let rel = e
            .cloud_path
            .as_deref()
            .ok_or_else(|| invalid(format!("{}: no cloud_path", e.id)))?;
        decode_pc3d(&read_file(&self.resolve(rel))?)
    }
}

pub fn embeddings_csv(rows: &[(String, Vec<f64>)]) -> String {
    let mut s = String::new();
    for (id, v) in rows {
        s.push_str(id);
        for x in v {
            let _ = write!(s, ",{x:?}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_embeddings_csv(text: &str) -> Result<Vec<(String, Vec<f64>)>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let id = parts.next().unwrap_or("").trim().to_string();
        let v = parts
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid(format!("embeddings line {}: {e}", i + 1)))?;
        if let Some((_, first)) = out.first() {
            let first: &Vec<f64> = first;
            if first.len() != v.len() {
                return Err(invalid(format!("embeddings line {} has {} values, expected {}", i + 1, v.len(), first.len())));
            }
        }
        out.push((id, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vxc_round_trip() {
        let solid: Vec<bool> = (0..27).map(|i| i % 3 == 0 || i == 26).collect();
        let cell = VoxelCell::from_solid(3, solid.clone());
        let bytes = encode_vxc(&cell);
        assert_eq!(&bytes[..4], b"VXC1");
        assert_eq!(bytes.len(), 8 + 4);
        let back = decode_vxc(&bytes).unwrap();
        assert_eq!(back.solid, solid);
        assert_eq!(back.density, cell.density);
        assert!(matches!(decode_vxc(b"VXC2\x03\0\0\0"), Err(FormatError::BadMagic(_))));
        assert!(matches!(decode_vxc(&bytes[..10]), Err(FormatError::Length)));
    }

    #[test]
    fn pc3d_round_trip() {
        let cloud = PointCloud::new(vec![[0.25, 0.5, 0.75], [0.0, 1.0, 0.125]]);
        let back = decode_pc3d(&encode_pc3d(&cloud)).unwrap();
        assert_eq!(back, cloud);
    }

    #[test]
    fn kmat_round_trip_and_symmetry_check() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 0.1], vec![0.1, 1.0]]);
        let (back, kind) = decode_kmat(&encode_kmat(&m, KernelKind::Joint)).unwrap();
        assert_eq!(back, m);
        assert_eq!(kind, KernelKind::Joint);
        let bad = SquareMatrix::from_rows(&[vec![1.0, 0.1], vec![0.2, 1.0]]);
        assert!(decode_kmat(&encode_kmat(&bad, KernelKind::Shape)).is_err());
        assert_eq!(matrix_csv(&m), "1.0,0.1\n0.1,1.0\n");
    }

    #[test]
    fn pbm_round_trips() {
        let cell = UnitCell2D::from_fn(11, 3, |x, y| (x + y) % 3 == 0);
        assert_eq!(decode_pbm(encode_pbm_ascii(&cell).as_bytes()).unwrap(), cell);
        assert_eq!(decode_pbm(&encode_pbm_binary(&cell)).unwrap(), cell);
        let commented = b"P1\n# a comment\n2 2\n1 0\n0 1\n";
        let c = decode_pbm(commented).unwrap();
        assert_eq!(c.solid, vec![true, false, false, true]);
        assert!(decode_pbm(b"P1\n2 2\n1 0 1\n").is_err());
    }

    #[test]
    fn manifest_checks_density() {
        let dir = tempfile::tempdir().unwrap();
        let cell = UnitCell2D::from_fn(4, 4, |x, _| x < 3);
        write_file(&dir.path().join("cells/a.pbm"), encode_pbm_ascii(&cell).as_bytes()).unwrap();
        let mut e = ManifestEntry {
            id: "a".into(),
            family_id: "f".into(),
            density: 0.75,
            cell_path: "cells/a.pbm".into(),
            cloud_path: None,
            properties: None,
            embedding: None,
        };
        let path = dir.path().join("manifest.json");
        write_file(&path, Manifest::to_json(&[e.clone()]).unwrap().as_bytes()).unwrap();
        let m = Manifest::read(&path).unwrap();
        assert!(matches!(m.load_cell(&m.entries[0]).unwrap(), LoadedCell::Pixel(_)));
        e.density = 0.5;
        assert!(m.load_cell(&e).is_err());
    }

    #[test]
    fn embeddings_round_trip() {
        let rows = vec![("a".to_string(), vec![0.5, -1.0]), ("b".to_string(), vec![0.1, 2.0])];
        assert_eq!(parse_embeddings_csv(&embeddings_csv(&rows)).unwrap(), rows);
        assert!(parse_embeddings_csv("a,1,2\nb,1\n").is_err());
    }
}
