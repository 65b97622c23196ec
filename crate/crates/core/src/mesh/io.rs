//! Mesh serialization: binary STL, Wavefront OBJ and the compact wire
//! format streamed to viewers.
//!
//! Wire layout, little-endian:
//!
//! | offset | type          | content            |
//! |--------|---------------|--------------------|
//! | 0      | `[u8; 4]`     | `b"VXLM"`          |
//! | 4      | `u32`         | version (1)        |
//! | 8      | `u32`         | vertex count `V`   |
//! | 12     | `u32`         | triangle count `T` |
//! | 16     | `f32 × 3V`    | positions (mm)     |
//! | …      | `u32 × 3T`    | indices            |

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use super::{face_normal_raw, norm, TriangleMesh};

pub const WIRE_MAGIC: &[u8; 4] = b"VXLM";
pub const WIRE_VERSION: u32 = 1;
const STL_HEADER: &[u8] = b"voxelink binary stl, units mm";

/// Binary STL: 80-byte header, `u32` count, then 50 bytes per triangle.
pub fn write_stl<W: Write>(mesh: &TriangleMesh, mut w: W) -> io::Result<()> {
    let mut header = [0u8; 80];
    header[..STL_HEADER.len()].copy_from_slice(STL_HEADER);
    w.write_all(&header)?;
    w.write_all(&(mesh.triangle_count() as u32).to_le_bytes())?;
    for t in 0..mesh.triangle_count() {
        let pts = mesh.triangle_points(t);
        let n = face_normal_raw(pts);
        let len = norm(n);
        let unit = if len > 0.0 { n.map(|c| c / len) } else { [0.0; 3] };
        for v in std::iter::once(unit).chain(pts) {
            for c in v {
                w.write_all(&(c as f32).to_le_bytes())?;
            }
        }
        w.write_all(&0u16.to_le_bytes())?;
    }
    Ok(())
}

pub fn stl_bytes(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangle_count());
    write_stl(mesh, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn write_stl_file(mesh: &TriangleMesh, path: &Path) -> io::Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    write_stl(mesh, &mut f)?;
    f.flush()
}

/// Wavefront OBJ text with 1-based indices; normals included when present.
pub fn obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    if let Some(ns) = mesh.normals() {
        for n in ns {
            let _ = writeln!(s, "vn {} {} {}", n[0], n[1], n[2]);
        }
        for t in mesh.triangles() {
            let [a, b, c] = t.map(|i| i + 1);
            let _ = writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}");
        }
    } else {
        for t in mesh.triangles() {
            let [a, b, c] = t.map(|i| i + 1);
            let _ = writeln!(s, "f {a} {b} {c}");
        }
    }
    s
}

pub fn write_obj_file(mesh: &TriangleMesh, path: &Path) -> io::Result<()> {
    std::fs::write(path, obj_string(mesh))
}

pub fn wire_bytes(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 12 * mesh.vertex_count() + 12 * mesh.triangle_count());
    out.extend_from_slice(WIRE_MAGIC);
    out.extend_from_slice(&WIRE_VERSION.to_le_bytes());
    out.extend_from_slice(&(mesh.vertex_count() as u32).to_le_bytes());
    out.extend_from_slice(&(mesh.triangle_count() as u32).to_le_bytes());
    for v in mesh.vertices() {
        for c in v {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for t in mesh.triangles() {
        for i in t {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WireError {
    #[error("buffer too short")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("invalid triangle {0}")]
    BadTriangle(usize),
}

/// Parses a wire buffer back into a mesh (positions widened from `f32`).
pub fn parse_wire(buf: &[u8]) -> Result<TriangleMesh, WireError> {
    let u32_at = |o: usize| -> Result<u32, WireError> {
        buf.get(o..o + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or(WireError::Truncated)
    };
    if buf.len() < 16 {
        return Err(WireError::Truncated);
    }
    if &buf[..4] != WIRE_MAGIC {
        return Err(WireError::BadMagic);
    }
    let version = u32_at(4)?;
    if version != WIRE_VERSION {
        return Err(WireError::Version(version));
    }
    let (nv, nt) = (u32_at(8)? as usize, u32_at(12)? as usize);
    if buf.len() != 16 + 12 * nv + 12 * nt {
        return Err(WireError::Truncated);
    }
    let f = |o: usize| f32::from_le_bytes(buf[o..o + 4].try_into().unwrap()) as f64;
    let vertices = (0..nv)
        .map(|i| {
            let o = 16 + 12 * i;
            [f(o), f(o + 4), f(o + 8)]
        })
        .collect();
    let base = 16 + 12 * nv;
    let mut triangles = Vec::with_capacity(nt);
    for t in 0..nt {
        let tri = [0, 1, 2].map(|k| u32_at(base + 12 * t + 4 * k).unwrap());
        if tri.iter().any(|&i| i as usize >= nv) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(WireError::BadTriangle(t));
        }
        triangles.push(tri);
    }
    Ok(TriangleMesh::new(vertices, triangles))
}
