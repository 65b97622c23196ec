use std::collections::HashMap;

use super::TriangleMesh;

/// Merges vertices that fall into the same cell of an `epsilon` lattice
/// (exact coordinate equality when `epsilon` is 0). The first vertex of each
/// cell is kept, triangles are reindexed, and triangles that collapse onto a
/// repeated index are dropped.
pub fn dedupe_vertices(mesh: &TriangleMesh, epsilon: f64) -> TriangleMesh {
    assert!(epsilon >= 0.0, "epsilon must be non-negative");
    let key = |p: &[f64; 3]| -> [i64; 3] {
        if epsilon > 0.0 {
            p.map(|c| (c / epsilon).round() as i64)
        } else {
            // +0.0 and -0.0 are the same point
            p.map(|c| if c == 0.0 { 0 } else { c.to_bits() as i64 })
        }
    };
    let mut slot: HashMap<[i64; 3], u32> = HashMap::with_capacity(mesh.vertex_count());
    let mut remap = Vec::with_capacity(mesh.vertex_count());
    let mut vertices = Vec::new();
    let mut normals = mesh.normals().map(|_| Vec::new());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let id = *slot.entry(key(p)).or_insert_with(|| {
            vertices.push(*p);
            if let (Some(out), Some(src)) = (normals.as_mut(), mesh.normals()) {
                out.push(src[i]);
            }
            (vertices.len() - 1) as u32
        });
        remap.push(id);
    }
    let triangles = mesh
        .triangles()
        .iter()
        .map(|t| t.map(|i| remap[i as usize]))
        .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
        .collect();
    let mut out = TriangleMesh::new(vertices, triangles);
    out.set_normals(normals);
    out
}
