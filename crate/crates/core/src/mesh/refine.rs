use std::collections::HashMap;

use super::{edge_key, midpoint, norm, sub, ElementType, Mesh, TagMap};
use crate::{Error, Point, Result};

impl Mesh {
    /// Splits every quad into 4 congruent quads and every triangle into 4
    /// similar triangles. Boundary tags are inherited by the edge halves.
    pub fn uniform_refine(&self) -> Mesh {
        let nv0 = self.num_vertices();
        let ne = self.num_edges();
        let mut vertices = self.vertices.clone();
        vertices.reserve(ne + self.num_cells());
        for &[a, b] in &self.edges {
            vertices.push(midpoint(self.vertices[a], self.vertices[b]));
        }
        let mut tags = TagMap::new();
        for (id, &[a, b]) in self.edges.iter().enumerate() {
            if let Some(t) = self.boundary_tags[id] {
                let m = nv0 + id;
                tags.insert(edge_key(a, m), t);
                tags.insert(edge_key(m, b), t);
            }
        }
        let mut cells = Vec::with_capacity(self.cells.len() * 4);
        let mut parent = Vec::with_capacity(self.num_cells() * 4);
        let mut generation = Vec::with_capacity(self.num_cells() * 4);
        for c in 0..self.num_cells() {
            let v = self.cell(c);
            let e = self.cell_edges(c);
            let mid = |k: usize| nv0 + e[k];
            match self.element_type {
                ElementType::Quadrilateral => {
                    let ctr = vertices.len();
                    let p = self.cell_points(c);
                    vertices.push([
                        0.25 * (p[0][0] + p[1][0] + p[2][0] + p[3][0]),
                        0.25 * (p[0][1] + p[1][1] + p[2][1] + p[3][1]),
                    ]);
                    let (m01, m12, m23, m30) = (mid(0), mid(1), mid(2), mid(3));
                    cells.extend_from_slice(&[v[0], m01, ctr, m30]);
                    cells.extend_from_slice(&[m01, v[1], m12, ctr]);
                    cells.extend_from_slice(&[ctr, m12, v[2], m23]);
                    cells.extend_from_slice(&[m30, ctr, m23, v[3]]);
                }
                ElementType::Triangle => {
                    let (m01, m12, m20) = (mid(0), mid(1), mid(2));
                    for child in [[v[0], m01, m20], [m01, v[1], m12], [m20, m12, v[2]], [m01, m12, m20]] {
                        cells.extend_from_slice(&longest_edge_first(&vertices, child));
                    }
                }
            }
            parent.extend_from_slice(&[c; 4]);
            let g = self.generation[c] + 1;
            generation.extend_from_slice(&[g; 4]);
        }
        let mut mesh = Mesh::assemble(
            self.element_type,
            vertices,
            cells,
            |_, key| tags.get(&key).copied(),
            parent,
            generation,
        )
        .expect("uniform refinement of a valid mesh is valid");
        mesh.set_metadata_from(self);
        mesh
    }

    /// Newest-vertex bisection of the marked triangles followed by closure
    /// bisections until no hanging node remains.
    pub fn bisect_marked(&self, marked: &[usize]) -> Result<Mesh> {
        if self.element_type != ElementType::Triangle {
            return Err(Error::Unsupported("local refinement is available for triangle meshes only".into()));
        }
        if marked.is_empty() {
            return Err(Error::InvalidArgument("no cells marked for bisection".into()));
        }
        if let Some(&bad) = marked.iter().find(|&&c| c >= self.num_cells()) {
            return Err(Error::InvalidArgument(format!("marked cell {bad} out of range")));
        }
        let mut vertices = self.vertices.clone();
        let mut tags = self.tag_map();
        // (cell vertices, ancestor in self, generation)
        let mut work: Vec<([usize; 3], usize, u32)> =
            (0..self.num_cells()).map(|c| {
                let v = self.cell(c);
                ([v[0], v[1], v[2]], c, self.generation[c])
            }).collect();
        let mut flag = vec![false; work.len()];
        for &c in marked {
            flag[c] = true;
        }
        let mut split: HashMap<[usize; 2], usize> = HashMap::new();
        // Each pass bisects at least one cell; the cap only guards against a
        // corrupted labeling.
        let max_passes = 64 + 4 * self.num_cells();
        for _pass in 0..max_passes {
            let mut next = Vec::with_capacity(work.len() + 2 * flag.iter().filter(|&&f| f).count());
            for (i, &(v, anc, g)) in work.iter().enumerate() {
                if !flag[i] {
                    next.push((v, anc, g));
                    continue;
                }
                let key = edge_key(v[1], v[2]);
                let m = *split.entry(key).or_insert_with(|| {
                    vertices.push(midpoint(vertices[v[1]], vertices[v[2]]));
                    vertices.len() - 1
                });
                if let Some(t) = tags.get(&key).copied() {
                    tags.insert(edge_key(v[1], m), t);
                    tags.insert(edge_key(m, v[2]), t);
                }
                next.push(([m, v[0], v[1]], anc, g + 1));
                next.push(([m, v[2], v[0]], anc, g + 1));
            }
            work = next;
            flag = work
                .iter()
                .map(|(v, _, _)| (0..3).any(|e| split.contains_key(&edge_key(v[e], v[(e + 1) % 3]))))
                .collect();
            if !flag.iter().any(|&f| f) {
                let cells = work.iter().flat_map(|(v, _, _)| v.iter().copied()).collect();
                let parent = work.iter().map(|w| w.1).collect();
                let generation = work.iter().map(|w| w.2).collect();
                let mut mesh = Mesh::assemble(
                    ElementType::Triangle,
                    vertices,
                    cells,
                    |_, key| tags.get(&key).copied(),
                    parent,
                    generation,
                )?;
                mesh.set_metadata_from(self);
                return Ok(mesh);
            }
        }
        Err(Error::InvalidMesh("bisection closure did not terminate".into()))
    }
}

/// Rotates a counter-clockwise triangle so the vertex opposite its longest
/// edge comes first (ties go to the earliest edge).
fn longest_edge_first(vertices: &[Point], t: [usize; 3]) -> [usize; 3] {
    let len = |a: usize, b: usize| norm(sub(vertices[a], vertices[b]));
    let opp = [len(t[1], t[2]), len(t[2], t[0]), len(t[0], t[1])];
    let mut best = 0;
    for k in 1..3 {
        if opp[k] > opp[best] * (1.0 + 1e-12) {
            best = k;
        }
    }
    [t[best], t[(best + 1) % 3], t[(best + 2) % 3]]
}
