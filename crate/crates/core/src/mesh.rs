//! Uniform right-triangle meshes of rectangular domains.
//!
//! The lattice has spacing `2^-level` so that the cell diagonal is
//! `sqrt(2) * 2^-level`. Nodes are ordered row-major from the origin with x
//! running fastest; every lattice square is split along its lower-left to
//! upper-right diagonal. Boundary edges carry a tag selecting the boundary
//! condition of the Helmholtz model: reflecting (Neumann) or absorbing
//! (impedance) walls.

use crate::error::{Error, Result};

/// Boundary condition tag for a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    /// Sound-hard reflecting wall (homogeneous Neumann).
    Neumann,
    /// Absorbing wall (impedance condition).
    Absorbing,
}

/// Per-side boundary tags, in the order left, right, bottom, top.
#[derive(Debug, Clone, Copy)]
pub struct SideTags {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl Default for SideTags {
    /// Reflecting walls left and top, absorbing walls bottom and right.
    fn default() -> Self {
        SideTags {
            left: BoundaryTag::Neumann,
            right: BoundaryTag::Absorbing,
            bottom: BoundaryTag::Absorbing,
            top: BoundaryTag::Neumann,
        }
    }
}

/// Uniform triangulation of `[0, extent_x] x [0, extent_y]`.
#[derive(Debug, Clone)]
pub struct MeshGrid {
    pub extent: [f64; 2],
    pub level: u32,
    pub cell_side: f64,
    /// Lattice cells per side.
    pub nx: usize,
    pub ny: usize,
    /// Node coordinates in row-major order, x fastest.
    pub nodes: Vec<[f64; 2]>,
    /// Node-id triples, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges as (node pair, tag); each edge appears exactly once.
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
}

/// Builds the default mesh (reflecting left/top, absorbing bottom/right).
pub fn build_mesh(extent: [f64; 2], level: u32) -> Result<MeshGrid> {
    build_mesh_with_tags(extent, level, SideTags::default())
}

/// Builds a mesh with explicit per-side boundary tags.
pub fn build_mesh_with_tags(extent: [f64; 2], level: u32, tags: SideTags) -> Result<MeshGrid> {
    if level > 12 {
        return Err(Error::invalid(format!("grid level {level} exceeds 12")));
    }
    let h = 0.5f64.powi(level as i32);
    let mut cells = [0usize; 2];
    for (d, &e) in extent.iter().enumerate() {
        if !(e > 0.0) {
            return Err(Error::invalid("extent components must be positive"));
        }
        let n = e / h;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::invalid(format!(
                "extent {e} is not an integer number of cells of side {h}"
            )));
        }
        cells[d] = n.round() as usize;
    }
    let (nx, ny) = (cells[0], cells[1]);

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([i as f64 * h, j as f64 * h]);
        }
    }

    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }

    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(([id(i, 0), id(i + 1, 0)], tags.bottom));
        boundary_edges.push(([id(i, ny), id(i + 1, ny)], tags.top));
    }
    for j in 0..ny {
        boundary_edges.push(([id(0, j), id(0, j + 1)], tags.left));
        boundary_edges.push(([id(nx, j), id(nx, j + 1)], tags.right));
    }

    Ok(MeshGrid {
        extent,
        level,
        cell_side: h,
        nx,
        ny,
        nodes,
        triangles,
        boundary_edges,
    })
}

impl MeshGrid {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_coord(&self, id: usize) -> [f64; 2] {
        self.nodes[id]
    }

    fn node_index(&self, id: usize) -> (usize, usize) {
        (id % (self.nx + 1), id / (self.nx + 1))
    }

    fn node_id(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// True if the mesh has at least one absorbing boundary edge.
    pub fn has_absorbing_edge(&self) -> bool {
        self.boundary_edges
            .iter()
            .any(|&(_, t)| t == BoundaryTag::Absorbing)
    }

    /// Lattice neighbours of a node (sharing a triangle): the four axis
    /// neighbours plus the two diagonal neighbours along the split direction.
    pub fn neighbors(&self, id: usize) -> Vec<usize> {
        let (i, j) = self.node_index(id);
        let mut out = Vec::with_capacity(6);
        let (nx, ny) = (self.nx, self.ny);
        if i > 0 {
            out.push(self.node_id(i - 1, j));
        }
        if i < nx {
            out.push(self.node_id(i + 1, j));
        }
        if j > 0 {
            out.push(self.node_id(i, j - 1));
        }
        if j < ny {
            out.push(self.node_id(i, j + 1));
        }
        if i < nx && j < ny {
            out.push(self.node_id(i + 1, j + 1));
        }
        if i > 0 && j > 0 {
            out.push(self.node_id(i - 1, j - 1));
        }
        out
    }
}

/// Nearest lattice node to a point, with a flag recording whether the point
/// had to be snapped. Ties are broken toward the smaller node-id.
pub fn locate_node(mesh: &MeshGrid, point: [f64; 2]) -> Result<(usize, bool)> {
    let h = mesh.cell_side;
    let tol = 1e-9 * h;
    if point[0] < -tol
        || point[1] < -tol
        || point[0] > mesh.extent[0] + tol
        || point[1] > mesh.extent[1] + tol
    {
        return Err(Error::invalid(format!(
            "point ({}, {}) lies outside the domain",
            point[0], point[1]
        )));
    }
    let mut idx = [0usize; 2];
    let caps = [mesh.nx, mesh.ny];
    let mut snapped = false;
    for d in 0..2 {
        // Round half-down so coordinate ties resolve to the smaller index.
        let i = (point[d] / h - 0.5).ceil().max(0.0) as usize;
        let i = i.min(caps[d]);
        if (point[d] - i as f64 * h).abs() > 1e-12 * h {
            snapped = true;
        }
        idx[d] = i;
    }
    Ok((mesh.node_id(idx[0], idx[1]), snapped))
}

/// All node-ids inside the closed rectangle `region = [[x0, y0], [x1, y1]]`,
/// minus the exclusions, in ascending order.
pub fn control_node_set(
    mesh: &MeshGrid,
    region: [[f64; 2]; 2],
    exclusions: &[usize],
) -> Result<Vec<usize>> {
    let [lo, hi] = region;
    let tol = 1e-12 * mesh.cell_side;
    if lo[0] < -tol || lo[1] < -tol || hi[0] > mesh.extent[0] + tol || hi[1] > mesh.extent[1] + tol
    {
        return Err(Error::invalid("control region extends beyond the domain"));
    }
    let excluded: std::collections::HashSet<usize> = exclusions.iter().copied().collect();
    let mut out = Vec::new();
    for (id, p) in mesh.nodes.iter().enumerate() {
        if p[0] >= lo[0] - tol
            && p[0] <= hi[0] + tol
            && p[1] >= lo[1] - tol
            && p[1] <= hi[1] + tol
            && !excluded.contains(&id)
        {
            out.push(id);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("control region contains no mesh nodes"));
    }
    Ok(out)
}

/// Breadth-first hop count between two nodes in the mesh connectivity graph,
/// truncated at `cap`. Returns `None` when the distance exceeds `cap`.
pub fn hop_distance(mesh: &MeshGrid, a: usize, b: usize, cap: usize) -> Result<Option<usize>> {
    let n = mesh.num_nodes();
    if a >= n || b >= n {
        return Err(Error::invalid("node id out of range"));
    }
    if a == b {
        return Ok(Some(0));
    }
    let mut dist = vec![usize::MAX; n];
    dist[a] = 0;
    let mut frontier = vec![a];
    for d in 1..=cap {
        let mut next = Vec::new();
        for &v in &frontier {
            for w in mesh.neighbors(v) {
                if dist[w] == usize::MAX {
                    if w == b {
                        return Ok(Some(d));
                    }
                    dist[w] = d;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_level_zero() {
        let m = build_mesh([1.0, 1.0], 0).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.triangles.len(), 2);
    }

    #[test]
    fn node_and_triangle_counts() {
        let m = build_mesh([4.0, 4.0], 3).unwrap();
        assert_eq!(m.num_nodes(), 33 * 33);
        assert_eq!(m.triangles.len(), 2048);
        let m = build_mesh([4.0, 4.0], 6).unwrap();
        assert_eq!(m.nx + 1, 257);
        assert_eq!(m.num_nodes(), 66049);
    }

    #[test]
    fn non_conforming_extent_rejected() {
        assert!(build_mesh([1.3, 1.0], 1).is_err());
    }

    #[test]
    fn triangle_areas_sum_to_domain_area() {
        let m = build_mesh([4.0, 2.0], 3).unwrap();
        let mut total = 0.0;
        for t in &m.triangles {
            let [a, b, c] = [m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]];
            total += 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
        }
        assert!((total - 8.0).abs() < 1e-12 * 8.0);
    }

    #[test]
    fn boundary_edges_cover_boundary_once() {
        let m = build_mesh([4.0, 4.0], 2).unwrap();
        assert_eq!(m.boundary_edges.len(), 2 * (m.nx + m.ny));
        let mut seen = std::collections::HashSet::new();
        for (e, _) in &m.boundary_edges {
            let key = (e[0].min(e[1]), e[0].max(e[1]));
            assert!(seen.insert(key), "duplicate boundary edge");
        }
        // Boundary nodes on edges, interior nodes on none.
        let mut on_edge = vec![false; m.num_nodes()];
        for (e, _) in &m.boundary_edges {
            on_edge[e[0]] = true;
            on_edge[e[1]] = true;
        }
        for (id, p) in m.nodes.iter().enumerate() {
            let boundary = p[0] == 0.0 || p[1] == 0.0 || p[0] == 4.0 || p[1] == 4.0;
            assert_eq!(on_edge[id], boundary);
        }
    }

    #[test]
    fn default_tags_match_room_layout() {
        let m = build_mesh([4.0, 4.0], 2).unwrap();
        for (e, tag) in &m.boundary_edges {
            let mid = [
                0.5 * (m.nodes[e[0]][0] + m.nodes[e[1]][0]),
                0.5 * (m.nodes[e[0]][1] + m.nodes[e[1]][1]),
            ];
            let expect = if mid[0] == 0.0 || mid[1] == 4.0 {
                BoundaryTag::Neumann
            } else {
                BoundaryTag::Absorbing
            };
            assert_eq!(*tag, expect, "edge at {mid:?}");
        }
    }

    #[test]
    fn locate_exact_and_snapped() {
        let m = build_mesh([4.0, 4.0], 2).unwrap();
        let (id, snapped) = locate_node(&m, [3.75, 1.0]).unwrap();
        assert!(!snapped);
        assert_eq!(m.node_coord(id), [3.75, 1.0]);
        let (id, snapped) = locate_node(&m, [0.30, 0.30]).unwrap();
        assert!(snapped);
        assert_eq!(m.node_coord(id), [0.25, 0.25]);
        assert!(locate_node(&m, [-0.1, 0.5]).is_err());
    }

    #[test]
    fn locate_tie_breaks_to_smaller_id() {
        let m = build_mesh([4.0, 4.0], 2).unwrap();
        let (id, snapped) = locate_node(&m, [0.125, 0.125]).unwrap();
        assert!(snapped);
        assert_eq!(m.node_coord(id), [0.0, 0.0]);
    }

    #[test]
    fn control_nodes_full_and_restricted() {
        let m = build_mesh([4.0, 4.0], 2).unwrap();
        let all = control_node_set(&m, [[0.0, 0.0], [4.0, 4.0]], &[]).unwrap();
        assert_eq!(all.len(), m.num_nodes());
        let sub = control_node_set(&m, [[0.0, 0.0], [3.0, 4.0]], &[]).unwrap();
        assert_eq!(sub.len(), 13 * 17);
        let (mic, _) = locate_node(&m, [2.0, 2.0]).unwrap();
        let excl = control_node_set(&m, [[0.0, 0.0], [3.0, 4.0]], &[mic]).unwrap();
        assert_eq!(excl.len(), 13 * 17 - 1);
        assert!(!excl.contains(&mic));
    }

    #[test]
    fn hop_distance_examples() {
        let m = build_mesh([4.0, 4.0], 2).unwrap();
        let a = locate_node(&m, [1.0, 1.0]).unwrap().0;
        assert_eq!(hop_distance(&m, a, a, 5).unwrap(), Some(0));
        let right = locate_node(&m, [1.25, 1.0]).unwrap().0;
        assert_eq!(hop_distance(&m, a, right, 5).unwrap(), Some(1));
        let diag = locate_node(&m, [1.25, 1.25]).unwrap().0;
        assert_eq!(hop_distance(&m, a, diag, 5).unwrap(), Some(1));
        let anti = locate_node(&m, [0.75, 1.25]).unwrap().0;
        assert_eq!(hop_distance(&m, a, anti, 5).unwrap(), Some(2));
        let two = locate_node(&m, [1.5, 1.0]).unwrap().0;
        assert_eq!(hop_distance(&m, a, two, 5).unwrap(), Some(2));
        let far = locate_node(&m, [4.0, 4.0]).unwrap().0;
        assert_eq!(hop_distance(&m, a, far, 3).unwrap(), None);
    }

    /// Oracle: plain breadth-first search on an explicitly assembled
    /// triangle-sharing adjacency list.
    fn bfs_oracle(m: &MeshGrid, a: usize, b: usize) -> usize {
        let mut adj = vec![std::collections::HashSet::new(); m.num_nodes()];
        for t in &m.triangles {
            for &p in t {
                for &q in t {
                    if p != q {
                        adj[p].insert(q);
                    }
                }
            }
        }
        let mut dist = vec![usize::MAX; m.num_nodes()];
        dist[a] = 0;
        let mut queue = std::collections::VecDeque::from([a]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist[b]
    }

    #[test]
    fn hop_distance_matches_bfs_oracle() {
        let m = build_mesh([2.0, 1.0], 2).unwrap();
        let samples = [(0usize, 7usize), (3, 40), (12, 29), (0, 44), (20, 21)];
        for (a, b) in samples {
            let want = bfs_oracle(&m, a, b);
            assert_eq!(hop_distance(&m, a, b, 50).unwrap(), Some(want));
        }
        // Symmetry and triangle inequality on sampled triples.
        for (a, b, c) in [(0usize, 17usize, 33usize), (5, 25, 41), (8, 14, 39)] {
            let d = |x, y| hop_distance(&m, x, y, 50).unwrap().unwrap();
            assert_eq!(d(a, b), d(b, a));
            assert!(d(a, c) <= d(a, b) + d(b, c));
        }
    }
}
