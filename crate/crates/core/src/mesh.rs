//! Structured triangulations of axis-aligned rectangles with lumped
//! quadrature weights on Ω and on ∂Ω.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("subdivision counts must be positive, got nx = {nx}, ny = {ny}")]
    Subdivision { nx: usize, ny: usize },
    #[error("degenerate rectangle {rect:?}")]
    DegenerateRect { rect: [f64; 4] },
    #[error("triangle index {index} out of range ({count} triangles)")]
    TriangleIndex { index: usize, count: usize },
    #[error("function has {found} values but the mesh has {expected} nodes")]
    Length { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub area: f64,
    /// Constant gradient of the hat function of each vertex on this triangle.
    pub basis_gradients: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    rect: [f64; 4],
    nodes: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
    centroids: Vec<[f64; 2]>,
    node_weights: Vec<f64>,
    boundary_nodes: Vec<usize>,
    boundary_weights: Vec<f64>,
}

/// Uniform triangulation of `rect = (x0, y0, x1, y1)` with `nx × ny` cells,
/// each split along its lower-left to upper-right diagonal. Nodes are
/// numbered row by row starting at `(x0, y0)`.
pub fn build_rect_mesh(nx: usize, ny: usize, rect: [f64; 4]) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::Subdivision { nx, ny });
    }
    let [x0, y0, x1, y1] = rect;
    if !(x1 > x0 && y1 > y0) || !rect.iter().all(|v| v.is_finite()) {
        return Err(MeshError::DegenerateRect { rect });
    }
    let hx = (x1 - x0) / nx as f64;
    let hy = (y1 - y0) / ny as f64;
    let row = nx + 1;
    let n_nodes = row * (ny + 1);

    let mut nodes = Vec::with_capacity(n_nodes);
    for j in 0..=ny {
        // pin the last row/column to the exact rectangle edge
        let y = if j == ny { y1 } else { y0 + j as f64 * hy };
        for i in 0..=nx {
            let x = if i == nx { x1 } else { x0 + i as f64 * hx };
            nodes.push([x, y]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let n00 = j * row + i;
            let n10 = n00 + 1;
            let n01 = n00 + row;
            let n11 = n01 + 1;
            triangles.push(make_triangle(&nodes, [n00, n10, n11]));
            triangles.push(make_triangle(&nodes, [n00, n11, n01]));
        }
    }

    let centroids = triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.vertices.map(|v| nodes[v]);
            [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
        })
        .collect();

    let mut node_weights = vec![0.0; n_nodes];
    for t in &triangles {
        for &v in &t.vertices {
            node_weights[v] += t.area / 3.0;
        }
    }

    // boundary edges, walked counterclockwise
    let mut boundary_weights = vec![0.0; n_nodes];
    let mut add_edge = |a: usize, b: usize, len: f64| {
        boundary_weights[a] += 0.5 * len;
        boundary_weights[b] += 0.5 * len;
    };
    for i in 0..nx {
        add_edge(i, i + 1, hx);
        add_edge(ny * row + i, ny * row + i + 1, hx);
    }
    for j in 0..ny {
        add_edge(j * row, (j + 1) * row, hy);
        add_edge(j * row + nx, (j + 1) * row + nx, hy);
    }
    let boundary_nodes = (0..n_nodes)
        .filter(|&i| boundary_weights[i] > 0.0)
        .collect();

    Ok(Mesh {
        nx,
        ny,
        rect,
        nodes,
        triangles,
        centroids,
        node_weights,
        boundary_nodes,
        boundary_weights,
    })
}

fn make_triangle(nodes: &[[f64; 2]], vertices: [usize; 3]) -> Triangle {
    let [p0, p1, p2] = vertices.map(|v| nodes[v]);
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = 0.5 * det;
    let inv = 1.0 / det;
    let basis_gradients = [
        [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
        [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
        [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
    ];
    Triangle {
        vertices,
        area,
        basis_gradients,
    }
}

impl Mesh {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn rect(&self) -> [f64; 4] {
        self.rect
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn centroids(&self) -> &[[f64; 2]] {
        &self.centroids
    }

    /// Lumped interior weights `m_i`.
    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Lumped boundary weights `s_i`, one per node (zero off ∂Ω).
    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary_weights
    }

    pub fn area(&self) -> f64 {
        (self.rect[2] - self.rect[0]) * (self.rect[3] - self.rect[1])
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * ((self.rect[2] - self.rect[0]) + (self.rect[3] - self.rect[1]))
    }

    pub fn check_len(&self, len: usize) -> Result<(), MeshError> {
        if len == self.node_count() {
            Ok(())
        } else {
            Err(MeshError::Length {
                expected: self.node_count(),
                found: len,
            })
        }
    }

    /// Gradient of the piecewise-linear interpolant of `values` on triangle `tri`.
    pub fn gradient_on_triangle(&self, tri: usize, values: &[f64]) -> Result<[f64; 2], MeshError> {
        let t = self.triangles.get(tri).ok_or(MeshError::TriangleIndex {
            index: tri,
            count: self.triangles.len(),
        })?;
        self.check_len(values.len())?;
        Ok(triangle_gradient(t, values))
    }

    /// Gradients on all triangles, in triangle order.
    pub fn gradients(&self, values: &[f64]) -> Vec<[f64; 2]> {
        self.triangles
            .iter()
            .map(|t| triangle_gradient(t, values))
            .collect()
    }
}

#[inline]
pub(crate) fn triangle_gradient(t: &Triangle, values: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (k, &v) in t.vertices.iter().enumerate() {
        g[0] += values[v] * t.basis_gradients[k][0];
        g[1] += values[v] * t.basis_gradients[k][1];
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: [f64; 4] = [0.0, 0.0, 1.0, 1.0];

    #[test]
    fn single_cell() {
        let m = build_rect_mesh(1, 1, UNIT).unwrap();
        assert_eq!(m.node_count(), 4);
        assert_eq!(m.triangles().len(), 2);
        // corners on the diagonal touch both triangles
        let w = m.node_weights();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((w[3] - 1.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((w[2] - 1.0 / 6.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(m.boundary_weights(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_by_two() {
        let m = build_rect_mesh(2, 2, UNIT).unwrap();
        assert_eq!(m.node_count(), 9);
        assert_eq!(m.triangles().len(), 8);
        assert!((m.boundary_weights().iter().sum::<f64>() - 4.0).abs() < 1e-15);
        assert_eq!(m.boundary_nodes().len(), 8);
        assert_eq!(m.boundary_weights()[4], 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            build_rect_mesh(0, 1, UNIT),
            Err(MeshError::Subdivision { .. })
        ));
        assert!(matches!(
            build_rect_mesh(2, 2, [0.0, 0.0, 0.0, 1.0]),
            Err(MeshError::DegenerateRect { .. })
        ));
    }

    #[test]
    fn weights_sum_to_measure() {
        for &(nx, ny, rect) in &[(16, 16, UNIT), (7, 3, [-1.0, 0.5, 2.0, 1.75]), (1, 9, UNIT)] {
            let m = build_rect_mesh(nx, ny, rect).unwrap();
            let area: f64 = m.node_weights().iter().sum();
            let perim: f64 = m.boundary_weights().iter().sum();
            assert!((area - m.area()).abs() <= 1e-12 * m.area());
            assert!((perim - m.perimeter()).abs() <= 1e-12 * m.perimeter());
            assert!(m.triangles().iter().all(|t| t.area > 0.0));
            for &b in m.boundary_nodes() {
                let [x, y] = m.nodes()[b];
                assert!(x == rect[0] || x == rect[2] || y == rect[1] || y == rect[3]);
            }
        }
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let m = build_rect_mesh(3, 4, [0.0, 0.0, 2.0, 1.0]).unwrap();
        let c = vec![3.5; m.node_count()];
        let x: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        for t in 0..m.triangles().len() {
            assert_eq!(m.gradient_on_triangle(t, &c).unwrap(), [0.0, 0.0]);
            let g = m.gradient_on_triangle(t, &x).unwrap();
            assert!((g[0] - 1.0).abs() < 1e-13 && g[1].abs() < 1e-13);
        }
        assert!(m.gradient_on_triangle(1000, &c).is_err());
    }

    #[test]
    fn gradient_matches_interpolation_solve() {
        // u = u0 + gx (x - x0) + gy (y - y0) through the three vertices
        let m = build_rect_mesh(1, 1, [0.0, 0.0, 1.3, 0.7]).unwrap();
        let u = [0.3, -1.2, 2.5, 0.9];
        for (ti, t) in m.triangles().iter().enumerate() {
            let [a, b, c] = t.vertices.map(|v| m.nodes()[v]);
            let (ua, ub, uc) = (u[t.vertices[0]], u[t.vertices[1]], u[t.vertices[2]]);
            let (m11, m12, m21, m22) = (b[0] - a[0], b[1] - a[1], c[0] - a[0], c[1] - a[1]);
            let det = m11 * m22 - m12 * m21;
            let gx = ((ub - ua) * m22 - m12 * (uc - ua)) / det;
            let gy = (m11 * (uc - ua) - (ub - ua) * m21) / det;
            let g = m.gradient_on_triangle(ti, &u).unwrap();
            assert!((g[0] - gx).abs() < 1e-13 && (g[1] - gy).abs() < 1e-13);
        }
    }
}
