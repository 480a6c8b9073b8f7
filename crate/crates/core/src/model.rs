//! A problem bound to a mesh: coefficient fields sampled once at the
//! quadrature points every discrete integral uses.

use crate::coeff_expr::CoefficientField;
use crate::mesh::Mesh;
use crate::problem::{Exponents, ProblemData, ProblemError};

#[derive(Debug, Clone)]
pub struct Model {
    mesh: Mesh,
    data: ProblemData,
    /// μ at triangle centroids (gradient terms).
    mu_tri: Vec<f64>,
    /// μ at nodes (nodal modular).
    mu_node: Vec<f64>,
    alpha: Vec<f64>,
    /// β at boundary nodes, zero elsewhere.
    beta: Vec<f64>,
    zeta: Vec<f64>,
    /// `‖e_i‖_{1,p}` of every hat function.
    hat_norms: Vec<f64>,
}

impl Model {
    pub fn new(mesh: Mesh, data: ProblemData) -> Result<Self, ProblemError> {
        let nodes = mesh.nodes();
        let sample = |field: &CoefficientField, name: &'static str, pts: &[[f64; 2]]| {
            pts.iter()
                .map(|p| {
                    field
                        .eval(p[0], p[1])
                        .map_err(|source| ProblemError::Coefficient { name, source })
                })
                .collect::<Result<Vec<f64>, _>>()
        };
        let mu_tri = sample(&data.mu, "mu", mesh.centroids())?;
        let mu_node = sample(&data.mu, "mu", nodes)?;
        let alpha = sample(&data.alpha, "alpha", nodes)?;
        let zeta = sample(&data.zeta, "zeta", nodes)?;
        let mut beta = vec![0.0; mesh.node_count()];
        for &b in mesh.boundary_nodes() {
            let [x, y] = nodes[b];
            beta[b] = data
                .beta
                .eval(x, y)
                .map_err(|source| ProblemError::Coefficient {
                    name: "beta",
                    source,
                })?;
        }

        let p = data.p;
        let mut grad_part = vec![0.0; mesh.node_count()];
        for t in mesh.triangles() {
            for (k, &v) in t.vertices.iter().enumerate() {
                let [gx, gy] = t.basis_gradients[k];
                grad_part[v] += t.area * (gx * gx + gy * gy).sqrt().powf(p);
            }
        }
        let hat_norms = grad_part
            .iter()
            .zip(mesh.node_weights())
            .zip(&alpha)
            .map(|((g, m), a)| (g + m * a).powf(1.0 / p))
            .collect();

        Ok(Model {
            mesh,
            data,
            mu_tri,
            mu_node,
            alpha,
            beta,
            zeta,
            hat_norms,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn exponents(&self) -> Exponents {
        self.data.exponents()
    }

    pub fn node_count(&self) -> usize {
        self.mesh.node_count()
    }

    pub fn mu_on_triangles(&self) -> &[f64] {
        &self.mu_tri
    }

    pub fn mu_on_nodes(&self) -> &[f64] {
        &self.mu_node
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn hat_norms(&self) -> &[f64] {
        &self.hat_norms
    }

    /// Same mesh and fields with a different data set (e.g. another λ).
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Model {
            data: self.data.with_lambda(lambda),
            ..self.clone()
        }
    }
}
