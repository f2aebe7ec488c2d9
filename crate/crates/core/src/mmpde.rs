//! The discrete meshing functional `I_h`, its element-local velocities and
//! the assembled, balanced and constrained nodal velocity field.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::linalg::{self, factorial, Mat, Vector, ZERO};
use crate::mesh::{check_spd, gradients_from_inverse, BoundaryConstraint, SimplicialMesh, DEGENERATE_DET};
use crate::metric::MetricField;
use crate::reference::ComputationalMesh;

/// Per-vertex velocities `dx_i/dt`.
pub type VelocityField = Vec<Vector>;

#[derive(Clone, Debug)]
pub struct MmpdeProblem {
    /// Topology, constraints and initial positions.
    pub mesh: SimplicialMesh,
    pub comp: ComputationalMesh,
    pub metric: MetricField,
    pub functional: Functional,
    pub tau: f64,
}

/// Element contributions: `|K|`, `G` and the local velocities `v_0..v_d`.
#[derive(Clone, Copy, Debug)]
pub struct LocalVelocities {
    pub volume: f64,
    pub g: f64,
    pub v: [Vector; 4],
}

/// Energy and velocities at one configuration.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub energy: f64,
    /// `Σ_{K∈ω_i} |K| v_{i_K}`, i.e. `−∂I_h/∂x_i`.
    pub descent: Vec<Vector>,
    /// `(P(x_i)/τ)·descent`, constrained.
    pub velocity: VelocityField,
}

impl MmpdeProblem {
    pub fn new(
        mesh: SimplicialMesh,
        comp: ComputationalMesh,
        metric: MetricField,
        functional: Functional,
        tau: f64,
    ) -> Result<Self> {
        if comp.num_elements() != mesh.num_elements() {
            return Err(Error::InvalidMesh(format!(
                "computational mesh has {} elements, physical mesh has {}",
                comp.num_elements(),
                mesh.num_elements()
            )));
        }
        if comp.dim() != mesh.dim() || metric.dim() != mesh.dim() {
            return Err(Error::InvalidMesh("mesh, computational mesh and metric dimensions differ".into()));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
        }
        mesh.check_nonsingular()?;
        Ok(MmpdeProblem { mesh, comp, metric, functional, tau })
    }

    /// Problem with the master-copies computational mesh.
    pub fn with_master_copies(mesh: SimplicialMesh, metric: MetricField, functional: Functional, tau: f64) -> Result<Self> {
        let comp = ComputationalMesh::for_mesh(&mesh)?;
        Self::new(mesh, comp, metric, functional, tau)
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    /// Metric at each position, checked SPD.
    pub fn vertex_metrics(&self, positions: &[Vector]) -> Result<Vec<Mat>> {
        let ms = self.metric.eval_all(positions);
        if !matches!(self.metric, MetricField::Identity { .. }) {
            ms.par_iter().try_for_each(check_spd)?;
        }
        Ok(ms)
    }

    /// Vertex-average metric of every element.
    pub fn element_metrics(&self, positions: &[Vector]) -> Result<Vec<Mat>> {
        let vm = self.vertex_metrics(positions)?;
        Ok((0..self.mesh.num_elements()).map(|k| self.average_metric(&vm, k)).collect())
    }

    fn average_metric(&self, vm: &[Mat], k: usize) -> Mat {
        let e = self.mesh.element(k);
        let mut m = Mat::zeros(self.dim());
        for &v in e {
            m += vm[v];
        }
        m.scaled(1.0 / e.len() as f64)
    }

    fn element_edge(&self, positions: &[Vector], k: usize) -> Result<(Mat, Mat, f64)> {
        let e = self.mesh.simplex_at(positions, k).edge_matrix();
        let det = e.det();
        let einv = e.inverse_with_det(det);
        if !(det > DEGENERATE_DET) || !einv.is_finite() {
            return Err(if det.abs() <= DEGENERATE_DET || !einv.is_finite() {
                Error::DegenerateElement { element: k, det }
            } else {
                Error::InvertedElement { element: k, det }
            });
        }
        Ok((e, einv, det))
    }

    fn element_value(&self, positions: &[Vector], vm: &[Mat], k: usize) -> Result<f64> {
        let (_, einv, det_e) = self.element_edge(positions, k)?;
        let ehat = self.comp.edge_matrix(k);
        let j = ehat * einv;
        let m = self.average_metric(vm, k);
        let det_m = m.det();
        let minv = m.inverse_with_det(det_m);
        let gd = self.functional.eval_with_inverse(&j, ehat.det() / det_e, &minv, det_m);
        Ok(det_e / factorial(self.dim()) * gd.g)
    }

    /// `I_h = Σ_K |K| G(Ê_K E_K⁻¹, det Ê_K / det E_K, M_K)` at `positions`.
    pub fn energy_at(&self, positions: &[Vector]) -> Result<f64> {
        let vm = self.vertex_metrics(positions)?;
        let parts = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|k| self.element_value(positions, &vm, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.iter().sum())
    }

    /// `I_h` at the problem's own mesh.
    pub fn discrete_functional(&self) -> Result<f64> {
        self.energy_at(&self.mesh.vertices)
    }

    fn local_with(&self, positions: &[Vector], vm: &[Mat], k: usize) -> Result<LocalVelocities> {
        let d = self.dim();
        let (_, einv, det_e) = self.element_edge(positions, k)?;
        let ehat = self.comp.edge_matrix(k);
        let j = ehat * einv;
        let det_j = ehat.det() / det_e;
        let m = self.average_metric(vm, k);
        let det_m = m.det();
        let minv = m.inverse_with_det(det_m);
        let gd = self.functional.eval_with_inverse(&j, det_j, &minv, det_m);

        let rows = einv.scaled(-gd.g) + einv * gd.dg_dj * ehat * einv + einv.scaled(gd.dg_ddet * det_j);
        let grads = gradients_from_inverse(&einv);
        let mut s = ZERO;
        for (jv, &v) in self.mesh.element(k).iter().enumerate() {
            s = linalg::axpy(&s, gd.dg_dm.trace_of_product(&vm[v]), &grads[jv]);
        }
        let share = 1.0 / (d + 1) as f64;
        let corr = linalg::scale(&linalg::add(&s, &gd.dg_dx), share);
        let mut v = [ZERO; 4];
        let mut sum = ZERO;
        for i in 0..d {
            v[i + 1] = linalg::sub(&rows.row(i), &corr);
            sum = linalg::add(&sum, &v[i + 1]);
        }
        v[0] = linalg::sub(&linalg::sub(&linalg::scale(&sum, -1.0), &s), &gd.dg_dx);
        Ok(LocalVelocities { volume: det_e / factorial(d), g: gd.g, v })
    }

    /// Local velocities of element `k` at `positions`.
    pub fn local_velocities(&self, positions: &[Vector], k: usize) -> Result<LocalVelocities> {
        let mut vm = vec![Mat::zeros(self.dim()); positions.len()];
        for &v in self.mesh.element(k) {
            let m = self.metric.eval(&positions[v]);
            check_spd(&m)?;
            vm[v] = m;
        }
        self.local_with(positions, &vm, k)
    }

    /// Energy, `−∂I_h/∂x` and the constrained velocity field at `positions`.
    /// Element work runs in parallel; accumulation is in element order.
    pub fn evaluate(&self, positions: &[Vector]) -> Result<Evaluation> {
        let vm = self.vertex_metrics(positions)?;
        let locals = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|k| self.local_with(positions, &vm, k))
            .collect::<Result<Vec<_>>>()?;
        let mut descent = vec![ZERO; positions.len()];
        let mut energy = 0.0;
        for (k, lv) in locals.iter().enumerate() {
            energy += lv.volume * lv.g;
            for (jv, &v) in self.mesh.element(k).iter().enumerate() {
                descent[v] = linalg::axpy(&descent[v], lv.volume, &lv.v[jv]);
            }
        }
        let d = self.dim();
        let mut velocity: Vec<Vector> = descent
            .iter()
            .zip(&vm)
            .map(|(g, m)| linalg::scale(g, self.functional.balance_from_det(m.det(), d) / self.tau))
            .collect();
        apply_constraints(&mut velocity, &self.mesh, positions)?;
        Ok(Evaluation { energy, descent, velocity })
    }

    /// Constrained nodal velocity field at `positions`.
    pub fn assemble_velocities(&self, positions: &[Vector]) -> Result<VelocityField> {
        Ok(self.evaluate(positions)?.velocity)
    }

    /// Unconstrained `(P(x_i)/τ)` at each position.
    pub fn balance_factors(&self, positions: &[Vector]) -> Result<Vec<f64>> {
        let d = self.dim();
        Ok(self
            .vertex_metrics(positions)?
            .iter()
            .map(|m| self.functional.balance_from_det(m.det(), d) / self.tau)
            .collect())
    }

    /// Central-difference `∂I_h/∂x_i` with step `h · ℓ_i`, where `ℓ_i` is the
    /// shortest edge at vertex `i`. Only the patch of `i` is re-evaluated,
    /// which gives the same differences as re-evaluating all of `I_h`. A probe
    /// that degenerates an element is retried with the step divided by 10, up
    /// to three times. Constraints are not applied.
    pub fn fd_gradient(&self, positions: &[Vector], h: f64) -> Result<Vec<Vector>> {
        if !(h > 0.0) {
            return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {h}")));
        }
        let d = self.dim();
        let patches = self.mesh.vertex_patches();
        let scales = local_edge_scales(&self.mesh, positions);
        (0..positions.len())
            .into_par_iter()
            .map(|i| {
                let mut step = h * scales[i];
                let mut last = None;
                for _ in 0..4 {
                    match self.fd_vertex(positions, &patches[i], i, step, d) {
                        Ok(g) => return Ok(g),
                        Err(e @ (Error::DegenerateElement { .. } | Error::InvertedElement { .. })) => {
                            last = Some(e);
                            step /= 10.0;
                        }
                        Err(e) => return Err(e),
                    }
                }
                Err(last.unwrap())
            })
            .collect()
    }

    fn fd_vertex(&self, positions: &[Vector], patch: &[usize], i: usize, step: f64, d: usize) -> Result<Vector> {
        let mut probe = positions.to_vec();
        let mut vm: Vec<Mat> = Vec::new();
        let mut patch_energy = |probe: &[Vector]| -> Result<f64> {
            vm.clear();
            vm.extend(self.metric.eval_all(probe));
            let mut s = 0.0;
            for &k in patch {
                s += self.element_value(probe, &vm, k)?;
            }
            Ok(s)
        };
        let mut g = ZERO;
        for a in 0..d {
            probe[i][a] = positions[i][a] + step;
            let up = patch_energy(&probe)?;
            probe[i][a] = positions[i][a] - step;
            let down = patch_energy(&probe)?;
            probe[i][a] = positions[i][a];
            g[a] = (up - down) / (2.0 * step);
        }
        Ok(g)
    }
}

/// Shortest incident edge length of each vertex.
pub fn local_edge_scales(mesh: &SimplicialMesh, positions: &[Vector]) -> Vec<f64> {
    let mut s = vec![f64::INFINITY; positions.len()];
    for e in mesh.elements() {
        for (a, &u) in e.iter().enumerate() {
            for &w in &e[a + 1..] {
                let l = linalg::norm(&linalg::sub(&positions[u], &positions[w]));
                s[u] = s[u].min(l);
                s[w] = s[w].min(l);
            }
        }
    }
    s
}

/// Applies the boundary constraints in place: `Fixed` vertices get zero
/// velocity, `OnSurface` vertices lose the components along the (orthonormalized)
/// surface normals at their current positions.
pub fn apply_constraints(field: &mut [Vector], mesh: &SimplicialMesh, positions: &[Vector]) -> Result<()> {
    for (i, c) in mesh.constraints.iter().enumerate() {
        match c {
            BoundaryConstraint::Free => {}
            BoundaryConstraint::Fixed => field[i] = ZERO,
            BoundaryConstraint::OnSurface(surfaces) => {
                let mut basis: Vec<Vector> = Vec::with_capacity(surfaces.len());
                for s in surfaces {
                    let g = s.gradient(&positions[i]);
                    let gn = linalg::norm(&g);
                    if !(gn > 0.0) || !gn.is_finite() {
                        return Err(Error::ZeroSurfaceGradient { vertex: i });
                    }
                    let mut n = linalg::scale(&g, 1.0 / gn);
                    for b in &basis {
                        n = linalg::axpy(&n, -linalg::dot(&n, b), b);
                    }
                    let nn = linalg::norm(&n);
                    if nn > 1e-12 {
                        basis.push(linalg::scale(&n, 1.0 / nn));
                    }
                }
                for n in &basis {
                    field[i] = linalg::axpy(&field[i], -linalg::dot(&field[i], n), n);
                }
            }
        }
    }
    Ok(())
}
