//! The unitary equilateral master element and the computational mesh the
//! physical mesh is mapped from.

use crate::error::{Error, Result};
use crate::linalg::{factorial, Mat, Vector};
use crate::mesh::{Simplex, SimplicialMesh};

/// Equilateral simplex with unit edges, centroid at the origin and first edge
/// along the first axis.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceSimplex {
    pub dim: usize,
    pub vertices: [Vector; 4],
    /// Edge matrix `Ê`.
    pub edge: Mat,
    /// Altitude `â`.
    pub altitude: f64,
    /// Diameter `ĥ` (= 1).
    pub diameter: f64,
    /// In-diameter `ρ̂`.
    pub in_diameter: f64,
}

impl ReferenceSimplex {
    pub fn volume(&self) -> f64 {
        self.edge.det().abs() / factorial(self.dim)
    }

    pub fn simplex(&self) -> Simplex {
        Simplex::new(self.dim, &self.vertices)
    }
}

pub fn reference_equilateral(dim: usize) -> Result<ReferenceSimplex> {
    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();
    let vertices = match dim {
        2 => [
            [-0.5, -s3 / 6.0, 0.0],
            [0.5, -s3 / 6.0, 0.0],
            [0.0, s3 / 3.0, 0.0],
            [0.0; 3],
        ],
        3 => [
            [-0.5, -s3 / 6.0, -s6 / 12.0],
            [0.5, -s3 / 6.0, -s6 / 12.0],
            [0.0, s3 / 3.0, -s6 / 12.0],
            [0.0, 0.0, s6 / 4.0],
        ],
        d => return Err(Error::UnsupportedDimension(d)),
    };
    let simplex = Simplex::new(dim, &vertices);
    let edge = simplex.edge_matrix();
    let altitude = simplex.min_altitude()?;
    let in_diameter = simplex.in_diameter()?;
    Ok(ReferenceSimplex { dim, vertices, edge, altitude, diameter: 1.0, in_diameter })
}

/// Source of the per-element computational edge matrices `Ê_K`.
#[derive(Clone, Debug)]
pub enum ComputationalMesh {
    /// `N` copies of the master element scaled by `N^{-1/d}`.
    MasterCopies { count: usize, dim: usize, edge: Mat },
    /// A real computational mesh with the same element numbering as the
    /// physical mesh.
    Explicit { mesh: SimplicialMesh, edges: Vec<Mat> },
}

impl ComputationalMesh {
    pub fn master_copies(count: usize, dim: usize) -> Result<Self> {
        let reference = reference_equilateral(dim)?;
        let s = (count as f64).powf(-1.0 / dim as f64);
        Ok(ComputationalMesh::MasterCopies { count, dim, edge: reference.edge.scaled(s) })
    }

    pub fn explicit(mesh: SimplicialMesh) -> Result<Self> {
        mesh.check_nonsingular()?;
        let edges = (0..mesh.num_elements()).map(|k| mesh.edge_matrix(k)).collect();
        Ok(ComputationalMesh::Explicit { mesh, edges })
    }

    /// Computational mesh matched to a physical mesh in the default mode.
    pub fn for_mesh(mesh: &SimplicialMesh) -> Result<Self> {
        Self::master_copies(mesh.num_elements(), mesh.dim())
    }

    pub fn num_elements(&self) -> usize {
        match self {
            ComputationalMesh::MasterCopies { count, .. } => *count,
            ComputationalMesh::Explicit { edges, .. } => edges.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ComputationalMesh::MasterCopies { dim, .. } => *dim,
            ComputationalMesh::Explicit { mesh, .. } => mesh.dim(),
        }
    }

    /// `Ê_K`
    #[inline]
    pub fn edge_matrix(&self, k: usize) -> Mat {
        match self {
            ComputationalMesh::MasterCopies { edge, .. } => *edge,
            ComputationalMesh::Explicit { edges, .. } => edges[k],
        }
    }

    /// Regularity constants `(ρ_lo, ρ_hi)` with
    /// `ρ_lo N^{-1/d} ≤ ρ_{K_c}` and `h_{K_c} ≤ ρ_hi N^{-1/d}`.
    pub fn regularity(&self) -> Result<(f64, f64)> {
        match self {
            ComputationalMesh::MasterCopies { dim, .. } => {
                let r = reference_equilateral(*dim)?;
                Ok((r.in_diameter, r.diameter))
            }
            ComputationalMesh::Explicit { mesh, .. } => {
                let n = mesh.num_elements() as f64;
                let scale = n.powf(1.0 / mesh.dim() as f64);
                let mut lo = f64::INFINITY;
                let mut hi = 0.0f64;
                let id = Mat::identity(mesh.dim());
                for k in 0..mesh.num_elements() {
                    let s = mesh.simplex(k);
                    lo = lo.min(s.in_diameter()? * scale);
                    hi = hi.max(s.metric_diameter(&id)? * scale);
                }
                Ok((lo, hi))
            }
        }
    }
}
