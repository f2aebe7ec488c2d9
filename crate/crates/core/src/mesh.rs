//! Simplicial meshes in two and three dimensions: element geometry in the
//! Euclidean and in a constant metric, topology helpers, boundary constraints,
//! structured box generators and random perturbation.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, factorial, Mat, Vector, ZERO};

/// `|det E_K|` at or below this is treated as a degenerate element.
pub const DEGENERATE_DET: f64 = 1e-300;

/// A level-set surface `φ(x) = 0` a boundary vertex is allowed to slide on,
/// described by its gradient.
#[derive(Clone)]
pub enum Surface {
    /// Hyperplane with the given (not necessarily unit) normal.
    Plane { normal: Vector },
    Custom(Arc<dyn Fn(&Vector) -> Vector + Send + Sync>),
}

impl Surface {
    pub fn axis_plane(axis: usize) -> Self {
        let mut normal = ZERO;
        normal[axis] = 1.0;
        Surface::Plane { normal }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            Surface::Plane { normal } => *normal,
            Surface::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Surface::Plane { normal } => f.debug_struct("Plane").field("normal", normal).finish(),
            Surface::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Per-vertex boundary condition for the mesh velocity.
///
/// `OnSurface` may list several surfaces; the velocity is then restricted to
/// their common tangent space (a vertex on an edge of a box slides along the
/// edge).
#[derive(Clone, Debug, Default)]
pub enum BoundaryConstraint {
    #[default]
    Free,
    Fixed,
    OnSurface(Vec<Surface>),
}

impl BoundaryConstraint {
    pub fn is_fixed(&self) -> bool {
        matches!(self, BoundaryConstraint::Fixed)
    }
}

/// Boundary treatment for box-shaped domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryPolicy {
    Fixed,
    /// Boundary vertices slide on the box faces; corners stay fixed.
    Slide,
}

impl std::str::FromStr for BoundaryPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(BoundaryPolicy::Fixed),
            "slide" => Ok(BoundaryPolicy::Slide),
            other => Err(Error::InvalidConfig(format!("unknown boundary policy '{other}'"))),
        }
    }
}

/// A single simplex given by its `d + 1` vertices.
#[derive(Clone, Copy, Debug)]
pub struct Simplex {
    pub dim: usize,
    pub pts: [Vector; 4],
}

impl Simplex {
    pub fn new(dim: usize, pts: &[Vector]) -> Self {
        let mut p = [ZERO; 4];
        p[..=dim].copy_from_slice(&pts[..=dim]);
        Simplex { dim, pts: p }
    }

    /// `[x_1 - x_0, …, x_d - x_0]`
    pub fn edge_matrix(&self) -> Mat {
        let mut cols = [ZERO; 3];
        for j in 0..self.dim {
            cols[j] = linalg::sub(&self.pts[j + 1], &self.pts[0]);
        }
        Mat::from_cols(self.dim, &cols)
    }

    pub fn signed_volume(&self) -> f64 {
        self.edge_matrix().det() / factorial(self.dim)
    }

    pub fn volume(&self) -> f64 {
        self.signed_volume().abs()
    }

    pub fn centroid(&self) -> Vector {
        let mut c = ZERO;
        for p in &self.pts[..=self.dim] {
            c = linalg::add(&c, p);
        }
        linalg::scale(&c, 1.0 / (self.dim + 1) as f64)
    }

    /// Gradients of the barycentric basis functions. Entries `1..=d` are the
    /// rows of `E⁻¹`, entry 0 is minus their sum.
    pub fn basis_gradients(&self) -> Result<[Vector; 4]> {
        let e = self.edge_matrix();
        let det = e.det();
        if det.abs() <= DEGENERATE_DET || !det.is_finite() {
            return Err(Error::DegenerateElement { element: usize::MAX, det });
        }
        Ok(gradients_from_inverse(&e.inverse_with_det(det)))
    }

    /// Minimum altitude measured in the constant metric `m`:
    /// `min_i ((∇φ_i)ᵀ m⁻¹ ∇φ_i)^{-1/2}`.
    pub fn metric_min_altitude(&self, m: &Mat) -> Result<f64> {
        let minv = spd_inverse(m)?;
        let grads = self.basis_gradients()?;
        let worst = grads[..=self.dim]
            .iter()
            .map(|g| minv.quad_form(g))
            .fold(0.0f64, f64::max);
        Ok(1.0 / worst.sqrt())
    }

    /// Diameter measured in the constant metric `m`, i.e. the longest edge.
    pub fn metric_diameter(&self, m: &Mat) -> Result<f64> {
        check_spd(m)?;
        let mut h2 = 0.0f64;
        for i in 0..=self.dim {
            for j in (i + 1)..=self.dim {
                let e = linalg::sub(&self.pts[j], &self.pts[i]);
                h2 = h2.max(m.quad_form(&e));
            }
        }
        Ok(h2.sqrt())
    }

    /// Euclidean minimum altitude.
    pub fn min_altitude(&self) -> Result<f64> {
        let grads = self.basis_gradients()?;
        let g = grads[..=self.dim].iter().map(linalg::norm).fold(0.0f64, f64::max);
        Ok(1.0 / g)
    }

    /// Diameter of the largest inscribed ball, `2 / Σ_i |∇φ_i|`.
    pub fn in_diameter(&self) -> Result<f64> {
        let grads = self.basis_gradients()?;
        Ok(2.0 / grads[..=self.dim].iter().map(linalg::norm).sum::<f64>())
    }

    /// The six interior dihedral angles of a tetrahedron, in radians.
    pub fn dihedral_angles(&self) -> Result<[f64; 6]> {
        if self.dim != 3 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        let g = self.basis_gradients()?;
        let mut out = [0.0; 6];
        let mut n = 0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let c = -linalg::dot(&g[i], &g[j]) / (linalg::norm(&g[i]) * linalg::norm(&g[j]));
                out[n] = c.clamp(-1.0, 1.0).acos();
                n += 1;
            }
        }
        Ok(out)
    }
}

pub(crate) fn gradients_from_inverse(einv: &Mat) -> [Vector; 4] {
    let d = einv.dim();
    let mut g = [ZERO; 4];
    let mut sum = ZERO;
    for i in 0..d {
        g[i + 1] = einv.row(i);
        sum = linalg::add(&sum, &g[i + 1]);
    }
    g[0] = linalg::scale(&sum, -1.0);
    g
}

pub(crate) fn check_spd(m: &Mat) -> Result<()> {
    let (lo, _) = m.eigen_bounds();
    if !(lo > 0.0) {
        return Err(Error::NonSpdMetric { min_eig: lo });
    }
    Ok(())
}

pub(crate) fn spd_inverse(m: &Mat) -> Result<Mat> {
    check_spd(m)?;
    m.inverse().ok_or(Error::NonSpdMetric { min_eig: 0.0 })
}

/// A conforming simplicial mesh.
#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    dim: usize,
    pub vertices: Vec<Vector>,
    elements: Vec<[usize; 4]>,
    pub markers: Option<Vec<i32>>,
    pub constraints: Vec<BoundaryConstraint>,
}

impl SimplicialMesh {
    /// Validates dimension and indices. Elements with negative signed volume
    /// are reoriented by swapping their last two vertices; all vertices start
    /// out `Free`.
    pub fn new(dim: usize, vertices: Vec<Vector>, elements: Vec<Vec<usize>>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let nv = vertices.len();
        let mut elems = Vec::with_capacity(elements.len());
        for (k, e) in elements.iter().enumerate() {
            if e.len() != dim + 1 {
                return Err(Error::InvalidMesh(format!(
                    "element {k} has {} vertices, expected {}",
                    e.len(),
                    dim + 1
                )));
            }
            let mut arr = [0usize; 4];
            for (slot, &v) in arr.iter_mut().zip(e) {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!(
                        "element {k} references vertex {v} but the mesh has {nv} vertices"
                    )));
                }
                *slot = v;
            }
            elems.push(arr);
        }
        let mut vertices = vertices;
        if dim == 2 {
            for v in &mut vertices {
                v[2] = 0.0;
            }
        }
        let mut mesh = SimplicialMesh {
            dim,
            vertices,
            elements: elems,
            markers: None,
            constraints: vec![BoundaryConstraint::Free; nv],
        };
        for k in 0..mesh.elements.len() {
            if mesh.simplex(k).signed_volume() < 0.0 {
                mesh.elements[k].swap(dim - 1, dim);
            }
        }
        Ok(mesh)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Vertex indices of element `k`.
    #[inline]
    pub fn element(&self, k: usize) -> &[usize] {
        &self.elements[k][..=self.dim]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.elements.iter().map(move |e| &e[..=self.dim])
    }

    pub fn simplex(&self, k: usize) -> Simplex {
        self.simplex_at(&self.vertices, k)
    }

    /// Element `k` with vertex coordinates taken from `positions`.
    #[inline]
    pub fn simplex_at(&self, positions: &[Vector], k: usize) -> Simplex {
        let e = &self.elements[k];
        let mut pts = [ZERO; 4];
        for i in 0..=self.dim {
            pts[i] = positions[e[i]];
        }
        Simplex { dim: self.dim, pts }
    }

    pub fn edge_matrix(&self, k: usize) -> Mat {
        self.simplex(k).edge_matrix()
    }

    pub fn element_volume(&self, k: usize) -> f64 {
        self.simplex(k).volume()
    }

    pub fn signed_volume(&self, k: usize) -> f64 {
        self.simplex(k).signed_volume()
    }

    pub fn basis_gradients(&self, k: usize) -> Result<[Vector; 4]> {
        self.simplex(k).basis_gradients().map_err(|e| tag_element(e, k))
    }

    pub fn metric_min_altitude(&self, k: usize, m: &Mat) -> Result<f64> {
        self.simplex(k).metric_min_altitude(m).map_err(|e| tag_element(e, k))
    }

    pub fn metric_diameter(&self, k: usize, m: &Mat) -> Result<f64> {
        self.simplex(k).metric_diameter(m)
    }

    pub fn volumes(&self) -> Vec<f64> {
        (0..self.num_elements()).map(|k| self.element_volume(k)).collect()
    }

    /// Total (unsigned) volume.
    pub fn domain_volume(&self) -> f64 {
        self.volumes().iter().sum()
    }

    /// Errors with the first element whose signed volume is not positive.
    pub fn check_nonsingular(&self) -> Result<()> {
        check_positive(self, &self.vertices)
    }

    /// Elements incident to each vertex, in increasing element order.
    pub fn vertex_patches(&self) -> Vec<Vec<usize>> {
        let mut patches = vec![Vec::new(); self.num_vertices()];
        for (k, e) in self.elements().enumerate() {
            for &v in e {
                patches[v].push(k);
            }
        }
        patches
    }

    /// Edge-connected neighbours of each vertex, sorted.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.num_vertices()];
        for e in self.elements() {
            for &a in e {
                for &b in e {
                    if a != b {
                        nb[a].push(b);
                    }
                }
            }
        }
        for list in &mut nb {
            list.sort_unstable();
            list.dedup();
        }
        nb
    }

    /// Vertices on the topological boundary (on a facet shared by one element).
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut facets: HashMap<[usize; 3], usize> = HashMap::new();
        for e in self.elements() {
            for skip in 0..=self.dim {
                let mut f = [usize::MAX; 3];
                let mut n = 0;
                for (i, &v) in e.iter().enumerate() {
                    if i != skip {
                        f[n] = v;
                        n += 1;
                    }
                }
                f[..n].sort_unstable();
                *facets.entry(f).or_insert(0) += 1;
            }
        }
        let mut on = vec![false; self.num_vertices()];
        for (f, count) in facets {
            if count == 1 {
                for &v in f.iter().filter(|&&v| v != usize::MAX) {
                    on[v] = true;
                }
            }
        }
        on
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vector, Vector) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for i in 0..self.dim {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        for i in self.dim..3 {
            lo[i] = 0.0;
            hi[i] = 0.0;
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        linalg::norm(&linalg::sub(&hi, &lo))
    }

    /// Assigns constraints for a mesh of an axis-aligned box. Under `Slide`
    /// a boundary vertex lying on `m < d` box faces slides on them and a vertex
    /// on `d` faces (a corner) is fixed; boundary vertices off the box faces
    /// are fixed as well. Interior vertices become `Free`.
    pub fn apply_box_policy(&mut self, policy: BoundaryPolicy) {
        let (lo, hi) = self.bounding_box();
        let scale = linalg::norm(&linalg::sub(&hi, &lo));
        let tol = 1e-10 * scale;
        let boundary = self.boundary_vertices();
        for (i, v) in self.vertices.iter().enumerate() {
            self.constraints[i] = if !boundary[i] {
                BoundaryConstraint::Free
            } else {
                match policy {
                    BoundaryPolicy::Fixed => BoundaryConstraint::Fixed,
                    BoundaryPolicy::Slide => {
                        let faces: Vec<Surface> = (0..self.dim)
                            .filter(|&a| (v[a] - lo[a]).abs() <= tol || (v[a] - hi[a]).abs() <= tol)
                            .map(Surface::axis_plane)
                            .collect();
                        if faces.is_empty() || faces.len() >= self.dim {
                            BoundaryConstraint::Fixed
                        } else {
                            BoundaryConstraint::OnSurface(faces)
                        }
                    }
                }
            };
        }
    }

    /// Replaces vertex coordinates (topology and constraints kept).
    pub fn with_vertices(&self, vertices: Vec<Vector>) -> Self {
        let mut m = self.clone();
        m.vertices = vertices;
        m
    }
}

pub(crate) fn tag_element(e: Error, k: usize) -> Error {
    match e {
        Error::DegenerateElement { det, .. } => Error::DegenerateElement { element: k, det },
        Error::InvertedElement { det, .. } => Error::InvertedElement { element: k, det },
        other => other,
    }
}

pub(crate) fn check_positive(mesh: &SimplicialMesh, positions: &[Vector]) -> Result<()> {
    for k in 0..mesh.num_elements() {
        let det = mesh.simplex_at(positions, k).edge_matrix().det();
        if !(det > DEGENERATE_DET) {
            return Err(if det.abs() <= DEGENERATE_DET {
                Error::DegenerateElement { element: k, det }
            } else {
                Error::InvertedElement { element: k, det }
            });
        }
    }
    Ok(())
}

/// Structured triangulation of `[lo, hi]` with `n × n` squares, each cut along
/// its `(0,0)–(1,1)` diagonal. Vertex `(i, j)` has index `j (n + 1) + i`.
pub fn box_mesh_2d(n: usize, lo: [f64; 2], hi: [f64; 2]) -> SimplicialMesh {
    assert!(n >= 1);
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64;
            let y = lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64;
            vertices.push([x, y, 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut elements = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            elements.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    SimplicialMesh::new(2, vertices, elements).expect("structured 2D mesh is valid")
}

pub fn unit_square_mesh(n: usize) -> SimplicialMesh {
    box_mesh_2d(n, [0.0, 0.0], [1.0, 1.0])
}

/// Kuhn triangulation of `[lo, hi]` with `n³` cubes, six tetrahedra per cube
/// sharing the main diagonal.
pub fn box_mesh_3d(n: usize, lo: [f64; 3], hi: [f64; 3]) -> SimplicialMesh {
    assert!(n >= 1);
    let m = n + 1;
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                let t = [i, j, k];
                let mut p = ZERO;
                for a in 0..3 {
                    p[a] = lo[a] + (hi[a] - lo[a]) * t[a] as f64 / n as f64;
                }
                vertices.push(p);
            }
        }
    }
    let id = |c: [usize; 3]| (c[2] * m + c[1]) * m + c[0];
    const PERMS: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut elements = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = vec![id(c)];
                    for axis in perm {
                        c[axis] += 1;
                        tet.push(id(c));
                    }
                    elements.push(tet);
                }
            }
        }
    }
    SimplicialMesh::new(3, vertices, elements).expect("structured 3D mesh is valid")
}

/// Displaces every interior `Free` vertex by an independent uniform draw from
/// `[-amplitude, amplitude]^d`. Boundary and constrained vertices do not move.
/// The result may contain inverted elements; callers check.
pub fn perturb_mesh(mesh: &SimplicialMesh, amplitude: f64, seed: u64) -> SimplicialMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = mesh.clone();
    if amplitude <= 0.0 {
        return out;
    }
    let boundary = mesh.boundary_vertices();
    for (i, (v, c)) in out.vertices.iter_mut().zip(&mesh.constraints).enumerate() {
        let mut delta = ZERO;
        for d in delta.iter_mut().take(mesh.dim) {
            *d = rng.random_range(-amplitude..=amplitude);
        }
        if !boundary[i] && matches!(c, BoundaryConstraint::Free) {
            *v = linalg::add(v, &delta);
        }
    }
    out
}
