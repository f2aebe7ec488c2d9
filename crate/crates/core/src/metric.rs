//! Metric tensor fields and the Hessian-based adaptation metric.
//!
//! The adaptation pipeline is: nodal values `u_i` → least-squares Hessian
//! recovery → `|H|` → regularization `α` → vertex metric
//! `M = det(αI + |H|)^{-1/6} (αI + |H|)`, linearly interpolated on the mesh
//! the Hessian was recovered on.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::mesh::{check_spd, SimplicialMesh};

/// Eigenvalue bounds `lo·I ≤ M(x) ≤ hi·I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricBounds {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone)]
pub enum MetricField {
    Identity { dim: usize },
    Analytic { dim: usize, f: Arc<dyn Fn(&Vector) -> Mat + Send + Sync> },
    Nodal(NodalMetric),
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricField::Identity { dim } => write!(f, "Identity({dim})"),
            MetricField::Analytic { dim, .. } => write!(f, "Analytic({dim})"),
            MetricField::Nodal(n) => write!(f, "Nodal({} vertices)", n.values.len()),
        }
    }
}

impl MetricField {
    pub fn identity(dim: usize) -> Self {
        MetricField::Identity { dim }
    }

    pub fn constant(m: Mat) -> Self {
        MetricField::Analytic { dim: m.dim(), f: Arc::new(move |_| m) }
    }

    pub fn analytic(dim: usize, f: impl Fn(&Vector) -> Mat + Send + Sync + 'static) -> Self {
        MetricField::Analytic { dim, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricField::Identity { dim } | MetricField::Analytic { dim, .. } => *dim,
            MetricField::Nodal(n) => n.background.dim(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &Vector) -> Mat {
        match self {
            MetricField::Identity { dim } => Mat::identity(*dim),
            MetricField::Analytic { f, .. } => f(x),
            MetricField::Nodal(n) => n.eval(x),
        }
    }

    /// `c·M`
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            MetricField::Identity { dim } => MetricField::constant(Mat::scalar(*dim, c)),
            MetricField::Analytic { dim, f } => {
                let f = f.clone();
                MetricField::analytic(*dim, move |x| f(x).scaled(c))
            }
            MetricField::Nodal(n) => {
                let mut n = n.clone();
                n.values = Arc::new(n.values.iter().map(|m| m.scaled(c)).collect());
                MetricField::Nodal(n)
            }
        }
    }

    /// `M` at each position, in order.
    pub fn eval_all(&self, positions: &[Vector]) -> Vec<Mat> {
        match self {
            MetricField::Identity { dim } => vec![Mat::identity(*dim); positions.len()],
            _ => positions.par_iter().map(|x| self.eval(x)).collect(),
        }
    }
}

/// Per-vertex SPD matrices on a background mesh, interpolated linearly inside
/// its elements. Points outside the background mesh use the clamped and
/// renormalized barycentric coordinates of the least-violated element.
#[derive(Clone, Debug)]
pub struct NodalMetric {
    background: Arc<SimplicialMesh>,
    values: Arc<Vec<Mat>>,
    locator: Arc<Locator>,
}

impl NodalMetric {
    pub fn new(background: SimplicialMesh, values: Vec<Mat>) -> Result<Self> {
        if values.len() != background.num_vertices() {
            return Err(Error::InvalidMesh(format!(
                "{} nodal metric values for {} vertices",
                values.len(),
                background.num_vertices()
            )));
        }
        for m in &values {
            check_spd(m)?;
        }
        let locator = Locator::new(&background)?;
        Ok(NodalMetric { background: Arc::new(background), values: Arc::new(values), locator: Arc::new(locator) })
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn background(&self) -> &SimplicialMesh {
        &self.background
    }

    pub fn eval(&self, x: &Vector) -> Mat {
        let (k, bary) = self.locator.locate(&self.background, x);
        let e = self.background.element(k);
        let mut m = Mat::zeros(self.background.dim());
        for (i, &v) in e.iter().enumerate() {
            m += self.values[v].scaled(bary[i]);
        }
        m
    }
}

/// Uniform bucket grid over element bounding boxes.
#[derive(Debug)]
struct Locator {
    lo: Vector,
    cell: Vector,
    counts: [usize; 3],
    buckets: Vec<Vec<u32>>,
    inverse_edges: Vec<Mat>,
}

impl Locator {
    fn new(mesh: &SimplicialMesh) -> Result<Self> {
        let d = mesh.dim();
        let (lo, hi) = mesh.bounding_box();
        let per_axis = ((mesh.num_elements() as f64).powf(1.0 / d as f64)).ceil().max(1.0) as usize;
        let mut counts = [1usize; 3];
        let mut cell = [1.0; 3];
        for a in 0..d {
            counts[a] = per_axis;
            cell[a] = ((hi[a] - lo[a]) / per_axis as f64).max(f64::MIN_POSITIVE);
        }
        let mut buckets = vec![Vec::new(); counts[0] * counts[1] * counts[2]];
        let mut inverse_edges = Vec::with_capacity(mesh.num_elements());
        for k in 0..mesh.num_elements() {
            let s = mesh.simplex(k);
            let e = s.edge_matrix();
            inverse_edges.push(e.inverse().ok_or(Error::DegenerateElement { element: k, det: 0.0 })?);
            let mut blo = [usize::MAX; 3];
            let mut bhi = [0usize; 3];
            for p in &s.pts[..=d] {
                let c = Self::cell_of(&lo, &cell, &counts, d, p);
                for a in 0..3 {
                    blo[a] = blo[a].min(c[a]);
                    bhi[a] = bhi[a].max(c[a]);
                }
            }
            for z in blo[2]..=bhi[2] {
                for y in blo[1]..=bhi[1] {
                    for x in blo[0]..=bhi[0] {
                        buckets[(z * counts[1] + y) * counts[0] + x].push(k as u32);
                    }
                }
            }
        }
        Ok(Locator { lo, cell, counts, buckets, inverse_edges })
    }

    fn cell_of(lo: &Vector, cell: &Vector, counts: &[usize; 3], d: usize, p: &Vector) -> [usize; 3] {
        let mut c = [0usize; 3];
        for a in 0..d {
            let t = ((p[a] - lo[a]) / cell[a]).floor();
            c[a] = (t.max(0.0) as usize).min(counts[a] - 1);
        }
        c
    }

    fn barycentric(&self, mesh: &SimplicialMesh, k: usize, x: &Vector) -> [f64; 4] {
        let x0 = mesh.vertices[mesh.element(k)[0]];
        let l = self.inverse_edges[k].mul_vec(&linalg::sub(x, &x0));
        let d = mesh.dim();
        let mut b = [0.0; 4];
        b[1..=d].copy_from_slice(&l[..d]);
        b[0] = 1.0 - l[..d].iter().sum::<f64>();
        b
    }

    fn search(
        &self,
        mesh: &SimplicialMesh,
        x: &Vector,
        cands: impl Iterator<Item = usize>,
        best: &mut (usize, f64, [f64; 4]),
    ) {
        let d = mesh.dim();
        for k in cands {
            let b = self.barycentric(mesh, k, x);
            let worst = b[..=d].iter().cloned().fold(f64::INFINITY, f64::min);
            if worst > best.1 {
                *best = (k, worst, b);
            }
        }
    }

    /// Containing element and barycentric coordinates (clamped to the
    /// element when `x` lies outside the mesh).
    fn locate(&self, mesh: &SimplicialMesh, x: &Vector) -> (usize, [f64; 4]) {
        let d = mesh.dim();
        let c = Self::cell_of(&self.lo, &self.cell, &self.counts, d, x);
        let bucket = &self.buckets[(c[2] * self.counts[1] + c[1]) * self.counts[0] + c[0]];
        let mut best = (usize::MAX, f64::NEG_INFINITY, [0.0; 4]);
        self.search(mesh, x, bucket.iter().map(|&k| k as usize), &mut best);
        if best.1 < -1e-12 || best.0 == usize::MAX {
            // outside every candidate: widen to the whole mesh
            self.search(mesh, x, 0..mesh.num_elements(), &mut best);
        }
        let (k, worst, mut b) = best;
        if worst < 0.0 {
            let mut sum = 0.0;
            for v in b[..=d].iter_mut() {
                *v = v.max(0.0);
                sum += *v;
            }
            for v in b[..=d].iter_mut() {
                *v /= sum;
            }
        }
        (k, b)
    }
}

/// Vertex-average metric `M_K = (1/(d+1)) Σ_i M(x_i^K)`.
pub fn element_metric(field: &MetricField, mesh: &SimplicialMesh, k: usize) -> Result<Mat> {
    let e = mesh.element(k);
    let mut m = Mat::zeros(mesh.dim());
    for &v in e {
        m += field.eval(&mesh.vertices[v]);
    }
    let m = m.scaled(1.0 / e.len() as f64);
    check_spd(&m)?;
    Ok(m)
}

/// Sampled eigenvalue bounds over vertices and element centroids.
pub fn estimate_bounds(field: &MetricField, mesh: &SimplicialMesh) -> Result<MetricBounds> {
    let mut samples: Vec<Vector> = mesh.vertices.clone();
    samples.extend((0..mesh.num_elements()).map(|k| mesh.simplex(k).centroid()));
    let mats: Vec<Mat> = match field {
        MetricField::Nodal(n) => {
            // interpolation is a convex combination of the nodal values
            let mut v = field.eval_all(&samples);
            v.extend(n.values.iter().cloned());
            v
        }
        _ => field.eval_all(&samples),
    };
    let (lo, hi) = mats
        .par_iter()
        .map(|m| m.eigen_bounds())
        .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    if !(lo > 0.0) {
        return Err(Error::NonSpdMetric { min_eig: lo });
    }
    Ok(MetricBounds { lo, hi })
}

/// Recovered per-vertex Hessians.
#[derive(Clone, Debug)]
pub struct NodalHessianField {
    pub dim: usize,
    pub hessians: Vec<Mat>,
}

/// Least-squares quadratic fit on each vertex patch. The patch is the vertex
/// and its edge neighbours, widened by one ring (at most twice) until it has
/// enough nodes and the fit has full rank.
pub fn recover_hessian(mesh: &SimplicialMesh, values: &[f64]) -> Result<NodalHessianField> {
    if values.len() != mesh.num_vertices() {
        return Err(Error::InvalidMesh(format!(
            "{} nodal values for {} vertices",
            values.len(),
            mesh.num_vertices()
        )));
    }
    let d = mesh.dim();
    let neighbors = mesh.vertex_neighbors();
    let needed = (d + 1) * (d + 2) / 2;
    let hessians = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|i| {
            let mut patch = ring(&neighbors, i, 1);
            for widen in 0..=2 {
                if patch.len() >= needed {
                    if let Some(h) = fit_quadratic(mesh, values, i, &patch) {
                        return Ok(h);
                    }
                }
                if widen < 2 {
                    patch = ring(&neighbors, i, widen + 2);
                }
            }
            Err(Error::SingularPatch { vertex: i })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NodalHessianField { dim: d, hessians })
}

/// Vertices within `depth` edges of `center`, including it.
fn ring(neighbors: &[Vec<usize>], center: usize, depth: usize) -> Vec<usize> {
    let mut set = vec![center];
    let mut frontier = vec![center];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &neighbors[v] {
                if !set.contains(&w) {
                    set.push(w);
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    set
}

fn fit_quadratic(mesh: &SimplicialMesh, values: &[f64], center: usize, patch: &[usize]) -> Option<Mat> {
    let d = mesh.dim();
    let x0 = mesh.vertices[center];
    let scale = patch
        .iter()
        .map(|&v| linalg::norm(&linalg::sub(&mesh.vertices[v], &x0)))
        .fold(0.0f64, f64::max);
    if scale <= 0.0 {
        return None;
    }
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect();
    let ncols = 1 + d + pairs.len();
    let mut a = DMatrix::<f64>::zeros(patch.len(), ncols);
    let mut rhs = DVector::<f64>::zeros(patch.len());
    for (r, &v) in patch.iter().enumerate() {
        let dx = linalg::scale(&linalg::sub(&mesh.vertices[v], &x0), 1.0 / scale);
        a[(r, 0)] = 1.0;
        for c in 0..d {
            a[(r, 1 + c)] = dx[c];
        }
        for (c, &(p, q)) in pairs.iter().enumerate() {
            a[(r, 1 + d + c)] = if p == q { 0.5 * dx[p] * dx[p] } else { dx[p] * dx[q] };
        }
        rhs[r] = values[v];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return None;
    }
    let coef = svd.solve(&rhs, 0.0).ok()?;
    let mut h = Mat::zeros(d);
    let inv_s2 = 1.0 / (scale * scale);
    for (c, &(p, q)) in pairs.iter().enumerate() {
        let v = coef[1 + d + c] * inv_s2;
        h[(p, q)] = v;
        h[(q, p)] = v;
    }
    Some(h)
}

/// `|H|`: eigenvalues replaced by their absolute values, eigenvectors kept.
pub fn absolute_spd(h: &Mat) -> Mat {
    let (mut vals, vecs) = h.sym_eigen();
    for v in vals.iter_mut() {
        *v = v.abs();
    }
    Mat::from_eigen(&vals, &vecs)
}

/// Bracket and iteration limit for the regularization parameter solve.
pub const ALPHA_MIN: f64 = 1e-8;
pub const ALPHA_MAX: f64 = 1e8;
const ALPHA_ITERS: usize = 200;

/// Solution of the regularization equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularizationAlpha {
    pub alpha: f64,
    /// Relative residual `|lhs − rhs| / rhs` at `alpha`.
    pub residual: f64,
    /// The root lies outside `[ALPHA_MIN, ALPHA_MAX]`; `alpha` is the bracket end.
    pub clamped: bool,
    /// The target `2∫det(|H|)^{1/3}` vanished; `alpha` defaults to 1.
    pub degenerate_target: bool,
}

/// Per-vertex quadrature weights `Σ_{K∋i} |K| / (d+1)`, so that
/// `∫ f ≈ Σ_i w_i f(x_i)` with vertex-averaged integrands.
fn vertex_weights(mesh: &SimplicialMesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.num_vertices()];
    let share = 1.0 / (mesh.dim() + 1) as f64;
    for k in 0..mesh.num_elements() {
        let vol = mesh.element_volume(k);
        for &v in mesh.element(k) {
            w[v] += vol * share;
        }
    }
    w
}

/// Chooses `α` with `∫√det M_α dx = 2∫det(|H|)^{1/3} dx` by bisection in `log α`.
pub fn solve_regularization_alpha(mesh: &SimplicialMesh, hessians: &NodalHessianField) -> RegularizationAlpha {
    let d = mesh.dim();
    let w = vertex_weights(mesh);
    let eigs: Vec<[f64; 3]> = hessians
        .hessians
        .iter()
        .map(|h| {
            let (v, _) = h.sym_eigen();
            [v[0].abs(), v[1].abs(), if d == 3 { v[2].abs() } else { 0.0 }]
        })
        .collect();
    let rhs: f64 = 2.0
        * eigs
            .iter()
            .zip(&w)
            .map(|(e, wi)| wi * e[..d].iter().product::<f64>().cbrt())
            .sum::<f64>();
    if !(rhs > 1e-300) {
        return RegularizationAlpha { alpha: 1.0, residual: f64::NAN, clamped: false, degenerate_target: true };
    }
    // √det M = det(αI + |H|)^{(1 − d/6)/2}
    let expo = 0.5 * (1.0 - d as f64 / 6.0);
    let lhs = |alpha: f64| -> f64 {
        eigs.iter()
            .zip(&w)
            .map(|(e, wi)| wi * e[..d].iter().map(|l| alpha + l).product::<f64>().powf(expo))
            .sum()
    };
    let f = |alpha: f64| lhs(alpha) - rhs;
    let residual = |alpha: f64| (lhs(alpha) - rhs).abs() / rhs;
    if f(ALPHA_MIN) >= 0.0 {
        return RegularizationAlpha { alpha: ALPHA_MIN, residual: residual(ALPHA_MIN), clamped: true, degenerate_target: false };
    }
    if f(ALPHA_MAX) <= 0.0 {
        return RegularizationAlpha { alpha: ALPHA_MAX, residual: residual(ALPHA_MAX), clamped: true, degenerate_target: false };
    }
    let (mut lo, mut hi) = (ALPHA_MIN.ln(), ALPHA_MAX.ln());
    for _ in 0..ALPHA_ITERS {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp()) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let alpha = (0.5 * (lo + hi)).exp();
    RegularizationAlpha { alpha, residual: residual(alpha), clamped: false, degenerate_target: false }
}

/// Vertex value of the adaptation metric, `det(αI + |H|)^{-1/6} (αI + |H|)`.
pub fn adaptation_metric_value(h: &Mat, alpha: f64) -> Mat {
    let a = absolute_spd(h) + Mat::scalar(h.dim(), alpha);
    a.scaled(a.det().powf(-1.0 / 6.0))
}

/// Adaptation metric interpolated on `mesh` (the mesh the Hessians live on).
pub fn build_adaptation_metric(
    mesh: &SimplicialMesh,
    hessians: &NodalHessianField,
    alpha: f64,
) -> Result<MetricField> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("regularization alpha must be positive, got {alpha}")));
    }
    let values = hessians.hessians.iter().map(|h| adaptation_metric_value(h, alpha)).collect();
    Ok(MetricField::Nodal(NodalMetric::new(mesh.clone(), values)?))
}

/// Full pipeline from nodal values of `u` on `mesh` to a metric field.
pub fn metric_from_nodal_values(mesh: &SimplicialMesh, values: &[f64]) -> Result<(MetricField, RegularizationAlpha)> {
    let hessians = recover_hessian(mesh, values)?;
    let alpha = solve_regularization_alpha(mesh, &hessians);
    Ok((build_adaptation_metric(mesh, &hessians, alpha.alpha)?, alpha))
}

/// Equidistribution-weighted size: `Σ_K |K| √det(M_K)`.
pub fn metric_volume(field: &MetricField, mesh: &SimplicialMesh) -> Result<f64> {
    let mut s = 0.0;
    for k in 0..mesh.num_elements() {
        s += mesh.element_volume(k) * element_metric(field, mesh, k)?.det().sqrt();
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_mesh_3d, perturb_mesh, unit_square_mesh, BoundaryPolicy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn jiggled_square(n: usize, seed: u64) -> SimplicialMesh {
        let mut m = unit_square_mesh(n);
        m.apply_box_policy(BoundaryPolicy::Fixed);
        perturb_mesh(&m, 0.15 / n as f64, seed)
    }

    #[test]
    fn element_metric_examples() {
        let mesh = SimplicialMesh::new(
            2,
            vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, 1.0, 0.0]],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        assert_eq!(element_metric(&MetricField::identity(2), &mesh, 0).unwrap(), Mat::identity(2));
        let c = MetricField::constant(Mat::diag(2, &[2.0, 3.0]));
        assert_eq!(element_metric(&c, &mesh, 0).unwrap(), Mat::diag(2, &[2.0, 3.0]));
        let lin = MetricField::analytic(2, |x| Mat::scalar(2, x[0]));
        let m = element_metric(&lin, &mesh, 0).unwrap();
        assert!((m - Mat::scalar(2, 4.0 / 3.0)).max_abs() < 1e-15);
        let bad = MetricField::constant(Mat::diag(2, &[1.0, -1.0]));
        assert!(matches!(element_metric(&bad, &mesh, 0), Err(Error::NonSpdMetric { .. })));
    }

    #[test]
    fn hessian_exact_for_quadratics_2d() {
        let mesh = jiggled_square(6, 1);
        let cases: [(fn(&Vector) -> f64, Mat); 3] = [
            (|x| x[0] * x[0], Mat::diag(2, &[2.0, 0.0])),
            (|x| 3.0 * x[0] - 2.0 * x[1] + 1.0, Mat::zeros(2)),
            (|x| x[0] * x[1], Mat::from_rows(2, &[&[0.0, 1.0], &[1.0, 0.0]])),
        ];
        for (u, expect) in cases {
            let vals: Vec<f64> = mesh.vertices.iter().map(u).collect();
            let h = recover_hessian(&mesh, &vals).unwrap();
            for hi in &h.hessians {
                assert!((*hi - expect).max_abs() <= 1e-8 * expect.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn hessian_exact_for_quadratics_3d() {
        let mut mesh = box_mesh_3d(3, [0.0; 3], [1.0; 3]);
        mesh.apply_box_policy(BoundaryPolicy::Fixed);
        let mesh = perturb_mesh(&mesh, 0.03, 2);
        let expect = Mat::from_rows(3, &[&[2.0, 1.0, -0.5], &[1.0, -4.0, 0.25], &[-0.5, 0.25, 6.0]]);
        let vals: Vec<f64> = mesh
            .vertices
            .iter()
            .map(|x| 0.5 * expect.quad_form(x) + x[0] - 7.0)
            .collect();
        let h = recover_hessian(&mesh, &vals).unwrap();
        for hi in &h.hessians {
            assert!((*hi - expect).max_abs() <= 1e-8 * expect.max_abs());
        }
    }

    #[test]
    fn absolute_value_of_symmetric() {
        let a = absolute_spd(&Mat::diag(2, &[2.0, -3.0]));
        assert!((a - Mat::diag(2, &[2.0, 3.0])).max_abs() < 1e-14);
        assert_eq!(absolute_spd(&Mat::zeros(3)).max_abs(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in [2, 3] {
            for _ in 0..50 {
                let mut h = Mat::zeros(d);
                for i in 0..d {
                    for j in i..d {
                        let v = rng.random_range(-5.0..5.0);
                        h[(i, j)] = v;
                        h[(j, i)] = v;
                    }
                }
                let (ev, _) = h.sym_eigen();
                let mut expect: Vec<f64> = ev[..d].iter().map(|v| v.abs()).collect();
                expect.sort_by(f64::total_cmp);
                let (got, _) = absolute_spd(&h).sym_eigen();
                for i in 0..d {
                    assert!((got[i] - expect[i]).abs() < 1e-12);
                }
                // PSD input is left alone
                let psd = h * h;
                assert!((absolute_spd(&psd) - psd).max_abs() < 1e-11 * psd.max_abs());
            }
        }
    }

    fn constant_hessians(mesh: &SimplicialMesh, h: Mat) -> NodalHessianField {
        NodalHessianField { dim: mesh.dim(), hessians: vec![h; mesh.num_vertices()] }
    }

    /// Root of (α + c)^{2/3} = 2 c^{2/3} by plain bisection in α.
    fn bisect_oracle(c: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 100.0 * c);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (mid + c).powf(2.0 / 3.0) < 2.0 * c.powf(2.0 / 3.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn alpha_closed_form_for_constant_hessian() {
        let mesh = jiggled_square(5, 3);
        for c in [1.0, 4.0] {
            let a = solve_regularization_alpha(&mesh, &constant_hessians(&mesh, Mat::scalar(2, c)));
            let closed = (2f64.powf(1.5) - 1.0) * c;
            assert!((bisect_oracle(c) - closed).abs() < 1e-9 * closed);
            assert!((a.alpha - closed).abs() <= 1e-6 * closed, "{} vs {}", a.alpha, closed);
            assert!(a.residual <= 1e-8);
            assert!(!a.clamped && !a.degenerate_target);
        }
    }

    #[test]
    fn alpha_degenerate_target() {
        let mesh = unit_square_mesh(3);
        let a = solve_regularization_alpha(&mesh, &constant_hessians(&mesh, Mat::zeros(2)));
        assert!(a.degenerate_target);
        assert_eq!(a.alpha, 1.0);
    }

    #[test]
    fn alpha_equation_left_side_is_increasing() {
        let mesh = unit_square_mesh(3);
        let h = Mat::from_rows(2, &[&[3.0, 1.0], &[1.0, -2.0]]);
        let w: f64 = mesh.domain_volume();
        let mut prev = 0.0;
        for e in -8..=8 {
            let alpha = 10f64.powi(e);
            let lhs = w * adaptation_metric_value(&h, alpha).det().sqrt();
            assert!(lhs > prev);
            prev = lhs;
        }
    }

    #[test]
    fn adaptation_metric_values() {
        assert!((adaptation_metric_value(&Mat::zeros(2), 1.0) - Mat::identity(2)).max_abs() < 1e-15);
        let m = adaptation_metric_value(&Mat::diag(2, &[3.0, 0.0]), 1.0);
        let expect = Mat::diag(2, &[4.0, 1.0]).scaled(4f64.powf(-1.0 / 6.0));
        assert!((m - expect).max_abs() < 1e-14);
        // determinant identity and shared eigenbasis
        let h = Mat::from_rows(3, &[&[1.0, 2.0, 0.0], &[2.0, -1.0, 0.5], &[0.0, 0.5, 3.0]]);
        for d_alpha in [0.1, 2.0] {
            let m = adaptation_metric_value(&h, d_alpha);
            let a = absolute_spd(&h) + Mat::scalar(3, d_alpha);
            let expect = a.det().powf(1.0 - 3.0 / 6.0);
            assert!((m.det() - expect).abs() <= 1e-12 * expect);
            let (_, vecs) = h.sym_eigen();
            for i in 0..3 {
                let v = vecs.col(i);
                let mv = m.mul_vec(&v);
                let lam = linalg::dot(&v, &mv);
                assert!(linalg::norm(&linalg::sub(&mv, &linalg::scale(&v, lam))) < 1e-12 * m.max_abs());
            }
        }
    }

    #[test]
    fn nodal_metric_interpolates_linearly_and_clamps_outside() {
        let mesh = unit_square_mesh(4);
        let values: Vec<Mat> = mesh
            .vertices
            .iter()
            .map(|x| Mat::diag(2, &[1.0 + x[0], 2.0 + 3.0 * x[1]]))
            .collect();
        let f = MetricField::Nodal(NodalMetric::new(mesh, values).unwrap());
        let m = f.eval(&[0.37, 0.61, 0.0]);
        assert!((m - Mat::diag(2, &[1.37, 2.0 + 3.0 * 0.61])).max_abs() < 1e-13);
        // outside: a convex combination of the nearest element's values
        let out = f.eval(&[1.2, 0.5, 0.0]);
        assert!(out[(0, 1)] == 0.0 && out[(0, 0)] >= 1.75 && out[(0, 0)] <= 2.0 + 1e-14);
        assert!(out[(1, 1)] >= 2.0 + 3.0 * 0.25 - 1e-14 && out[(1, 1)] <= 2.0 + 3.0 * 0.75 + 1e-14);
    }

    #[test]
    fn bounds_of_builtin_fields() {
        let mesh = unit_square_mesh(3);
        assert_eq!(estimate_bounds(&MetricField::identity(2), &mesh).unwrap(), MetricBounds { lo: 1.0, hi: 1.0 });
        let b = estimate_bounds(&MetricField::constant(Mat::diag(2, &[2.0, 5.0])), &mesh).unwrap();
        assert!((b.lo - 2.0).abs() < 1e-14 && (b.hi - 5.0).abs() < 1e-14);
        assert!(estimate_bounds(&MetricField::constant(Mat::diag(2, &[2.0, -5.0])), &mesh).is_err());
    }
}
