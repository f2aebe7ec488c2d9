//! Runtime forms of the nonsingularity theory: lemma bound sampling, the
//! volume and altitude floors, mesh quality statistics, and the minimum
//! volume scaling study.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::Coercivity;
use crate::integrate::{integrate, IntegrationResult, IntegratorConfig};
use crate::linalg::{factorial, Mat, ZERO};
use crate::mesh::{Simplex, SimplicialMesh};
use crate::metric::{element_metric, estimate_bounds, MetricField};
use crate::mmpde::MmpdeProblem;
use crate::reference::reference_equilateral;

/// Relative slack allowed on each lemma inequality.
pub const LEMMA_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaReport {
    pub dim: usize,
    pub samples: usize,
    pub violations: usize,
    /// Smallest `(value − lower) / lower` seen.
    pub worst_lower_margin: f64,
    /// Smallest `(upper − value) / upper` seen.
    pub worst_upper_margin: f64,
}

impl LemmaReport {
    fn from_triples(dim: usize, triples: &[(f64, f64, f64)]) -> Self {
        let mut r = LemmaReport {
            dim,
            samples: triples.len(),
            violations: 0,
            worst_lower_margin: f64::INFINITY,
            worst_upper_margin: f64::INFINITY,
        };
        for &(lo, v, hi) in triples {
            let ml = (v - lo) / lo.abs();
            let mu = (hi - v) / hi.abs();
            r.worst_lower_margin = r.worst_lower_margin.min(ml);
            r.worst_upper_margin = r.worst_upper_margin.min(mu);
            if !(ml >= -LEMMA_SLACK && mu >= -LEMMA_SLACK) {
                r.violations += 1;
            }
        }
        r
    }
}

/// Vertices uniform in the unit cube, redrawn until `|det E| ≥ 10⁻³/d!`.
pub fn random_simplex(rng: &mut impl Rng, dim: usize) -> Simplex {
    loop {
        let mut pts = [ZERO; 4];
        for p in pts.iter_mut().take(dim + 1) {
            for c in p.iter_mut().take(dim) {
                *c = rng.random::<f64>();
            }
        }
        let s = Simplex::new(dim, &pts);
        if s.edge_matrix().det().abs() >= 1e-3 / factorial(dim) {
            return s;
        }
    }
}

/// `AᵀA + 10⁻³ I` with standard normal entries in `A`.
pub fn random_spd(rng: &mut impl Rng, dim: usize) -> Mat {
    let mut a = Mat::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    a.transpose() * a + Mat::scalar(dim, 1e-3)
}

fn draw_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `(lower, ‖F'⁻¹ M⁻¹ F'⁻ᵀ‖, upper)` with `F' = E_K Ê⁻¹` and the bounds
/// `â²/a²_{K,M}` and `d² â²/a²_{K,M}`.
pub fn fk2_triple(k: &Simplex, m: &Mat) -> Result<(f64, f64, f64)> {
    let d = k.dim;
    let r = reference_equilateral(d)?;
    let fp = k.edge_matrix() * r.edge.inverse().ok_or(Error::DegenerateElement { element: 0, det: 0.0 })?;
    let fpi = fp.inverse().ok_or(Error::DegenerateElement { element: 0, det: 0.0 })?;
    let minv = m.inverse().ok_or(Error::NonSpdMetric { min_eig: 0.0 })?;
    let value = (fpi * minv * fpi.transpose()).spectral_norm();
    let a = k.metric_min_altitude(m)?;
    let ratio = r.altitude * r.altitude / (a * a);
    Ok((ratio, value, (d * d) as f64 * ratio))
}

/// `(lower, ‖F'ᵀ M F'‖, upper)` with `F' = E_K Ẽ⁻¹` and the bounds
/// `h²_{K,M}/h̃²` and `h²_{K,M}/ρ̃²`.
pub fn fk1_triple(k: &Simplex, reference: &Simplex, m: &Mat) -> Result<(f64, f64, f64)> {
    let einv = reference
        .edge_matrix()
        .inverse()
        .ok_or(Error::DegenerateElement { element: 0, det: 0.0 })?;
    let fp = k.edge_matrix() * einv;
    let value = (fp.transpose() * *m * fp).spectral_norm();
    let h = k.metric_diameter(m)?;
    let ht = reference.metric_diameter(&Mat::identity(k.dim))?;
    let rho = reference.in_diameter()?;
    Ok((h * h / (ht * ht), value, h * h / (rho * rho)))
}

/// Samples the equilateral-reference altitude bounds.
pub fn check_lemma_fk2(dim: usize, samples: usize, seed: u64) -> Result<LemmaReport> {
    if dim != 2 && dim != 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let triples = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(seed, i);
            let k = random_simplex(&mut rng, dim);
            let m = random_spd(&mut rng, dim);
            fk2_triple(&k, &m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LemmaReport::from_triples(dim, &triples))
}

/// Samples the diameter bounds with a random reference simplex per draw.
pub fn check_lemma_fk1(dim: usize, samples: usize, seed: u64) -> Result<LemmaReport> {
    if dim != 2 && dim != 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let triples = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(seed, i);
            let k = random_simplex(&mut rng, dim);
            let reference = random_simplex(&mut rng, dim);
            let m = random_spd(&mut rng, dim);
            fk1_triple(&k, &reference, &m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LemmaReport::from_triples(dim, &triples))
}

/// Inputs of the lower bounds on metric altitude and volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremInputs {
    pub dim: usize,
    pub q: f64,
    pub alpha_c: f64,
    pub beta_c: f64,
    pub m_hi: f64,
    pub rho_lo: f64,
    pub n_elements: usize,
    pub domain_volume: f64,
    pub initial_energy: f64,
    pub a_hat: f64,
    pub h_hat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremBounds {
    pub inputs: TheoremInputs,
    pub c1: f64,
    pub c2: f64,
    pub altitude_floor: f64,
    pub volume_floor: f64,
}

impl TheoremBounds {
    pub fn from_inputs(inputs: TheoremInputs) -> Result<Self> {
        let TheoremInputs { dim, q, alpha_c, beta_c, m_hi, rho_lo, n_elements, domain_volume, initial_energy, a_hat, h_hat } =
            inputs;
        let d = dim as f64;
        let gap = 2.0 * q - d;
        if !(gap > 0.0) || !(alpha_c > 0.0) {
            return Err(Error::NotCoercive);
        }
        let denom = factorial(dim) * h_hat.powf(2.0 * q) * (beta_c * domain_volume + initial_energy);
        if !(denom > 0.0) {
            return Err(Error::InvalidConfig("initial energy must be positive".into()));
        }
        let c1 = (alpha_c * a_hat.powf(2.0 * q) / denom).powf(1.0 / gap);
        let c2 = c1.powi(dim as i32) / factorial(dim);
        let n = n_elements as f64;
        let altitude_floor = c1 * rho_lo.powf(2.0 * q / gap) * m_hi.powf(-d / (2.0 * gap)) * n.powf(-2.0 * q / (d * gap));
        let volume_floor = c2
            * rho_lo.powf(2.0 * q * d / gap)
            * m_hi.powf(-d * d / (2.0 * gap) - d / 2.0)
            * n.powf(-2.0 * q / gap);
        Ok(TheoremBounds { inputs, c1, c2, altitude_floor, volume_floor })
    }
}

/// Floors for `problem`, with metric bounds sampled on its mesh and the
/// coercivity constants of its functional.
pub fn theorem_floors(problem: &MmpdeProblem, initial_energy: f64) -> Result<TheoremBounds> {
    let d = problem.dim();
    let bounds = estimate_bounds(&problem.metric, &problem.mesh)?;
    let (q, alpha_c, beta_c) = match problem.functional.coercivity_constants(d, &bounds) {
        Coercivity::Coercive { q, alpha, beta } => (q, alpha, beta),
        Coercivity::NotCoercive => return Err(Error::NotCoercive),
    };
    let r = reference_equilateral(d)?;
    let (rho_lo, _) = problem.comp.regularity()?;
    TheoremBounds::from_inputs(TheoremInputs {
        dim: d,
        q,
        alpha_c,
        beta_c,
        m_hi: bounds.hi,
        rho_lo,
        n_elements: problem.mesh.num_elements(),
        domain_volume: problem.mesh.domain_volume(),
        initial_energy,
        a_hat: r.altitude,
        h_hat: r.diameter,
    })
}

/// Angle thresholds (degrees) for counting poorly shaped tetrahedra.
pub const SMALL_DIHEDRAL_DEG: f64 = 20.0;
pub const LARGE_DIHEDRAL_DEG: f64 = 150.0;

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub dim: usize,
    pub num_elements: usize,
    pub min_volume: f64,
    pub max_volume: f64,
    pub min_metric_altitude: f64,
    /// Counts per bin over `[0°, 180°]` (3D only).
    pub dihedral_histogram: Vec<usize>,
    /// Dihedral angles below `SMALL_DIHEDRAL_DEG` (3D only).
    pub small_dihedral: usize,
    /// Dihedral angles above `LARGE_DIHEDRAL_DEG` (3D only).
    pub large_dihedral: usize,
    pub min_dihedral_deg: f64,
    pub max_dihedral_deg: f64,
    /// `σ_h = Σ_K |K| √det M_K`.
    pub sigma_h: f64,
    /// Extremes of `r_K = |K| √det M_K · N / σ_h`.
    pub equidistribution_min: f64,
    pub equidistribution_max: f64,
}

impl QualityReport {
    pub fn volume_ratio(&self) -> f64 {
        self.max_volume / self.min_volume
    }

    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim={}", self.dim);
        let _ = writeln!(s, "elements={}", self.num_elements);
        let _ = writeln!(s, "min_volume={:.9e}", self.min_volume);
        let _ = writeln!(s, "max_volume={:.9e}", self.max_volume);
        let _ = writeln!(s, "volume_ratio={:.9e}", self.volume_ratio());
        let _ = writeln!(s, "min_metric_altitude={:.9e}", self.min_metric_altitude);
        let _ = writeln!(s, "sigma_h={:.9e}", self.sigma_h);
        let _ = writeln!(s, "equidistribution_min={:.9e}", self.equidistribution_min);
        let _ = writeln!(s, "equidistribution_max={:.9e}", self.equidistribution_max);
        if self.dim == 3 {
            let _ = writeln!(s, "min_dihedral_deg={:.6}", self.min_dihedral_deg);
            let _ = writeln!(s, "max_dihedral_deg={:.6}", self.max_dihedral_deg);
            let _ = writeln!(s, "dihedral_below_20={}", self.small_dihedral);
            let _ = writeln!(s, "dihedral_above_150={}", self.large_dihedral);
            let hist: Vec<String> = self.dihedral_histogram.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(s, "dihedral_histogram={}", hist.join(","));
        }
        s
    }
}

pub fn quality_report(mesh: &SimplicialMesh, metric: &MetricField) -> Result<QualityReport> {
    quality_report_with_bins(mesh, metric, 18)
}

pub fn quality_report_with_bins(mesh: &SimplicialMesh, metric: &MetricField, bins: usize) -> Result<QualityReport> {
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    mesh.check_nonsingular()?;
    let n = mesh.num_elements();
    let per = (0..n)
        .into_par_iter()
        .map(|k| {
            let s = mesh.simplex(k);
            let m = element_metric(metric, mesh, k)?;
            let angles = if mesh.dim() == 3 { Some(s.dihedral_angles()?) } else { None };
            Ok((s.volume(), s.metric_min_altitude(&m)?, m.det().sqrt(), angles))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = QualityReport {
        dim: mesh.dim(),
        num_elements: n,
        min_volume: f64::INFINITY,
        max_volume: 0.0,
        min_metric_altitude: f64::INFINITY,
        dihedral_histogram: if mesh.dim() == 3 { vec![0; bins] } else { Vec::new() },
        small_dihedral: 0,
        large_dihedral: 0,
        min_dihedral_deg: f64::NAN,
        max_dihedral_deg: f64::NAN,
        sigma_h: 0.0,
        equidistribution_min: f64::INFINITY,
        equidistribution_max: 0.0,
    };
    let width = 180.0 / bins as f64;
    for (vol, alt, sdm, angles) in &per {
        r.min_volume = r.min_volume.min(*vol);
        r.max_volume = r.max_volume.max(*vol);
        r.min_metric_altitude = r.min_metric_altitude.min(*alt);
        r.sigma_h += vol * sdm;
        if let Some(a) = angles {
            for rad in a {
                let deg = rad.to_degrees();
                r.dihedral_histogram[((deg / width) as usize).min(bins - 1)] += 1;
                r.small_dihedral += usize::from(deg < SMALL_DIHEDRAL_DEG);
                r.large_dihedral += usize::from(deg > LARGE_DIHEDRAL_DEG);
                r.min_dihedral_deg = r.min_dihedral_deg.min(deg);
                r.max_dihedral_deg = r.max_dihedral_deg.max(deg);
            }
        }
    }
    for (vol, _, sdm, _) in &per {
        let rk = vol * sdm * n as f64 / r.sigma_h;
        r.equidistribution_min = r.equidistribution_min.min(rk);
        r.equidistribution_max = r.equidistribution_max.max(rk);
    }
    Ok(r)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyRow {
    pub n_elements: usize,
    /// Smallest element volume of the final mesh.
    pub k_min: f64,
    pub final_energy: f64,
    pub volume_floor: f64,
    /// Slope fitted through this and all previous rows (NaN for the first).
    pub slope_running: f64,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub slope: f64,
    pub runs: Vec<IntegrationResult>,
}

impl StudyResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,K_min,I_h_final,volume_floor,slope_running\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.n_elements, r.k_min, r.final_energy, r.volume_floor, r.slope_running
            );
        }
        s
    }
}

/// Runs `build(size)` for each size, integrates, and fits `|K|_min ∼ N^s`.
/// The floor column is NaN when the functional is not coercive.
pub fn scaling_study<F>(sizes: &[usize], build: F) -> Result<StudyResult>
where
    F: Fn(usize) -> Result<(MmpdeProblem, IntegratorConfig)>,
{
    if sizes.len() < 2 || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("study sizes must be increasing with at least two entries".into()));
    }
    let mut rows: Vec<StudyRow> = Vec::new();
    let mut runs = Vec::new();
    for &size in sizes {
        let (problem, config) = build(size)?;
        let result = integrate(&problem, &config)?;
        let initial = result.trace.rows[0].energy;
        let floor = match theorem_floors(&problem, initial) {
            Ok(b) => b.volume_floor,
            Err(Error::NotCoercive) => f64::NAN,
            Err(e) => return Err(e),
        };
        let k_min = result.mesh.volumes().into_iter().fold(f64::INFINITY, f64::min);
        let mut row = StudyRow {
            n_elements: problem.mesh.num_elements(),
            k_min,
            final_energy: result.trace.last().map_or(f64::NAN, |r| r.energy),
            volume_floor: floor,
            slope_running: f64::NAN,
        };
        if !rows.is_empty() {
            let xs: Vec<f64> = rows.iter().map(|r| r.n_elements as f64).chain([row.n_elements as f64]).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.k_min).chain([row.k_min]).collect();
            row.slope_running = loglog_slope(&xs, &ys);
        }
        rows.push(row);
        runs.push(result);
    }
    let slope = rows.last().map_or(f64::NAN, |r| r.slope_running);
    Ok(StudyResult { rows, slope, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::Functional;
    use crate::mesh::{box_mesh_3d, perturb_mesh, unit_square_mesh, BoundaryPolicy};
    use crate::reference::ComputationalMesh;

    #[test]
    fn fk2_identity_case() {
        for d in [2, 3] {
            let r = reference_equilateral(d).unwrap();
            let (lo, v, hi) = fk2_triple(&r.simplex(), &Mat::identity(d)).unwrap();
            assert!((lo - 1.0).abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
            assert!((hi - (d * d) as f64).abs() < 1e-11);
        }
    }

    #[test]
    fn fk1_identity_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [2, 3] {
            let k = random_simplex(&mut rng, d);
            let (lo, v, hi) = fk1_triple(&k, &k, &Mat::identity(d)).unwrap();
            assert!((lo - 1.0).abs() < 1e-12 && (v - 1.0).abs() < 1e-12 && hi >= 1.0);
        }
    }

    #[test]
    fn lemma_samples_have_no_violations() {
        for d in [2, 3] {
            let a = check_lemma_fk2(d, 2000, 7).unwrap();
            let b = check_lemma_fk1(d, 2000, 7).unwrap();
            assert_eq!((a.violations, b.violations), (0, 0), "{a:?} {b:?}");
            assert_eq!(a, check_lemma_fk2(d, 2000, 7).unwrap());
        }
    }

    #[test]
    fn random_simplex_respects_volume_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2, 3] {
            for _ in 0..200 {
                assert!(random_simplex(&mut rng, d).edge_matrix().det().abs() >= 1e-3 / factorial(d));
                let (lo, _) = random_spd(&mut rng, d).eigen_bounds();
                assert!(lo >= 1e-3 * (1.0 - 1e-9));
            }
        }
    }

    fn inputs(n: usize) -> TheoremInputs {
        let r = reference_equilateral(2).unwrap();
        TheoremInputs {
            dim: 2,
            q: 1.5,
            alpha_c: 1.0 / 3.0,
            beta_c: 0.0,
            m_hi: 4.0,
            rho_lo: r.in_diameter,
            n_elements: n,
            domain_volume: 1.0,
            initial_energy: 2.5,
            a_hat: r.altitude,
            h_hat: 1.0,
        }
    }

    #[test]
    fn constants_identity_and_n_scaling() {
        let a = TheoremBounds::from_inputs(inputs(100)).unwrap();
        assert!((a.c2 - a.c1 * a.c1 / 2.0).abs() <= 1e-15 * a.c2);
        assert!(a.altitude_floor > 0.0 && a.volume_floor > 0.0);
        let b = TheoremBounds::from_inputs(inputs(200)).unwrap();
        let expect = 2f64.powf(-2.0 * 1.5 / (3.0 - 2.0));
        assert!((b.volume_floor / a.volume_floor - expect).abs() < 1e-12);
        let bad = TheoremInputs { q: 1.0, ..inputs(100) };
        assert!(matches!(TheoremBounds::from_inputs(bad), Err(Error::NotCoercive)));
    }

    #[test]
    fn floors_from_problem() {
        let m = unit_square_mesh(4);
        let p = MmpdeProblem::with_master_copies(m.clone(), MetricField::identity(2), Functional::huang_default(), 1.0).unwrap();
        let i0 = p.discrete_functional().unwrap();
        let b = theorem_floors(&p, i0).unwrap();
        assert!(b.volume_floor > 0.0 && b.volume_floor < m.volumes()[0]);
        assert_eq!(b.inputs.m_hi, 1.0);
        let w = MmpdeProblem::with_master_copies(m, MetricField::identity(2), Functional::Winslow, 1.0).unwrap();
        assert!(matches!(theorem_floors(&w, i0), Err(Error::NotCoercive)));
    }

    #[test]
    fn regular_tetrahedron_angles() {
        let r = reference_equilateral(3).unwrap();
        let mesh = SimplicialMesh::new(3, r.vertices.to_vec(), vec![vec![0, 1, 2, 3]]).unwrap();
        let q = quality_report(&mesh, &MetricField::identity(3)).unwrap();
        let expect = (1.0f64 / 3.0).acos().to_degrees();
        assert!((q.min_dihedral_deg - expect).abs() < 1e-10 && (q.max_dihedral_deg - expect).abs() < 1e-10);
        assert_eq!(q.dihedral_histogram[7], 6);
        assert_eq!(q.dihedral_histogram.iter().sum::<usize>(), 6);
    }

    #[test]
    fn equidistribution_of_uniform_and_perturbed_meshes() {
        let mut m = unit_square_mesh(5);
        let q = quality_report(&m, &MetricField::identity(2)).unwrap();
        assert!((q.equidistribution_min - 1.0).abs() < 1e-12 && (q.equidistribution_max - 1.0).abs() < 1e-12);
        m.apply_box_policy(BoundaryPolicy::Fixed);
        let p = perturb_mesh(&m, 0.03, 1);
        let q = quality_report(&p, &MetricField::identity(2)).unwrap();
        assert!(q.equidistribution_max / q.equidistribution_min > 1.0);
        // partition of the domain
        assert!((q.sigma_h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_counts_six_per_tetrahedron() {
        let m = perturb_mesh(&box_mesh_3d(3, [0.0; 3], [1.0; 3]), 0.05, 2);
        let q = quality_report_with_bins(&m, &MetricField::identity(3), 36).unwrap();
        assert_eq!(q.dihedral_histogram.len(), 36);
        assert_eq!(q.dihedral_histogram.iter().sum::<usize>(), 6 * m.num_elements());
    }

    #[test]
    fn slope_fit() {
        let x = [128.0, 512.0, 2048.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.0)).collect();
        assert!((loglog_slope(&x, &y) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_study_has_slope_minus_one() {
        let study = scaling_study(&[4, 8], |n| {
            let mut m = unit_square_mesh(n);
            m.apply_box_policy(BoundaryPolicy::Fixed);
            let comp = ComputationalMesh::for_mesh(&m)?;
            let p = MmpdeProblem::new(m, comp, MetricField::identity(2), Functional::huang_default(), 1.0)?;
            Ok((p, IntegratorConfig { t_end: 0.1, ..Default::default() }))
        })
        .unwrap();
        assert!((study.slope + 1.0).abs() < 1e-9, "{}", study.slope);
        for r in &study.rows {
            assert!(r.k_min >= r.volume_floor);
        }
        assert!(study.to_csv().starts_with("N,K_min,I_h_final,volume_floor,slope_running\n"));
    }
}
