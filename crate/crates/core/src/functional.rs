//! Meshing functional integrands `G(J, det J, M, x)` and their derivatives.
//!
//! Matrix-valued derivatives use the scalar-by-matrix layout
//! `(∂G/∂J)_{ij} = ∂G/∂J_{ji}`, so that `dG = tr(∂G/∂J · dJ)`.

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector, ZERO};
use crate::mesh::spd_inverse;
use crate::metric::MetricBounds;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Functional {
    /// `G = tr(J M⁻¹ Jᵀ)`
    Winslow,
    /// `G = θ √det M tr(J M⁻¹ Jᵀ)^{dp/2} + (1 − 2θ) d^{dp/2} √det M (det J / √det M)^p`
    Huang { p: f64, theta: f64 },
}

impl Functional {
    /// Huang's functional. `p ≥ 1` keeps `∂G/∂det J` bounded at `det J = 0`;
    /// smaller `p > 0` is accepted only for `θ = 1/2`, where that term vanishes.
    pub fn huang(p: f64, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidFunctional(format!("theta must lie in [0, 1], got {theta}")));
        }
        let min_p_ok = if theta == 0.5 { p > 0.0 } else { p >= 1.0 };
        if !min_p_ok || !p.is_finite() {
            return Err(Error::InvalidFunctional(format!(
                "Huang functional needs p >= 1 (or p > 0 with theta = 1/2), got p = {p}"
            )));
        }
        Ok(Functional::Huang { p, theta })
    }

    /// The setting used for all builtin scenarios: `p = 3/2`, `θ = 1/3`.
    pub fn huang_default() -> Self {
        Functional::Huang { p: 1.5, theta: 1.0 / 3.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Functional::Winslow => "winslow",
            Functional::Huang { .. } => "huang",
        }
    }

    /// Evaluates `G` and its derivatives. `det_j` is passed separately from `j`
    /// and is not checked against it.
    pub fn eval_g(&self, j: &Mat, det_j: f64, m: &Mat, _x: &Vector) -> Result<GDerivatives> {
        let minv = spd_inverse(m)?;
        Ok(self.eval_with_inverse(j, det_j, &minv, m.det()))
    }

    /// As [`eval_g`](Self::eval_g) with `M⁻¹` and `det M` supplied by the caller.
    pub(crate) fn eval_with_inverse(&self, j: &Mat, det_j: f64, minv: &Mat, det_m: f64) -> GDerivatives {
        let d = j.dim();
        let minv_jt = *minv * j.transpose();
        let tr = j.trace_of_product(&minv_jt);
        // M⁻¹ Jᵀ J M⁻¹
        let mjjm = minv_jt * minv_jt.transpose();
        match *self {
            Functional::Winslow => GDerivatives {
                g: tr,
                dg_dj: minv_jt.scaled(2.0),
                dg_ddet: 0.0,
                dg_dm: -mjjm,
                dg_dx: ZERO,
            },
            Functional::Huang { p, theta } => {
                let df = d as f64;
                let q = df * p / 2.0;
                let sdm = det_m.sqrt();
                let tr_q1 = tr.powf(q - 1.0);
                let tr_q = tr_q1 * tr;
                let dq = df.powf(q);
                let w = 1.0 - 2.0 * theta;
                // the equidistribution term drops out entirely at θ = 1/2
                let (ratio_p, dg_ddet) = if w == 0.0 {
                    (0.0, 0.0)
                } else {
                    (
                        (det_j / sdm).powf(p),
                        p * w * dq * det_m.powf((1.0 - p) / 2.0) * det_j.powf(p - 1.0),
                    )
                };
                let g = theta * sdm * tr_q + w * dq * sdm * ratio_p;
                let dg_dj = minv_jt.scaled(df * p * theta * sdm * tr_q1);
                let dg_dm = mjjm.scaled(-theta * df * p / 2.0 * sdm * tr_q1)
                    + minv.scaled(theta / 2.0 * sdm * tr_q + w * (1.0 - p) * dq / 2.0 * sdm * ratio_p);
                GDerivatives { g, dg_dj, dg_ddet, dg_dm, dg_dx: ZERO }
            }
        }
    }

    /// Balance function making the gradient flow invariant under `M → cM`.
    pub fn balance_p(&self, m: &Mat) -> f64 {
        self.balance_from_det(m.det(), m.dim())
    }

    pub(crate) fn balance_from_det(&self, det_m: f64, d: usize) -> f64 {
        match *self {
            Functional::Winslow => det_m.powf(1.0 / d as f64),
            Functional::Huang { p, .. } => det_m.powf((p - 1.0) / 2.0),
        }
    }

    /// Constants of a lower bound `G ≥ α tr(J M⁻¹ Jᵀ)^q − β` with `q > d/2`.
    ///
    /// For Huang's functional with `p > 1` and `0 < θ < 1`, the AM–GM bound
    /// `d^{q} (det J/√det M)^p ≤ tr(J M⁻¹ Jᵀ)^q` gives
    /// `α = min(θ, 1 − θ) m_lo^{d/2}` with `β = 0` (for `θ ≤ 1/2` the second
    /// term is simply nonnegative).
    pub fn coercivity_constants(&self, dim: usize, bounds: &MetricBounds) -> Coercivity {
        match *self {
            Functional::Winslow => Coercivity::NotCoercive,
            Functional::Huang { p, theta } => {
                let q = dim as f64 * p / 2.0;
                let weight = theta.min(1.0 - theta);
                if q <= dim as f64 / 2.0 || weight <= 0.0 {
                    return Coercivity::NotCoercive;
                }
                Coercivity::Coercive {
                    q,
                    alpha: weight * bounds.lo.powf(dim as f64 / 2.0),
                    beta: 0.0,
                }
            }
        }
    }
}

/// `G` and its partial derivatives at one evaluation point.
#[derive(Clone, Copy, Debug)]
pub struct GDerivatives {
    pub g: f64,
    pub dg_dj: Mat,
    pub dg_ddet: f64,
    pub dg_dm: Mat,
    pub dg_dx: Vector,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coercivity {
    Coercive { q: f64, alpha: f64, beta: f64 },
    NotCoercive,
}
