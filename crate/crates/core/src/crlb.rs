//! Cramér-Rao bound on 2-D location error from received reflected power.
//!
//! Footprint 1 is the monostatic transceiver; footprints 2..K are bistatic
//! transmitters whose echoes the same receiver collects. The bistatic powers
//! therefore depend on the monostatic distance `l_1` as well as their own
//! `l_k`, so the exact Jacobian carries a first column that the textbook
//! diagonal form drops. Both forms are available; results use the exact one.

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

use crate::error::CrlbError;
use crate::optics::delta_l;
use crate::scenario::{Footprints, Point2, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianForm {
    /// Full chain rule, including ∂f_k/∂l_1 for bistatic rows.
    Exact,
    /// Only ∂f_k/∂l_k on the diagonal.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerModel {
    pub delta_l: f64,
    pub eta: f64,
    pub m: f64,
    /// Footprint projections, monostatic first.
    pub tx: Vec<Point2>,
}

impl PowerModel {
    pub fn new(scn: &Scenario, footprints: &Footprints, rho: f64) -> Self {
        PowerModel {
            delta_l: delta_l(scn, rho),
            eta: scn.eta(),
            m: scn.m(),
            tx: footprints.all().into_iter().map(|k| scn.ap_xy(k)).collect(),
        }
    }

    /// Model for the footprints that observe `xy`, at the mean reflectivity.
    pub fn for_target(scn: &Scenario, xy: Point2) -> Self {
        PowerModel::new(scn, &scn.footprints(xy), scn.surfaces.target_mean)
    }

    pub fn k(&self) -> usize {
        self.tx.len()
    }

    pub fn pi_m(&self) -> f64 {
        (self.m + 7.0) * self.eta.powf(self.m + 3.0)
    }

    pub fn pi_b(&self) -> f64 {
        (self.m + 3.0) * self.eta.powf(self.m + 3.0)
    }

    fn sq_dists(&self, xy: Point2) -> Vec<f64> {
        self.tx.iter().map(|t| (xy - t).norm_squared()).collect()
    }

    /// Received powers f(l): monostatic entry first.
    pub fn power_vector(&self, xy: Point2) -> DVector<f64> {
        self.power_from_sq(&self.sq_dists(xy))
    }

    /// Received powers as a function of the planar distances `l` themselves.
    pub fn power_from_distances(&self, l: &[f64]) -> DVector<f64> {
        let s: Vec<f64> = l.iter().map(|v| v * v).collect();
        self.power_from_sq(&s)
    }

    fn power_from_sq(&self, s: &[f64]) -> DVector<f64> {
        let (m, e2) = (self.m, self.eta * self.eta);
        let num = self.delta_l * self.eta.powf(m + 3.0);
        let r1 = s[0] + e2;
        DVector::from_fn(self.k(), |k, _| {
            if k == 0 {
                num / r1.powf((m + 7.0) / 2.0)
            } else {
                num / (r1 * r1 * (s[k] + e2).powf((m + 3.0) / 2.0))
            }
        })
    }

    /// ∂f/∂lᵀ (K×K).
    pub fn jacobian_wrt_distance(&self, xy: Point2, form: JacobianForm) -> DMatrix<f64> {
        let s = self.sq_dists(xy);
        let l: Vec<f64> = s.iter().map(|v| v.sqrt()).collect();
        let (m, e2) = (self.m, self.eta * self.eta);
        let r1 = s[0] + e2;
        let f = self.power_vector(xy);
        let mut j = DMatrix::zeros(self.k(), self.k());
        j[(0, 0)] = -self.delta_l * self.pi_m() * l[0] / r1.powf((m + 9.0) / 2.0);
        for k in 1..self.k() {
            let rk = s[k] + e2;
            j[(k, k)] = -self.delta_l * self.pi_b() * l[k] / (r1 * r1 * rk.powf((m + 5.0) / 2.0));
            if form == JacobianForm::Exact {
                j[(k, 0)] = -4.0 * l[0] * f[k] / r1;
            }
        }
        j
    }

    /// ∂f/∂Xᵀ (K×2) by the chain rule through l².
    ///
    /// Working in l² avoids the 0/0 of ∂l/∂X directly beneath a footprint.
    pub fn jacobian_wrt_position(&self, xy: Point2, form: JacobianForm) -> DMatrix<f64> {
        let s = self.sq_dists(xy);
        let (m, e2) = (self.m, self.eta * self.eta);
        let r1 = s[0] + e2;
        let f = self.power_vector(xy);
        let d1 = xy - self.tx[0];
        let mut j = DMatrix::zeros(self.k(), 2);
        let g0 = -(m + 7.0) * f[0] / r1;
        j[(0, 0)] = g0 * d1.x;
        j[(0, 1)] = g0 * d1.y;
        for k in 1..self.k() {
            let dk = xy - self.tx[k];
            let own = -(m + 3.0) * f[k] / (s[k] + e2);
            let mut row = dk * own;
            if form == JacobianForm::Exact {
                row += d1 * (-4.0 * f[k] / r1);
            }
            j[(k, 0)] = row.x;
            j[(k, 1)] = row.y;
        }
        j
    }
}

/// Symmetric positive-definite covariance of the K power observations.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    q: DMatrix<f64>,
}

impl NoiseCovariance {
    pub fn new(q: DMatrix<f64>) -> Result<Self, CrlbError> {
        if !q.is_square() {
            return Err(CrlbError::Dimension("Q must be square".into()));
        }
        let scale = q.amax().max(f64::MIN_POSITIVE);
        if (&q - q.transpose()).amax() > 1e-12 * scale {
            return Err(CrlbError::CovarianceNotPd);
        }
        if q.clone().cholesky().is_none() {
            return Err(CrlbError::CovarianceNotPd);
        }
        Ok(NoiseCovariance { q })
    }

    /// Diagonal receiver noise σ² plus a common ambient term c·σ² shared by
    /// every pair of bistatic footprints.
    pub fn calibrated(scn: &Scenario, k: usize) -> Self {
        let s2 = scn.crlb.sigma_w * scn.crlb.sigma_w;
        let c = scn.crlb.bistatic_correlation;
        let q = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                s2
            } else if i > 0 && j > 0 {
                c * s2
            } else {
                0.0
            }
        });
        NoiseCovariance::new(q).expect("calibrated covariance is positive definite")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn scaled(&self, factor: f64) -> Self {
        NoiseCovariance { q: &self.q * factor }
    }

    /// Keep only the listed observations.
    pub fn select(&self, idx: &[usize]) -> Self {
        NoiseCovariance { q: DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.q[(idx[i], idx[j])]) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbResult {
    pub fisher: Matrix2<f64>,
    pub bound: Matrix2<f64>,
    /// sqrt(trace(bound)) in metres.
    pub b_l: f64,
}

/// Fisher information JᵀQ⁻¹J from a position Jacobian.
pub fn fisher_information(j: &DMatrix<f64>, q: &NoiseCovariance) -> Result<Matrix2<f64>, CrlbError> {
    if j.ncols() != 2 || j.nrows() != q.q.nrows() {
        return Err(CrlbError::Dimension(format!("J is {}x{}, Q is {}", j.nrows(), j.ncols(), q.q.nrows())));
    }
    let chol = q.q.clone().cholesky().ok_or(CrlbError::CovarianceNotPd)?;
    let qinv_j = chol.solve(j);
    let f = j.transpose() * qinv_j;
    let sym = (f[(0, 1)] + f[(1, 0)]) / 2.0;
    Ok(Matrix2::new(f[(0, 0)], sym, sym, f[(1, 1)]))
}

pub fn bound_from_fisher(fisher: Matrix2<f64>) -> Result<CrlbResult, CrlbError> {
    let det = fisher.determinant();
    let scale = fisher[(0, 0)] * fisher[(1, 1)];
    if !(det > 1e-12 * scale) || !(scale > 0.0) {
        return Err(CrlbError::SingularFisher);
    }
    let bound = fisher.try_inverse().ok_or(CrlbError::SingularFisher)?;
    let bound = (bound + bound.transpose()) / 2.0;
    Ok(CrlbResult { fisher, bound, b_l: bound.trace().sqrt() })
}

pub fn crlb_at(model: &PowerModel, q: &NoiseCovariance, xy: Point2) -> Result<CrlbResult, CrlbError> {
    let j = model.jacobian_wrt_position(xy, JacobianForm::Exact);
    bound_from_fisher(fisher_information(&j, q)?)
}

/// Bound at `xy` with the scenario's own footprint choice and calibrated Q.
pub fn crlb_for(scn: &Scenario, xy: Point2) -> Result<CrlbResult, CrlbError> {
    let model = PowerModel::for_target(scn, xy);
    crlb_at(&model, &NoiseCovariance::calibrated(scn, model.k()), xy)
}

/// Bound at `xy` when AP `mono` acts as the monostatic receiver.
pub fn crlb_with_mono(scn: &Scenario, xy: Point2, mono: usize) -> Result<CrlbResult, CrlbError> {
    let fp = scn.footprints_with_mono(xy, mono);
    let model = PowerModel::new(scn, &fp, scn.surfaces.target_mean);
    crlb_at(&model, &NoiseCovariance::calibrated(scn, model.k()), xy)
}

/// Bound at every grid point, in grid order.
pub fn crlb_map(scn: &Scenario, grid: &[Point2]) -> Result<Vec<CrlbResult>, CrlbError> {
    grid.par_iter().map(|&xy| crlb_for(scn, xy)).collect()
}

/// Empirical CDF as sorted (value, fraction ≤ value) pairs.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect()
}

/// Percentile by linear interpolation between order statistics (p in [0, 100]).
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_at_footprint_center() {
        let scn = Scenario::table1();
        let xy = Point2::new(1.0, 1.0);
        let model = PowerModel::for_target(&scn, xy);
        let f = model.power_vector(xy);
        let expect = model.delta_l / model.eta.powi(4);
        assert!((f[0] - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn first_row_vanishes_beneath_transceiver() {
        let scn = Scenario::table1();
        let xy = Point2::new(3.0, 5.0);
        let model = PowerModel::for_target(&scn, xy);
        let j = model.jacobian_wrt_position(xy, JacobianForm::Exact);
        assert_eq!(j[(0, 0)], 0.0);
        assert_eq!(j[(0, 1)], 0.0);
        let jl = model.jacobian_wrt_distance(xy, JacobianForm::Exact);
        assert_eq!(jl[(0, 0)], 0.0);
    }

    #[test]
    fn diagonal_form_has_no_coupling() {
        let scn = Scenario::table1();
        let xy = Point2::new(1.6, 2.2);
        let model = PowerModel::for_target(&scn, xy);
        let d = model.jacobian_wrt_distance(xy, JacobianForm::Diagonal);
        let e = model.jacobian_wrt_distance(xy, JacobianForm::Exact);
        for i in 0..model.k() {
            for j in 0..model.k() {
                if i != j {
                    assert_eq!(d[(i, j)], 0.0);
                }
            }
            assert_eq!(d[(i, i)], e[(i, i)]);
            assert!(d[(i, i)] < 0.0);
        }
        assert!(e[(1, 0)] < 0.0);
    }

    #[test]
    fn singular_fisher_detected() {
        // a single observation cannot pin down two coordinates
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let q = NoiseCovariance::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let f = fisher_information(&j, &q).unwrap();
        assert_eq!(bound_from_fisher(f), Err(CrlbError::SingularFisher));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(NoiseCovariance::new(q), Err(CrlbError::CovarianceNotPd));
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 4.0);
        assert!((percentile(&v, 50.0) - 2.5).abs() < 1e-12);
    }
}
