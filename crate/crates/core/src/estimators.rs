//! Defeaturing error estimators for Dirichlet-Dirichlet, Dirichlet-Neumann
//! and internal features.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::BoundaryTrace;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("s = diam/(2 dist) = {0} must lie in (0, 1)")]
    FeatureTooClose(f64),
    #[error("unsupported dimension {0}")]
    Dimension(u32),
    #[error("internal features need a closed boundary trace")]
    OpenTrace,
    #[error("effectivity needs a positive error, got {0}")]
    NonPositiveError(f64),
    #[error("estimate {0} is negative or not finite")]
    InvalidEstimate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureCase {
    DirichletDirichlet,
    DirichletNeumann,
    Internal,
}

impl fmt::Display for FeatureCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureCase::DirichletDirichlet => "DD",
            FeatureCase::DirichletNeumann => "DN",
            FeatureCase::Internal => "internal",
        })
    }
}

/// sqrt(‖a‖ ‖∇_t d‖) with `a` the (possibly centered) trace.
fn product_root(a: &BoundaryTrace, d: &BoundaryTrace) -> f64 {
    (a.l2_norm() * d.tangential_gradient_l2()).sqrt()
}

/// sqrt(2 ‖d‖ ‖∇_t d‖).
pub fn estimator_dd(d: &BoundaryTrace) -> f64 {
    if d.is_constant() && d.values().next().is_some_and(|&v| v != 0.0) {
        log::warn!("constant nonzero boundary error on a DD feature; the estimate is zero");
    }
    2f64.sqrt() * product_root(d, d)
}

/// |γ|^{(n−2)/(2(n−1))} for the average part of the DN estimator.
pub fn dn_prefactor(length: f64, n: u32) -> f64 {
    let n = n as f64;
    length.powf((n - 2.0) / (2.0 * (n - 1.0)))
}

/// (average, non-average) parts of the DN estimator in two dimensions.
pub fn dn_components(d: &BoundaryTrace) -> (f64, f64) {
    let avg = d.average();
    let centered = d.minus_average();
    (
        dn_prefactor(d.length(), 2) * avg.abs(),
        2f64.sqrt() * product_root(&centered, d),
    )
}

pub fn estimator_dn(d: &BoundaryTrace) -> f64 {
    let (a, b) = dn_components(d);
    a + b
}

/// Constant bounding the natural norm of 1 on an internal feature boundary.
pub fn c_bar(diam: f64, dist: f64, n: u32) -> Result<f64, EstimatorError> {
    let s = diam / (2.0 * dist);
    if !(s > 0.0 && s < 1.0) {
        return Err(EstimatorError::FeatureTooClose(s));
    }
    match n {
        2 => Ok((2.0 * std::f64::consts::PI / s.ln().abs()).sqrt()),
        3 => Ok((2.0 * std::f64::consts::PI * diam / (1.0 - s)).sqrt()),
        _ => Err(EstimatorError::Dimension(n)),
    }
}

/// (average, non-average) parts of the internal estimator.
pub fn internal_components(d: &BoundaryTrace, c_bar: f64) -> Result<(f64, f64), EstimatorError> {
    if !d.is_closed() {
        return Err(EstimatorError::OpenTrace);
    }
    let centered = d.minus_average();
    Ok((c_bar * d.average().abs(), 2.0 * product_root(&centered, d)))
}

pub fn estimator_internal(d: &BoundaryTrace, c_bar: f64) -> Result<f64, EstimatorError> {
    internal_components(d, c_bar).map(|(a, b)| a + b)
}

/// Combined estimate for several features.
pub fn aggregate(estimates: &[f64]) -> f64 {
    estimates.iter().map(|e| e * e).sum::<f64>().sqrt()
}

pub fn effectivity(estimate: f64, error: f64) -> Result<f64, EstimatorError> {
    if !(error > 0.0) {
        return Err(EstimatorError::NonPositiveError(error));
    }
    Ok(estimate / error)
}

/// Estimator value with its parts and, once known, the true error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub feature_id: String,
    pub case: FeatureCase,
    /// |γ|
    pub size: f64,
    pub diam: f64,
    /// dist(m_F, Γ), internal features only.
    pub dist: Option<f64>,
    pub c_bar: Option<f64>,
    pub component_avg: f64,
    pub component_navg: f64,
    pub estimate: f64,
    pub error: Option<f64>,
    pub effectivity: Option<f64>,
}

impl EstimatorReport {
    fn from_parts(
        feature_id: &str,
        case: FeatureCase,
        d: &BoundaryTrace,
        (avg, navg): (f64, f64),
    ) -> Self {
        EstimatorReport {
            feature_id: feature_id.to_string(),
            case,
            size: d.length(),
            diam: d.diameter(),
            dist: None,
            c_bar: None,
            component_avg: avg,
            component_navg: navg,
            estimate: avg + navg,
            error: None,
            effectivity: None,
        }
    }

    pub fn dd(feature_id: &str, d: &BoundaryTrace) -> Self {
        Self::from_parts(feature_id, FeatureCase::DirichletDirichlet, d, (0.0, estimator_dd(d)))
    }

    pub fn dn(feature_id: &str, d: &BoundaryTrace) -> Self {
        Self::from_parts(feature_id, FeatureCase::DirichletNeumann, d, dn_components(d))
    }

    /// `dist` is the distance from the feature barycenter to the remaining
    /// boundary (and any other feature).
    pub fn internal(feature_id: &str, d: &BoundaryTrace, dist: f64) -> Result<Self, EstimatorError> {
        let c = c_bar(d.diameter(), dist, 2)?;
        let mut report = Self::from_parts(feature_id, FeatureCase::Internal, d, internal_components(d, c)?);
        report.dist = Some(dist);
        report.c_bar = Some(c);
        Ok(report)
    }

    pub fn with_error(mut self, error: f64) -> Result<Self, EstimatorError> {
        if !(self.estimate >= 0.0 && self.estimate.is_finite()) {
            return Err(EstimatorError::InvalidEstimate(self.estimate));
        }
        self.effectivity = Some(effectivity(self.estimate, error)?);
        self.error = Some(error);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::mesh::Point;

    fn straight(n: usize, f: impl Fn(f64) -> f64) -> BoundaryTrace {
        let (points, values) = (0..=n)
            .map(|k| {
                let s = k as f64 / n as f64;
                (Point::new(s, 0.0), f(s))
            })
            .unzip();
        BoundaryTrace::polyline(points, values, false).unwrap()
    }

    #[test]
    fn zero_and_constant_traces() {
        assert_eq!(estimator_dd(&straight(4, |_| 0.0)), 0.0);
        assert_eq!(estimator_dd(&straight(4, |_| 3.0)), 0.0);
        assert!((estimator_dn(&straight(4, |_| -2.5)) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn c_bar_values() {
        // sqrt(2π / |ln 0.2|)
        assert!((c_bar(0.2, 0.5, 2).unwrap() - 1.975_844_764).abs() < 1e-8);
        assert!(matches!(c_bar(1.0, 0.5, 2), Err(EstimatorError::FeatureTooClose(_))));
        let mut prev = f64::INFINITY;
        for diam in [0.5, 0.1, 0.01, 1e-4] {
            let c = c_bar(diam, 0.5, 2).unwrap();
            assert!(c < prev);
            prev = c;
        }
        assert!(c_bar(0.2, 0.5, 3).unwrap() > 0.0);
        assert!(matches!(c_bar(0.2, 0.5, 4), Err(EstimatorError::Dimension(4))));
    }

    #[test]
    fn internal_needs_closed_trace() {
        assert_eq!(
            estimator_internal(&straight(3, |s| s), 1.0),
            Err(EstimatorError::OpenTrace)
        );
    }

    #[test]
    fn internal_constant_trace() {
        let (points, values) = (0..16)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / 16.0;
                (Point::new(th.cos(), th.sin()), 0.7)
            })
            .unzip();
        let d = BoundaryTrace::polyline(points, values, true).unwrap();
        let c = 1.97578;
        assert!((estimator_internal(&d, c).unwrap() - c * 0.7).abs() < 1e-12);
    }

    #[test]
    fn aggregate_and_effectivity() {
        assert_eq!(aggregate(&[3.0, 4.0]), 5.0);
        assert_eq!(aggregate(&[4.0, 3.0]), 5.0);
        assert_eq!(aggregate(&[2.5]), 2.5);
        assert_eq!(effectivity(2.0, 1.0), Ok(2.0));
        assert_eq!(effectivity(0.0, 1.0), Ok(0.0));
        assert!(matches!(effectivity(1.0, 0.0), Err(EstimatorError::NonPositiveError(_))));
    }

    #[test]
    fn report_components_sum_to_estimate() {
        let d = straight(16, |s| 1.0 + (2.0 * PI * s).sin());
        let r = EstimatorReport::dn("f", &d).with_error(2.0).unwrap();
        assert_eq!(r.estimate, r.component_avg + r.component_navg);
        assert_eq!(r.effectivity, Some(r.estimate / 2.0));
    }
}
