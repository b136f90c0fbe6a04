//! Linear swarm model and controllability rank.
//!
//! Each robot is a unicycle whose pivot-walk speed is scaled by its span ratio
//! `nu_i = P_i / L_r`. The drift matrix is zero, so the controllability matrix is
//! the input matrix followed by zero blocks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllabilityError {
    #[error("swarm must contain at least one robot")]
    EmptySwarm,
    #[error("span ratio {value} of robot {index} is outside (0, 1]")]
    RatioOutOfRange { index: usize, value: f64 },
    #[error("matrix contains non-finite entries")]
    NonFiniteEntries,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("speed constants must be positive")]
    NonPositiveSpeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnicycleParams {
    pub pivot_gain: f64,
    pub tumble_gain: f64,
    /// Motion heading in radians.
    pub heading: f64,
}

impl UnicycleParams {
    pub fn new(pivot_gain: f64, tumble_gain: f64, heading: f64) -> Result<Self, ControllabilityError> {
        if !(pivot_gain > 0.0 && tumble_gain > 0.0) {
            return Err(ControllabilityError::NonPositiveSpeed);
        }
        Ok(Self {
            pivot_gain,
            tumble_gain,
            heading,
        })
    }

    /// Input vector `[Kp Lr sin t, Kp Lr cos t, Kt Lr sin t, Kt Lr cos t]` for a
    /// reference body length `Lr`.
    pub fn input_vector(&self, reference_length: f64) -> DVector<f64> {
        let (s, c) = self.heading.sin_cos();
        let p = self.pivot_gain * reference_length;
        let t = self.tumble_gain * reference_length;
        DVector::from_vec(vec![p * s, p * c, t * s, t * c])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwarmSystem {
    ratios: Vec<f64>,
}

impl SwarmSystem {
    pub fn new(ratios: Vec<f64>) -> Result<Self, ControllabilityError> {
        if ratios.is_empty() {
            return Err(ControllabilityError::EmptySwarm);
        }
        for (index, &value) in ratios.iter().enumerate() {
            if !value.is_finite() {
                return Err(ControllabilityError::NonFiniteEntries);
            }
            if !(value > 0.0 && value <= 1.0) {
                return Err(ControllabilityError::RatioOutOfRange { index, value });
            }
        }
        Ok(Self { ratios })
    }

    /// Builds the ratios from pivot spans and one reference body length.
    pub fn from_spans(spans: &[f64], reference_length: f64) -> Result<Self, ControllabilityError> {
        Self::new(spans.iter().map(|p| p / reference_length).collect())
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn len(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratios.is_empty()
    }

    pub fn state_matrix(&self) -> DMatrix<f64> {
        let n = 2 * self.len();
        DMatrix::zeros(n, n)
    }
}

/// Stacks `[[0, nu, -1, 0], [nu, 0, 0, 1]]` for every robot.
pub fn build_input_matrix(system: &SwarmSystem) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(2 * system.len(), 4);
    for (i, &nu) in system.ratios().iter().enumerate() {
        b[(2 * i, 1)] = nu;
        b[(2 * i, 2)] = -1.0;
        b[(2 * i + 1, 0)] = nu;
        b[(2 * i + 1, 3)] = 1.0;
    }
    b
}

/// `[B, AB, A^2 B, ..., A^(n-1) B]` for an `n x n` state matrix.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, ControllabilityError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(ControllabilityError::DimensionMismatch(format!(
            "state matrix is {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != n {
        return Err(ControllabilityError::DimensionMismatch(format!(
            "input matrix has {} rows, state has {}",
            b.nrows(),
            n
        )));
    }
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        out.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    Ok(out)
}

pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// Number of singular values above `tolerance` times the largest one.
pub fn numeric_rank(m: &DMatrix<f64>, tolerance: f64) -> Result<usize, ControllabilityError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ControllabilityError::NonFiniteEntries);
    }
    if m.is_empty() {
        return Ok(0);
    }
    let singular = m.singular_values();
    let largest = singular.max();
    if largest == 0.0 {
        return Ok(0);
    }
    Ok(singular.iter().filter(|&&s| s > tolerance * largest).count())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub robots: usize,
    pub rank: usize,
    pub warnings: Vec<String>,
}

/// Ratios closer than this are treated as the same robot.
pub const RATIO_EQUALITY_THRESHOLD: f64 = 1e-8;

pub fn controllable_dof(system: &SwarmSystem) -> Result<usize, ControllabilityError> {
    Ok(controllability_report(system)?.rank)
}

pub fn controllability_report(system: &SwarmSystem) -> Result<RankReport, ControllabilityError> {
    let c = controllability_matrix(&system.state_matrix(), &build_input_matrix(system))?;
    let mut rank = numeric_rank(&c, DEFAULT_RANK_TOLERANCE)?;
    let mut warnings = Vec::new();
    let ratios = system.ratios();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if ratios.len() > 1 && hi - lo < RATIO_EQUALITY_THRESHOLD {
        if hi > lo {
            warnings.push(format!(
                "span ratios differ by only {:.3e}; robots are indistinguishable",
                hi - lo
            ));
        }
        rank = rank.min(2);
    }
    Ok(RankReport {
        robots: ratios.len(),
        rank,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_robot_block() {
        let b = build_input_matrix(&SwarmSystem::new(vec![0.5]).unwrap());
        assert_eq!(
            b,
            DMatrix::from_row_slice(2, 4, &[0.0, 0.5, -1.0, 0.0, 0.5, 0.0, 0.0, 1.0])
        );
    }

    #[test]
    fn duplicated_ratios_duplicate_rows() {
        let b = build_input_matrix(&SwarmSystem::new(vec![0.4, 0.4]).unwrap());
        assert_eq!(b.rows(0, 2), b.rows(2, 2));
    }

    #[test]
    fn krylov_tail_is_zero() {
        let sys = SwarmSystem::new(vec![0.3, 0.9]).unwrap();
        let c = controllability_matrix(&sys.state_matrix(), &build_input_matrix(&sys)).unwrap();
        assert_eq!(c.shape(), (4, 16));
        assert!(c.columns(4, 12).iter().all(|&v| v == 0.0));
        let one = SwarmSystem::new(vec![0.7]).unwrap();
        let c1 = controllability_matrix(&one.state_matrix(), &build_input_matrix(&one)).unwrap();
        assert_eq!(c1.shape(), (2, 8));
    }

    #[test]
    fn dimension_checks() {
        let a = DMatrix::zeros(3, 4);
        let b = DMatrix::zeros(3, 4);
        assert!(matches!(
            controllability_matrix(&a, &b),
            Err(ControllabilityError::DimensionMismatch(_))
        ));
        let a = DMatrix::zeros(4, 4);
        assert!(matches!(
            controllability_matrix(&a, &b),
            Err(ControllabilityError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rank_basics() {
        assert_eq!(numeric_rank(&DMatrix::zeros(3, 3), DEFAULT_RANK_TOLERANCE).unwrap(), 0);
        assert_eq!(
            numeric_rank(&DMatrix::identity(4, 4), DEFAULT_RANK_TOLERANCE).unwrap(),
            4
        );
        let mut bad = DMatrix::identity(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert_eq!(numeric_rank(&bad, 1e-10), Err(ControllabilityError::NonFiniteEntries));
    }

    #[test]
    fn near_equal_ratios_warn() {
        let report = controllability_report(&SwarmSystem::new(vec![0.5, 0.5 + 1e-10]).unwrap()).unwrap();
        assert_eq!(report.rank, 2);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn ratio_validation() {
        assert_eq!(SwarmSystem::new(vec![]), Err(ControllabilityError::EmptySwarm));
        assert!(matches!(
            SwarmSystem::new(vec![0.5, 1.2]),
            Err(ControllabilityError::RatioOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn input_vector_drives_unicycle() {
        // B * u for one robot gives the pivot and tumble velocity components.
        let params = UnicycleParams::new(2.0, 3.0, 0.4).unwrap();
        let sys = SwarmSystem::new(vec![0.6]).unwrap();
        let v = build_input_matrix(&sys) * params.input_vector(10.0);
        let (s, c) = 0.4f64.sin_cos();
        assert!((v[0] - (0.6 * 20.0 * c - 30.0 * s)).abs() < 1e-12);
        assert!((v[1] - (0.6 * 20.0 * s + 30.0 * c)).abs() < 1e-12);
    }
}
