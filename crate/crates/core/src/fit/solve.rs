//! Weighted least squares over bin integrals and error-band propagation.

use nalgebra::{DMatrix, DVector};

use super::basis::SplineBasis;
use super::FitError;
use crate::hierarchy::BinHierarchy;
use crate::spline::{BhmSpline, SplinePiece};

/// A bin integral entering the objective with weight `2^-level / error^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitBin {
    pub x_lo: f64,
    pub x_hi: f64,
    pub level: u32,
    pub integral: f64,
    pub error: f64,
}

impl FitBin {
    fn sqrt_weight(&self) -> f64 {
        (0.5f64).powi(self.level as i32).sqrt() / self.error
    }
}

/// Solution of one least-squares problem in B-spline weights.
pub(crate) struct LinearFit {
    pub basis: SplineBasis,
    pub theta: Vec<f64>,
    /// `(M^T M)^-1` including any penalty rows.
    pub bread: DMatrix<f64>,
    /// Unweighted integral rows, one per fitted bin.
    pub rows: Vec<f64>,
}

const RANK_TOLERANCE: f64 = 1e-11;

pub(crate) fn solve(
    basis: SplineBasis,
    bins: &[FitBin],
    jump_penalty: f64,
) -> Result<LinearFit, FitError> {
    let q = basis.dim();
    let knots = basis.pieces.len() - 1;
    let penalty_rows = if jump_penalty > 0.0 { knots } else { 0 };
    let n_rows = bins.len() + penalty_rows;
    if n_rows < q {
        return Err(FitError::SingularSystem);
    }

    let mut rows = vec![0.0; bins.len() * q];
    let mut design = DMatrix::<f64>::zeros(n_rows, q);
    let mut target = DVector::<f64>::zeros(n_rows);
    for (i, bin) in bins.iter().enumerate() {
        let row = &mut rows[i * q..(i + 1) * q];
        basis.add_integral_row(bin.x_lo, bin.x_hi, 1.0, row);
        let w = bin.sqrt_weight();
        for (j, &a) in row.iter().enumerate() {
            design[(i, j)] = w * a;
        }
        target[i] = w * bin.integral;
    }
    if penalty_rows > 0 {
        let scale = jump_penalty.sqrt();
        let mut row = vec![0.0; q];
        for p in 0..knots {
            row.iter_mut().for_each(|v| *v = 0.0);
            basis.add_jump_row(p, scale, &mut row);
            for (j, &a) in row.iter().enumerate() {
                design[(bins.len() + p, j)] = a;
            }
        }
    }

    let qr = design.qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(diag_max > 0.0)
        || r
            .diagonal()
            .iter()
            .any(|v| !(v.abs() > RANK_TOLERANCE * diag_max))
    {
        return Err(FitError::SingularSystem);
    }
    qr.q_tr_mul(&mut target);
    let qty = target.rows(0, q).into_owned();
    let theta = r
        .solve_upper_triangular(&qty)
        .ok_or(FitError::SingularSystem)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(q, q))
        .ok_or(FitError::SingularSystem)?;
    let bread = &r_inv * r_inv.transpose();

    Ok(LinearFit {
        basis,
        theta: theta.as_slice().to_vec(),
        bread,
        rows,
    })
}

/// Covariance of the basis weights when the bins are mutually independent.
pub(crate) fn independent_covariance(fit: &LinearFit, bins: &[FitBin]) -> DMatrix<f64> {
    let q = fit.basis.dim();
    let mut meat = DMatrix::<f64>::zeros(q, q);
    for (i, bin) in bins.iter().enumerate() {
        let w2 = bin.sqrt_weight().powi(2);
        let g = DVector::from_iterator(q, fit.rows[i * q..(i + 1) * q].iter().map(|a| w2 * a));
        meat += (&g * g.transpose()) * (bin.error * bin.error);
    }
    &fit.bread * meat * &fit.bread
}

/// Covariance of the basis weights for bins taken from a hierarchy.
///
/// Bins on different levels share samples, and disjoint bins are
/// correlated through the common total `N`. The estimator is linear in the
/// integrals of the finest used level, `theta = bread * sum_b g_b I_b`, so
/// the sample covariance of those integrals (`sum_b S_b g_b g_b^T - N v v^T`
/// over `N (N - 1)`, with `S_b` the sum of squared weights in `b` and
/// `v = sum_b I_b g_b`) propagates exactly.
///
/// `bins` must list the usable bins of `hier` coarse to fine, as produced by
/// [`BinHierarchy::usable_bins`].
pub(crate) fn hierarchy_covariance(
    fit: &LinearFit,
    bins: &[FitBin],
    hier: &BinHierarchy,
) -> DMatrix<f64> {
    let q = fit.basis.dim();
    let mut fitted = bins.iter().zip(fit.rows.chunks_exact(q));
    let mut current: Vec<Vec<f64>> = vec![vec![0.0; q]];
    for n in hier.used_levels() {
        let level = hier.level(n);
        let mut next: Vec<Vec<f64>> = level
            .iter()
            .map(|b| current[if n == 0 { 0 } else { b.index / 2 }].clone())
            .collect();
        for (b, g) in level.iter().zip(next.iter_mut()) {
            if !b.usable {
                continue;
            }
            let (bin, row) = fitted.next().expect("one fitted bin per usable bin");
            debug_assert_eq!((bin.level, bin.x_lo), (n, b.x_lo));
            let w2 = bin.sqrt_weight().powi(2);
            for (gj, a) in g.iter_mut().zip(row) {
                *gj += w2 * a;
            }
        }
        current = next;
    }

    let finest = hier.level(hier.finest_used_level());
    let mut meat = DMatrix::<f64>::zeros(q, q);
    let mut v = DVector::<f64>::zeros(q);
    for (b, g) in finest.iter().zip(&current) {
        if b.stats.count == 0 {
            continue;
        }
        let g = DVector::from_column_slice(g);
        meat += (&g * g.transpose()) * b.stats.sum_squares();
        v += &g * b.integral;
    }
    let n = hier.total_samples() as f64;
    meat -= (&v * v.transpose()) * n;
    meat /= n * (n - 1.0);
    &fit.bread * meat * &fit.bread
}

/// Converts the weights and their covariance to an absolute-coefficient
/// spline with error band.
pub(crate) fn to_spline(fit: &LinearFit, cov: &DMatrix<f64>) -> BhmSpline {
    let m = fit.basis.order;
    let pieces = fit
        .basis
        .pieces
        .iter()
        .enumerate()
        .map(|(p, frame)| {
            let jac = fit.basis.to_absolute(p) * &frame.local;
            let theta = DVector::from_column_slice(&fit.theta[p..=p + m]);
            let coeffs = &jac * theta;
            let sub = cov.view((p, p), (m + 1, m + 1));
            let ca = &jac * sub * jac.transpose();
            let mut error_coeffs = vec![0.0; 2 * m + 1];
            for j in 0..=m {
                for k in 0..=m {
                    error_coeffs[j + k] += ca[(j, k)];
                }
            }
            SplinePiece {
                x_lo: frame.lo,
                x_hi: frame.hi,
                coeffs: coeffs.as_slice().to_vec(),
                error_coeffs,
            }
        })
        .collect();
    BhmSpline::new(m, pieces).expect("basis pieces tile the domain")
}

/// Fits a continuous spline with knots at `boundaries` to independent bins.
///
/// The error band assumes the bins share no samples.
pub fn fit_bins(
    bins: &[FitBin],
    boundaries: &[f64],
    order: usize,
    jump_penalty: f64,
) -> Result<BhmSpline, FitError> {
    let fit = solve(SplineBasis::new(boundaries, order), bins, jump_penalty)?;
    let cov = independent_covariance(&fit, bins);
    Ok(to_spline(&fit, &cov))
}
