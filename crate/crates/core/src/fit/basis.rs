//! Basis of the continuity-constrained coefficient space.
//!
//! A degree-`m` spline with simple interior knots and `C^(m-1)` continuity
//! has `s + m` degrees of freedom. The B-splines on the clamped knot vector
//! span exactly that space, so parameterizing the per-piece polynomials by
//! B-spline weights eliminates the continuity equalities. Each piece
//! stores its polynomials in the local variable `t = (x - center) / half`,
//! `t` in `[-1, 1]`, which keeps the least-squares problem well scaled.

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub(crate) struct PieceFrame {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub half: f64,
    /// `(m+1) x (m+1)`: row `k` gives the local `t^k` coefficient as a
    /// combination of the B-spline weights `p..=p+m`.
    pub local: DMatrix<f64>,
}

impl PieceFrame {
    pub fn to_local(&self, x: f64) -> f64 {
        (x - self.center) / self.half
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SplineBasis {
    pub order: usize,
    pub pieces: Vec<PieceFrame>,
}

/// Nonzero B-spline values at `x` for knot span `span` (Cox-de Boor).
fn basis_funs(knots: &[f64], span: usize, order: usize, x: f64) -> Vec<f64> {
    let mut n = vec![0.0; order + 1];
    let mut left = vec![0.0; order + 1];
    let mut right = vec![0.0; order + 1];
    n[0] = 1.0;
    for j in 1..=order {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

impl SplineBasis {
    pub fn new(boundaries: &[f64], order: usize) -> Self {
        let s = boundaries.len() - 1;
        let m = order;
        let mut knots = vec![boundaries[0]; m + 1];
        knots.extend_from_slice(&boundaries[1..s]);
        knots.extend(std::iter::repeat_n(boundaries[s], m + 1));

        let nodes: Vec<f64> = (0..=m)
            .map(|j| (std::f64::consts::PI * (2 * j + 1) as f64 / (2 * (m + 1)) as f64).cos())
            .collect();
        let vandermonde = DMatrix::from_fn(m + 1, m + 1, |j, k| nodes[j].powi(k as i32));
        let inv = vandermonde
            .try_inverse()
            .expect("Chebyshev Vandermonde matrix is invertible");

        let pieces = (0..s)
            .map(|p| {
                let (lo, hi) = (boundaries[p], boundaries[p + 1]);
                let center = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                let mut values = DMatrix::zeros(m + 1, m + 1);
                for (j, &t) in nodes.iter().enumerate() {
                    let x = center + half * t;
                    for (r, v) in basis_funs(&knots, p + m, m, x).into_iter().enumerate() {
                        values[(j, r)] = v;
                    }
                }
                PieceFrame {
                    lo,
                    hi,
                    center,
                    half,
                    local: &inv * values,
                }
            })
            .collect();
        Self { order, pieces }
    }

    /// Number of free parameters, `s + m`.
    pub fn dim(&self) -> usize {
        self.pieces.len() + self.order
    }

    /// Adds `scale * integral over [u, v]` of the spline, as a linear form
    /// in the basis weights, into `row`.
    pub fn add_integral_row(&self, u: f64, v: f64, scale: f64, row: &mut [f64]) {
        let m = self.order;
        let first = self.pieces.partition_point(|p| p.hi <= u);
        let mut moments = vec![0.0; m + 1];
        for (p, frame) in self.pieces.iter().enumerate().skip(first) {
            if frame.lo >= v {
                break;
            }
            let tl = frame.to_local(u.max(frame.lo)).max(-1.0);
            let tu = frame.to_local(v.min(frame.hi)).min(1.0);
            if tu <= tl {
                continue;
            }
            let (mut pl, mut pu) = (tl, tu);
            for (k, mom) in moments.iter_mut().enumerate() {
                *mom = frame.half * (pu - pl) / (k + 1) as f64;
                pl *= tl;
                pu *= tu;
            }
            for r in 0..=m {
                let c: f64 = (0..=m).map(|k| moments[k] * frame.local[(k, r)]).sum();
                row[p + r] += scale * c;
            }
        }
    }

    /// Adds `scale * (m-th derivative of piece p+1 minus that of piece p)`
    /// at their shared knot into `row`.
    pub fn add_jump_row(&self, p: usize, scale: f64, row: &mut [f64]) {
        let m = self.order;
        let factorial: f64 = (1..=m).map(|v| v as f64).product();
        for (q, sign) in [(p, -1.0), (p + 1, 1.0)] {
            let frame = &self.pieces[q];
            let f = sign * scale * factorial / frame.half.powi(m as i32);
            for r in 0..=m {
                row[q + r] += f * frame.local[(m, r)];
            }
        }
    }

    /// Local coefficients of piece `p` for basis weights `theta`.
    #[cfg(test)]
    pub fn local_coeffs(&self, p: usize, theta: &[f64]) -> Vec<f64> {
        let m = self.order;
        let frame = &self.pieces[p];
        (0..=m)
            .map(|k| (0..=m).map(|r| frame.local[(k, r)] * theta[p + r]).sum())
            .collect()
    }

    /// Matrix mapping local `t^k` coefficients of piece `p` to absolute
    /// `x^j` coefficients.
    pub fn to_absolute(&self, p: usize) -> DMatrix<f64> {
        let m = self.order;
        let frame = &self.pieces[p];
        let mut t = DMatrix::zeros(m + 1, m + 1);
        for k in 0..=m {
            let scale = frame.half.powi(-(k as i32));
            let mut binom = 1.0;
            for j in 0..=k {
                // C(k, j) (-c)^(k-j) / h^k
                t[(j, k)] = binom * (-frame.center).powi((k - j) as i32) * scale;
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        let b = SplineBasis::new(&[0.0, 0.5, 0.75, 1.0], 3);
        assert_eq!(b.dim(), 6);
        let ones = vec![1.0; b.dim()];
        for p in 0..3 {
            let c = b.local_coeffs(p, &ones);
            assert!((c[0] - 1.0).abs() < 1e-12);
            for v in &c[1..] {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn continuity_of_arbitrary_weights() {
        let bounds = [-1.0, -0.5, 0.0, 0.25, 0.5, 1.0];
        let m = 4;
        let b = SplineBasis::new(&bounds, m);
        let theta: Vec<f64> = (0..b.dim()).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
        for p in 0..bounds.len() - 2 {
            let left = b.local_coeffs(p, &theta);
            let right = b.local_coeffs(p + 1, &theta);
            let (fl, fr) = (&b.pieces[p], &b.pieces[p + 1]);
            for d in 0..m {
                // d-th x-derivative at the knot, t = +1 on the left, -1 on the right
                let deriv = |c: &[f64], t: f64, h: f64| -> f64 {
                    (d..=m)
                        .map(|k| {
                            let fall: f64 = ((k - d + 1)..=k).map(|v| v as f64).product();
                            c[k] * fall * t.powi((k - d) as i32)
                        })
                        .sum::<f64>()
                        / h.powi(d as i32)
                };
                let l = deriv(&left, 1.0, fl.half);
                let r = deriv(&right, -1.0, fr.half);
                assert!((l - r).abs() <= 1e-9 * (1.0 + l.abs()), "d={d}: {l} vs {r}");
            }
        }
    }

    #[test]
    fn absolute_conversion() {
        let b = SplineBasis::new(&[1.0, 3.0], 2);
        // local t = x - 2; t^2 = x^2 - 4x + 4
        let t = b.to_absolute(0);
        let a = &t * nalgebra::DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert_eq!(a.as_slice(), &[4.0, -4.0, 1.0]);
    }
}
