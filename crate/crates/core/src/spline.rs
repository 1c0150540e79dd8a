//! Piecewise polynomial spline with error band, and its text formats.
//!
//! Piece `i` on `[x_i, x_{i+1}]` evaluates `sum_k a_k x^k` with coefficients
//! in absolute `x`. Its error band is `E(x) = sqrt(sum_k eps_k x^k)` with
//! `2m + 1` coefficients.

use std::fmt::Write as _;

use thiserror::Error;

use crate::format::{fmt_f64, fmt_row};

/// Negative values of the squared error polynomial down to this are
/// rounding noise and clamp to zero.
pub const ERROR_SQUARE_TOLERANCE: f64 = 1e-12;

/// Narrow pieces far from the origin have large, cancelling absolute
/// coefficients; values within this many ulps of `sum |eps_k x^k|` are
/// also treated as rounding noise.
const ERROR_SQUARE_ULPS: f64 = 64.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("x = {x} lies outside the spline domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("squared error polynomial is negative ({value}) at x = {x}")]
    NegativeErrorSquare { x: f64, value: f64 },
    #[error("malformed spline file, line {line}: {reason}")]
    MalformedSplineFile { line: usize, reason: String },
    #[error("invalid spline: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplinePiece {
    pub x_lo: f64,
    pub x_hi: f64,
    /// `a_0..a_m`
    pub coeffs: Vec<f64>,
    /// `eps_0..eps_2m`
    pub error_coeffs: Vec<f64>,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

impl SplinePiece {
    pub fn value(&self, x: f64) -> f64 {
        horner(&self.coeffs, x)
    }

    pub fn error_square(&self, x: f64) -> f64 {
        horner(&self.error_coeffs, x)
    }

    /// `d`-th derivative at `x`.
    pub fn derivative(&self, d: usize, x: f64) -> f64 {
        let m = self.coeffs.len() - 1;
        if d > m {
            return 0.0;
        }
        (d..=m).rev().fold(0.0, |acc, k| {
            let falling: f64 = ((k - d + 1)..=k).map(|v| v as f64).product();
            acc * x + self.coeffs[k] * falling
        })
    }

    /// Exact integral over `[l, u]` (not clipped to the piece).
    pub fn integral(&self, l: f64, u: f64) -> f64 {
        // u^(k+1) - l^(k+1) = (u - l) * sum_{j<=k} u^j l^(k-j), accumulated
        // without forming the large powers separately
        let width = u - l;
        let mut power_sum = 0.0;
        let mut upow = 1.0;
        let mut total = 0.0;
        for (k, &a) in self.coeffs.iter().enumerate() {
            power_sum = power_sum * l + upow;
            upow *= u;
            total += a * power_sum / (k + 1) as f64;
        }
        total * width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BhmSpline {
    order: usize,
    pieces: Vec<SplinePiece>,
}

impl BhmSpline {
    /// Validates coefficient counts and tiling of the pieces.
    pub fn new(order: usize, pieces: Vec<SplinePiece>) -> Result<Self, SplineError> {
        if order < 1 {
            return Err(SplineError::Invalid("order must be at least 1".into()));
        }
        if pieces.is_empty() {
            return Err(SplineError::Invalid("no pieces".into()));
        }
        for (i, p) in pieces.iter().enumerate() {
            if p.coeffs.len() != order + 1 || p.error_coeffs.len() != 2 * order + 1 {
                return Err(SplineError::Invalid(format!(
                    "piece {i}: expected {} value and {} error coefficients",
                    order + 1,
                    2 * order + 1
                )));
            }
            if !(p.x_lo < p.x_hi) {
                return Err(SplineError::Invalid(format!("piece {i}: empty interval")));
            }
            if i > 0 && pieces[i - 1].x_hi != p.x_lo {
                return Err(SplineError::Invalid(format!(
                    "piece {i} does not start where piece {} ends",
                    i - 1
                )));
            }
        }
        Ok(Self { order, pieces })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn pieces(&self) -> &[SplinePiece] {
        &self.pieces
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.pieces[0].x_lo, self.pieces[self.pieces.len() - 1].x_hi)
    }

    /// `x_1..x_{s+1}`
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.pieces.iter().map(|p| p.x_lo).collect();
        b.push(self.domain().1);
        b
    }

    /// Index of the piece owning `x`; interior knots belong to the right
    /// piece and the upper domain end to the last one.
    pub fn piece_index(&self, x: f64) -> Result<usize, SplineError> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(SplineError::OutOfDomain { x, lo, hi });
        }
        let idx = self.pieces.partition_point(|p| p.x_lo <= x);
        Ok(idx.saturating_sub(1))
    }

    pub fn evaluate(&self, x: f64) -> Result<f64, SplineError> {
        Ok(self.pieces[self.piece_index(x)?].value(x))
    }

    pub fn error_at(&self, x: f64) -> Result<f64, SplineError> {
        let piece = &self.pieces[self.piece_index(x)?];
        let value = piece.error_square(x);
        let scale = horner(
            &piece.error_coeffs.iter().map(|e| e.abs()).collect::<Vec<_>>(),
            x.abs(),
        );
        if value < -ERROR_SQUARE_TOLERANCE.max(ERROR_SQUARE_ULPS * f64::EPSILON * scale) {
            return Err(SplineError::NegativeErrorSquare { x, value });
        }
        Ok(value.max(0.0).sqrt())
    }

    /// Integral of the spline over `[a, b]`, summed piece by piece.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64, SplineError> {
        let (lo, hi) = self.domain();
        for x in [a, b] {
            if !(x >= lo && x <= hi) {
                return Err(SplineError::OutOfDomain { x, lo, hi });
            }
        }
        let (a, b, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        let first = self.piece_index(a)?;
        let mut total = 0.0;
        for p in &self.pieces[first..] {
            if p.x_lo >= b {
                break;
            }
            let l = a.max(p.x_lo);
            let u = b.min(p.x_hi);
            if u > l {
                total += p.integral(l, u);
            }
        }
        Ok(sign * total)
    }

    /// Writes the spline file: comment lines, `m s`, the boundaries, then a
    /// header, value coefficients and error coefficients per piece.
    pub fn to_text(&self, comments: &str) -> String {
        let mut s = String::new();
        for line in comments.lines() {
            let _ = writeln!(s, "# {line}");
        }
        let _ = writeln!(s, "{} {}", self.order, self.pieces.len());
        let _ = writeln!(s, "{}", fmt_row(&self.boundaries()));
        for (i, p) in self.pieces.iter().enumerate() {
            let _ = writeln!(s, "# spline piece {}", i + 1);
            let _ = writeln!(s, "{}", fmt_row(&p.coeffs));
            let _ = writeln!(s, "{}", fmt_row(&p.error_coeffs));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SplineError> {
        let bad = |line: usize, reason: String| SplineError::MalformedSplineFile { line, reason };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .skip_while(|(_, l)| l.starts_with('#'));

        let numbers = |line: usize, l: &str| -> Result<Vec<f64>, SplineError> {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(line, format!("`{t}` is not a finite number")))
                })
                .collect()
        };

        let (line, head) = lines.next().ok_or_else(|| bad(0, "missing `m s` line".into()))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        let (order, count) = match head.as_slice() {
            [m, s] => match (m.parse::<usize>(), s.parse::<usize>()) {
                (Ok(m), Ok(s)) if m >= 1 && s >= 1 => (m, s),
                _ => return Err(bad(line, "expected positive integers `m s`".into())),
            },
            _ => return Err(bad(line, "expected exactly two values `m s`".into())),
        };

        let (line, b) = lines
            .next()
            .ok_or_else(|| bad(line + 1, "missing boundary line".into()))?;
        let bounds = numbers(line, b)?;
        if bounds.len() != count + 1 {
            return Err(bad(
                line,
                format!("expected {} boundaries, found {}", count + 1, bounds.len()),
            ));
        }

        let mut pieces = Vec::with_capacity(count);
        let mut last = line;
        for i in 0..count {
            let (line, header) = lines
                .next()
                .ok_or_else(|| bad(last + 1, format!("missing header of piece {}", i + 1)))?;
            if !header.starts_with('#') {
                return Err(bad(line, format!("expected `# spline piece {}`", i + 1)));
            }
            let (line, c) = lines
                .next()
                .ok_or_else(|| bad(line + 1, format!("missing coefficients of piece {}", i + 1)))?;
            let coeffs = numbers(line, c)?;
            if coeffs.len() != order + 1 {
                return Err(bad(
                    line,
                    format!("expected {} coefficients, found {}", order + 1, coeffs.len()),
                ));
            }
            let (line, e) = lines.next().ok_or_else(|| {
                bad(line + 1, format!("missing error coefficients of piece {}", i + 1))
            })?;
            let error_coeffs = numbers(line, e)?;
            if error_coeffs.len() != 2 * order + 1 {
                return Err(bad(
                    line,
                    format!(
                        "expected {} error coefficients, found {}",
                        2 * order + 1,
                        error_coeffs.len()
                    ),
                ));
            }
            last = line;
            pieces.push(SplinePiece {
                x_lo: bounds[i],
                x_hi: bounds[i + 1],
                coeffs,
                error_coeffs,
            });
        }
        if let Some((line, _)) = lines.next() {
            return Err(bad(line, "unexpected content after the last piece".into()));
        }
        Self::new(order, pieces).map_err(|e| bad(0, e.to_string()))
    }

    /// `x value error` rows on `points` equally spaced abscissas covering
    /// the domain including both ends.
    pub fn grid(&self, points: usize) -> Vec<(f64, f64, f64)> {
        let points = points.max(2);
        let (lo, hi) = self.domain();
        let step = (hi - lo) / (points - 1) as f64;
        (0..points)
            .map(|i| {
                let x = if i + 1 == points {
                    hi
                } else {
                    lo + i as f64 * step
                };
                let p = &self.pieces[self.piece_index(x).expect("grid inside domain")];
                (x, p.value(x), p.error_square(x).max(0.0).sqrt())
            })
            .collect()
    }

    /// Grid file text, one `x value error` line per point.
    pub fn grid_text(&self, points: usize) -> String {
        let mut s = String::from("# x value error\n");
        for (x, v, e) in self.grid(points) {
            let _ = writeln!(s, "{} {} {}", fmt_f64(x), fmt_f64(v), fmt_f64(e));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> BhmSpline {
        BhmSpline::new(
            1,
            vec![SplinePiece {
                x_lo: 0.0,
                x_hi: 1.0,
                coeffs: vec![1.0, 2.0],
                error_coeffs: vec![0.04, 0.0, 0.01],
            }],
        )
        .unwrap()
    }

    fn two_piece() -> BhmSpline {
        // continuous: x on [0,1], 2x - 1 on [1,2]
        BhmSpline::new(
            1,
            vec![
                SplinePiece {
                    x_lo: 0.0,
                    x_hi: 1.0,
                    coeffs: vec![0.0, 1.0],
                    error_coeffs: vec![0.0; 3],
                },
                SplinePiece {
                    x_lo: 1.0,
                    x_hi: 2.0,
                    coeffs: vec![-1.0, 2.0],
                    error_coeffs: vec![0.0; 3],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn evaluate_and_domain() {
        let s = linear();
        assert_eq!(s.evaluate(0.5).unwrap(), 2.0);
        assert_eq!(s.evaluate(1.0).unwrap(), 3.0);
        assert!(matches!(
            s.evaluate(1.5),
            Err(SplineError::OutOfDomain { .. })
        ));
        assert!(s.evaluate(f64::NAN).is_err());
        let s = two_piece();
        assert_eq!(s.piece_index(1.0).unwrap(), 1);
        assert_eq!(s.piece_index(2.0).unwrap(), 1);
        assert_eq!(s.piece_index(0.0).unwrap(), 0);
    }

    #[test]
    fn error_band() {
        let s = linear();
        assert!((s.error_at(1.0).unwrap() - 0.05f64.sqrt()).abs() < 1e-15);
        assert!((s.error_at(1.0).unwrap() - 0.223607).abs() < 1e-6);
        let mut zero = s.clone();
        zero.pieces[0].error_coeffs = vec![0.0; 3];
        assert_eq!(zero.error_at(0.3).unwrap(), 0.0);
        let mut neg = s.clone();
        neg.pieces[0].error_coeffs = vec![-1e-6, 0.0, 0.0];
        assert!(matches!(
            neg.error_at(0.5),
            Err(SplineError::NegativeErrorSquare { .. })
        ));
        neg.pieces[0].error_coeffs = vec![-1e-13, 0.0, 0.0];
        assert_eq!(neg.error_at(0.5).unwrap(), 0.0);
        // (x - 1)^2 scaled up: the residue is far below the rounding of its terms
        neg.pieces[0].error_coeffs = vec![1e12, -2e12, 1e12 - 1e-4];
        assert_eq!(neg.error_at(1.0).unwrap(), 0.0);
    }

    #[test]
    fn integrals() {
        let s = linear();
        assert_eq!(s.integral(0.0, 1.0).unwrap(), 2.0);
        assert_eq!(s.integral(0.4, 0.4).unwrap(), 0.0);
        let s = two_piece();
        let whole = s.integral(0.0, 2.0).unwrap();
        let parts = s.integral(0.0, 0.7).unwrap() + s.integral(0.7, 2.0).unwrap();
        assert!((whole - 2.5).abs() < 1e-14, "{whole}");
        assert!((whole - parts).abs() < 1e-14);
        assert!(s.integral(-0.1, 1.0).is_err());
    }

    #[test]
    fn derivatives() {
        let p = SplinePiece {
            x_lo: 0.0,
            x_hi: 1.0,
            coeffs: vec![1.0, -2.0, 0.5, 3.0],
            error_coeffs: vec![0.0; 7],
        };
        // 1 - 2x + x^2/2 + 3x^3
        assert_eq!(p.derivative(0, 2.0), p.value(2.0));
        assert_eq!(p.derivative(1, 2.0), -2.0 + 2.0 + 36.0);
        assert_eq!(p.derivative(2, 2.0), 1.0 + 36.0);
        assert_eq!(p.derivative(3, 2.0), 18.0);
        assert_eq!(p.derivative(4, 2.0), 0.0);
    }

    #[test]
    fn text_round_trip() {
        let s = BhmSpline::new(
            2,
            vec![
                SplinePiece {
                    x_lo: -1.0,
                    x_hi: 0.1,
                    coeffs: vec![0.1, 1.0 / 3.0, -2e-9],
                    error_coeffs: vec![1e-6, 0.0, 2.5e-7, 0.0, 1e-8],
                },
                SplinePiece {
                    x_lo: 0.1,
                    x_hi: 2.0,
                    coeffs: vec![0.2, 1.0 / 7.0, 4.0],
                    error_coeffs: vec![1e-6, 0.0, 2.5e-7, 0.0, 1e-8],
                },
            ],
        )
        .unwrap();
        let text = s.to_text("generated\nm = 2");
        assert!(text.starts_with("# generated\n# m = 2\n2 2\n-1 0.1 2\n# spline piece 1\n"));
        let back = BhmSpline::from_text(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text("generated\nm = 2"), text);
    }

    #[test]
    fn malformed_files() {
        let good = linear().to_text("");
        assert!(BhmSpline::from_text(&good).is_ok());
        for bad in [
            "",
            "# only comments\n",
            "1\n0 1\n",
            "1 1\n0\n# spline piece 1\n1 2\n0 0 0\n",
            "1 1\n0 1\n1 2\n0 0 0\n",
            "1 1\n0 1\n# spline piece 1\n1 2 3\n0 0 0\n",
            "1 1\n0 1\n# spline piece 1\n1 2\n0 0 0\n5\n",
            "3 1\n0 1\n# spline piece 1\n1 2 3 4\n0 0 0 0 0 0\n",
        ] {
            assert!(
                matches!(
                    BhmSpline::from_text(bad),
                    Err(SplineError::MalformedSplineFile { .. })
                ),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn grid_points() {
        let c = BhmSpline::new(
            1,
            vec![SplinePiece {
                x_lo: 0.0,
                x_hi: 1.0,
                coeffs: vec![3.0, 0.0],
                error_coeffs: vec![0.0; 3],
            }],
        )
        .unwrap();
        assert_eq!(
            c.grid(3),
            vec![(0.0, 3.0, 0.0), (0.5, 3.0, 0.0), (1.0, 3.0, 0.0)]
        );
        assert_eq!(c.grid(2), vec![(0.0, 3.0, 0.0), (1.0, 3.0, 0.0)]);
        assert_eq!(c.grid_text(2), "# x value error\n0 3 0\n1 3 0\n");
    }
}
