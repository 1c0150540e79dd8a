//! Text formatting shared by every file writer in the crate.

/// Shortest decimal that parses back to exactly `x`.
///
/// Plain notation is used for moderate magnitudes and scientific notation
/// otherwise, so that tiny or huge values do not expand into long runs of
/// zeros.
pub fn fmt_f64(x: f64) -> String {
    let ax = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&ax) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Blank-separated row of [`fmt_f64`] values.
pub fn fmt_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for &x in &[
            0.0,
            1.0,
            -2.5,
            0.1,
            1.0 / 3.0,
            1e-7,
            -6.02214076e23,
            0.0024414062500000004,
            123456.789,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(2.0), "2");
        assert_eq!(fmt_f64(1e-7), "1e-7");
    }
}
