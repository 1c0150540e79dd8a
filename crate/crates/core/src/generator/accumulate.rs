//! Per-bin accumulation of weighted samples.

use crate::histogram::{ElementaryBin, Histogram, HistogramError};

#[derive(Debug, Clone, Copy, Default)]
struct Running {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, w: f64) {
        self.count += 1;
        let d = w - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (w - self.mean);
    }
}

/// Collects samples `(x, f_j)` into bins with running count, mean and M2.
#[derive(Debug, Clone)]
pub struct HistogramAccumulator {
    edges: Vec<f64>,
    uniform: bool,
    bins: Vec<Running>,
    excluded: u64,
}

impl HistogramAccumulator {
    /// `2^power` equal bins on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, power: u32) -> Self {
        let n = 1usize << power;
        let width = (hi - lo) / n as f64;
        let mut edges: Vec<f64> = (0..n).map(|i| lo + i as f64 * width).collect();
        edges.push(hi);
        Self {
            edges,
            uniform: true,
            bins: vec![Running::default(); n],
            excluded: 0,
        }
    }

    /// Bins between consecutive `edges`, which must increase.
    pub fn with_edges(edges: Vec<f64>) -> Self {
        assert!(edges.len() >= 2 && edges.windows(2).all(|w| w[0] < w[1]));
        let n = edges.len() - 1;
        Self {
            edges,
            uniform: false,
            bins: vec![Running::default(); n],
            excluded: 0,
        }
    }

    fn locate(&self, x: f64) -> Option<usize> {
        let (lo, hi) = (self.edges[0], *self.edges.last().unwrap());
        if !(x >= lo && x <= hi) {
            return None;
        }
        let n = self.bins.len();
        let mut i = if self.uniform {
            (((x - lo) / (hi - lo) * n as f64) as usize).min(n - 1)
        } else {
            self.edges.partition_point(|&e| e <= x).saturating_sub(1).min(n - 1)
        };
        // rounding in the uniform index can miss by one
        while i > 0 && x < self.edges[i] {
            i -= 1;
        }
        while i + 1 < n && x >= self.edges[i + 1] {
            i += 1;
        }
        Some(i)
    }

    pub fn push(&mut self, x: f64, weight: f64) {
        match self.locate(x) {
            Some(i) => self.bins[i].push(weight),
            None => self.excluded += 1,
        }
    }

    pub fn excluded(&self) -> u64 {
        self.excluded
    }

    pub fn into_histogram(self) -> Result<Histogram, HistogramError> {
        let x_max = *self.edges.last().unwrap();
        let bins = self
            .bins
            .iter()
            .zip(&self.edges)
            .map(|(b, &x)| ElementaryBin::new(x, b.count, b.mean, b.m2))
            .collect();
        Histogram::new(bins, x_max, 1.0, self.excluded)
    }
}

/// Number of bins in each half of the non-uniform grid.
pub const NONUNIFORM_HALF_BINS: usize = 128;

/// Growth factor `rho > 1` with `sum_{k<n} rho^k = target`, by bisection.
pub fn geometric_ratio(n: usize, target: f64) -> f64 {
    let sum = |r: f64| (0..n).fold(0.0, |s, _| s * r + 1.0);
    let (mut lo, mut hi) = (1.0, 2.0);
    while sum(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Edges of the symmetric non-uniform grid on `[lo, hi]`: 256 bins, the two
/// central ones `(hi - lo) / 2^12` wide, widths growing geometrically
/// towards both ends.
pub fn nonuniform_edges(lo: f64, hi: f64) -> Vec<f64> {
    let half = 0.5 * (hi - lo);
    let center = 0.5 * (lo + hi);
    let w_min = (hi - lo) / 4096.0;
    let rho = geometric_ratio(NONUNIFORM_HALF_BINS, half / w_min);
    let mut offsets = Vec::with_capacity(NONUNIFORM_HALF_BINS + 1);
    let mut acc = 0.0;
    let mut w = w_min;
    offsets.push(0.0);
    for _ in 0..NONUNIFORM_HALF_BINS {
        acc += w;
        w *= rho;
        offsets.push(acc);
    }
    let last = offsets.len() - 1;
    let mut edges: Vec<f64> = offsets[1..last].iter().rev().map(|o| center - o).collect();
    edges.insert(0, lo);
    edges.push(center);
    edges.extend(offsets[1..last].iter().map(|o| center + o));
    edges.push(hi);
    edges
}
