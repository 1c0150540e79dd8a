//! Rejection sampling from `|f|` under a piecewise-constant envelope.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngExt};

use super::functions::TestFunction;

pub const ENVELOPE_CELLS: usize = 1024;
const PROBES_PER_CELL: usize = 16;
const ENVELOPE_INFLATION: f64 = 1e-3;

pub struct RejectionSampler {
    func: TestFunction,
    lo: f64,
    width: f64,
    heights: Vec<f64>,
    cells: WeightedIndex<f64>,
}

impl RejectionSampler {
    pub fn new(func: TestFunction) -> Self {
        let (lo, hi) = func.support;
        let width = (hi - lo) / ENVELOPE_CELLS as f64;
        let heights: Vec<f64> = (0..ENVELOPE_CELLS)
            .map(|c| {
                let max = (0..=PROBES_PER_CELL)
                    .map(|j| {
                        let x = lo + width * (c as f64 + j as f64 / PROBES_PER_CELL as f64);
                        func.eval(x.min(hi)).abs()
                    })
                    .fold(0.0, f64::max);
                max * (1.0 + ENVELOPE_INFLATION)
            })
            .collect();
        let cells = WeightedIndex::new(&heights).expect("envelope has positive area");
        Self {
            func,
            lo,
            width,
            heights,
            cells,
        }
    }

    /// Draws `x ~ |f|` and returns `(x, f(x))`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        loop {
            let c = self.cells.sample(rng);
            let x = self.lo + self.width * (c as f64 + rng.random::<f64>());
            let fx = self.func.eval(x);
            if rng.random::<f64>() * self.heights[c] < fx.abs() {
                return (x, fx);
            }
        }
    }
}
