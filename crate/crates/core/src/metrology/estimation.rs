use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::StateFamily;
use super::homodyne::{BandDecomposition, HomodyneSetting, QuadratureGrid};
use crate::error::{Error, Result};
use crate::hilbert::ProbeState;

/// Fraction of the prior grid, per side, treated as its edge.
pub const PRIOR_EDGE_FRACTION: f64 = 0.05;
/// Posterior mass in the edge cells above which the prior range is suspect.
pub const EDGE_MASS_WARNING: f64 = 0.2;
/// Points in the tabulated pdf used for sampling.
pub const SAMPLING_TABLE_POINTS: usize = 8001;

const LIKELIHOOD_FLOOR: f64 = 1e-300;
const CHUNK: usize = 1024;

/// Piecewise-linear pdf on a uniform grid with its running integral.
struct PdfTable {
    x0: f64,
    h: f64,
    p: Vec<f64>,
    cdf: Vec<f64>,
}

impl PdfTable {
    fn new(grid: QuadratureGrid, mut p: Vec<f64>) -> Self {
        for v in &mut p {
            *v = v.max(0.0);
        }
        let h = grid.step();
        let mut cdf = Vec::with_capacity(p.len());
        cdf.push(0.0);
        for w in p.windows(2) {
            let last = *cdf.last().unwrap();
            cdf.push(last + 0.5 * h * (w[0] + w[1]));
        }
        Self {
            x0: -grid.half_width,
            h,
            p,
            cdf,
        }
    }

    /// Exact inverse of the piecewise-linear CDF.
    fn invert(&self, u: f64) -> f64 {
        let target = u * self.cdf[self.cdf.len() - 1];
        let k = match self.cdf.partition_point(|&c| c <= target) {
            0 => 0,
            j => (j - 1).min(self.p.len() - 2),
        };
        let r = target - self.cdf[k];
        let (p0, p1) = (self.p[k], self.p[k + 1]);
        let s = (p1 - p0) / self.h;
        let disc = (p0 * p0 + 2.0 * s * r).max(0.0);
        let denom = p0 + disc.sqrt();
        let t = if denom > 0.0 { (2.0 * r / denom).clamp(0.0, self.h) } else { 0.5 * self.h };
        self.x0 + k as f64 * self.h + t
    }
}

/// `m` independent homodyne outcomes from `rho`, drawn by inverse-CDF
/// sampling of the tabulated density. Deterministic for a given `seed`.
pub fn sample_homodyne(rho: &ProbeState, setting: HomodyneSetting, m: usize, seed: u64) -> Vec<f64> {
    if m == 0 {
        return Vec::new();
    }
    let base = QuadratureGrid::for_state(rho);
    let grid = QuadratureGrid {
        points: SAMPLING_TABLE_POINTS,
        ..base
    };
    let pdf = BandDecomposition::new(rho.elements(), grid).evaluate(setting.phi_lo());
    let table = PdfTable::new(grid, pdf);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| table.invert(rng.random::<f64>())).collect()
}

/// Outcome of one Bayesian estimation from `m` homodyne samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRun {
    pub m: usize,
    pub samples: Vec<f64>,
    pub nbar_grid: Vec<f64>,
    /// Sums to 1 over `nbar_grid`.
    pub posterior: Vec<f64>,
    /// Posterior mean.
    pub estimate: f64,
    /// Posterior variance.
    pub variance: f64,
    /// Too much posterior mass sits at the ends of the prior range.
    pub boundary_warning: bool,
}

/// Homodyne densities tabulated over an `nbar` grid, reusable across many
/// data sets drawn at the same setting.
#[derive(Debug, Clone)]
pub struct LikelihoodTable {
    nbar_grid: Vec<f64>,
    x0: f64,
    h: f64,
    xpoints: usize,
    /// Row-major `xpoints × nbar_grid.len()`.
    pdf: Vec<f64>,
}

impl LikelihoodTable {
    pub fn build<S: StateFamily + ?Sized>(
        family: &S,
        setting: HomodyneSetting,
        prior: (f64, f64),
        grid_points: usize,
        xgrid: QuadratureGrid,
    ) -> Result<Self> {
        let (lo, hi) = prior;
        if !(lo >= 0.0 && hi > lo) || grid_points < 2 {
            return Err(Error::Domain(format!(
                "prior must satisfy 0 ≤ lo < hi with at least 2 grid points, got [{lo}, {hi}] × {grid_points}"
            )));
        }
        let step = (hi - lo) / (grid_points - 1) as f64;
        let nbar_grid: Vec<f64> = (0..grid_points).map(|k| lo + k as f64 * step).collect();
        let columns = nbar_grid
            .par_iter()
            .map(|&n| {
                let rho = family.state(n)?;
                Ok(BandDecomposition::new(rho.elements(), xgrid).evaluate(setting.phi_lo()))
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let k = grid_points;
        let mut pdf = vec![0.0; xgrid.points * k];
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                pdf[i * k + j] = v.max(0.0);
            }
        }
        Ok(Self {
            nbar_grid,
            x0: -xgrid.half_width,
            h: xgrid.step(),
            xpoints: xgrid.points,
            pdf,
        })
    }

    pub fn nbar_grid(&self) -> &[f64] {
        &self.nbar_grid
    }

    fn add_log_likelihood(&self, x: f64, acc: &mut [f64]) {
        let k = self.nbar_grid.len();
        let s = (x - self.x0) / self.h;
        if !(s >= 0.0) || s > (self.xpoints - 1) as f64 {
            for a in acc.iter_mut() {
                *a += LIKELIHOOD_FLOOR.ln();
            }
            return;
        }
        let i = (s.floor() as usize).min(self.xpoints - 2);
        let t = s - i as f64;
        let lo = &self.pdf[i * k..(i + 1) * k];
        let hi = &self.pdf[(i + 1) * k..(i + 2) * k];
        for ((a, p0), p1) in acc.iter_mut().zip(lo).zip(hi) {
            *a += (p0 * (1.0 - t) + p1 * t).max(LIKELIHOOD_FLOOR).ln();
        }
    }

    /// Flat-prior posterior for `samples`.
    pub fn posterior(&self, samples: Vec<f64>) -> EstimationRun {
        let k = self.nbar_grid.len();
        // Fixed chunking keeps the summation order, and so the result,
        // independent of the thread count.
        let partial: Vec<Vec<f64>> = samples
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![0.0; k];
                for &x in chunk {
                    self.add_log_likelihood(x, &mut acc);
                }
                acc
            })
            .collect();
        let mut log_post = vec![0.0; k];
        for p in &partial {
            for (a, b) in log_post.iter_mut().zip(p) {
                *a += b;
            }
        }
        let top = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut post: Vec<f64> = log_post.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = post.iter().sum();
        for p in &mut post {
            *p /= z;
        }
        let estimate: f64 = post.iter().zip(&self.nbar_grid).map(|(p, n)| p * n).sum();
        let variance: f64 = post
            .iter()
            .zip(&self.nbar_grid)
            .map(|(p, n)| p * (n - estimate) * (n - estimate))
            .sum();
        let edge = ((PRIOR_EDGE_FRACTION * k as f64).ceil() as usize).max(1);
        let edge_mass: f64 = post[..edge].iter().sum::<f64>() + post[k - edge..].iter().sum::<f64>();
        EstimationRun {
            m: samples.len(),
            samples,
            nbar_grid: self.nbar_grid.clone(),
            posterior: post,
            estimate,
            variance,
            boundary_warning: edge_mass > EDGE_MASS_WARNING,
        }
    }
}

/// Flat-prior Bayesian estimate of `nbar` on `grid_points` values spanning
/// `prior`.
pub fn bayesian_estimate<S: StateFamily + ?Sized>(
    samples: Vec<f64>,
    family: &S,
    setting: HomodyneSetting,
    prior: (f64, f64),
    grid_points: usize,
) -> Result<EstimationRun> {
    let mid = family.state(0.5 * (prior.0 + prior.1).max(0.0))?;
    let xgrid = QuadratureGrid {
        points: 4001,
        ..QuadratureGrid::for_state(&mid)
    };
    let table = LikelihoodTable::build(family, setting, prior, grid_points, xgrid)?;
    Ok(table.posterior(samples))
}
