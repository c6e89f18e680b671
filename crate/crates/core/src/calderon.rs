//! Splitting of critical data into a finite-energy part and a small subcritical part
//! by thresholding Littlewood-Paley blocks in physical space.

use serde::Serialize;

use crate::besov::{besov_norm, critical_exponent, BesovIndex, DyadicPartition};
use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::spectral::{divergence_residual, leray_project, Rank, SpectralField};

/// Relative divergence residual accepted for "divergence-free" input.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-10;

/// Exponents `d < p < q` and threshold scale `lambda` of a split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitConfig {
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
}

impl SplitConfig {
    pub fn new(dim: usize, p: f64, q: f64, lambda: f64) -> Result<Self> {
        let c = Self { dim, p, q, lambda };
        c.validate()?;
        Ok(c)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.dim, self.p, self.q, lambda)
    }

    /// Interpolation parameter with `1/p = theta/2 + (1 - theta)/q`.
    pub fn theta(&self) -> f64 {
        2.0 * (self.q - self.p) / (self.p * (self.q - 2.0))
    }

    pub fn s_p(&self) -> f64 {
        critical_exponent(self.dim, self.p)
    }

    pub fn s_q(&self) -> f64 {
        critical_exponent(self.dim, self.q)
    }

    /// Regularity `s = s_p / (1 - theta)` of the small part.
    pub fn s(&self) -> f64 {
        self.s_p() / (1.0 - self.theta())
    }

    /// Subcriticality gain `epsilon = s - s_q`.
    pub fn epsilon(&self) -> f64 {
        self.s() - self.s_q()
    }

    /// Threshold of block `j`: `lambda * 2^{-j s_p p / (p - 2)}`.
    pub fn block_threshold(&self, j: i32) -> f64 {
        self.lambda * 2f64.powf(-(j as f64) * self.s_p() * self.p / (self.p - 2.0))
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim as f64;
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.p > d && self.q > self.p) {
            return Err(Error::ExponentConditions(format!(
                "need {d} < p < q, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        let theta = self.theta();
        if ((1.0 / self.p) - (theta / 2.0 + (1.0 - theta) / self.q)).abs() > 1e-14 {
            return Err(Error::ExponentConditions("interpolation identity fails".into()));
        }
        let eps = self.epsilon();
        if !(eps > 1e-12 && eps < -self.s_q()) {
            return Err(Error::ExponentConditions(format!(
                "need 0 < epsilon < -s_q, got epsilon = {eps}, s_q = {}",
                self.s_q()
            )));
        }
        Ok(())
    }

    /// Index of the critical norm of the data.
    pub fn data_index(&self) -> BesovIndex {
        BesovIndex::critical(self.dim, self.p, self.p).expect("validated exponents")
    }

    /// Index `(s, q, q)` in which the small part is measured.
    pub fn small_index(&self) -> BesovIndex {
        BesovIndex::new(self.s(), self.q, self.q).expect("validated exponents")
    }
}

/// The two parts and their measured norms.
#[derive(Clone, Debug)]
pub struct SplitResult {
    pub large: SpectralField,
    pub small: SpectralField,
    pub summary: SplitSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitSummary {
    pub config: SplitConfig,
    pub theta: f64,
    pub s: f64,
    pub epsilon: f64,
    /// `||u0||` in the critical `(s_p, p, p)` norm.
    pub data_norm: f64,
    /// `||U0||_{L^2}`.
    pub large_l2: f64,
    /// `||V0||` in the `(s, q, q)` norm.
    pub small_besov: f64,
    /// `||U0||_{L^2} / (||u0||^{p/2} lambda^{1-p/2})`.
    pub large_constant: f64,
    /// `||V0|| / (||u0||^{p/q} lambda^{1-p/q})`.
    pub small_constant: f64,
    /// `max |U0 + V0 - P u0| / max |P u0|` over coefficients.
    pub reassembly_error: f64,
    pub large_divergence: f64,
    pub small_divergence: f64,
}

/// Physical-space Littlewood-Paley blocks of `u0`, reused across thresholds.
pub struct BlockCache {
    blocks: Vec<(i32, Vec<Vec<f64>>)>,
    data_norm: f64,
    projected: SpectralField,
}

impl BlockCache {
    pub fn new(u0: &SpectralField, config: &SplitConfig, partition: &DyadicPartition) -> Result<Self> {
        u0.require_rank(Rank::Vector)?;
        if u0.grid() != partition.grid() {
            return Err(Error::GridMismatch);
        }
        let div = divergence_residual(u0)?;
        if div > DIVERGENCE_TOLERANCE {
            return Err(Error::NotDivergenceFree(div));
        }
        let blocks = partition
            .blocks()
            .map(|j| Ok((j, partition.block(u0, j)?.to_physical())))
            .collect::<Result<Vec<_>>>()?;
        let data_norm = besov_norm(u0, &config.data_index(), partition)?.value;
        Ok(Self {
            blocks,
            data_norm,
            projected: leray_project(u0)?,
        })
    }
}

/// Split `u0 = U0 + V0` with the given thresholds.
pub fn split(u0: &SpectralField, config: &SplitConfig, partition: &DyadicPartition) -> Result<SplitResult> {
    config.validate()?;
    let cache = BlockCache::new(u0, config, partition)?;
    split_cached(&cache, config, partition)
}

/// Split using precomputed blocks.
pub fn split_cached(cache: &BlockCache, config: &SplitConfig, partition: &DyadicPartition) -> Result<SplitResult> {
    config.validate()?;
    let grid = partition.grid();
    let comps = grid.dim();
    let mut large = vec![vec![0.0; grid.len()]; comps];
    let mut small = vec![vec![0.0; grid.len()]; comps];
    for (j, block) in &cache.blocks {
        let thr2 = config.block_threshold(*j).powi(2);
        for idx in 0..grid.len() {
            let mag2: f64 = block.iter().map(|c| c[idx] * c[idx]).sum();
            let dst = if mag2 > thr2 { &mut large } else { &mut small };
            for c in 0..comps {
                dst[c][idx] += block[c][idx];
            }
        }
    }
    let finish = |values: &[Vec<f64>]| -> Result<SpectralField> {
        let mut f = SpectralField::from_physical(grid, Rank::Vector, values)?;
        f.zero_nyquist();
        f.zero_mean();
        leray_project(&f)
    };
    let large = finish(&large)?;
    let small = finish(&small)?;

    let large_l2 = large.l2_norm();
    let small_besov = besov_norm(&small, &config.small_index(), partition)?.value;
    let (p, q, lambda, n) = (config.p, config.q, config.lambda, cache.data_norm);
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    let large_constant = ratio(large_l2, n.powf(p / 2.0) * lambda.powf(1.0 - p / 2.0));
    let small_constant = ratio(small_besov, n.powf(p / q) * lambda.powf(1.0 - p / q));
    let reassembly_error = large.add(&small)?.relative_difference(&cache.projected);
    let summary = SplitSummary {
        config: *config,
        theta: config.theta(),
        s: config.s(),
        epsilon: config.epsilon(),
        data_norm: n,
        large_l2,
        small_besov,
        large_constant,
        small_constant,
        reassembly_error,
        large_divergence: divergence_residual(&large)?,
        small_divergence: divergence_residual(&small)?,
    };
    Ok(SplitResult { large, small, summary })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub large_l2: f64,
    pub small_besov: f64,
    pub reassembly_error: f64,
}

/// Log-log fit of both measured norms against `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub p: f64,
    pub q: f64,
    pub points: Vec<SweepPoint>,
    /// Expected slopes `1 - p/2` and `1 - p/q`.
    pub expected_large_slope: f64,
    pub expected_small_slope: f64,
    /// Least-squares slopes over the mid-range, `None` when fewer than two points qualify.
    pub large_slope: Option<f64>,
    pub small_slope: Option<f64>,
    /// Root-mean-square residuals of the two fits (in natural log units).
    pub large_residual: Option<f64>,
    pub small_residual: Option<f64>,
    /// Indices of the points used for the fits.
    pub fit_points: Vec<usize>,
    /// True when every measured norm is zero.
    pub degenerate: bool,
}

/// Points where neither part is empty nor saturated: `0 < ||U0|| < 0.999 max ||U0||`
/// and `0 < ||V0|| < 0.999 max ||V0||`.
pub fn mid_range(points: &[SweepPoint]) -> Vec<usize> {
    let max_u = points.iter().map(|p| p.large_l2).fold(0.0, f64::max);
    let max_v = points.iter().map(|p| p.small_besov).fold(0.0, f64::max);
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            p.large_l2 > 0.0 && p.large_l2 < 0.999 * max_u && p.small_besov > 0.0 && p.small_besov < 0.999 * max_v
        })
        .map(|(i, _)| i)
        .collect()
}

/// Geometric `lambda` list with `per_decade` points from `lo` to `hi`.
pub fn geometric_lambdas(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n).map(|i| lo * 10f64.powf(decades * i as f64 / n as f64)).collect()
}

/// Split at every `lambda` and fit the power laws of both parts.
pub fn exponent_sweep(
    u0: &SpectralField,
    config: &SplitConfig,
    lambdas: &[f64],
    partition: &DyadicPartition,
) -> Result<SweepReport> {
    if lambdas.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "a sweep needs at least 4 thresholds, got {}",
            lambdas.len()
        )));
    }
    let ratios: Vec<f64> = lambdas.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.iter().any(|r| !(r.is_finite() && *r > 1.0) || (r / ratios[0] - 1.0).abs() > 1e-9) {
        return Err(Error::InvalidArgument("sweep thresholds must be increasing and geometric".into()));
    }
    if lambdas[lambdas.len() - 1] / lambdas[0] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument("sweep must span at least two decades".into()));
    }
    let cache = BlockCache::new(u0, config, partition)?;
    let mut points = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let r = split_cached(&cache, &config.with_lambda(lambda)?, partition)?;
        points.push(SweepPoint {
            lambda,
            large_l2: r.summary.large_l2,
            small_besov: r.summary.small_besov,
            reassembly_error: r.summary.reassembly_error,
        });
    }
    let degenerate = points.iter().all(|p| p.large_l2 == 0.0 && p.small_besov == 0.0);
    let fit_points = mid_range(&points);
    let lx: Vec<f64> = fit_points.iter().map(|&i| points[i].lambda.ln()).collect();
    let lu: Vec<f64> = fit_points.iter().map(|&i| points[i].large_l2.ln()).collect();
    let lv: Vec<f64> = fit_points.iter().map(|&i| points[i].small_besov.ln()).collect();
    let fu = fit_line(&lx, &lu);
    let fv = fit_line(&lx, &lv);
    Ok(SweepReport {
        p: config.p,
        q: config.q,
        points,
        expected_large_slope: 1.0 - config.p / 2.0,
        expected_small_slope: 1.0 - config.p / config.q,
        large_slope: fu.map(|f| f.0),
        small_slope: fv.map(|f| f.0),
        large_residual: fu.map(|f| f.1),
        small_residual: fv.map(|f| f.1),
        fit_points,
        degenerate,
    })
}

/// Halve `lambda` from `start` until the small part's norm drops below `target`
/// (at most `max_halvings` times).
pub fn lambda_for_smallness(
    u0: &SpectralField,
    config: &SplitConfig,
    target: f64,
    max_halvings: usize,
    partition: &DyadicPartition,
) -> Result<SplitResult> {
    let cache = BlockCache::new(u0, config, partition)?;
    let mut lambda = config.lambda;
    for _ in 0..=max_halvings {
        let r = split_cached(&cache, &config.with_lambda(lambda)?, partition)?;
        if r.summary.small_besov < target {
            return Ok(r);
        }
        lambda *= 0.5;
    }
    Err(Error::InvalidArgument(format!(
        "no threshold down to {lambda} made the small part smaller than {target}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random::random_band_limited;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    fn setup() -> (Grid, DyadicPartition, SpectralField) {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::for_grid(&g).unwrap();
        let u = random_band_limited(&g, Rank::Vector, 3, 1.0, f64::INFINITY, true);
        (g, p, u)
    }

    #[test]
    fn config_invariants() {
        let c = SplitConfig::new(3, 4.0, 8.0, 1.0).unwrap();
        let theta = c.theta();
        assert!((1.0 / 4.0 - (theta / 2.0 + (1.0 - theta) / 8.0)).abs() < 1e-14);
        assert!((c.s() - 3.0 / 8.0 - (-1.0 + theta / (2.0 * (1.0 - theta)))).abs() < 1e-12);
        assert!(c.epsilon() > 0.0 && c.epsilon() < -c.s_q());
        assert!(SplitConfig::new(3, 3.0, 8.0, 1.0).is_err());
        assert!(SplitConfig::new(3, 5.0, 4.0, 1.0).is_err());
        assert!(SplitConfig::new(3, 4.0, 8.0, 0.0).is_err());
        // in two dimensions L^2 is already critical and the gain vanishes
        assert!(SplitConfig::new(2, 4.0, 8.0, 1.0).is_err());
    }

    #[test]
    fn extreme_thresholds() {
        let (_, p, u) = setup();
        let big = split(&u, &SplitConfig::new(3, 4.0, 8.0, 1e12).unwrap(), &p).unwrap();
        assert!(big.large.is_zero());
        assert!(big.small.relative_difference(&u) < 1e-12);
        let tiny = split(&u, &SplitConfig::new(3, 4.0, 8.0, 1e-14).unwrap(), &p).unwrap();
        assert!(tiny.summary.small_besov < 1e-10 * big.summary.small_besov);
    }

    #[test]
    fn reassembly_and_divergence() {
        let (_, p, u) = setup();
        for lambda in [0.01, 0.1, 1.0] {
            let r = split(&u, &SplitConfig::new(3, 4.0, 8.0, lambda).unwrap(), &p).unwrap();
            assert!(r.summary.reassembly_error < 1e-10);
            assert!(r.summary.large_divergence < 1e-12);
            assert!(r.summary.small_divergence < 1e-12);
        }
    }

    #[test]
    fn pointwise_threshold_matches_brute_force() {
        let (g, p, u) = setup();
        let c = SplitConfig::new(3, 4.0, 8.0, 0.05).unwrap();
        let r = split(&u, &c, &p).unwrap();
        // brute force: recompute every block, compare pointwise
        let mut raw = vec![vec![0.0; g.len()]; 3];
        for j in p.blocks() {
            let b = p.block(&u, j).unwrap().to_physical();
            let thr = c.lambda * 2f64.powf(-(j as f64) * c.s_p() * 4.0 / 2.0);
            for idx in 0..g.len() {
                let m = (b[0][idx].powi(2) + b[1][idx].powi(2) + b[2][idx].powi(2)).sqrt();
                if m > thr {
                    for a in 0..3 {
                        raw[a][idx] += b[a][idx];
                    }
                }
            }
        }
        let mut f = SpectralField::from_physical(&g, Rank::Vector, &raw).unwrap();
        f.zero_nyquist();
        f.zero_mean();
        let expected = leray_project(&f).unwrap();
        assert!(r.large.relative_difference(&expected) < 1e-12);
    }

    #[test]
    fn rejects_non_solenoidal_data() {
        let (g, p, _) = setup();
        let u = random_band_limited(&g, Rank::Vector, 1, 1.0, 5.0, false);
        assert!(matches!(
            split(&u, &SplitConfig::new(3, 4.0, 8.0, 1.0).unwrap(), &p),
            Err(Error::NotDivergenceFree(_))
        ));
    }

    #[test]
    fn sweep_guards_and_zero_data() {
        let (g, p, u) = setup();
        let c = SplitConfig::new(3, 4.0, 8.0, 1.0).unwrap();
        assert!(exponent_sweep(&u, &c, &[0.1, 1.0, 10.0], &p).is_err());
        assert!(exponent_sweep(&u, &c, &[0.1, 0.2, 0.4, 0.8], &p).is_err());
        let z = SpectralField::zeros(&g, Rank::Vector);
        let r = exponent_sweep(&z, &c, &geometric_lambdas(0.01, 100.0, 2), &p).unwrap();
        assert!(r.degenerate);
        assert!(r.large_slope.is_none());
    }

    #[test]
    fn smallness_is_attainable() {
        let (_, p, u) = setup();
        let c = SplitConfig::new(3, 4.0, 8.0, 1.0).unwrap();
        let full = split(&u, &c, &p).unwrap().summary.small_besov;
        let r = lambda_for_smallness(&u, &c, 0.01 * full, 80, &p).unwrap();
        assert!(r.summary.small_besov < 0.01 * full);
    }
}
