//! Norms of trajectories: Kato, Chemin-Lerner time-space Besov, energy, and the
//! mixed Lebesgue norms controlled by the energy.

use super::norms::{check_exponent, report_from_block_norms, BesovIndex, NormReport};
use super::partition::DyadicPartition;
use crate::error::{Error, Result};
use crate::heat::heat_evolve;
use crate::spectral::SpectralField;
use crate::trajectory::{geometric_times, Trajectory};

/// Logarithmic mean of two non-negative numbers; the arithmetic mean when either is zero.
pub(crate) fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.5 * (a + b);
    }
    let r = a / b;
    if (r - 1.0).abs() < 1e-6 {
        // series of (r-1)/ln r about r = 1
        let e = r - 1.0;
        return b * (1.0 + e / 2.0 - e * e / 12.0);
    }
    (a - b) / r.ln()
}

/// `int g dt` over the sample span, exact when `g` is exponential between samples
/// (second order otherwise). A first sample at `t_1 > 0` is extended back to zero
/// as a constant.
pub fn dt_integral(times: &[f64], values: &[f64]) -> f64 {
    let mut total = times[0] * values[0];
    for i in 1..times.len() {
        total += (times[i] - times[i - 1]) * log_mean(values[i - 1], values[i]);
    }
    total
}

/// `(t, t^{-s/2} ||u(t)||_{L^p})` for every positive sample time.
pub fn kato_decay_profile(traj: &Trajectory, s: f64, p: f64) -> Vec<(f64, f64)> {
    traj.times()
        .iter()
        .zip(traj.fields())
        .filter(|(t, _)| **t > 0.0)
        .map(|(&t, u)| (t, t.powf(-s / 2.0) * u.lp_norm(p)))
        .collect()
}

/// Kato norm `|| t^{-s/2} ||u(t)||_{L^p} ||_{L^q(dt/t)}`.
///
/// For `q = inf` this is the max over positive sample times. For finite `q` the
/// `dt/t` integral uses the trapezoid rule in `log t`; for `s < 0` the interval
/// `(0, t_1)` is added analytically with `||u||_{L^p}` frozen at its first value.
pub fn kato_norm(traj: &Trajectory, index: &BesovIndex) -> Result<NormReport> {
    index.validate()?;
    let profile = kato_decay_profile(traj, index.s, index.p);
    Ok(NormReport {
        index: *index,
        value: kato_from_profile(&profile, index.s, index.q),
        blocks: Vec::new(),
        truncated: false,
    })
}

pub(crate) fn kato_from_profile(profile: &[(f64, f64)], s: f64, q: f64) -> f64 {
    if profile.is_empty() {
        return 0.0;
    }
    if q.is_infinite() {
        return profile.iter().map(|p| p.1).fold(0.0, f64::max);
    }
    let g: Vec<f64> = profile.iter().map(|p| p.1.powf(q)).collect();
    let mut total = 0.0;
    for i in 1..g.len() {
        total += 0.5 * (g[i - 1] + g[i]) * (profile[i].0 / profile[i - 1].0).ln();
    }
    if s < 0.0 {
        total += g[0] * 2.0 / (-s * q);
    }
    total.powf(1.0 / q)
}

/// `||e^{t Delta} u_0||_{K^s_{p,q}}` over `t in (0, inf)`, sampled log-uniformly
/// with `per_octave` samples from far below the finest resolved time scale to well
/// past the slowest decay time.
pub fn caloric_norm(u0: &SpectralField, index: &BesovIndex, per_octave: u32) -> Result<f64> {
    let grid = u0.grid();
    let horizon = 40.0 / grid.min_nonzero_xi().powi(2);
    let finest = 1e-3 / grid.max_xi().powi(2);
    let levels = (horizon / finest).log2().ceil() as u32;
    let times = geometric_times(horizon, levels, per_octave);
    let traj = Trajectory::from_fn(times, |t| heat_evolve(u0, t).expect("t > 0"))?;
    Ok(kato_norm(&traj, index)?.value)
}

fn lr_time(times: &[f64], values: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return values.iter().copied().fold(0.0, f64::max);
    }
    let powered: Vec<f64> = values.iter().map(|v| v.powf(r)).collect();
    dt_integral(times, &powered).powf(1.0 / r)
}

/// Relative Richardson tolerance for time quadrature in time-space norms.
pub const TIME_QUADRATURE_TOLERANCE: f64 = 0.01;

/// Chemin-Lerner norm `|| 2^{js} ||Delta_j u||_{L^r_t L^p_x} ||_{l^q}`.
///
/// The time integral is recomputed on every other sample; if the Richardson
/// estimate of the quadrature error exceeds 1% the call fails.
pub fn timespace_besov_norm(
    traj: &Trajectory,
    r: f64,
    index: &BesovIndex,
    partition: &DyadicPartition,
) -> Result<NormReport> {
    let index = index.with_time(r)?;
    index.validate()?;
    let times = traj.times();
    let mut series: Vec<(i32, Vec<f64>)> = partition.blocks().map(|j| (j, Vec::with_capacity(times.len()))).collect();
    for u in traj.fields() {
        for (j, s) in series.iter_mut() {
            s.push(partition.block(u, *j)?.lp_norm(index.p));
        }
    }
    let fine: Vec<(i32, f64)> = series.iter().map(|(j, s)| (*j, lr_time(times, s, r))).collect();
    let report = report_from_block_norms(&index, &fine, partition);
    if times.len() >= 3 && r.is_finite() {
        let keep = coarse_indices(times.len());
        let ct: Vec<f64> = keep.iter().map(|&i| times[i]).collect();
        let coarse: Vec<(i32, f64)> = series
            .iter()
            .map(|(j, s)| {
                let cs: Vec<f64> = keep.iter().map(|&i| s[i]).collect();
                (*j, lr_time(&ct, &cs, r))
            })
            .collect();
        let coarse_value = report_from_block_norms(&index, &coarse, partition).value;
        let estimate = (report.value - coarse_value).abs() / 3.0;
        let limit = TIME_QUADRATURE_TOLERANCE * report.value;
        if estimate > limit {
            return Err(Error::QuadratureResolution { estimate, limit });
        }
    }
    Ok(report)
}

fn coarse_indices(n: usize) -> Vec<usize> {
    let mut keep: Vec<usize> = (0..n).step_by(2).collect();
    if keep.last() != Some(&(n - 1)) {
        keep.push(n - 1);
    }
    keep
}

/// Dissipation `int ||grad U||^2 dt` over each sample interval, integrated mode by
/// mode with the exponential-fit rule (exact for heat flow).
pub fn dissipation_increments(traj: &Trajectory) -> Vec<f64> {
    let grid = traj.grid();
    let xi2 = grid.xi2_table();
    let vol = grid.volume();
    let fields = traj.fields();
    let times = traj.times();
    let mode_energy = |f: &SpectralField, idx: usize| -> f64 { f.components().iter().map(|c| c[idx].norm_sqr()).sum() };
    (1..times.len())
        .map(|i| {
            let h = times[i] - times[i - 1];
            let mut s = 0.0;
            for (idx, &w) in xi2.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let a = mode_energy(&fields[i - 1], idx);
                let b = mode_energy(&fields[i], idx);
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                s += w * log_mean(a, b);
            }
            vol * h * s
        })
        .collect()
}

/// `(sup_t ||U||^2, int_0^T ||grad U||^2 dt)`.
pub fn energy_terms(traj: &Trajectory) -> (f64, f64) {
    let sup = traj.fields().iter().map(|u| u.l2_norm().powi(2)).fold(0.0, f64::max);
    let first = traj.times()[0] * traj.fields()[0].grad_l2_sq();
    let integral = first + dissipation_increments(traj).iter().sum::<f64>();
    (sup, integral)
}

/// Squared energy norm `sup_t ||U||_{L^2}^2 + 2 int_0^T ||grad U||_{L^2}^2 dt`.
pub fn energy_norm(traj: &Trajectory) -> f64 {
    let (sup, integral) = energy_terms(traj);
    sup + 2.0 * integral
}

/// Check `2/m + d/n = d/2`, `2 <= m <= inf`, `2 <= n <= 2d/(d-2)`.
pub fn interpolation_admissible(dim: usize, m: f64, n: f64) -> Result<()> {
    let d = dim as f64;
    let n_max = if dim == 2 { f64::INFINITY } else { 2.0 * d / (d - 2.0) };
    let lhs = 2.0 / m + d / n;
    if !(m >= 2.0 && n >= 2.0 && n <= n_max && (dim > 2 || n.is_finite()) && (lhs - d / 2.0).abs() < 1e-12) {
        return Err(Error::ExponentConditions(format!(
            "(m, n) = ({m}, {n}) is not admissible: need 2/m + {d}/n = {} with 2 <= m, 2 <= n <= {n_max}",
            d / 2.0
        )));
    }
    Ok(())
}

/// `||U||_{L^m_t L^n_x} / |U|_{2,Q_T}` with `|U|` the square root of [`energy_norm`].
pub fn interpolation_check(traj: &Trajectory, m: f64, n: f64) -> Result<f64> {
    check_exponent("m", m)?;
    interpolation_admissible(traj.grid().dim(), m, n)?;
    let norms: Vec<f64> = traj.fields().iter().map(|u| u.lp_norm(n)).collect();
    let num = lr_time(traj.times(), &norms, m);
    let den = energy_norm(traj).sqrt();
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::norms::besov_norm;
    use crate::spectral::random::random_field;
    use crate::spectral::{Grid, Rank};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn single_mode(g: &Grid, k: [i32; 3], amp: f64) -> SpectralField {
        let mut f = SpectralField::zeros(g, Rank::Vector);
        // polarized along an axis orthogonal to k
        let c = if k[2] == 0 { 2 } else { 0 };
        f.set_real_mode(c, k, Complex64::new(amp, 0.0)).unwrap();
        f
    }

    #[test]
    fn kato_single_mode_matches_calculus_max() {
        // sup_t t^{-s/2} e^{-a t} with a = |xi|^2 is attained at t* = -s/(2a)
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let u0 = single_mode(&g, [1, 1, 0], 0.5);
        let a = 2.0;
        let idx = BesovIndex::critical(3, 4.0, f64::INFINITY).unwrap();
        let s = idx.s;
        let tstar = -s / (2.0 * a);
        let mut times = geometric_times(4.0, 16, 8);
        times.retain(|t| (t - tstar).abs() > 1e-12);
        times.push(tstar);
        times.sort_by(f64::total_cmp);
        let traj = Trajectory::from_fn(times, |t| heat_evolve(&u0, t).unwrap()).unwrap();
        let r = kato_norm(&traj, &idx).unwrap();
        let expected = tstar.powf(-s / 2.0) * (-a * tstar).exp() * u0.lp_norm(4.0);
        assert!((r.value - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn kato_constant_field_peaks_at_last_sample() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let u = random_field(&g, Rank::Vector, 4, 1.0, true);
        let traj = Trajectory::from_fn(vec![0.0, 0.1, 0.5, 2.0], |_| u.clone()).unwrap();
        let idx = BesovIndex::critical(2, 4.0, f64::INFINITY).unwrap();
        let r = kato_norm(&traj, &idx).unwrap();
        let expected = 2f64.powf(-idx.s / 2.0) * u.lp_norm(4.0);
        assert!((r.value - expected).abs() < 1e-13 * expected);
        let z = Trajectory::zeros(&g, Rank::Vector, vec![0.5, 1.0]).unwrap();
        assert_eq!(kato_norm(&z, &idx).unwrap().value, 0.0);
    }

    #[test]
    fn finite_q_kato_of_constant_profile() {
        // t^{-s/2} c with s<0 on (0, T]: int_0^T t^{-sq/2} dt/t = T^{-sq/2} * 2/(-sq)
        let g = Grid::new(2, 16, 1.0).unwrap();
        let u = random_field(&g, Rank::Vector, 4, 1.0, true);
        let times = geometric_times(1.0, 20, 16);
        let traj = Trajectory::from_fn(times, |_| u.clone()).unwrap();
        let (s, q) = (-0.5, 4.0);
        let idx = BesovIndex::new(s, 4.0, q).unwrap();
        let r = kato_norm(&traj, &idx).unwrap();
        let expected = (2.0 / (-s * q)).powf(1.0 / q) * u.lp_norm(4.0);
        assert!((r.value - expected).abs() < 1e-4 * expected);
    }

    #[test]
    fn timespace_heat_single_mode_closed_form() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::for_grid(&g).unwrap();
        // |k| = 2*sqrt(2): entirely inside block 1
        let u0 = single_mode(&g, [2, 2, 0], 0.3);
        let a = 8.0;
        let big_t = 0.5;
        let mut times = vec![0.0];
        times.extend(geometric_times(big_t, 12, 4));
        let traj = Trajectory::from_fn(times, |t| heat_evolve(&u0, t).unwrap()).unwrap();
        let sp = -1.0 + 3.0 / 4.0;
        let idx = BesovIndex::new(sp + 2.0, 4.0, 1.0).unwrap();
        let r = timespace_besov_norm(&traj, 1.0, &idx, &p).unwrap();
        let expected = 2f64.powf(sp + 2.0) * u0.lp_norm(4.0) * (1.0 - (-a * big_t).exp()) / a;
        assert!((r.value - expected).abs() < 1e-12 * expected, "{} {}", r.value, expected);

        // r = inf reduces to the stationary Besov block value
        let rinf = timespace_besov_norm(&traj, f64::INFINITY, &idx, &p).unwrap();
        let stat = besov_norm(&u0, &idx, &p).unwrap();
        assert!((rinf.value - stat.value).abs() < 1e-13 * stat.value);
    }

    #[test]
    fn timespace_detects_undersampling() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::for_grid(&g).unwrap();
        let u = random_field(&g, Rank::Vector, 1, 1.0, true);
        // oscillating amplitude sampled far too coarsely
        let traj = Trajectory::from_fn(vec![0.0, 0.3, 0.6, 0.9, 1.2], |t| u.scaled((20.0 * t).sin().abs() + 1e-3)).unwrap();
        let idx = BesovIndex::new(0.0, 2.0, 2.0).unwrap();
        assert!(matches!(
            timespace_besov_norm(&traj, 2.0, &idx, &p),
            Err(Error::QuadratureResolution { .. })
        ));
    }

    #[test]
    fn energy_norm_closed_forms() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let u = random_field(&g, Rank::Vector, 3, 1.0, true);
        let static_traj = Trajectory::from_fn(vec![0.0, 0.25, 1.0, 1.5], |_| u.clone()).unwrap();
        let expected = u.l2_norm().powi(2) + 2.0 * 1.5 * u.grad_l2_sq();
        assert!((energy_norm(&static_traj) - expected).abs() < 1e-12 * expected);

        // heat flow of a |xi| = 1 mode: int ||grad u||^2 = ||u0||^2 (1 - e^{-2T}) / 2
        let u0 = single_mode(&g, [1, 0, 0], 0.7);
        let big_t = 2.0;
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * big_t / 10.0).collect();
        let traj = Trajectory::from_fn(times, |t| heat_evolve(&u0, t).unwrap()).unwrap();
        let e0 = u0.l2_norm().powi(2);
        let expected = e0 + e0 * (1.0 - (-2.0 * big_t).exp());
        assert!((energy_norm(&traj) - expected).abs() < 1e-12 * expected);

        let z = Trajectory::zeros(&g, Rank::Vector, vec![0.0, 1.0]).unwrap();
        assert_eq!(energy_norm(&z), 0.0);
    }

    #[test]
    fn interpolation_ratio_bounds() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let u0 = random_field(&g, Rank::Vector, 3, 1.0, true);
        let times: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let traj = Trajectory::from_fn(times, |t| heat_evolve(&u0, t).unwrap()).unwrap();
        let r = interpolation_check(&traj, f64::INFINITY, 2.0).unwrap();
        assert!(r <= 1.0 + 1e-15);
        let r = interpolation_check(&traj, 10.0 / 3.0, 10.0 / 3.0).unwrap();
        assert!(r.is_finite() && r > 0.0);
        assert!(interpolation_check(&traj, 3.0, 3.0).is_err());
        let z = Trajectory::zeros(&g, Rank::Vector, vec![0.0, 1.0]).unwrap();
        assert_eq!(interpolation_check(&z, 10.0 / 3.0, 10.0 / 3.0).unwrap(), 0.0);
    }
}
