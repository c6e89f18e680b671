//! Heat semigroup, the Oseen operator `e^{t Delta} P div`, Duhamel integrals, and
//! measured constants for the Kato-space smoothing estimates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::besov::{critical_exponent, DyadicPartition};
use crate::fit::fit_line;
use crate::error::{Error, Result};
use crate::spectral::{apply_radial, divergence, leray_project, Grid, Rank, SpectralField};
use crate::trajectory::Trajectory;

/// `e^{t Delta} f` (symbol `exp(-|xi|^2 t)`).
pub fn heat_evolve(field: &SpectralField, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("heat flow needs t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(field.clone());
    }
    let xi2 = field.grid().xi2_table();
    Ok(field.map_modes(|i, c| c * (-xi2[i] * t).exp()))
}

/// Fitted decay rate of `ln ||e^{t Delta} Delta_j u||_{L^2}` for one block, with the
/// bounds `-(8/3)^2 4^j` and `-(3/4)^2 4^j` set by the block's frequency support.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockDecay {
    pub j: i32,
    pub slope: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BlockDecay {
    pub fn within(&self) -> bool {
        let tol = 1e-9 * self.lower.abs();
        self.slope >= self.lower - tol && self.slope <= self.upper + tol
    }
}

/// Per-block heat decay slopes, sampled at `samples` equally spaced times on
/// `[0, 4^{-j}]` for every block of `u0` with non-zero energy.
pub fn heat_block_decay(u0: &SpectralField, partition: &DyadicPartition, samples: usize) -> Result<Vec<BlockDecay>> {
    if samples < 2 {
        return Err(Error::InvalidArgument("decay fit needs at least two samples".into()));
    }
    let mut out = Vec::new();
    for j in partition.blocks() {
        let block = partition.block(u0, j)?;
        if block.l2_norm() == 0.0 {
            continue;
        }
        let four_j = 4f64.powi(j);
        let span = 1.0 / four_j;
        let ts: Vec<f64> = (0..samples).map(|i| span * i as f64 / (samples - 1) as f64).collect();
        let logs = ts
            .iter()
            .map(|&t| Ok(heat_evolve(&block, t)?.l2_norm().ln()))
            .collect::<Result<Vec<_>>>()?;
        let (slope, _) = fit_line(&ts, &logs).expect("distinct sample times");
        out.push(BlockDecay {
            j,
            slope,
            lower: -(8.0f64 / 3.0).powi(2) * four_j,
            upper: -(0.75f64).powi(2) * four_j,
        });
    }
    Ok(out)
}

/// `P div F` of a matrix field, contracting the second index.
pub fn leray_divergence(tensor: &SpectralField) -> Result<SpectralField> {
    tensor.require_rank(Rank::Matrix)?;
    leray_project(&divergence(tensor)?)
}

/// `e^{t Delta} P div F`.
pub fn oseen_apply(tensor: &SpectralField, t: f64) -> Result<SpectralField> {
    heat_evolve(&leray_divergence(tensor)?, t)
}

/// How the Duhamel time integral is discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureKind {
    /// Source piecewise linear between samples, integrated exactly against the
    /// heat factor per mode (exponential time differencing).
    ExactExponential,
    /// Heat factor propagated exactly, source by the trapezoid rule on each substep.
    CompositeTrapezoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureScheme {
    pub kind: QuadratureKind,
    pub substeps: usize,
    pub error_estimate: bool,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self {
            kind: QuadratureKind::ExactExponential,
            substeps: 1,
            error_estimate: true,
        }
    }
}

impl QuadratureScheme {
    pub fn validate(&self) -> Result<()> {
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one substep".into()));
        }
        Ok(())
    }

    pub fn refined(&self) -> Self {
        Self {
            substeps: self.substeps * 2,
            ..*self
        }
    }
}

/// Weights of the exponential integrator for a linear source over one step:
/// `int_0^h e^{-a(h-s)} g(s) ds = w_start g(0) + w_end g(h)`.
pub fn etd_weights(a: f64, h: f64) -> (f64, f64) {
    let z = a * h;
    if z < 0.5 {
        // w_start/h = sum_{n>=2} (-1)^n (n-1)/n! z^{n-2}, w_end/h = sum_{n>=2} (-1)^n z^{n-2}/n!
        let mut w1 = 0.0;
        let mut w2 = 0.0;
        let mut fact = 2.0;
        let mut zp = 1.0;
        for n in 2..24 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            w1 += sign * (n as f64 - 1.0) * zp / fact;
            w2 += sign * zp / fact;
            zp *= z;
            fact *= (n + 1) as f64;
        }
        (h * w1, h * w2)
    } else {
        let e = (-z).exp();
        (h * (1.0 - e * (1.0 + z)) / (z * z), h * (z - 1.0 + e) / (z * z))
    }
}

/// Duhamel integral `D(t) = int_0^t e^{(t-s) Delta} G(s) ds` evaluated at every sample
/// time, for a source `G` given at `times`. Before the first sample the source is
/// held at its first value.
pub fn duhamel_from_sources(
    times: &[f64],
    sources: &[SpectralField],
    scheme: &QuadratureScheme,
) -> Result<Vec<SpectralField>> {
    scheme.validate()?;
    let first = sources
        .first()
        .ok_or_else(|| Error::InvalidArgument("Duhamel integral needs at least one sample".into()))?;
    let grid = first.grid().clone();
    let xi2 = grid.xi2_table();
    let comps = first.num_components();
    let mut state: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); grid.len()]; comps];
    let mut out = Vec::with_capacity(times.len());

    // [0, t_0] with constant source
    let t0 = times[0];
    if t0 > 0.0 {
        for (c, st) in state.iter_mut().enumerate() {
            let g = first.component(c);
            for (idx, s) in st.iter_mut().enumerate() {
                let a = xi2[idx];
                let (w1, w2) = etd_weights(a, t0);
                *s = g[idx] * (w1 + w2);
            }
        }
    }
    out.push(SpectralField::from_coeffs(&grid, first.rank(), state.clone())?);

    let m = scheme.substeps;
    let mut weights = vec![(0.0, 0.0, 0.0); grid.len()];
    for n in 1..times.len() {
        let h = (times[n] - times[n - 1]) / m as f64;
        for (w, &a) in weights.iter_mut().zip(xi2) {
            let decay = (-a * h).exp();
            let (w1, w2) = match scheme.kind {
                QuadratureKind::ExactExponential => etd_weights(a, h),
                QuadratureKind::CompositeTrapezoid => (0.5 * h * decay, 0.5 * h),
            };
            *w = (decay, w1, w2);
        }
        let (ga, gb) = (&sources[n - 1], &sources[n]);
        for (c, st) in state.iter_mut().enumerate() {
            let (a_c, b_c) = (ga.component(c), gb.component(c));
            for (idx, s) in st.iter_mut().enumerate() {
                let (decay, w1, w2) = weights[idx];
                for sub in 0..m {
                    let ta = sub as f64 / m as f64;
                    let tb = (sub + 1) as f64 / m as f64;
                    let g0 = a_c[idx] * (1.0 - ta) + b_c[idx] * ta;
                    let g1 = a_c[idx] * (1.0 - tb) + b_c[idx] * tb;
                    *s = *s * decay + g0 * w1 + g1 * w2;
                }
            }
        }
        out.push(SpectralField::from_coeffs(&grid, first.rank(), state.clone())?);
    }
    Ok(out)
}

/// Duhamel output together with a Richardson estimate of its quadrature error
/// (largest `L^2` difference to the coarser computation over common samples, divided by 3).
#[derive(Clone, Debug)]
pub struct DuhamelResult {
    pub trajectory: Trajectory,
    pub error_estimate: Option<f64>,
}

/// `int_0^t e^{(t-s) Delta} P div F(s) ds` at every sample time of the tensor trajectory `F`.
pub fn duhamel_trajectory(forcing: &Trajectory, scheme: &QuadratureScheme) -> Result<DuhamelResult> {
    let sources = forcing
        .fields()
        .iter()
        .map(leray_divergence)
        .collect::<Result<Vec<_>>>()?;
    let fields = duhamel_from_sources(forcing.times(), &sources, scheme)?;
    let trajectory = Trajectory::new(forcing.times().to_vec(), fields)?;
    let error_estimate = if scheme.error_estimate {
        Some(richardson(forcing.times(), &sources, &trajectory, scheme)?)
    } else {
        None
    };
    Ok(DuhamelResult {
        trajectory,
        error_estimate,
    })
}

fn richardson(
    times: &[f64],
    sources: &[SpectralField],
    fine: &Trajectory,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    match scheme.kind {
        QuadratureKind::CompositeTrapezoid if scheme.substeps >= 2 => {
            let coarse_scheme = QuadratureScheme {
                substeps: scheme.substeps / 2,
                ..*scheme
            };
            let coarse = duhamel_from_sources(times, sources, &coarse_scheme)?;
            for (a, b) in fine.fields().iter().zip(&coarse) {
                worst = worst.max(a.sub(b)?.l2_norm());
            }
        }
        _ => {
            if times.len() < 3 {
                return Ok(0.0);
            }
            let mut keep: Vec<usize> = (0..times.len()).step_by(2).collect();
            if keep.last() != Some(&(times.len() - 1)) {
                keep.push(times.len() - 1);
            }
            let ct: Vec<f64> = keep.iter().map(|&i| times[i]).collect();
            let cs: Vec<SpectralField> = keep.iter().map(|&i| sources[i].clone()).collect();
            let coarse = duhamel_from_sources(&ct, &cs, scheme)?;
            for (&i, b) in keep.iter().zip(&coarse) {
                worst = worst.max(fine.fields()[i].sub(b)?.l2_norm());
            }
        }
    }
    Ok(worst / 3.0)
}

/// Duhamel integral at a single time `t` within the forcing's span; the forcing is
/// linearly interpolated at `t`.
pub fn duhamel_integral(forcing: &Trajectory, t: f64, scheme: &QuadratureScheme) -> Result<DuhamelResult> {
    let last = forcing.horizon();
    if t > last * (1.0 + 1e-12) {
        return Err(Error::CoverageGap { requested: t, last });
    }
    let mut times: Vec<f64> = forcing.times().iter().copied().filter(|&s| s < t).collect();
    let mut fields: Vec<SpectralField> = forcing.fields()[..times.len()].to_vec();
    times.push(t);
    fields.push(forcing.interpolate(t)?);
    let truncated = Trajectory::new(times, fields)?;
    let full = duhamel_trajectory(&truncated, scheme)?;
    Ok(full)
}

/// `s2` from the scaling relation `s2 - d/p2 = 1 + s1 - d/p1`, after checking the
/// hypotheses `1 <= p1 <= p2`, `s1 > -2`, `d/p1 - d/p2 < 1`.
pub fn kato_target_exponent(dim: usize, s1: f64, p1: f64, p2: f64) -> Result<f64> {
    let d = dim as f64;
    if !(p1 >= 1.0 && p2 >= p1) {
        return Err(Error::ExponentConditions(format!("need 1 <= p1 <= p2, got p1 = {p1}, p2 = {p2}")));
    }
    if !(s1 > -2.0) {
        return Err(Error::ExponentConditions(format!("need s1 > -2, got {s1}")));
    }
    let gap = d / p1 - d / p2;
    if !(gap < 1.0) {
        return Err(Error::ExponentConditions(format!("need {d}/p1 - {d}/p2 < 1, got {gap}")));
    }
    Ok(1.0 + s1 - d / p1 + d / p2)
}

fn sup_weighted(times: &[f64], norms: &[f64], s: f64) -> f64 {
    times
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t > 0.0)
        .map(|(&t, &n)| t.powf(-s / 2.0) * n)
        .fold(0.0, f64::max)
}

/// Measured `||int_0^t e^{(t-s)Delta} P div F||_{K^{s2}_{p2}} / ||F||_{K^{s1}_{p1}}`.
pub fn verify_kato_estimate(forcing: &Trajectory, s1: f64, p1: f64, p2: f64, scheme: &QuadratureScheme) -> Result<f64> {
    let s2 = kato_target_exponent(forcing.grid().dim(), s1, p1, p2)?;
    let fnorms: Vec<f64> = forcing.fields().iter().map(|f| f.lp_norm(p1)).collect();
    let den = sup_weighted(forcing.times(), &fnorms, s1);
    if den == 0.0 {
        return Ok(0.0);
    }
    let d = duhamel_trajectory(forcing, &QuadratureScheme { error_estimate: false, ..*scheme })?;
    let dnorms: Vec<f64> = d.trajectory.fields().iter().map(|f| f.lp_norm(p2)).collect();
    Ok(sup_weighted(forcing.times(), &dnorms, s2) / den)
}

/// A tensor forcing `F(t)` with exact time derivatives `d^k F / dt^k`.
pub trait ForcingSource {
    fn grid(&self) -> &Grid;
    fn eval(&self, t: f64, order: usize) -> Result<SpectralField>;
}

/// Time-independent forcing.
pub struct StationaryForcing(pub SpectralField);

impl ForcingSource for StationaryForcing {
    fn grid(&self) -> &Grid {
        self.0.grid()
    }

    fn eval(&self, _t: f64, order: usize) -> Result<SpectralField> {
        Ok(if order == 0 {
            self.0.clone()
        } else {
            SpectralField::zeros(self.0.grid(), self.0.rank())
        })
    }
}

/// `F(t) = v(t) (x) v(t)` with `v = e^{t Delta} u0`; `d^k F = sum_i C(k,i) Delta^i v (x) Delta^{k-i} v`.
pub struct HeatProductForcing {
    pub u0: SpectralField,
}

impl ForcingSource for HeatProductForcing {
    fn grid(&self) -> &Grid {
        self.u0.grid()
    }

    fn eval(&self, t: f64, order: usize) -> Result<SpectralField> {
        let v = heat_evolve(&self.u0, t)?;
        let mut lap = vec![v];
        for i in 0..order {
            lap.push(crate::spectral::laplacian(&lap[i]));
        }
        let mut out = SpectralField::zeros(self.u0.grid(), Rank::Matrix);
        let mut binom = 1.0;
        for i in 0..=order {
            out.axpy(binom, &crate::spectral::dealias_product(&lap[i], &lap[order - i])?);
            binom = binom * (order - i) as f64 / (i + 1) as f64;
        }
        Ok(out)
    }
}

/// `(-Delta)^{l/2}`; its `L^p` norms are equivalent to those of the full `l`-th gradient.
fn grad_power(f: &SpectralField, l: usize) -> Result<SpectralField> {
    if l == 0 {
        return Ok(f.clone());
    }
    apply_radial(f, |r| r.powi(l as i32))
}

/// Measured constant of the weighted smoothing estimate
/// `|| t^{k + l/2} d_t^k grad^l D ||_{K^{s2}_{p2}} <= C sum_{a<=k, b<=l} || t^{a + b/2} d_t^a grad^b F ||_{K^{s1}_{p1}}`
/// where `D` is the Duhamel integral of `P div F`. Time derivatives of `D` come from
/// `d_t D = Delta D + P div F`, applied recursively.
#[allow(clippy::too_many_arguments)]
pub fn verify_smoothing_derivatives(
    forcing: &dyn ForcingSource,
    times: &[f64],
    k: usize,
    l: usize,
    s1: f64,
    p1: f64,
    p2: f64,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    let s2 = kato_target_exponent(forcing.grid().dim(), s1, p1, p2)?;
    let f0 = times.iter().map(|&t| forcing.eval(t, 0)).collect::<Result<Vec<_>>>()?;
    let traj = Trajectory::new(times.to_vec(), f0)?;
    let d = duhamel_trajectory(&traj, &QuadratureScheme { error_estimate: false, ..*scheme })?;

    let mut lhs: f64 = 0.0;
    let mut rhs_terms = vec![0.0f64; (k + 1) * (l + 1)];
    for (i, &t) in times.iter().enumerate() {
        if t <= 0.0 {
            continue;
        }
        let derivs = (0..=k).map(|a| forcing.eval(t, a)).collect::<Result<Vec<_>>>()?;
        // d_t^k D = Delta^k D + sum_{i<k} Delta^{k-1-i} d_t^i G
        let mut dk = d.trajectory.fields()[i].clone();
        for _ in 0..k {
            dk = crate::spectral::laplacian(&dk);
        }
        for (a, fa) in derivs.iter().enumerate().take(k) {
            let mut g = leray_divergence(fa)?;
            for _ in 0..(k - 1 - a) {
                g = crate::spectral::laplacian(&g);
            }
            dk.axpy(1.0, &g);
        }
        let w = t.powf(k as f64 + l as f64 / 2.0);
        let val = w * grad_power(&dk, l)?.lp_norm(p2);
        lhs = lhs.max(t.powf(-s2 / 2.0) * val);
        for (a, fa) in derivs.iter().enumerate() {
            for b in 0..=l {
                let w = t.powf(a as f64 + b as f64 / 2.0);
                let v = t.powf(-s1 / 2.0) * w * grad_power(fa, b)?.lp_norm(p1);
                let slot = &mut rhs_terms[a * (l + 1) + b];
                *slot = slot.max(v);
            }
        }
    }
    let rhs: f64 = rhs_terms.iter().sum();
    Ok(if rhs == 0.0 { 0.0 } else { lhs / rhs })
}

/// One row of an estimate-verification report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub label: String,
    pub s1: f64,
    pub p1: f64,
    pub p2: f64,
    pub s2: f64,
    pub constant: f64,
    pub refined_constant: f64,
}

impl EstimateRow {
    /// `refined / coarse` (1 when both vanish).
    pub fn refinement_ratio(&self) -> f64 {
        if self.constant == 0.0 {
            if self.refined_constant == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.refined_constant / self.constant
        }
    }
}

pub const ESTIMATE_CSV_HEADER: &str = "label,s1,p1,p2,s2,constant,refined_constant,refinement_ratio";

pub fn estimate_csv(rows: &[EstimateRow]) -> String {
    let mut out = String::from(ESTIMATE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:e},{:e},{}\n",
            r.label,
            r.s1,
            r.p1,
            r.p2,
            r.s2,
            r.constant,
            r.refined_constant,
            r.refinement_ratio()
        ));
    }
    out
}

/// The critical Kato exponent `s_p` used for `F = u (x) u` bookkeeping.
pub fn kato_exponent(dim: usize, p: f64) -> f64 {
    critical_exponent(dim, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_decay_rates_respect_support() {
        use crate::spectral::random::random_field;
        let g = Grid::new(3, 16, 2.0 * std::f64::consts::PI).unwrap();
        let p = DyadicPartition::for_grid(&g).unwrap();
        let u = random_field(&g, Rank::Vector, 4, 0.5, true);
        let rates = heat_block_decay(&u, &p, 8).unwrap();
        assert!(rates.len() >= 3);
        assert!(rates.iter().all(BlockDecay::within), "{rates:?}");
        // a single mode decays at exactly |xi|^2
        let mut m = SpectralField::zeros(&g, Rank::Scalar);
        m.set_real_mode(0, [3, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        for r in heat_block_decay(&m, &p, 5).unwrap() {
            assert!((r.slope + 9.0).abs() < 1e-9);
        }
        assert!(heat_block_decay(&m, &p, 1).is_err());
    }
    use crate::spectral::random::random_band_limited;
    use std::f64::consts::PI;

    fn grid3() -> Grid {
        Grid::new(3, 16, 2.0 * PI).unwrap()
    }

    #[test]
    fn heat_basics() {
        let g = grid3();
        let mut f = SpectralField::zeros(&g, Rank::Scalar);
        f.set_real_mode(0, [2, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        let out = heat_evolve(&f, 0.25).unwrap();
        assert!((out.coeff(0, [2, 0, 0]).unwrap().re - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(heat_evolve(&f, 0.0).unwrap().relative_difference(&f), 0.0);
        assert!(heat_evolve(&f, -1.0).is_err());
        let u = random_band_limited(&g, Rank::Vector, 1, 1.0, 6.0, true);
        let a = heat_evolve(&heat_evolve(&u, 0.1).unwrap(), 0.3).unwrap();
        let b = heat_evolve(&u, 0.4).unwrap();
        assert!(a.relative_difference(&b) < 1e-12);
    }

    #[test]
    fn etd_weights_series_and_closed_form_agree() {
        for &a in &[0.0, 1e-8, 0.3, 0.49, 0.51, 3.0, 100.0] {
            let h = 1.0;
            let (w1, w2) = etd_weights(a, h);
            // brute-force quadrature of the two hat functions against e^{-a(h-s)}
            let n = 200000;
            let (mut b1, mut b2) = (0.0, 0.0);
            for i in 0..n {
                let s = (i as f64 + 0.5) / n as f64;
                let e = (-a * (h - s)).exp();
                b1 += e * (1.0 - s) / n as f64;
                b2 += e * s / n as f64;
            }
            assert!((w1 - b1).abs() < 1e-6 * b1 && (w2 - b2).abs() < 1e-6 * b2, "a = {a}");
        }
        let (w1, w2) = etd_weights(0.4999999, 1.0);
        let (v1, v2) = etd_weights(0.5000001, 1.0);
        assert!((w1 - v1).abs() < 1e-7 && (w2 - v2).abs() < 1e-7);
    }

    #[test]
    fn oseen_kills_isotropic_tensor_and_is_divergence_free() {
        let g = grid3();
        let phi = random_band_limited(&g, Rank::Scalar, 2, 1.0, 6.0, false);
        let mut iso = SpectralField::zeros(&g, Rank::Matrix);
        for i in 0..3 {
            iso.component_mut(i * 3 + i).copy_from_slice(phi.component(0));
        }
        assert!(oseen_apply(&iso, 0.1).unwrap().max_abs_coeff() < 1e-14);

        let f = random_band_limited(&g, Rank::Matrix, 3, 1.0, 6.0, false);
        let out = oseen_apply(&f, 0.05).unwrap();
        assert!(crate::spectral::divergence_residual(&out).unwrap() < 1e-12);
    }

    #[test]
    fn oseen_single_mode_hand_contraction() {
        // F = e_0 (x) e_1 * cos(x_1): div F = (d_1 F_01, ...) = (-sin x_1, 0, 0), already solenoidal
        let g = grid3();
        let f = SpectralField::from_fn(&g, Rank::Matrix, |x| {
            let mut v = vec![0.0; 9];
            v[1] = x[1].cos();
            v
        });
        let t = 0.3;
        let out = oseen_apply(&f, t).unwrap();
        let expected = SpectralField::from_fn(&g, Rank::Vector, |x| vec![-(-t).exp() * x[1].sin(), 0.0, 0.0]);
        assert!(out.relative_difference(&expected) < 1e-14);
    }

    #[test]
    fn duhamel_constant_source_closed_form() {
        let g = grid3();
        let f = SpectralField::from_fn(&g, Rank::Matrix, |x| {
            let mut v = vec![0.0; 9];
            v[1] = (2.0 * x[1]).cos();
            v
        });
        let times: Vec<f64> = (0..=7).map(|i| 0.1 * i as f64).collect();
        let traj = Trajectory::from_fn(times, |_| f.clone()).unwrap();
        let t = 0.55;
        let out = duhamel_integral(&traj, t, &QuadratureScheme::default()).unwrap();
        let a = 4.0;
        let expected = leray_divergence(&f).unwrap().scaled((1.0 - (-a * t).exp()) / a);
        assert!(out.trajectory.last().relative_difference(&expected) < 1e-14);
        assert!(out.error_estimate.unwrap() < 1e-14);
        assert!(duhamel_integral(&traj, 0.8, &QuadratureScheme::default()).is_err());
    }

    #[test]
    fn trapezoid_scheme_converges_at_second_order() {
        let g = grid3();
        let f = random_band_limited(&g, Rank::Matrix, 4, 1.0, 3.0, false);
        let times: Vec<f64> = (0..=4).map(|i| 0.25 * i as f64).collect();
        let traj = Trajectory::from_fn(times, |t| f.scaled((3.0 * t).cos())).unwrap();
        let exact = duhamel_trajectory(&traj, &QuadratureScheme::default()).unwrap().trajectory;
        let mut errs = Vec::new();
        for m in [4, 8, 16] {
            let s = QuadratureScheme {
                kind: QuadratureKind::CompositeTrapezoid,
                substeps: m,
                error_estimate: true,
            };
            let r = duhamel_trajectory(&traj, &s).unwrap();
            errs.push(r.trajectory.last().sub(exact.last()).unwrap().l2_norm());
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!((order1 - 2.0).abs() < 0.15 && (order2 - 2.0).abs() < 0.1, "{order1} {order2}");
    }

    #[test]
    fn duhamel_is_linear_and_divergence_free() {
        let g = grid3();
        let f = random_band_limited(&g, Rank::Matrix, 5, 1.0, 5.0, false);
        let h = random_band_limited(&g, Rank::Matrix, 6, 1.0, 5.0, false);
        let times: Vec<f64> = (0..=5).map(|i| 0.1 * i as f64).collect();
        let tf = Trajectory::from_fn(times.clone(), |t| f.scaled(1.0 + t)).unwrap();
        let th = Trajectory::from_fn(times.clone(), |t| h.scaled(t * t)).unwrap();
        let tc = Trajectory::from_fn(times, |t| {
            let mut x = f.scaled(2.0 * (1.0 + t));
            x.axpy(-3.0 * t * t, &h);
            x
        })
        .unwrap();
        let s = QuadratureScheme::default();
        let df = duhamel_trajectory(&tf, &s).unwrap().trajectory;
        let dh = duhamel_trajectory(&th, &s).unwrap().trajectory;
        let dc = duhamel_trajectory(&tc, &s).unwrap().trajectory;
        for i in 0..dc.len() {
            let mut comb = df.fields()[i].scaled(2.0);
            comb.axpy(-3.0, &dh.fields()[i]);
            assert!(comb.relative_difference(&dc.fields()[i]) < 1e-12);
            assert!(crate::spectral::divergence_residual(&dc.fields()[i]).unwrap() < 1e-12);
        }
    }

    #[test]
    fn kato_estimate_refuses_bad_exponents() {
        assert!(kato_target_exponent(3, -0.5, 2.0, 6.0).is_err());
        assert!(kato_target_exponent(3, -2.0, 2.0, 4.0).is_err());
        assert!(kato_target_exponent(3, -0.5, 4.0, 2.0).is_err());
        let s2 = kato_target_exponent(3, -0.5, 2.0, 4.0).unwrap();
        assert!((s2 + 0.25).abs() < 1e-15);
    }

    #[test]
    fn smoothing_reduces_to_kato_estimate() {
        let g = grid3();
        let u0 = random_band_limited(&g, Rank::Vector, 7, 1.0, 4.0, true);
        let src = HeatProductForcing { u0 };
        let times = crate::trajectory::geometric_times(0.5, 10, 2);
        let s = QuadratureScheme::default();
        let a = verify_smoothing_derivatives(&src, &times, 0, 0, -0.5, 2.0, 4.0, &s).unwrap();
        let traj = Trajectory::from_fn(times.clone(), |t| src.eval(t, 0).unwrap()).unwrap();
        let b = verify_kato_estimate(&traj, -0.5, 2.0, 4.0, &s).unwrap();
        assert!((a - b).abs() < 1e-14 * b);
    }

    #[test]
    fn heat_product_derivative_matches_finite_difference() {
        let g = grid3();
        let u0 = random_band_limited(&g, Rank::Vector, 8, 1.0, 3.0, true);
        let src = HeatProductForcing { u0 };
        let (t, h) = (0.2, 1e-4);
        let fd = src.eval(t + h, 0).unwrap().sub(&src.eval(t - h, 0).unwrap()).unwrap().scaled(0.5 / h);
        let exact = src.eval(t, 1).unwrap();
        assert!(fd.relative_difference(&exact) < 1e-6);
        let fd2 = src.eval(t + h, 1).unwrap().sub(&src.eval(t - h, 1).unwrap()).unwrap().scaled(0.5 / h);
        assert!(fd2.relative_difference(&src.eval(t, 2).unwrap()) < 1e-6);
    }
}
