//! Diagnostics evaluated on a trajectory: compensated L^p norms, energy slack, and the
//! pairing of a field against concentrating bumps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mild::energy_ledger;
use crate::spectral::{Mollifier, SpectralField};
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingPoint {
    pub lambda: f64,
    /// One pairing per component.
    pub components: Vec<f64>,
    /// Euclidean magnitude of `components`.
    pub magnitude: f64,
}

/// Dyadic scales `2^m` between twice the grid spacing and half the box.
pub fn dyadic_scales(field: &SpectralField) -> Vec<f64> {
    let g = field.grid();
    let (lo, hi) = (2.0 * g.spacing(), g.box_length() / 2.0);
    let mut m = lo.log2().ceil() as i32;
    let mut out = Vec::new();
    while 2f64.powi(m) <= hi {
        out.push(2f64.powi(m));
        m += 1;
    }
    out.reverse();
    out
}

/// `int u(x) lambda^{1-d} theta((x - center) / lambda) dx` for the unit-mass bump `theta`
/// of radius one, evaluated as `lambda sum_k c_k e^{i xi.center} theta_hat(lambda |xi|)`.
///
/// Scales below twice the grid spacing (bump unresolved) or above half the box (bump
/// overlaps its periodic images) are refused.
pub fn vanishing_test(field: &SpectralField, center: &[f64], lambdas: &[f64]) -> Result<Vec<PairingPoint>> {
    let g = field.grid();
    let dim = g.dim();
    if center.len() != dim {
        return Err(Error::InvalidArgument(format!("center needs {dim} components, got {center:?}")));
    }
    let (lo, hi) = (2.0 * g.spacing(), g.box_length() / 2.0);
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !(lambda >= lo * (1.0 - 1e-12) && lambda <= hi * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "scale {lambda} outside the resolved range [{lo}, {hi}]"
            )));
        }
        let table = Mollifier::new(lambda)?.symbol_table(g)?;
        let components: Vec<f64> = field
            .components()
            .iter()
            .map(|comp| {
                let s: f64 = comp
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.norm_sqr() > 0.0)
                    .map(|(idx, c)| {
                        let arg: f64 = g.xi(idx).iter().zip(center).map(|(a, b)| a * b).sum();
                        table[idx] * (c * num_complex::Complex64::from_polar(1.0, arg)).re
                    })
                    .sum();
                lambda * s
            })
            .collect();
        let magnitude = components.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.push(PairingPoint {
            lambda,
            components,
            magnitude,
        });
    }
    Ok(out)
}

/// `(1 - d/p) / 2`, requiring `d < p <= infinity`.
pub fn leray_exponent(dim: usize, p: f64) -> Result<f64> {
    if !(p > dim as f64) {
        return Err(Error::ExponentConditions(format!("the compensated norm needs p > {dim}, got {p}")));
    }
    Ok(if p.is_infinite() { 0.5 } else { (1.0 - dim as f64 / p) / 2.0 })
}

/// `||u(t)||_{L^p} (T_end - t)^{(1 - d/p)/2}` at every sample; zero at and after `T_end`.
pub fn leray_monitor(traj: &Trajectory, p: f64, t_end: f64) -> Result<Vec<f64>> {
    let e = leray_exponent(traj.grid().dim(), p)?;
    if !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("end time must be finite, got {t_end}")));
    }
    Ok(traj
        .times()
        .iter()
        .zip(traj.fields())
        .map(|(&t, u)| {
            let gap = t_end - t;
            if gap <= 0.0 {
                0.0
            } else {
                u.lp_norm(p) * gap.powf(e)
            }
        })
        .collect())
}

/// Energy inequality slack between sample pairs:
/// `slack(i, j) = |U_i|^2 + 2 int int (a (x) U) : grad U - |U_j|^2 - 2 int |grad U|^2`
/// with both integrals over `[t_i, t_j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySlack {
    pub times: Vec<f64>,
    /// `slack(0, n)`.
    pub from_start: Vec<f64>,
    /// Minimum over all pairs `i < j`; zero for a single sample.
    pub min_slack: f64,
    pub min_pair: Option<(usize, usize)>,
    /// Largest `|U(t)|^2 + 2 int_0^t |grad U|^2`.
    pub scale: f64,
}

pub fn energy_slack(traj: &Trajectory, background: Option<&Trajectory>) -> Result<EnergySlack> {
    let l = energy_ledger(traj, background)?;
    let n = l.times.len();
    // balance(n) = |U_0|^2 + W(t_n) - |U_n|^2 - D(t_n); slack(i, j) = balance(j) - balance(i)
    let balance: Vec<f64> = (0..n)
        .map(|k| l.energy[0] + l.work[k] - l.energy[k] - (l.dissipation[k] - l.dissipation[0]))
        .collect();
    let from_start: Vec<f64> = balance.iter().map(|b| b - balance[0]).collect();
    let mut min_slack = 0.0;
    let mut min_pair = None;
    for i in 0..n {
        for j in i + 1..n {
            let s = balance[j] - balance[i];
            if min_pair.is_none() || s < min_slack {
                min_slack = s;
                min_pair = Some((i, j));
            }
        }
    }
    Ok(EnergySlack {
        times: l.times,
        from_start,
        min_slack,
        min_pair,
        scale: l.scale,
    })
}

/// A named diagnostic sampled at the trajectory times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

impl Series {
    /// Two-column CSV `t,<name>` in shortest round-trip scientific notation.
    pub fn to_csv(&self, times: &[f64]) -> String {
        let mut out = format!("t,{}\n", self.name);
        for (t, v) in times.iter().zip(&self.values) {
            out.push_str(&format!("{t:e},{v:e}\n"));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndTimeSource {
    /// No blow-up was detected; `T_end` is the configured horizon.
    Horizon,
    /// The continuation heuristic halted; `T_end` is the halt time.
    ContinuationHalt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub times: Vec<f64>,
    pub t_end: f64,
    pub t_end_source: EndTimeSource,
    pub series: Vec<Series>,
    pub min_energy_slack: Option<f64>,
    pub energy_scale: Option<f64>,
}

impl DiagnosticsReport {
    pub fn get(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}

/// Which series to compute; `inf` exponents are written as `null` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticSet {
    #[serde(with = "ext_real_vec")]
    pub lp: Vec<f64>,
    /// `(p, q)` of the critical Besov norm.
    pub besov: Option<(f64, f64)>,
    #[serde(with = "ext_real_vec")]
    pub leray: Vec<f64>,
    pub energy: bool,
    pub divergence: bool,
}

impl Default for DiagnosticSet {
    fn default() -> Self {
        Self {
            lp: vec![2.0, f64::INFINITY],
            besov: Some((4.0, 4.0)),
            leray: vec![4.0, f64::INFINITY],
            energy: true,
            divergence: true,
        }
    }
}

mod ext_real_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| if x.is_infinite() { None } else { Some(*x) }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|x| x.unwrap_or(f64::INFINITY))
            .collect())
    }
}

fn exponent_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

impl DiagnosticSet {
    pub fn validate(&self, dim: usize) -> Result<()> {
        for &p in &self.lp {
            if !(p >= 1.0) {
                return Err(Error::InvalidArgument(format!("L^p exponent must be >= 1, got {p}")));
            }
        }
        for &p in &self.leray {
            leray_exponent(dim, p)?;
        }
        if let Some((p, q)) = self.besov {
            crate::besov::BesovIndex::critical(dim, p, q)?;
        }
        Ok(())
    }

    /// Series names in output order.
    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.lp.iter().map(|&p| format!("lp_{}", exponent_label(p))).collect();
        if let Some((p, q)) = self.besov {
            names.push(format!("besov_{}_{}", exponent_label(p), exponent_label(q)));
        }
        names.extend(self.leray.iter().map(|&p| format!("leray_{}", exponent_label(p))));
        if self.energy {
            names.push("energy_residual".into());
        }
        if self.divergence {
            names.push("divergence".into());
        }
        names
    }

    /// Evaluate on `traj`. The energy series is `|slack(0, t)|` and uses `background` as
    /// the linear coefficient when present.
    pub fn evaluate(
        &self,
        traj: &Trajectory,
        background: Option<&Trajectory>,
        t_end: f64,
        t_end_source: EndTimeSource,
    ) -> Result<DiagnosticsReport> {
        self.validate(traj.grid().dim())?;
        let mut series = Vec::new();
        let mut names = self.names().into_iter();
        let mut push = |values: Vec<f64>| {
            series.push(Series {
                name: names.next().expect("one name per series"),
                values,
            })
        };
        for &p in &self.lp {
            push(traj.fields().iter().map(|u| u.lp_norm(p)).collect());
        }
        if let Some((p, q)) = self.besov {
            push(super::rescale::critical_norm_series(traj, p, q)?);
        }
        for &p in &self.leray {
            push(leray_monitor(traj, p, t_end)?);
        }
        let (mut min_energy_slack, mut energy_scale) = (None, None);
        if self.energy {
            let e = energy_slack(traj, background)?;
            push(e.from_start.iter().map(|s| s.abs()).collect());
            min_energy_slack = Some(e.min_slack);
            energy_scale = Some(e.scale);
        }
        if self.divergence {
            push(traj
                .fields()
                .iter()
                .map(crate::spectral::divergence_residual)
                .collect::<Result<Vec<_>>>()?);
        }
        Ok(DiagnosticsReport {
            times: traj.times().to_vec(),
            t_end,
            t_end_source,
            series,
            min_energy_slack,
            energy_scale,
        })
    }
}
