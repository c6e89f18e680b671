use crate::error::{Error, Result};
use crate::spectral::{Grid, Rank, SpectralField};

/// Time-stamped samples of a field on a fixed grid.
///
/// Times are strictly increasing and non-negative; a sample at `t = 0` is allowed
/// (it carries the initial data) and is skipped by the weighted Kato norms.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: Grid,
    rank: Rank,
    times: Vec<f64>,
    fields: Vec<SpectralField>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, fields: Vec<SpectralField>) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::InvalidArgument("trajectory needs at least one sample".into()))?;
        if times.len() != fields.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        validate_times(&times)?;
        let grid = first.grid().clone();
        let rank = first.rank();
        for f in &fields {
            if f.grid() != &grid {
                return Err(Error::GridMismatch);
            }
            f.require_rank(rank)?;
        }
        Ok(Self {
            grid,
            rank,
            times,
            fields,
        })
    }

    /// Samples `f(t)` at the given times.
    pub fn from_fn<F>(times: Vec<f64>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> SpectralField,
    {
        let fields = times.iter().map(|&t| f(t)).collect();
        Self::new(times, fields)
    }

    pub fn zeros(grid: &Grid, rank: Rank, times: Vec<f64>) -> Result<Self> {
        let fields = vec![SpectralField::zeros(grid, rank); times.len()];
        Self::new(times, fields)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[SpectralField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn last(&self) -> &SpectralField {
        self.fields.last().expect("non-empty")
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<SpectralField>) {
        (self.times, self.fields)
    }

    /// Apply `f` to every sample.
    pub fn map<F>(&self, f: F) -> Result<Trajectory>
    where
        F: Fn(f64, &SpectralField) -> Result<SpectralField>,
    {
        let fields = self
            .times
            .iter()
            .zip(&self.fields)
            .map(|(&t, u)| f(t, u))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(self.times.clone(), fields)
    }

    /// Every other sample, always keeping the last one.
    pub fn coarsened(&self) -> Trajectory {
        let n = self.len();
        let mut keep: Vec<usize> = (0..n).step_by(2).collect();
        if keep.last() != Some(&(n - 1)) {
            keep.push(n - 1);
        }
        Trajectory {
            grid: self.grid.clone(),
            rank: self.rank,
            times: keep.iter().map(|&i| self.times[i]).collect(),
            fields: keep.iter().map(|&i| self.fields[i].clone()).collect(),
        }
    }

    /// Linear interpolation in time; constant extension before the first sample.
    pub fn interpolate(&self, t: f64) -> Result<SpectralField> {
        let last = self.horizon();
        if t > last * (1.0 + 1e-12) {
            return Err(Error::CoverageGap { requested: t, last });
        }
        if t <= self.times[0] {
            return Ok(self.fields[0].clone());
        }
        let i = self.times.partition_point(|&s| s < t);
        let i = i.min(self.len() - 1);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        let mut out = self.fields[i - 1].scaled(1.0 - w);
        out.axpy(w, &self.fields[i]);
        Ok(out)
    }

    /// Largest sup-in-time `L^2` difference, relative to the larger sup-in-time `L^2` norm.
    pub fn relative_sup_l2_difference(&self, other: &Trajectory) -> Result<f64> {
        if self.times.len() != other.times.len() || self.times != other.times {
            return Err(Error::InvalidArgument("trajectories sampled at different times".into()));
        }
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (a, b) in self.fields.iter().zip(&other.fields) {
            diff = diff.max(a.sub(b)?.l2_norm());
            scale = scale.max(a.l2_norm()).max(b.l2_norm());
        }
        Ok(if scale == 0.0 { 0.0 } else { diff / scale })
    }
}

pub(crate) fn validate_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument("sample times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
    }
    Ok(())
}

/// Log-uniform times `T * 2^{-levels} ... T` with `per_octave` samples per factor of two.
pub fn geometric_times(horizon: f64, levels: u32, per_octave: u32) -> Vec<f64> {
    let n = (levels * per_octave) as i32;
    (0..=n)
        .map(|i| horizon * 2f64.powf(-(n - i) as f64 / per_octave as f64))
        .collect()
}
