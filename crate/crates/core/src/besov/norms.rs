use serde::{Deserialize, Serialize};

use super::partition::DyadicPartition;
use crate::error::{Error, Result};
use crate::spectral::SpectralField;

/// Critical regularity `s_p = -1 + dim/p` of the Navier-Stokes scaling.
pub fn critical_exponent(dim: usize, p: f64) -> f64 {
    -1.0 + dim as f64 / p
}

/// Besov-type exponent set `(s, p, q)` with an optional time exponent `r`.
/// Infinite exponents are `f64::INFINITY` in memory and `null` in JSON.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovIndex {
    pub s: f64,
    #[serde(with = "ext_real")]
    pub p: f64,
    #[serde(with = "ext_real")]
    pub q: f64,
    #[serde(default, with = "opt_ext_real", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

impl BesovIndex {
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        let idx = Self { s, p, q, r: None };
        idx.validate()?;
        Ok(idx)
    }

    /// The critical index `(s_p, p, q)` in dimension `dim`.
    pub fn critical(dim: usize, p: f64, q: f64) -> Result<Self> {
        Self::new(critical_exponent(dim, p), p, q)
    }

    pub fn with_time(mut self, r: f64) -> Result<Self> {
        check_exponent("r", r)?;
        self.r = Some(r);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s.is_finite() {
            return Err(Error::InvalidArgument(format!("regularity must be finite, got {}", self.s)));
        }
        check_exponent("p", self.p)?;
        check_exponent("q", self.q)?;
        if let Some(r) = self.r {
            check_exponent("r", r)?;
        }
        Ok(())
    }

    /// `s_p` for this integrability exponent.
    pub fn s_p(&self, dim: usize) -> f64 {
        critical_exponent(dim, self.p)
    }

    pub fn is_critical(&self, dim: usize) -> bool {
        (self.s + 1.0 - dim as f64 / self.p).abs() <= 1e-14
    }
}

pub(crate) fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v < 1.0 {
        return Err(Error::InvalidArgument(format!("exponent {name} must lie in [1, inf], got {v}")));
    }
    Ok(())
}

mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

mod opt_ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_finite() => s.serialize_f64(*x),
            _ => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Some(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockContribution {
    pub j: i32,
    pub contrib: f64,
}

/// A computed norm with its block-by-block breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub index: BesovIndex,
    pub value: f64,
    pub blocks: Vec<BlockContribution>,
    pub truncated: bool,
}

impl NormReport {
    /// Block with the largest contribution; ties go to the smallest `j`.
    pub fn argmax(&self) -> Option<i32> {
        let mut best: Option<BlockContribution> = None;
        for b in &self.blocks {
            if best.is_none_or(|c| b.contrib > c.contrib) {
                best = Some(*b);
            }
        }
        best.map(|b| b.j)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("norm report serializes")
    }
}

/// `l^q` norm of a non-negative sequence (`q = inf` is the max).
pub fn lq_aggregate(values: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        return values.into_iter().fold(0.0, f64::max);
    }
    let values: Vec<f64> = values.into_iter().collect();
    let scale = values.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    // scaled to avoid overflow for large q
    values.iter().map(|v| (v / scale).powf(q)).sum::<f64>().powf(1.0 / q) * scale
}

/// Per-block `L^p` norms `||Delta_j f||_{L^p}` over the partition range.
pub fn block_lp_norms(field: &SpectralField, p: f64, partition: &DyadicPartition) -> Result<Vec<(i32, f64)>> {
    partition
        .blocks()
        .map(|j| Ok((j, partition.block(field, j)?.lp_norm(p))))
        .collect()
}

/// Homogeneous Besov norm `|| 2^{js} ||Delta_j f||_{L^p} ||_{l^q}` truncated to the partition range.
pub fn besov_norm(field: &SpectralField, index: &BesovIndex, partition: &DyadicPartition) -> Result<NormReport> {
    index.validate()?;
    let norms = block_lp_norms(field, index.p, partition)?;
    Ok(report_from_block_norms(index, &norms, partition))
}

pub(crate) fn report_from_block_norms(
    index: &BesovIndex,
    norms: &[(i32, f64)],
    partition: &DyadicPartition,
) -> NormReport {
    let blocks: Vec<BlockContribution> = norms
        .iter()
        .map(|&(j, n)| BlockContribution {
            j,
            contrib: 2f64.powf(j as f64 * index.s) * n,
        })
        .collect();
    let truncated = blocks.iter().any(|b| b.contrib > 0.0 && partition.is_truncated(b.j));
    let value = lq_aggregate(blocks.iter().map(|b| b.contrib), index.q);
    NormReport {
        index: *index,
        value,
        blocks,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random::random_field;
    use crate::spectral::{Grid, Rank};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn critical_index_check() {
        let i = BesovIndex::critical(3, 4.0, 4.0).unwrap();
        assert!((i.s + 0.25).abs() < 1e-16);
        assert!(i.is_critical(3));
        assert!(!BesovIndex::new(0.0, 4.0, 4.0).unwrap().is_critical(3));
        assert!(BesovIndex::new(0.0, 0.5, 4.0).is_err());
    }

    #[test]
    fn json_shape() {
        let idx = BesovIndex::new(-0.25, 4.0, f64::INFINITY).unwrap().with_time(2.0).unwrap();
        let r = NormReport {
            index: idx,
            value: 1.5,
            blocks: vec![BlockContribution { j: 0, contrib: 1.5 }],
            truncated: false,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["index"]["q"], serde_json::Value::Null);
        assert_eq!(v["index"]["r"], 2.0);
        assert_eq!(v["blocks"][0]["j"], 0);
        let back: NormReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn argmax_ties_to_smallest_j() {
        let idx = BesovIndex::new(0.0, 2.0, 2.0).unwrap();
        let r = NormReport {
            index: idx,
            value: 0.0,
            blocks: vec![
                BlockContribution { j: -1, contrib: 0.5 },
                BlockContribution { j: 0, contrib: 2.0 },
                BlockContribution { j: 1, contrib: 2.0 },
            ],
            truncated: false,
        };
        assert_eq!(r.argmax(), Some(0));
    }

    #[test]
    fn zero_field_and_single_block_mode() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let p = DyadicPartition::for_grid(&g).unwrap();
        let idx = BesovIndex::critical(3, 4.0, 2.0).unwrap();
        let z = SpectralField::zeros(&g, Rank::Vector);
        assert_eq!(besov_norm(&z, &idx, &p).unwrap().value, 0.0);

        // |k| = 2*sqrt(2) lies in [4/3, 3/2] * 2, so phi(2^{-1} xi) = 1 and no other block sees it
        let mut f = SpectralField::zeros(&g, Rank::Scalar);
        f.set_real_mode(0, [2, 2, 0], Complex64::new(0.5, 0.0)).unwrap();
        let r = besov_norm(&f, &idx, &p).unwrap();
        let expected = 2f64.powf(idx.s) * f.lp_norm(4.0);
        assert!((r.value - expected).abs() < 1e-13 * expected);
        assert_eq!(r.argmax(), Some(1));
        assert_eq!(r.blocks.iter().filter(|b| b.contrib > 0.0).count(), 1);
    }

    #[test]
    fn value_is_lq_aggregate_of_blocks() {
        let g = Grid::new(2, 32, 1.0).unwrap();
        let p = DyadicPartition::for_grid(&g).unwrap();
        let f = random_field(&g, Rank::Vector, 2, 1.0, true);
        for q in [1.0, 2.0, 3.5, f64::INFINITY] {
            let idx = BesovIndex::new(0.3, 3.0, q).unwrap();
            let r = besov_norm(&f, &idx, &p).unwrap();
            let direct = if q.is_infinite() {
                r.blocks.iter().map(|b| b.contrib).fold(0.0, f64::max)
            } else {
                r.blocks.iter().map(|b| b.contrib.powf(q)).sum::<f64>().powf(1.0 / q)
            };
            assert!((r.value - direct).abs() <= 1e-12 * direct);
        }
    }
}
