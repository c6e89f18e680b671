use super::norms::{besov_norm, check_exponent, BesovIndex};
use super::partition::DyadicPartition;
use crate::error::{Error, Result};
use crate::spectral::ops::{apply_table, dealias_product_physical};
use crate::spectral::SpectralField;

/// Bony decomposition `uv = T_u v + T_v u + R(u, v)` of the dealiased product.
#[derive(Clone, Debug)]
pub struct Paraproduct {
    /// Low-high part `sum_j S_{j-1} u Delta_j v`.
    pub low_high: SpectralField,
    /// High-low part `sum_j S_{j-1} v Delta_j u`.
    pub high_low: SpectralField,
    /// Resonant part `sum_{|j - j'| <= 1} Delta_j u Delta_j' v`.
    pub resonant: SpectralField,
}

impl Paraproduct {
    pub fn sum(&self) -> SpectralField {
        let mut out = self.low_high.clone();
        out.axpy(1.0, &self.high_low);
        out.axpy(1.0, &self.resonant);
        out
    }
}

struct Pieces {
    blocks: Vec<Vec<Vec<f64>>>,
    lows: Vec<Vec<Vec<f64>>>,
}

fn pieces(f: &SpectralField, partition: &DyadicPartition) -> Result<Pieces> {
    let mut blocks = Vec::new();
    let mut lows = Vec::new();
    for j in partition.blocks() {
        blocks.push(partition.block(f, j)?.to_physical());
        lows.push(apply_table(f, &partition.chi_table(j - 1)).to_physical());
    }
    Ok(Pieces { blocks, lows })
}

/// Paraproduct decomposition of `u v` over the partition's block range.
pub fn paraproduct(u: &SpectralField, v: &SpectralField, partition: &DyadicPartition) -> Result<Paraproduct> {
    let grid = partition.grid();
    if u.grid() != grid || v.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let pu = pieces(u, partition)?;
    let pv = pieces(v, partition)?;
    let nb = pu.blocks.len();
    let product = |a: &[Vec<f64>], b: &[Vec<f64>]| dealias_product_physical(grid, u.rank(), a, v.rank(), b);
    let mut low_high: Option<SpectralField> = None;
    let mut high_low: Option<SpectralField> = None;
    let mut resonant: Option<SpectralField> = None;
    let acc = |slot: &mut Option<SpectralField>, f: SpectralField| match slot {
        Some(s) => s.axpy(1.0, &f),
        None => *slot = Some(f),
    };
    for b in 0..nb {
        acc(&mut low_high, product(&pu.lows[b], &pv.blocks[b])?);
        acc(&mut high_low, product(&pu.blocks[b], &pv.lows[b])?);
        for c in b.saturating_sub(1)..(b + 2).min(nb) {
            acc(&mut resonant, product(&pu.blocks[b], &pv.blocks[c])?);
        }
    }
    Ok(Paraproduct {
        low_high: low_high.expect("at least one block"),
        high_low: high_low.expect("at least one block"),
        resonant: resonant.expect("at least one block"),
    })
}

/// Exponents `(s_i, p_i, q_i)` of the two factors; the product index is
/// `s = s1 + s2`, `1/p = 1/p1 + 1/p2`, `1/q = 1/q1 + 1/q2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductExponents {
    pub s1: f64,
    pub p1: f64,
    pub q1: f64,
    pub s2: f64,
    pub p2: f64,
    pub q2: f64,
}

impl ProductExponents {
    pub fn first(&self) -> Result<BesovIndex> {
        BesovIndex::new(self.s1, self.p1, self.q1)
    }

    pub fn second(&self) -> Result<BesovIndex> {
        BesovIndex::new(self.s2, self.p2, self.q2)
    }

    pub fn product(&self) -> Result<BesovIndex> {
        let inv_p = 1.0 / self.p1 + 1.0 / self.p2;
        let inv_q = 1.0 / self.q1 + 1.0 / self.q2;
        if inv_p > 1.0 || inv_q > 1.0 {
            return Err(Error::ExponentConditions(format!(
                "1/p1 + 1/p2 = {inv_p} and 1/q1 + 1/q2 = {inv_q} must both be at most 1"
            )));
        }
        BesovIndex::new(self.s1 + self.s2, 1.0 / inv_p, 1.0 / inv_q)
    }
}

/// Which paraproduct estimate to measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductCheck {
    /// `||T_u v|| <= c ||u|| ||v||`, valid for `s1 < 0`.
    LowHigh,
    /// `||R(u, v)|| <= c ||u|| ||v||`, valid for `s1 + s2 > 0`.
    Resonant,
}

/// Measured ratio `||part||_{B^s_{p,q}} / (||u||_{B^{s1}_{p1,q1}} ||v||_{B^{s2}_{p2,q2}})`.
pub fn paraproduct_estimate_check(
    u: &SpectralField,
    v: &SpectralField,
    exponents: &ProductExponents,
    check: ProductCheck,
    partition: &DyadicPartition,
) -> Result<f64> {
    for (name, x) in [("p1", exponents.p1), ("p2", exponents.p2), ("q1", exponents.q1), ("q2", exponents.q2)] {
        check_exponent(name, x)?;
    }
    let target = exponents.product()?;
    match check {
        ProductCheck::LowHigh if exponents.s1 >= 0.0 => {
            return Err(Error::ExponentConditions(format!(
                "low-high estimate needs s1 < 0, got {}",
                exponents.s1
            )))
        }
        ProductCheck::Resonant if target.s <= 0.0 => {
            return Err(Error::ExponentConditions(format!(
                "resonant estimate needs s1 + s2 > 0, got {}",
                target.s
            )))
        }
        _ => {}
    }
    let nu = besov_norm(u, &exponents.first()?, partition)?.value;
    let nv = besov_norm(v, &exponents.second()?, partition)?.value;
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let pp = paraproduct(u, v, partition)?;
    let part = match check {
        ProductCheck::LowHigh => &pp.low_high,
        ProductCheck::Resonant => &pp.resonant,
    };
    Ok(besov_norm(part, &target, partition)?.value / (nu * nv))
}
