//! Contingency tables over one or two attributes and the scores derived
//! from them.
//!
//! Mutual information is reported in bits. The selection score for a pair
//! is the L1 distance between its true 2-way count table and the
//! independence estimate built from 1-way measurements; it approximates the
//! dependence between the two attributes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::DiscreteTable;
use crate::error::{Error, Result};
use crate::graph::all_pairs;
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalKind {
    Counts,
    Probabilities,
}

/// A 1-way or 2-way table, flat and row-major (first attribute outer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    attrs: Vec<usize>,
    shape: Vec<usize>,
    values: Vec<f64>,
    kind: MarginalKind,
}

impl Marginal {
    pub fn new(attrs: Vec<usize>, shape: Vec<usize>, values: Vec<f64>, kind: MarginalKind) -> Result<Self> {
        if attrs.is_empty() || attrs.len() > 2 || attrs.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "marginal over {} attributes with {} dimensions",
                attrs.len(),
                shape.len()
            )));
        }
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "{} values for shape {:?}",
                values.len(),
                shape
            )));
        }
        if kind == MarginalKind::Counts && values.iter().any(|&v| v < 0.0 || v.is_nan()) {
            return Err(Error::InvalidParameter("count marginal has a negative entry".into()));
        }
        Ok(Marginal {
            attrs,
            shape,
            values,
            kind,
        })
    }

    pub fn attrs(&self) -> &[usize] {
        &self.attrs
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> MarginalKind {
        self.kind
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Rescaled to sum to one. Fails on an all-zero table.
    pub fn normalized(&self) -> Result<Marginal> {
        let t = self.total();
        if t <= 0.0 {
            return Err(Error::Empty(format!(
                "marginal over {:?} has zero mass",
                self.attrs
            )));
        }
        Ok(Marginal {
            attrs: self.attrs.clone(),
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| v / t).collect(),
            kind: MarginalKind::Probabilities,
        })
    }

    /// Sums a 2-way table over its second attribute.
    pub fn project_first(&self) -> Result<Marginal> {
        self.project(0)
    }

    /// Sums a 2-way table over its first attribute.
    pub fn project_second(&self) -> Result<Marginal> {
        self.project(1)
    }

    fn project(&self, keep: usize) -> Result<Marginal> {
        if self.attrs.len() != 2 {
            return Err(Error::ShapeMismatch("projection needs a 2-way marginal".into()));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; self.shape[keep]];
        for a in 0..r {
            for b in 0..c {
                out[if keep == 0 { a } else { b }] += self.values[a * c + b];
            }
        }
        Ok(Marginal {
            attrs: vec![self.attrs[keep]],
            shape: vec![self.shape[keep]],
            values: out,
            kind: self.kind,
        })
    }

    fn same_layout(&self, other: &Marginal) -> Result<()> {
        if self.attrs != other.attrs || self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "marginal over {:?} {:?} vs {:?} {:?}",
                self.attrs, self.shape, other.attrs, other.shape
            )));
        }
        Ok(())
    }
}

pub fn one_way(table: &DiscreteTable, i: usize) -> Result<Marginal> {
    let size = table.schema().attribute(i)?.domain_size;
    let mut counts = vec![0.0; size];
    for row in table.rows() {
        counts[row[i] as usize] += 1.0;
    }
    Marginal::new(vec![i], vec![size], counts, MarginalKind::Counts)
}

/// Counts over `(i, j)`, `i` outer.
pub fn two_way(table: &DiscreteTable, i: usize, j: usize) -> Result<Marginal> {
    if i == j {
        return Err(Error::InvalidParameter(format!(
            "2-way marginal needs distinct attributes, got {i} twice"
        )));
    }
    let si = table.schema().attribute(i)?.domain_size;
    let sj = table.schema().attribute(j)?.domain_size;
    let mut counts = vec![0.0; si * sj];
    for row in table.rows() {
        counts[row[i] as usize * sj + row[j] as usize] += 1.0;
    }
    Marginal::new(vec![i, j], vec![si, sj], counts, MarginalKind::Counts)
}

/// Mutual information of a 2-way table, in bits.
pub fn mutual_information(joint: &Marginal) -> Result<f64> {
    if joint.attrs.len() != 2 {
        return Err(Error::ShapeMismatch("mutual information needs a 2-way marginal".into()));
    }
    let p = joint.normalized()?;
    let (r, c) = (p.shape[0], p.shape[1]);
    let pa = p.project_first()?;
    let pb = p.project_second()?;
    let mut mi = 0.0;
    for a in 0..r {
        for b in 0..c {
            let pab = p.values[a * c + b];
            if pab > 0.0 {
                mi += pab * (pab / (pa.values[a] * pb.values[b])).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Independence estimate `m_i[a] * m_j[b] / n` of the 2-way table.
///
/// With only 1-way measurements available, the maximum-entropy joint
/// consistent with them is this product.
pub fn estimate_two_way_from_one_way(m_i: &Marginal, m_j: &Marginal, n: f64) -> Result<Marginal> {
    if m_i.attrs.len() != 1 || m_j.attrs.len() != 1 {
        return Err(Error::ShapeMismatch("estimate needs two 1-way marginals".into()));
    }
    if m_i.attrs[0] == m_j.attrs[0] {
        return Err(Error::InvalidParameter("estimate needs distinct attributes".into()));
    }
    if n <= 0.0 {
        return Err(Error::Empty("row count is zero".into()));
    }
    let (r, c) = (m_i.shape[0], m_j.shape[0]);
    let mut values = Vec::with_capacity(r * c);
    for a in 0..r {
        for b in 0..c {
            values.push(m_i.values[a] * m_j.values[b] / n);
        }
    }
    Marginal::new(
        vec![m_i.attrs[0], m_j.attrs[0]],
        vec![r, c],
        values,
        MarginalKind::Counts,
    )
}

pub fn l1_score(real: &Marginal, estimate: &Marginal) -> Result<f64> {
    real.same_layout(estimate)?;
    Ok(real
        .values
        .iter()
        .zip(&estimate.values)
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Total variation distance between the normalised tables.
pub fn tvd(p: &Marginal, q: &Marginal) -> Result<f64> {
    p.same_layout(q)?;
    let (p, q) = (p.normalized()?, q.normalized()?);
    let d: f64 = p.values.iter().zip(&q.values).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * d).clamp(0.0, 1.0))
}

/// Clips negative entries to zero and rescales to `total`.
///
/// Returns the rescaled values and whether the clipped vector was all zero
/// (in which case the mass is spread uniformly).
pub fn clip_and_rescale(values: &[f64], total: f64) -> (Vec<f64>, bool) {
    let clipped: Vec<f64> = values.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    let s: f64 = clipped.iter().sum();
    if s <= 0.0 || values.is_empty() {
        let u = if values.is_empty() { 0.0 } else { total / values.len() as f64 };
        return (vec![u; values.len()], true);
    }
    (clipped.iter().map(|v| v * total / s).collect(), false)
}

/// Selection scores for every attribute pair, in [`all_pairs`] order.
///
/// `one_way_estimates` are the (possibly noisy, already post-processed)
/// 1-way count vectors; each pair's score is
/// `‖two_way(i, j) − estimate(i, j)‖₁`.
pub fn pairwise_l1_scores(
    table: &DiscreteTable,
    one_way_estimates: &[Marginal],
    exec: Exec,
) -> Result<Vec<f64>> {
    let d = table.n_attributes();
    if one_way_estimates.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "{} 1-way estimates for {d} attributes",
            one_way_estimates.len()
        )));
    }
    let n = table.n_rows() as f64;
    let pairs = all_pairs(d);
    exec.map_slice(&pairs, |&(i, j)| {
        let real = two_way(table, i, j)?;
        let est = estimate_two_way_from_one_way(&one_way_estimates[i], &one_way_estimates[j], n)?;
        l1_score(&real, &est)
    })
    .into_iter()
    .collect()
}

/// Plug-in mutual information (bits) between two code columns, counted
/// sparsely so large domains are cheap.
pub fn plug_in_mi(xs: &[u32], ys: &[u32]) -> Result<f64> {
    let zs = vec![0u64; xs.len()];
    plug_in_cmi(xs, ys, &zs)
}

/// Plug-in conditional mutual information `I(X; Y | Z)` in bits, where `zs`
/// holds one integer key per row for the joint conditioning value.
pub fn plug_in_cmi(xs: &[u32], ys: &[u32], zs: &[u64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() != zs.len() {
        return Err(Error::ShapeMismatch("columns of unequal length".into()));
    }
    if xs.is_empty() {
        return Err(Error::Empty("no rows".into()));
    }
    let mut xyz: HashMap<(u64, u32, u32), u64> = HashMap::new();
    let mut xz: HashMap<(u64, u32), u64> = HashMap::new();
    let mut yz: HashMap<(u64, u32), u64> = HashMap::new();
    let mut z: HashMap<u64, u64> = HashMap::new();
    for ((&x, &y), &k) in xs.iter().zip(ys).zip(zs) {
        *xyz.entry((k, x, y)).or_default() += 1;
        *xz.entry((k, x)).or_default() += 1;
        *yz.entry((k, y)).or_default() += 1;
        *z.entry(k).or_default() += 1;
    }
    let n = xs.len() as f64;
    let mut acc = 0.0;
    for (&(k, x, y), &c) in &xyz {
        let c = c as f64;
        let ratio = c * z[&k] as f64 / (xz[&(k, x)] as f64 * yz[&(k, y)] as f64);
        acc += c / n * ratio.log2();
    }
    Ok(acc.max(0.0))
}

/// Mixed-radix key of the given attributes for each row, for use as the
/// conditioning column of [`plug_in_cmi`].
pub fn condition_keys(table: &DiscreteTable, attrs: &[usize]) -> Result<Vec<u64>> {
    let sizes: Vec<u64> = attrs
        .iter()
        .map(|&a| table.schema().attribute(a).map(|s| s.domain_size as u64))
        .collect::<Result<_>>()?;
    Ok(table
        .rows()
        .map(|row| {
            attrs
                .iter()
                .zip(&sizes)
                .fold(0u64, |k, (&a, &s)| k * s.max(1) + row[a] as u64)
        })
        .collect())
}
