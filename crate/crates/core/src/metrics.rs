//! Quality and fairness measures comparing an original table with a
//! synthetic one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::DiscreteTable;
use crate::error::{Error, Result};
use crate::graph::all_pairs;
use crate::marginals::{self, Marginal};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairQuality {
    pub a: usize,
    pub b: usize,
    pub tvd: f64,
    pub cramers_v_original: f64,
    pub cramers_v_synthetic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub avg_tvd_1way: f64,
    pub avg_tvd_2way: f64,
    pub acd: f64,
    pub per_attribute_tvd: Vec<f64>,
    pub per_pair: Vec<PairQuality>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Bias-corrected Cramér's V of a 2-way count table.
///
/// Empty rows and columns are dropped before the correction. Returns 0
/// when the corrected denominator is not positive.
pub fn cramers_v(joint: &Marginal) -> Result<f64> {
    if joint.shape().len() != 2 {
        return Err(Error::ShapeMismatch("Cramér's V needs a 2-way table".into()));
    }
    let (r, c) = (joint.shape()[0], joint.shape()[1]);
    let v = joint.values();
    let n: f64 = v.iter().sum();
    if n <= 1.0 {
        return Ok(0.0);
    }
    let rows: Vec<f64> = (0..r).map(|i| (0..c).map(|j| v[i * c + j]).sum()).collect();
    let cols: Vec<f64> = (0..c).map(|j| (0..r).map(|i| v[i * c + j]).sum()).collect();
    let mut chi2 = 0.0;
    for i in (0..r).filter(|&i| rows[i] > 0.0) {
        for j in (0..c).filter(|&j| cols[j] > 0.0) {
            let e = rows[i] * cols[j] / n;
            chi2 += (v[i * c + j] - e).powi(2) / e;
        }
    }
    let kr = rows.iter().filter(|&&x| x > 0.0).count() as f64;
    let kc = cols.iter().filter(|&&x| x > 0.0).count() as f64;
    let phi2 = chi2 / n;
    let phi2_corr = (phi2 - (kr - 1.0) * (kc - 1.0) / (n - 1.0)).max(0.0);
    let r_corr = kr - (kr - 1.0).powi(2) / (n - 1.0);
    let c_corr = kc - (kc - 1.0).powi(2) / (n - 1.0);
    let denom = (r_corr - 1.0).min(c_corr - 1.0);
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((phi2_corr / denom).sqrt().min(1.0))
}

/// Average 1-way and 2-way TVD and the average Cramér's V difference.
pub fn quality(original: &DiscreteTable, synthetic: &DiscreteTable, exec: Exec) -> Result<QualityReport> {
    if !original.schema().compatible_with(synthetic.schema()) {
        return Err(Error::Schema("original and synthetic schemas differ".into()));
    }
    if original.n_rows() == 0 || synthetic.n_rows() == 0 {
        return Err(Error::Empty("quality needs non-empty tables".into()));
    }
    let d = original.n_attributes();
    let per_attribute_tvd = exec
        .map_range(d, |i| {
            let a = marginals::one_way(original, i)?.normalized()?;
            let b = marginals::one_way(synthetic, i)?.normalized()?;
            marginals::tvd(&a, &b)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let per_pair = exec
        .map_slice(&all_pairs(d), |&(i, j)| {
            let a = marginals::two_way(original, i, j)?;
            let b = marginals::two_way(synthetic, i, j)?;
            Ok(PairQuality {
                a: i,
                b: j,
                tvd: marginals::tvd(&a.normalized()?, &b.normalized()?)?,
                cramers_v_original: cramers_v(&a)?,
                cramers_v_synthetic: cramers_v(&b)?,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(QualityReport {
        avg_tvd_1way: mean(per_attribute_tvd.iter().copied()),
        avg_tvd_2way: mean(per_pair.iter().map(|p| p.tvd)),
        acd: mean(per_pair.iter().map(|p| (p.cramers_v_original - p.cramers_v_synthetic).abs())),
        per_attribute_tvd,
        per_pair,
    })
}

/// Which columns and codes the fairness measures read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessQuery {
    pub protected: usize,
    pub outcome: usize,
    pub admissible: Vec<usize>,
    /// Outcome code counted as `O = 1`.
    pub positive: u32,
    /// Protected code counted as `S = 1`; every other code is `S = 0`.
    pub privileged: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSupport {
    pub privileged: usize,
    pub unprivileged: usize,
}

/// Signed differences `S = 1` minus `S = 0`; `None` when undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub dp: Option<f64>,
    pub tprb: Option<f64>,
    pub tnrb: Option<f64>,
    pub cdp: Option<f64>,
    pub ctprb: Option<f64>,
    pub ctnrb: Option<f64>,
    pub support: GroupSupport,
    /// Probability mass of admissible groups skipped because one side was
    /// empty, per conditional measure.
    pub skipped_mass: BTreeMap<String, f64>,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    // [s = 0, s = 1] × (hits, total)
    hits: [u64; 2],
    total: [u64; 2],
}

impl Tally {
    fn add(&mut self, s: bool, hit: bool) {
        self.total[s as usize] += 1;
        self.hits[s as usize] += hit as u64;
    }

    fn gap(&self) -> Option<f64> {
        if self.total[0] == 0 || self.total[1] == 0 {
            return None;
        }
        let rate = |k: usize| self.hits[k] as f64 / self.total[k] as f64;
        Some(rate(1) - rate(0))
    }
}

/// Expectation of the per-group gap over groups weighted by `weights`,
/// skipping undefined groups. Returns the value and the skipped mass.
fn weighted_gap(groups: &BTreeMap<u64, Tally>, weights: &BTreeMap<u64, f64>) -> (Option<f64>, f64) {
    let (mut acc, mut used, mut skipped) = (0.0, 0.0, 0.0);
    for (k, &w) in weights {
        match groups.get(k).and_then(Tally::gap) {
            Some(g) => {
                acc += w * g;
                used += w;
            }
            None => skipped += w,
        }
    }
    if used > 0.0 {
        (Some(acc / used), skipped)
    } else {
        (None, skipped)
    }
}

/// The six associational fairness measures. `truth` holds the paired
/// ground-truth outcome codes (`Y`) for the rows of `table`; without it the
/// rate-balance measures are `None`.
pub fn fairness(table: &DiscreteTable, q: &FairnessQuery, truth: Option<&[u32]>) -> Result<FairnessReport> {
    let d = table.n_attributes();
    for &i in q.admissible.iter().chain([&q.protected, &q.outcome]) {
        if i >= d {
            return Err(Error::IndexOutOfRange { index: i, len: d });
        }
    }
    if let Some(t) = truth {
        if t.len() != table.n_rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} truth labels for {} rows",
                t.len(),
                table.n_rows()
            )));
        }
    }
    let n = table.n_rows();
    if n == 0 {
        return Err(Error::Empty("fairness needs a non-empty table".into()));
    }
    let keys = marginals::condition_keys(table, &q.admissible)?;

    let mut dp = Tally::default();
    let mut tpr = Tally::default();
    let mut tnr = Tally::default();
    let mut cdp: BTreeMap<u64, Tally> = BTreeMap::new();
    let mut ctpr: BTreeMap<u64, Tally> = BTreeMap::new();
    let mut ctnr: BTreeMap<u64, Tally> = BTreeMap::new();
    let mut weights: BTreeMap<u64, f64> = BTreeMap::new();
    for (r, row) in table.rows().enumerate() {
        let s = row[q.protected] == q.privileged;
        let o = row[q.outcome] == q.positive;
        let k = keys[r];
        *weights.entry(k).or_default() += 1.0;
        dp.add(s, o);
        cdp.entry(k).or_default().add(s, o);
        if let Some(t) = truth {
            if t[r] == q.positive {
                tpr.add(s, o);
                ctpr.entry(k).or_default().add(s, o);
            } else {
                tnr.add(s, !o);
                ctnr.entry(k).or_default().add(s, !o);
            }
        }
    }
    for w in weights.values_mut() {
        *w /= n as f64;
    }

    let mut skipped_mass = BTreeMap::new();
    let (cdp_v, skip) = weighted_gap(&cdp, &weights);
    skipped_mass.insert("cdp".to_string(), skip);
    let (ctprb, ctnrb) = if truth.is_some() {
        let (a, sa) = weighted_gap(&ctpr, &weights);
        let (b, sb) = weighted_gap(&ctnr, &weights);
        skipped_mass.insert("ctprb".to_string(), sa);
        skipped_mass.insert("ctnrb".to_string(), sb);
        (a, b)
    } else {
        (None, None)
    };
    Ok(FairnessReport {
        dp: dp.gap(),
        tprb: truth.and_then(|_| tpr.gap()),
        tnrb: truth.and_then(|_| tnr.gap()),
        cdp: cdp_v,
        ctprb,
        ctnrb,
        support: GroupSupport {
            privileged: dp.total[1] as usize,
            unprivileged: dp.total[0] as usize,
        },
        skipped_mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub quality: QualityReport,
    pub fairness: FairnessReport,
}

pub const COMPARED_METRICS: [&str; 9] = ["tvd_1way", "tvd_2way", "acd", "dp", "tprb", "tnrb", "cdp", "ctprb", "ctnrb"];

impl RunMetrics {
    pub fn value(&self, metric: &str) -> Option<f64> {
        let f = &self.fairness;
        match metric {
            "tvd_1way" => Some(self.quality.avg_tvd_1way),
            "tvd_2way" => Some(self.quality.avg_tvd_2way),
            "acd" => Some(self.quality.acd),
            "dp" => f.dp,
            "tprb" => f.tprb,
            "tnrb" => f.tnrb,
            "cdp" => f.cdp,
            "ctprb" => f.ctprb,
            "ctnrb" => f.ctnrb,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    /// Absolute baseline value.
    pub baseline: Option<f64>,
    /// Per compared run, `|x| / |baseline| · 100`; `None` is "n/a".
    pub percent: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub runs: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Percent-of-baseline table for the absolute values of every metric.
pub fn compare_runs(baseline: &RunMetrics, runs: &[(&str, &RunMetrics)]) -> Comparison {
    let rows = COMPARED_METRICS
        .iter()
        .map(|&m| {
            let base = baseline.value(m).map(f64::abs);
            let percent = runs
                .iter()
                .map(|(_, r)| match (base, r.value(m)) {
                    (Some(b), Some(x)) if b > 0.0 => Some(x.abs() / b * 100.0),
                    _ => None,
                })
                .collect();
            ComparisonRow {
                metric: m.to_string(),
                baseline: base,
                percent,
            }
        })
        .collect();
    Comparison {
        runs: runs.iter().map(|(n, _)| n.to_string()).collect(),
        rows,
    }
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<10}{:>12}", "metric", "baseline");
        for r in &self.runs {
            let _ = write!(out, "{r:>12}");
        }
        out.push('\n');
        for row in &self.rows {
            let base = row.baseline.map_or("n/a".to_string(), |b| format!("{b:.4}"));
            let _ = write!(out, "{:<10}{:>12}", row.metric, base);
            for p in &row.percent {
                let cell = p.map_or("n/a".to_string(), |p| format!("{p:.1}%"));
                let _ = write!(out, "{cell:>12}");
            }
            out.push('\n');
        }
        out
    }
}
