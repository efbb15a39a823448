//! End-to-end generation and evaluation.

use serde::{Deserialize, Serialize};

use crate::dataset::{DiscreteTable, Role};
use crate::dp::{self, Charge, Mechanism, RdpAccountant, EXTENDED_ALPHAS};
use crate::error::{Error, Result};
use crate::graph::{AttributeGraph, GraphDocument, SpanningTree, SCHEMA_VERSION};
use crate::marginals::{self, clip_and_rescale, Marginal, MarginalKind};
use crate::metrics::{self, FairnessQuery, FairnessReport, QualityReport};
use crate::par::Exec;
use crate::rng::RngSeed;
use crate::sampler::{self, TreeModel};
use crate::selection::{self, PrivacyContext, SearchConfig, SelectorMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    /// zCDP-style total `ρ`, converted to `(ε, δ)` for the report.
    Rho { rho: f64, delta: Option<f64> },
    /// Target `(ε, δ)`; the largest `ρ` meeting it is spent.
    Approx { epsilon: f64, delta: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub budget: Budget,
    /// Fractions of `ρ` for 1-way measurement, selection and 2-way measurement.
    pub split: [f64; 3],
    pub selector: SelectorMode,
    pub noiseless: bool,
    pub n_out: Option<usize>,
    pub seed: u64,
    pub sensitivity: f64,
    pub alphas: Vec<f64>,
    pub exec: Exec,
    pub search: SearchConfig,
    /// Replaces the data-derived selection scores; noiseless runs only.
    pub weights: Option<AttributeGraph>,
}

impl RunConfig {
    pub fn new(budget: Budget, selector: SelectorMode) -> Self {
        RunConfig {
            budget,
            split: [1.0 / 3.0; 3],
            selector,
            noiseless: false,
            n_out: None,
            seed: 0,
            sensitivity: 1.0,
            alphas: EXTENDED_ALPHAS.to_vec(),
            exec: Exec::default(),
            search: SearchConfig::default(),
            weights: None,
        }
    }

    pub fn noiseless(selector: SelectorMode) -> Self {
        let mut c = RunConfig::new(Budget::Rho { rho: 0.0, delta: None }, selector);
        c.noiseless = true;
        c
    }

    fn validate(&self) -> Result<()> {
        if self.split.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::Config(format!("budget split fractions must be positive, got {:?}", self.split)));
        }
        let s: f64 = self.split.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("budget split sums to {s}, not 1")));
        }
        if !(self.sensitivity > 0.0) || !self.sensitivity.is_finite() {
            return Err(Error::Config(format!("sensitivity must be positive, got {}", self.sensitivity)));
        }
        if self.weights.is_some() && !self.noiseless {
            return Err(Error::Config("score overrides are only allowed for noiseless runs".into()));
        }
        if !self.noiseless {
            match self.budget {
                Budget::Rho { rho, .. } if !(rho > 0.0) || !rho.is_finite() => {
                    return Err(Error::Config(format!("rho must be positive, got {rho}")));
                }
                Budget::Approx { epsilon, .. } if !(epsilon > 0.0) || !epsilon.is_finite() => {
                    return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// What a run spent, and the `(ε, δ)` guarantee it converts to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub schema_version: u32,
    pub noiseless: bool,
    pub rho: f64,
    pub rho_spent: f64,
    pub split: [f64; 3],
    pub requested_epsilon: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub alphas: Vec<f64>,
    pub charges: Vec<Charge>,
}

#[derive(Debug, Clone)]
pub struct GenerateOutput {
    pub synthetic: DiscreteTable,
    pub model: TreeModel,
    pub tree: SpanningTree,
    /// Roles and names of the attributes; weights only for noiseless runs.
    pub graph: AttributeGraph,
    pub budget: BudgetReport,
}

/// The model file: the selected tree plus the fitted tables.
#[derive(Debug, Clone, Serialize)]
pub struct ModelDocument<'a> {
    pub schema_version: u32,
    pub selector: SelectorMode,
    pub noiseless: bool,
    pub tree: GraphDocument,
    pub model: &'a TreeModel,
}

impl GenerateOutput {
    pub fn model_document(&self, selector: SelectorMode) -> ModelDocument<'_> {
        let mut tree = self.tree.to_document(&self.graph);
        if !self.budget.noiseless {
            tree.total_weight = None;
        }
        ModelDocument {
            schema_version: SCHEMA_VERSION,
            selector,
            noiseless: self.budget.noiseless,
            tree,
            model: &self.model,
        }
    }
}

fn resolve_budget(cfg: &RunConfig, n: usize) -> Result<(f64, f64, Option<f64>)> {
    let default_delta = || 1.0 / (n.max(1) as f64).powi(2);
    match cfg.budget {
        Budget::Rho { rho, delta } => Ok((rho, delta.unwrap_or_else(default_delta), None)),
        Budget::Approx { epsilon, delta } => {
            let delta = delta.unwrap_or_else(default_delta);
            Ok((dp::dp_to_rho(epsilon, delta, &cfg.alphas)?, delta, Some(epsilon)))
        }
    }
}

/// Noisy 1-way count vectors, clipped and rescaled to `n`.
fn noisy_one_way(
    table: &DiscreteTable,
    rho: f64,
    sensitivity: f64,
    rng: &mut crate::rng::NoiseRng,
    accountant: &mut RdpAccountant,
) -> Result<Vec<Marginal>> {
    let d = table.n_attributes();
    let n = table.n_rows() as f64;
    let sigma = sensitivity * (d as f64 / (2.0 * rho)).sqrt();
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let exact = marginals::one_way(table, i)?;
        let mut values = exact.values().to_vec();
        let cost = dp::gaussian_vector(&mut values, sensitivity, sigma, rng)?;
        accountant.charge(format!("one-way/{i}"), cost, Mechanism::Gaussian { sigma, sensitivity });
        let (values, _) = clip_and_rescale(&values, n);
        out.push(Marginal::new(vec![i], exact.shape().to_vec(), values, MarginalKind::Counts)?);
    }
    Ok(out)
}

fn score_graph(table: &DiscreteTable, scores: Vec<f64>) -> Result<AttributeGraph> {
    let s = table.schema();
    AttributeGraph::from_weights(s.names(), s.roles(), scores)
}

/// Runs the three private stages and samples the synthetic table.
pub fn generate(table: &DiscreteTable, cfg: &RunConfig) -> Result<GenerateOutput> {
    cfg.validate()?;
    let d = table.n_attributes();
    if d < 2 {
        return Err(Error::Config(format!("need at least 2 attributes, got {d}")));
    }
    if table.n_rows() == 0 {
        return Err(Error::Empty("input table has no rows".into()));
    }
    let seed = RngSeed(cfg.seed);
    let n_out = cfg.n_out.unwrap_or(table.n_rows());

    if cfg.noiseless {
        let one_way: Vec<Marginal> = (0..d).map(|i| marginals::one_way(table, i)).collect::<Result<_>>()?;
        let graph = match &cfg.weights {
            Some(g) => {
                if g.names() != table.schema().names().as_slice() {
                    return Err(Error::Config("score override names do not match the table header".into()));
                }
                let mut g = g.clone();
                g.set_roles(table.schema().roles())?;
                g
            }
            None => score_graph(table, marginals::pairwise_l1_scores(table, &one_way, cfg.exec)?)?,
        };
        let tree = selection::select_tree(cfg.selector, &graph, None, cfg.search)?;
        let model = sampler::exact_model(table, &tree)?;
        let synthetic = model.sample(n_out, seed.derive("sample"), cfg.exec)?;
        let budget = BudgetReport {
            schema_version: SCHEMA_VERSION,
            noiseless: true,
            rho: 0.0,
            rho_spent: 0.0,
            split: cfg.split,
            requested_epsilon: None,
            epsilon: None,
            delta: None,
            alpha: None,
            alphas: cfg.alphas.clone(),
            charges: Vec::new(),
        };
        return Ok(GenerateOutput {
            synthetic,
            model,
            tree,
            graph,
            budget,
        });
    }

    let (rho, delta, requested_epsilon) = resolve_budget(cfg, table.n_rows())?;
    let [f1, f2, f3] = cfg.split;
    let mut accountant = RdpAccountant::new();

    let mut rng = seed.stream("one-way");
    let one_way = noisy_one_way(table, rho * f1, cfg.sensitivity, &mut rng, &mut accountant)?;

    let scores = marginals::pairwise_l1_scores(table, &one_way, cfg.exec)?;
    let graph = score_graph(table, scores)?;
    let mut rng = seed.stream("selection");
    let privacy = PrivacyContext {
        rho: rho * f2,
        sensitivity: cfg.sensitivity,
        rng: &mut rng,
        accountant: &mut accountant,
    };
    let tree = selection::select_tree(cfg.selector, &graph, Some(privacy), cfg.search)?;

    let mut rng = seed.stream("measure");
    let model = sampler::measure_model(
        table,
        &tree,
        one_way,
        rho * f3,
        cfg.sensitivity,
        &mut rng,
        &mut accountant,
    )?;
    accountant.assert_total(rho)?;
    let synthetic = model.sample(n_out, seed.derive("sample"), cfg.exec)?;

    let rho_spent = accountant.total_rho();
    let guarantee = dp::rdp_to_dp(rho_spent, delta, &cfg.alphas)?;
    let names = table.schema().names();
    let roles = table.schema().roles();
    let public = AttributeGraph::new(names, roles)?;
    let tree = SpanningTree::new(&public, tree.edges().to_vec())?;
    Ok(GenerateOutput {
        synthetic,
        model,
        tree,
        graph: public,
        budget: BudgetReport {
            schema_version: SCHEMA_VERSION,
            noiseless: false,
            rho,
            rho_spent,
            split: cfg.split,
            requested_epsilon,
            epsilon: Some(guarantee.epsilon),
            delta: Some(delta),
            alpha: Some(guarantee.alpha),
            alphas: cfg.alphas.clone(),
            charges: accountant.entries().to_vec(),
        },
    })
}

/// Outcome and privileged codes for the fairness measures; `None` picks
/// code 1.
#[derive(Debug, Clone, Default)]
pub struct EvaluateConfig {
    pub positive: Option<String>,
    pub privileged: Option<String>,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectedFairness {
    pub protected: String,
    pub outcome: String,
    pub admissible: Vec<String>,
    pub report: FairnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub quality: QualityReport,
    pub fairness: Vec<ProtectedFairness>,
}

fn code_for(table: &DiscreteTable, attr: usize, label: Option<&str>) -> Result<u32> {
    let spec = table.schema().attribute(attr)?;
    match label {
        None => Ok(1),
        Some(l) => spec
            .labels
            .iter()
            .position(|x| x == l)
            .map(|c| c as u32)
            .or_else(|| l.parse::<u32>().ok().filter(|&c| (c as usize) < spec.domain_size))
            .ok_or_else(|| Error::Config(format!("value {l:?} does not occur in attribute `{}`", spec.name))),
    }
}

/// Quality of `synthetic` against `original` and, per protected attribute
/// and the first outcome, the fairness of `synthetic`. The original
/// outcome column serves as ground truth for the rate-balance measures when
/// the row counts agree.
pub fn evaluate(original: &DiscreteTable, synthetic: &DiscreteTable, cfg: &EvaluateConfig) -> Result<EvaluationReport> {
    if !original.schema().compatible_with(synthetic.schema()) {
        return Err(Error::Schema("original and synthetic schemas differ".into()));
    }
    let quality = metrics::quality(original, synthetic, cfg.exec)?;
    let schema = synthetic.schema();
    let names = schema.names();
    let mut fairness = Vec::new();
    if let Some(&outcome) = schema.with_role(Role::Outcome).first() {
        let admissible = schema.with_role(Role::Admissible);
        let positive = code_for(original, outcome, cfg.positive.as_deref())?;
        let truth = if original.n_rows() == synthetic.n_rows() {
            Some(original.column(outcome)?)
        } else {
            None
        };
        for protected in schema.with_role(Role::Protected) {
            let q = FairnessQuery {
                protected,
                outcome,
                admissible: admissible.clone(),
                positive,
                privileged: code_for(original, protected, cfg.privileged.as_deref())?,
            };
            fairness.push(ProtectedFairness {
                protected: names[protected].clone(),
                outcome: names[outcome].clone(),
                admissible: admissible.iter().map(|&a| names[a].clone()).collect(),
                report: metrics::fairness(synthetic, &q, truth.as_deref())?,
            });
        }
    }
    Ok(EvaluationReport {
        schema_version: SCHEMA_VERSION,
        quality,
        fairness,
    })
}
