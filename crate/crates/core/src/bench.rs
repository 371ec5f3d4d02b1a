//! Experiment harness: synthetic generation, multiedge removal, metadata
//! randomization, balanced two-fold cross-validation, and sweep drivers.
//!
//! Integer link weights are read as multiedge counts. The samplers draw
//! unit edges uniformly without replacement (sequential multivariate
//! hypergeometric), so totals are exact for every seed.

use std::collections::HashSet;
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Hypergeometric, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{observed_flow, stationary_flow, stationary_flow_teleport, FlowField, FlowOptions};
use crate::graph::{Arc, MultiGraph};
use crate::mapeq::{self, Partition};
use crate::metrics;
use crate::prior::PriorModel;
use crate::search::{self, mix_seed, SearchConfig};

/// Detection variants compared by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Map equation over the bare observed flows.
    Standard,
    /// Regularized flows with uniform connectivity (bipartite connectivity
    /// when the network carries node types).
    Regularized,
    /// Regularized flows with metadata-adjusted connectivity.
    Metadata,
    /// Fixed-rate uniform teleportation flows.
    Teleport,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Regularized => "regularized",
            Method::Metadata => "metadata",
            Method::Teleport => "teleport",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s.trim() {
            "standard" => Ok(Method::Standard),
            "regularized" => Ok(Method::Regularized),
            "metadata" => Ok(Method::Metadata),
            "teleport" => Ok(Method::Teleport),
            other => Err(Error::validation(format!("unknown method '{other}'"))),
        }
    }
}

/// Stationary flows for a method. `labels` are attached for the metadata
/// method; a graph carrying its own metadata can omit them.
pub fn flows_for_method(
    g: &MultiGraph,
    method: Method,
    labels: Option<&[u32]>,
    teleport_alpha: f64,
    opts: FlowOptions,
) -> Result<FlowField> {
    match method {
        Method::Standard => observed_flow(g, opts),
        Method::Regularized => {
            let prior = if g.node_types().is_some() {
                PriorModel::bipartite(g)?
            } else {
                PriorModel::uniform(g)?
            };
            stationary_flow(g, &prior, opts)
        }
        Method::Metadata => {
            let labeled;
            let graph = match labels {
                Some(l) => {
                    labeled = g.with_metadata_labels(l)?;
                    &labeled
                }
                None if g.metadata().is_some() => g,
                None => {
                    return Err(Error::validation(
                        "metadata method requires metadata labels",
                    ))
                }
            };
            let prior = PriorModel::metadata(graph)?;
            stationary_flow(graph, &prior, opts)
        }
        Method::Teleport => stationary_flow_teleport(g, teleport_alpha, opts),
    }
}

fn integral_units(w: f64, context: &str) -> Result<u64> {
    if w < 0.0 || w.fract() != 0.0 || w > u64::MAX as f64 {
        return Err(Error::validation(format!(
            "{context} requires integer multiedge weights, found {w}; round or scale the weights"
        )));
    }
    Ok(w as u64)
}

/// Canonical multiedge list: directed arcs as stored; undirected edges once
/// per pair with self-loops at their input weight.
fn canonical_units(g: &MultiGraph, context: &str) -> Result<Vec<(u32, u32, u64)>> {
    let mut units = Vec::new();
    if g.directed() {
        for a in g.arcs() {
            units.push((a.source, a.target, integral_units(a.weight, context)?));
        }
    } else {
        for a in g.arcs() {
            if a.source < a.target {
                units.push((a.source, a.target, integral_units(a.weight, context)?));
            } else if a.source == a.target {
                units.push((a.source, a.target, integral_units(a.weight / 2.0, context)?));
            }
        }
    }
    Ok(units)
}

fn rebuild_from_units(g: &MultiGraph, units: &[(u32, u32, u64)], counts: &[u64]) -> MultiGraph {
    let mut arcs: Vec<Arc> = Vec::new();
    for (&(s, t, _), &c) in units.iter().zip(counts) {
        if c == 0 {
            continue;
        }
        let w = c as f64;
        if g.directed() {
            arcs.push(Arc {
                source: s,
                target: t,
                weight: w,
            });
        } else if s == t {
            arcs.push(Arc {
                source: s,
                target: t,
                weight: 2.0 * w,
            });
        } else {
            arcs.push(Arc {
                source: s,
                target: t,
                weight: w,
            });
            arcs.push(Arc {
                source: t,
                target: s,
                weight: w,
            });
        }
    }
    arcs.sort_unstable_by_key(|a| (a.source, a.target));
    MultiGraph::from_stored(
        g.n_nodes(),
        arcs,
        g.directed(),
        g.node_ids().to_vec(),
        g.node_types().map(|t| t.to_vec()),
        g.metadata().cloned(),
    )
}

/// Draw `take` unit edges uniformly without replacement; returns how many
/// land on each arc (sequential multivariate hypergeometric).
fn sample_unit_counts(units: &[(u32, u32, u64)], take: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut remaining_total: u64 = units.iter().map(|&(_, _, w)| w).sum();
    let mut remaining_take = take.min(remaining_total);
    let mut counts = Vec::with_capacity(units.len());
    for &(_, _, w) in units {
        let x = if remaining_take == 0 || w == 0 {
            0
        } else if remaining_take >= remaining_total {
            w
        } else {
            Hypergeometric::new(remaining_total, w, remaining_take)
                .expect("valid hypergeometric parameters")
                .sample(rng)
        };
        counts.push(x);
        remaining_total -= w;
        remaining_take -= x;
    }
    counts
}

/// Remove a fraction `r` of the multiedges uniformly at random; arcs
/// reduced to zero weight disappear, the node set stays fixed.
pub fn remove_multiedges(g: &MultiGraph, r: f64, seed: u64) -> Result<MultiGraph> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::domain(format!(
            "removal fraction must lie in [0, 1), got {r}"
        )));
    }
    let units = canonical_units(g, "multiedge removal")?;
    let total: u64 = units.iter().map(|&(_, _, w)| w).sum();
    let remove = (r * total as f64).round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let removed = sample_unit_counts(&units, remove, &mut rng);
    let kept: Vec<u64> = units
        .iter()
        .zip(&removed)
        .map(|(&(_, _, w), &x)| w - x)
        .collect();
    Ok(rebuild_from_units(g, &units, &kept))
}

/// Split the multiedges into balanced halves (odd totals give the extra
/// edge to the training fold); per-arc counts sum to the original weights.
pub fn split_two_fold(g: &MultiGraph, seed: u64) -> Result<(MultiGraph, MultiGraph)> {
    let units = canonical_units(g, "two-fold splitting")?;
    let total: u64 = units.iter().map(|&(_, _, w)| w).sum();
    let train_take = total.div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_counts = sample_unit_counts(&units, train_take, &mut rng);
    let test_counts: Vec<u64> = units
        .iter()
        .zip(&train_counts)
        .map(|(&(_, _, w), &x)| w - x)
        .collect();
    Ok((
        rebuild_from_units(g, &units, &train_counts),
        rebuild_from_units(g, &units, &test_counts),
    ))
}

/// Total multiedge count of a graph (integer weights required).
pub fn multiedge_count(g: &MultiGraph) -> Result<u64> {
    Ok(canonical_units(g, "multiedge counting")?
        .iter()
        .map(|&(_, _, w)| w)
        .sum())
}

/// Directed planted-partition multigraph with near-equal community sizes
/// (the remainder of `n / n_modules` is spread one node at a time):
/// expected out-degree `avg_degree` per node, a `mixing` fraction of arc
/// endpoints outside the community, and shifted-Poisson integer weights
/// with mean `mean_weight`. Returns the graph and the planted labeling.
pub fn generate_planted(
    n: usize,
    avg_degree: f64,
    mixing: f64,
    n_modules: usize,
    mean_weight: f64,
    seed: u64,
) -> Result<(MultiGraph, Vec<u32>)> {
    if n_modules == 0 || n < n_modules {
        return Err(Error::domain(format!(
            "need at least one node per community, got {n} nodes for {n_modules} communities"
        )));
    }
    if !(0.0..1.0).contains(&mixing) {
        return Err(Error::domain(format!(
            "mixing must lie in [0, 1), got {mixing}"
        )));
    }
    if avg_degree < 0.0 {
        return Err(Error::domain("average degree must be non-negative"));
    }
    if mean_weight < 1.0 {
        return Err(Error::domain("mean weight must be at least 1"));
    }
    let base = n / n_modules;
    let extra = n % n_modules;
    let mut block_start = vec![0usize; n_modules + 1];
    for c in 0..n_modules {
        let size = base + usize::from(c < extra);
        block_start[c + 1] = block_start[c] + size;
    }
    let mut labels = vec![0u32; n];
    for c in 0..n_modules {
        for l in labels
            .iter_mut()
            .take(block_start[c + 1])
            .skip(block_start[c])
        {
            *l = c as u32;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deg_dist = if avg_degree > 0.0 {
        Some(Poisson::new(avg_degree).map_err(|e| Error::domain(e.to_string()))?)
    } else {
        None
    };
    let weight_dist = if mean_weight > 1.0 {
        Some(Poisson::new(mean_weight - 1.0).map_err(|e| Error::domain(e.to_string()))?)
    } else {
        None
    };

    let mut arcs: Vec<(u32, u32, f64)> = Vec::new();
    let mut chosen: HashSet<u32> = HashSet::new();
    for i in 0..n {
        let degree = match &deg_dist {
            Some(d) => d.sample(&mut rng).round() as usize,
            None => 0,
        };
        let c = labels[i] as usize;
        let start = block_start[c];
        let size = block_start[c + 1] - start;
        chosen.clear();
        for _ in 0..degree {
            let outside = mixing > 0.0 && rng.random::<f64>() < mixing;
            let pool = if outside { n - size } else { size - 1 };
            if pool == 0 {
                continue;
            }
            let mut target = None;
            for _ in 0..100 {
                let j = if outside {
                    let raw = rng.random_range(0..(n - size));
                    if raw < start {
                        raw
                    } else {
                        raw + size
                    }
                } else {
                    start + rng.random_range(0..size)
                };
                if j != i && !chosen.contains(&(j as u32)) {
                    target = Some(j as u32);
                    break;
                }
            }
            let Some(j) = target else { continue };
            chosen.insert(j);
            let weight = 1.0
                + match &weight_dist {
                    Some(d) => d.sample(&mut rng).round(),
                    None => 0.0,
                };
            arcs.push((i as u32, j, weight));
        }
    }
    let g = MultiGraph::from_arcs(n, arcs, true)?;
    Ok((g, labels))
}

/// Resample the labels of a uniformly chosen `mu`-fraction of the nodes
/// from the existing label set.
pub fn randomize_metadata(labels: &[u32], mu: f64, seed: u64) -> Result<Vec<u32>> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::domain(format!(
            "randomized fraction must lie in [0, 1], got {mu}"
        )));
    }
    let n = labels.len();
    let count = (mu * n as f64).floor() as usize;
    let mut out = labels.to_vec();
    if count == 0 {
        return Ok(out);
    }
    let mut universe: Vec<u32> = labels.to_vec();
    universe.sort_unstable();
    universe.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    for pick in 0..count {
        let swap = rng.random_range(pick..n);
        indices.swap(pick, swap);
        let node = indices[pick];
        out[node] = universe[rng.random_range(0..universe.len())];
    }
    Ok(out)
}

/// Full detection outcome on one network.
#[derive(Debug, Clone)]
pub struct Detection {
    pub partition: Partition,
    pub codelength: f64,
    pub one_module_codelength: f64,
    pub savings: f64,
}

pub fn detect(
    g: &MultiGraph,
    method: Method,
    labels: Option<&[u32]>,
    teleport_alpha: f64,
    opts: FlowOptions,
    cfg: &SearchConfig,
) -> Result<Detection> {
    let flows = flows_for_method(g, method, labels, teleport_alpha, opts)?;
    let partition = search::optimize(&flows, cfg);
    let codelength = mapeq::codelength(&flows, &partition)?;
    let one_module = mapeq::one_module_codelength(&flows);
    let savings = if one_module > 0.0 {
        mapeq::codelength_savings(codelength, one_module)?
    } else {
        0.0
    };
    Ok(Detection {
        partition,
        codelength,
        one_module_codelength: one_module,
        savings,
    })
}

/// Outcome of one balanced two-fold cross-validation run.
#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub train_codelength: f64,
    pub test_codelength: f64,
    pub test_one_module: f64,
    /// Relative codelength savings of the train partition on the test fold.
    pub savings: f64,
    pub n_modules: usize,
    pub train_multiedges: u64,
    pub test_multiedges: u64,
}

/// Infer a partition on one half of the multiedges and score how well it
/// compresses the other half.
pub fn cross_validate(
    g: &MultiGraph,
    method: Method,
    labels: Option<&[u32]>,
    teleport_alpha: f64,
    opts: FlowOptions,
    cfg: &SearchConfig,
    split_seed: u64,
) -> Result<CrossValidation> {
    let (train, test) = split_two_fold(g, split_seed)?;
    let train_units = multiedge_count(&train)?;
    let test_units = multiedge_count(&test)?;

    let flows_train = flows_for_method(&train, method, labels, teleport_alpha, opts)?;
    let partition = search::optimize(&flows_train, cfg);
    let train_codelength = mapeq::codelength(&flows_train, &partition)?;

    let flows_test = flows_for_method(&test, method, labels, teleport_alpha, opts)?;
    let test_codelength = mapeq::codelength(&flows_test, &partition)?;
    let test_one_module = mapeq::one_module_codelength(&flows_test);
    let savings = mapeq::codelength_savings(test_codelength, test_one_module)?;

    Ok(CrossValidation {
        train_codelength,
        test_codelength,
        test_one_module,
        savings,
        n_modules: partition.n_modules(),
        train_multiedges: train_units,
        test_multiedges: test_units,
    })
}

/// Parameters of the synthetic generator used by sweeps.
#[derive(Debug, Clone, Copy)]
pub struct PlantedParams {
    pub n: usize,
    pub avg_degree: f64,
    pub mixing: f64,
    pub n_modules: usize,
    pub mean_weight: f64,
}

#[derive(Debug, Clone)]
pub enum SweepSource {
    Synthetic(PlantedParams),
    Network {
        graph: MultiGraph,
        reference: Option<Vec<u32>>,
    },
}

/// One sweep: removal fractions times metadata-randomization fractions
/// times repetitions, each detected with every configured method.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub seed: u64,
    pub repetitions: u32,
    pub r_values: Vec<f64>,
    pub mu_values: Vec<f64>,
    pub methods: Vec<Method>,
    pub teleport_alpha: f64,
    pub trials: u32,
    pub tolerance: f64,
    pub source: SweepSource,
}

impl SweepSpec {
    pub fn new(source: SweepSource) -> SweepSpec {
        SweepSpec {
            seed: 1,
            repetitions: 100,
            r_values: (0..20).map(|i| i as f64 * 0.05).collect(),
            mu_values: vec![0.0, 0.15, 0.5],
            methods: vec![Method::Standard, Method::Regularized],
            teleport_alpha: 0.15,
            trials: 10,
            tolerance: 1e-12,
            source,
        }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub method: String,
    pub r: f64,
    pub mu: f64,
    pub rep: u32,
    pub seed: u64,
    pub n_modules: usize,
    pub ami: Option<f64>,
    pub train_codelength: f64,
    pub test_codelength: f64,
    pub savings: f64,
    pub fold_multiedges: u64,
}

pub const CSV_HEADER: &str =
    "method,r,mu,rep,seed,n_modules,ami,train_codelength,test_codelength,savings,fold_multiedges";

impl ExperimentRecord {
    pub fn csv_row(&self) -> String {
        let ami = match self.ami {
            Some(v) => format!("{v:.6}"),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{}",
            self.method,
            self.r,
            self.mu,
            self.rep,
            self.seed,
            self.n_modules,
            ami,
            self.train_codelength,
            self.test_codelength,
            self.savings,
            self.fold_multiedges
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub r: f64,
    pub mu: f64,
    pub repetitions: u32,
    pub mean_modules: f64,
    pub se_modules: f64,
    pub mean_ami: Option<f64>,
    pub se_ami: Option<f64>,
    pub mean_savings: f64,
    pub se_savings: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub rows: Vec<SummaryRow>,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_job(
    base: &MultiGraph,
    planted: Option<&[u32]>,
    spec: &SweepSpec,
    r_idx: usize,
    mu_idx: usize,
    rep: u32,
) -> Result<Vec<ExperimentRecord>> {
    let job_seed = mix_seed(
        spec.seed,
        ((r_idx as u64) << 40) ^ ((mu_idx as u64) << 20) ^ rep as u64,
    );
    let r = spec.r_values[r_idx];
    let mu = spec.mu_values[mu_idx];
    let opts = FlowOptions {
        tolerance: spec.tolerance,
        max_iter: 10_000,
    };

    let sampled = remove_multiedges(base, r, mix_seed(job_seed, 1))?;
    let labels_mu = match planted {
        Some(p) => Some(randomize_metadata(p, mu, mix_seed(job_seed, 2))?),
        None => None,
    };
    let split_seed = mix_seed(job_seed, 3);

    let mut records = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let cfg = SearchConfig {
            seed: mix_seed(job_seed, 4),
            trials: spec.trials,
            ..SearchConfig::default()
        };
        let detection = detect(
            &sampled,
            method,
            labels_mu.as_deref(),
            spec.teleport_alpha,
            opts,
            &cfg,
        )?;
        let ami = match planted {
            Some(p) => Some(metrics::ami(detection.partition.module_of(), p)?),
            None => None,
        };
        let xv_cfg = SearchConfig {
            seed: mix_seed(job_seed, 5),
            trials: spec.trials,
            ..SearchConfig::default()
        };
        let xv = cross_validate(
            &sampled,
            method,
            labels_mu.as_deref(),
            spec.teleport_alpha,
            opts,
            &xv_cfg,
            split_seed,
        )?;
        records.push(ExperimentRecord {
            method: method.name().to_string(),
            r,
            mu,
            rep,
            seed: job_seed,
            n_modules: detection.partition.n_modules(),
            ami,
            train_codelength: xv.train_codelength,
            test_codelength: xv.test_codelength,
            savings: xv.savings,
            fold_multiedges: xv.train_multiedges,
        });
    }
    Ok(records)
}

/// Run the full sweep, streaming CSV rows to `csv_out` (header included) in
/// deterministic order, and return per-(method, r, mu) summaries. Jobs run
/// on the worker pool with seeds derived from (seed, r, mu, repetition), so
/// the output is independent of scheduling.
pub fn run_sweep(spec: &SweepSpec, csv_out: &mut dyn Write) -> Result<SweepSummary> {
    if spec.repetitions == 0 {
        return Err(Error::validation("repetitions must be at least 1"));
    }
    if spec.methods.is_empty() {
        return Err(Error::validation("no methods configured"));
    }
    for &r in &spec.r_values {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::validation(format!("removal fraction {r} outside [0, 1)")));
        }
    }
    for &mu in &spec.mu_values {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::validation(format!(
                "metadata randomization fraction {mu} outside [0, 1]"
            )));
        }
    }

    let (base, planted): (MultiGraph, Option<Vec<u32>>) = match &spec.source {
        SweepSource::Synthetic(p) => {
            let (g, labels) = generate_planted(
                p.n,
                p.avg_degree,
                p.mixing,
                p.n_modules,
                p.mean_weight,
                spec.seed,
            )?;
            (g, Some(labels))
        }
        SweepSource::Network { graph, reference } => (graph.clone(), reference.clone()),
    };
    if planted.is_none() && spec.methods.contains(&Method::Metadata) {
        return Err(Error::validation(
            "the metadata method needs reference labels for this network",
        ));
    }

    let mut jobs: Vec<(usize, usize, u32)> = Vec::new();
    for r_idx in 0..spec.r_values.len() {
        for mu_idx in 0..spec.mu_values.len() {
            for rep in 0..spec.repetitions {
                jobs.push((r_idx, mu_idx, rep));
            }
        }
    }

    let results: Vec<Result<Vec<ExperimentRecord>>> = jobs
        .par_iter()
        .map(|&(r_idx, mu_idx, rep)| run_job(&base, planted.as_deref(), spec, r_idx, mu_idx, rep))
        .collect();

    writeln!(csv_out, "{CSV_HEADER}")?;
    let mut records: Vec<ExperimentRecord> = Vec::new();
    for result in results {
        match result {
            Ok(rows) => {
                for row in rows {
                    writeln!(csv_out, "{}", row.csv_row())?;
                    records.push(row);
                }
            }
            Err(e) => {
                csv_out.flush()?;
                return Err(e);
            }
        }
    }
    csv_out.flush()?;

    let mut rows = Vec::new();
    for &method in &spec.methods {
        for (r_idx, &r) in spec.r_values.iter().enumerate() {
            for (mu_idx, &mu) in spec.mu_values.iter().enumerate() {
                let _ = (r_idx, mu_idx);
                let group: Vec<&ExperimentRecord> = records
                    .iter()
                    .filter(|rec| rec.method == method.name() && rec.r == r && rec.mu == mu)
                    .collect();
                if group.is_empty() {
                    continue;
                }
                let modules: Vec<f64> = group.iter().map(|g| g.n_modules as f64).collect();
                let savings: Vec<f64> = group.iter().map(|g| g.savings).collect();
                let amis: Vec<f64> = group.iter().filter_map(|g| g.ami).collect();
                let (mean_modules, se_modules) = mean_and_se(&modules);
                let (mean_savings, se_savings) = mean_and_se(&savings);
                let (mean_ami, se_ami) = if amis.is_empty() {
                    (None, None)
                } else {
                    let (m, s) = mean_and_se(&amis);
                    (Some(m), Some(s))
                };
                rows.push(SummaryRow {
                    method: method.name().to_string(),
                    r,
                    mu,
                    repetitions: group.len() as u32,
                    mean_modules,
                    se_modules,
                    mean_ami,
                    se_ami,
                    mean_savings,
                    se_savings,
                });
            }
        }
    }
    Ok(SweepSummary { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_two_cliques() -> MultiGraph {
        MultiGraph::from_arcs(
            6,
            vec![
                (0, 1, 3.0),
                (1, 2, 3.0),
                (2, 0, 3.0),
                (3, 4, 3.0),
                (4, 5, 3.0),
                (5, 3, 3.0),
                (0, 3, 1.0),
            ],
            false,
        )
        .unwrap()
    }

    #[test]
    fn zero_mixing_keeps_arcs_internal() {
        let (g, labels) = generate_planted(60, 5.0, 0.0, 4, 2.0, 7).unwrap();
        for a in g.arcs() {
            assert_eq!(labels[a.source as usize], labels[a.target as usize]);
        }
    }

    #[test]
    fn planted_matches_requested_statistics() {
        let mut deg_sum = 0.0;
        let mut weight_sum = 0.0;
        let mut arc_count = 0.0;
        let seeds = 5;
        let n = 400;
        for seed in 0..seeds {
            let (g, _) = generate_planted(n, 6.0, 0.3, 8, 3.0, seed).unwrap();
            deg_sum += g.n_arcs() as f64 / n as f64;
            weight_sum += g.arcs().iter().map(|a| a.weight).sum::<f64>();
            arc_count += g.n_arcs() as f64;
        }
        let mean_degree = deg_sum / seeds as f64;
        let mean_weight = weight_sum / arc_count;
        assert!((mean_degree - 6.0).abs() / 6.0 < 0.1, "degree {mean_degree}");
        assert!((mean_weight - 3.0).abs() / 3.0 < 0.1, "weight {mean_weight}");
    }

    #[test]
    fn planted_rejects_bad_parameters() {
        assert!(generate_planted(3, 3.0, 0.2, 5, 2.0, 1).is_err());
        assert!(generate_planted(10, 3.0, 1.0, 2, 2.0, 1).is_err());
        assert!(generate_planted(10, 3.0, 0.2, 2, 0.5, 1).is_err());
    }

    #[test]
    fn planted_spreads_remainder_nodes() {
        let (_, labels) = generate_planted(10, 2.0, 0.1, 3, 1.0, 4).unwrap();
        let mut sizes = [0usize; 3];
        for &l in &labels {
            sizes[l as usize] += 1;
        }
        assert_eq!(sizes, [4, 3, 3]);
    }

    #[test]
    fn removal_counts_are_exact() {
        let g = toy_two_cliques();
        let m = multiedge_count(&g).unwrap();
        assert_eq!(m, 19);
        for seed in 0..20 {
            for r in [0.0, 0.25, 0.5, 0.9] {
                let reduced = remove_multiedges(&g, r, seed).unwrap();
                let kept = multiedge_count(&reduced).unwrap();
                assert_eq!(kept, m - (r * m as f64).round() as u64);
                assert_eq!(reduced.n_nodes(), g.n_nodes());
            }
        }
    }

    #[test]
    fn removal_r_zero_is_identity() {
        let g = toy_two_cliques();
        let same = remove_multiedges(&g, 0.0, 3).unwrap();
        assert_eq!(g.arcs(), same.arcs());
    }

    #[test]
    fn removal_single_arc_half() {
        let g = MultiGraph::from_arcs(2, vec![(0, 1, 4.0)], true).unwrap();
        for seed in 0..10 {
            let reduced = remove_multiedges(&g, 0.5, seed).unwrap();
            assert_eq!(reduced.arcs().len(), 1);
            assert_eq!(reduced.arcs()[0].weight, 2.0);
        }
    }

    #[test]
    fn removal_rejects_fractional_weights() {
        let g = MultiGraph::from_arcs(2, vec![(0, 1, 1.5)], true).unwrap();
        let err = remove_multiedges(&g, 0.5, 1).unwrap_err();
        assert!(err.to_string().contains("integer"));
    }

    #[test]
    fn removal_marginals_match_hypergeometric_expectation() {
        // Five arcs, 15 units, remove 6: per-unit inclusion is uniform, so
        // arc k loses w_k * 6/15 in expectation.
        let weights = [3.0f64, 1.0, 4.0, 2.0, 5.0];
        let arcs: Vec<(u32, u32, f64)> = weights
            .iter()
            .enumerate()
            .map(|(k, &w)| (0u32, (k + 1) as u32, w))
            .collect();
        let g = MultiGraph::from_arcs(6, arcs, true).unwrap();
        let runs = 1000;
        let mut removed_sum = [0.0f64; 5];
        let mut dist_first = std::collections::HashMap::new();
        for seed in 0..runs {
            let reduced = remove_multiedges(&g, 0.4, seed).unwrap();
            for (k, &w) in weights.iter().enumerate() {
                let kept = reduced
                    .arcs()
                    .iter()
                    .find(|a| a.target == (k + 1) as u32)
                    .map(|a| a.weight)
                    .unwrap_or(0.0);
                let removed = w - kept;
                removed_sum[k] += removed;
                if k == 0 {
                    *dist_first.entry(removed as u64).or_insert(0.0f64) += 1.0;
                }
            }
        }
        for (k, &w) in weights.iter().enumerate() {
            let expected = w * 6.0 / 15.0;
            let mean = removed_sum[k] / runs as f64;
            // Hypergeometric sd per draw is below 1.1; 5 sigma over 1000 runs.
            assert!(
                (mean - expected).abs() < 5.0 * 1.1 / (runs as f64).sqrt(),
                "arc {k}: mean {mean} expected {expected}"
            );
        }
        // Chi-square of the first arc's removal count against the exact
        // hypergeometric pmf (population 15, successes 3, draws 6).
        let pmf = |x: u64| -> f64 {
            let choose = |n: u64, k: u64| -> f64 {
                if k > n {
                    return 0.0;
                }
                let mut v = 1.0;
                for i in 0..k {
                    v *= (n - i) as f64 / (i + 1) as f64;
                }
                v
            };
            choose(3, x) * choose(12, 6 - x) / choose(15, 6)
        };
        let mut chi2 = 0.0;
        for x in 0..=3u64 {
            let expected = pmf(x) * runs as f64;
            let observed = dist_first.get(&x).copied().unwrap_or(0.0);
            chi2 += (observed - expected) * (observed - expected) / expected;
        }
        assert!(chi2 < 20.0, "chi-square {chi2}");
    }

    #[test]
    fn split_conserves_multiedges_per_arc() {
        let g = toy_two_cliques();
        for seed in 0..10 {
            let (train, test) = split_two_fold(&g, seed).unwrap();
            let m = multiedge_count(&g).unwrap();
            let mt = multiedge_count(&train).unwrap();
            let ms = multiedge_count(&test).unwrap();
            assert_eq!(mt + ms, m);
            assert_eq!(mt, m.div_ceil(2));
            for a in g.arcs() {
                let w_train = train
                    .arcs()
                    .iter()
                    .find(|b| b.source == a.source && b.target == a.target)
                    .map(|b| b.weight)
                    .unwrap_or(0.0);
                let w_test = test
                    .arcs()
                    .iter()
                    .find(|b| b.source == a.source && b.target == a.target)
                    .map(|b| b.weight)
                    .unwrap_or(0.0);
                assert_eq!(w_train + w_test, a.weight);
            }
        }
    }

    #[test]
    fn split_forced_single_pair() {
        let g = MultiGraph::from_arcs(2, vec![(0, 1, 2.0)], true).unwrap();
        for seed in 0..5 {
            let (train, test) = split_two_fold(&g, seed).unwrap();
            assert_eq!(train.arcs()[0].weight, 1.0);
            assert_eq!(test.arcs()[0].weight, 1.0);
        }
    }

    #[test]
    fn metadata_randomization_limits() {
        let labels: Vec<u32> = (0..200).map(|i| i % 8).collect();
        let same = randomize_metadata(&labels, 0.0, 9).unwrap();
        assert_eq!(same, labels);

        let mut changed_total = 0usize;
        let runs = 50;
        for seed in 0..runs {
            let out = randomize_metadata(&labels, 0.5, seed).unwrap();
            changed_total += out.iter().zip(&labels).filter(|(a, b)| a != b).count();
            // Labels stay inside the existing universe.
            assert!(out.iter().all(|&l| l < 8));
        }
        // Half the nodes are touched and 7/8 of touched labels change.
        let expected = 0.5 * (7.0 / 8.0) * 200.0;
        let mean = changed_total as f64 / runs as f64;
        assert!((mean - expected).abs() < 8.0, "mean {mean} expected {expected}");

        let full = randomize_metadata(&labels, 1.0, 3).unwrap();
        let v = metrics::ami(&full, &labels).unwrap();
        assert!(v < 0.2, "randomized labels should decorrelate, ami {v}");
    }

    #[test]
    fn cross_validation_behaviour() {
        let g = toy_two_cliques();
        let cfg = SearchConfig {
            trials: 4,
            ..SearchConfig::default()
        };
        let xv = cross_validate(
            &g,
            Method::Standard,
            None,
            0.15,
            FlowOptions::default(),
            &cfg,
            11,
        )
        .unwrap();
        assert_eq!(xv.train_multiedges + xv.test_multiedges, 19);
        // The one-module partition scores exactly zero savings by definition.
        let (_, test) = split_two_fold(&g, 11).unwrap();
        let flows = observed_flow(&test, FlowOptions::default()).unwrap();
        let l1 = mapeq::one_module_codelength(&flows);
        let l = mapeq::codelength(&flows, &Partition::one_module(6)).unwrap();
        assert_eq!(mapeq::codelength_savings(l, l1).unwrap(), 0.0);
    }

    #[test]
    fn fold_symmetry_on_average() {
        // Training on either fold gives statistically indistinguishable
        // savings; compare means over seeds.
        let g = toy_two_cliques();
        let cfg = SearchConfig {
            trials: 2,
            ..SearchConfig::default()
        };
        let mut direct = Vec::new();
        let mut swapped = Vec::new();
        for seed in 0..16 {
            let (f1, f2) = split_two_fold(&g, seed).unwrap();
            for (train, test, out) in [(&f1, &f2, &mut direct), (&f2, &f1, &mut swapped)] {
                let flows_train = observed_flow(train, FlowOptions::default()).unwrap();
                let part = search::optimize(&flows_train, &cfg);
                let flows_test = observed_flow(test, FlowOptions::default()).unwrap();
                let l = mapeq::codelength(&flows_test, &part).unwrap();
                let l1 = mapeq::one_module_codelength(&flows_test);
                out.push(mapeq::codelength_savings(l, l1).unwrap());
            }
        }
        let m1 = direct.iter().sum::<f64>() / direct.len() as f64;
        let m2 = swapped.iter().sum::<f64>() / swapped.len() as f64;
        assert!((m1 - m2).abs() < 0.15, "{m1} vs {m2}");
    }

    #[test]
    fn sweep_is_reproducible_and_counts_rows() {
        let spec = SweepSpec {
            seed: 42,
            repetitions: 2,
            r_values: vec![0.0, 0.3],
            mu_values: vec![0.0],
            methods: vec![Method::Standard, Method::Regularized],
            trials: 2,
            ..SweepSpec::new(SweepSource::Synthetic(PlantedParams {
                n: 48,
                avg_degree: 5.0,
                mixing: 0.2,
                n_modules: 4,
                mean_weight: 3.0,
            }))
        };
        let mut csv_a = Vec::new();
        let summary_a = run_sweep(&spec, &mut csv_a).unwrap();
        let mut csv_b = Vec::new();
        let _ = run_sweep(&spec, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        let text = String::from_utf8(csv_a).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        // header + |r| * |mu| * reps * methods
        assert_eq!(rows.len(), 1 + 2 * 1 * 2 * 2);
        assert_eq!(rows[0], CSV_HEADER);
        assert_eq!(summary_a.rows.len(), 4);
    }

    #[test]
    fn sweep_rejects_unknown_method_name() {
        assert!(Method::parse("standard").is_ok());
        assert!(Method::parse("does-not-exist").is_err());
    }

    proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]
        #[test]
        fn split_conservation_property(
            weights in proptest::collection::vec(1u32..6, 1..10),
            seed in 0u64..1000
        ) {
            let arcs: Vec<(u32, u32, f64)> = weights
                .iter()
                .enumerate()
                .map(|(k, &w)| ((k % 3) as u32, (k % 5) as u32 + 3, w as f64))
                .collect();
            let g = MultiGraph::from_arcs(8, arcs, true).unwrap();
            let m = multiedge_count(&g).unwrap();
            let (train, test) = split_two_fold(&g, seed).unwrap();
            prop_assert_eq!(multiedge_count(&train).unwrap(), m.div_ceil(2));
            prop_assert_eq!(
                multiedge_count(&train).unwrap() + multiedge_count(&test).unwrap(),
                m
            );
        }
    }
}
