//! Two-level map equation: codelength of a partition under a flow field.
//!
//! The codelength uses one index codebook over module exit flows and one
//! codebook per module mixing its nodes' visit rates with the module exit
//! flow. Logarithms are base 2; `0 log 0 = 0` throughout.

use crate::error::{Error, Result};
use crate::flow::{node_transition_masses, FlowField, ModuleTargets};

#[inline]
pub fn plogp(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// A node-to-module assignment with contiguous module ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    module_of: Vec<u32>,
    n_modules: usize,
}

impl Partition {
    /// Build from an arbitrary assignment; module ids are compacted to
    /// 0..M-1 in first-appearance order.
    pub fn from_assignment(raw: &[u32]) -> Partition {
        let mut seen: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
        let module_of = raw
            .iter()
            .map(|&m| {
                let next = seen.len() as u32;
                *seen.entry(m).or_insert(next)
            })
            .collect();
        Partition {
            module_of,
            n_modules: seen.len(),
        }
    }

    pub fn one_module(n_nodes: usize) -> Partition {
        Partition {
            module_of: vec![0; n_nodes],
            n_modules: if n_nodes == 0 { 0 } else { 1 },
        }
    }

    pub fn singletons(n_nodes: usize) -> Partition {
        Partition {
            module_of: (0..n_nodes as u32).collect(),
            n_modules: n_nodes,
        }
    }

    pub fn module_of(&self) -> &[u32] {
        &self.module_of
    }

    pub fn n_modules(&self) -> usize {
        self.n_modules
    }

    pub fn len(&self) -> usize {
        self.module_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.module_of.is_empty()
    }
}

/// Per-module flow aggregates of a partition: visit-rate mass and exit flow.
#[derive(Debug, Clone)]
pub struct ModuleFlows {
    pub flow: Vec<f64>,
    pub exit: Vec<f64>,
    pub exit_total: f64,
    pub targets: ModuleTargets,
}

/// Aggregate a partition's module flows. Exit flows are sums over crossing
/// arc flows plus background complements, so structurally closed modules
/// get exactly zero exit.
pub fn module_flows(flows: &FlowField, part: &Partition) -> Result<ModuleFlows> {
    if part.len() != flows.n_nodes() {
        return Err(Error::validation(format!(
            "partition covers {} nodes but flows cover {}",
            part.len(),
            flows.n_nodes()
        )));
    }
    let m = part.n_modules();
    let module_of = part.module_of();
    let targets = ModuleTargets::new(flows, module_of, m);

    let mut flow = vec![0.0; m];
    let mut exit = vec![0.0; m];
    for i in 0..flows.n_nodes() {
        let mi = module_of[i] as usize;
        flow[mi] += flows.visit_rate[i];
        let (_, e) = node_transition_masses(flows, &targets, module_of, i);
        exit[mi] += e;
    }
    let exit_total = exit.iter().sum();
    Ok(ModuleFlows {
        flow,
        exit,
        exit_total,
        targets,
    })
}

fn codelength_terms(visit_rate: &[f64], mf: &ModuleFlows) -> f64 {
    let mut l = plogp(mf.exit_total);
    for m in 0..mf.flow.len() {
        l -= 2.0 * plogp(mf.exit[m]);
        l += plogp(mf.exit[m] + mf.flow[m]);
    }
    for &p in visit_rate {
        l -= plogp(p);
    }
    l
}

/// Two-level codelength of `part` in bits per step.
pub fn codelength(flows: &FlowField, part: &Partition) -> Result<f64> {
    let mf = module_flows(flows, part)?;
    Ok(codelength_terms(&flows.visit_rate, &mf))
}

/// Codelength of the all-in-one-module partition: the Shannon entropy of
/// the visit rates.
pub fn one_module_codelength(flows: &FlowField) -> f64 {
    -flows.visit_rate.iter().map(|&p| plogp(p)).sum::<f64>()
}

/// Relative codelength savings of `l` against the one-module baseline `l1`.
pub fn codelength_savings(l: f64, l1: f64) -> Result<f64> {
    if l1 <= 0.0 {
        return Err(Error::domain(format!(
            "savings are undefined for a non-positive baseline codelength {l1}"
        )));
    }
    Ok(1.0 - l / l1)
}
