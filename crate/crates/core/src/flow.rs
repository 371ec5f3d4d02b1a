//! Stationary visit rates and flow decompositions.
//!
//! Every flow model is represented the same way: sparse observed
//! transitions (one CSR row per node, the maximum-likelihood rates) plus a
//! low-rank background whose flow from i to j factorizes as
//! `src[i] * tgt[j]`, optionally restricted to a group (metadata label or
//! bipartite type) and optionally excluding self-pairs. The regularized
//! walk, fixed-rate teleportation, and dangling-node redistribution all fit
//! this shape, so one operator application costs O(E + N + #groups) and no
//! dense structure is ever formed.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::MultiGraph;
use crate::prior::{PriorMode, PriorModel};

/// Convergence controls for the power iteration.
#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// L1 threshold on the change produced by one operator application.
    pub tolerance: f64,
    pub max_iter: u64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            tolerance: 1e-12,
            max_iter: 10_000,
        }
    }
}

/// Rank-one (plus per-group rank-one) flow component: the prior network,
/// teleportation, or dangling redistribution, depending on the model.
#[derive(Debug, Clone, Default)]
pub struct Background {
    pub src_global: Vec<f64>,
    pub tgt_global: Vec<f64>,
    pub src_group: Vec<f64>,
    pub tgt_group: Vec<f64>,
    pub group_of_src: Vec<u32>,
    pub group_of_tgt: Vec<u32>,
    pub n_groups: u32,
    /// When set, the pair (i, i) carries no background flow.
    pub exclude_self: bool,
    pub tgt_global_total: f64,
    pub tgt_group_totals: Vec<f64>,
}

impl Background {
    pub fn none() -> Background {
        Background::default()
    }

    pub fn has_global(&self) -> bool {
        !self.src_global.is_empty()
    }

    pub fn has_groups(&self) -> bool {
        !self.src_group.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        !self.has_global() && !self.has_groups()
    }

    fn finish(mut self) -> Background {
        self.tgt_global_total = self.tgt_global.iter().sum();
        self.tgt_group_totals = vec![0.0; self.n_groups as usize];
        if self.has_groups() {
            for (j, &g) in self.group_of_tgt.iter().enumerate() {
                self.tgt_group_totals[g as usize] += self.tgt_group[j];
            }
        }
        self
    }

    /// Pairwise background flow from i to j. For oracles and small graphs;
    /// production paths use the aggregate sums.
    pub fn flow(&self, i: usize, j: usize) -> f64 {
        if self.exclude_self && i == j {
            return 0.0;
        }
        let mut f = 0.0;
        if self.has_global() {
            f += self.src_global[i] * self.tgt_global[j];
        }
        if self.has_groups() && self.group_of_src[i] == self.group_of_tgt[j] {
            f += self.src_group[i] * self.tgt_group[j];
        }
        f
    }

    /// Total background flow leaving node i toward other nodes.
    pub fn out_external(&self, i: usize) -> f64 {
        let mut f = 0.0;
        if self.has_global() {
            f += self.src_global[i] * (self.tgt_global_total - self.tgt_global[i]);
        }
        if self.has_groups() {
            let g = self.group_of_src[i] as usize;
            let mut t = self.tgt_group_totals[g];
            if self.group_of_tgt[i] as usize == g {
                t -= self.tgt_group[i];
            }
            f += self.src_group[i] * t;
        }
        f
    }
}

/// Converged flows: visit rates, prior mixing weights, normalized observed
/// transition rows, and the background component.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub visit_rate: Vec<f64>,
    pub alpha: Vec<f64>,
    row_start: Vec<usize>,
    obs_target: Vec<u32>,
    obs_prob: Vec<f64>,
    pub background: Background,
    pub residual: f64,
    pub iterations: u64,
}

impl FlowField {
    pub fn n_nodes(&self) -> usize {
        self.visit_rate.len()
    }

    /// Normalized observed transition row of node i.
    pub fn observed_row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_start[i]..self.row_start[i + 1];
        (&self.obs_target[r.clone()], &self.obs_prob[r])
    }

    /// Multiplier turning an observed row entry into stationary arc flow:
    /// `flow(i -> j) = out_coef(i) * obs_prob`.
    pub fn out_coef(&self, i: usize) -> f64 {
        self.visit_rate[i] * (1.0 - self.alpha[i])
    }

    /// Visit every observed arc flow once.
    pub fn for_each_arc_flow(&self, mut f: impl FnMut(u32, u32, f64)) {
        for i in 0..self.n_nodes() {
            let coef = self.out_coef(i);
            let (targets, probs) = self.observed_row(i);
            for (&t, &p) in targets.iter().zip(probs) {
                f(i as u32, t, coef * p);
            }
        }
    }
}

struct Csr {
    row_start: Vec<usize>,
    target: Vec<u32>,
    weight: Vec<f64>,
}

impl Csr {
    fn from_graph(g: &MultiGraph) -> Csr {
        let n = g.n_nodes();
        let mut row_start = vec![0usize; n + 1];
        for a in g.arcs() {
            row_start[a.source as usize + 1] += 1;
        }
        for i in 0..n {
            row_start[i + 1] += row_start[i];
        }
        let mut fill = row_start.clone();
        let mut target = vec![0u32; g.n_arcs()];
        let mut weight = vec![0.0; g.n_arcs()];
        for a in g.arcs() {
            let pos = fill[a.source as usize];
            target[pos] = a.target;
            weight[pos] = a.weight;
            fill[a.source as usize] += 1;
        }
        Csr {
            row_start,
            target,
            weight,
        }
    }

    fn bytes(&self) -> usize {
        self.row_start.len() * std::mem::size_of::<usize>()
            + self.target.len() * std::mem::size_of::<u32>()
            + self.weight.len() * std::mem::size_of::<f64>()
    }
}

enum Kind<'a> {
    Regularized {
        prior: &'a PriorModel,
        // s_out_i + gamma_out_total_i; one division per node per step.
        denom: Vec<f64>,
    },
    Teleport {
        alpha_eff: Vec<f64>,
        inv_s: Vec<f64>,
    },
    Observed {
        inv_s: Vec<f64>,
        dangling: Vec<u32>,
    },
}

/// One-step transition operator with operation counting, shared by the
/// public `apply_*` entry points and the power iteration.
pub struct FlowEngine<'a> {
    n: usize,
    csr: Csr,
    kind: Kind<'a>,
    group_acc: Vec<f64>,
    ops: u64,
}

impl<'a> FlowEngine<'a> {
    pub fn regularized(g: &MultiGraph, prior: &'a PriorModel) -> FlowEngine<'a> {
        let denom: Vec<f64> = (0..g.n_nodes())
            .map(|i| g.s_out()[i] + prior.gamma_out_total()[i])
            .collect();
        let groups = match prior.mode() {
            PriorMode::Uniform => 0,
            PriorMode::Bipartite => 2,
            PriorMode::Metadata => prior.lambda_label().len(),
        };
        FlowEngine {
            n: g.n_nodes(),
            csr: Csr::from_graph(g),
            kind: Kind::Regularized { prior, denom },
            group_acc: vec![0.0; groups],
            ops: 0,
        }
    }

    pub fn teleport(g: &MultiGraph, alpha: f64) -> Result<FlowEngine<'a>> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!(
                "teleportation rate must lie strictly between 0 and 1, got {alpha}"
            )));
        }
        let alpha_eff: Vec<f64> = g
            .s_out()
            .iter()
            .map(|&s| if s > 0.0 { alpha } else { 1.0 })
            .collect();
        let inv_s: Vec<f64> = g
            .s_out()
            .iter()
            .map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 })
            .collect();
        Ok(FlowEngine {
            n: g.n_nodes(),
            csr: Csr::from_graph(g),
            kind: Kind::Teleport { alpha_eff, inv_s },
            group_acc: Vec::new(),
            ops: 0,
        })
    }

    pub fn observed(g: &MultiGraph) -> FlowEngine<'a> {
        let inv_s: Vec<f64> = g
            .s_out()
            .iter()
            .map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 })
            .collect();
        let dangling: Vec<u32> = (0..g.n_nodes() as u32)
            .filter(|&i| g.s_out()[i as usize] <= 0.0)
            .collect();
        FlowEngine {
            n: g.n_nodes(),
            csr: Csr::from_graph(g),
            kind: Kind::Observed { inv_s, dangling },
            group_acc: Vec::new(),
            ops: 0,
        }
    }

    /// Touches of arcs, nodes, and group accumulators so far; grows
    /// linearly in E + N + #groups per application.
    pub fn op_count(&self) -> u64 {
        self.ops
    }

    /// Bytes held in the engine's own buffers (graph CSR plus per-node
    /// constants); linear in N + E.
    pub fn memory_footprint_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        let per_node = match &self.kind {
            Kind::Regularized { denom, .. } => denom.len() * f,
            Kind::Teleport { alpha_eff, inv_s } => (alpha_eff.len() + inv_s.len()) * f,
            Kind::Observed { inv_s, dangling } => {
                inv_s.len() * f + dangling.len() * std::mem::size_of::<u32>()
            }
        };
        self.csr.bytes() + per_node + self.group_acc.len() * f
    }

    /// Apply the transition operator once: `next = p * T`, normalized.
    pub fn apply(&mut self, p: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.n];
        self.apply_into(p, &mut next);
        next
    }

    fn apply_into(&mut self, p: &[f64], next: &mut [f64]) {
        debug_assert_eq!(p.len(), self.n);
        next.fill(0.0);

        match &self.kind {
            Kind::Regularized { prior, denom } => {
                match prior.mode() {
                    PriorMode::Uniform => {
                        let mut acc = 0.0;
                        for i in 0..self.n {
                            let u = if denom[i] > 0.0 { p[i] / denom[i] } else { 0.0 };
                            acc += prior.prefactor() * prior.out_factor()[i] * u;
                        }
                        let lambda = prior.lambda();
                        for j in 0..self.n {
                            let u = if denom[j] > 0.0 { p[j] / denom[j] } else { 0.0 };
                            let h_j = prior.prefactor() * prior.out_factor()[j] * u;
                            next[j] = prior.in_factor()[j] * lambda * (acc - h_j);
                        }
                        self.ops += 2 * self.n as u64;
                    }
                    PriorMode::Metadata => {
                        let labels = prior.label_of();
                        let mut acc = 0.0;
                        self.group_acc.fill(0.0);
                        for i in 0..self.n {
                            let u = if denom[i] > 0.0 { p[i] / denom[i] } else { 0.0 };
                            let h = prior.prefactor() * prior.out_factor()[i] * u;
                            acc += h;
                            self.group_acc[labels[i] as usize] += h;
                        }
                        let lambda = prior.lambda();
                        for j in 0..self.n {
                            let u = if denom[j] > 0.0 { p[j] / denom[j] } else { 0.0 };
                            let h_j = prior.prefactor() * prior.out_factor()[j] * u;
                            let l = labels[j] as usize;
                            next[j] = prior.in_factor()[j]
                                * (lambda * (acc - h_j)
                                    + prior.lambda_label()[l] * (self.group_acc[l] - h_j));
                        }
                        self.ops += 2 * self.n as u64 + self.group_acc.len() as u64;
                    }
                    PriorMode::Bipartite => {
                        let types = prior.type_of();
                        let mut acc = [0.0, 0.0];
                        for i in 0..self.n {
                            let u = if denom[i] > 0.0 { p[i] / denom[i] } else { 0.0 };
                            acc[types[i].index()] +=
                                prior.prefactor() * prior.out_factor()[i] * u;
                        }
                        let lambda_ab = prior.lambda_ab();
                        for j in 0..self.n {
                            let from = types[j].opposite().index();
                            next[j] = prior.in_factor()[j] * lambda_ab * acc[from];
                        }
                        self.ops += 2 * self.n as u64;
                    }
                }
                // Observed arcs share the same per-node normalization.
                for i in 0..self.n {
                    if denom[i] <= 0.0 {
                        continue;
                    }
                    let u = p[i] / denom[i];
                    for k in self.csr.row_start[i]..self.csr.row_start[i + 1] {
                        next[self.csr.target[k] as usize] += u * self.csr.weight[k];
                    }
                }
                self.ops += self.csr.target.len() as u64;
            }
            Kind::Teleport { alpha_eff, inv_s } => {
                let mut tele_mass = 0.0;
                for i in 0..self.n {
                    tele_mass += p[i] * alpha_eff[i];
                    let coef = p[i] * (1.0 - alpha_eff[i]) * inv_s[i];
                    for k in self.csr.row_start[i]..self.csr.row_start[i + 1] {
                        next[self.csr.target[k] as usize] += coef * self.csr.weight[k];
                    }
                }
                let share = tele_mass / self.n as f64;
                for v in next.iter_mut() {
                    *v += share;
                }
                self.ops += (2 * self.n + self.csr.target.len()) as u64;
            }
            Kind::Observed { inv_s, dangling } => {
                let mut dangling_mass = 0.0;
                for &i in dangling {
                    dangling_mass += p[i as usize];
                }
                for i in 0..self.n {
                    let coef = p[i] * inv_s[i];
                    for k in self.csr.row_start[i]..self.csr.row_start[i + 1] {
                        next[self.csr.target[k] as usize] += coef * self.csr.weight[k];
                    }
                }
                if dangling_mass > 0.0 {
                    let share = dangling_mass / self.n as f64;
                    for v in next.iter_mut() {
                        *v += share;
                    }
                }
                self.ops += (2 * self.n + self.csr.target.len()) as u64;
            }
        }

        let total: f64 = next.iter().sum();
        if total > 0.0 {
            let inv = 1.0 / total;
            for v in next.iter_mut() {
                *v *= inv;
            }
        }
    }

    /// Power-iterate from the uniform vector to the stationary distribution.
    /// Iterates the half-lazy operator `(p + pT) / 2`, which has the same
    /// fixed points as `T` but cannot oscillate on periodic chains; the
    /// reported residual is the L1 change under one application of `T`
    /// itself.
    fn stationary(mut self, opts: FlowOptions) -> Result<(Vec<f64>, f64, u64, FlowEngine<'a>)> {
        if opts.tolerance <= 0.0 {
            return Err(Error::domain("tolerance must be positive"));
        }
        let n = self.n;
        if n == 0 {
            return Err(Error::domain("cannot compute flows on an empty graph"));
        }
        let mut p = vec![1.0 / n as f64; n];
        if n == 1 {
            return Ok((p, 0.0, 0, self));
        }
        let mut next = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for it in 1..=opts.max_iter {
            self.apply_into(&p, &mut next);
            residual = p
                .iter()
                .zip(next.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
            if residual < opts.tolerance {
                // Return the iterate whose one-step change was measured.
                return Ok((p, residual, it, self));
            }
            for (cur, nxt) in p.iter_mut().zip(next.iter()) {
                *cur = 0.5 * (*cur + *nxt);
            }
        }
        Err(Error::NonConvergence {
            max_iter: opts.max_iter,
            residual,
        })
    }

    fn observed_rows(&self, g: &MultiGraph) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
        let mut probs = vec![0.0; self.csr.weight.len()];
        for i in 0..self.n {
            let s = g.s_out()[i];
            if s <= 0.0 {
                continue;
            }
            for k in self.csr.row_start[i]..self.csr.row_start[i + 1] {
                probs[k] = self.csr.weight[k] / s;
            }
        }
        (self.csr.row_start.clone(), self.csr.target.clone(), probs)
    }
}

/// One application of the regularized operator; equals multiplying `p`
/// by the dense posterior-mean transition matrix.
pub fn apply_regularized(g: &MultiGraph, prior: &PriorModel, p: &[f64]) -> Vec<f64> {
    FlowEngine::regularized(g, prior).apply(p)
}

/// Stationary flows of the regularized walk.
pub fn stationary_flow(
    g: &MultiGraph,
    prior: &PriorModel,
    opts: FlowOptions,
) -> Result<FlowField> {
    let engine = FlowEngine::regularized(g, prior);
    let (p, residual, iterations, engine) = engine.stationary(opts)?;
    let (row_start, obs_target, obs_prob) = engine.observed_rows(g);

    let n = g.n_nodes();
    let base: Vec<f64> = (0..n)
        .map(|i| {
            let denom = g.s_out()[i] + prior.gamma_out_total()[i];
            let u = if denom > 0.0 { p[i] / denom } else { 0.0 };
            prior.prefactor() * prior.out_factor()[i] * u
        })
        .collect();

    let background = match prior.mode() {
        PriorMode::Uniform => Background {
            src_global: base.iter().map(|&b| b * prior.lambda()).collect(),
            tgt_global: prior.in_factor().to_vec(),
            exclude_self: true,
            ..Background::default()
        },
        PriorMode::Metadata => Background {
            src_global: base.iter().map(|&b| b * prior.lambda()).collect(),
            tgt_global: prior.in_factor().to_vec(),
            src_group: base
                .iter()
                .enumerate()
                .map(|(i, &b)| b * prior.lambda_label()[prior.label_of()[i] as usize])
                .collect(),
            tgt_group: prior.in_factor().to_vec(),
            group_of_src: prior.label_of().to_vec(),
            group_of_tgt: prior.label_of().to_vec(),
            n_groups: prior.lambda_label().len() as u32,
            exclude_self: true,
            ..Background::default()
        },
        PriorMode::Bipartite => Background {
            src_group: base.iter().map(|&b| b * prior.lambda_ab()).collect(),
            tgt_group: prior.in_factor().to_vec(),
            group_of_src: prior
                .type_of()
                .iter()
                .map(|t| t.opposite().index() as u32)
                .collect(),
            group_of_tgt: prior.type_of().iter().map(|t| t.index() as u32).collect(),
            n_groups: 2,
            exclude_self: true,
            ..Background::default()
        },
    };

    Ok(FlowField {
        visit_rate: p,
        alpha: prior.alpha().to_vec(),
        row_start,
        obs_target,
        obs_prob,
        background: background.finish(),
        residual,
        iterations,
    })
}

/// Stationary flows of the classic random surfer: follow observed links
/// with probability `1 - alpha`, otherwise jump to a uniformly random node
/// (nodes without out-links always jump).
pub fn stationary_flow_teleport(
    g: &MultiGraph,
    alpha: f64,
    opts: FlowOptions,
) -> Result<FlowField> {
    let engine = FlowEngine::teleport(g, alpha)?;
    let (p, residual, iterations, engine) = engine.stationary(opts)?;
    let (row_start, obs_target, obs_prob) = engine.observed_rows(g);
    let n = g.n_nodes();
    let alpha_eff: Vec<f64> = g
        .s_out()
        .iter()
        .map(|&s| if s > 0.0 { alpha } else { 1.0 })
        .collect();
    let background = Background {
        src_global: p.iter().zip(&alpha_eff).map(|(&pi, &a)| pi * a).collect(),
        tgt_global: vec![1.0 / n as f64; n],
        exclude_self: false,
        ..Background::default()
    };
    Ok(FlowField {
        visit_rate: p,
        alpha: alpha_eff,
        row_start,
        obs_target,
        obs_prob,
        background: background.finish(),
        residual,
        iterations,
    })
}

/// Flows of the bare observed walk (maximum-likelihood rates). Undirected
/// graphs use the closed form `p_i ∝ s_i`; directed graphs are iterated
/// with dangling mass redistributed uniformly.
pub fn observed_flow(g: &MultiGraph, opts: FlowOptions) -> Result<FlowField> {
    let n = g.n_nodes();
    if n == 0 {
        return Err(Error::domain("cannot compute flows on an empty graph"));
    }
    let engine = FlowEngine::observed(g);
    if !g.directed() {
        let total = g.total_out_strength();
        let p: Vec<f64> = if total > 0.0 {
            g.s_out().iter().map(|&s| s / total).collect()
        } else {
            vec![1.0 / n as f64; n]
        };
        let (row_start, obs_target, obs_prob) = engine.observed_rows(g);
        let alpha: Vec<f64> = g
            .s_out()
            .iter()
            .map(|&s| if s > 0.0 { 0.0 } else { 1.0 })
            .collect();
        return Ok(FlowField {
            visit_rate: p,
            alpha,
            row_start,
            obs_target,
            obs_prob,
            background: Background::none().finish(),
            residual: 0.0,
            iterations: 0,
        });
    }

    let (p, residual, iterations, engine) = engine.stationary(opts)?;
    let (row_start, obs_target, obs_prob) = engine.observed_rows(g);
    let alpha: Vec<f64> = g
        .s_out()
        .iter()
        .map(|&s| if s > 0.0 { 0.0 } else { 1.0 })
        .collect();
    // Dangling nodes hand their mass to everyone uniformly.
    let background = Background {
        src_global: p
            .iter()
            .zip(g.s_out())
            .map(|(&pi, &s)| if s > 0.0 { 0.0 } else { pi })
            .collect(),
        tgt_global: vec![1.0 / n as f64; n],
        exclude_self: false,
        ..Background::default()
    };
    Ok(FlowField {
        visit_rate: p,
        alpha,
        row_start,
        obs_target,
        obs_prob,
        background: background.finish(),
        residual,
        iterations,
    })
}

/// Per-module background target masses for a given node-to-module map;
/// the aggregates behind exit-flow computations.
#[derive(Debug, Clone)]
pub struct ModuleTargets {
    pub n_modules: usize,
    pub tgt_global: Vec<f64>,
    pub tgt_group: HashMap<(u32, u32), f64>,
}

impl ModuleTargets {
    pub fn new(flows: &FlowField, module_of: &[u32], n_modules: usize) -> ModuleTargets {
        let bg = &flows.background;
        let mut tgt_global = vec![0.0; if bg.has_global() { n_modules } else { 0 }];
        if bg.has_global() {
            for (j, &m) in module_of.iter().enumerate() {
                tgt_global[m as usize] += bg.tgt_global[j];
            }
        }
        let mut tgt_group: HashMap<(u32, u32), f64> = HashMap::new();
        if bg.has_groups() {
            for (j, &m) in module_of.iter().enumerate() {
                *tgt_group.entry((m, bg.group_of_tgt[j])).or_insert(0.0) += bg.tgt_group[j];
            }
        }
        ModuleTargets {
            n_modules,
            tgt_global,
            tgt_group,
        }
    }
}

/// Split node i's per-step flow `p_i` into the mass staying inside its
/// module and the mass leaving it, using observed arcs plus background
/// aggregates. The exit side is exact (sums of crossing terms); the within
/// side is the complement.
pub fn node_transition_masses(
    flows: &FlowField,
    targets: &ModuleTargets,
    module_of: &[u32],
    i: usize,
) -> (f64, f64) {
    let m = module_of[i];
    let mut exit = 0.0;

    let coef = flows.out_coef(i);
    let (tgts, probs) = flows.observed_row(i);
    for (&t, &pr) in tgts.iter().zip(probs) {
        if module_of[t as usize] != m {
            exit += coef * pr;
        }
    }

    let bg = &flows.background;
    if bg.has_global() {
        let outside = (bg.tgt_global_total - targets.tgt_global[m as usize]).max(0.0);
        exit += bg.src_global[i] * outside;
    }
    if bg.has_groups() {
        let g = bg.group_of_src[i];
        let inside = targets.tgt_group.get(&(m, g)).copied().unwrap_or(0.0);
        let outside = (bg.tgt_group_totals[g as usize] - inside).max(0.0);
        exit += bg.src_group[i] * outside;
    }

    let within = (flows.visit_rate[i] - exit).max(0.0);
    (within, exit)
}
