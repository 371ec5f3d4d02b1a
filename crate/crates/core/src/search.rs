//! Greedy two-level codelength minimization: seeded local node moves plus
//! network aggregation, repeated until no improvement, best of several
//! independent trials.
//!
//! The background (prior or teleport) flow connects all node pairs, so the
//! optimizer never enumerates it. Each active node carries its background
//! source/target masses and every module aggregates them; the flow between
//! a node and a module is then a handful of products, and the evaluated
//! move gains are exact for every candidate considered.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::flow::FlowField;
use crate::graph::MultiGraph;
use crate::mapeq::{self, plogp, Partition};

const MIN_MOVE_GAIN: f64 = 1e-15;
const MAX_SWEEPS_PER_LEVEL: u32 = 200;

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub seed: u64,
    /// Independent restarts; the lowest codelength wins.
    pub trials: u32,
    /// Cap on aggregation rounds per trial.
    pub max_outer_loops: u32,
    /// A sweep that improves the codelength by less than this many bits
    /// ends the local-move phase.
    pub improvement_threshold: f64,
    /// Visit nodes in seeded-shuffled order each sweep (on by default).
    pub shuffle_moves: bool,
    /// Recompute the full codelength after every accepted move and panic
    /// on disagreement beyond 1e-9. For tests; very slow.
    pub audit_moves: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 1,
            trials: 10,
            max_outer_loops: 100,
            improvement_threshold: 1e-10,
            shuffle_moves: true,
            audit_moves: false,
        }
    }
}

/// All nodes in one module.
pub fn one_level_partition(g: &MultiGraph) -> Partition {
    Partition::one_module(g.n_nodes())
}

/// Deterministic per-trial seed stream.
pub(crate) fn mix_seed(seed: u64, counter: u64) -> u64 {
    let mut z = seed ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Background masses carried by an active node: global and per-group
/// source/target coefficients summed over its leaves.
#[derive(Debug, Clone, Default)]
struct BgNode {
    src_global: f64,
    tgt_global: f64,
    /// Sorted by group id: (group, src mass, tgt mass).
    groups: Vec<(u32, f64, f64)>,
}

impl BgNode {
    /// Product of this node's own aggregate masses; the overcount removed
    /// when pairing a node against a module that contains it.
    fn self_pair(&self) -> f64 {
        let mut s = self.src_global * self.tgt_global;
        for &(_, src, tgt) in &self.groups {
            s += src * tgt;
        }
        s
    }
}

#[derive(Debug, Clone)]
struct ActiveNode {
    flow: f64,
    /// Total flow leaving this node: external arc flows plus background
    /// mass toward all other nodes.
    exitable: f64,
    bg: BgNode,
    out: Vec<(u32, f64)>,
    inc: Vec<(u32, f64)>,
    members: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Default)]
struct BgTotals {
    tgt_global: f64,
}

#[derive(Debug, Clone)]
struct ActiveNet {
    nodes: Vec<ActiveNode>,
    totals: BgTotals,
    tgt_group_totals: Vec<f64>,
}

fn bg_out_external(bg: &BgNode, net_tgt_global: f64, tgt_group_totals: &[f64]) -> f64 {
    let mut out = bg.src_global * (net_tgt_global - bg.tgt_global);
    for &(g, src, tgt) in &bg.groups {
        out += src * (tgt_group_totals[g as usize] - tgt);
    }
    out.max(0.0)
}

impl ActiveNet {
    fn from_flows(flows: &FlowField) -> ActiveNet {
        let n = flows.n_nodes();
        let bgf = &flows.background;
        let mut nodes: Vec<ActiveNode> = Vec::with_capacity(n);
        for i in 0..n {
            let coef = flows.out_coef(i);
            let (targets, probs) = flows.observed_row(i);
            let mut out = Vec::with_capacity(targets.len());
            for (&t, &p) in targets.iter().zip(probs) {
                if t as usize != i {
                    let f = coef * p;
                    if f > 0.0 {
                        out.push((t, f));
                    }
                }
            }
            let mut groups = Vec::new();
            if bgf.has_groups() {
                let gs = bgf.group_of_src[i];
                let gt = bgf.group_of_tgt[i];
                if gs == gt {
                    groups.push((gs, bgf.src_group[i], bgf.tgt_group[i]));
                } else {
                    let mut pair = vec![(gs, bgf.src_group[i], 0.0), (gt, 0.0, bgf.tgt_group[i])];
                    pair.sort_by_key(|e| e.0);
                    groups.extend(pair);
                }
            }
            let bg = BgNode {
                src_global: if bgf.has_global() { bgf.src_global[i] } else { 0.0 },
                tgt_global: if bgf.has_global() { bgf.tgt_global[i] } else { 0.0 },
                groups,
            };
            nodes.push(ActiveNode {
                flow: flows.visit_rate[i],
                exitable: 0.0,
                bg,
                out,
                inc: Vec::new(),
                members: vec![i as u32],
            });
        }
        let totals = BgTotals {
            tgt_global: bgf.tgt_global_total,
        };
        let tgt_group_totals = bgf.tgt_group_totals.clone();
        let mut net = ActiveNet {
            nodes,
            totals,
            tgt_group_totals,
        };
        net.finish_arcs();
        net
    }

    /// Fill in-arc lists and exitable from the out lists.
    fn finish_arcs(&mut self) {
        let n = self.nodes.len();
        let mut inc: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (v, node) in self.nodes.iter().enumerate() {
            for &(t, f) in &node.out {
                inc[t as usize].push((v as u32, f));
            }
        }
        for (v, list) in inc.into_iter().enumerate() {
            self.nodes[v].inc = list;
        }
        for node in self.nodes.iter_mut() {
            let arc_out: f64 = node.out.iter().map(|&(_, f)| f).sum();
            node.exitable =
                arc_out + bg_out_external(&node.bg, self.totals.tgt_global, &self.tgt_group_totals);
        }
    }

    /// Collapse modules into super-nodes, keeping member leaves.
    fn aggregate(&self, assignment: &[u32]) -> ActiveNet {
        let n = self.nodes.len();
        let mut old_to_new = vec![u32::MAX; n];
        let mut module_count = 0u32;
        for v in 0..n {
            let m = assignment[v] as usize;
            if old_to_new[m] == u32::MAX {
                old_to_new[m] = module_count;
                module_count += 1;
            }
        }
        let k = module_count as usize;
        let mut nodes: Vec<ActiveNode> = (0..k)
            .map(|_| ActiveNode {
                flow: 0.0,
                exitable: 0.0,
                bg: BgNode::default(),
                out: Vec::new(),
                inc: Vec::new(),
                members: Vec::new(),
            })
            .collect();

        let mut group_maps: Vec<BTreeMap<u32, (f64, f64)>> = vec![BTreeMap::new(); k];
        let mut out_maps: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); k];

        for (v, node) in self.nodes.iter().enumerate() {
            let nm = old_to_new[assignment[v] as usize] as usize;
            let agg = &mut nodes[nm];
            agg.flow += node.flow;
            agg.members.extend_from_slice(&node.members);
            agg.bg.src_global += node.bg.src_global;
            agg.bg.tgt_global += node.bg.tgt_global;
            for &(g, s, t) in &node.bg.groups {
                let e = group_maps[nm].entry(g).or_insert((0.0, 0.0));
                e.0 += s;
                e.1 += t;
            }
            for &(t, f) in &node.out {
                let tm = old_to_new[assignment[t as usize] as usize];
                if tm as usize != nm {
                    *out_maps[nm].entry(tm).or_insert(0.0) += f;
                }
            }
        }
        for (nm, map) in group_maps.into_iter().enumerate() {
            nodes[nm].bg.groups = map.into_iter().map(|(g, (s, t))| (g, s, t)).collect();
        }
        for (nm, map) in out_maps.into_iter().enumerate() {
            nodes[nm].out = map.into_iter().collect();
        }

        let mut net = ActiveNet {
            nodes,
            totals: self.totals,
            tgt_group_totals: self.tgt_group_totals.clone(),
        };
        net.finish_arcs();
        net
    }
}

/// Per-module aggregates maintained during a level's sweeps.
struct LevelState {
    assignment: Vec<u32>,
    member_count: Vec<u32>,
    flow: Vec<f64>,
    exit: Vec<f64>,
    bg_src_global: Vec<f64>,
    bg_tgt_global: Vec<f64>,
    bg_groups: Vec<BTreeMap<u32, (f64, f64)>>,
    exit_total: f64,
    sum_plogp_exit: f64,
    sum_plogp_exit_flow: f64,
    empties: Vec<u32>,
}

impl LevelState {
    fn singletons(net: &ActiveNet) -> LevelState {
        let n = net.nodes.len();
        let mut state = LevelState {
            assignment: (0..n as u32).collect(),
            member_count: vec![1; n],
            flow: net.nodes.iter().map(|v| v.flow).collect(),
            exit: net.nodes.iter().map(|v| v.exitable).collect(),
            bg_src_global: net.nodes.iter().map(|v| v.bg.src_global).collect(),
            bg_tgt_global: net.nodes.iter().map(|v| v.bg.tgt_global).collect(),
            bg_groups: net
                .nodes
                .iter()
                .map(|v| v.bg.groups.iter().map(|&(g, s, t)| (g, (s, t))).collect())
                .collect(),
            exit_total: 0.0,
            sum_plogp_exit: 0.0,
            sum_plogp_exit_flow: 0.0,
            empties: Vec::new(),
        };
        state.exit_total = state.exit.iter().sum();
        state.sum_plogp_exit = state.exit.iter().map(|&q| plogp(q)).sum();
        state.sum_plogp_exit_flow = state
            .exit
            .iter()
            .zip(&state.flow)
            .map(|(&q, &f)| plogp(q + f))
            .sum();
        state
    }

    fn codelength(&self, node_term: f64) -> f64 {
        plogp(self.exit_total) - 2.0 * self.sum_plogp_exit + self.sum_plogp_exit_flow + node_term
    }

    /// Background flow between node v and module m, both directions,
    /// counting v's own masses if v is a member of m.
    fn bg_pair(&self, v: &ActiveNode, m: usize) -> f64 {
        let mut f = v.bg.src_global * self.bg_tgt_global[m] + v.bg.tgt_global * self.bg_src_global[m];
        if !v.bg.groups.is_empty() {
            let groups = &self.bg_groups[m];
            for &(g, s, t) in &v.bg.groups {
                if let Some(&(ms, mt)) = groups.get(&g) {
                    f += s * mt + t * ms;
                }
            }
        }
        f
    }

    fn remove_bg(&mut self, v: &ActiveNode, m: usize) {
        self.bg_src_global[m] -= v.bg.src_global;
        self.bg_tgt_global[m] -= v.bg.tgt_global;
        for &(g, s, t) in &v.bg.groups {
            if let Some(e) = self.bg_groups[m].get_mut(&g) {
                e.0 -= s;
                e.1 -= t;
            }
        }
    }

    fn add_bg(&mut self, v: &ActiveNode, m: usize) {
        self.bg_src_global[m] += v.bg.src_global;
        self.bg_tgt_global[m] += v.bg.tgt_global;
        for &(g, s, t) in &v.bg.groups {
            let e = self.bg_groups[m].entry(g).or_insert((0.0, 0.0));
            e.0 += s;
            e.1 += t;
        }
    }

    fn zero_module(&mut self, m: usize) {
        self.flow[m] = 0.0;
        self.exit[m] = 0.0;
        self.bg_src_global[m] = 0.0;
        self.bg_tgt_global[m] = 0.0;
        self.bg_groups[m].clear();
    }
}

/// Modules with the largest background masses, refreshed each sweep; used
/// to shortlist prior-linked move candidates beyond observed neighbors.
struct BgShortlist {
    best_tgt_global: Option<u32>,
    best_src_global: Option<u32>,
    best_tgt_group: BTreeMap<u32, u32>,
    best_src_group: BTreeMap<u32, u32>,
}

impl BgShortlist {
    fn build(state: &LevelState) -> BgShortlist {
        let mut best_tgt_global: Option<(f64, u32)> = None;
        let mut best_src_global: Option<(f64, u32)> = None;
        let mut best_tgt_group: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
        let mut best_src_group: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
        for m in 0..state.flow.len() {
            if state.member_count[m] == 0 {
                continue;
            }
            let tg = state.bg_tgt_global[m];
            if best_tgt_global.map_or(true, |(v, _)| tg > v) && tg > 0.0 {
                best_tgt_global = Some((tg, m as u32));
            }
            let sg = state.bg_src_global[m];
            if best_src_global.map_or(true, |(v, _)| sg > v) && sg > 0.0 {
                best_src_global = Some((sg, m as u32));
            }
            for (&g, &(s, t)) in &state.bg_groups[m] {
                if t > 0.0 {
                    let e = best_tgt_group.entry(g).or_insert((t, m as u32));
                    if t > e.0 {
                        *e = (t, m as u32);
                    }
                }
                if s > 0.0 {
                    let e = best_src_group.entry(g).or_insert((s, m as u32));
                    if s > e.0 {
                        *e = (s, m as u32);
                    }
                }
            }
        }
        BgShortlist {
            best_tgt_global: best_tgt_global.map(|(_, m)| m),
            best_src_global: best_src_global.map(|(_, m)| m),
            best_tgt_group: best_tgt_group.into_iter().map(|(g, (_, m))| (g, m)).collect(),
            best_src_group: best_src_group.into_iter().map(|(g, (_, m))| (g, m)).collect(),
        }
    }
}

struct MoveBuffers {
    order: Vec<u32>,
    cand_modules: Vec<u32>,
    cand_arcflow: Vec<f64>,
    redirect: Vec<u32>,
}

fn shuffle(order: &mut [u32], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

/// Recompute module aggregates and codelength from scratch using only the
/// assignment; audit path for the incremental deltas.
fn recompute_codelength(net: &ActiveNet, assignment: &[u32], node_term: f64) -> f64 {
    let k = assignment.iter().map(|&m| m as usize + 1).max().unwrap_or(0);
    let mut flow = vec![0.0; k];
    let mut exitable = vec![0.0; k];
    let mut internal_arcs = vec![0.0; k];
    let mut src_g = vec![0.0; k];
    let mut tgt_g = vec![0.0; k];
    let mut self_pairs = vec![0.0; k];
    let mut occupied = vec![false; k];
    let mut groups: Vec<BTreeMap<u32, (f64, f64)>> = vec![BTreeMap::new(); k];
    for (v, node) in net.nodes.iter().enumerate() {
        let m = assignment[v] as usize;
        occupied[m] = true;
        flow[m] += node.flow;
        exitable[m] += node.exitable;
        self_pairs[m] += node.bg.self_pair();
        src_g[m] += node.bg.src_global;
        tgt_g[m] += node.bg.tgt_global;
        for &(g, s, t) in &node.bg.groups {
            let e = groups[m].entry(g).or_insert((0.0, 0.0));
            e.0 += s;
            e.1 += t;
        }
        for &(t, f) in &node.out {
            if assignment[t as usize] as usize == m {
                internal_arcs[m] += f;
            }
        }
    }
    let mut exit_total = 0.0;
    let mut sum_q = 0.0;
    let mut sum_qf = 0.0;
    for m in 0..k {
        if !occupied[m] {
            continue;
        }
        // Background flow between distinct members; the members' own
        // self products were counted in self_pairs and come back out.
        let mut internal_bg = src_g[m] * tgt_g[m] - self_pairs[m];
        for (_, &(s, t)) in &groups[m] {
            internal_bg += s * t;
        }
        let q = (exitable[m] - internal_arcs[m] - internal_bg).max(0.0);
        exit_total += q;
        sum_q += plogp(q);
        sum_qf += plogp(q + flow[m]);
    }
    plogp(exit_total) - 2.0 * sum_q + sum_qf + node_term
}

/// One full pass over the nodes; returns (moves, codelength improvement).
fn sweep(
    net: &ActiveNet,
    state: &mut LevelState,
    bufs: &mut MoveBuffers,
    rng: &mut ChaCha8Rng,
    cfg: &SearchConfig,
    node_term: f64,
) -> (u32, f64) {
    let n = net.nodes.len();
    bufs.order.clear();
    bufs.order.extend(0..n as u32);
    if cfg.shuffle_moves {
        shuffle(&mut bufs.order, rng);
    }
    if bufs.redirect.len() < state.flow.len() {
        bufs.redirect.resize(state.flow.len(), u32::MAX);
    }

    let shortlist = BgShortlist::build(state);
    let mut moves = 0u32;
    let mut improvement = 0.0;

    for idx in 0..n {
        let v_idx = bufs.order[idx] as usize;
        let node = &net.nodes[v_idx];
        let a = state.assignment[v_idx];

        bufs.cand_modules.clear();
        bufs.cand_arcflow.clear();
        let add_candidate = |m: u32,
                                 f: f64,
                                 cand_modules: &mut Vec<u32>,
                                 cand_arcflow: &mut Vec<f64>,
                                 redirect: &mut [u32]| {
            let slot = redirect[m as usize];
            if slot == u32::MAX {
                redirect[m as usize] = cand_modules.len() as u32;
                cand_modules.push(m);
                cand_arcflow.push(f);
            } else {
                cand_arcflow[slot as usize] += f;
            }
        };

        for &(t, f) in &node.out {
            add_candidate(
                state.assignment[t as usize],
                f,
                &mut bufs.cand_modules,
                &mut bufs.cand_arcflow,
                &mut bufs.redirect,
            );
        }
        for &(s, f) in &node.inc {
            add_candidate(
                state.assignment[s as usize],
                f,
                &mut bufs.cand_modules,
                &mut bufs.cand_arcflow,
                &mut bufs.redirect,
            );
        }
        add_candidate(a, 0.0, &mut bufs.cand_modules, &mut bufs.cand_arcflow, &mut bufs.redirect);

        let mut shortlist_mods: Vec<u32> = Vec::new();
        if let Some(m) = shortlist.best_tgt_global {
            shortlist_mods.push(m);
        }
        if let Some(m) = shortlist.best_src_global {
            shortlist_mods.push(m);
        }
        for &(g, _, _) in &node.bg.groups {
            if let Some(&m) = shortlist.best_tgt_group.get(&g) {
                shortlist_mods.push(m);
            }
            if let Some(&m) = shortlist.best_src_group.get(&g) {
                shortlist_mods.push(m);
            }
        }
        if state.member_count[a as usize] > 1 {
            if let Some(&e) = state.empties.last() {
                shortlist_mods.push(e);
            }
        }
        for m in shortlist_mods {
            if state.member_count[m as usize] > 0 || Some(m) == state.empties.last().copied() {
                add_candidate(m, 0.0, &mut bufs.cand_modules, &mut bufs.cand_arcflow, &mut bufs.redirect);
            }
        }

        // Flow between v and the rest of its current module.
        let a_us = a as usize;
        let slot_a = bufs.redirect[a_us] as usize;
        let inter_a =
            bufs.cand_arcflow[slot_a] + state.bg_pair(node, a_us) - 2.0 * node.bg.self_pair();

        let q_a = state.exit[a_us];
        let f_a = state.flow[a_us];
        let q_a_new = (q_a - node.exitable + inter_a).max(0.0);

        let mut best_delta = 0.0;
        let mut best: Option<(u32, f64, f64)> = None; // (module, q_a', q_b')

        for c in 0..bufs.cand_modules.len() {
            let b = bufs.cand_modules[c];
            if b == a {
                continue;
            }
            let b_us = b as usize;
            let inter_b = bufs.cand_arcflow[c] + state.bg_pair(node, b_us);
            let q_b = state.exit[b_us];
            let f_b = state.flow[b_us];
            let q_b_new = (q_b + node.exitable - inter_b).max(0.0);
            let exit_total_new = state.exit_total - q_a - q_b + q_a_new + q_b_new;

            let delta = plogp(exit_total_new) - plogp(state.exit_total)
                - 2.0 * (plogp(q_a_new) + plogp(q_b_new) - plogp(q_a) - plogp(q_b))
                + plogp(q_a_new + f_a - node.flow)
                + plogp(q_b_new + f_b + node.flow)
                - plogp(q_a + f_a)
                - plogp(q_b + f_b);

            if delta < best_delta - MIN_MOVE_GAIN {
                best_delta = delta;
                best = Some((b, q_a_new, q_b_new));
            }
        }

        if let Some((b, q_a_new, q_b_new)) = best {
            let b_us = b as usize;
            if state.member_count[b_us] == 0 {
                if state.empties.last() == Some(&b) {
                    state.empties.pop();
                }
            }

            let q_b = state.exit[b_us];
            let f_b = state.flow[b_us];
            state.sum_plogp_exit +=
                plogp(q_a_new) + plogp(q_b_new) - plogp(q_a) - plogp(q_b);
            state.sum_plogp_exit_flow += plogp(q_a_new + f_a - node.flow)
                + plogp(q_b_new + f_b + node.flow)
                - plogp(q_a + f_a)
                - plogp(q_b + f_b);
            state.exit_total += q_a_new + q_b_new - q_a - q_b;
            state.exit[a_us] = q_a_new;
            state.exit[b_us] = q_b_new;
            state.flow[a_us] -= node.flow;
            state.flow[b_us] += node.flow;
            state.remove_bg(node, a_us);
            state.add_bg(node, b_us);
            state.member_count[a_us] -= 1;
            state.member_count[b_us] += 1;
            state.assignment[v_idx] = b;
            if state.member_count[a_us] == 0 {
                state.sum_plogp_exit -= plogp(state.exit[a_us]);
                state.sum_plogp_exit_flow -= plogp(state.exit[a_us] + state.flow[a_us]);
                state.exit_total -= state.exit[a_us];
                state.zero_module(a_us);
                state.empties.push(a);
            }
            moves += 1;
            improvement -= best_delta;

            if cfg.audit_moves {
                let full = recompute_codelength(net, &state.assignment, node_term);
                let incr = state.codelength(node_term);
                assert!(
                    (full - incr).abs() < 1e-9,
                    "incremental codelength {incr} diverged from recomputation {full}"
                );
            }
        }

        for &m in &bufs.cand_modules {
            bufs.redirect[m as usize] = u32::MAX;
        }
    }

    (moves, improvement)
}

fn run_trial(leaf: &ActiveNet, node_term: f64, cfg: &SearchConfig, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = leaf.clone();
    let mut bufs = MoveBuffers {
        order: Vec::new(),
        cand_modules: Vec::new(),
        cand_arcflow: Vec::new(),
        redirect: Vec::new(),
    };

    for _level in 0..cfg.max_outer_loops {
        if net.nodes.len() <= 1 {
            break;
        }
        let mut state = LevelState::singletons(&net);
        let mut any_move = false;
        for _ in 0..MAX_SWEEPS_PER_LEVEL {
            let (moves, improvement) = sweep(&net, &mut state, &mut bufs, &mut rng, cfg, node_term);
            if moves > 0 {
                any_move = true;
            }
            if moves == 0 || improvement < cfg.improvement_threshold {
                break;
            }
        }
        if !any_move {
            break;
        }
        let next = net.aggregate(&state.assignment);
        if next.nodes.len() == net.nodes.len() {
            break;
        }
        net = next;
    }

    // Read the leaf assignment off the surviving active nodes.
    let n_leaves: usize = net.nodes.iter().map(|v| v.members.len()).sum();
    let mut assignment = vec![0u32; n_leaves];
    for (m, node) in net.nodes.iter().enumerate() {
        for &leaf_idx in &node.members {
            assignment[leaf_idx as usize] = m as u32;
        }
    }
    assignment
}

/// Minimize the two-level codelength over partitions of the flow field.
/// Deterministic for a fixed (flows, seed) pair; trials run independently
/// and the lowest codelength (ties: lowest trial index) wins.
pub fn optimize(flows: &FlowField, cfg: &SearchConfig) -> Partition {
    let n = flows.n_nodes();
    if n == 0 {
        return Partition::from_assignment(&[]);
    }
    if n == 1 {
        return Partition::one_module(1);
    }
    let leaf = ActiveNet::from_flows(flows);
    let node_term: f64 = -flows.visit_rate.iter().map(|&p| plogp(p)).sum::<f64>();
    let trials = cfg.trials.max(1);

    let results: Vec<(u32, f64, Vec<u32>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let assignment = run_trial(&leaf, node_term, cfg, mix_seed(cfg.seed, t as u64));
            let part = Partition::from_assignment(&assignment);
            let l = mapeq::codelength(flows, &part).expect("assignment covers all nodes");
            (t, l, assignment)
        })
        .collect();

    let best = results
        .into_iter()
        .min_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        })
        .expect("at least one trial");
    Partition::from_assignment(&best.2)
}
