//! Independent oracles for the acceptance suite: dense transition
//! matrices, exhaustive partition enumeration, numeric integration of the
//! posterior mean, and exact expected mutual information.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use remap_core::flow::FlowField;
use remap_core::graph::{MultiGraph, NodeType};
use remap_core::mapeq::{self, Partition};
use remap_core::prior::PriorModel;

/// Dense posterior-mean transition matrix assembled pairwise from the
/// graph weights and the prior's pairwise gamma.
pub fn dense_transition_matrix(g: &MultiGraph, prior: &PriorModel) -> Vec<Vec<f64>> {
    let n = g.n_nodes();
    let mut w = vec![vec![0.0; n]; n];
    for a in g.arcs() {
        w[a.source as usize][a.target as usize] += a.weight;
    }
    let mut t = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut row: Vec<f64> = (0..n)
            .map(|j| {
                let gamma = if i == j { 0.0 } else { prior.gamma(i, j).unwrap() };
                w[i][j] + gamma
            })
            .collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        t[i] = row;
    }
    t
}

pub fn dense_step(t: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut next = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            next[j] += p[i] * t[i][j];
        }
    }
    next
}

/// Minimum codelength over every set partition of the nodes (restricted
/// growth string enumeration). Only for small n.
pub fn exhaustive_minimum_codelength(flows: &FlowField) -> f64 {
    let n = flows.n_nodes();
    assert!(n <= 10, "exhaustive enumeration is for tiny graphs");
    let mut best = f64::INFINITY;
    let mut rgs = vec![0u32; n];
    loop {
        let part = Partition::from_assignment(&rgs);
        let l = mapeq::codelength(flows, &part).unwrap();
        if l < best {
            best = l;
        }
        let mut i = n - 1;
        loop {
            if i == 0 {
                return best;
            }
            let max_allowed = rgs[..i].iter().max().unwrap() + 1;
            if rgs[i] < max_allowed {
                rgs[i] += 1;
                for v in rgs[i + 1..].iter_mut() {
                    *v = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

/// Random directed or undirected weighted graph with every node touched
/// by at least one arc path attempt; weights are small integers.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, directed: bool, density: f64) -> MultiGraph {
    let mut arcs = Vec::new();
    for s in 0..n as u32 {
        for t in 0..n as u32 {
            let take = if directed {
                s != t && rng.random::<f64>() < density
            } else {
                s < t && rng.random::<f64>() < density
            };
            if take {
                arcs.push((s, t, rng.random_range(1..6) as f64));
            }
        }
    }
    if arcs.is_empty() {
        arcs.push((0, (n as u32 - 1).max(1) % n as u32, 1.0));
    }
    MultiGraph::from_arcs(n, arcs, directed).unwrap()
}

/// Random connected undirected graph: a random spanning tree plus extras.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, extra_edges: usize) -> MultiGraph {
    let mut arcs: Vec<(u32, u32, f64)> = Vec::new();
    for v in 1..n as u32 {
        let parent = rng.random_range(0..v);
        arcs.push((parent, v, rng.random_range(1..4) as f64));
    }
    for _ in 0..extra_edges {
        let a = rng.random_range(0..n as u32);
        let b = rng.random_range(0..n as u32);
        if a != b {
            arcs.push((a.min(b), a.max(b), rng.random_range(1..4) as f64));
        }
    }
    MultiGraph::from_arcs(n, arcs, false).unwrap()
}

/// Random bipartite graph with a valid 2-typing and only cross-type arcs.
pub fn random_bipartite_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> MultiGraph {
    let types: Vec<NodeType> = (0..n)
        .map(|i| if i % 2 == 0 { NodeType::A } else { NodeType::B })
        .collect();
    let mut arcs = Vec::new();
    for s in 0..n as u32 {
        for t in 0..n as u32 {
            if types[s as usize] != types[t as usize] && rng.random::<f64>() < density {
                arcs.push((s, t, rng.random_range(1..6) as f64));
            }
        }
    }
    if arcs.is_empty() && n >= 2 {
        arcs.push((0, 1, 1.0));
    }
    MultiGraph::from_arcs(n, arcs, true)
        .unwrap()
        .with_node_types(types)
        .unwrap()
}

/// Tanh-sinh quadrature nodes and weights on (0, 1).
fn quadrature_nodes() -> Vec<(f64, f64)> {
    let h = 0.06;
    let tmax = 3.6;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut nodes = Vec::new();
    let mut tau = -tmax;
    while tau <= tmax + 1e-12 {
        let s = half_pi * tau.sinh();
        let x = 0.5 * (1.0 + s.tanh());
        let w = 0.5 * half_pi * tau.cosh() / (s.cosh() * s.cosh());
        if x > 0.0 && x < 1.0 && w.is_finite() && w > 0.0 {
            nodes.push((x, h * w));
        }
        tau += h;
    }
    nodes
}

/// Posterior mean of each component under the conjugate model: integrate
/// t_j times the posterior density (product of t_k^(w_k + g_k - 1)) over
/// the simplex, iterating one coordinate at a time with the remaining mass
/// as the integration bound. Completely independent of the closed form.
pub fn posterior_mean_by_integration(w: &[f64], g: &[f64]) -> Vec<f64> {
    let k = w.len();
    assert!((2..=4).contains(&k));
    let exponents: Vec<f64> = w.iter().zip(g).map(|(&wi, &gi)| wi + gi - 1.0).collect();
    let nodes = quadrature_nodes();

    // Accumulators: normalizer and one first-moment integral per component.
    let mut z = 0.0;
    let mut moments = vec![0.0; k];

    fn recurse(
        depth: usize,
        k: usize,
        remaining: f64,
        weight_so_far: f64,
        coords: &mut Vec<f64>,
        exponents: &[f64],
        nodes: &[(f64, f64)],
        z: &mut f64,
        moments: &mut [f64],
    ) {
        if depth == k - 1 {
            let t_last = remaining;
            if t_last <= 0.0 {
                return;
            }
            let mut density = t_last.powf(exponents[k - 1]);
            for (d, &t) in coords.iter().enumerate() {
                density *= t.powf(exponents[d]);
            }
            if !density.is_finite() {
                return;
            }
            let contrib = weight_so_far * density;
            *z += contrib;
            for d in 0..k - 1 {
                moments[d] += contrib * coords[d];
            }
            moments[k - 1] += contrib * t_last;
            return;
        }
        for &(x, w) in nodes {
            let t = remaining * x;
            coords.push(t);
            recurse(
                depth + 1,
                k,
                remaining - t,
                weight_so_far * w * remaining,
                coords,
                exponents,
                nodes,
                z,
                moments,
            );
            coords.pop();
        }
    }

    let mut coords = Vec::with_capacity(k);
    recurse(
        0,
        k,
        1.0,
        1.0,
        &mut coords,
        &exponents,
        &nodes,
        &mut z,
        &mut moments,
    );
    moments.iter().map(|&m| m / z).collect()
}

/// Expected mutual information by direct hypergeometric summation with
/// exact integer factorials (u128); valid for n <= 12.
pub fn exact_expected_mi(a_sizes: &[u64], b_sizes: &[u64], n: u64) -> f64 {
    fn fact(k: u64) -> u128 {
        (1..=k as u128).product::<u128>().max(1)
    }
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in a_sizes {
        for &bj in b_sizes {
            let lo = 1.max((ai + bj).saturating_sub(n));
            let hi = ai.min(bj);
            for nij in lo..=hi {
                let num = fact(ai) * fact(bj) * fact(n - ai) * fact(n - bj);
                let den = fact(n)
                    * fact(nij)
                    * fact(ai - nij)
                    * fact(bj - nij)
                    * fact(n + nij - ai - bj);
                let p = num as f64 / den as f64;
                let nij_f = nij as f64;
                emi += (nij_f / nf) * ((nf * nij_f) / (ai as f64 * bj as f64)).ln() * p;
            }
        }
    }
    emi
}

/// Seeded RNG shorthand.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
