//! The Bayesian prior over transition rates.
//!
//! The prior connects every ordered node pair (i, j), i != j, with a
//! pseudo-count `gamma(i, j) = lambda(i, j) * c(i, j)`: a connectivity
//! parameter times a weight estimated from the observed strengths and
//! degrees. Everything the flow and search stages need is exposed through
//! per-node aggregates (`gamma_out_total`, `alpha`, factor sums), so no
//! dense pairwise structure is ever materialized.

use crate::error::{Error, Result};
use crate::graph::{MultiGraph, NodeType};

/// Connectivity structure of the prior network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorMode {
    /// Every pair connected with strength `ln N / N`.
    Uniform,
    /// Only cross-type pairs connected, with strength `ln(N_A+N_B)/min(N_A,N_B)`.
    Bipartite,
    /// Uniform plus a same-label bonus `ln N_m / N_m`.
    Metadata,
}

/// Smallest pairwise connectivity at which a random network on `n` nodes
/// is almost surely connected.
pub fn uniform_lambda(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!(
            "uniform connectivity needs at least 2 nodes, got {n}"
        )));
    }
    let n = n as f64;
    Ok(n.ln() / n)
}

/// Bipartite counterpart of [`uniform_lambda`] for sides of size `n_a`, `n_b`.
pub fn bipartite_lambda(n_a: usize, n_b: usize) -> Result<f64> {
    if n_a == 0 || n_b == 0 {
        return Err(Error::domain(format!(
            "bipartite connectivity needs nodes on both sides, got {n_a} and {n_b}"
        )));
    }
    Ok(((n_a + n_b) as f64).ln() / n_a.min(n_b) as f64)
}

fn label_lambda(class_size: u32) -> f64 {
    // Singleton classes contribute nothing: ln 1 / 1 = 0.
    let n = class_size.max(1) as f64;
    n.ln() / n
}

/// Strength-over-degree factors of the configuration-model weight estimate,
/// with fallbacks for nodes missing one or both degree kinds.
#[derive(Debug, Clone)]
pub struct WeightFactors {
    pub prefactor: f64,
    pub out_factor: Vec<f64>,
    pub in_factor: Vec<f64>,
}

impl WeightFactors {
    pub fn compute(g: &MultiGraph) -> WeightFactors {
        let n = g.n_nodes();
        let degree_total: f64 = (0..n).map(|i| (g.k_in()[i] + g.k_out()[i]) as f64).sum();
        let strength_total: f64 = (0..n).map(|i| g.s_in()[i] + g.s_out()[i]).sum();
        // A graph without arcs carries no weight information; fall back to
        // unit weights so the prior reduces to bare connectivity.
        let (prefactor, mean_weight) = if strength_total > 0.0 {
            (degree_total / strength_total, strength_total / degree_total)
        } else {
            (1.0, 1.0)
        };
        let fallback = |i: usize| -> f64 {
            let k = (g.k_in()[i] + g.k_out()[i]) as f64;
            if k > 0.0 {
                (g.s_in()[i] + g.s_out()[i]) / k
            } else {
                mean_weight
            }
        };
        let out_factor: Vec<f64> = (0..n)
            .map(|i| {
                if g.k_out()[i] > 0 {
                    g.s_out()[i] / g.k_out()[i] as f64
                } else {
                    fallback(i)
                }
            })
            .collect();
        let in_factor: Vec<f64> = (0..n)
            .map(|i| {
                if g.k_in()[i] > 0 {
                    g.s_in()[i] / g.k_in()[i] as f64
                } else {
                    fallback(i)
                }
            })
            .collect();
        WeightFactors {
            prefactor,
            out_factor,
            in_factor,
        }
    }
}

/// Configuration-model estimate of the weight of link (i, j). Pairwise
/// evaluation recomputes the factors, so this is for oracles and tiny
/// graphs; production paths use the factorized aggregates in [`PriorModel`].
pub fn ccm_weight(g: &MultiGraph, i: usize, j: usize) -> f64 {
    let f = WeightFactors::compute(g);
    f.prefactor * f.out_factor[i] * f.in_factor[j]
}

/// Prior connectivity and weight model, reduced to per-node aggregates.
#[derive(Debug, Clone)]
pub struct PriorModel {
    mode: PriorMode,
    lambda: f64,
    lambda_ab: f64,
    lambda_label: Vec<f64>,
    prefactor: f64,
    out_factor: Vec<f64>,
    in_factor: Vec<f64>,
    in_factor_total: f64,
    in_factor_by_label: Vec<f64>,
    in_factor_by_type: [f64; 2],
    gamma_out_total: Vec<f64>,
    alpha: Vec<f64>,
    label_of: Vec<u32>,
    type_of: Vec<NodeType>,
}

impl PriorModel {
    /// Uniform connectivity over all pairs.
    pub fn uniform(g: &MultiGraph) -> Result<PriorModel> {
        Self::new(g, PriorMode::Uniform)
    }

    /// Cross-type connectivity; requires bipartite node types on the graph.
    pub fn bipartite(g: &MultiGraph) -> Result<PriorModel> {
        Self::new(g, PriorMode::Bipartite)
    }

    /// Uniform connectivity reinforced within metadata classes; requires
    /// metadata labels on the graph.
    pub fn metadata(g: &MultiGraph) -> Result<PriorModel> {
        Self::new(g, PriorMode::Metadata)
    }

    pub fn new(g: &MultiGraph, mode: PriorMode) -> Result<PriorModel> {
        let n = g.n_nodes();
        if n == 0 {
            return Err(Error::domain("cannot build a prior for an empty graph"));
        }
        let factors = WeightFactors::compute(g);

        // ln N / N evaluates to 0 for a single node: no pairs to connect.
        let nf = n as f64;
        let lambda = nf.ln() / nf;

        let mut lambda_ab = 0.0;
        let mut lambda_label = Vec::new();
        let mut label_of = Vec::new();
        let mut type_of = Vec::new();
        match mode {
            PriorMode::Uniform => {}
            PriorMode::Bipartite => {
                let types = g.node_types().ok_or_else(|| {
                    Error::validation("bipartite prior requires node types on the graph")
                })?;
                let (n_a, n_b) = g.type_counts().unwrap();
                lambda_ab = bipartite_lambda(n_a, n_b)?;
                type_of = types.to_vec();
            }
            PriorMode::Metadata => {
                let meta = g.metadata().ok_or_else(|| {
                    Error::validation("metadata prior requires metadata labels on the graph")
                })?;
                lambda_label = meta.class_sizes().iter().map(|&s| label_lambda(s)).collect();
                label_of = meta.label_of().to_vec();
            }
        }

        let in_factor_total: f64 = factors.in_factor.iter().sum();
        let mut in_factor_by_label = vec![0.0; lambda_label.len()];
        for (i, &l) in label_of.iter().enumerate() {
            in_factor_by_label[l as usize] += factors.in_factor[i];
        }
        let mut in_factor_by_type = [0.0, 0.0];
        for (i, &t) in type_of.iter().enumerate() {
            in_factor_by_type[t.index()] += factors.in_factor[i];
        }

        let gamma_out_total: Vec<f64> = (0..n)
            .map(|i| {
                let base = factors.prefactor * factors.out_factor[i];
                match mode {
                    PriorMode::Uniform => {
                        base * lambda * (in_factor_total - factors.in_factor[i])
                    }
                    PriorMode::Bipartite => {
                        let opp = type_of[i].opposite().index();
                        base * lambda_ab * in_factor_by_type[opp]
                    }
                    PriorMode::Metadata => {
                        let l = label_of[i] as usize;
                        base * (lambda * (in_factor_total - factors.in_factor[i])
                            + lambda_label[l]
                                * (in_factor_by_label[l] - factors.in_factor[i]))
                    }
                }
            })
            .collect();

        let alpha: Vec<f64> = (0..n)
            .map(|i| {
                let s = g.s_out()[i];
                if s <= 0.0 {
                    1.0
                } else {
                    gamma_out_total[i] / (s + gamma_out_total[i])
                }
            })
            .collect();

        Ok(PriorModel {
            mode,
            lambda,
            lambda_ab,
            lambda_label,
            prefactor: factors.prefactor,
            out_factor: factors.out_factor,
            in_factor: factors.in_factor,
            in_factor_total,
            in_factor_by_label,
            in_factor_by_type,
            gamma_out_total,
            alpha,
            label_of,
            type_of,
        })
    }

    pub fn mode(&self) -> PriorMode {
        self.mode
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_ab(&self) -> f64 {
        self.lambda_ab
    }

    pub fn lambda_label(&self) -> &[f64] {
        &self.lambda_label
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn out_factor(&self) -> &[f64] {
        &self.out_factor
    }

    pub fn in_factor(&self) -> &[f64] {
        &self.in_factor
    }

    pub fn in_factor_total(&self) -> f64 {
        self.in_factor_total
    }

    pub fn in_factor_by_label(&self) -> &[f64] {
        &self.in_factor_by_label
    }

    pub fn in_factor_by_type(&self) -> [f64; 2] {
        self.in_factor_by_type
    }

    pub fn label_of(&self) -> &[u32] {
        &self.label_of
    }

    pub fn type_of(&self) -> &[NodeType] {
        &self.type_of
    }

    /// Sum of prior pseudo-counts out of node `i` (over all j != i),
    /// evaluated from aggregates.
    pub fn gamma_out_total(&self) -> &[f64] {
        &self.gamma_out_total
    }

    /// Mixing weight of the prior in node `i`'s transition row:
    /// `alpha_i = gamma_out_total_i / (s_out_i + gamma_out_total_i)`.
    /// Equals 1 exactly when the node has no observed out-strength.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Pairwise prior pseudo-count for the ordered pair (i, j). Self-pairs
    /// are excluded from the prior network.
    pub fn gamma(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::domain(
                "the prior network has no self-links; gamma(i, i) is undefined",
            ));
        }
        let c = self.prefactor * self.out_factor[i] * self.in_factor[j];
        let lambda_ij = match self.mode {
            PriorMode::Uniform => self.lambda,
            PriorMode::Bipartite => {
                if self.type_of[i] == self.type_of[j] {
                    0.0
                } else {
                    self.lambda_ab
                }
            }
            PriorMode::Metadata => {
                if self.label_of[i] == self.label_of[j] {
                    self.lambda + self.lambda_label[self.label_of[i] as usize]
                } else {
                    self.lambda
                }
            }
        };
        Ok(lambda_ij * c)
    }
}

/// Posterior-mean transition row for observed counts `weights` and prior
/// pseudo-counts `gammas`: component-wise `(w_j + g_j) / sum(w + g)`.
pub fn posterior_mean_row(weights: &[f64], gammas: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != gammas.len() {
        return Err(Error::validation(format!(
            "weights ({}) and gammas ({}) must have equal length",
            weights.len(),
            gammas.len()
        )));
    }
    if weights.is_empty() {
        return Err(Error::domain("posterior mean of an empty row is undefined"));
    }
    let mut total = 0.0;
    for (&w, &g) in weights.iter().zip(gammas) {
        if w < 0.0 || g < 0.0 {
            return Err(Error::domain(
                "weights and gammas must be non-negative",
            ));
        }
        total += w + g;
    }
    if total <= 0.0 {
        return Err(Error::domain(
            "posterior mean is undefined when all weights and gammas are zero",
        ));
    }
    Ok(weights
        .iter()
        .zip(gammas)
        .map(|(&w, &g)| (w + g) / total)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, directed: bool) -> MultiGraph {
        let mut arcs = Vec::new();
        for s in 0..n as u32 {
            for t in 0..n as u32 {
                if directed && rng.random::<f64>() < 0.2 {
                    arcs.push((s, t, rng.random_range(1..6) as f64));
                } else if !directed && s < t && rng.random::<f64>() < 0.3 {
                    arcs.push((s, t, rng.random_range(1..6) as f64));
                }
            }
        }
        if arcs.is_empty() {
            arcs.push((0, (n as u32 - 1).max(1) % n as u32, 1.0));
        }
        MultiGraph::from_arcs(n, arcs, directed).unwrap()
    }

    #[test]
    fn uniform_lambda_values() {
        let l = uniform_lambda(1000).unwrap();
        assert!((l - 1000f64.ln() / 1000.0).abs() < 1e-18);
        assert!((l - 0.00690776).abs() < 1e-8);
        let l3 = uniform_lambda(3).unwrap();
        assert!((l3 - 0.3662).abs() < 1e-4);
        assert!(uniform_lambda(10).unwrap() > uniform_lambda(100).unwrap());
        assert!(uniform_lambda(1).is_err());
        assert!(uniform_lambda(0).is_err());
    }

    #[test]
    fn bipartite_lambda_values() {
        let l = bipartite_lambda(143, 175).unwrap();
        assert!((l - 318f64.ln() / 143.0).abs() < 1e-18);
        assert!((l - 0.040294).abs() < 1e-6);
        let n = 9;
        assert!((bipartite_lambda(n, n).unwrap() - (2.0 * n as f64).ln() / n as f64).abs() < 1e-15);
        assert_eq!(
            bipartite_lambda(4, 11).unwrap(),
            bipartite_lambda(11, 4).unwrap()
        );
        assert!(bipartite_lambda(0, 5).is_err());
    }

    #[test]
    fn ccm_weight_constant_weight_graph() {
        // All link weights equal w: c reduces to w for every pair.
        let w = 3.5;
        let g = MultiGraph::from_arcs(4, vec![(0, 1, w), (1, 2, w), (2, 3, w), (3, 0, w)], true)
            .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((ccm_weight(&g, i, j) - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ccm_weight_unweighted_is_one() {
        let g = MultiGraph::from_arcs(5, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (3, 4, 1.0)], true)
            .unwrap();
        assert!((ccm_weight(&g, 0, 1) - 1.0).abs() < 1e-15);
        assert!((ccm_weight(&g, 3, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ccm_weight_two_node_example() {
        let g = MultiGraph::from_arcs(2, vec![(0, 1, 4.0)], true).unwrap();
        let f = WeightFactors::compute(&g);
        assert_eq!(f.out_factor[0], 4.0);
        assert_eq!(f.in_factor[1], 4.0);
        assert_eq!(f.prefactor, 0.25);
        assert!((ccm_weight(&g, 0, 1) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_matches_modes() {
        // Metadata mode with same/different labels, using c = 1 (unweighted).
        let arcs = vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)];
        let g = MultiGraph::from_arcs(4, arcs, true).unwrap();
        let labeled = g.with_metadata_labels(&[0, 0, 1, 1]).unwrap();
        let meta = PriorModel::metadata(&labeled).unwrap();
        let lam = 4f64.ln() / 4.0;
        let lam_m = 2f64.ln() / 2.0;
        assert!((meta.gamma(0, 1).unwrap() - (lam + lam_m)).abs() < 1e-15);
        assert!((meta.gamma(0, 2).unwrap() - lam).abs() < 1e-15);

        // Bipartite same-type pairs have zero prior weight.
        let path = MultiGraph::from_arcs(4, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], false)
            .unwrap()
            .with_node_types(vec![NodeType::A, NodeType::B, NodeType::A, NodeType::B])
            .unwrap();
        let bi = PriorModel::bipartite(&path).unwrap();
        assert_eq!(bi.gamma(0, 2).unwrap(), 0.0);
        assert!(bi.gamma(0, 1).unwrap() > 0.0);

        assert!(meta.gamma(1, 1).is_err());
    }

    #[test]
    fn metadata_lambda_sum_example() {
        // ln(1000)/1000 + ln(7)/7 with c = 1.
        let lam = uniform_lambda(1000).unwrap();
        let lam_m = 7f64.ln() / 7.0;
        assert!((lam + lam_m - 0.284895).abs() < 1e-6);
    }

    #[test]
    fn alpha_limits() {
        // Dangling node: pure prior.
        let g = MultiGraph::from_arcs(3, vec![(0, 1, 2.0), (1, 2, 1.0)], true).unwrap();
        let p = PriorModel::uniform(&g).unwrap();
        assert_eq!(p.alpha()[2], 1.0);
        // alpha = gamma_total / (s_out + gamma_total) elsewhere.
        for i in 0..2 {
            let expect = p.gamma_out_total()[i] / (g.s_out()[i] + p.gamma_out_total()[i]);
            assert!((p.alpha()[i] - expect).abs() < 1e-15);
            assert!(p.alpha()[i] > 0.0 && p.alpha()[i] < 1.0);
        }
    }

    #[test]
    fn gamma_out_total_matches_pairwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 9, 25, 50] {
            for directed in [true, false] {
                let g = random_graph(&mut rng, n, directed);

                let check = |p: &PriorModel| {
                    for i in 0..n {
                        let brute: f64 =
                            (0..n).filter(|&j| j != i).map(|j| p.gamma(i, j).unwrap()).sum();
                        let agg = p.gamma_out_total()[i];
                        let denom = brute.abs().max(1e-300);
                        assert!(
                            ((agg - brute) / denom).abs() < 1e-12,
                            "n={n} i={i}: {agg} vs {brute}"
                        );
                    }
                };

                check(&PriorModel::uniform(&g).unwrap());

                let labels: Vec<u32> = (0..n as u32).map(|i| i % 3).collect();
                let lg = g.with_metadata_labels(&labels).unwrap();
                check(&PriorModel::metadata(&lg).unwrap());

                // Bipartite needs a valid 2-coloring; rebuild arcs across types.
                let types: Vec<NodeType> = (0..n)
                    .map(|i| if i % 2 == 0 { NodeType::A } else { NodeType::B })
                    .collect();
                let cross: Vec<(u32, u32, f64)> = g
                    .arcs()
                    .iter()
                    .filter(|a| types[a.source as usize] != types[a.target as usize])
                    .map(|a| (a.source, a.target, a.weight))
                    .collect();
                if !cross.is_empty() {
                    let bg = MultiGraph::from_arcs(n, cross, true)
                        .unwrap()
                        .with_node_types(types)
                        .unwrap();
                    check(&PriorModel::bipartite(&bg).unwrap());
                }
            }
        }
    }

    #[test]
    fn unweighted_uniform_gamma_is_lambda() {
        // All weights 1: gamma(i, j) = ln N / N exactly, for every pair.
        let g = MultiGraph::from_arcs(
            6,
            vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (5, 0, 1.0)],
            false,
        )
        .unwrap();
        let p = PriorModel::uniform(&g).unwrap();
        let lambda = uniform_lambda(6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert_eq!(p.gamma(i, j).unwrap(), lambda);
                }
            }
        }
    }

    #[test]
    fn metadata_all_distinct_reduces_to_uniform() {
        let g = MultiGraph::from_arcs(5, vec![(0, 1, 2.0), (1, 2, 3.0), (2, 3, 1.0), (3, 4, 2.0)], true)
            .unwrap();
        let labels: Vec<u32> = (0..5).collect();
        let lg = g.with_metadata_labels(&labels).unwrap();
        let meta = PriorModel::metadata(&lg).unwrap();
        let uni = PriorModel::uniform(&g).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert!((meta.gamma(i, j).unwrap() - uni.gamma(i, j).unwrap()).abs() < 1e-15);
                }
            }
            assert!((meta.gamma_out_total()[i] - uni.gamma_out_total()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn metadata_single_shared_label_doubles_lambda() {
        let g = MultiGraph::from_arcs(4, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], true).unwrap();
        let lg = g.with_metadata_labels(&[7, 7, 7, 7]).unwrap();
        let meta = PriorModel::metadata(&lg).unwrap();
        let lam = uniform_lambda(4).unwrap();
        // N_m = N, so the bonus equals the base connectivity.
        let c = ccm_weight(&g, 0, 1);
        assert!((meta.gamma(0, 1).unwrap() - 2.0 * lam * c).abs() < 1e-15);
    }

    #[test]
    fn posterior_mean_examples() {
        let row = posterior_mean_row(&[2.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((row[0] - 5.0 / 6.0).abs() < 1e-15);
        assert!((row[1] - 1.0 / 6.0).abs() < 1e-15);

        let row = posterior_mean_row(&[0.0, 0.0, 0.0], &[0.2, 0.2, 0.2]).unwrap();
        for v in &row {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        // gamma -> 0 recovers the maximum likelihood estimator.
        let row = posterior_mean_row(&[3.0, 1.0], &[1e-300, 1e-300]).unwrap();
        assert!((row[0] - 0.75).abs() < 1e-12);
        assert!((row[1] - 0.25).abs() < 1e-12);

        assert!(posterior_mean_row(&[0.0], &[0.0]).is_err());
        assert!(posterior_mean_row(&[1.0, 2.0], &[0.1]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn posterior_mean_is_a_distribution(
            pairs in proptest::collection::vec((0.0f64..10.0, 0.01f64..5.0), 1..8)
        ) {
            let w: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let g: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let row = posterior_mean_row(&w, &g).unwrap();
            let total: f64 = row.iter().sum();
            proptest::prop_assert!((total - 1.0).abs() < 1e-12);
            for v in row {
                proptest::prop_assert!(v > 0.0);
            }
        }
    }
}
