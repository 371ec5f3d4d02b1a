//! Directed weighted multigraph storage and ingestion.
//!
//! Graphs are immutable after construction. Undirected input is stored as
//! two opposing arcs of equal weight (self-loops get their weight doubled,
//! so strength counts each undirected endpoint once), which lets the rest
//! of the pipeline treat every network as directed flow. Parallel input
//! edges are summed into a single arc weight, i.e. integer weights count
//! multiedges.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Side of a bipartite network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeType {
    A,
    B,
}

impl NodeType {
    pub fn opposite(self) -> NodeType {
        match self {
            NodeType::A => NodeType::B,
            NodeType::B => NodeType::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            NodeType::A => 0,
            NodeType::B => 1,
        }
    }
}

/// A weighted arc between dense node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub source: u32,
    pub target: u32,
    pub weight: f64,
}

/// Discrete per-node labels with dense label ids and class sizes.
#[derive(Debug, Clone)]
pub struct Metadata {
    label_of: Vec<u32>,
    label_names: Vec<String>,
    class_sizes: Vec<u32>,
}

impl Metadata {
    fn from_dense(label_of: Vec<u32>, label_names: Vec<String>) -> Metadata {
        let mut class_sizes = vec![0u32; label_names.len()];
        for &l in &label_of {
            class_sizes[l as usize] += 1;
        }
        Metadata {
            label_of,
            label_names,
            class_sizes,
        }
    }

    pub fn label_of(&self) -> &[u32] {
        &self.label_of
    }

    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn class_size(&self, label: u32) -> u32 {
        self.class_sizes[label as usize]
    }

    pub fn class_sizes(&self) -> &[u32] {
        &self.class_sizes
    }

    pub fn label_name(&self, label: u32) -> &str {
        &self.label_names[label as usize]
    }
}

/// Immutable weighted directed multigraph with optional bipartite node
/// types and metadata labels.
#[derive(Debug, Clone)]
pub struct MultiGraph {
    n_nodes: usize,
    arcs: Vec<Arc>,
    directed: bool,
    node_ids: Vec<String>,
    node_types: Option<Vec<NodeType>>,
    metadata: Option<Metadata>,
    k_in: Vec<u32>,
    k_out: Vec<u32>,
    s_in: Vec<f64>,
    s_out: Vec<f64>,
}

fn aggregate_arcs(raw: Vec<(u32, u32, f64)>) -> Vec<Arc> {
    let mut sums: HashMap<(u32, u32), f64> = HashMap::with_capacity(raw.len());
    for (s, t, w) in raw {
        *sums.entry((s, t)).or_insert(0.0) += w;
    }
    let mut arcs: Vec<Arc> = sums
        .into_iter()
        .filter(|&(_, w)| w > 0.0)
        .map(|((source, target), weight)| Arc {
            source,
            target,
            weight,
        })
        .collect();
    arcs.sort_unstable_by_key(|a| (a.source, a.target));
    arcs
}

impl MultiGraph {
    /// Build a graph from user-facing arcs. For `directed = false` each
    /// pair (i, j) is mirrored and self-loops contribute twice to strength.
    pub fn from_arcs(
        n_nodes: usize,
        arcs: impl IntoIterator<Item = (u32, u32, f64)>,
        directed: bool,
    ) -> Result<MultiGraph> {
        let node_ids = (0..n_nodes).map(|i| i.to_string()).collect();
        Self::build(n_nodes, arcs, directed, node_ids, None, None)
    }

    fn build(
        n_nodes: usize,
        arcs: impl IntoIterator<Item = (u32, u32, f64)>,
        directed: bool,
        node_ids: Vec<String>,
        node_types: Option<Vec<NodeType>>,
        metadata: Option<Metadata>,
    ) -> Result<MultiGraph> {
        let mut raw = Vec::new();
        for (s, t, w) in arcs {
            if s as usize >= n_nodes || t as usize >= n_nodes {
                return Err(Error::validation(format!(
                    "arc ({s}, {t}) references a node outside 0..{n_nodes}"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::validation(format!(
                    "arc ({s}, {t}) has invalid weight {w}; weights must be finite and >= 0"
                )));
            }
            if w == 0.0 {
                continue;
            }
            if directed {
                raw.push((s, t, w));
            } else if s == t {
                // An undirected self-loop touches the node with both ends.
                raw.push((s, s, 2.0 * w));
            } else {
                raw.push((s, t, w));
                raw.push((t, s, w));
            }
        }
        Ok(Self::from_stored(
            n_nodes,
            aggregate_arcs(raw),
            directed,
            node_ids,
            node_types,
            metadata,
        ))
    }

    /// Rebuild from arcs already in stored (mirrored) form. Used by the
    /// samplers, which manipulate stored arcs directly.
    pub(crate) fn from_stored(
        n_nodes: usize,
        arcs: Vec<Arc>,
        directed: bool,
        node_ids: Vec<String>,
        node_types: Option<Vec<NodeType>>,
        metadata: Option<Metadata>,
    ) -> MultiGraph {
        let mut k_in = vec![0u32; n_nodes];
        let mut k_out = vec![0u32; n_nodes];
        let mut s_in = vec![0.0; n_nodes];
        let mut s_out = vec![0.0; n_nodes];
        for a in &arcs {
            k_out[a.source as usize] += 1;
            k_in[a.target as usize] += 1;
            s_out[a.source as usize] += a.weight;
            s_in[a.target as usize] += a.weight;
        }
        MultiGraph {
            n_nodes,
            arcs,
            directed,
            node_ids,
            node_types,
            metadata,
            k_in,
            k_out,
            s_in,
            s_out,
        }
    }

    /// Parse a whitespace-separated edge list: `src dst [weight]` per line,
    /// `#` starts a comment, weight defaults to 1. Duplicate lines are
    /// summed. Node ids are remapped to dense indices in first-appearance
    /// order; the original ids are retained.
    pub fn load_edge_list(reader: impl BufRead, directed: bool) -> Result<MultiGraph> {
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut node_ids: Vec<String> = Vec::new();
        let mut raw: Vec<(u32, u32, f64)> = Vec::new();

        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => &line[..],
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let lineno = lineno + 1;
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 'src dst [weight]', found {} fields", fields.len()),
                });
            }
            let weight = if fields.len() == 3 {
                fields[2].parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("cannot parse weight '{}'", fields[2]),
                })?
            } else {
                1.0
            };
            if !weight.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("weight '{}' is not finite", fields[2]),
                });
            }
            if weight < 0.0 {
                return Err(Error::validation(format!(
                    "line {lineno}: negative weight {weight}"
                )));
            }
            let mut id_of = |token: &str| -> u32 {
                if let Some(&i) = index.get(token) {
                    i
                } else {
                    let i = node_ids.len() as u32;
                    index.insert(token.to_string(), i);
                    node_ids.push(token.to_string());
                    i
                }
            };
            let s = id_of(fields[0]);
            let t = id_of(fields[1]);
            raw.push((s, t, weight));
        }
        let n = node_ids.len();
        Self::build(n, raw, directed, node_ids, None, None)
    }

    pub fn from_edge_list_str(text: &str, directed: bool) -> Result<MultiGraph> {
        Self::load_edge_list(text.as_bytes(), directed)
    }

    /// Parse the Pajek subset: `*Vertices n` with optional quoted labels,
    /// then `*Edges` (undirected) and/or `*Arcs` (directed) sections with
    /// 1-based endpoints. A file containing any `*Arcs` section is directed
    /// and its `*Edges` lines are mirrored.
    pub fn load_pajek(reader: impl BufRead) -> Result<MultiGraph> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Vertices,
            Edges,
            Arcs,
        }
        let mut section = Section::None;
        let mut n_declared: Option<usize> = None;
        let mut labels: HashMap<usize, String> = HashMap::new();
        let mut edges: Vec<(u32, u32, f64)> = Vec::new();
        let mut arcs: Vec<(u32, u32, f64)> = Vec::new();

        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            if trimmed.starts_with('*') {
                let lower = trimmed.to_ascii_lowercase();
                if lower.starts_with("*vertices") {
                    let count = lower
                        .split_whitespace()
                        .nth(1)
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or(Error::Parse {
                            line: lineno,
                            msg: "*Vertices requires a node count".into(),
                        })?;
                    n_declared = Some(count);
                    section = Section::Vertices;
                } else if lower.starts_with("*edges") {
                    section = Section::Edges;
                } else if lower.starts_with("*arcs") {
                    section = Section::Arcs;
                } else {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("unsupported Pajek section '{trimmed}'"),
                    });
                }
                continue;
            }
            match section {
                Section::None => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "content before any *Vertices/*Edges/*Arcs section".into(),
                    })
                }
                Section::Vertices => {
                    let mut parts = trimmed.splitn(2, char::is_whitespace);
                    let idx = parts
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or(Error::Parse {
                            line: lineno,
                            msg: "vertex line must start with a 1-based index".into(),
                        })?;
                    if let Some(rest) = parts.next() {
                        let rest = rest.trim();
                        let label = if rest.starts_with('"') {
                            rest[1..].split('"').next().unwrap_or("").to_string()
                        } else {
                            rest.split_whitespace().next().unwrap_or("").to_string()
                        };
                        if !label.is_empty() {
                            labels.insert(idx, label);
                        }
                    }
                }
                Section::Edges | Section::Arcs => {
                    let fields: Vec<&str> = trimmed.split_whitespace().collect();
                    if fields.len() < 2 {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "edge line needs at least two endpoints".into(),
                        });
                    }
                    let n = n_declared.ok_or(Error::Parse {
                        line: lineno,
                        msg: "edge section before *Vertices".into(),
                    })?;
                    let parse_endpoint = |s: &str| -> Result<u32> {
                        let v = s.parse::<usize>().map_err(|_| Error::Parse {
                            line: lineno,
                            msg: format!("cannot parse endpoint '{s}'"),
                        })?;
                        if v < 1 || v > n {
                            return Err(Error::validation(format!(
                                "line {lineno}: endpoint {v} outside 1..={n}"
                            )));
                        }
                        Ok((v - 1) as u32)
                    };
                    let u = parse_endpoint(fields[0])?;
                    let v = parse_endpoint(fields[1])?;
                    let w = if fields.len() >= 3 {
                        fields[2].parse::<f64>().map_err(|_| Error::Parse {
                            line: lineno,
                            msg: format!("cannot parse weight '{}'", fields[2]),
                        })?
                    } else {
                        1.0
                    };
                    if w < 0.0 {
                        return Err(Error::validation(format!(
                            "line {lineno}: negative weight {w}"
                        )));
                    }
                    if section == Section::Edges {
                        edges.push((u, v, w));
                    } else {
                        arcs.push((u, v, w));
                    }
                }
            }
        }

        let n = n_declared.ok_or(Error::Parse {
            line: 0,
            msg: "missing *Vertices section".into(),
        })?;
        let node_ids: Vec<String> = (1..=n)
            .map(|i| labels.remove(&i).unwrap_or_else(|| i.to_string()))
            .collect();

        let directed = !arcs.is_empty();
        if directed {
            // Mixed files: mirror the undirected lines into arcs.
            for (u, v, w) in edges {
                arcs.push((u, v, w));
                if u != v {
                    arcs.push((v, u, w));
                }
            }
            Self::build(n, arcs, true, node_ids, None, None)
        } else {
            Self::build(n, edges, false, node_ids, None, None)
        }
    }

    /// Attach one metadata label per node, keyed by original node id.
    /// Label ids are densified in node-index order and class sizes recorded.
    pub fn attach_metadata(&self, labels: &HashMap<String, String>) -> Result<MultiGraph> {
        let mut missing: Vec<&str> = Vec::new();
        let mut names: Vec<String> = Vec::new();
        let mut name_index: HashMap<String, u32> = HashMap::new();
        let mut label_of = Vec::with_capacity(self.n_nodes);
        for id in &self.node_ids {
            match labels.get(id) {
                Some(name) => {
                    let l = if let Some(&l) = name_index.get(name) {
                        l
                    } else {
                        let l = names.len() as u32;
                        names.push(name.clone());
                        name_index.insert(name.clone(), l);
                        l
                    };
                    label_of.push(l);
                }
                None => missing.push(id),
            }
        }
        if !missing.is_empty() {
            let shown: Vec<&str> = missing.iter().take(20).copied().collect();
            let suffix = if missing.len() > shown.len() {
                format!(" (+{} more)", missing.len() - shown.len())
            } else {
                String::new()
            };
            return Err(Error::validation(format!(
                "metadata missing for {} node(s): {}{}",
                missing.len(),
                shown.join(", "),
                suffix
            )));
        }
        let mut g = self.clone();
        g.metadata = Some(Metadata::from_dense(label_of, names));
        Ok(g)
    }

    /// Attach dense numeric labels directly (one per node, by node index).
    pub fn with_metadata_labels(&self, labels: &[u32]) -> Result<MultiGraph> {
        if labels.len() != self.n_nodes {
            return Err(Error::validation(format!(
                "expected {} labels, got {}",
                self.n_nodes,
                labels.len()
            )));
        }
        let mut dense_of: HashMap<u32, u32> = HashMap::new();
        let mut names = Vec::new();
        let mut label_of = Vec::with_capacity(labels.len());
        for &raw in labels {
            let next = dense_of.len() as u32;
            let l = *dense_of.entry(raw).or_insert_with(|| {
                names.push(raw.to_string());
                next
            });
            label_of.push(l);
        }
        let mut g = self.clone();
        g.metadata = Some(Metadata::from_dense(label_of, names));
        Ok(g)
    }

    /// Attach bipartite node types, keyed by original node id, and check
    /// that no arc connects two same-type nodes.
    pub fn attach_bipartite_types(&self, types: &HashMap<String, NodeType>) -> Result<MultiGraph> {
        let mut missing: Vec<&str> = Vec::new();
        let mut type_of = Vec::with_capacity(self.n_nodes);
        for id in &self.node_ids {
            match types.get(id) {
                Some(&t) => type_of.push(t),
                None => missing.push(id),
            }
        }
        if !missing.is_empty() {
            let shown: Vec<&str> = missing.iter().take(20).copied().collect();
            return Err(Error::validation(format!(
                "node type missing for {} node(s): {}",
                missing.len(),
                shown.join(", ")
            )));
        }
        self.with_node_types(type_of)
    }

    /// Attach dense node types (by node index) with bipartite validation.
    pub fn with_node_types(&self, type_of: Vec<NodeType>) -> Result<MultiGraph> {
        if type_of.len() != self.n_nodes {
            return Err(Error::validation(format!(
                "expected {} node types, got {}",
                self.n_nodes,
                type_of.len()
            )));
        }
        for a in &self.arcs {
            if type_of[a.source as usize] == type_of[a.target as usize] {
                return Err(Error::validation(format!(
                    "bipartite violation: arc ({}, {}) connects two {:?}-type nodes",
                    self.node_ids[a.source as usize], self.node_ids[a.target as usize],
                    type_of[a.source as usize]
                )));
            }
        }
        let mut g = self.clone();
        g.node_types = Some(type_of);
        Ok(g)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_id(&self, i: usize) -> &str {
        &self.node_ids[i]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|x| x == id)
    }

    pub fn node_types(&self) -> Option<&[NodeType]> {
        self.node_types.as_deref()
    }

    pub fn metadata(&self) -> Option<&Metadata> {
        self.metadata.as_ref()
    }

    pub fn k_in(&self) -> &[u32] {
        &self.k_in
    }

    pub fn k_out(&self) -> &[u32] {
        &self.k_out
    }

    pub fn s_in(&self) -> &[f64] {
        &self.s_in
    }

    pub fn s_out(&self) -> &[f64] {
        &self.s_out
    }

    pub fn total_out_strength(&self) -> f64 {
        self.s_out.iter().sum()
    }

    /// Counts of type-A and type-B nodes, when types are attached.
    pub fn type_counts(&self) -> Option<(usize, usize)> {
        self.node_types.as_ref().map(|ts| {
            let a = ts.iter().filter(|t| **t == NodeType::A).count();
            (a, ts.len() - a)
        })
    }

    /// Write in the same edge-list format `load_edge_list` accepts, so that
    /// writing and reloading reproduces arcs, strengths, and degrees.
    pub fn write_edge_list(&self, out: &mut impl Write) -> Result<()> {
        if self.directed {
            for a in &self.arcs {
                writeln!(
                    out,
                    "{} {} {}",
                    self.node_ids[a.source as usize], self.node_ids[a.target as usize], a.weight
                )?;
            }
        } else {
            for a in &self.arcs {
                if a.source < a.target {
                    writeln!(
                        out,
                        "{} {} {}",
                        self.node_ids[a.source as usize],
                        self.node_ids[a.target as usize],
                        a.weight
                    )?;
                } else if a.source == a.target {
                    writeln!(
                        out,
                        "{} {} {}",
                        self.node_ids[a.source as usize],
                        self.node_ids[a.target as usize],
                        a.weight / 2.0
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("edge list is utf-8")
    }
}
