//! Weighted undirected graphs with per-node maximum values.
//!
//! Nodes are dense indices `0..N`. Each adjacency list is sorted by
//! neighbor index so that "lowest index wins" tie-breaking in the engine
//! and the oracle is deterministic.
//!
//! # Text format
//!
//! ```text
//! N M
//! i j w        (M lines, one per undirected edge, i < j)
//! i s          (N lines, s is a number or the literal `inf`)
//! ```
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), which makes
//! finite values round-trip bit-exactly. Blank lines and lines starting with
//! `#` are ignored by the reader.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fresh placements tried by [`generate_geometric`] before giving up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100;

/// Maximum value `s_i` of a node. `Infinite` is never produced by
/// arithmetic; it is only ever assigned explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxValue {
    Finite(f64),
    Infinite,
}

impl MaxValue {
    pub fn is_finite(self) -> bool {
        matches!(self, MaxValue::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            MaxValue::Finite(v) => Some(v),
            MaxValue::Infinite => None,
        }
    }

    /// `min(value, s)`.
    #[inline]
    pub fn clip(self, value: f64) -> f64 {
        match self {
            MaxValue::Finite(s) if s < value => s,
            _ => value,
        }
    }

    /// True iff `value == s` for a finite `s`.
    #[inline]
    pub fn is_attained_by(self, value: f64) -> bool {
        matches!(self, MaxValue::Finite(s) if s == value)
    }

    /// Represents the value as a double, using `+inf` for `Infinite`. Only
    /// meant for oracle bookkeeping and display.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for MaxValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxValue::Finite(v) => write!(f, "{v:.16e}"),
            MaxValue::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for MaxValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "Inf" | "INF" | "+inf" => Ok(MaxValue::Infinite),
            other => {
                let v: f64 = other.parse().map_err(|_| format!("bad maximum value `{other}`"))?;
                if v.is_finite() {
                    Ok(MaxValue::Finite(v))
                } else {
                    Err(format!("maximum value `{other}` must be finite or the literal `inf`"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Directed half of an edge as seen from its owner node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<Edge>>,
    max_values: Vec<MaxValue>,
    positions: Option<Vec<Point>>,
    e_min: f64,
}

/// One violated structural assumption, as reported by [`Graph::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    Disconnected { components: usize },
    SelfLoop { node: usize },
    AsymmetricWeight { from: usize, to: usize },
    NonPositiveWeight { from: usize, to: usize, weight: f64 },
    NegativeMaxValue { node: usize },
    NoFiniteMaxValue,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => f.write_str("graph has no nodes"),
            Violation::Disconnected { components } => {
                write!(f, "disconnected ({components} components)")
            }
            Violation::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Violation::AsymmetricWeight { from, to } => {
                write!(f, "asymmetric weight between {from} and {to}")
            }
            Violation::NonPositiveWeight { from, to, weight } => {
                write!(f, "nonpositive weight {weight} on edge {from}-{to}")
            }
            Violation::NegativeMaxValue { node } => write!(f, "negative maximum value at node {node}"),
            Violation::NoFiniteMaxValue => f.write_str("S* empty: no node has a finite maximum value"),
        }
    }
}

impl Graph {
    /// Builds a graph from an undirected edge list.
    ///
    /// Only structural errors (index out of range, duplicate edge, self-loop,
    /// non-finite weight) are rejected here; the modelling assumptions
    /// (connectivity, positive weights, nonempty S*) are reported by
    /// [`Graph::validate`].
    pub fn new(node_count: usize, edges: &[(usize, usize, f64)], max_values: Vec<MaxValue>) -> Result<Self> {
        if max_values.len() != node_count {
            return Err(Error::LengthMismatch { expected: node_count, actual: max_values.len() });
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(i, j, w) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidGraph(format!("edge {i}-{j} out of range for {node_count} nodes")));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            if !w.is_finite() {
                return Err(Error::InvalidGraph(format!("edge {i}-{j} has non-finite weight {w}")));
            }
            adjacency[i].push(Edge { to: j, weight: w });
            adjacency[j].push(Edge { to: i, weight: w });
        }
        for (i, list) in adjacency.iter_mut().enumerate() {
            list.sort_by_key(|e| e.to);
            if list.windows(2).any(|p| p[0].to == p[1].to) {
                return Err(Error::InvalidGraph(format!("duplicate edge at node {i}")));
            }
        }
        Ok(Self::from_parts(adjacency, max_values, None))
    }

    /// Builds a graph from per-node neighbor lists without any checks.
    /// Useful for representing (and then validating) malformed input such as
    /// asymmetric weights.
    pub fn from_adjacency(adjacency: Vec<Vec<(usize, f64)>>, max_values: Vec<MaxValue>) -> Self {
        let adjacency = adjacency
            .into_iter()
            .map(|list| {
                let mut list: Vec<Edge> = list.into_iter().map(|(to, weight)| Edge { to, weight }).collect();
                list.sort_by_key(|e| e.to);
                list
            })
            .collect();
        Self::from_parts(adjacency, max_values, None)
    }

    /// Unit-disk graph over `points`: an edge between every pair at distance
    /// `<= radius`, weighted by Euclidean distance.
    pub fn from_positions(points: Vec<Point>, radius: f64, max_values: Vec<MaxValue>) -> Result<Self> {
        let n = points.len();
        if max_values.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: max_values.len() });
        }
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = points[i].distance(&points[j]);
                if d <= radius {
                    adjacency[i].push(Edge { to: j, weight: d });
                    adjacency[j].push(Edge { to: i, weight: d });
                }
            }
        }
        // j is visited in increasing order for both endpoints, so each list is
        // already sorted.
        Ok(Self::from_parts(adjacency, max_values, Some(points)))
    }

    fn from_parts(adjacency: Vec<Vec<Edge>>, max_values: Vec<MaxValue>, positions: Option<Vec<Point>>) -> Self {
        let e_min = adjacency
            .iter()
            .flatten()
            .map(|e| e.weight)
            .fold(f64::INFINITY, f64::min);
        Self { adjacency, max_values, positions, e_min }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[Edge] {
        &self.adjacency[i]
    }

    #[inline]
    pub fn max_value(&self, i: usize) -> MaxValue {
        self.max_values[i]
    }

    pub fn max_values(&self) -> &[MaxValue] {
        &self.max_values
    }

    pub fn positions(&self) -> Option<&[Point]> {
        self.positions.as_deref()
    }

    /// Weight of edge `i`-`k`, if present.
    pub fn weight(&self, i: usize, k: usize) -> Option<f64> {
        self.adjacency[i]
            .binary_search_by_key(&k, |e| e.to)
            .ok()
            .map(|idx| self.adjacency[i][idx].weight)
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |e| e.to > i).map(move |e| (i, e.to, e.weight)))
    }

    /// Smallest edge weight; `+inf` for an edgeless graph.
    pub fn e_min(&self) -> f64 {
        self.e_min
    }

    /// Nodes with a finite maximum value (the set S*).
    pub fn finite_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.max_values[i].is_finite()).collect()
    }

    /// Smallest finite maximum value, if any.
    pub fn s_min(&self) -> Option<f64> {
        self.max_values.iter().filter_map(|s| s.finite()).reduce(f64::min)
    }

    /// Nodes attaining [`Graph::s_min`].
    pub fn s_min_set(&self) -> Vec<usize> {
        match self.s_min() {
            Some(m) => (0..self.node_count()).filter(|&i| self.max_values[i].finite() == Some(m)).collect(),
            None => Vec::new(),
        }
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                for e in &self.adjacency[i] {
                    if e.to < n && !seen[e.to] {
                        seen[e.to] = true;
                        queue.push_back(e.to);
                    }
                }
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// Checks the structural assumptions. An empty report means the graph
    /// is connected, weights are symmetric and positive, every `s_i >= 0`
    /// and at least one `s_i` is finite.
    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        let n = self.node_count();
        if n == 0 {
            report.push(Violation::Empty);
            return report;
        }
        let components = self.component_count();
        if components > 1 {
            report.push(Violation::Disconnected { components });
        }
        for (i, list) in self.adjacency.iter().enumerate() {
            for e in list {
                if e.to == i {
                    report.push(Violation::SelfLoop { node: i });
                    continue;
                }
                if !(e.weight > 0.0) {
                    report.push(Violation::NonPositiveWeight { from: i, to: e.to, weight: e.weight });
                }
                if e.to < n && i < e.to && self.weight(e.to, i) != Some(e.weight) {
                    report.push(Violation::AsymmetricWeight { from: i, to: e.to });
                }
                if e.to < n && i > e.to && self.weight(e.to, i).is_none() {
                    report.push(Violation::AsymmetricWeight { from: i, to: e.to });
                }
            }
        }
        for (i, s) in self.max_values.iter().enumerate() {
            if let MaxValue::Finite(v) = s {
                if *v < 0.0 {
                    report.push(Violation::NegativeMaxValue { node: i });
                }
            }
        }
        if !self.max_values.iter().any(|s| s.is_finite()) {
            report.push(Violation::NoFiniteMaxValue);
        }
        report
    }

    /// Fails with the first violation, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        match self.validate().first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidGraph(v.to_string())),
        }
    }

    /// Same topology and maximum values with every weight reduced by `eps`.
    pub fn shrunken(&self, eps: f64) -> Result<Graph> {
        if !(eps >= 0.0) || eps >= self.e_min {
            return Err(Error::PerturbationTooLarge { eps, e_min: self.e_min });
        }
        let adjacency = self
            .adjacency
            .iter()
            .map(|list| list.iter().map(|e| Edge { to: e.to, weight: e.weight - eps }).collect())
            .collect();
        Ok(Self::from_parts(adjacency, self.max_values.clone(), self.positions.clone()))
    }

    /// Returns a copy with different maximum values.
    pub fn with_max_values(&self, max_values: Vec<MaxValue>) -> Result<Graph> {
        if max_values.len() != self.node_count() {
            return Err(Error::LengthMismatch { expected: self.node_count(), actual: max_values.len() });
        }
        Ok(Self { max_values, ..self.clone() })
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.node_count(), self.edge_count());
        for (i, j, w) in self.edges() {
            let _ = writeln!(out, "{i} {j} {w:.16e}");
        }
        for (i, s) in self.max_values.iter().enumerate() {
            let _ = writeln!(out, "{i} {s}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Graph> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, message: "missing header".into() })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(Error::Parse { line: hline, message: "header must be `N M`".into() });
        }
        let n: usize = parse_field(head[0], hline, "node count")?;
        let m: usize = parse_field(head[1], hline, "edge count")?;

        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (line, l) = lines.next().ok_or(Error::Parse { line: hline, message: "missing edge lines".into() })?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse { line, message: "edge line must be `i j w`".into() });
            }
            edges.push((
                parse_field::<usize>(f[0], line, "node index")?,
                parse_field::<usize>(f[1], line, "node index")?,
                parse_field::<f64>(f[2], line, "weight")?,
            ));
        }
        let mut max_values = vec![None; n];
        for _ in 0..n {
            let (line, l) =
                lines.next().ok_or(Error::Parse { line: hline, message: "missing maximum-value lines".into() })?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 2 {
                return Err(Error::Parse { line, message: "maximum-value line must be `i s`".into() });
            }
            let i: usize = parse_field(f[0], line, "node index")?;
            if i >= n {
                return Err(Error::Parse { line, message: format!("node {i} out of range") });
            }
            if max_values[i].is_some() {
                return Err(Error::Parse { line, message: format!("node {i} listed twice") });
            }
            max_values[i] = Some(f[1].parse::<MaxValue>().map_err(|message| Error::Parse { line, message })?);
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse { line, message: "trailing content".into() });
        }
        let max_values = max_values.into_iter().map(|s| s.expect("every node assigned")).collect();
        Graph::new(n, &edges, max_values)
    }
}

fn parse_field<T: FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, message: format!("bad {what} `{s}`") })
}

/// Random geometric deployment in a `width × height` rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricConfig {
    pub width: f64,
    pub height: f64,
    pub radius: f64,
    pub node_count: usize,
    pub seed: u64,
}

impl GeometricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) || !(self.height > 0.0 && self.height.is_finite()) {
            return Err(Error::InvalidArgument("width and height must be positive".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidArgument("radius must be positive".into()));
        }
        if self.node_count < 2 {
            return Err(Error::InvalidArgument("node_count must be at least 2".into()));
        }
        Ok(())
    }

    /// Length of the rectangle diagonal, the largest possible distance.
    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }
}

/// Places `config.node_count` nodes uniformly at random and connects every
/// pair within `config.radius`. `sources` assigns finite maximum values;
/// every other node gets `∞`.
///
/// Placements are drawn from one ChaCha8 stream seeded by `config.seed`.
/// A disconnected placement is discarded and the next placement is drawn
/// from the same stream, up to [`MAX_PLACEMENT_ATTEMPTS`] times.
pub fn generate_geometric(config: &GeometricConfig, sources: &[(usize, f64)]) -> Result<Graph> {
    generate_geometric_with_fixed(config, &[], sources)
}

/// Like [`generate_geometric`] but the first `fixed.len()` nodes sit at the
/// given positions; the remaining nodes are random.
pub fn generate_geometric_with_fixed(config: &GeometricConfig, fixed: &[Point], sources: &[(usize, f64)]) -> Result<Graph> {
    config.validate()?;
    if fixed.len() > config.node_count {
        return Err(Error::InvalidArgument("more fixed positions than nodes".into()));
    }
    let mut max_values = vec![MaxValue::Infinite; config.node_count];
    for &(i, s) in sources {
        if i >= config.node_count || !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("bad source ({i}, {s})")));
        }
        max_values[i] = MaxValue::Finite(s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut points = fixed.to_vec();
        while points.len() < config.node_count {
            let x = rng.random::<f64>() * config.width;
            let y = rng.random::<f64>() * config.height;
            points.push(Point::new(x, y));
        }
        let graph = Graph::from_positions(points, config.radius, max_values.clone())?;
        if graph.is_connected() {
            return Ok(graph);
        }
    }
    Err(Error::NoConnectedPlacement { attempts: MAX_PLACEMENT_ATTEMPTS })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::new(
            3,
            &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)],
            vec![MaxValue::Finite(0.0), MaxValue::Infinite, MaxValue::Infinite],
        )
        .unwrap()
    }

    #[test]
    fn two_forced_nodes_get_one_edge() {
        let cfg = GeometricConfig { width: 1.0, height: 1.0, radius: 0.25, node_count: 2, seed: 1 };
        let g = generate_geometric_with_fixed(&cfg, &[Point::new(0.2, 0.5), Point::new(0.3, 0.5)], &[(0, 0.0)])
            .unwrap();
        assert_eq!(g.edge_count(), 1);
        let w = g.weight(0, 1).unwrap();
        assert!((w - 0.1).abs() < 1e-15);
        assert_eq!(g.weight(1, 0), Some(w));
    }

    #[test]
    fn same_seed_same_graph() {
        let cfg = GeometricConfig { width: 2.0, height: 0.5, radius: 0.25, node_count: 80, seed: 42 };
        let a = generate_geometric(&cfg, &[(0, 0.0)]).unwrap();
        let b = generate_geometric(&cfg, &[(0, 0.0)]).unwrap();
        assert_eq!(a, b);
        assert!(a.validate().is_empty());
        let c = generate_geometric(&GeometricConfig { seed: 43, ..cfg }, &[(0, 0.0)]).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn hopeless_density_fails_deterministically() {
        let cfg = GeometricConfig { width: 100.0, height: 100.0, radius: 0.01, node_count: 20, seed: 3 };
        assert!(matches!(
            generate_geometric(&cfg, &[(0, 0.0)]),
            Err(Error::NoConnectedPlacement { attempts: MAX_PLACEMENT_ATTEMPTS })
        ));
    }

    #[test]
    fn shrunken_subtracts_uniformly() {
        let g = triangle();
        assert_eq!(g.shrunken(0.0).unwrap(), g);
        let s = g.shrunken(0.5).unwrap();
        let ws: Vec<f64> = s.edges().map(|(_, _, w)| w).collect();
        assert_eq!(ws, vec![0.5, 2.5, 1.5]);
        assert_eq!(s.e_min(), 0.5);
        assert!(matches!(g.shrunken(1.0), Err(Error::PerturbationTooLarge { .. })));
        assert!(g.shrunken(-0.1).is_err());
    }

    #[test]
    fn validate_reports() {
        assert!(triangle().validate().is_empty());

        let two_edges = Graph::new(4, &[(0, 1, 1.0), (2, 3, 1.0)], vec![MaxValue::Finite(0.0); 4]).unwrap();
        assert_eq!(two_edges.validate(), vec![Violation::Disconnected { components: 2 }]);

        let no_source = Graph::new(2, &[(0, 1, 1.0)], vec![MaxValue::Infinite; 2]).unwrap();
        assert_eq!(no_source.validate(), vec![Violation::NoFiniteMaxValue]);

        let asym = Graph::from_adjacency(vec![vec![(1, 1.0)], vec![(0, 2.0)]], vec![MaxValue::Finite(0.0); 2]);
        assert_eq!(asym.validate(), vec![Violation::AsymmetricWeight { from: 0, to: 1 }]);

        let nonpos = Graph::new(2, &[(0, 1, 0.0)], vec![MaxValue::Finite(0.0); 2]).unwrap();
        assert_eq!(nonpos.validate().len(), 2);
    }

    #[test]
    fn text_roundtrip_and_errors() {
        let g = Graph::new(
            3,
            &[(0, 1, 0.1), (1, 2, 1.0 / 3.0)],
            vec![MaxValue::Finite(0.7), MaxValue::Infinite, MaxValue::Finite(5.0)],
        )
        .unwrap();
        let text = g.to_text();
        assert!(text.starts_with("3 2\n"));
        assert!(text.contains("1 inf"));
        assert_eq!(Graph::from_text(&text).unwrap(), g);

        let err = Graph::from_text("2 1\n0 1 abc\n0 0\n1 inf\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(Graph::from_text("2 1\n0 1 1.0\n0 0\n").is_err());
    }

    #[test]
    fn s_min_and_set() {
        let g = Graph::new(
            3,
            &[(0, 1, 1.0), (1, 2, 1.0)],
            vec![MaxValue::Finite(2.0), MaxValue::Finite(1.0), MaxValue::Finite(1.0)],
        )
        .unwrap();
        assert_eq!(g.s_min(), Some(1.0));
        assert_eq!(g.s_min_set(), vec![1, 2]);
    }
}
