//! Piecewise-linear traces on tagged boundary curves and their norms.

pub mod suites;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::fem::quadrature::EDGE_GAUSS;
use crate::fem::FEFunction;
use crate::mesh::{point_set_diameter, Mesh, Point};
use crate::par::{self, Execution};

#[derive(Debug, Error, PartialEq)]
pub enum BoundaryError {
    #[error("facet tag {0:?} is missing or empty")]
    EmptyTag(String),
    #[error("facet tag {tag:?} branches at node {node}")]
    Branching { tag: String, node: usize },
    #[error("region {0:?} is missing or empty")]
    EmptyRegion(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("trace is constant")]
    ConstantTrace,
}

/// One connected piece of a trace: nodal points and values along a
/// polyline. Closed chains do not repeat their first point.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    pub closed: bool,
}

impl Chain {
    fn num_edges(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len().saturating_sub(1)
        }
    }
}

/// One edge of a trace with its endpoint values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEdge {
    pub a: Point,
    pub b: Point,
    pub va: f64,
    pub vb: f64,
    /// Global node indices of the endpoints within the trace.
    pub nodes: [usize; 2],
}

impl TraceEdge {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

/// P1 function on an ordered set of boundary edges.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    chains: Vec<Chain>,
}

impl BoundaryTrace {
    pub fn new(chains: Vec<Chain>) -> Result<Self, BoundaryError> {
        if chains.is_empty() {
            return Err(BoundaryError::InvalidTrace("no chains".into()));
        }
        for c in &chains {
            if c.points.len() != c.values.len() {
                return Err(BoundaryError::InvalidTrace(
                    "point and value counts differ".into(),
                ));
            }
            let min_points = if c.closed { 3 } else { 2 };
            if c.points.len() < min_points {
                return Err(BoundaryError::InvalidTrace(format!(
                    "chain with {} points",
                    c.points.len()
                )));
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(BoundaryError::InvalidTrace("non-finite value".into()));
            }
        }
        let trace = BoundaryTrace { chains };
        if trace.edges().any(|e| !(e.length() > 0.0)) {
            return Err(BoundaryError::InvalidTrace("zero-length edge".into()));
        }
        Ok(trace)
    }

    /// Single-chain trace.
    pub fn polyline(points: Vec<Point>, values: Vec<f64>, closed: bool) -> Result<Self, BoundaryError> {
        Self::new(vec![Chain {
            points,
            values,
            closed,
        }])
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    /// True when every chain is a closed loop.
    pub fn is_closed(&self) -> bool {
        self.chains.iter().all(|c| c.closed)
    }

    pub fn num_edges(&self) -> usize {
        self.chains.iter().map(Chain::num_edges).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = TraceEdge> + '_ {
        let mut offset = 0;
        self.chains.iter().flat_map(move |c| {
            let base = offset;
            offset += c.points.len();
            let n = c.points.len();
            (0..c.num_edges()).map(move |i| {
                let j = (i + 1) % n;
                TraceEdge {
                    a: c.points[i],
                    b: c.points[j],
                    va: c.values[i],
                    vb: c.values[j],
                    nodes: [base + i, base + j],
                }
            })
        })
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.chains.iter().flat_map(|c| c.points.iter())
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.chains.iter().flat_map(|c| c.values.iter())
    }

    pub fn length(&self) -> f64 {
        self.edges().map(|e| e.length()).sum()
    }

    /// Largest distance between two trace nodes.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<Point> = self.points().copied().collect();
        point_set_diameter(&pts)
    }

    pub fn integral(&self) -> f64 {
        self.edges().map(|e| 0.5 * e.length() * (e.va + e.vb)).sum()
    }

    pub fn average(&self) -> f64 {
        self.integral() / self.length()
    }

    pub fn l2_norm(&self) -> f64 {
        self.edges()
            .map(|e| e.length() / 3.0 * (e.va * e.va + e.va * e.vb + e.vb * e.vb))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// ‖∇_t t‖ with the edgewise constant tangential derivative.
    pub fn tangential_gradient_l2(&self) -> f64 {
        self.edges()
            .map(|e| (e.vb - e.va).powi(2) / e.length())
            .sum::<f64>()
            .sqrt()
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let chains = self
            .chains
            .iter()
            .map(|c| Chain {
                points: c.points.clone(),
                values: c.values.iter().map(|&v| f(v)).collect(),
                closed: c.closed,
            })
            .collect();
        BoundaryTrace { chains }
    }

    /// Same values on transformed nodes. `f` must not collapse edges.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Self {
        let chains = self
            .chains
            .iter()
            .map(|c| Chain {
                points: c.points.iter().map(|&p| f(p)).collect(),
                values: c.values.clone(),
                closed: c.closed,
            })
            .collect();
        BoundaryTrace { chains }
    }

    pub fn minus_average(&self) -> Self {
        let avg = self.average();
        self.map_values(|v| v - avg)
    }

    /// Splits every edge at its midpoint; the represented function is
    /// unchanged.
    pub fn refine_midpoints(&self) -> Self {
        let chains = self
            .chains
            .iter()
            .map(|c| {
                let n = c.points.len();
                let mut points = Vec::with_capacity(2 * n);
                let mut values = Vec::with_capacity(2 * n);
                for i in 0..n {
                    points.push(c.points[i]);
                    values.push(c.values[i]);
                    if c.closed || i + 1 < n {
                        let j = (i + 1) % n;
                        points.push(Point::from((c.points[i].coords + c.points[j].coords) * 0.5));
                        values.push(0.5 * (c.values[i] + c.values[j]));
                    }
                }
                Chain {
                    points,
                    values,
                    closed: c.closed,
                }
            })
            .collect();
        BoundaryTrace { chains }
    }

    pub fn is_constant(&self) -> bool {
        let mut values = self.values();
        let first = *values.next().expect("traces are non-empty");
        values.all(|&v| v == first)
    }
}

/// Orders the edges of a facet tag into chains of mesh node indices.
/// Chains follow the edge orientation where it is consistent.
pub fn tag_chains(mesh: &Mesh, tag: &str) -> Result<Vec<(Vec<usize>, bool)>, BoundaryError> {
    let edges = mesh.facets(tag);
    if edges.is_empty() {
        return Err(BoundaryError::EmptyTag(tag.to_string()));
    }
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut forward: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &[a, b] in edges {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
        forward.insert((a, b));
    }
    for (&node, nbrs) in &mut adjacency {
        nbrs.sort_unstable();
        nbrs.dedup();
        if nbrs.len() > 2 {
            return Err(BoundaryError::Branching {
                tag: tag.to_string(),
                node,
            });
        }
    }
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let walk = |start: usize, used: &mut BTreeSet<(usize, usize)>| -> Vec<usize> {
        let mut chain = vec![start];
        let mut current = start;
        loop {
            let nbrs = &adjacency[&current];
            // Prefer the neighbour reached along the tag orientation.
            let next = nbrs
                .iter()
                .copied()
                .filter(|&n| !used.contains(&key(current, n)))
                .max_by_key(|&n| forward.contains(&(current, n)));
            match next {
                Some(n) => {
                    used.insert(key(current, n));
                    if n == start {
                        break;
                    }
                    chain.push(n);
                    current = n;
                }
                None => break,
            }
        }
        chain
    };
    let mut chains = Vec::new();
    let ends: Vec<usize> = adjacency
        .iter()
        .filter(|(_, n)| n.len() == 1)
        .map(|(&v, _)| v)
        .collect();
    for start in ends {
        if adjacency[&start].iter().all(|&n| used.contains(&key(start, n))) {
            continue;
        }
        let mut chain = walk(start, &mut used);
        if !forward.contains(&(chain[0], chain[1])) {
            chain.reverse();
        }
        chains.push((chain, false));
    }
    let nodes: Vec<usize> = adjacency.keys().copied().collect();
    for start in nodes {
        if adjacency[&start].iter().all(|&n| used.contains(&key(start, n))) {
            continue;
        }
        chains.push((walk(start, &mut used), true));
    }
    Ok(chains)
}

/// Restriction of a P1 function to the edges of a facet tag.
pub fn trace_of(u: &FEFunction, tag: &str) -> Result<BoundaryTrace, BoundaryError> {
    let mesh = u.mesh();
    let chains = tag_chains(mesh, tag)?
        .into_iter()
        .map(|(nodes, closed)| Chain {
            points: nodes.iter().map(|&v| mesh.nodes()[v]).collect(),
            values: nodes.iter().map(|&v| u.values()[v]).collect(),
            closed,
        })
        .collect();
    BoundaryTrace::new(chains)
}

/// d = I(g) − u₀ on the edges of a facet tag.
pub fn boundary_error(
    g: impl Fn(Point) -> f64,
    u0: &FEFunction,
    tag: &str,
) -> Result<BoundaryTrace, BoundaryError> {
    let trace = trace_of(u0, tag)?;
    let chains = trace
        .chains
        .into_iter()
        .map(|c| Chain {
            values: c.points.iter().zip(&c.values).map(|(&p, u)| g(p) - u).collect(),
            points: c.points,
            closed: c.closed,
        })
        .collect();
    BoundaryTrace::new(chains)
}

pub fn tag_length(mesh: &Mesh, tag: &str) -> Result<f64, BoundaryError> {
    if mesh.facets(tag).is_empty() {
        return Err(BoundaryError::EmptyTag(tag.to_string()));
    }
    Ok(mesh.facet_length(tag))
}

pub fn tag_diameter(mesh: &Mesh, tag: &str) -> Result<f64, BoundaryError> {
    let nodes: BTreeSet<usize> = mesh.facets(tag).iter().flatten().copied().collect();
    if nodes.is_empty() {
        return Err(BoundaryError::EmptyTag(tag.to_string()));
    }
    let pts: Vec<Point> = nodes.iter().map(|&v| mesh.nodes()[v]).collect();
    Ok(point_set_diameter(&pts))
}

/// Area-weighted centroid of a region.
pub fn region_barycenter(mesh: &Mesh, region: &str) -> Result<Point, BoundaryError> {
    mesh.barycenter(mesh.region(region))
        .ok_or_else(|| BoundaryError::EmptyRegion(region.to_string()))
}

/// Smallest distance from `p` to the edges of the given tags.
pub fn distance_to_tags(p: &Point, mesh: &Mesh, tags: &[&str]) -> Result<f64, BoundaryError> {
    let mut best = f64::INFINITY;
    for tag in tags {
        for &[a, b] in mesh.facets(tag) {
            let (a, b) = (mesh.nodes()[a], mesh.nodes()[b]);
            best = best.min(segment_distance(p, &a, &b));
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(BoundaryError::EmptyTag(tags.join(",")))
    }
}

fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Gauss tensor rule for ∫∫ (t(x) − t(y))² / |x − y|² over two edges
/// parametrized on sub-intervals of [0, 1].
fn gauss_pair(e: &TraceEdge, f: &TraceEdge, (s0, s1): (f64, f64), (t0, t1): (f64, f64)) -> f64 {
    let (li, lj) = (e.length(), f.length());
    let mut sum = 0.0;
    for &(s, ws) in &EDGE_GAUSS {
        let s = s0 + (s1 - s0) * s;
        let x = e.a + (e.b - e.a) * s;
        let vx = e.va + (e.vb - e.va) * s;
        for &(t, wt) in &EDGE_GAUSS {
            let t = t0 + (t1 - t0) * t;
            let y = f.a + (f.b - f.a) * t;
            let vy = f.va + (f.vb - f.va) * t;
            sum += ws * wt * (vx - vy).powi(2) / (x - y).norm_squared();
        }
    }
    sum * li * lj * (s1 - s0) * (t1 - t0)
}

/// Edge with its endpoints reordered so that `node` comes first.
fn starting_at(e: &TraceEdge, node: usize) -> TraceEdge {
    if e.nodes[0] == node {
        *e
    } else {
        TraceEdge {
            a: e.b,
            b: e.a,
            va: e.vb,
            vb: e.va,
            nodes: [e.nodes[1], e.nodes[0]],
        }
    }
}

/// Pair of edges sharing a node. The integrand is homogeneous of degree
/// zero around the shared node, so the corner block of a geometric
/// splitting is a scaled copy of the whole integral.
fn adjacent_pair(e: &TraceEdge, f: &TraceEdge, shared: usize) -> f64 {
    const BREAKS: [(f64, f64); 3] = [(0.0, 0.25), (0.25, 0.5), (0.5, 1.0)];
    let (e, f) = (starting_at(e, shared), starting_at(f, shared));
    let mut rest = 0.0;
    for (i, &si) in BREAKS.iter().enumerate() {
        for (j, &tj) in BREAKS.iter().enumerate() {
            if i == 0 && j == 0 {
                continue;
            }
            rest += gauss_pair(&e, &f, si, tj);
        }
    }
    rest / (1.0 - 0.25 * 0.25)
}

fn shared_node(e: &TraceEdge, f: &TraceEdge) -> Option<usize> {
    e.nodes.iter().copied().find(|n| f.nodes.contains(n))
}

/// |t|_{H^{1/2}(γ)}: square root of ∫∫ |t(x) − t(y)|² / |x − y|² over γ × γ.
pub fn fractional_seminorm_half(t: &BoundaryTrace) -> f64 {
    fractional_seminorm_half_with(Execution::default(), t)
}

pub fn fractional_seminorm_half_with(exec: Execution, t: &BoundaryTrace) -> f64 {
    let edges: Vec<TraceEdge> = t.edges().collect();
    let rows = par::map_range(exec, edges.len(), |i| {
        let e = &edges[i];
        let mut row = (e.vb - e.va).powi(2);
        for f in &edges[i + 1..] {
            let pair = match shared_node(e, f) {
                Some(node) => adjacent_pair(e, f, node),
                None => gauss_pair(e, f, (0.0, 1.0), (0.0, 1.0)),
            };
            row += 2.0 * pair;
        }
        row
    });
    rows.iter().sum::<f64>().max(0.0).sqrt()
}

/// |t − avg|_{1/2} / sqrt(‖t − avg‖ ‖∇_t t‖).
pub fn verify_interpolation_inequality(t: &BoundaryTrace) -> Result<f64, BoundaryError> {
    verify_interpolation_inequality_with(Execution::default(), t)
}

pub fn verify_interpolation_inequality_with(
    exec: Execution,
    t: &BoundaryTrace,
) -> Result<f64, BoundaryError> {
    let centered = t.minus_average();
    let denom = (centered.l2_norm() * t.tangential_gradient_l2()).sqrt();
    if t.is_constant() || !(denom > 0.0) {
        return Err(BoundaryError::ConstantTrace);
    }
    Ok(fractional_seminorm_half_with(exec, &centered) / denom)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    pub(crate) fn unit_edge(values: [f64; 2]) -> BoundaryTrace {
        BoundaryTrace::polyline(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)],
            values.to_vec(),
            false,
        )
        .unwrap()
    }

    fn circle(n: usize, r: f64, f: impl Fn(f64) -> f64) -> BoundaryTrace {
        let (points, values) = (0..n)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / n as f64;
                (Point::new(r * th.cos(), r * th.sin()), f(th))
            })
            .unzip();
        BoundaryTrace::polyline(points, values, true).unwrap()
    }

    #[test]
    fn linear_trace_on_unit_edge() {
        let t = unit_edge([0.0, 1.0]);
        assert!((t.l2_norm() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((t.average() - 0.5).abs() < 1e-15);
        assert!((t.tangential_gradient_l2() - 1.0).abs() < 1e-15);
        assert!((fractional_seminorm_half(&t) - 1.0).abs() < 1e-14);
        let ratio = verify_interpolation_inequality(&t).unwrap();
        assert!((ratio - 12f64.powf(0.25)).abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn constant_trace_on_loop() {
        let t = circle(32, 0.3, |_| -2.0);
        let len = t.length();
        assert!((t.l2_norm() - 2.0 * len.sqrt()).abs() < 1e-12);
        assert!((t.average() + 2.0).abs() < 1e-12);
        assert_eq!(t.tangential_gradient_l2(), 0.0);
        assert_eq!(fractional_seminorm_half(&t), 0.0);
        assert_eq!(verify_interpolation_inequality(&t), Err(BoundaryError::ConstantTrace));
    }

    #[test]
    fn sine_average_vanishes() {
        let t = circle(256, 1.0 / (2.0 * PI), |th| th.sin());
        assert!(t.average().abs() < 1e-6);
        assert!(t.minus_average().average().abs() < 1e-12);
    }

    #[test]
    fn polygon_diameter() {
        let r = 0.7;
        let t = circle(64, r, |th| th);
        // An even polygon has diametrically opposite vertices.
        assert!((t.diameter() - 2.0 * r).abs() < 1e-12);
    }

    #[test]
    fn adjacent_pair_matches_fine_quadrature() {
        let t = BoundaryTrace::polyline(
            vec![Point::new(1.0, 0.0), Point::new(0.0, 0.0), Point::new(0.3, 0.8)],
            vec![0.4, -0.2, 1.1],
            false,
        )
        .unwrap();
        // Brute force midpoint rule on a fine grid, skipping the diagonal cells.
        let edges: Vec<TraceEdge> = t.edges().collect();
        let n = 400;
        let mut brute = 0.0;
        for e in &edges {
            for f in &edges {
                for i in 0..n {
                    for j in 0..n {
                        let s = (i as f64 + 0.5) / n as f64;
                        let u = (j as f64 + 0.5) / n as f64;
                        let x = e.a + (e.b - e.a) * s;
                        let y = f.a + (f.b - f.a) * u;
                        let d2 = (x - y).norm_squared();
                        if d2 == 0.0 {
                            continue;
                        }
                        let dv = (e.va + (e.vb - e.va) * s) - (f.va + (f.vb - f.va) * u);
                        brute += dv * dv / d2 * e.length() * f.length() / (n * n) as f64;
                    }
                }
            }
        }
        let ours = fractional_seminorm_half(&t).powi(2);
        assert!((ours - brute).abs() < 2e-3 * brute, "{ours} vs {brute}");
    }

    #[test]
    fn seminorm_is_scale_invariant() {
        let t = circle(24, 0.2, |th| (3.0 * th).cos() + th.sin());
        let base = fractional_seminorm_half(&t);
        for lambda in [0.1, 10.0] {
            let scaled = fractional_seminorm_half(&t.map_points(|p| Point::from(p.coords * lambda)));
            assert!((scaled - base).abs() < 1e-10 * base);
        }
    }

    #[test]
    fn midpoint_refinement_keeps_the_function() {
        let t = circle(16, 0.5, |th| th.cos());
        let r = t.refine_midpoints();
        assert_eq!(r.num_edges(), 32);
        assert!((r.l2_norm() - t.l2_norm()).abs() < 1e-14);
        assert!((r.tangential_gradient_l2() - t.tangential_gradient_l2()).abs() < 1e-12);
    }
}
