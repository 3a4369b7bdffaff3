//! Conformal triangulations of the defeatured domain in which the exact
//! domain is a submesh, plus import, refinement and submesh extraction.

mod generate;
mod geometry;
mod msh;

pub use generate::{generate_template, generate_template_with, MeshOptions};
pub use geometry::{FeatureGeometry, FeatureOutline, FeatureShape, Placement, SegmentRole};
pub use msh::{parse_msh, MshError};

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use nalgebra::{Point2, Vector2};
use thiserror::Error;

pub type Point = Point2<f64>;

/// Facet tag of the defeatured boundary γ (boundary of the feature inside the exact domain).
pub const TAG_GAMMA: &str = "gamma";
/// Facet tag of the simplified boundary γ₀ (only present in the defeatured domain).
pub const TAG_GAMMA0: &str = "gamma0";
/// Facet tag of the remaining Dirichlet boundary.
pub const TAG_DIRICHLET: &str = "GammaD";
/// Facet tag of the remaining Neumann boundary.
pub const TAG_NEUMANN: &str = "GammaN";
/// Element tag of the triangles inside the feature F.
pub const REGION_FEATURE: &str = "feature";
/// Element tag of the triangles of the exact domain Ω.
pub const REGION_EXTERIOR: &str = "exterior";

const BOUNDARY_TAGS: [&str; 4] = [TAG_GAMMA, TAG_GAMMA0, TAG_DIRICHLET, TAG_NEUMANN];

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("triangle {0} references node {1}, but the mesh has {2} nodes")]
    NodeOutOfRange(usize, usize, usize),
    #[error("triangle {index} has non-positive signed area {area:e}")]
    NonPositiveArea { index: usize, area: f64 },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("edge ({0}, {1}) appears twice with the same orientation")]
    InconsistentOrientation(usize, usize),
    #[error("facet tag {tag:?} contains ({a}, {b}), which is not a mesh edge")]
    UnknownFacet { tag: String, a: usize, b: usize },
    #[error("facet tags {0:?} and {1:?} share an edge")]
    OverlappingTags(String, String),
    #[error("gamma edge ({0}, {1}) does not separate the feature from the exterior")]
    GammaNotOnInterface(usize, usize),
    #[error("element tag {tag:?} references triangle {index} of {count}")]
    ElementOutOfRange { tag: String, index: usize, count: usize },
    #[error("missing region tag {0:?}")]
    MissingRegion(&'static str),
    #[error("region {0:?} is empty")]
    EmptyRegion(String),
    #[error("mesh has no triangles")]
    Empty,
    #[error("extracted mesh is disconnected ({0} components)")]
    Disconnected(usize),
    #[error("mesh generation failed: {0}")]
    Generation(String),
    #[error("feature does not fit its placement: {0}")]
    InvalidGeometry(String),
}

/// Undirected edge key.
pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b - a).perp(&(c - a)))
}

/// Immutable triangulated planar domain with tagged facets and regions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    facet_tags: BTreeMap<String, Vec<[usize; 2]>>,
    element_tags: BTreeMap<String, Vec<usize>>,
}

/// Exact-domain submesh together with the node correspondence to its parent.
#[derive(Debug, Clone)]
pub struct SubMesh {
    pub mesh: Mesh,
    /// `parent_nodes[i]` is the parent-mesh index of submesh node `i`.
    pub parent_nodes: Vec<usize>,
}

impl Mesh {
    /// Builds a mesh and checks every structural invariant.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        facet_tags: BTreeMap<String, Vec<[usize; 2]>>,
        element_tags: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, MeshError> {
        let mesh = Mesh {
            nodes,
            triangles,
            facet_tags,
            element_tags,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn facet_tags(&self) -> &BTreeMap<String, Vec<[usize; 2]>> {
        &self.facet_tags
    }

    pub fn element_tags(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.element_tags
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Edges of a facet tag, or an empty slice if the tag is absent.
    pub fn facets(&self, tag: &str) -> &[[usize; 2]] {
        self.facet_tags.get(tag).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Triangles of a region tag, or an empty slice if the tag is absent.
    pub fn region(&self, tag: &str) -> &[usize] {
        self.element_tags.get(tag).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(&a, &b, &c)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn region_area(&self, tag: &str) -> f64 {
        self.region(tag).iter().map(|&t| self.triangle_area(t)).sum()
    }

    pub fn edge_length(&self, [a, b]: [usize; 2]) -> f64 {
        (self.nodes[b] - self.nodes[a]).norm()
    }

    /// Total length of a facet tag.
    pub fn facet_length(&self, tag: &str) -> f64 {
        self.facets(tag).iter().map(|&e| self.edge_length(e)).sum()
    }

    /// Map from undirected edge to the triangles containing it, with the
    /// orientation in which each triangle traverses it.
    fn edge_incidence(&self) -> HashMap<(usize, usize), Vec<(usize, [usize; 2])>> {
        let mut map: HashMap<(usize, usize), Vec<(usize, [usize; 2])>> =
            HashMap::with_capacity(self.triangles.len() * 2);
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                map.entry(edge_key(a, b)).or_default().push((t, [a, b]));
            }
        }
        map
    }

    /// Unique undirected edges, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .edge_incidence()
            .into_keys()
            .map(|(a, b)| [a, b])
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Edges with exactly one incident triangle, oriented counter-clockwise
    /// with respect to the mesh, sorted by their node pair.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .edge_incidence()
            .into_values()
            .filter(|inc| inc.len() == 1)
            .map(|inc| inc[0].1)
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| triangle_min_angle(&self.triangle_points(t)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges()
            .into_iter()
            .map(|e| self.edge_length(e))
            .fold(f64::INFINITY, f64::min)
    }

    /// Nodes touched by a set of triangles, sorted and deduplicated.
    pub fn region_nodes(&self, tris: &[usize]) -> Vec<usize> {
        let mut nodes: Vec<usize> = tris.iter().flat_map(|&t| self.triangles[t]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Checks positivity, conformity, tag disjointness and the interface
    /// property of the γ facets.
    pub fn validate(&self) -> Result<(), MeshError> {
        if self.triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let n = self.nodes.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= n) {
                return Err(MeshError::NodeOutOfRange(t, bad, n));
            }
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(MeshError::NonPositiveArea { index: t, area });
            }
        }
        let incidence = self.edge_incidence();
        for ((a, b), inc) in &incidence {
            match inc.len() {
                1 => {}
                2 => {
                    if inc[0].1 == inc[1].1 {
                        return Err(MeshError::InconsistentOrientation(*a, *b));
                    }
                }
                _ => return Err(MeshError::NonManifoldEdge(*a, *b)),
            }
        }
        for (tag, tris) in &self.element_tags {
            if let Some(&bad) = tris.iter().find(|&&t| t >= self.triangles.len()) {
                return Err(MeshError::ElementOutOfRange {
                    tag: tag.clone(),
                    index: bad,
                    count: self.triangles.len(),
                });
            }
        }
        let mut owner: HashMap<(usize, usize), &str> = HashMap::new();
        for (tag, edges) in &self.facet_tags {
            for &[a, b] in edges {
                if !incidence.contains_key(&edge_key(a, b)) {
                    return Err(MeshError::UnknownFacet {
                        tag: tag.clone(),
                        a,
                        b,
                    });
                }
                if BOUNDARY_TAGS.contains(&tag.as_str()) {
                    if let Some(prev) = owner.insert(edge_key(a, b), tag) {
                        if prev != tag {
                            return Err(MeshError::OverlappingTags(prev.into(), tag.clone()));
                        }
                    }
                }
            }
        }
        let mut region_of = vec![None; self.triangles.len()];
        for (name, tag) in [(REGION_FEATURE, 0u8), (REGION_EXTERIOR, 1u8)] {
            for &t in self.region(name) {
                region_of[t] = Some(tag);
            }
        }
        for &[a, b] in self.facets(TAG_GAMMA) {
            let inc = &incidence[&edge_key(a, b)];
            let ok = match inc.as_slice() {
                [_] => true,
                [(t0, _), (t1, _)] => {
                    let (r0, r1) = (region_of[*t0], region_of[*t1]);
                    r0.is_some() && r1.is_some() && r0 != r1
                }
                _ => false,
            };
            if !ok {
                return Err(MeshError::GammaNotOnInterface(a, b));
            }
        }
        Ok(())
    }

    /// Uniform refinement whose new nodes on the edges of `tag` are moved by
    /// `project`, typically onto the curve the edges approximate.
    pub fn refine_uniform_onto(
        &self,
        tag: &str,
        project: impl Fn(Point) -> Point,
    ) -> Result<Mesh, MeshError> {
        self.refine_uniform().project_tag_nodes(tag, project)
    }

    /// Moves every node of the edges of `tag` by `project`. Fails if a
    /// triangle is inverted or flattened by the move.
    pub fn project_tag_nodes(
        mut self,
        tag: &str,
        project: impl Fn(Point) -> Point,
    ) -> Result<Mesh, MeshError> {
        let moved: BTreeSet<usize> = self.facets(tag).iter().flatten().copied().collect();
        for v in moved {
            self.nodes[v] = project(self.nodes[v]);
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|v| self.nodes[v]);
            let area = signed_area(&a, &b, &c);
            if area <= 0.0 {
                return Err(MeshError::NonPositiveArea { index: t, area });
            }
        }
        Ok(self)
    }

    /// Splits every triangle into four through its edge midpoints.
    ///
    /// Midpoints are not projected onto any underlying curve: the refined
    /// mesh covers exactly the same polygonal domain.
    pub fn refine_uniform(&self) -> Mesh {
        let mut nodes = self.nodes.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<Point>| -> usize {
            *midpoint.entry(edge_key(a, b)).or_insert_with(|| {
                let (p, q) = (nodes[a], nodes[b]);
                nodes.push(Point::from((p.coords + q.coords) * 0.5));
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(self.triangles.len() * 4);
        for &[a, b, c] in &self.triangles {
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            triangles.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        let facet_tags = self
            .facet_tags
            .iter()
            .map(|(tag, edges)| {
                let split = edges
                    .iter()
                    .flat_map(|&[a, b]| {
                        let m = midpoint[&edge_key(a, b)];
                        [[a, m], [m, b]]
                    })
                    .collect();
                (tag.clone(), split)
            })
            .collect();
        let element_tags = self
            .element_tags
            .iter()
            .map(|(tag, tris)| {
                let children = tris.iter().flat_map(|&t| (4 * t)..(4 * t + 4)).collect();
                (tag.clone(), children)
            })
            .collect();
        Mesh {
            nodes,
            triangles,
            facet_tags,
            element_tags,
        }
    }

    /// Extracts the exact domain Ω: the "exterior" triangles with densely
    /// renumbered nodes. Facet tags keep the edges that survive.
    pub fn extract_exact_submesh(&self) -> Result<SubMesh, MeshError> {
        if !self.element_tags.contains_key(REGION_FEATURE) {
            return Err(MeshError::MissingRegion(REGION_FEATURE));
        }
        let exterior = self
            .element_tags
            .get(REGION_EXTERIOR)
            .ok_or(MeshError::MissingRegion(REGION_EXTERIOR))?;
        if exterior.is_empty() {
            return Err(MeshError::EmptyRegion(REGION_EXTERIOR.into()));
        }
        let mut tris = exterior.clone();
        tris.sort_unstable();
        let parent_nodes = self.region_nodes(&tris);
        let mut local = vec![usize::MAX; self.nodes.len()];
        for (i, &p) in parent_nodes.iter().enumerate() {
            local[p] = i;
        }
        let nodes: Vec<Point> = parent_nodes.iter().map(|&p| self.nodes[p]).collect();
        let triangles: Vec<[usize; 3]> = tris
            .iter()
            .map(|&t| self.triangles[t].map(|v| local[v]))
            .collect();
        let mut sub_edges = std::collections::HashSet::new();
        for tri in &triangles {
            for k in 0..3 {
                sub_edges.insert(edge_key(tri[k], tri[(k + 1) % 3]));
            }
        }
        let facet_tags = self
            .facet_tags
            .iter()
            .filter_map(|(tag, edges)| {
                let kept: Vec<[usize; 2]> = edges
                    .iter()
                    .filter(|&&[a, b]| local[a] != usize::MAX && local[b] != usize::MAX)
                    .map(|&[a, b]| [local[a], local[b]])
                    .filter(|&[a, b]| sub_edges.contains(&edge_key(a, b)))
                    .collect();
                (!kept.is_empty()).then(|| (tag.clone(), kept))
            })
            .collect();
        let mut element_tags = BTreeMap::new();
        element_tags.insert(REGION_EXTERIOR.to_string(), (0..triangles.len()).collect());
        let mesh = Mesh::new(nodes, triangles, facet_tags, element_tags)?;
        let components = mesh.triangle_components();
        if components != 1 {
            return Err(MeshError::Disconnected(components));
        }
        Ok(SubMesh { mesh, parent_nodes })
    }

    /// Structured mesh of [0, 1]² with `n` × `n` cells split along the
    /// diagonal; the whole boundary is tagged Dirichlet.
    pub fn unit_square(n: usize) -> Mesh {
        let n = n.max(1);
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                nodes.push(Point::new(i as f64 / n as f64, j as f64 / n as f64));
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut boundary = Vec::with_capacity(4 * n);
        for i in 0..n {
            boundary.push([id(i, 0), id(i + 1, 0)]);
            boundary.push([id(n, i), id(n, i + 1)]);
            boundary.push([id(i + 1, n), id(i, n)]);
            boundary.push([id(0, i + 1), id(0, i)]);
        }
        let mut facet_tags = BTreeMap::new();
        facet_tags.insert(TAG_DIRICHLET.to_string(), boundary);
        Mesh {
            nodes,
            triangles,
            facet_tags,
            element_tags: BTreeMap::new(),
        }
    }

    /// Number of edge-connected components of the triangle set.
    pub fn triangle_components(&self) -> usize {
        let incidence = self.edge_incidence();
        let mut seen = vec![false; self.triangles.len()];
        let mut components = 0;
        for start in 0..self.triangles.len() {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(t) = queue.pop_front() {
                let tri = self.triangles[t];
                for k in 0..3 {
                    for &(nb, _) in &incidence[&edge_key(tri[k], tri[(k + 1) % 3])] {
                        if !seen[nb] {
                            seen[nb] = true;
                            queue.push_back(nb);
                        }
                    }
                }
            }
        }
        components
    }

    /// Area-weighted centroid of a set of triangles.
    pub fn barycenter(&self, tris: &[usize]) -> Option<Point> {
        let mut area = 0.0;
        let mut moment = Vector2::zeros();
        for &t in tris {
            let [a, b, c] = self.triangle_points(t);
            let w = signed_area(&a, &b, &c);
            area += w;
            moment += w * (a.coords + b.coords + c.coords) / 3.0;
        }
        (area > 0.0).then(|| Point::from(moment / area))
    }

    /// diam(F)²/|F| of the "feature" region, from its nodes and triangles.
    pub fn feature_isotropy_ratio(&self) -> Result<f64, MeshError> {
        let tris = self.region(REGION_FEATURE);
        if tris.is_empty() {
            return Err(MeshError::EmptyRegion(REGION_FEATURE.into()));
        }
        let pts: Vec<Point> = self
            .region_nodes(tris)
            .into_iter()
            .map(|v| self.nodes[v])
            .collect();
        let diam = point_set_diameter(&pts);
        Ok(diam * diam / self.region_area(REGION_FEATURE))
    }
}

/// Isotropy ratio of the feature meshed in `mesh`. The geometry is only
/// used to check that the mesh actually carries a feature of that kind.
pub fn feature_isotropy_ratio(geometry: &FeatureGeometry, mesh: &Mesh) -> Result<f64, MeshError> {
    if geometry.placement() == Placement::Internal && !mesh.facets(TAG_GAMMA0).is_empty() {
        return Err(MeshError::InvalidGeometry(
            "internal feature mesh carries gamma0 facets".into(),
        ));
    }
    mesh.feature_isotropy_ratio()
}

pub(crate) fn triangle_min_angle(p: &[Point; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let u = p[(k + 1) % 3] - p[k];
            let v = p[(k + 2) % 3] - p[k];
            u.angle(&v).to_degrees()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Euclidean diameter of a point set via its convex hull.
pub fn point_set_diameter(points: &[Point]) -> f64 {
    let hull = convex_hull(points);
    let mut best = 0.0f64;
    for i in 0..hull.len() {
        for j in (i + 1)..hull.len() {
            best = best.max((hull[i] - hull[j]).norm());
        }
    }
    best
}

/// Andrew's monotone chain; returns hull vertices counter-clockwise.
fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point, a: &Point, b: &Point| (a - o).perp(&(b - o));
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2
                && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn unit_triangle() -> Mesh {
        let nodes = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        Mesh::new(nodes, vec![[0, 1, 2]], BTreeMap::new(), BTreeMap::new()).unwrap()
    }

    fn two_triangles(feature: Vec<usize>, exterior: Vec<usize>) -> Mesh {
        let nodes = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let mut facets = BTreeMap::new();
        if !feature.is_empty() && !exterior.is_empty() {
            facets.insert(TAG_GAMMA.to_string(), vec![[0, 2]]);
        }
        facets.insert(TAG_DIRICHLET.to_string(), vec![[0, 1], [1, 2], [2, 3], [3, 0]]);
        let mut regions = BTreeMap::new();
        regions.insert(REGION_FEATURE.to_string(), feature);
        regions.insert(REGION_EXTERIOR.to_string(), exterior);
        Mesh::new(nodes, vec![[0, 1, 2], [0, 2, 3]], facets, regions).unwrap()
    }

    #[test]
    fn rejects_clockwise_triangle() {
        let nodes = vec![Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)];
        let err = Mesh::new(nodes, vec![[0, 1, 2]], BTreeMap::new(), BTreeMap::new());
        assert!(matches!(err, Err(MeshError::NonPositiveArea { .. })));
    }

    #[test]
    fn rejects_same_orientation_shared_edge() {
        let nodes = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.5, 1.0),
            Point::new(0.5, -1.0),
        ];
        // Second triangle folds over the first, traversing 0->1 again.
        let err = Mesh::new(
            nodes,
            vec![[0, 1, 2], [0, 1, 2]],
            BTreeMap::new(),
            BTreeMap::new(),
        );
        assert!(matches!(err, Err(MeshError::InconsistentOrientation(..))));
    }

    #[test]
    fn rejects_overlapping_boundary_tags() {
        let m = unit_triangle();
        let mut facets = BTreeMap::new();
        facets.insert(TAG_DIRICHLET.to_string(), vec![[0, 1]]);
        facets.insert(TAG_NEUMANN.to_string(), vec![[1, 0]]);
        let err = Mesh::new(m.nodes.clone(), m.triangles.clone(), facets, BTreeMap::new());
        assert!(matches!(err, Err(MeshError::OverlappingTags(_, _))));
    }

    #[test]
    fn gamma_must_separate_regions() {
        let nodes = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let mut facets = BTreeMap::new();
        facets.insert(TAG_GAMMA.to_string(), vec![[0, 2]]);
        let mut regions = BTreeMap::new();
        regions.insert(REGION_EXTERIOR.to_string(), vec![0, 1]);
        let err = Mesh::new(nodes, vec![[0, 1, 2], [0, 2, 3]], facets, regions);
        assert_eq!(err, Err(MeshError::GammaNotOnInterface(0, 2)));
    }

    #[test]
    fn refine_single_triangle() {
        let fine = unit_triangle().refine_uniform();
        assert_eq!(fine.num_triangles(), 4);
        assert_eq!(fine.num_nodes(), 6);
        fine.validate().unwrap();
        assert!((fine.area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn refine_doubles_tagged_edges() {
        let m = two_triangles(vec![0], vec![1]);
        let fine = m.refine_uniform();
        fine.validate().unwrap();
        assert_eq!(fine.num_triangles(), 8);
        for (tag, edges) in m.facet_tags() {
            assert_eq!(fine.facets(tag).len(), 2 * edges.len());
            assert!((fine.facet_length(tag) - m.facet_length(tag)).abs() < 1e-14);
        }
        assert_eq!(fine.boundary_edges().len(), 2 * m.boundary_edges().len());
    }

    #[test]
    fn extract_with_empty_feature_is_identity() {
        let m = two_triangles(vec![], vec![0, 1]);
        let sub = m.extract_exact_submesh().unwrap();
        assert_eq!(sub.mesh.nodes(), m.nodes());
        assert_eq!(sub.mesh.triangles(), m.triangles());
        assert_eq!(sub.parent_nodes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn extract_makes_gamma_a_boundary() {
        let m = two_triangles(vec![0], vec![1]);
        let sub = m.extract_exact_submesh().unwrap();
        assert_eq!(sub.mesh.num_triangles(), 1);
        assert_eq!(sub.parent_nodes, vec![0, 2, 3]);
        let boundary = sub.mesh.boundary_edges();
        for &[a, b] in sub.mesh.facets(TAG_GAMMA) {
            assert!(boundary.iter().any(|&[p, q]| edge_key(p, q) == edge_key(a, b)));
        }
        assert!((sub.mesh.area() + m.region_area(REGION_FEATURE) - m.area()).abs() < 1e-12);
    }

    #[test]
    fn extract_requires_regions() {
        assert_eq!(
            unit_triangle().extract_exact_submesh().unwrap_err(),
            MeshError::MissingRegion(REGION_FEATURE)
        );
    }

    #[test]
    fn isotropy_of_unit_square_region() {
        let m = two_triangles(vec![0, 1], vec![]);
        assert!((m.feature_isotropy_ratio().unwrap() - 2.0).abs() < 1e-14);
        let empty = two_triangles(vec![], vec![0, 1]);
        assert!(empty.feature_isotropy_ratio().is_err());
    }

    #[test]
    fn hull_diameter_of_square() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(0.5, 0.5),
        ];
        assert!((point_set_diameter(&pts) - 2f64.sqrt()).abs() < 1e-15);
    }
}
