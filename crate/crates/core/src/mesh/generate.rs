//! Graded template meshes of Ω₀ that contain ∂F as an edge set.
//!
//! The feature outline and the sized outer boundary are inserted as
//! constraint edges of a constrained Delaunay triangulation. Faces larger
//! than the sizing field are split at their centroids, then Ruppert
//! refinement enforces the angle bound. Constraint segments are only ever
//! split at points on the same straight segment, so the meshed domain is
//! exactly the polygonal geometry.

use std::collections::{BTreeMap, HashMap};

use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use super::geometry::point_segment_distance;
use super::{
    edge_key, FeatureGeometry, FeatureOutline, Mesh, MeshError, Placement, Point, SegmentRole,
    REGION_EXTERIOR, REGION_FEATURE, TAG_DIRICHLET, TAG_GAMMA, TAG_GAMMA0, TAG_NEUMANN,
};

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct MeshOptions {
    /// Edge length on γ relative to the feature size |γ|.
    pub h: f64,
    /// Largest edge length far from the feature, in domain units.
    pub far_field: f64,
    /// Growth rate of the sizing field with distance from the feature.
    pub grading: f64,
    /// Ruppert angle bound in degrees.
    pub min_angle_deg: f64,
    /// Additional refinement toward a point: (center, edge length there).
    pub point_refinement: Option<(Point, f64)>,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions {
            h: 0.05,
            far_field: 1.0 / 32.0,
            grading: 0.25,
            min_angle_deg: 25.0,
            point_refinement: None,
        }
    }
}

impl MeshOptions {
    pub fn with_h(h: f64) -> Self {
        MeshOptions {
            h,
            ..Default::default()
        }
    }
}

/// Role of an input constraint segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Feature(SegmentRole),
    Dirichlet,
    Neumann,
}

impl Role {
    fn tag(self) -> &'static str {
        match self {
            Role::Feature(SegmentRole::Gamma) => TAG_GAMMA,
            Role::Feature(SegmentRole::Gamma0) => TAG_GAMMA0,
            Role::Dirichlet => TAG_DIRICHLET,
            Role::Neumann => TAG_NEUMANN,
        }
    }
}

/// Target edge length as a function of position.
struct Sizing {
    center: Point,
    radius: f64,
    near: f64,
    far: f64,
    grading: f64,
    point: Option<(Point, f64)>,
}

impl Sizing {
    fn at(&self, p: &Point) -> f64 {
        let d = ((p - self.center).norm() - self.radius).max(0.0);
        let mut s = (self.near + self.grading * d).min(self.far);
        if let Some((q, hq)) = self.point {
            s = s.min(hq + self.grading * (p - q).norm());
        }
        s
    }
}

/// Template mesh with default options and relative size `h` on γ.
pub fn generate_template(geometry: &FeatureGeometry, h: f64) -> Result<Mesh, MeshError> {
    generate_template_with(geometry, &MeshOptions::with_h(h))
}

pub fn generate_template_with(
    geometry: &FeatureGeometry,
    options: &MeshOptions,
) -> Result<Mesh, MeshError> {
    if !(options.h > 0.0 && options.far_field > 0.0 && options.grading > 0.0) {
        return Err(MeshError::InvalidGeometry(
            "mesh size parameters must be positive".into(),
        ));
    }
    let outer = geometry.outer();
    if !is_convex_ccw(outer) {
        return Err(MeshError::InvalidGeometry(
            "outer domain must be a convex counter-clockwise polygon".into(),
        ));
    }
    let near = options.h * geometry.size();
    let outline = geometry.outline(near)?;
    let center = geometry.anchor()?;
    let sizing = Sizing {
        center,
        radius: outline
            .vertices
            .iter()
            .map(|p| (p - center).norm())
            .fold(0.0, f64::max),
        near,
        far: options.far_field.max(near),
        grading: options.grading,
        point: options.point_refinement,
    };

    let (vertices, segments) = constraint_segments(geometry, &outline, &sizing)?;
    let edges: Vec<[usize; 2]> = segments.iter().map(|s| [s.0, s.1]).collect();
    let spade_vertices: Vec<Point2<f64>> = vertices.iter().map(|p| Point2::new(p.x, p.y)).collect();
    let mut cdt = Cdt::bulk_load_cdt(spade_vertices, edges)
        .map_err(|e| MeshError::Generation(format!("constraint insertion failed: {e:?}")))?;

    size_to_field(&mut cdt, &sizing)?;

    let min_area = 1e-4 * near * near;
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(options.min_angle_deg))
            .with_min_required_area(min_area)
            .with_max_additional_vertices(20 * cdt.num_vertices() + 10_000),
    );
    if !result.refinement_complete {
        log::warn!("angle refinement stopped at the vertex budget");
    }

    // Constraint splits put new γ nodes on chords; move them onto ∂F.
    let project = geometry.boundary_projector()?;
    assemble_mesh(&cdt, &vertices, &segments, &outline)?.project_tag_nodes(TAG_GAMMA, project)
}

fn is_convex_ccw(poly: &[Point]) -> bool {
    let n = poly.len();
    n >= 3
        && (0..n).all(|i| {
            let (a, b, c) = (poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
            (b - a).perp(&(c - b)) > 0.0
        })
}

/// Splits `[a, b]` into pieces equidistributed in 1/sizing, returning the
/// interior break points.
fn sized_breaks(a: Point, b: Point, sizing: &Sizing) -> Vec<Point> {
    const SAMPLES: usize = 2000;
    let len = (b - a).norm();
    let at = |t: f64| a + (b - a) * t;
    let mut cumulative = Vec::with_capacity(SAMPLES + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for k in 0..SAMPLES {
        let t = (k as f64 + 0.5) / SAMPLES as f64;
        acc += len / SAMPLES as f64 / sizing.at(&at(t));
        cumulative.push(acc);
    }
    let pieces = acc.ceil().max(1.0) as usize;
    let mut breaks = Vec::with_capacity(pieces);
    let mut k = 0;
    for j in 1..pieces {
        let target = acc * j as f64 / pieces as f64;
        while cumulative[k + 1] < target {
            k += 1;
        }
        let frac = (target - cumulative[k]) / (cumulative[k + 1] - cumulative[k]);
        breaks.push(at((k as f64 + frac) / SAMPLES as f64));
    }
    breaks
}

type Segment = (usize, usize, Role);

fn constraint_segments(
    geometry: &FeatureGeometry,
    outline: &FeatureOutline,
    sizing: &Sizing,
) -> Result<(Vec<Point>, Vec<Segment>), MeshError> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut vertex = |p: Point, vertices: &mut Vec<Point>| -> usize {
        *index.entry((p.x.to_bits(), p.y.to_bits())).or_insert_with(|| {
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut segments = Vec::new();
    let ids: Vec<usize> = outline
        .vertices
        .iter()
        .map(|&p| vertex(p, &mut vertices))
        .collect();
    for i in 0..outline.len() {
        // Point refinement can ask for edges shorter than the outline segments.
        let (a, b) = (ids[i], ids[(i + 1) % ids.len()]);
        let mut chain = vec![a];
        for p in sized_breaks(vertices[a], vertices[b], sizing) {
            chain.push(vertex(p, &mut vertices));
        }
        chain.push(b);
        for w in chain.windows(2) {
            segments.push((w[0], w[1], Role::Feature(outline.roles[i])));
        }
    }

    // γ₀ endpoints on the top side, ordered along it (right to left).
    let gamma0_span = (geometry.placement() == Placement::BoundaryTop).then(|| {
        let n = outline.len();
        let start = (0..n)
            .find(|&i| {
                outline.roles[i] == SegmentRole::Gamma0
                    && outline.roles[(i + n - 1) % n] == SegmentRole::Gamma
            })
            .expect("boundary outline has a gamma0 run");
        let end = (0..n)
            .find(|&i| {
                outline.roles[i] == SegmentRole::Gamma0
                    && outline.roles[(i + 1) % n] == SegmentRole::Gamma
            })
            .expect("boundary outline has a gamma0 run");
        (outline.vertices[start], outline.vertices[(end + 1) % n])
    });

    let outer = geometry.outer();
    let top = geometry.top_edge();
    for i in 0..outer.len() {
        let (a, b) = (outer[i], outer[(i + 1) % outer.len()]);
        let is_top = Some(i) == top;
        let role = if is_top && geometry.neumann_top() {
            Role::Neumann
        } else {
            Role::Dirichlet
        };
        let runs: Vec<(Point, Point)> = match (is_top, gamma0_span) {
            (true, Some((right, left))) => vec![(a, right), (left, b)],
            _ => vec![(a, b)],
        };
        for (p, q) in runs {
            let mut chain = vec![p];
            chain.extend(sized_breaks(p, q, sizing));
            chain.push(q);
            for w in chain.windows(2) {
                let (u, v) = (vertex(w[0], &mut vertices), vertex(w[1], &mut vertices));
                segments.push((u, v, role));
            }
        }
    }
    Ok((vertices, segments))
}

/// Splits faces whose longest edge exceeds the local target size.
fn size_to_field(cdt: &mut Cdt, sizing: &Sizing) -> Result<(), MeshError> {
    const MAX_PASSES: usize = 200;
    for _ in 0..MAX_PASSES {
        let centroids: Vec<Point2<f64>> = cdt
            .inner_faces()
            .filter_map(|f| {
                let [a, b, c] = f.positions();
                let (a, b, c) = (Point::new(a.x, a.y), Point::new(b.x, b.y), Point::new(c.x, c.y));
                let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
                let g = Point::from((a.coords + b.coords + c.coords) / 3.0);
                (longest > 1.5 * sizing.at(&g)).then(|| Point2::new(g.x, g.y))
            })
            .collect();
        if centroids.is_empty() {
            return Ok(());
        }
        for c in centroids {
            cdt.insert(c)
                .map_err(|e| MeshError::Generation(format!("steiner insertion failed: {e:?}")))?;
        }
    }
    Err(MeshError::Generation(
        "sizing passes did not converge".into(),
    ))
}

fn assemble_mesh(
    cdt: &Cdt,
    input_vertices: &[Point],
    segments: &[Segment],
    outline: &FeatureOutline,
) -> Result<Mesh, MeshError> {
    let nodes: Vec<Point> = cdt
        .vertices()
        .map(|v| {
            let p = v.position();
            Point::new(p.x, p.y)
        })
        .collect();
    debug_assert!(input_vertices
        .iter()
        .zip(&nodes)
        .all(|(a, b)| a == b));

    let triangles: Vec<[usize; 3]> = cdt
        .inner_faces()
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .collect();

    let mut feature = Vec::new();
    let mut exterior = Vec::new();
    let mut is_feature = vec![false; triangles.len()];
    for (t, tri) in triangles.iter().enumerate() {
        let g = Point::from(tri.iter().map(|&v| nodes[v].coords).sum::<nalgebra::Vector2<f64>>() / 3.0);
        if outline.contains(&g) {
            feature.push(t);
            is_feature[t] = true;
        } else {
            exterior.push(t);
        }
    }

    // Role of every constraint edge of the final triangulation.
    let by_pair: HashMap<(usize, usize), Role> = segments
        .iter()
        .map(|&(a, b, r)| (edge_key(a, b), r))
        .collect();
    let mut role_of: HashMap<(usize, usize), Role> = HashMap::new();
    for e in cdt.undirected_edges() {
        if !e.is_constraint_edge() {
            continue;
        }
        let [u, v] = e.vertices().map(|v| v.fix().index());
        let key = edge_key(u, v);
        let role = match by_pair.get(&key) {
            Some(&r) => r,
            None => locate_segment(&nodes[u], &nodes[v], input_vertices, segments)?,
        };
        role_of.insert(key, role);
    }

    let mut facet_tags: BTreeMap<String, Vec<[usize; 2]>> = BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let Some(&role) = role_of.get(&edge_key(a, b)) else {
                continue;
            };
            // Orient γ as seen from Ω, everything else as seen from Ω₀.
            let keep = match role {
                Role::Feature(SegmentRole::Gamma) => !is_feature[t],
                _ => true,
            };
            if keep {
                facet_tags.entry(role.tag().to_string()).or_default().push([a, b]);
            }
        }
    }
    for edges in facet_tags.values_mut() {
        edges.sort_unstable();
    }

    let mut element_tags = BTreeMap::new();
    element_tags.insert(REGION_FEATURE.to_string(), feature);
    element_tags.insert(REGION_EXTERIOR.to_string(), exterior);
    let mesh = Mesh::new(nodes, triangles, facet_tags, element_tags)?;
    let feature_area = mesh.region_area(REGION_FEATURE);
    if (feature_area - outline.area()).abs() > 1e-9 * outline.area().max(1e-300) {
        return Err(MeshError::Generation(format!(
            "feature region area {feature_area} differs from the outline area {}",
            outline.area()
        )));
    }
    Ok(mesh)
}

/// Finds the input segment containing a split constraint edge.
fn locate_segment(
    p: &Point,
    q: &Point,
    input_vertices: &[Point],
    segments: &[Segment],
) -> Result<Role, MeshError> {
    let mid = Point::from((p.coords + q.coords) * 0.5);
    let len = (q - p).norm();
    segments
        .iter()
        .map(|&(a, b, r)| {
            let (a, b) = (input_vertices[a], input_vertices[b]);
            let d = point_segment_distance(&mid, &a, &b)
                .max(point_segment_distance(p, &a, &b))
                .max(point_segment_distance(q, &a, &b));
            (d, r)
        })
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .filter(|(d, _)| *d <= 1e-9 * len.max(1e-12))
        .map(|(_, r)| r)
        .ok_or_else(|| {
            MeshError::Generation(format!(
                "constraint edge ({}, {})-({}, {}) matches no input segment",
                p.x, p.y, q.x, q.y
            ))
        })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::mesh::FeatureShape;

    fn shapes() -> Vec<FeatureShape> {
        vec![
            FeatureShape::Disk,
            FeatureShape::Square,
            FeatureShape::Star,
            FeatureShape::CShape,
            FeatureShape::LShape,
        ]
    }

    #[test]
    fn internal_disk_area() {
        let mesh = generate_template(&FeatureGeometry::internal(FeatureShape::Disk, 0.5), 0.05).unwrap();
        let r = 0.5 / (2.0 * PI);
        let exact = PI * r * r;
        let area = mesh.region_area(REGION_FEATURE);
        assert!((area - exact).abs() < 0.01 * exact, "{area} vs {exact}");
        assert!((mesh.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_square_gamma_length() {
        let size = 0.3;
        let mesh = generate_template(&FeatureGeometry::boundary(FeatureShape::Square, size), 0.05).unwrap();
        assert!((mesh.facet_length(TAG_GAMMA) - size).abs() < 1e-12);
        assert!((mesh.facet_length(TAG_GAMMA0) - size / 3.0).abs() < 1e-12);
        assert!((mesh.facet_length(TAG_DIRICHLET) - (4.0 - size / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn triangle_tip_angle_is_kept() {
        let geometry = FeatureGeometry::boundary(FeatureShape::Triangle { alpha_deg: 15.0 }, 0.25);
        let mesh = generate_template(&geometry, 0.05).unwrap();
        let gamma = mesh.facets(TAG_GAMMA);
        // The tip is the γ node with the lowest y coordinate.
        let tip = gamma
            .iter()
            .flatten()
            .copied()
            .min_by(|&a, &b| mesh.nodes()[a].y.total_cmp(&mesh.nodes()[b].y))
            .unwrap();
        let neighbours: Vec<Point> = gamma
            .iter()
            .filter(|e| e.contains(&tip))
            .map(|e| mesh.nodes()[if e[0] == tip { e[1] } else { e[0] }])
            .collect();
        assert_eq!(neighbours.len(), 2);
        let t = mesh.nodes()[tip];
        let (u, v) = (neighbours[0] - t, neighbours[1] - t);
        let angle = u.angle(&v).to_degrees();
        assert!((angle - 15.0).abs() < 0.1, "{angle}");
    }

    #[test]
    fn gamma_edges_respect_relative_size() {
        for shape in shapes() {
            let geometry = FeatureGeometry::internal(shape, 0.25);
            let mesh = generate_template(&geometry, 0.05).unwrap();
            let longest = mesh
                .facets(TAG_GAMMA)
                .iter()
                .map(|&e| mesh.edge_length(e))
                .fold(0.0, f64::max);
            assert!(longest <= 0.05 * 0.25 * (1.0 + 1e-9), "{shape}: {longest}");
            assert!(mesh.min_angle_deg() >= 20.0, "{shape}: {}", mesh.min_angle_deg());
        }
    }

    #[test]
    fn submesh_of_internal_feature_is_an_annulus() {
        let mesh = generate_template(&FeatureGeometry::internal(FeatureShape::Square, 0.2), 0.1).unwrap();
        let sub = mesh.extract_exact_submesh().unwrap().mesh;
        let v = sub.num_nodes() as i64;
        let e = sub.edges().len() as i64;
        let f = sub.num_triangles() as i64;
        assert_eq!(v - e + f, 0);
        assert!((sub.area() + mesh.region_area(REGION_FEATURE) - mesh.area()).abs() < 1e-12);
    }

    #[test]
    fn neumann_top_is_tagged() {
        let geometry = FeatureGeometry::boundary(FeatureShape::Disk, 0.25).with_neumann_top();
        let mesh = generate_template(&geometry, 0.05).unwrap();
        let top = mesh.facet_length(TAG_NEUMANN);
        let gap = 2.0 * 0.25 / PI;
        assert!((top - (1.0 - gap)).abs() < 1e-12, "{top}");
        assert!((mesh.facet_length(TAG_DIRICHLET) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_convex_outer_domain() {
        let outer = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.5, 0.2),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let geometry = FeatureGeometry::internal(FeatureShape::Disk, 0.1).with_outer(outer);
        assert!(matches!(
            generate_template(&geometry, 0.1),
            Err(MeshError::InvalidGeometry(_))
        ));
    }
}
