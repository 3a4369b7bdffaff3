//! Parametric description of the defeatured domain Ω₀, the negative feature
//! F and the boundary partition.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;

use super::{signed_area, MeshError, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureShape {
    Disk,
    Square,
    /// Isosceles notch with opening angle `alpha_deg` at the tip.
    Triangle { alpha_deg: f64 },
    /// Five-pointed star, inner/outer radius 1:2.
    Star,
    /// 180° annular arc closed by two semicircular caps, thickness R/5.
    CShape,
    /// Six-vertex L with arms of width 2u.
    LShape,
}

impl FeatureShape {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureShape::Disk => "disk",
            FeatureShape::Square => "square",
            FeatureShape::Triangle { .. } => "triangle",
            FeatureShape::Star => "star",
            FeatureShape::CShape => "c_shape",
            FeatureShape::LShape => "l_shape",
        }
    }
}

impl fmt::Display for FeatureShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureShape::Triangle { alpha_deg } => write!(f, "triangle({alpha_deg})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for FeatureShape {
    type Err = String;

    /// Accepts `disk`, `square`, `star`, `c_shape`, `l_shape`, `triangle`
    /// (15° opening) and `triangle(<deg>)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "disk" => Ok(FeatureShape::Disk),
            "square" => Ok(FeatureShape::Square),
            "star" => Ok(FeatureShape::Star),
            "c_shape" => Ok(FeatureShape::CShape),
            "l_shape" => Ok(FeatureShape::LShape),
            "triangle" => Ok(FeatureShape::Triangle { alpha_deg: 15.0 }),
            _ => {
                let alpha = s
                    .strip_prefix("triangle(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| format!("unknown feature shape {s:?}"))?;
                let alpha_deg: f64 = alpha
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad triangle angle {alpha:?}"))?;
                if !(alpha_deg > 0.0 && alpha_deg < 180.0) {
                    return Err(format!("triangle angle {alpha_deg} outside (0, 180)"));
                }
                Ok(FeatureShape::Triangle { alpha_deg })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Feature strictly inside Ω₀, barycenter at the centroid of Ω₀.
    Internal,
    /// Feature cut out of the top side of Ω₀, centered on it.
    BoundaryTop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentRole {
    Gamma,
    Gamma0,
}

/// Closed counter-clockwise polygon of ∂F; segment `i` runs from
/// `vertices[i]` to `vertices[i + 1]` (cyclically).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureOutline {
    pub vertices: Vec<Point>,
    pub roles: Vec<SegmentRole>,
}

impl FeatureOutline {
    pub fn segment(&self, i: usize) -> (Point, Point) {
        (self.vertices[i], self.vertices[(i + 1) % self.vertices.len()])
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn length(&self, role: SegmentRole) -> f64 {
        (0..self.len())
            .filter(|&i| self.roles[i] == role)
            .map(|i| {
                let (a, b) = self.segment(i);
                (b - a).norm()
            })
            .sum()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn max_segment(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.segment(i);
                (b - a).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Even-odd point-in-polygon test.
    /// Distance from `p` to the closed outline.
    pub fn distance(&self, p: &Point) -> f64 {
        distance_to_polyline(p, &self.vertices, true)
    }

    pub fn contains(&self, p: &Point) -> bool {
        point_in_polygon(&self.vertices, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGeometry {
    outer: Vec<Point>,
    shape: FeatureShape,
    placement: Placement,
    size: f64,
    segments_per_unit: usize,
    neumann_top: bool,
}

/// One exact piece of ∂F before polygonal discretization.
#[derive(Debug, Clone, Copy)]
enum Piece {
    Line(Point, Point, SegmentRole),
    Arc {
        center: Point,
        radius: f64,
        start: f64,
        sweep: f64,
    },
}

impl FeatureGeometry {
    /// Default curved-boundary resolution, segments per full turn.
    pub const DEFAULT_SEGMENTS: usize = 64;

    fn new(shape: FeatureShape, placement: Placement, size: f64) -> Self {
        FeatureGeometry {
            outer: unit_square(),
            shape,
            placement,
            size,
            segments_per_unit: Self::DEFAULT_SEGMENTS,
            neumann_top: false,
        }
    }

    /// Internal feature of circumference `size` centered in [-½, ½]².
    pub fn internal(shape: FeatureShape, size: f64) -> Self {
        Self::new(shape, Placement::Internal, size)
    }

    /// Boundary feature with |γ| = `size` cut out of the top side of [-½, ½]².
    pub fn boundary(shape: FeatureShape, size: f64) -> Self {
        Self::new(shape, Placement::BoundaryTop, size)
    }

    /// Tags the remaining part of the top side as Neumann boundary.
    pub fn with_neumann_top(mut self) -> Self {
        self.neumann_top = true;
        self
    }

    /// Replaces Ω₀ by a counter-clockwise polygon.
    pub fn with_outer(mut self, outer: Vec<Point>) -> Self {
        self.outer = outer;
        self
    }

    pub fn with_segments_per_unit(mut self, segments: usize) -> Self {
        self.segments_per_unit = segments.max(3);
        self
    }

    pub fn outer(&self) -> &[Point] {
        &self.outer
    }

    pub fn shape(&self) -> FeatureShape {
        self.shape
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn size(&self) -> f64 {
        self.size
    }

    pub fn neumann_top(&self) -> bool {
        self.neumann_top
    }

    /// Index of the outer edge carrying a boundary feature: the highest
    /// horizontal edge.
    pub(crate) fn top_edge(&self) -> Option<usize> {
        let n = self.outer.len();
        (0..n)
            .filter(|&i| {
                let (a, b) = (self.outer[i], self.outer[(i + 1) % n]);
                a.y == b.y && a.x > b.x
            })
            .max_by(|&i, &j| self.outer[i].y.total_cmp(&self.outer[j].y))
    }

    /// Anchor of the feature: the barycenter m_F for internal features, the
    /// midpoint of the top side for boundary features.
    pub fn anchor(&self) -> Result<Point, MeshError> {
        match self.placement {
            Placement::Internal => Ok(polygon_centroid(&self.outer)),
            Placement::BoundaryTop => {
                let i = self.top_edge().ok_or_else(|| {
                    MeshError::InvalidGeometry("outer domain has no horizontal top side".into())
                })?;
                let (a, b) = (self.outer[i], self.outer[(i + 1) % self.outer.len()]);
                Ok(Point::from((a.coords + b.coords) * 0.5))
            }
        }
    }

    /// Exact pieces of ∂F, positioned in Ω₀.
    fn pieces(&self) -> Result<Vec<Piece>, MeshError> {
        let size = self.size;
        if !(size > 0.0 && size.is_finite()) {
            return Err(MeshError::InvalidGeometry(format!("size {size} must be positive")));
        }
        let anchor = self.anchor()?;
        let pt = |x: f64, y: f64| Point::new(anchor.x + x, anchor.y + y);
        let gamma = SegmentRole::Gamma;
        match self.placement {
            Placement::BoundaryTop => {
                let (left, right, mut body): (Point, Point, Vec<Piece>) = match self.shape {
                    FeatureShape::Disk => {
                        let r = size / PI;
                        let arc = Piece::Arc {
                            center: anchor,
                            radius: r,
                            start: PI,
                            sweep: PI,
                        };
                        (pt(-r, 0.0), pt(r, 0.0), vec![arc])
                    }
                    FeatureShape::Square => {
                        let s = size / 3.0;
                        let (l, r) = (pt(-s / 2.0, 0.0), pt(s / 2.0, 0.0));
                        let (bl, br) = (pt(-s / 2.0, -s), pt(s / 2.0, -s));
                        (
                            l,
                            r,
                            vec![
                                Piece::Line(l, bl, gamma),
                                Piece::Line(bl, br, gamma),
                                Piece::Line(br, r, gamma),
                            ],
                        )
                    }
                    FeatureShape::Triangle { alpha_deg } => {
                        let leg = size / 2.0;
                        let half = alpha_deg.to_radians() / 2.0;
                        let (l, r) = (pt(-leg * half.sin(), 0.0), pt(leg * half.sin(), 0.0));
                        let tip = pt(0.0, -leg * half.cos());
                        (l, r, vec![Piece::Line(l, tip, gamma), Piece::Line(tip, r, gamma)])
                    }
                    other => {
                        return Err(MeshError::InvalidGeometry(format!(
                            "{other} is not available as a boundary feature"
                        )))
                    }
                };
                body.push(Piece::Line(right, left, SegmentRole::Gamma0));
                Ok(body)
            }
            Placement::Internal => {
                let raw = match self.shape {
                    FeatureShape::Disk => vec![Piece::Arc {
                        center: Point::origin(),
                        radius: size / TAU,
                        start: 0.0,
                        sweep: TAU,
                    }],
                    FeatureShape::Square => {
                        let h = size / 8.0;
                        closed_lines(&[
                            Point::new(-h, -h),
                            Point::new(h, -h),
                            Point::new(h, h),
                            Point::new(-h, h),
                        ])
                    }
                    FeatureShape::Star => {
                        // Edge between an outer vertex (R) and an inner one (R/2) 36° apart.
                        let edge = (1.25 - (PI / 5.0).cos()).sqrt();
                        let outer_r = size / (10.0 * edge);
                        let verts: Vec<Point> = (0..10)
                            .map(|i| {
                                let r = if i % 2 == 0 { outer_r } else { outer_r / 2.0 };
                                let phi = i as f64 * PI / 5.0;
                                Point::new(r * phi.cos(), r * phi.sin())
                            })
                            .collect();
                        closed_lines(&verts)
                    }
                    FeatureShape::CShape => {
                        let r = size / TAU;
                        let cap = 0.1 * r;
                        vec![
                            Piece::Arc {
                                center: Point::origin(),
                                radius: r,
                                start: PI / 2.0,
                                sweep: PI,
                            },
                            Piece::Arc {
                                center: Point::new(0.0, -0.9 * r),
                                radius: cap,
                                start: -PI / 2.0,
                                sweep: PI,
                            },
                            Piece::Arc {
                                center: Point::origin(),
                                radius: 0.8 * r,
                                start: 1.5 * PI,
                                sweep: -PI,
                            },
                            Piece::Arc {
                                center: Point::new(0.0, 0.9 * r),
                                radius: cap,
                                start: -PI / 2.0,
                                sweep: PI,
                            },
                        ]
                    }
                    FeatureShape::LShape => {
                        let u = size / 34.0;
                        let verts: Vec<Point> = [
                            (4.0, -5.0),
                            (4.0, -3.0),
                            (-1.0, -3.0),
                            (-1.0, 5.0),
                            (-3.0, 5.0),
                            (-3.0, -5.0),
                        ]
                        .iter()
                        .map(|&(x, y)| Point::new(u * x, u * y))
                        .collect();
                        closed_lines(&verts)
                    }
                    FeatureShape::Triangle { .. } => {
                        return Err(MeshError::InvalidGeometry(
                            "triangle notches are boundary features".into(),
                        ))
                    }
                };
                // Move the exact barycenter onto the anchor.
                let fine = discretize(&raw, 4096, f64::INFINITY);
                let shift = anchor - polygon_centroid(&fine.vertices);
                Ok(raw.into_iter().map(|p| translate(p, shift)).collect())
            }
        }
    }

    /// Polygonal outline of ∂F with every segment no longer than
    /// `max_segment`. Curved pieces start at `segments_per_unit` segments per
    /// full turn and double until their chords satisfy the bound.
    pub fn outline(&self, max_segment: f64) -> Result<FeatureOutline, MeshError> {
        if !(max_segment > 0.0) {
            return Err(MeshError::InvalidGeometry("segment length must be positive".into()));
        }
        let pieces = self.pieces()?;
        let mut per_turn = self.segments_per_unit;
        let outline = loop {
            let outline = discretize(&pieces, per_turn, max_segment);
            if outline.max_segment() <= max_segment * (1.0 + 1e-12) || per_turn > 1 << 20 {
                break outline;
            }
            per_turn *= 2;
        };
        self.check_fit(&outline)?;
        Ok(outline)
    }

    fn check_fit(&self, outline: &FeatureOutline) -> Result<(), MeshError> {
        let anchor = self.anchor()?;
        match self.placement {
            Placement::Internal => {
                let diam = super::point_set_diameter(&outline.vertices);
                let dist = distance_to_polyline(&anchor, &self.outer, true);
                if dist <= diam / 2.0 {
                    return Err(MeshError::InvalidGeometry(format!(
                        "dist(m_F, boundary) = {dist} does not exceed diam/2 = {}",
                        diam / 2.0
                    )));
                }
                if outline.vertices.iter().any(|p| !point_in_polygon(&self.outer, p)) {
                    return Err(MeshError::InvalidGeometry("feature leaves the domain".into()));
                }
            }
            Placement::BoundaryTop => {
                let i = self.top_edge().expect("anchor checked the top edge");
                let (a, b) = (self.outer[i], self.outer[(i + 1) % self.outer.len()]);
                let (lo, hi) = (b.x.min(a.x), b.x.max(a.x));
                for p in &outline.vertices {
                    let on_top = p.y == a.y;
                    let inside = point_in_polygon(&self.outer, p);
                    if on_top && (p.x <= lo || p.x >= hi) || !on_top && !inside {
                        return Err(MeshError::InvalidGeometry(format!(
                            "feature vertex ({}, {}) leaves the top side",
                            p.x, p.y
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Nearest point of the exact feature boundary ∂F.
    pub fn project_to_boundary(&self, p: Point) -> Result<Point, MeshError> {
        Ok(nearest_on_pieces(&self.pieces()?, p))
    }

    /// [`Self::project_to_boundary`] with the boundary pieces built once.
    pub fn boundary_projector(&self) -> Result<impl Fn(Point) -> Point, MeshError> {
        let pieces = self.pieces()?;
        Ok(move |p| nearest_on_pieces(&pieces, p))
    }

    /// Center used for angle-parameterized boundary data.
    pub fn theta_center(&self) -> Point {
        self.anchor().unwrap_or_else(|_| Point::origin())
    }
}

fn nearest_on_pieces(pieces: &[Piece], p: Point) -> Point {
    let mut best = (f64::INFINITY, p);
    for piece in pieces {
        let q = match *piece {
            Piece::Line(a, b, _) => {
                let ab = b - a;
                let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                a + ab * t
            }
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let v = p - center;
                let phi = v.y.atan2(v.x);
                // Angle measured from `start` in the sweep direction, in [0, 2π).
                let along = ((phi - start) * sweep.signum()).rem_euclid(TAU);
                if along <= sweep.abs() && v.norm() > 0.0 {
                    center + v * (radius / v.norm())
                } else {
                    let end = start + sweep;
                    let a = center + Vector2::new(start.cos(), start.sin()) * radius;
                    let b = center + Vector2::new(end.cos(), end.sin()) * radius;
                    if (p - a).norm() <= (p - b).norm() {
                        a
                    } else {
                        b
                    }
                }
            }
        };
        let d = (p - q).norm();
        if d < best.0 {
            best = (d, q);
        }
    }
    best.1
}

fn unit_square() -> Vec<Point> {
    vec![
        Point::new(-0.5, -0.5),
        Point::new(0.5, -0.5),
        Point::new(0.5, 0.5),
        Point::new(-0.5, 0.5),
    ]
}

fn closed_lines(verts: &[Point]) -> Vec<Piece> {
    (0..verts.len())
        .map(|i| Piece::Line(verts[i], verts[(i + 1) % verts.len()], SegmentRole::Gamma))
        .collect()
}

fn translate(piece: Piece, shift: Vector2<f64>) -> Piece {
    match piece {
        Piece::Line(a, b, role) => Piece::Line(a + shift, b + shift, role),
        Piece::Arc {
            center,
            radius,
            start,
            sweep,
        } => Piece::Arc {
            center: center + shift,
            radius,
            start,
            sweep,
        },
    }
}

fn discretize(pieces: &[Piece], per_turn: usize, max_segment: f64) -> FeatureOutline {
    let mut vertices = Vec::new();
    let mut roles = Vec::new();
    for piece in pieces {
        match *piece {
            Piece::Line(a, b, role) => {
                let n = ((b - a).norm() / max_segment).ceil().max(1.0) as usize;
                for k in 0..n {
                    vertices.push(a + (b - a) * (k as f64 / n as f64));
                    roles.push(role);
                }
            }
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let n = ((per_turn as f64) * sweep.abs() / TAU).ceil().max(2.0) as usize;
                for k in 0..n {
                    let phi = start + sweep * (k as f64 / n as f64);
                    vertices.push(Point::new(
                        center.x + radius * phi.cos(),
                        center.y + radius * phi.sin(),
                    ));
                    roles.push(SegmentRole::Gamma);
                }
            }
        }
    }
    FeatureOutline { vertices, roles }
}

pub(crate) fn polygon_area(verts: &[Point]) -> f64 {
    let o = Point::origin();
    (0..verts.len())
        .map(|i| signed_area(&o, &verts[i], &verts[(i + 1) % verts.len()]))
        .sum()
}

pub(crate) fn polygon_centroid(verts: &[Point]) -> Point {
    let o = Point::origin();
    let mut area = 0.0;
    let mut moment = Vector2::zeros();
    for i in 0..verts.len() {
        let (a, b) = (verts[i], verts[(i + 1) % verts.len()]);
        let w = signed_area(&o, &a, &b);
        area += w;
        moment += w * (a.coords + b.coords) / 3.0;
    }
    Point::from(moment / area)
}

pub(crate) fn point_in_polygon(verts: &[Point], p: &Point) -> bool {
    let mut inside = false;
    let n = verts.len();
    for i in 0..n {
        let (a, b) = (verts[i], verts[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub(crate) fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

pub(crate) fn distance_to_polyline(p: &Point, verts: &[Point], closed: bool) -> f64 {
    let n = verts.len();
    let segs = if closed { n } else { n.saturating_sub(1) };
    (0..segs)
        .map(|i| point_segment_distance(p, &verts[i], &verts[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_shapes() {
        assert_eq!("disk".parse::<FeatureShape>(), Ok(FeatureShape::Disk));
        assert_eq!(
            "triangle(50)".parse::<FeatureShape>(),
            Ok(FeatureShape::Triangle { alpha_deg: 50.0 })
        );
        assert!("triangle(0)".parse::<FeatureShape>().is_err());
        assert!("hexagon".parse::<FeatureShape>().is_err());
    }

    #[test]
    fn internal_outlines_have_target_circumference() {
        for shape in [
            FeatureShape::Square,
            FeatureShape::Star,
            FeatureShape::LShape,
        ] {
            let g = FeatureGeometry::internal(shape, 0.3);
            let o = g.outline(0.01).unwrap();
            assert!((o.length(SegmentRole::Gamma) - 0.3).abs() < 1e-12, "{shape}");
            assert!(o.area() > 0.0);
            let c = polygon_centroid(&o.vertices);
            assert!(c.coords.norm() < 1e-12, "{shape} centroid {c}");
        }
    }

    #[test]
    fn curved_outlines_converge_to_circumference() {
        let mut prev_err = f64::INFINITY;
        for per_turn in [16, 32, 64, 128] {
            let g = FeatureGeometry::internal(FeatureShape::Disk, 1.0).with_segments_per_unit(per_turn);
            let o = g.outline(1.0).unwrap();
            assert_eq!(o.len(), per_turn);
            let err = 1.0 - o.length(SegmentRole::Gamma);
            assert!(err > 0.0);
            if prev_err.is_finite() {
                // Second order: the deficit drops by four per doubling.
                assert!((prev_err / err - 4.0).abs() < 0.05, "ratio {}", prev_err / err);
            }
            prev_err = err;
        }
        let c = FeatureGeometry::internal(FeatureShape::CShape, 1.0)
            .outline(1e-3)
            .unwrap();
        assert!((c.length(SegmentRole::Gamma) - 1.0).abs() < 1e-4);
        assert!(c.area() > 0.0);
    }

    #[test]
    fn segments_double_until_short_enough() {
        let g = FeatureGeometry::internal(FeatureShape::Disk, 1.0);
        let o = g.outline(1.0 / 200.0).unwrap();
        assert_eq!(o.len(), 256);
        assert!(o.max_segment() <= 1.0 / 200.0);
    }

    #[test]
    fn boundary_square_lengths() {
        let s = 0.1;
        let g = FeatureGeometry::boundary(FeatureShape::Square, 3.0 * s);
        let o = g.outline(0.01).unwrap();
        assert!((o.length(SegmentRole::Gamma) - 3.0 * s).abs() < 1e-14);
        assert!((o.length(SegmentRole::Gamma0) - s).abs() < 1e-14);
        assert!((o.area() - s * s).abs() < 1e-14);
    }

    #[test]
    fn triangle_tip_angle() {
        let g = FeatureGeometry::boundary(FeatureShape::Triangle { alpha_deg: 15.0 }, 0.2);
        let o = g.outline(1.0).unwrap();
        assert_eq!(o.len(), 3);
        let (l, tip) = o.segment(0);
        let (_, r) = o.segment(1);
        let angle = (l - tip).angle(&(r - tip)).to_degrees();
        assert!((angle - 15.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_oversized_features() {
        assert!(FeatureGeometry::internal(FeatureShape::Disk, 4.0)
            .outline(0.1)
            .is_err());
        assert!(FeatureGeometry::boundary(FeatureShape::Square, 3.3)
            .outline(0.1)
            .is_err());
        assert!(FeatureGeometry::boundary(FeatureShape::Star, 0.1)
            .outline(0.1)
            .is_err());
    }
}
