use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use proptest::prelude::*;

use defeatr::mesh::{
    generate_template_with, parse_msh, FeatureGeometry, FeatureShape, Mesh, MeshOptions, REGION_EXTERIOR,
    REGION_FEATURE, TAG_GAMMA,
};

fn coarse(h: f64) -> MeshOptions {
    MeshOptions {
        h,
        far_field: 0.125,
        ..Default::default()
    }
}

fn shape_strategy() -> impl Strategy<Value = FeatureShape> {
    prop_oneof![
        Just(FeatureShape::Disk),
        Just(FeatureShape::Square),
        Just(FeatureShape::Star),
        Just(FeatureShape::CShape),
        Just(FeatureShape::LShape),
        (20.0..60.0f64).prop_map(|alpha_deg| FeatureShape::Triangle { alpha_deg }),
    ]
}

fn geometry_strategy() -> impl Strategy<Value = FeatureGeometry> {
    (shape_strategy(), 0.15..0.6f64, any::<bool>()).prop_map(|(shape, size, boundary)| match shape {
        FeatureShape::Triangle { .. } => FeatureGeometry::boundary(shape, size),
        _ if boundary && matches!(shape, FeatureShape::Disk | FeatureShape::Square) => {
            FeatureGeometry::boundary(shape, size)
        }
        _ => FeatureGeometry::internal(shape, size),
    })
}

/// Writes `mesh` as MSH 2.2 ASCII with one physical group per tag.
fn to_msh(mesh: &Mesh) -> String {
    let mut s = String::from("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let mut groups: Vec<(usize, &str, usize)> = Vec::new();
    for name in mesh.facet_tags().keys() {
        groups.push((1, name, groups.len() + 1));
    }
    for name in mesh.element_tags().keys() {
        groups.push((2, name, groups.len() + 1));
    }
    let _ = writeln!(s, "$PhysicalNames\n{}", groups.len());
    for (dim, name, id) in &groups {
        let _ = writeln!(s, "{dim} {id} \"{name}\"");
    }
    s.push_str("$EndPhysicalNames\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.num_nodes());
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e} 0", i + 1, p.x, p.y);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let mut elements = Vec::new();
    for (dim, name, id) in &groups {
        if *dim == 1 {
            for [a, b] in mesh.facets(name) {
                elements.push(format!("1 2 {id} {id} {} {}", a + 1, b + 1));
            }
        } else {
            for &t in mesh.region(name) {
                let [a, b, c] = mesh.triangles()[t];
                elements.push(format!("2 2 {id} {id} {} {} {}", a + 1, b + 1, c + 1));
            }
        }
    }
    let _ = writeln!(s, "{}", elements.len());
    for (k, e) in elements.iter().enumerate() {
        let _ = writeln!(s, "{} {e}", k + 1);
    }
    s.push_str("$EndElements\n");
    s
}

/// Counts element lines per physical name by scanning the text directly.
fn scan_counts(text: &str) -> BTreeMap<String, usize> {
    let mut names = BTreeMap::new();
    let mut counts = BTreeMap::new();
    let mut section = "";
    for line in text.lines() {
        if line.starts_with('$') {
            section = line;
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match section {
            "$PhysicalNames" if fields.len() == 3 => {
                names.insert(fields[1].to_string(), fields[2].trim_matches('"').to_string());
            }
            "$Elements" if fields.len() > 4 => {
                let name = names[fields[3]].clone();
                *counts.entry(name).or_insert(0) += 1;
            }
            _ => {}
        }
    }
    counts
}

/// Triangles as sorted vertex coordinates rounded to 1e-9.
fn triangle_multiset(mesh: &Mesh) -> Vec<[(i64, i64); 3]> {
    let key = |x: f64| (x * 1e9).round() as i64;
    let mut out: Vec<[(i64, i64); 3]> = (0..mesh.num_triangles())
        .map(|t| {
            let mut v = mesh.triangle_points(t).map(|p| (key(p.x), key(p.y)));
            v.sort_unstable();
            v
        })
        .collect();
    out.sort_unstable();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn msh_tags_match_text_scan(geometry in geometry_strategy()) {
        let mesh = generate_template_with(&geometry, &coarse(0.2)).unwrap();
        let text = to_msh(&mesh);
        let parsed = parse_msh(&text).unwrap();
        let counts = scan_counts(&text);
        prop_assert_eq!(parsed.num_triangles(), mesh.num_triangles());
        for (tag, facets) in parsed.facet_tags() {
            prop_assert_eq!(facets.len(), counts[tag]);
        }
        for (tag, tris) in parsed.element_tags() {
            prop_assert_eq!(tris.len(), counts[tag]);
        }
        prop_assert!(parsed.validate().is_ok());
    }

    #[test]
    fn refine_commutes_with_extract(geometry in geometry_strategy()) {
        let mesh = generate_template_with(&geometry, &coarse(0.25)).unwrap();
        let a = mesh.refine_uniform().extract_exact_submesh().unwrap().mesh;
        let b = mesh.extract_exact_submesh().unwrap().mesh.refine_uniform();
        prop_assert_eq!(triangle_multiset(&a), triangle_multiset(&b));
    }

    #[test]
    fn areas_add_up(geometry in geometry_strategy()) {
        let mesh = generate_template_with(&geometry, &coarse(0.2)).unwrap();
        let sub = mesh.extract_exact_submesh().unwrap().mesh;
        let total = sub.area() + mesh.region_area(REGION_FEATURE);
        prop_assert!((total - mesh.area()).abs() < 1e-12);
        prop_assert!((mesh.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_preserves_area_and_tags(geometry in geometry_strategy()) {
        let mesh = generate_template_with(&geometry, &coarse(0.25)).unwrap();
        let fine = mesh.refine_uniform();
        prop_assert_eq!(fine.num_triangles(), 4 * mesh.num_triangles());
        prop_assert!((fine.area() - mesh.area()).abs() < 1e-12);
        for (tag, facets) in mesh.facet_tags() {
            prop_assert_eq!(fine.facets(tag).len(), 2 * facets.len());
        }
        prop_assert!(fine.validate().is_ok());
    }
}

#[test]
fn internal_submesh_is_an_annulus() {
    let mesh = generate_template_with(&FeatureGeometry::internal(FeatureShape::Star, 0.4), &coarse(0.1)).unwrap();
    let sub = mesh.extract_exact_submesh().unwrap().mesh;
    let euler = sub.num_nodes() as i64 - sub.edges().len() as i64 + sub.num_triangles() as i64;
    assert_eq!(euler, 0);
}

#[test]
fn gamma_edges_bound_the_submesh() {
    for shape in [FeatureShape::Disk, FeatureShape::Square, FeatureShape::Triangle { alpha_deg: 15.0 }] {
        let mesh = generate_template_with(&FeatureGeometry::boundary(shape, 0.25), &coarse(0.1)).unwrap();
        let sub = mesh.extract_exact_submesh().unwrap().mesh;
        let boundary: std::collections::HashSet<[usize; 2]> = sub
            .boundary_edges()
            .into_iter()
            .map(|[a, b]| [a.min(b), a.max(b)])
            .collect();
        for &[a, b] in sub.facets(TAG_GAMMA) {
            assert!(boundary.contains(&[a.min(b), a.max(b)]), "{shape}: γ edge {a}-{b} is interior");
        }
        assert!(sub.region(REGION_EXTERIOR).len() == sub.num_triangles());
    }
}

#[test]
fn disk_isotropy_tends_to_four_over_pi() {
    let geometry = FeatureGeometry::internal(FeatureShape::Disk, 0.5);
    let mesh = generate_template_with(&geometry, &coarse(0.02)).unwrap();
    let ratio = defeatr::mesh::feature_isotropy_ratio(&geometry, &mesh).unwrap();
    assert!((ratio - 4.0 / PI).abs() < 5e-3, "ratio {ratio}");
}

#[test]
fn disk_perimeter_converges_quadratically() {
    let r = 0.5 / (2.0 * PI);
    let mut errors = Vec::new();
    for segments in [16, 32, 64] {
        let outline = FeatureGeometry::internal(FeatureShape::Disk, 0.5)
            .with_segments_per_unit(segments)
            .outline(1.0)
            .unwrap();
        let perimeter: f64 = (0..outline.len())
            .map(|i| {
                let (a, b) = outline.segment(i);
                (b - a).norm()
            })
            .sum();
        errors.push((2.0 * PI * r - perimeter).abs());
    }
    for w in errors.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((rate - 2.0).abs() < 0.1, "rate {rate} from {errors:?}");
    }
}
