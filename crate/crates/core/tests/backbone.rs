use iolrt_core::backbone::{disparity_filter_matrix, GraphFormat, Sidedness};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i:02}")).collect()
}

fn matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), -2.0..2.0f64], n * n)
        .prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
}

fn edge_set(m: &DMatrix<f64>, p: f64, s: Sidedness) -> Vec<(usize, usize)> {
    disparity_filter_matrix(m, &labels(m.nrows()), p, s)
        .unwrap()
        .edges
        .iter()
        .map(|e| (e.from, e.to))
        .collect()
}

fn support(m: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = m.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn retained_edges_grow_with_p(m in matrix(6), a in 0.01..0.98f64, b in 0.01..0.98f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for s in [Sidedness::TwoSided, Sidedness::OutOnly] {
            let small = edge_set(&m, lo, s);
            let large = edge_set(&m, hi, s);
            prop_assert!(small.iter().all(|e| large.contains(e)));
        }
    }

    #[test]
    fn invariant_under_positive_scaling(m in matrix(5), c in 0.001..1000.0f64, p in 0.05..0.95f64) {
        let scaled = &m * c;
        prop_assert_eq!(edge_set(&m, p, Sidedness::TwoSided), edge_set(&scaled, p, Sidedness::TwoSided));
    }

    #[test]
    fn p_near_one_keeps_full_support(m in matrix(5)) {
        // sector strengths are strictly positive, so every α < 1 unless the
        // edge carries all of a node's weight (degree one, preserved)
        let mut kept = edge_set(&m, 1.0 - 1e-12, Sidedness::TwoSided);
        kept.sort();
        let mut full = support(&m);
        full.sort();
        prop_assert_eq!(kept, full);
    }
}

#[test]
fn graphml_round_trip() {
    let m = DMatrix::from_row_slice(
        3,
        3,
        &[0.5, 0.123456789012345, -0.7, 0.2, 0.0, 0.0, 1e-9, 0.4, 0.0],
    );
    let codes = vec!["C10-C12".to_string(), "F".to_string(), "A&B".to_string()];
    let g = disparity_filter_matrix(&m, &codes, 0.9, Sidedness::TwoSided)
        .unwrap()
        .with_responses(&[1.5, -2.0, 0.25])
        .unwrap();
    let mut buf = Vec::new();
    g.export(GraphFormat::GraphMl, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();

    let keys: std::collections::HashMap<&str, &str> = doc
        .descendants()
        .filter(|n| n.has_tag_name("key"))
        .map(|n| (n.attribute("id").unwrap(), n.attribute("attr.name").unwrap()))
        .collect();
    let data = |n: roxmltree::Node, name: &str| -> Option<String> {
        n.children()
            .filter(|c| c.has_tag_name("data"))
            .find(|c| keys[c.attribute("key").unwrap()] == name)
            .map(|c| c.text().unwrap_or("").to_string())
    };

    let nodes: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("node")).collect();
    assert_eq!(nodes.len(), 3);
    for (node, expected) in nodes.iter().zip(&g.nodes) {
        assert_eq!(node.attribute("id").unwrap(), expected.code);
        assert_eq!(data(*node, "group").unwrap(), expected.group.label());
        let w: f64 = data(*node, "incoming_weight").unwrap().parse().unwrap();
        assert_eq!(w, expected.incoming_weight);
        let r: f64 = data(*node, "response").unwrap().parse().unwrap();
        assert_eq!(Some(r), expected.response);
    }
    let edges: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("edge")).collect();
    assert_eq!(edges.len(), g.edges.len());
    for (edge, expected) in edges.iter().zip(&g.edges) {
        assert_eq!(edge.attribute("source").unwrap(), g.nodes[expected.from].code);
        assert_eq!(edge.attribute("target").unwrap(), g.nodes[expected.to].code);
        let w: f64 = data(*edge, "weight").unwrap().parse().unwrap();
        assert_eq!(w, expected.weight);
        let a: f64 = data(*edge, "alpha").unwrap().parse().unwrap();
        assert_eq!(a, expected.alpha);
        let s: i8 = data(*edge, "sign").unwrap().parse().unwrap();
        assert_eq!(s, expected.sign);
        let p: bool = data(*edge, "preserved").unwrap().parse().unwrap();
        assert_eq!(p, expected.preserved);
    }
}
