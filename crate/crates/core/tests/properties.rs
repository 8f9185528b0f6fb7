use approx::assert_relative_eq;
use proptest::prelude::*;

use randabc::config::ExperimentConfig;
use randabc::correctors::{weight_function, WeightKind};
use randabc::io::{edge_field_bytes, field_from_bytes, node_field_bytes, FieldData};
use randabc::lattice::{
    apply_operator, charge_to_edge_field, discrete_divergence, discrete_gradient, EdgeField, LatticeBox, NodeField,
};
use randabc::optimality::scaling_fit;

fn lattice_box() -> impl Strategy<Value = LatticeBox> {
    (2usize..=3, 1i64..=4).prop_map(|(d, l)| LatticeBox::cube(d, l).unwrap())
}

fn node_field() -> impl Strategy<Value = NodeField> {
    lattice_box().prop_flat_map(|bx| {
        prop::collection::vec(-1.0f64..1.0, bx.len()).prop_map(move |v| NodeField::from_values(bx, v).unwrap())
    })
}

fn two_fields() -> impl Strategy<Value = (NodeField, NodeField, Vec<f64>)> {
    lattice_box().prop_flat_map(|bx| {
        let n = bx.len();
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(0.2f64..5.0, n * bx.dim()),
        )
            .prop_map(move |(u, v, a)| {
                (NodeField::from_values(bx, u).unwrap(), NodeField::from_values(bx, v).unwrap(), a)
            })
    })
}

fn conductances(bx: LatticeBox, raw: &[f64]) -> EdgeField {
    let mut i = 0;
    EdgeField::from_fn(bx, |_, _| {
        i += 1;
        raw[i - 1]
    })
}

fn zero_boundary(u: &NodeField) -> NodeField {
    let bx = *u.lattice_box();
    NodeField::from_fn(bx, |p| if bx.is_boundary_point(p) { 0.0 } else { u.at(p) })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summation_by_parts(u in node_field(), seed in any::<u64>()) {
        let bx = *u.lattice_box();
        let mut state = seed;
        let h = EdgeField::from_fn(bx, |p, k| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            if p[k] < bx.half_width(k) { (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5 } else { 0.0 }
        });
        let lhs = dot(u.values(), discrete_divergence(&h).values());
        let grad = discrete_gradient(&u);
        let rhs: f64 = (0..bx.dim()).map(|k| dot(grad.dir(k), h.dir(k))).sum();
        prop_assert!((lhs + rhs).abs() < 1e-10);
    }

    #[test]
    fn neutral_charges_have_edge_representatives(f in node_field()) {
        let mean = f.values().iter().sum::<f64>() / f.values().len() as f64;
        let bx = *f.lattice_box();
        let neutral = NodeField::from_values(bx, f.values().iter().map(|v| v - mean).collect()).unwrap();
        let h = charge_to_edge_field(&neutral).unwrap();
        let div = discrete_divergence(&h);
        for (a, b) in div.values().iter().zip(neutral.values()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn operator_is_symmetric_and_positive((u, v, raw) in two_fields(), mass in 0.0f64..1.0) {
        let a = conductances(*u.lattice_box(), &raw);
        let (u, v) = (zero_boundary(&u), zero_boundary(&v));
        let au = apply_operator(&a, &u, mass).unwrap();
        let av = apply_operator(&a, &v, mass).unwrap();
        let (uav, vau) = (dot(u.values(), av.values()), dot(v.values(), au.values()));
        prop_assert!((uav - vau).abs() < 1e-10 * (1.0 + uav.abs()));
        prop_assert!(dot(u.values(), au.values()) >= -1e-12);
    }

    #[test]
    fn weights_are_normalized(dim in 2usize..=3, l in 2i64..=12, bump in any::<bool>()) {
        let kind = if bump { WeightKind::Bump } else { WeightKind::Triangular };
        let w = weight_function(dim, l, kind).unwrap();
        assert_relative_eq!(w.values().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        prop_assert!(w.values().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn fit_recovers_exact_power_laws(slope in -6.0f64..2.0, c in 0.01f64..100.0, n in 3usize..8) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| {
            let l = 4.0 * 2f64.powi(i as i32);
            (l, c * l.powf(slope))
        }).collect();
        let fit = scaling_fit(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!(fit.stderr < 1e-8);
    }

    #[test]
    fn config_text_round_trips(
        dim in 2usize..=3,
        grid in prop::collection::btree_set(2i64..40, 2..5),
        seeds in 1u64..10,
        eps in 0.01f64..0.5,
    ) {
        let grid: Vec<String> = grid.iter().map(|l| l.to_string()).collect();
        let text = format!("dim = {dim}\nL = {}\nseeds = {seeds}\nepsilon = {eps}\n", grid.join(", "));
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(cfg.to_text(), again.to_text());
    }

    #[test]
    fn binary_fields_round_trip(u in node_field()) {
        match field_from_bytes(&node_field_bytes(&u)).unwrap() {
            FieldData::Node(v) => prop_assert_eq!(v, u.clone()),
            FieldData::Edge(_) => prop_assert!(false, "kind changed"),
        }
        let h = discrete_gradient(&u);
        match field_from_bytes(&edge_field_bytes(&h)).unwrap() {
            FieldData::Edge(g) => {
                for k in 0..h.lattice_box().dim() {
                    prop_assert_eq!(g.dir(k), h.dir(k));
                }
            }
            FieldData::Node(_) => prop_assert!(false, "kind changed"),
        }
    }
}
