use proptest::prelude::*;

use polyfrac::contact::{face_status, ContactStatus};
use polyfrac::dofs::{project_cone_vec, DirichletSpec, MultiplierVector};
use polyfrac::geometry::{Mat3, Point, Vec3};
use polyfrac::harness::{manufactured_mesh, Family};
use polyfrac::reconstruction::{barycentric_weights, Discretization};
use polyfrac::verification::{eoc, interpolate_displacement, LinearField};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        Just(Family::Cartesian),
        Just(Family::Tet),
        Just(Family::HexaCut),
        Just(Family::HexaBary)
    ]
}

fn disc(family: Family, amplitude: f64, seed: u64) -> Discretization {
    let mesh = manufactured_mesh(family, 2, amplitude, seed).unwrap();
    Discretization::new(mesh, &DirichletSpec::whole_boundary()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn planar_cells_and_faces_are_closed(family in family(), amplitude in 0.0f64..0.25, seed in 0u64..1000) {
        let mesh = manufactured_mesh(family, 2, amplitude, seed).unwrap();
        for (k, c) in mesh.cells.iter().enumerate() {
            if c.faces.iter().all(|&f| mesh.faces[f].planar) {
                prop_assert!(mesh.closure_defect(k).norm() <= 1e-12 * c.diameter.powi(2));
            }
        }
        for f in mesh.faces.iter().filter(|f| f.planar) {
            let s: Vec3 = f.edge_lengths.iter().zip(&f.edge_normals).map(|(l, n)| n * *l).sum();
            prop_assert!(s.norm() <= 1e-12 * f.diameter);
        }
    }

    #[test]
    fn operator_weights_are_barycentric(family in family(), amplitude in 0.0f64..0.25, seed in 0u64..1000) {
        let d = disc(family, amplitude, seed);
        for (fi, f) in d.mesh.faces.iter().enumerate() {
            let w = &d.ops.faces[fi].weights;
            let x: Vec3 = f.vertices.iter().zip(w).map(|(&s, w)| d.mesh.vertices[s] * *w).sum();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            prop_assert!((x - f.centroid).norm() <= 1e-12 * f.diameter);
        }
        for (k, c) in d.mesh.cells.iter().enumerate() {
            let w = &d.ops.cells[k].mean[..c.vertices.len()];
            let x: Vec3 = c.vertices.iter().zip(w).map(|(&s, w)| d.mesh.vertices[s] * *w).sum();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            prop_assert!((x - c.centroid).norm() <= 1e-12 * c.diameter);
        }
    }

    #[test]
    fn nodal_blocks_are_shared_away_from_the_fracture(family in family(), seed in 0u64..1000) {
        let d = disc(family, 0.2, seed);
        let mut on_fracture = vec![false; d.mesh.vertices.len()];
        for ff in &d.mesh.fracture_faces {
            for &s in &d.mesh.faces[ff.face].vertices {
                on_fracture[s] = true;
            }
        }
        for s in (0..d.mesh.vertices.len()).filter(|&s| !on_fracture[s]) {
            let blocks: Vec<usize> = d
                .mesh
                .vertex_cells(s)
                .iter()
                .map(|&k| d.dofs.block(k, d.mesh.cells[k].local_vertex(s).unwrap()))
                .collect();
            prop_assert!(blocks.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn stabilisation_vanishes_on_linear_fields(
        family in family(),
        seed in 0u64..1000,
        a in prop::array::uniform9(-1.0f64..1.0),
        w in prop::collection::vec(-1.0f64..1.0, 1..2000),
    ) {
        let d = disc(family, 0.2, seed);
        let field = LinearField::new(3, Mat3::from_row_slice(&a), Vec3::new(0.3, -0.1, 0.2), 1.0, 1.0);
        let q = interpolate_displacement(&d, &field);
        let mut v = d.dofs.zeros();
        for (i, x) in v.free.iter_mut().enumerate() {
            *x = w[i % w.len()];
        }
        for k in 0..d.mesh.cells.len() {
            prop_assert!(d.stabilisation(k, &q, &v).abs() <= 1e-12);
        }
    }

    #[test]
    fn least_norm_weights_reproduce_the_target(
        pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 4..12),
        mix in prop::collection::vec(0.0f64..1.0, 12),
    ) {
        let pts: Vec<Point> = pts.into_iter().map(Point::from).collect();
        let total: f64 = mix[..pts.len()].iter().sum::<f64>().max(1e-3);
        let target = pts.iter().zip(&mix).map(|(p, m)| p * (m / total)).sum::<Vec3>();
        prop_assume!(mix[..pts.len()].iter().sum::<f64>() >= 1e-3);
        let w = barycentric_weights(&pts, &target).unwrap();
        let x: Vec3 = pts.iter().zip(&w).map(|(p, w)| p * *w).sum();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        prop_assert!((x - target).norm() <= 1e-10);
    }
}

proptest! {
    #[test]
    fn multiplier_splits_into_normal_and_tangential(v in prop::array::uniform3(-5.0f64..5.0), theta in 0.0f64..6.3, phi in 0.0f64..3.2) {
        let n = Vec3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos());
        let m = MultiplierVector { values: vec![Vec3::from(v)], normals: vec![n] };
        let back = n * m.normal_part(0) + m.tangential_part(0);
        prop_assert!((back - Vec3::from(v)).norm() <= 1e-13 * (1.0 + back.norm()));
        prop_assert!(m.tangential_part(0).dot(&n).abs() <= 1e-13 * (1.0 + back.norm()));
    }

    #[test]
    fn status_matches_the_cone_projection(xn in -1.0f64..1.0, xt in 0.0f64..2.0, g in 0.01f64..2.0) {
        let n = Vec3::z();
        let xi = n * xn + Vec3::x() * xt;
        let p = project_cone_vec(xi, n, g);
        let pt = p - n * p.dot(&n);
        match face_status(xn, xt, g) {
            ContactStatus::Open => prop_assert!(p.dot(&n) == 0.0 && xn <= 0.0),
            ContactStatus::Stick => prop_assert!((p - xi).norm() <= 1e-14 && xt <= g),
            ContactStatus::Slip => prop_assert!((pt.norm() - g).abs() <= 1e-12 && xt > g && xn > 0.0),
        }
    }

    #[test]
    fn eoc_recovers_power_laws(p in 0.5f64..3.0, c in 0.1f64..10.0, h0 in 0.05f64..1.0) {
        let h = [h0, h0 / 2.0, h0 / 3.0, h0 / 5.0];
        let e: Vec<f64> = h.iter().map(|h| c * h.powf(p)).collect();
        for r in eoc(&h, &e) {
            prop_assert!((r - p).abs() <= 1e-10);
        }
    }
}
