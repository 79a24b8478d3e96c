use msgfem::geometry::*;
use msgfem::Error;
use proptest::prelude::*;

fn domain(w: f64, h: f64) -> Domain<f64> {
    Domain::new(w, h).unwrap()
}

#[test]
fn full_size_mesh_counts() {
    let m = build_mesh(domain(20.0, 10.0), 2000, 1000, ElementOrder::Linear).unwrap();
    assert_eq!(m.n_elements(), 2_000_000);
    assert_eq!(m.n_nodes(), 2001 * 1001);
}

#[test]
fn quadratic_mesh_has_shared_lattice() {
    let m = build_mesh(domain(2.0, 1.0), 2, 1, ElementOrder::Quadratic).unwrap();
    assert_eq!(m.n_elements(), 2);
    assert_eq!(m.n_nodes(), 5 * 3);
    let a = m.element(0);
    let b = m.element(1);
    // Right edge of element 0 is the left edge of element 1.
    assert_eq!(a[1], b[0]);
    assert_eq!(a[2], b[3]);
    assert_eq!(a[5], b[7]);
}

#[test]
fn hundred_disjoint_inclusions() {
    let inc = generate_inclusions(domain(20.0, 10.0), (10, 10), 0.35, 0.1, 42).unwrap();
    assert_eq!(inc.circles.len(), 100);
    assert!(inc.min_gap() > 0.0);
    for c in &inc.circles {
        assert!(c.radius >= 0.35 * 0.9 && c.radius <= 0.35 * 1.1);
    }
    let again = generate_inclusions(domain(20.0, 10.0), (10, 10), 0.35, 0.1, 42).unwrap();
    assert_eq!(inc, again);
    let other = generate_inclusions(domain(20.0, 10.0), (10, 10), 0.35, 0.1, 43).unwrap();
    assert_ne!(inc.circles, other.circles);
}

#[test]
fn coefficient_values_and_inclusion_fraction() {
    let d = domain(20.0, 10.0);
    let inc = generate_inclusions(d, (10, 10), 0.35, 0.1, 42).unwrap();
    let m = build_mesh(d, 200, 100, ElementOrder::Linear).unwrap();
    let uniform = assign_coefficients(&m, &inc, 1.0, 1.0).unwrap();
    assert!(uniform.values().iter().all(|&a| a == 1.0));

    let c = assign_coefficients(&m, &inc, 1.0, 100.0).unwrap();
    assert!(c.values().iter().all(|&a| a == 1.0 || a == 100.0));
    let (hx, hy) = m.element_size();
    let classified: f64 = (0..m.n_elements()).filter(|&e| c.is_inclusion(e)).count() as f64 * hx * hy;
    let exact = inc.total_area();
    assert!((classified - exact).abs() / exact < 0.10, "classified {classified} exact {exact}");

    let swapped = assign_coefficients(&m, &inc, 100.0, 1.0).unwrap();
    for e in 0..m.n_elements() {
        assert_eq!(swapped.is_inclusion(e), c.is_inclusion(e));
        assert_eq!(swapped.value(e) * c.value(e), 100.0);
    }
    assert!(matches!(assign_coefficients(&m, &inc, 0.0, 1.0), Err(Error::Validation(_))));
}

#[test]
fn fitted_mesh_keeps_midlines_and_classifies_by_centroid() {
    let d = domain(10.0, 5.0);
    let inc = generate_inclusions(d, (5, 5), 0.35, 0.1, 42).unwrap();
    let m = MeshBuilder::new(d, 200, 100).fit_to(&inc).build().unwrap();
    assert!(m.is_fitted());
    assert!(msgfem::fem::min_jacobian(&m) > 0.0);
    // The ring of elements bent onto each circle puts nodes exactly on it.
    let c0 = inc.circles[0];
    let on_circle = m
        .nodes()
        .iter()
        .filter(|p| {
            let r = ((p[0] - c0.center[0]).powi(2) + (p[1] - c0.center[1]).powi(2)).sqrt();
            (r - c0.radius).abs() < 1e-12
        })
        .count();
    assert!(on_circle >= 8);
    // Cover lines on block midlines and block edges stay aligned.
    let rects = [d.centered(6.0, 3.0), d.centered(8.0, 4.0), d.centered(4.0, 2.0), d.centered(2.0, 1.0)];
    for r in rects {
        region_index(&m, RegionShape::Rect(r)).unwrap();
    }
    // A line through the bent part of a block is rejected.
    let bent = Rect::new(0.9, 0.3, 9.1, 4.7);
    assert!(matches!(region_index(&m, RegionShape::Rect(bent)), Err(Error::Alignment(_))));
    // Centroid classification area converges to the circle area.
    let coeff = assign_coefficients(&m, &inc, 1.0, 100.0).unwrap();
    let mut area = 0.0;
    for e in 0..m.n_elements() {
        if coeff.is_inclusion(e) {
            let c = m.element_coords(e);
            let mut a = 0.0;
            for k in 0..4 {
                let (p, q) = (c[k], c[(k + 1) % 4]);
                a += p[0] * q[1] - q[0] * p[1];
            }
            area += 0.5 * a;
        }
    }
    let exact = inc.total_area();
    assert!((area - exact).abs() / exact < 0.01, "fitted area {area} vs {exact}");
}

#[test]
fn fitting_requires_square_elements() {
    let d = domain(10.0, 5.0);
    let inc = generate_inclusions(d, (5, 5), 0.35, 0.1, 42).unwrap();
    let r = MeshBuilder::new(d, 200, 60).fit_to(&inc).build();
    assert!(matches!(r, Err(Error::Alignment(_))));
}

#[test]
fn region_counts() {
    let d = domain(20.0, 10.0);
    let m = build_mesh(d, 20, 10, ElementOrder::Linear).unwrap();
    let whole = RegionIndex::whole(&m);
    assert_eq!(whole.elements().len(), 200);
    assert_eq!(whole.boundary_loops()[0].len(), 60);

    let star = region_index(&m, RegionShape::Rect(d.centered(16.0, 8.0))).unwrap();
    assert_eq!(star.elements().len(), 16 * 8);
    assert_eq!(star.n_nodes(), 17 * 9);
    assert_eq!(star.interior_nodes().len(), 15 * 7);

    let hole = d.centered(4.0, 2.0);
    let ann = region_index(&m, RegionShape::Annulus { outer: d.rect(), hole }).unwrap();
    let inner = region_index(&m, RegionShape::Rect(hole)).unwrap();
    assert_eq!(ann.elements().len() + inner.elements().len(), whole.elements().len());
    assert_eq!(ann.boundary_loops().len(), 2);
    assert_eq!(ann.boundary_loops()[1].len(), 12);
}

#[test]
fn nested_regions_are_subsets() {
    let d = domain(20.0, 10.0);
    let m = build_mesh(d, 40, 20, ElementOrder::Linear).unwrap();
    let w = region_index(&m, RegionShape::Rect(d.centered(12.0, 6.0))).unwrap();
    let ws = region_index(&m, RegionShape::Rect(d.centered(16.0, 8.0))).unwrap();
    assert!(w.is_subset_of(&ws));
    assert!(!ws.is_subset_of(&w));
    let a = region_index(&m, RegionShape::Annulus { outer: d.rect(), hole: d.centered(8.0, 4.0) }).unwrap();
    let a_star = region_index(&m, RegionShape::Annulus { outer: d.rect(), hole: d.centered(4.0, 2.0) }).unwrap();
    assert!(a.is_subset_of(&a_star));
}

#[test]
fn boundary_loop_is_counterclockwise() {
    let d = domain(4.0, 2.0);
    let m = build_mesh(d, 4, 2, ElementOrder::Linear).unwrap();
    let r = RegionIndex::whole(&m);
    let lp = &r.boundary_loops()[0];
    let mut area2 = 0.0;
    for k in 0..lp.len() {
        let p = m.node(lp[k]);
        let q = m.node(lp[(k + 1) % lp.len()]);
        area2 += p[0] * q[1] - q[0] * p[1];
    }
    assert!((area2 / 2.0 - 8.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn mesh_build_is_deterministic(nx in 1usize..12, ny in 1usize..12, quad in proptest::bool::ANY) {
        let order = if quad { ElementOrder::Quadratic } else { ElementOrder::Linear };
        let a = build_mesh(domain(3.0, 2.0), nx, ny, order).unwrap();
        let b = build_mesh(domain(3.0, 2.0), nx, ny, order).unwrap();
        prop_assert_eq!(a.nodes(), b.nodes());
        prop_assert_eq!(a.n_elements(), nx * ny);
        let p = order.degree();
        prop_assert_eq!(a.n_nodes(), (p * nx + 1) * (p * ny + 1));
    }

    #[test]
    fn inclusions_separated(rows in 1usize..6, cols in 1usize..6, var in 0.0f64..0.3, seed in 0u64..1000) {
        let d = domain(10.0, 5.0);
        let pitch = (10.0 / cols as f64).min(5.0 / rows as f64);
        let r = 0.45 * pitch / (1.0 + var);
        let inc = generate_inclusions(d, (rows, cols), r, var, seed).unwrap();
        prop_assert!(inc.min_gap() > 0.0);
        prop_assert_eq!(inc.circles.len(), rows * cols);
    }
}
