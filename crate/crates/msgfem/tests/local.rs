use msgfem::fem::*;
use msgfem::geometry::*;
use msgfem::local::*;
use msgfem::pou::*;
use msgfem::Error;
use proptest::prelude::*;
use std::sync::Arc;

struct Setup {
    mesh: Arc<Mesh<f64>>,
    op: Operator<f64>,
    cover: Cover<f64>,
    bc: BoundaryConditions<f64>,
}

fn setup(nx: usize, contrast: Option<(f64, f64)>, bc: BoundaryConditions<f64>) -> Setup {
    let d = Domain::new(10.0, 5.0).unwrap();
    let mesh = Arc::new(build_mesh(d, nx, nx / 2, ElementOrder::Linear).unwrap());
    let coeff = match contrast {
        Some((am, ai)) => {
            let inc = generate_inclusions(d, (5, 5), 0.35, 0.1, 42).unwrap();
            assign_coefficients(&mesh, &inc, am, ai).unwrap()
        }
        None => CoefficientField::uniform(&mesh, 1.0).unwrap(),
    };
    let op = Operator::new(mesh.clone(), Arc::new(coeff)).unwrap();
    let dims = CoverDims { inner: (6.0, 3.0), inner_star: (8.0, 4.0), hole: (4.0, 2.0), hole_star: (2.0, 1.0) };
    let cover = build_two_patch_cover(&mesh, &bc, dims).unwrap();
    Setup { mesh, op, cover, bc }
}

fn profile_sums(chain: &BoundaryChain, hats: &[BoundaryHat<f64>]) -> Vec<f64> {
    let mut s = vec![0.0; chain.nodes.len()];
    for h in hats {
        for &(g, v) in &h.profile {
            s[chain.nodes.iter().position(|&n| n == g).unwrap()] += v;
        }
    }
    s
}

#[test]
fn closed_loop_of_twelve() {
    let chain = BoundaryChain { nodes: (100..112).collect(), closed: true };
    let hats = chain_hats::<f64>(&chain, 0, 0, 3).unwrap();
    assert_eq!(hats.len(), 6);
    assert!(profile_sums(&chain, &hats).iter().all(|&s| (s - 1.0).abs() < 1e-15));
    for h in &hats {
        assert_eq!(h.profile.len(), 3);
    }
    let ind = chain_hats::<f64>(&chain, 0, 0, 1).unwrap();
    assert_eq!(ind.len(), 12);
    for (q, h) in ind.iter().enumerate() {
        assert_eq!(h.profile, vec![(100 + q, 1.0)]);
    }
    assert!(matches!(chain_hats::<f64>(&chain, 0, 0, 2), Err(Error::Width { .. })));
    assert!(matches!(chain_hats::<f64>(&chain, 0, 0, 13), Err(Error::Width { width: 13, chain_len: 12 })));
}

#[test]
fn chains_of_cover_patches() {
    let s = setup(40, None, BoundaryConditions::benchmark());
    let (c1, j1) = boundary_chains(&s.mesh, &s.cover.patches[0].omega_star);
    assert_eq!(c1.len(), 1);
    assert!(c1[0].closed && j1.is_empty());
    assert_eq!(c1[0].nodes.len(), 2 * (32 + 16));
    let (c2, j2) = boundary_chains(&s.mesh, &s.cover.patches[1].omega_star);
    assert_eq!(c2.len(), 1);
    assert!(c2[0].closed && j2.is_empty());
    assert_eq!(c2[0].nodes.len(), 2 * (8 + 4));

    // A rectangle touching the left side gives one open chain and two junctions.
    let r = region_index(&s.mesh, RegionShape::Rect(Rect::new(0.0, 1.0, 5.0, 4.0))).unwrap();
    let (c3, j3) = boundary_chains(&s.mesh, &r);
    assert_eq!(c3.len(), 1);
    assert!(!c3[0].closed);
    assert_eq!(c3[0].nodes.len(), 20 + 12 + 20 - 1);
    assert_eq!(j3.len(), 2);
}

#[test]
fn cost_law_counts() {
    for n in [12usize, 100, 480, 3840] {
        for k in (1..=25).step_by(2) {
            let m = hat_count(n, k, true);
            assert_eq!(m, n.div_ceil(k.div_ceil(2)));
            let ratio = spectral_entry_count(m) as f64 / spectral_entry_count(n) as f64;
            let mn = m as f64 / n as f64;
            assert!(ratio <= mn * mn * (1.0 + 2.0 / m as f64));
        }
    }
    assert_eq!(hat_count(3840, 1, true), 3840);
    assert_eq!(hat_count(3840, 3, true), 1920);
}

#[test]
fn extensions_are_harmonic_and_reproduce_constants() {
    let s = setup(80, Some((1.0, 100.0)), BoundaryConditions::benchmark());
    let p1 = &s.cover.patches[0];
    let ps = PatchSolver::new(&s.op, p1, &s.bc, SolverSettings::default()).unwrap();
    let space = ps.local_space(5).unwrap();
    assert_eq!(space.len(), hat_count(ps.n_boundary(), 5, true));
    assert!(space.constants_in_span);
    let mut sum = NodalField::zeros(p1.omega_star.clone(), ElementOrder::Linear);
    for w in &space.fields {
        assert!(ps.harmonic_residual(w).unwrap() < 1e-10);
        sum.axpy(1.0, w).unwrap();
    }
    assert!(sum.values().iter().all(|&v| (v - 1.0).abs() < 1e-10));
    let total: f64 = space.fields.iter().map(|w| energy(&s.op, w, &p1.omega_star).unwrap()).sum();
    let e_sum = energy(&s.op, &sum, &p1.omega_star).unwrap();
    assert!(e_sum.abs() < 1e-14 * total, "{e_sum} vs {total}");

    // Interior-supported test fields see zero energy product.
    let w = &space.fields[3];
    let bump = NodalField::interpolate(&s.mesh, p1.omega_star.clone(), |p| {
        let r = p1.omega_star.shape().outer();
        ((p[0] - r.x0) * (r.x1 - p[0]) * (p[1] - r.y0) * (r.y1 - p[1])).max(0.0)
    });
    let b = energy_product(&s.op, w, &bump, &p1.omega_star).unwrap();
    let norms = (energy(&s.op, w, &p1.omega_star).unwrap() * energy(&s.op, &bump, &p1.omega_star).unwrap()).sqrt();
    assert!(b.abs() <= 1e-10 * norms);
}

#[test]
fn narrow_hats_decay_wide_hats_penetrate() {
    let s = setup(200, None, BoundaryConditions::benchmark());
    let p1 = &s.cover.patches[0];
    let ps = PatchSolver::new(&s.op, p1, &s.bc, SolverSettings::default()).unwrap();
    let ratio = |k: usize| {
        let hats = ps.hats(k).unwrap();
        // The hat peaked nearest the middle of the bottom side.
        let h = hats.iter().min_by_key(|h| h.peak.abs_diff(80)).unwrap();
        let w = ps.harmonic_extend(h).unwrap();
        energy(&s.op, &w, &p1.omega).unwrap() / energy(&s.op, &w, &p1.omega_star).unwrap()
    };
    let narrow = ratio(1);
    let wide = ratio(61);
    assert!(narrow < 1e-3, "narrow ratio {narrow}");
    assert!(wide >= 10.0 * narrow, "wide {wide} narrow {narrow}");
}

#[test]
fn interior_particular_solution_vanishes_without_source() {
    let s = setup(80, Some((1.0, 100.0)), BoundaryConditions::benchmark());
    let ps = PatchSolver::new(&s.op, &s.cover.patches[0], &s.bc, SolverSettings::default()).unwrap();
    let chi = ps.particular_solution(None).unwrap();
    assert_eq!(chi.kind, PatchKind::Interior);
    assert!(chi.chi.values().iter().all(|&v| v == 0.0));
    let src: ScalarFn<f64> = Arc::new(|_| 1.0);
    let chi = ps.particular_solution(Some(&src)).unwrap();
    assert!(chi.chi.max_abs() > 0.0);
    for &g in s.cover.patches[0].omega_star.boundary_nodes() {
        assert_eq!(chi.chi.at(g), 0.0);
    }
}

#[test]
fn dirichlet_particular_solution_ramps_across_the_annulus() {
    let s = setup(80, None, BoundaryConditions::benchmark());
    let p2 = &s.cover.patches[1];
    let ps = PatchSolver::new(&s.op, p2, &s.bc, SolverSettings::default()).unwrap();
    let chi = ps.particular_solution(None).unwrap();
    assert_eq!(chi.kind, PatchKind::Dirichlet);
    // Data on the Dirichlet sides, monotone ramp along the insulated bottom.
    for &g in &s.mesh.side_nodes(Side::Left) {
        assert_eq!(chi.chi.at(g), 0.0);
    }
    for &g in &s.mesh.side_nodes(Side::Right) {
        assert_eq!(chi.chi.at(g), 1.0);
    }
    let bottom: Vec<f64> = (0..=80).map(|i| chi.chi.at(s.mesh.lattice_node(i, 0))).collect();
    assert!(bottom.windows(2).all(|w| w[1] > w[0]));
    assert!(chi.chi.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    let chi_r = chi.chi_r.as_ref().unwrap();
    assert!(chi_r.values().iter().all(|&v| v == 0.0));
    let u = solve(&s.op, &s.bc, None, &SolverSettings::default(), Nullspace::Reject).unwrap();
    let u_star = u.restrict_to(&p2.omega_star).unwrap();
    let e_chi = energy(&s.op, &chi.chi, &p2.omega_star).unwrap();
    let e_u = energy(&s.op, &u_star, &p2.omega_star).unwrap();
    assert!(e_chi <= 9.0 * e_u);
}

#[test]
fn dirichlet_split_with_source() {
    let s = setup(80, Some((100.0, 1.0)), BoundaryConditions::benchmark());
    let p2 = &s.cover.patches[1];
    let ps = PatchSolver::new(&s.op, p2, &s.bc, SolverSettings::default()).unwrap();
    let src: ScalarFn<f64> = Arc::new(|p| p[1]);
    let chi = ps.particular_solution(Some(&src)).unwrap();
    let (r, d) = (chi.chi_r.as_ref().unwrap(), chi.chi_d.as_ref().unwrap());
    assert!(r.max_abs() > 0.0);
    for &g in p2.omega_star.boundary_nodes() {
        assert_eq!(r.at(g), 0.0);
    }
    let sum = r.clone();
    let mut sum = sum;
    sum.axpy(1.0, d).unwrap();
    assert_eq!(sum.values(), chi.chi.values());
}

#[test]
fn mislabeled_patch_is_unsupported() {
    let s = setup(40, None, BoundaryConditions::benchmark());
    let mut p = s.cover.patches[1].clone();
    p.kind = PatchKind::Neumann;
    let ps = PatchSolver::new(&s.op, &p, &s.bc, SolverSettings::default()).unwrap();
    assert!(matches!(ps.particular_solution(None), Err(Error::UnsupportedPatch(_))));
}

#[test]
fn neumann_patch_carries_flux_data() {
    let mut bc = BoundaryConditions::all_neumann();
    bc.right = BoundaryKind::Neumann(Arc::new(|_| 1.0));
    bc.left = BoundaryKind::Neumann(Arc::new(|_| -1.0));
    let s = setup(40, None, bc);
    let p2 = &s.cover.patches[1];
    assert_eq!(p2.kind, PatchKind::Neumann);
    let ps = PatchSolver::new(&s.op, p2, &s.bc, SolverSettings::default()).unwrap();
    let space = ps.local_space(3).unwrap();
    assert!(space.constants_in_span);
    let chi = ps.particular_solution(None).unwrap();
    assert!(chi.chi.max_abs() > 0.0);
    for &g in &p2.omega_star.boundary_loops()[1] {
        assert_eq!(chi.chi.at(g), 0.0);
    }
}

#[test]
fn persistence_round_trip() {
    let s = setup(40, Some((1.0, 10.0)), BoundaryConditions::benchmark());
    let p = &s.cover.patches[1];
    let ps = PatchSolver::new(&s.op, p, &s.bc, SolverSettings::default()).unwrap();
    let space = ps.local_space(3).unwrap();
    let dir = std::env::temp_dir().join(format!("msgfem-local-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("p1.bin");
    save_local_space(&space, b"abc", &path).unwrap();
    let back = load_local_space::<f64>(&path, b"abc", &p.omega_star, ElementOrder::Linear).unwrap().unwrap();
    assert_eq!(back.hats, space.hats);
    assert_eq!(back.kind, space.kind);
    for (a, b) in back.fields.iter().zip(&space.fields) {
        assert_eq!(a.values(), b.values());
    }
    assert!(load_local_space::<f64>(&path, b"xyz", &p.omega_star, ElementOrder::Linear).unwrap().is_none());
    assert!(load_local_space::<f64>(&dir.join("none.bin"), b"abc", &p.omega_star, ElementOrder::Linear)
        .unwrap()
        .is_none());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn single_precision_extensions() {
    let d = Domain::new(10.0f32, 5.0).unwrap();
    let mesh = Arc::new(build_mesh(d, 40, 20, ElementOrder::Linear).unwrap());
    let op = Operator::new(mesh.clone(), Arc::new(CoefficientField::uniform(&mesh, 1.0f32).unwrap())).unwrap();
    let bc = BoundaryConditions::benchmark();
    let cover = build_two_patch_cover(&mesh, &bc, CoverDims::scaled_to(d)).unwrap();
    let ps = PatchSolver::new(&op, &cover.patches[0], &bc, SolverSettings::default()).unwrap();
    let space = ps.local_space(7).unwrap();
    let mut sum = NodalField::zeros(cover.patches[0].omega_star.clone(), ElementOrder::Linear);
    for w in &space.fields {
        sum.axpy(1.0, w).unwrap();
    }
    assert!(sum.values().iter().all(|&v| (v - 1.0).abs() < 1e-4));
}

proptest! {
    #[test]
    fn hats_partition_every_chain(n in 1usize..80, k2 in 0usize..20, closed in proptest::bool::ANY) {
        let k = 2 * k2 + 1;
        prop_assume!(k <= n);
        let chain = BoundaryChain { nodes: (0..n).map(|q| 1000 + 3 * q).collect(), closed };
        let hats = chain_hats::<f64>(&chain, 0, 7, k).unwrap();
        prop_assert_eq!(hats.len(), hat_count(n, k, closed));
        if closed {
            prop_assert_eq!(hats.len(), n.div_ceil(k.div_ceil(2)));
        }
        for s in profile_sums(&chain, &hats) {
            prop_assert!((s - 1.0).abs() < 1e-14);
        }
        for h in &hats {
            prop_assert!(h.profile.len() <= k.max(1));
            prop_assert_eq!(h.profile[0].1, 1.0);
            prop_assert!(h.profile.iter().all(|&(_, v)| v > 0.0 && v <= 1.0));
        }
    }
}
