use msgfem::fem::*;
use msgfem::geometry::*;
use msgfem::global::*;
use msgfem::pou::*;
use msgfem::Error;
use std::sync::Arc;

struct Bench {
    op: Operator<f64>,
    cover: Cover<f64>,
    pu: PartitionOfUnity<f64>,
    bc: BoundaryConditions<f64>,
    u: NodalField<f64>,
    patches: Vec<PatchData<f64>>,
}

fn desk(nx: usize, contrast: (f64, f64), width: usize) -> Bench {
    let d = Domain::new(10.0, 5.0).unwrap();
    let inc = generate_inclusions(d, (5, 5), 0.35, 0.1, 42).unwrap();
    let mesh = Arc::new(MeshBuilder::new(d, nx, nx / 2).build().unwrap());
    let coeff = assign_coefficients(&mesh, &inc, contrast.0, contrast.1).unwrap();
    bench(Operator::new(mesh, Arc::new(coeff)).unwrap(), CoverDims::scaled_to(d), width)
}

fn bench(op: Operator<f64>, dims: CoverDims<f64>, width: usize) -> Bench {
    let bc = BoundaryConditions::benchmark();
    let cover = build_two_patch_cover(op.mesh(), &bc, dims).unwrap();
    let pu = build_pu(&cover, op.mesh()).unwrap();
    let u = solve(&op, &bc, None, &SolverSettings::default(), Nullspace::Reject).unwrap();
    let patches = cover
        .patches
        .iter()
        .map(|p| prepare_patch(&op, p, &bc, None, width, SolverSettings::default(), None, 1e-12).unwrap())
        .collect();
    Bench { op, cover, pu, bc, u, patches }
}

impl Bench {
    fn run(&self, mode: BasisMode, dims: &[usize]) -> (GlobalBasis<f64>, GlobalSystem<f64>, GlobalSolution<f64>) {
        solve_from_patches(&self.op, &self.cover, &self.pu, &self.patches, &self.bc, None, mode, dims).unwrap()
    }
}

#[test]
fn homogeneous_benchmark_recovers_linear_field() {
    let d = Domain::new(20.0, 10.0).unwrap();
    let mesh = Arc::new(build_mesh(d, 80, 40, ElementOrder::Linear).unwrap());
    let op = Operator::new(mesh.clone(), Arc::new(CoefficientField::uniform(&mesh, 1.0).unwrap())).unwrap();
    let b = bench(op, CoverDims::scaled_to(d), 1);
    let whole = Arc::new(RegionIndex::whole(&mesh));
    let exact = NodalField::interpolate(&mesh, whole.clone(), |p| p[0] / 20.0);
    // Area over W².
    let e = energy(&b.op, &b.u, &whole).unwrap();
    assert!((e - 0.5).abs() <= 1e-6 * 0.5, "{e}");
    assert!(relative_error(&b.op, &b.u, &exact).unwrap() < 1e-20);
    let (basis, _, sol) = b.run(BasisMode::Spectral, &[20, 8]);
    assert_eq!(basis.dimension(), 29);
    let err = relative_error(&b.op, &sol.u0, &exact).unwrap();
    assert!(err <= 1e-4, "{err}");
    // Dirichlet data is reproduced by u^F alone.
    for (g, p) in mesh.nodes().iter().enumerate() {
        if p[0] == 0.0 || p[0] == 20.0 {
            assert!((sol.u0.at(g) - p[0] / 20.0).abs() < 1e-12);
        }
    }
}

#[test]
fn dimension_counts_include_interior_constant() {
    let b = desk(80, (1.0, 100.0), 1);
    let (basis, system, sol) = b.run(BasisMode::Spectral, &[5, 2]);
    assert_eq!(basis.dimension(), 8);
    assert_eq!(basis.per_patch, vec![6, 2]);
    assert_eq!(system.g.asymmetry(), 0.0);
    assert!(sol.residual <= 1e-12);
    // Diagonal entries are squared energy norms of the trial functions.
    let whole = RegionIndex::whole(b.op.mesh());
    for (a, v) in basis.functions.iter().enumerate() {
        let e = energy(&b.op, &v.field.transfer(&Arc::new(whole.clone())), &whole).unwrap();
        assert!((system.g[(a, a)] - e).abs() <= 1e-12 * e);
    }
}

#[test]
fn galerkin_orthogonality_and_energy() {
    for contrast in [(1.0, 100.0), (100.0, 1.0)] {
        let b = desk(80, contrast, 1);
        let eu = energy(&b.op, &b.u, b.u.region()).unwrap();
        for dims in [[5, 2], [10, 4], [20, 8]] {
            let (basis, system, sol) = b.run(BasisMode::Spectral, &dims);
            let res = galerkin_residuals(&b.op, &basis, &system, &sol.u0, &b.u).unwrap();
            let worst = res.iter().cloned().fold(0.0, f64::max);
            assert!(worst <= 1e-8, "{contrast:?} {dims:?}: {worst}");
            let e0 = energy(&b.op, &sol.u0, b.u.region()).unwrap();
            let err = relative_error(&b.op, &sol.u0, &b.u).unwrap();
            // ‖u‖² = ‖u₀‖² + ‖u − u₀‖² + 2 B(u − u₀, u^F).
            let cross = {
                let diff = b.u.sub(&sol.u0).unwrap();
                energy_product(&b.op, &diff, &sol.u_f, b.u.region()).unwrap()
            };
            assert!((eu - e0 - err * eu - 2.0 * cross).abs() <= 1e-9 * eu);
        }
    }
}

#[test]
fn nested_bases_reduce_error_within_nwidth_bound() {
    let b = desk(80, (1.0, 100.0), 1);
    let mut last = f64::INFINITY;
    for dims in [[1, 1], [5, 2], [10, 4], [15, 6], [20, 8], [30, 12]] {
        let (_, _, sol) = b.run(BasisMode::Spectral, &dims);
        let err = relative_error(&b.op, &sol.u0, &b.u).unwrap();
        assert!(err <= last * (1.0 + 1e-9), "{dims:?}: {err} after {last}");
        last = err;
        let width = b
            .patches
            .iter()
            .zip(dims)
            .map(|(p, m)| 2.0 * p.spectrum.eigenvalues[m].sqrt())
            .fold(0.0, f64::max);
        assert!(err.sqrt() <= 10.0 * width, "{dims:?}: {} vs {width}", err.sqrt());
    }
}

#[test]
fn oversampled_mode_uses_raw_extensions() {
    let b = desk(40, (100.0, 1.0), 5);
    let (basis, _, over) = b.run(BasisMode::Oversampled, &[]);
    let m: Vec<usize> = b.patches.iter().map(|p| p.space.len()).collect();
    assert_eq!(basis.per_patch, m);
    assert!(over.kept.len() <= basis.dimension());
    let (_, _, spec) = b.run(BasisMode::Spectral, &[5, 2]);
    // Particular parts are shared between modes.
    assert_eq!(over.u_f.values(), spec.u_f.values());
    let e_over = relative_error(&b.op, &over.u0, &b.u).unwrap();
    let e_spec = relative_error(&b.op, &spec.u0, &b.u).unwrap();
    assert!(e_over < e_spec, "{e_over} {e_spec}");
}

#[test]
fn error_helpers_and_configuration_errors() {
    let b = desk(40, (1.0, 10.0), 1);
    assert_eq!(relative_error(&b.op, &b.u, &b.u).unwrap(), 0.0);
    let zero = NodalField::zeros(b.u.region().clone(), ElementOrder::Linear);
    assert!(matches!(relative_error(&b.op, &b.u, &zero), Err(Error::Division(_))));
    let empty = vec![Vec::new(), Vec::new()];
    assert!(matches!(
        build_global_basis(&b.cover, &b.pu, &empty, BasisMode::Spectral),
        Err(Error::Configuration(_))
    ));
    assert!(matches!(
        solve_from_patches(&b.op, &b.cover, &b.pu, &b.patches, &b.bc, None, BasisMode::Spectral, &[3]),
        Err(Error::Configuration(_))
    ));
    // ω₂ is a Dirichlet patch, so m₂ = 0 leaves it empty.
    assert!(matches!(
        solve_from_patches(&b.op, &b.cover, &b.pu, &b.patches, &b.bc, None, BasisMode::Spectral, &[3, 0]),
        Err(Error::Configuration(_))
    ));
}
