use super::element::Operator;
use super::field::NodalField;
use crate::error::{Error, Result};
use crate::geometry::RegionIndex;
use crate::scalar::Scalar;
use rayon::prelude::*;

const CHUNK: usize = 2048;

fn check_support<T: Scalar>(op: &Operator<T>, field: &NodalField<T>, over: &RegionIndex<T>) -> Result<()> {
    let region = field.region();
    if region.tag().mesh_nodes != op.mesh().n_nodes() {
        return Err(Error::Domain("field belongs to another mesh".into()));
    }
    if region.tag() == over.tag() {
        return Ok(());
    }
    let mesh = op.mesh();
    if over.elements().iter().all(|&e| region.contains_element(mesh, e)) {
        Ok(())
    } else {
        Err(Error::Domain("integration region is not covered by the field".into()))
    }
}

/// `Σₑ uₑᵀ Kₑ vₑ` over the elements of `over`, with a fixed reduction order.
pub fn energy_product<T: Scalar>(
    op: &Operator<T>,
    u: &NodalField<T>,
    v: &NodalField<T>,
    over: &RegionIndex<T>,
) -> Result<T> {
    if u.region().tag() != v.region().tag() {
        return Err(Error::Domain("fields live on different regions".into()));
    }
    check_support(op, u, over)?;
    let mesh = op.mesh();
    let region = u.region();
    let npe = mesh.nodes_per_element();
    let (uv, vv) = (u.values(), v.values());
    let partial: Vec<T> = over
        .elements()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ue = [T::zero(); 9];
            let mut ve = [T::zero(); 9];
            let mut kv = [T::zero(); 9];
            let mut s = T::zero();
            for &e in chunk {
                for (k, &g) in mesh.element(e).iter().enumerate() {
                    let l = region.local_index(g).unwrap();
                    ue[k] = uv[l];
                    ve[k] = vv[l];
                    kv[k] = T::zero();
                }
                op.apply_element(e, &ve[..npe], &mut kv[..npe]);
                for k in 0..npe {
                    s += ue[k] * kv[k];
                }
            }
            s
        })
        .collect();
    Ok(partial.into_iter().fold(T::zero(), |a, b| a + b))
}

pub fn energy<T: Scalar>(op: &Operator<T>, u: &NodalField<T>, over: &RegionIndex<T>) -> Result<T> {
    energy_product(op, u, u, over)
}

/// `K_over u` as a vector on the field's region numbering (zero at nodes
/// not touched by `over`).
pub fn apply_stiffness<T: Scalar>(op: &Operator<T>, u: &NodalField<T>, over: &RegionIndex<T>) -> Result<Vec<T>> {
    check_support(op, u, over)?;
    let mesh = op.mesh();
    let region = u.region();
    let npe = mesh.nodes_per_element();
    let mut out = vec![T::zero(); region.n_nodes()];
    let mut ue = [T::zero(); 9];
    let mut ke = [T::zero(); 9];
    for &e in over.elements() {
        let el = mesh.element(e);
        for (k, &g) in el.iter().enumerate() {
            ue[k] = u.values()[region.local_index(g).unwrap()];
            ke[k] = T::zero();
        }
        op.apply_element(e, &ue[..npe], &mut ke[..npe]);
        for (k, &g) in el.iter().enumerate() {
            out[region.local_index(g).unwrap()] += ke[k];
        }
    }
    Ok(out)
}

/// Estimated squared relative energy error of the coarser of two nested
/// meshes, assuming the energy converges like `h^{2γ}`:
/// `ε² = |‖u_{h/2}‖² − ‖u_h‖²| / ‖u‖² / (1 − 2^{−2γ})`.
pub fn a_posteriori<T: Scalar>(energy_h: T, energy_h2: T, energy_ref: T, gamma: T) -> Result<T> {
    if energy_ref == T::zero() {
        return Err(Error::Division("reference energy is zero".into()));
    }
    if !(energy_h > T::zero() && energy_h2 > T::zero() && energy_ref > T::zero()) {
        return Err(Error::Validation("energies must be positive".into()));
    }
    if gamma < T::lit(0.5) || gamma > T::one() {
        return Err(Error::Validation(format!("gamma must lie in [1/2, 1], got {gamma}")));
    }
    let denom = T::one() - T::lit(2.0).powf(-(gamma + gamma));
    Ok((energy_h2 - energy_h).abs() / energy_ref / denom)
}
