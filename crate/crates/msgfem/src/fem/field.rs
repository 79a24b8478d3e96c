use crate::error::{Error, Result};
use crate::geometry::{ElementOrder, Mesh, Point, RegionIndex};
use crate::scalar::Scalar;
use std::sync::Arc;

/// Nodal values over the nodes of a region, in the region's local numbering.
#[derive(Clone, Debug)]
pub struct NodalField<T> {
    region: Arc<RegionIndex<T>>,
    order: ElementOrder,
    values: Vec<T>,
}

impl<T: Scalar> NodalField<T> {
    pub fn new(region: Arc<RegionIndex<T>>, order: ElementOrder, values: Vec<T>) -> Result<Self> {
        if values.len() != region.n_nodes() {
            return Err(Error::Domain(format!(
                "{} values for a region of {} nodes",
                values.len(),
                region.n_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("nodal field has non-finite values".into()));
        }
        Ok(Self { region, order, values })
    }

    pub fn zeros(region: Arc<RegionIndex<T>>, order: ElementOrder) -> Self {
        let n = region.n_nodes();
        Self { region, order, values: vec![T::zero(); n] }
    }

    /// Interpolates a function at the (physical) node positions.
    pub fn interpolate(mesh: &Mesh<T>, region: Arc<RegionIndex<T>>, f: impl Fn(Point<T>) -> T) -> Self {
        let values = region.nodes().iter().map(|&n| f(mesh.node(n))).collect();
        Self { region, order: mesh.order(), values }
    }

    pub fn region(&self) -> &Arc<RegionIndex<T>> {
        &self.region
    }

    pub fn order(&self) -> ElementOrder {
        self.order
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Value at a global node, zero outside the region.
    pub fn at(&self, global: usize) -> T {
        self.region.local_index(global).map_or(T::zero(), |l| self.values[l])
    }

    fn same_region(&self, other: &Self) -> Result<()> {
        if self.region.tag() != other.region.tag() {
            return Err(Error::Domain("fields live on different regions".into()));
        }
        Ok(())
    }

    /// `self += a · other` on the same region.
    pub fn axpy(&mut self, a: T, other: &Self) -> Result<()> {
        self.same_region(other)?;
        for (s, &o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn scaled(&self, a: T) -> Self {
        Self { region: self.region.clone(), order: self.order, values: self.values.iter().map(|&v| v * a).collect() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-T::one(), other)?;
        Ok(out)
    }

    /// Transfers the field to another region: nodes shared with `target` keep
    /// their values, target nodes outside this field's region get zero.
    pub fn transfer(&self, target: &Arc<RegionIndex<T>>) -> Self {
        let values = target.nodes().iter().map(|&g| self.at(g)).collect();
        Self { region: target.clone(), order: self.order, values }
    }

    /// Restriction to a subregion.
    pub fn restrict_to(&self, target: &Arc<RegionIndex<T>>) -> Result<Self> {
        if !target.nodes().iter().all(|&g| self.region.contains_node(g)) {
            return Err(Error::Domain("restriction target is not a subregion".into()));
        }
        Ok(self.transfer(target))
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}
