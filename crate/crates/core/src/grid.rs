//! Grid functions: dense real values attached to one mesh placement.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Placement, MAX_DIM};
use crate::scalar::Scalar;

/// Values on one placement, stored in enumeration order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFn<S> {
    mesh: Mesh,
    placement: Placement,
    values: Vec<S>,
}

impl<S: Scalar> GridFn<S> {
    pub fn zeros(mesh: Mesh, placement: Placement) -> Self {
        GridFn {
            mesh,
            placement,
            values: vec![S::zero(); mesh.card(placement)],
        }
    }

    pub fn constant(mesh: Mesh, placement: Placement, c: S) -> Self {
        GridFn {
            mesh,
            placement,
            values: vec![c; mesh.card(placement)],
        }
    }

    pub fn from_values(mesh: Mesh, placement: Placement, values: Vec<S>) -> Result<Self> {
        if values.len() != mesh.card(placement) {
            return Err(Error::IndexRange(format!(
                "value array has {} entries, placement holds {}",
                values.len(),
                mesh.card(placement)
            )));
        }
        Ok(GridFn {
            mesh,
            placement,
            values,
        })
    }

    /// Sample a function of the spatial coordinates at every point of the
    /// placement (including edge and corner slots of the closed placement).
    pub fn sample(mesh: Mesh, placement: Placement, f: impl Fn(&[S]) -> S) -> Self {
        let card = mesh.card(placement);
        let n = mesh.dim();
        let mut values = Vec::with_capacity(card);
        for flat in 0..card {
            let x = mesh.point::<S>(placement, flat);
            values.push(f(&x[..n]));
        }
        GridFn {
            mesh,
            placement,
            values,
        }
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn expect_placement(&self, placement: Placement) -> Result<()> {
        if self.placement != placement {
            return Err(Error::PlacementMismatch {
                expected: placement,
                got: self.placement,
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        GridFn {
            mesh: self.mesh,
            placement: self.placement,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination; placements must agree.
    pub fn zip_map(&self, other: &GridFn<S>, f: impl Fn(S, S) -> S) -> Result<Self> {
        other.expect_placement(self.placement)?;
        Ok(GridFn {
            mesh: self.mesh,
            placement: self.placement,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &GridFn<S>) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFn<S>) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn axpy(&mut self, c: S, other: &GridFn<S>) -> Result<()> {
        other.expect_placement(self.placement)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }
}

/// Extend interior values to the closed grid with zero faces, edges and
/// corners: the homogeneous-Dirichlet reading of a primal function.
pub fn closed_from_primal<S: Scalar>(u: &GridFn<S>) -> Result<GridFn<S>> {
    u.expect_placement(Placement::Primal)?;
    let mesh = u.mesh();
    let mut out = GridFn::zeros(mesh, Placement::Closed);
    scatter_primal_into_closed(u, &mut out)?;
    Ok(out)
}

/// Overwrite the interior slots of a closed function with primal values.
pub fn scatter_primal_into_closed<S: Scalar>(u: &GridFn<S>, closed: &mut GridFn<S>) -> Result<()> {
    u.expect_placement(Placement::Primal)?;
    closed.expect_placement(Placement::Closed)?;
    let mesh = u.mesh();
    let n = mesh.dim();
    for flat in 0..u.len() {
        let mut m = mesh.multi(Placement::Primal, flat);
        for d in 0..n {
            m[d] += 1; // interior slot i maps to closed slot i+1
        }
        let cf = mesh.flat(Placement::Closed, &m[..n]);
        closed.values_mut()[cf] = u.values()[flat];
    }
    Ok(())
}

/// Interior restriction of a closed function.
pub fn primal_part<S: Scalar>(u: &GridFn<S>) -> Result<GridFn<S>> {
    u.expect_placement(Placement::Closed)?;
    let mesh = u.mesh();
    let n = mesh.dim();
    let mut out = GridFn::zeros(mesh, Placement::Primal);
    for flat in 0..out.len() {
        let mut m = mesh.multi(Placement::Primal, flat);
        for d in 0..n {
            m[d] += 1;
        }
        let cf = mesh.flat(Placement::Closed, &m[..n]);
        out.values_mut()[flat] = u.values()[cf];
    }
    Ok(out)
}

/// A function on the mesh boundary: one face array per direction.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFn<S> {
    mesh: Mesh,
    faces: Vec<GridFn<S>>,
}

impl<S: Scalar> BoundaryFn<S> {
    pub fn zeros(mesh: Mesh) -> Self {
        let faces = (0..mesh.dim())
            .map(|k| GridFn::zeros(mesh, Placement::BoundaryK(k)))
            .collect();
        BoundaryFn { mesh, faces }
    }

    pub fn sample(mesh: Mesh, f: impl Fn(&[S]) -> S) -> Self {
        let faces = (0..mesh.dim())
            .map(|k| GridFn::sample(mesh, Placement::BoundaryK(k), &f))
            .collect();
        BoundaryFn { mesh, faces }
    }

    pub fn from_faces(mesh: Mesh, faces: Vec<GridFn<S>>) -> Result<Self> {
        if faces.len() != mesh.dim() {
            return Err(Error::InvalidParam(format!(
                "boundary function needs {} faces, got {}",
                mesh.dim(),
                faces.len()
            )));
        }
        for (k, f) in faces.iter().enumerate() {
            f.expect_placement(Placement::BoundaryK(k))?;
        }
        Ok(BoundaryFn { mesh, faces })
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn face(&self, k: usize) -> &GridFn<S> {
        &self.faces[k]
    }

    pub fn face_mut(&mut self, k: usize) -> &mut GridFn<S> {
        &mut self.faces[k]
    }

    pub fn scale(&self, c: S) -> Self {
        BoundaryFn {
            mesh: self.mesh,
            faces: self.faces.iter().map(|f| f.scale(c)).collect(),
        }
    }

    pub fn sub(&self, other: &BoundaryFn<S>) -> Result<Self> {
        let faces = self
            .faces
            .iter()
            .zip(&other.faces)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundaryFn {
            mesh: self.mesh,
            faces,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.faces
            .iter()
            .all(|f| f.values().iter().all(|v| v.is_zero()))
    }
}

/// Write boundary face values into the face slots of a closed grid.
/// Edge/corner slots are untouched.
pub fn scatter_boundary_into_closed<S: Scalar>(
    bf: &BoundaryFn<S>,
    closed: &mut GridFn<S>,
) -> Result<()> {
    closed.expect_placement(Placement::Closed)?;
    let mesh = bf.mesh();
    let n = mesh.dim();
    for k in 0..n {
        let placement = Placement::BoundaryK(k);
        for flat in 0..mesh.card(placement) {
            let coords = mesh.unlocate(placement, flat)?;
            let mut m = [0usize; MAX_DIM];
            for d in 0..n {
                m[d] = coords[d]; // boundary coords are already global closed coords
            }
            let cf = mesh.flat(Placement::Closed, &m[..n]);
            closed.values_mut()[cf] = bf.face(k).values()[flat];
        }
    }
    Ok(())
}

/// Extract the face values of a closed function.
pub fn boundary_part<S: Scalar>(u: &GridFn<S>) -> Result<BoundaryFn<S>> {
    u.expect_placement(Placement::Closed)?;
    let mesh = u.mesh();
    let n = mesh.dim();
    let mut bf = BoundaryFn::zeros(mesh);
    for k in 0..n {
        let placement = Placement::BoundaryK(k);
        for flat in 0..mesh.card(placement) {
            let coords = mesh.unlocate(placement, flat)?;
            let cf = mesh.flat(Placement::Closed, &coords[..n]);
            bf.face_mut(k).values_mut()[flat] = u.values()[cf];
        }
    }
    Ok(bf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_and_restrict() {
        let mesh = Mesh::new(2, 3).unwrap();
        let u = GridFn::<f64>::sample(mesh, Placement::Closed, |x| x[0] + 2.0 * x[1]);
        let p = primal_part(&u).unwrap();
        let x0 = mesh.point::<f64>(Placement::Primal, 0);
        assert!((p.values()[0] - (x0[0] + 2.0 * x0[1])).abs() < 1e-15);
    }

    #[test]
    fn placement_mismatch_rejected() {
        let mesh = Mesh::new(1, 3).unwrap();
        let a = GridFn::<f64>::zeros(mesh, Placement::Primal);
        let b = GridFn::<f64>::zeros(mesh, Placement::DualK(0));
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn boundary_scatter_round_trip() {
        let mesh = Mesh::new(2, 2).unwrap();
        let bf = BoundaryFn::<f64>::sample(mesh, |x| x[0] - x[1] + 3.0);
        let mut closed = GridFn::zeros(mesh, Placement::Closed);
        scatter_boundary_into_closed(&bf, &mut closed).unwrap();
        let back = boundary_part(&closed).unwrap();
        for k in 0..2 {
            assert_eq!(back.face(k).values(), bf.face(k).values());
        }
    }
}
