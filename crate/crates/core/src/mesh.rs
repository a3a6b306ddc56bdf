//! Staggered meshes on the unit hypercube.
//!
//! The primal mesh holds the interior lattice points `x = h*i`, `i in {1..N}^n`,
//! with `h = 1/(N+1)`, so the closure lands exactly on the faces `x_k in {0,1}`.
//! Each direction `k` carries a dual mesh (half-shifted along `e_k`), a boundary
//! pair of faces, and an outward normal.  All index sets are enumerated in
//! row-major lexicographic order of the integer multi-index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{num, Scalar};

/// Spatial dimensions supported; the algebra is dimension-generic, the cap is a
/// validation rule only.
pub const MAX_DIM: usize = 3;

/// Where the values of a grid function live.
///
/// `Closed` is the tensor closure `{0..N+1}^n`; functions "on the closed mesh"
/// (interior plus boundary extension) are stored there so that difference and
/// average stencils can reach the faces.  Mixed second differences additionally
/// read the edge/corner slots, which samplers fill and which default to zero
/// for interior data (the homogeneous-Dirichlet reading).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Placement {
    Primal,
    Closed,
    /// Dual mesh in direction `k`: the `k`-th coordinate is half-shifted.
    DualK(usize),
    /// Doubly dual mesh, `k < l` canonical.
    DualKL(usize, usize),
    /// The two faces `x_k in {0,1}` with the other coordinates primal.
    BoundaryK(usize),
}

impl Placement {
    /// Canonical form: `DualKL` stores the smaller axis first.
    pub fn dual_kl(k: usize, l: usize) -> Placement {
        if k <= l {
            Placement::DualKL(k, l)
        } else {
            Placement::DualKL(l, k)
        }
    }
}

/// Validated mesh parameters: `n` axes, `N` interior nodes per axis.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct MeshSpec {
    pub n: usize,
    pub nodes_per_axis: usize,
}

impl MeshSpec {
    pub fn new(n: usize, nodes_per_axis: usize) -> Result<Self> {
        if n < 1 || n > MAX_DIM {
            return Err(Error::Mesh(format!(
                "dimension n={n} outside supported range 1..={MAX_DIM}"
            )));
        }
        if nodes_per_axis < 2 {
            return Err(Error::Mesh(format!(
                "nodes_per_axis N={nodes_per_axis} must be >= 2"
            )));
        }
        Ok(MeshSpec { n, nodes_per_axis })
    }

    /// Grid step `h = 1/(N+1)`.
    pub fn h<S: Scalar>(&self) -> S {
        S::one() / num::<S>((self.nodes_per_axis + 1) as f64)
    }
}

/// How one axis of a placement is indexed.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Axis {
    /// Integer coordinates `1..=N` (primal).
    Interior,
    /// Integer coordinates `0..=N+1`.
    Closed,
    /// Half-shifted slots `0..=N`; slot `d` sits at `x = h*(d + 1/2)`.
    Dual,
    /// The pair `{0, N+1}`.
    FacePair,
}

impl Axis {
    fn len(self, nodes: usize) -> usize {
        match self {
            Axis::Interior => nodes,
            Axis::Closed => nodes + 2,
            Axis::Dual => nodes + 1,
            Axis::FacePair => 2,
        }
    }
}

/// The mesh itself.  Geometry is fully determined by the spec; index sets are
/// enumerated on demand.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Mesh {
    spec: MeshSpec,
}

/// Build a mesh from validated parameters.
pub fn build_mesh(spec: MeshSpec) -> Mesh {
    Mesh { spec }
}

impl Mesh {
    pub fn new(n: usize, nodes_per_axis: usize) -> Result<Mesh> {
        Ok(build_mesh(MeshSpec::new(n, nodes_per_axis)?))
    }

    pub fn spec(&self) -> MeshSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.n
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.spec.nodes_per_axis
    }

    pub fn h<S: Scalar>(&self) -> S {
        self.spec.h()
    }

    fn axis(&self, placement: Placement, d: usize) -> Axis {
        match placement {
            Placement::Primal => Axis::Interior,
            Placement::Closed => Axis::Closed,
            Placement::DualK(k) => {
                if d == k {
                    Axis::Dual
                } else {
                    Axis::Interior
                }
            }
            Placement::DualKL(k, l) => {
                if d == k || d == l {
                    Axis::Dual
                } else {
                    Axis::Interior
                }
            }
            Placement::BoundaryK(k) => {
                if d == k {
                    Axis::FacePair
                } else {
                    Axis::Interior
                }
            }
        }
    }

    pub fn check_direction(&self, k: usize) -> Result<()> {
        if k >= self.spec.n {
            return Err(Error::IndexRange(format!(
                "direction {k} out of range for n={}",
                self.spec.n
            )));
        }
        Ok(())
    }

    /// Number of points of the placement.
    pub fn card(&self, placement: Placement) -> usize {
        (0..self.spec.n)
            .map(|d| self.axis(placement, d).len(self.spec.nodes_per_axis))
            .product()
    }

    /// Decode a flat index into the integer multi-index (slot form: dual axes
    /// use slots `0..=N`, face pairs use `0 | 1`).
    pub fn multi(&self, placement: Placement, flat: usize) -> [usize; MAX_DIM] {
        let mut out = [0usize; MAX_DIM];
        let mut rem = flat;
        for d in (0..self.spec.n).rev() {
            let len = self.axis(placement, d).len(self.spec.nodes_per_axis);
            out[d] = rem % len;
            rem /= len;
        }
        debug_assert_eq!(rem, 0, "flat index within cardinality");
        out
    }

    /// Flatten a slot multi-index; inverse of [`Mesh::multi`].
    pub fn flat(&self, placement: Placement, multi: &[usize]) -> usize {
        let mut idx = 0usize;
        for d in 0..self.spec.n {
            let len = self.axis(placement, d).len(self.spec.nodes_per_axis);
            debug_assert!(multi[d] < len);
            idx = idx * len + multi[d];
        }
        idx
    }

    /// Checked flatten in global integer coordinates: primal/closed axes take
    /// the integer coordinate itself, dual axes the slot `0..=N`, boundary axes
    /// the coordinate `0` or `N+1`.
    pub fn locate(&self, placement: Placement, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.spec.n {
            return Err(Error::IndexRange(format!(
                "multi-index has {} entries, mesh has n={}",
                coords.len(),
                self.spec.n
            )));
        }
        let nodes = self.spec.nodes_per_axis;
        let mut slots = [0usize; MAX_DIM];
        for d in 0..self.spec.n {
            let c = coords[d];
            let slot = match self.axis(placement, d) {
                Axis::Interior => {
                    if c < 1 || c > nodes {
                        return Err(Error::IndexRange(format!(
                            "axis {d}: coordinate {c} outside 1..={nodes}"
                        )));
                    }
                    c - 1
                }
                Axis::Closed => {
                    if c > nodes + 1 {
                        return Err(Error::IndexRange(format!(
                            "axis {d}: coordinate {c} outside 0..={}",
                            nodes + 1
                        )));
                    }
                    c
                }
                Axis::Dual => {
                    if c > nodes {
                        return Err(Error::IndexRange(format!(
                            "axis {d}: dual slot {c} outside 0..={nodes}"
                        )));
                    }
                    c
                }
                Axis::FacePair => {
                    if c == 0 {
                        0
                    } else if c == nodes + 1 {
                        1
                    } else {
                        return Err(Error::IndexRange(format!(
                            "axis {d}: boundary coordinate {c} must be 0 or {}",
                            nodes + 1
                        )));
                    }
                }
            };
            slots[d] = slot;
        }
        Ok(self.flat(placement, &slots[..self.spec.n]))
    }

    /// Inverse of [`Mesh::locate`]: global integer coordinates of a flat index.
    pub fn unlocate(&self, placement: Placement, flat: usize) -> Result<[usize; MAX_DIM]> {
        if flat >= self.card(placement) {
            return Err(Error::IndexRange(format!(
                "flat index {flat} outside placement of {} points",
                self.card(placement)
            )));
        }
        let slots = self.multi(placement, flat);
        let mut out = [0usize; MAX_DIM];
        for d in 0..self.spec.n {
            out[d] = match self.axis(placement, d) {
                Axis::Interior => slots[d] + 1,
                Axis::Closed | Axis::Dual => slots[d],
                Axis::FacePair => {
                    if slots[d] == 0 {
                        0
                    } else {
                        self.spec.nodes_per_axis + 1
                    }
                }
            };
        }
        Ok(out)
    }

    /// Spatial coordinates of the point with the given flat index.
    pub fn point<S: Scalar>(&self, placement: Placement, flat: usize) -> [S; MAX_DIM] {
        let slots = self.multi(placement, flat);
        let h = self.h::<S>();
        let half = num::<S>(0.5);
        let mut x = [S::zero(); MAX_DIM];
        for d in 0..self.spec.n {
            x[d] = match self.axis(placement, d) {
                Axis::Interior => h * num::<S>((slots[d] + 1) as f64),
                Axis::Closed => h * num::<S>(slots[d] as f64),
                Axis::Dual => h * (num::<S>(slots[d] as f64) + half),
                Axis::FacePair => {
                    if slots[d] == 0 {
                        S::zero()
                    } else {
                        S::one()
                    }
                }
            };
        }
        x
    }

    /// Outward normal in direction `k` at a boundary-k point: -1 on `x_k = 0`,
    /// +1 on `x_k = 1`.  The zero branch of the definition is unreachable on
    /// the full tensor grid.
    pub fn normal(&self, k: usize, boundary_flat: usize) -> i8 {
        let slots = self.multi(Placement::BoundaryK(k), boundary_flat);
        if slots[k] == 0 {
            -1
        } else {
            1
        }
    }
}

/// Observation subset of the boundary tied to a reference point outside the
/// closed hypercube: per direction `i`, the boundary-i points with
/// `(x - x_star) . e_i nu_i >= 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaPlus {
    pub x_star: Vec<f64>,
    /// Per direction `i`: flat indices into the `BoundaryK(i)` enumeration.
    pub members: Vec<Vec<usize>>,
}

impl GammaPlus {
    pub fn total_points(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_points() == 0
    }
}

/// Build the observation set for `x_star` strictly outside `[0,1]^n`.
/// Corner-adjacent boundary points are decided per direction.
pub fn gamma_plus(mesh: &Mesh, x_star: &[f64]) -> Result<GammaPlus> {
    let n = mesh.dim();
    if x_star.len() != n {
        return Err(Error::InvalidParam(format!(
            "x_star has {} coordinates, mesh has n={n}",
            x_star.len()
        )));
    }
    if x_star.iter().all(|&c| (0.0..=1.0).contains(&c)) {
        return Err(Error::InvalidParam(
            "x_star must lie outside the closed unit hypercube".into(),
        ));
    }
    let mut members = Vec::with_capacity(n);
    for i in 0..n {
        let placement = Placement::BoundaryK(i);
        let mut dir = Vec::new();
        for flat in 0..mesh.card(placement) {
            let x = mesh.point::<f64>(placement, flat);
            let nu = mesh.normal(i, flat) as f64;
            if (x[i] - x_star[i]) * nu >= 0.0 {
                dir.push(flat);
            }
        }
        members.push(dir);
    }
    Ok(GammaPlus {
        x_star: x_star.to_vec(),
        members,
    })
}
