//! Discrete norms: Lebesgue and Sobolev norms on the mesh, boundary norms,
//! and the trace norm realised as an equality-constrained quadratic minimum.

use crate::calculus::{diff, diff2, lp_integral, quadrature_weight};
use crate::error::{Error, Result};
use crate::grid::{scatter_boundary_into_closed, BoundaryFn, GridFn};
use crate::linalg::{conjugate_gradient, CgStats};
use crate::mesh::{Mesh, Placement, MAX_DIM};
use crate::scalar::{num, Scalar};

/// The norms of the semidiscrete spaces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    Lp(f64),
    W1p(f64),
    H2,
    Linf,
    BoundaryL2,
    BoundaryH1,
    Hhalf,
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParam(format!("norm exponent p={p} must be in [1, inf)")));
    }
    Ok(())
}

/// Norm of a grid function.  `Lp`/`Linf` accept any placement; the Sobolev
/// kinds require the closed placement so the difference stencils reach the
/// faces.  Boundary kinds are evaluated through [`boundary_norm`].
pub fn norm<S: Scalar>(u: &GridFn<S>, kind: NormKind) -> Result<S> {
    match kind {
        NormKind::Lp(p) => {
            check_p(p)?;
            Ok(lp_integral(u, p).powf(num::<S>(1.0 / p)))
        }
        NormKind::Linf => Ok(u
            .values()
            .iter()
            .fold(S::zero(), |acc, &v| acc.max(v.abs()))),
        NormKind::W1p(p) => {
            check_p(p)?;
            Ok(w1p_integral(u, p)?.powf(num::<S>(1.0 / p)))
        }
        NormKind::H2 => Ok(w2p_integral(u, 2.0)?.sqrt()),
        NormKind::BoundaryL2 | NormKind::BoundaryH1 | NormKind::Hhalf => {
            Err(Error::InvalidParam(
                "boundary norm kinds need a boundary function; use boundary_norm".into(),
            ))
        }
    }
}

/// `||u||^p_{W^{1,p}} = ||u||^p_{Lp} + sum_i int_{M*_i} |D_i u|^p`, with the
/// interior part of `u` entering the Lp term.
fn w1p_integral<S: Scalar>(u: &GridFn<S>, p: f64) -> Result<S> {
    u.expect_placement(Placement::Closed)?;
    let up = crate::grid::primal_part(u)?;
    let mut total = lp_integral(&up, p);
    for k in 0..u.mesh().dim() {
        total += lp_integral(&diff(u, k)?, p);
    }
    Ok(total)
}

/// `||u||^p_{W^{2,p}}`: first-order part plus all ordered second differences.
fn w2p_integral<S: Scalar>(u: &GridFn<S>, p: f64) -> Result<S> {
    let n = u.mesh().dim();
    let mut total = w1p_integral(u, p)?;
    for i in 0..n {
        total += lp_integral(&diff2(u, i, i)?, p);
        for j in (i + 1)..n {
            // ordered pairs (i,j) and (j,i) share the same mixed difference
            total += num::<S>(2.0) * lp_integral(&diff2(u, i, j)?, p);
        }
    }
    Ok(total)
}

/// H¹ norm of a closed function (interior L² part plus all first differences).
pub fn h1_norm<S: Scalar>(u: &GridFn<S>) -> Result<S> {
    Ok(w1p_integral(u, 2.0)?.sqrt())
}

/// Boundary norms for functions on the union of faces.
pub fn boundary_norm<S: Scalar>(bf: &BoundaryFn<S>, kind: NormKind) -> Result<S> {
    match kind {
        NormKind::BoundaryL2 => {
            let mut total = S::zero();
            for k in 0..bf.mesh().dim() {
                total += lp_integral(bf.face(k), 2.0);
            }
            Ok(total.sqrt())
        }
        NormKind::BoundaryH1 => boundary_h1_norm(bf),
        NormKind::Hhalf => Ok(hhalf_norm(bf)?.0),
        _ => Err(Error::InvalidParam(
            "grid-function norm kinds need a grid function; use norm".into(),
        )),
    }
}

/// Boundary H¹ norm: per face the L² part plus the tangential differences.
/// Tangential duals keep the stencil inside the face, so each tangential axis
/// contributes its `N-1` interior dual slots; in one dimension the tangential
/// sum is empty and the norm coincides with the boundary L² norm.
fn boundary_h1_norm<S: Scalar>(bf: &BoundaryFn<S>) -> Result<S> {
    let mesh = bf.mesh();
    let n = mesh.dim();
    let nodes = mesh.nodes_per_axis();
    let h = mesh.h::<S>();
    let w = quadrature_weight::<S>(mesh, Placement::BoundaryK(0));
    let mut total = S::zero();
    for i in 0..n {
        total += lp_integral(bf.face(i), 2.0);
        let face = bf.face(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            // walk every interior dual slot of axis j within the face
            let placement = Placement::BoundaryK(i);
            for flat in 0..face.len() {
                let m = mesh.multi(placement, flat);
                if m[j] + 1 >= nodes {
                    continue; // pair with the next node along j; skip the last
                }
                let mut m2 = m;
                m2[j] += 1;
                let flat2 = mesh.flat(placement, &m2[..n]);
                let d = (face.values()[flat2] - face.values()[flat]) / h;
                total += w * d * d;
            }
        }
    }
    Ok(total.sqrt())
}

/// Tolerance of the trace-norm interior solve.
pub const HHALF_CG_TOL: f64 = 1e-10;

/// Discrete H½ norm of boundary data: the minimum of the H¹ norm over all
/// extensions agreeing with the data on the boundary.  The minimiser solves
/// `(I - Lap_h) u = 0` in the interior with the data as Dirichlet values; the
/// SPD system is solved matrix-free by conjugate gradient.
pub fn hhalf_norm<S: Scalar>(bf: &BoundaryFn<S>) -> Result<(S, CgStats)> {
    let mesh = bf.mesh();
    let h = mesh.h::<S>();
    let h2 = h * h;
    let interior = mesh.card(Placement::Primal);

    // b = Lap_h applied to the boundary embedding, restricted to the interior
    let mut vb = GridFn::zeros(mesh, Placement::Closed);
    scatter_boundary_into_closed(bf, &mut vb)?;
    let mut b = vec![S::zero(); interior];
    apply_i_minus_lap(mesh, h2, vb.values(), None, &mut b, true);

    let mut x = vec![S::zero(); interior];
    let stats = conjugate_gradient(
        |p: &[S], out: &mut [S]| {
            apply_i_minus_lap(mesh, h2, &[], Some(p), out, false);
        },
        &b,
        &mut x,
        num::<S>(HHALF_CG_TOL),
        10 * interior.max(50),
    )
    .map_err(|e| Error::NoConvergence(format!("trace-norm interior solve: {e}")))?;

    // assemble the minimiser on the closed grid and take its H¹ norm
    let mut full = vb;
    let xp = GridFn::from_values(mesh, Placement::Primal, x)?;
    crate::grid::scatter_primal_into_closed(&xp, &mut full)?;
    Ok((h1_norm(&full)?, stats))
}

/// Apply `u - Lap_h u` on interior nodes.  Two modes:
/// with `rhs_mode` the input is a closed array of boundary data (interior
/// zero) and the output is the negated off-interior coupling, i.e. the CG
/// right-hand side; otherwise the input is an interior vector extended by
/// zero and the output is the SPD operator applied to it.
fn apply_i_minus_lap<S: Scalar>(
    mesh: Mesh,
    h2: S,
    closed_data: &[S],
    interior: Option<&[S]>,
    out: &mut [S],
    rhs_mode: bool,
) {
    let n = mesh.dim();
    let nodes = mesh.nodes_per_axis();
    let read = |m: &[usize; MAX_DIM]| -> S {
        // interior slots are 1..=nodes in closed coordinates
        let mut inside = true;
        for d in 0..n {
            if m[d] < 1 || m[d] > nodes {
                inside = false;
                break;
            }
        }
        if inside {
            if let Some(int) = interior {
                let mut pm = *m;
                for d in 0..n {
                    pm[d] -= 1;
                }
                int[mesh.flat(Placement::Primal, &pm[..n])]
            } else {
                let idx = mesh.flat(Placement::Closed, &m[..n]);
                closed_data[idx]
            }
        } else if interior.is_some() {
            S::zero()
        } else {
            let idx = mesh.flat(Placement::Closed, &m[..n]);
            closed_data[idx]
        }
    };
    for flat in 0..out.len() {
        let mp = mesh.multi(Placement::Primal, flat);
        let mut c = [0usize; MAX_DIM];
        for d in 0..n {
            c[d] = mp[d] + 1;
        }
        let centre = read(&c);
        let mut acc = centre;
        for d in 0..n {
            let mut cm = c;
            cm[d] -= 1;
            let mut cp = c;
            cp[d] += 1;
            acc = acc - (read(&cp) - centre - centre + read(&cm)) / h2;
        }
        out[flat] = if rhs_mode { centre - acc } else { acc };
    }
}

/// Squared H² norm of a closed function restricted to the sub-box of primal
/// nodes `lo..=hi` (global integer coordinates per axis).  The box's own dual
/// sets are used; stencils read the surrounding closed grid.
pub fn h2_norm_sq_window<S: Scalar>(u: &GridFn<S>, lo: &[usize], hi: &[usize]) -> Result<S> {
    u.expect_placement(Placement::Closed)?;
    let mesh = u.mesh();
    let n = mesh.dim();
    let nodes = mesh.nodes_per_axis();
    for d in 0..n {
        if lo[d] < 1 || hi[d] > nodes || lo[d] > hi[d] {
            return Err(Error::IndexRange(format!(
                "window [{}, {}] outside primal range on axis {d}",
                lo[d], hi[d]
            )));
        }
    }
    let h = mesh.h::<S>();
    let wq = h.powi(n as i32);
    let vals = u.values();
    let read = |c: &[usize; MAX_DIM]| vals[mesh.flat(Placement::Closed, &c[..n])];

    // iterate a window where axis d runs over `ext[d]` extra dual slots
    let mut total = S::zero();

    // L² over the box nodes
    for_each_box(n, lo, hi, &mut |c| {
        let v = read(c);
        total += wq * v * v;
    });

    // first differences on the box duals: axis slots lo-1..=hi mean the pair
    // (slot, slot+1) of closed nodes
    for i in 0..n {
        let mut dlo = [0usize; MAX_DIM];
        let mut dhi = [0usize; MAX_DIM];
        for d in 0..n {
            dlo[d] = if d == i { lo[d] - 1 } else { lo[d] };
            dhi[d] = hi[d];
        }
        for_each_box(n, &dlo[..n], &dhi[..n], &mut |c| {
            let mut cp = *c;
            cp[i] += 1;
            let dv = (read(&cp) - read(c)) / h;
            total += wq * dv * dv;
        });
    }

    // second differences: same-axis on the box nodes, mixed on the box duals
    let h2 = h * h;
    for i in 0..n {
        for_each_box(n, lo, hi, &mut |c| {
            let mut cm = *c;
            cm[i] -= 1;
            let mut cp = *c;
            cp[i] += 1;
            let v = read(c);
            let d2 = (read(&cp) - v - v + read(&cm)) / h2;
            total += wq * d2 * d2;
        });
        for j in (i + 1)..n {
            let mut dlo = [0usize; MAX_DIM];
            let mut dhi = [0usize; MAX_DIM];
            for d in 0..n {
                dlo[d] = if d == i || d == j { lo[d] - 1 } else { lo[d] };
                dhi[d] = hi[d];
            }
            for_each_box(n, &dlo[..n], &dhi[..n], &mut |c| {
                let mut cpp = *c;
                cpp[i] += 1;
                cpp[j] += 1;
                let mut cpm = *c;
                cpm[i] += 1;
                let mut cmp = *c;
                cmp[j] += 1;
                let d2 = (read(&cpp) - read(&cpm) - read(&cmp) + read(c)) / h2;
                total += num::<S>(2.0) * wq * d2 * d2;
            });
        }
    }
    Ok(total)
}

/// Visit every integer multi-index of the box `lo..=hi` in row-major order.
pub(crate) fn for_each_box(
    n: usize,
    lo: &[usize],
    hi: &[usize],
    f: &mut impl FnMut(&[usize; MAX_DIM]),
) {
    let mut c = [0usize; MAX_DIM];
    for d in 0..n {
        c[d] = lo[d];
    }
    loop {
        f(&c);
        let mut d = n;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            if c[d] < hi[d] {
                c[d] += 1;
                for d2 in (d + 1)..n {
                    c[d2] = lo[d2];
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::closed_from_primal;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_function_has_zero_norms() {
        let mesh = Mesh::new(2, 4).unwrap();
        let u = GridFn::<f64>::zeros(mesh, Placement::Closed);
        for kind in [NormKind::Lp(2.0), NormKind::W1p(2.0), NormKind::H2, NormKind::Linf] {
            assert_eq!(norm(&u, kind).unwrap(), 0.0);
        }
        let b = BoundaryFn::<f64>::zeros(mesh);
        for kind in [NormKind::BoundaryL2, NormKind::BoundaryH1, NormKind::Hhalf] {
            assert_eq!(boundary_norm(&b, kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_bad_exponent() {
        let mesh = Mesh::new(1, 3).unwrap();
        let u = GridFn::<f64>::zeros(mesh, Placement::Primal);
        assert!(norm(&u, NormKind::Lp(0.5)).is_err());
    }

    #[test]
    fn boundary_h1_equals_boundary_l2_in_one_dimension() {
        let mesh = Mesh::new(1, 5).unwrap();
        let b = BoundaryFn::<f64>::sample(mesh, |x| 1.0 + x[0]);
        let l2 = boundary_norm(&b, NormKind::BoundaryL2).unwrap();
        let h1 = boundary_norm(&b, NormKind::BoundaryH1).unwrap();
        assert_eq!(l2, h1);
    }

    #[test]
    fn hhalf_matches_dense_minimisation() {
        // n=1, N=3, data 1 at x=0 and 0 at x=1: the minimiser solves the
        // tridiagonal system (2+h²) u_i - u_{i-1} - u_{i+1} = bc
        let mesh = Mesh::new(1, 3).unwrap();
        let mut b = BoundaryFn::<f64>::zeros(mesh);
        b.face_mut(0).values_mut()[0] = 1.0;
        let (value, stats) = hhalf_norm(&b).unwrap();
        assert!(stats.rel_residual <= 1e-10);

        // dense oracle: forward elimination on the 3x3 system
        let h = 0.25f64;
        let a = 2.0 + h * h;
        let mut m = [[a, -1.0, 0.0, 1.0], [-1.0, a, -1.0, 0.0], [0.0, -1.0, a, 0.0]];
        for col in 0..2 {
            for row in (col + 1)..3 {
                let f = m[row][col] / m[col][col];
                for k in col..4 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
        let mut u = [0.0; 3];
        for row in (0..3).rev() {
            let mut s = m[row][3];
            for k in (row + 1)..3 {
                s -= m[row][k] * u[k];
            }
            u[row] = s / m[row][row];
        }
        let mut j = h * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
        let d = [(u[0] - 1.0) / h, (u[1] - u[0]) / h, (u[2] - u[1]) / h, -u[2] / h];
        for di in d {
            j += h * di * di;
        }
        let oracle = j.sqrt();
        assert!(
            (value - oracle).abs() <= 1e-10,
            "hhalf {value} vs dense oracle {oracle}"
        );
    }

    #[test]
    fn hhalf_is_a_minimum_over_extensions() {
        let mesh = Mesh::new(2, 4).unwrap();
        let bf = BoundaryFn::<f64>::sample(mesh, |x| x[0] + 0.3 * x[1] * x[1]);
        let (hhalf, _) = hhalf_norm(&bf).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..10 {
            let vals = (0..mesh.card(Placement::Primal))
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let interior = GridFn::from_values(mesh, Placement::Primal, vals).unwrap();
            let mut ext = GridFn::zeros(mesh, Placement::Closed);
            scatter_boundary_into_closed(&bf, &mut ext).unwrap();
            crate::grid::scatter_primal_into_closed(&interior, &mut ext).unwrap();
            assert!(hhalf <= h1_norm(&ext).unwrap() + 1e-12);
        }
    }

    #[test]
    fn window_norm_matches_full_h2_on_full_box() {
        let mesh = Mesh::new(2, 5).unwrap();
        let mut rng = StdRng::seed_from_u64(9);
        let vals: Vec<f64> = (0..mesh.card(Placement::Primal))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let u =
            closed_from_primal(&GridFn::from_values(mesh, Placement::Primal, vals).unwrap())
                .unwrap();
        let full = norm(&u, NormKind::H2).unwrap();
        let windowed = h2_norm_sq_window(&u, &[1, 1], &[5, 5]).unwrap().sqrt();
        assert!((full - windowed).abs() <= 1e-12 * full.max(1.0));
    }

    proptest! {
        #[test]
        fn lp_norm_is_homogeneous_and_subadditive(seed in 0u64..500) {
            let mesh = Mesh::new(2, 3).unwrap();
            let mut rng = StdRng::seed_from_u64(seed);
            let mut draw = || {
                let vals: Vec<f64> = (0..mesh.card(Placement::Primal))
                    .map(|_| rng.gen_range(-2.0..2.0))
                    .collect();
                GridFn::from_values(mesh, Placement::Primal, vals).unwrap()
            };
            let u = draw();
            let v = draw();
            for p in [1.0, 2.0, 3.5] {
                let nu = norm(&u, NormKind::Lp(p)).unwrap();
                let nv = norm(&v, NormKind::Lp(p)).unwrap();
                let nsum = norm(&u.add(&v).unwrap(), NormKind::Lp(p)).unwrap();
                prop_assert!(nsum <= nu + nv + 1e-12);
                let scaled = norm(&u.scale(-2.5), NormKind::Lp(p)).unwrap();
                prop_assert!((scaled - 2.5 * nu).abs() <= 1e-12 * (1.0 + nu));
            }
        }
    }
}
