//! Difference, average, second-difference and trace operators, discrete
//! integrals, and the exact identities they satisfy (integration by parts,
//! product rules).
//!
//! Functions "on the closed mesh" carry face values so the stencils can reach
//! the boundary; the corresponding placement is [`Placement::Closed`].

use crate::error::Result;
use crate::grid::{BoundaryFn, GridFn};
use crate::mesh::{Mesh, Placement};
use crate::scalar::{num, Scalar};

/// Forward the stencil `u(x + h/2 e_k) op u(x - h/2 e_k)` from the closed grid
/// onto the dual-k mesh.
fn stencil_to_dual<S: Scalar>(
    u: &GridFn<S>,
    k: usize,
    combine: impl Fn(S, S) -> S,
) -> Result<GridFn<S>> {
    u.expect_placement(Placement::Closed)?;
    let mesh = u.mesh();
    mesh.check_direction(k)?;
    let n = mesh.dim();
    let placement = Placement::DualK(k);
    let mut out = GridFn::zeros(mesh, placement);
    for flat in 0..out.len() {
        let m = mesh.multi(placement, flat);
        // dual slot d on axis k sits between closed slots d and d+1;
        // interior slots i map to closed slots i+1
        let mut lo = [0usize; crate::mesh::MAX_DIM];
        for d in 0..n {
            lo[d] = if d == k { m[d] } else { m[d] + 1 };
        }
        let mut hi = lo;
        hi[k] += 1;
        let a = u.values()[mesh.flat(Placement::Closed, &lo[..n])];
        let b = u.values()[mesh.flat(Placement::Closed, &hi[..n])];
        out.values_mut()[flat] = combine(b, a);
    }
    Ok(out)
}

/// Difference operator `D_k`: closed grid -> dual-k mesh.
pub fn diff<S: Scalar>(u: &GridFn<S>, k: usize) -> Result<GridFn<S>> {
    let h = u.mesh().h::<S>();
    stencil_to_dual(u, k, move |plus, minus| (plus - minus) / h)
}

/// Average operator `A_k`: closed grid -> dual-k mesh.
pub fn avg<S: Scalar>(u: &GridFn<S>, k: usize) -> Result<GridFn<S>> {
    let half = num::<S>(0.5);
    stencil_to_dual(u, k, move |plus, minus| (plus + minus) * half)
}

/// Stencil from the dual-k mesh back onto the primal mesh.
fn stencil_to_primal<S: Scalar>(
    v: &GridFn<S>,
    k: usize,
    combine: impl Fn(S, S) -> S,
) -> Result<GridFn<S>> {
    v.expect_placement(Placement::DualK(k))?;
    let mesh = v.mesh();
    let n = mesh.dim();
    let mut out = GridFn::zeros(mesh, Placement::Primal);
    for flat in 0..out.len() {
        let m = mesh.multi(Placement::Primal, flat);
        // primal slot i (coordinate i+1) has dual neighbours in slots i and i+1
        let mut lo = [0usize; crate::mesh::MAX_DIM];
        for d in 0..n {
            lo[d] = m[d];
        }
        let mut hi = lo;
        hi[k] += 1;
        let a = v.values()[mesh.flat(Placement::DualK(k), &lo[..n])];
        let b = v.values()[mesh.flat(Placement::DualK(k), &hi[..n])];
        out.values_mut()[flat] = combine(b, a);
    }
    Ok(out)
}

/// Difference of a dual-k function, landing on the primal mesh.
pub fn diff_dual<S: Scalar>(v: &GridFn<S>, k: usize) -> Result<GridFn<S>> {
    let h = v.mesh().h::<S>();
    stencil_to_primal(v, k, move |plus, minus| (plus - minus) / h)
}

/// Average of a dual-k function, landing on the primal mesh.
pub fn avg_dual<S: Scalar>(v: &GridFn<S>, k: usize) -> Result<GridFn<S>> {
    let half = num::<S>(0.5);
    stencil_to_primal(v, k, move |plus, minus| (plus + minus) * half)
}

/// Second difference `D²_{kl} = D_l D_k`.  The same-axis case lands back on
/// the primal mesh (two half-shifts compose to integer shifts); the mixed case
/// lives on the dual-kl mesh and reads edge/corner slots of the closed grid.
pub fn diff2<S: Scalar>(u: &GridFn<S>, k: usize, l: usize) -> Result<GridFn<S>> {
    u.expect_placement(Placement::Closed)?;
    let mesh = u.mesh();
    mesh.check_direction(k)?;
    mesh.check_direction(l)?;
    let n = mesh.dim();
    let h = mesh.h::<S>();
    let h2 = h * h;
    if k == l {
        let mut out = GridFn::zeros(mesh, Placement::Primal);
        for flat in 0..out.len() {
            let m = mesh.multi(Placement::Primal, flat);
            let mut c = [0usize; crate::mesh::MAX_DIM];
            for d in 0..n {
                c[d] = m[d] + 1;
            }
            let mid = u.values()[mesh.flat(Placement::Closed, &c[..n])];
            c[k] -= 1;
            let lo = u.values()[mesh.flat(Placement::Closed, &c[..n])];
            c[k] += 2;
            let hi = u.values()[mesh.flat(Placement::Closed, &c[..n])];
            out.values_mut()[flat] = (hi - mid - mid + lo) / h2;
        }
        Ok(out)
    } else {
        let placement = Placement::dual_kl(k, l);
        let mut out = GridFn::zeros(mesh, placement);
        for flat in 0..out.len() {
            let m = mesh.multi(placement, flat);
            // dual slots d on both shifted axes straddle closed slots d, d+1
            let mut base = [0usize; crate::mesh::MAX_DIM];
            for d in 0..n {
                base[d] = if d == k || d == l { m[d] } else { m[d] + 1 };
            }
            let at = |dk: usize, dl: usize, mesh: &Mesh, u: &GridFn<S>| {
                let mut c = base;
                c[k] += dk;
                c[l] += dl;
                u.values()[mesh.flat(Placement::Closed, &c[..n])]
            };
            let pp = at(1, 1, &mesh, u);
            let pm = at(1, 0, &mesh, u);
            let mp = at(0, 1, &mesh, u);
            let mm = at(0, 0, &mesh, u);
            out.values_mut()[flat] = (pp - pm - mp + mm) / h2;
        }
        Ok(out)
    }
}

/// Trace operator: picks the inward half-shifted dual value at each boundary
/// point, per the sign of the outward normal.
pub fn trace<S: Scalar>(v: &GridFn<S>, i: usize) -> Result<GridFn<S>> {
    v.expect_placement(Placement::DualK(i))?;
    let mesh = v.mesh();
    let n = mesh.dim();
    let nodes = mesh.nodes_per_axis();
    let placement = Placement::BoundaryK(i);
    let mut out = GridFn::zeros(mesh, placement);
    for flat in 0..out.len() {
        let m = mesh.multi(placement, flat);
        let mut c = [0usize; crate::mesh::MAX_DIM];
        for d in 0..n {
            c[d] = if d == i {
                // face slot 0 -> dual slot 0 (x = h/2); face slot 1 -> dual slot N
                if m[d] == 0 {
                    0
                } else {
                    nodes
                }
            } else {
                m[d]
            };
        }
        out.values_mut()[flat] = v.values()[mesh.flat(Placement::DualK(i), &c[..n])];
    }
    Ok(out)
}

/// Quadrature weight of a placement: `h^n` for interior placements, `h^{n-1}`
/// for boundary faces.
pub fn quadrature_weight<S: Scalar>(mesh: Mesh, placement: Placement) -> S {
    let h = mesh.h::<S>();
    match placement {
        Placement::BoundaryK(_) => h.powi(mesh.dim() as i32 - 1),
        _ => h.powi(mesh.dim() as i32),
    }
}

/// Discrete integral of the values over the placement.
pub fn integral<S: Scalar>(u: &GridFn<S>) -> S {
    let w = quadrature_weight::<S>(u.mesh(), u.placement());
    w * u.values().iter().copied().sum()
}

/// Discrete integral of `|u|^p`.
pub fn lp_integral<S: Scalar>(u: &GridFn<S>, p: f64) -> S {
    let w = quadrature_weight::<S>(u.mesh(), u.placement());
    let pe = num::<S>(p);
    w * u.values().iter().map(|&v| v.abs().powf(pe)).sum()
}

/// Integral over the whole boundary: sum of the per-direction face integrals.
pub fn boundary_integral<S: Scalar>(bf: &BoundaryFn<S>) -> S {
    (0..bf.mesh().dim()).map(|k| integral(bf.face(k))).sum()
}

/// Which integration-by-parts identity to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IbpVariant {
    Difference,
    Average,
}

/// Relative residual of the integration-by-parts identity in direction `k`:
/// difference variant
///   `int_M u D_k v = -int_{M*_k} v D_k u + int_{d_k M} u t_r(v) nu_k`,
/// average variant
///   `int_M u A_k v =  int_{M*_k} v A_k u - (h/2) int_{d_k M} u t_r(v)`.
pub fn check_ibp<S: Scalar>(
    u: &GridFn<S>,
    v: &GridFn<S>,
    k: usize,
    variant: IbpVariant,
) -> Result<S> {
    u.expect_placement(Placement::Closed)?;
    v.expect_placement(Placement::DualK(k))?;
    let mesh = u.mesh();
    let h = mesh.h::<S>();
    let up = crate::grid::primal_part(u)?;
    let ub = crate::grid::boundary_part(u)?;
    let tv = trace(v, k)?;
    // the identity may cancel to near zero; normalise by the summand
    // magnitudes, which bound the rounding
    let (lhs, rhs, scale) = match variant {
        IbpVariant::Difference => {
            let dv = diff_dual(v, k)?;
            let prod = up.zip_map(&dv, |a, b| a * b)?;
            let lhs = integral(&prod);
            let du = diff(u, k)?;
            let volp = v.zip_map(&du, |a, b| a * b)?;
            let vol = integral(&volp);
            let mut bnd = S::zero();
            let mut bnd_mag = S::zero();
            let w = quadrature_weight::<S>(mesh, Placement::BoundaryK(k));
            for flat in 0..tv.len() {
                let nu = num::<S>(mesh.normal(k, flat) as f64);
                let term = w * ub.face(k).values()[flat] * tv.values()[flat] * nu;
                bnd += term;
                bnd_mag += term.abs();
            }
            let scale = lp_integral(&prod, 1.0) + lp_integral(&volp, 1.0) + bnd_mag;
            (lhs, bnd - vol, scale)
        }
        IbpVariant::Average => {
            let av = avg_dual(v, k)?;
            let prod = up.zip_map(&av, |a, b| a * b)?;
            let lhs = integral(&prod);
            let au = avg(u, k)?;
            let volp = v.zip_map(&au, |a, b| a * b)?;
            let vol = integral(&volp);
            let w = quadrature_weight::<S>(mesh, Placement::BoundaryK(k));
            let mut bnd = S::zero();
            let mut bnd_mag = S::zero();
            for flat in 0..tv.len() {
                let term = w * ub.face(k).values()[flat] * tv.values()[flat];
                bnd += term;
                bnd_mag += term.abs();
            }
            let half_h = num::<S>(0.5) * h;
            let scale = lp_integral(&prod, 1.0) + lp_integral(&volp, 1.0) + half_h * bnd_mag;
            (lhs, vol - half_h * bnd, scale)
        }
    };
    if scale.is_zero() {
        Ok(S::zero())
    } else {
        Ok((lhs - rhs).abs() / scale)
    }
}

/// Relative residuals of the three product-rule identities in direction `k`:
/// `D_k(uv) = D_k u A_k v + A_k u D_k v` (on the dual mesh),
/// `A_k(uv) = A_k u A_k v + (h²/4) D_k u D_k v` (on the dual mesh), and
/// `u = A²_k u - (h²/4) D²_k u` (on the primal mesh).
pub fn check_product_rules<S: Scalar>(u: &GridFn<S>, v: &GridFn<S>, k: usize) -> Result<[S; 3]> {
    u.expect_placement(Placement::Closed)?;
    v.expect_placement(Placement::Closed)?;
    let mesh = u.mesh();
    let h = mesh.h::<S>();
    let quarter_h2 = h * h / num::<S>(4.0);
    let uv = u.zip_map(v, |a, b| a * b)?;

    let du = diff(u, k)?;
    let dv = diff(v, k)?;
    let au = avg(u, k)?;
    let av = avg(v, k)?;

    // relative to the size of the constituent terms: the rounding of the
    // cancellation is proportional to the summand magnitudes, not to the
    // (possibly tiny) result
    let rel = |lhs: &GridFn<S>, rhs: &GridFn<S>, terms: &[&GridFn<S>]| -> S {
        let mut worst = S::zero();
        for (i, (a, b)) in lhs.values().iter().zip(rhs.values()).enumerate() {
            let mut scale = a.abs().max(b.abs());
            for t in terms {
                scale = scale + t.values()[i].abs();
            }
            if !scale.is_zero() {
                worst = worst.max((*a - *b).abs() / scale);
            }
        }
        worst
    };

    let d_uv = diff(&uv, k)?;
    let t1a = du.zip_map(&av, |a, b| a * b)?;
    let t1b = au.zip_map(&dv, |a, b| a * b)?;
    let d_rhs = t1a.add(&t1b)?;
    let r1 = rel(&d_uv, &d_rhs, &[&t1a, &t1b]);

    let a_uv = avg(&uv, k)?;
    let t2a = au.zip_map(&av, |a, b| a * b)?;
    let t2b = du.zip_map(&dv, |a, b| a * b)?.scale(quarter_h2);
    let a_rhs = t2a.add(&t2b)?;
    let r2 = rel(&a_uv, &a_rhs, &[&t2a, &t2b]);

    let up = crate::grid::primal_part(u)?;
    let aau = avg_dual(&au, k)?;
    let t3b = diff2(u, k, k)?.scale(quarter_h2);
    let recon = aau.sub(&t3b)?;
    let r3 = rel(&up, &recon, &[&aau, &t3b]);

    Ok([r1, r2, r3])
}
