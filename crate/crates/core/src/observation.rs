//! Observation operators: directional normal-derivative traces on the
//! observation set, terminal snapshots, boundary values, and the norms of the
//! data spaces they live in.

use crate::error::{Error, Result};
use crate::grid::{BoundaryFn, GridFn};
use crate::mesh::{GammaPlus, Mesh, Placement};
use crate::norms::{boundary_norm, NormKind};
use crate::scalar::{num, Scalar};
use crate::solver::Trajectory;

/// Per-direction discrete normal derivative: component `i` is
/// `t_r^i(D_i w) * nu_i` on the boundary-i faces.
pub fn normal_derivative<S: Scalar>(state: &GridFn<S>) -> Result<Vec<GridFn<S>>> {
    state.expect_placement(Placement::Closed)?;
    let mesh = state.mesh();
    let mut out = Vec::with_capacity(mesh.dim());
    for i in 0..mesh.dim() {
        let tr = crate::calculus::trace(&crate::calculus::diff(state, i)?, i)?;
        let mut comp = tr;
        for flat in 0..comp.len() {
            let nu = num::<S>(mesh.normal(i, flat) as f64);
            comp.values_mut()[flat] = comp.values_mut()[flat] * nu;
        }
        out.push(comp);
    }
    Ok(out)
}

/// Values on one direction's observation points, per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSeries<S> {
    /// Observation points of this direction.
    pub points: usize,
    /// Row-major `[step][point]`, steps `0..=M`.
    pub data: Vec<S>,
}

impl<S: Scalar> TraceSeries<S> {
    pub fn steps(&self) -> usize {
        if self.points == 0 {
            0
        } else {
            self.data.len() / self.points
        }
    }

    pub fn at(&self, m: usize, j: usize) -> S {
        self.data[m * self.points + j]
    }

    pub fn scale(&self, c: S) -> Self {
        TraceSeries {
            points: self.points,
            data: self.data.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        TraceSeries {
            points: self.points,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

/// Data of the source observation: directional flux traces on the observation
/// set, plus the terminal snapshot.
#[derive(Clone, Debug)]
pub struct Lambda1Data<S> {
    pub traces: Vec<TraceSeries<S>>,
    pub terminal: GridFn<S>,
}

impl<S: Scalar> Lambda1Data<S> {
    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Lambda1Data {
            traces: self
                .traces
                .iter()
                .zip(&other.traces)
                .map(|(a, b)| a.sub(b))
                .collect(),
            terminal: self.terminal.sub(&other.terminal)?,
        })
    }

    pub fn scale(&self, c: S) -> Self {
        Lambda1Data {
            traces: self.traces.iter().map(|t| t.scale(c)).collect(),
            terminal: self.terminal.scale(c),
        }
    }
}

/// Data of the Cauchy observation: boundary values and flux traces on the
/// observation set.
#[derive(Clone, Debug)]
pub struct Lambda2Data<S> {
    pub boundary_values: Vec<TraceSeries<S>>,
    pub normal_traces: Vec<TraceSeries<S>>,
}

fn restricted_traces<S: Scalar>(
    traj: &Trajectory<S>,
    gamma: &GammaPlus,
    mesh: Mesh,
) -> Result<Vec<TraceSeries<S>>> {
    let n = mesh.dim();
    let steps = traj.steps();
    let mut series: Vec<TraceSeries<S>> = (0..n)
        .map(|i| TraceSeries {
            points: gamma.members[i].len(),
            data: Vec::with_capacity((steps + 1) * gamma.members[i].len()),
        })
        .collect();
    for m in 0..=steps {
        let nd = normal_derivative(traj.state(m))?;
        for i in 0..n {
            for &flat in &gamma.members[i] {
                let v = nd[i].values()[flat];
                series[i].data.push(v);
            }
        }
    }
    Ok(series)
}

/// Source observation: flux traces restricted to the observation set per
/// step, plus the terminal interior snapshot.
pub fn lambda1<S: Scalar>(traj: &Trajectory<S>, gamma: &GammaPlus) -> Result<Lambda1Data<S>> {
    if gamma.is_empty() {
        return Err(Error::Degenerate("observation set is empty".into()));
    }
    let mesh = traj.state(0).mesh();
    Ok(Lambda1Data {
        traces: restricted_traces(traj, gamma, mesh)?,
        terminal: traj.terminal_primal()?,
    })
}

/// Cauchy observation: boundary values and flux traces on the observation set.
pub fn lambda2<S: Scalar>(traj: &Trajectory<S>, gamma: &GammaPlus) -> Result<Lambda2Data<S>> {
    if gamma.is_empty() {
        return Err(Error::Degenerate("observation set is empty".into()));
    }
    let mesh = traj.state(0).mesh();
    let normal_traces = restricted_traces(traj, gamma, mesh)?;
    let n = mesh.dim();
    let steps = traj.steps();
    let mut boundary_values: Vec<TraceSeries<S>> = (0..n)
        .map(|i| TraceSeries {
            points: gamma.members[i].len(),
            data: Vec::with_capacity((steps + 1) * gamma.members[i].len()),
        })
        .collect();
    for m in 0..=steps {
        let bf = crate::grid::boundary_part(traj.state(m))?;
        for i in 0..n {
            for &flat in &gamma.members[i] {
                boundary_values[i].data.push(bf.face(i).values()[flat]);
            }
        }
    }
    Ok(Lambda2Data {
        boundary_values,
        normal_traces,
    })
}

/// Squared boundary-L² time integral of one trace series, left-endpoint in
/// time: `sum_{m<M} dt h^{n-1} sum_j |f(m,j)|^2`.
fn trace_sq_integral<S: Scalar>(t: &TraceSeries<S>, mesh: Mesh, dt: S) -> S {
    if t.points == 0 {
        return S::zero();
    }
    let w = mesh.h::<S>().powi(mesh.dim() as i32 - 1);
    let steps = t.steps() - 1;
    let mut acc = S::zero();
    for m in 0..steps {
        for j in 0..t.points {
            let v = t.at(m, j);
            acc += v * v;
        }
    }
    dt * w * acc
}

/// The source-observation norm: per direction the expected squared flux-trace
/// time integral enters through its square root, plus the expected terminal
/// L² norm; expectations are Monte Carlo means over the realizations.
pub fn x1_norm<S: Scalar>(datas: &[Lambda1Data<S>], dt: S) -> Result<S> {
    if datas.is_empty() {
        return Err(Error::InvalidParam("no realizations".into()));
    }
    let mesh = datas[0].terminal.mesh();
    let n = mesh.dim();
    let count = num::<S>(datas.len() as f64);
    let mut total = S::zero();
    for i in 0..n {
        let mut mean = S::zero();
        for d in datas {
            if d.traces[i].points != datas[0].traces[i].points {
                return Err(Error::InvalidParam("mismatched realization shapes".into()));
            }
            mean += trace_sq_integral(&d.traces[i], mesh, dt);
        }
        total += (mean / count).sqrt();
    }
    let mut term = S::zero();
    for d in datas {
        let sq = crate::calculus::lp_integral(&d.terminal, 2.0);
        term += sq;
    }
    total += (term / count).sqrt();
    Ok(total)
}

/// Quadrature inner product on the source-observation data (the Hilbert-space
/// counterpart of the norm, used as reconstruction misfit): sum over
/// directions of the flux-trace integrals plus the terminal inner product.
pub fn x1_quad_inner<S: Scalar>(a: &Lambda1Data<S>, b: &Lambda1Data<S>, dt: S) -> S {
    let mesh = a.terminal.mesh();
    let n = mesh.dim();
    let w = mesh.h::<S>().powi(mesh.dim() as i32 - 1);
    let mut acc = S::zero();
    for i in 0..n {
        if a.traces[i].points == 0 {
            continue;
        }
        let steps = a.traces[i].steps() - 1;
        let mut dir = S::zero();
        for m in 0..steps {
            for j in 0..a.traces[i].points {
                dir += a.traces[i].at(m, j) * b.traces[i].at(m, j);
            }
        }
        acc += dt * w * dir;
    }
    let hw = mesh.h::<S>().powi(mesh.dim() as i32);
    for (x, y) in a.terminal.values().iter().zip(b.terminal.values()) {
        acc += hw * *x * *y;
    }
    acc
}

/// Intersection norm of boundary data: `sqrt(H1^2 + H1/2^2)`.
pub fn h1_cap_hhalf<S: Scalar>(bf: &BoundaryFn<S>) -> Result<S> {
    let h1 = boundary_norm(bf, NormKind::BoundaryH1)?;
    let hh = boundary_norm(bf, NormKind::Hhalf)?;
    Ok((h1 * h1 + hh * hh).sqrt())
}

/// H¹-in-time norm of the boundary data with the intersection spatial norm:
/// left-endpoint quadrature of `||xi||^2 + ||forward difference / dt||^2`.
pub fn xi_h1_time_norm<S: Scalar>(xi: &[BoundaryFn<S>], dt: S) -> Result<S> {
    if xi.len() < 2 {
        return Err(Error::InvalidParam("boundary series needs >= 2 steps".into()));
    }
    let mut acc = S::zero();
    for m in 0..xi.len() - 1 {
        let v = h1_cap_hhalf(&xi[m])?;
        let dxi = xi[m + 1].sub(&xi[m])?;
        let dv = h1_cap_hhalf(&dxi)? / dt;
        acc += dt * (v * v + dv * dv);
    }
    Ok(acc.sqrt())
}

/// Same H¹-in-time norm with the plain boundary-H¹ spatial norm (the weight
/// of the nonhomogeneous Carleman remainder).
pub fn xi_h1_time_h1_norm<S: Scalar>(xi: &[BoundaryFn<S>], dt: S) -> Result<S> {
    if xi.len() < 2 {
        return Err(Error::InvalidParam("boundary series needs >= 2 steps".into()));
    }
    let mut acc = S::zero();
    for m in 0..xi.len() - 1 {
        let v = boundary_norm(&xi[m], NormKind::BoundaryH1)?;
        let dxi = xi[m + 1].sub(&xi[m])?;
        let dv = boundary_norm(&dxi, NormKind::BoundaryH1)? / dt;
        acc += dt * (v * v + dv * dv);
    }
    Ok(acc.sqrt())
}

/// The Cauchy-observation norm: the H¹-in-time intersection norm of the
/// boundary data plus the per-direction expected flux-trace integrals.
pub fn x2_norm<S: Scalar>(
    datas: &[Lambda2Data<S>],
    xi: &[BoundaryFn<S>],
    mesh: Mesh,
    dt: S,
) -> Result<S> {
    if datas.is_empty() {
        return Err(Error::InvalidParam("no realizations".into()));
    }
    let mut total = xi_h1_time_norm(xi, dt)?;
    let n = mesh.dim();
    let count = num::<S>(datas.len() as f64);
    for i in 0..n {
        let mut mean = S::zero();
        for d in datas {
            mean += trace_sq_integral(&d.normal_traces[i], mesh, dt);
        }
        total += (mean / count).sqrt();
    }
    Ok(total)
}
