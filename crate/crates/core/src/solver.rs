//! Forward simulation of the semidiscrete stochastic parabolic equation
//!
//!   dw - sum_i D_i(gamma_i D_i w) dt = (sum_i a1_i A_i D_i w + a2 w + f) dt
//!                                      + (a3 w + g) dB(t)
//!
//! by a semi-implicit Euler–Maruyama scheme: implicit stiff part, explicit
//! first-order drift, noise at the left endpoint so adaptedness holds by
//! construction.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::calculus::{avg_dual, diff};
use crate::error::{Error, Result};
use crate::grid::{
    boundary_part, scatter_boundary_into_closed, scatter_primal_into_closed, BoundaryFn, GridFn,
};
use crate::linalg::conjugate_gradient;
use crate::mesh::{Mesh, Placement, MAX_DIM};
use crate::scalar::{num, Scalar};

/// Uniform time grid on `[0, T]` with `M` steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<TimeGrid> {
        if !(t_final > 0.0) {
            return Err(Error::InvalidParam(format!("T={t_final} must be positive")));
        }
        if steps < 2 {
            return Err(Error::InvalidParam(format!("M={steps} must be >= 2")));
        }
        Ok(TimeGrid { t_final, steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        self.t_final * m as f64 / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|m| self.time(m)).collect()
    }
}

/// Derive an independent stream seed for one realization.
/// SplitMix64 of the index folded into the master seed.
pub fn derive_seed(master: u64, realization: u64) -> u64 {
    let mut z = realization.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    master ^ (z ^ (z >> 31))
}

/// Seeded i.i.d. Gaussian increments on a uniform time grid.
#[derive(Clone, Debug)]
pub struct BrownianPath<S> {
    pub seed: u64,
    pub dt: S,
    pub increments: Vec<S>,
}

/// Sample a Brownian path; regeneration from the same seed is bit-exact.
pub fn sample_path<S: Scalar>(seed: u64, grid: &TimeGrid) -> BrownianPath<S> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dt = num::<S>(grid.dt());
    let sqrt_dt = dt.sqrt();
    let increments = (0..grid.steps)
        .map(|_| S::standard_normal(&mut rng) * sqrt_dt)
        .collect();
    BrownianPath {
        seed,
        dt,
        increments,
    }
}

/// A coefficient or source tabulated in time on the primal mesh.
#[derive(Clone, Debug)]
pub enum TimeSeries<S> {
    Constant(GridFn<S>),
    Steps(Vec<GridFn<S>>),
}

impl<S: Scalar> TimeSeries<S> {
    pub fn at(&self, m: usize) -> &GridFn<S> {
        match self {
            TimeSeries::Constant(g) => g,
            TimeSeries::Steps(v) => &v[m],
        }
    }

    pub fn scale(&self, c: S) -> TimeSeries<S> {
        match self {
            TimeSeries::Constant(g) => TimeSeries::Constant(g.scale(c)),
            TimeSeries::Steps(v) => TimeSeries::Steps(v.iter().map(|g| g.scale(c)).collect()),
        }
    }
}

/// Dirichlet boundary data over time.  Analytic data fills every non-interior
/// slot of the closed state (faces, edges, corners); tabulated data fills the
/// faces and leaves edge/corner slots at zero.
#[derive(Clone)]
pub enum BoundaryData<S> {
    Zero,
    Analytic(Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>),
    Tabulated(Vec<BoundaryFn<S>>),
}

impl<S> std::fmt::Debug for BoundaryData<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryData::Zero => write!(f, "Zero"),
            BoundaryData::Analytic(_) => write!(f, "Analytic(..)"),
            BoundaryData::Tabulated(v) => write!(f, "Tabulated({} steps)", v.len()),
        }
    }
}

impl<S: Scalar> BoundaryData<S> {
    pub fn is_zero(&self) -> bool {
        matches!(self, BoundaryData::Zero)
    }

    /// Boundary faces at step `m` (used by observation and norms).
    pub fn faces_at(&self, mesh: Mesh, t: f64, m: usize) -> BoundaryFn<S> {
        match self {
            BoundaryData::Zero => BoundaryFn::zeros(mesh),
            BoundaryData::Analytic(f) => BoundaryFn::sample(mesh, |x: &[S]| {
                let xf: Vec<f64> = x.iter().map(|v| v.to_f64c()).collect();
                num::<S>(f(&xf, t))
            }),
            BoundaryData::Tabulated(v) => v[m].clone(),
        }
    }

    /// Write the boundary values at time `t` (step `m`) into a closed state.
    fn write_into(&self, closed: &mut GridFn<S>, t: f64, m: usize) -> Result<()> {
        let mesh = closed.mesh();
        match self {
            BoundaryData::Zero => Ok(()),
            BoundaryData::Analytic(f) => {
                let n = mesh.dim();
                let nodes = mesh.nodes_per_axis();
                for flat in 0..closed.len() {
                    let slots = mesh.multi(Placement::Closed, flat);
                    let interior = (0..n).all(|d| slots[d] >= 1 && slots[d] <= nodes);
                    if !interior {
                        let x = mesh.point::<f64>(Placement::Closed, flat);
                        closed.values_mut()[flat] = num::<S>(f(&x[..n], t));
                    }
                }
                Ok(())
            }
            BoundaryData::Tabulated(v) => scatter_boundary_into_closed(&v[m], closed),
        }
    }
}

/// The semidiscrete problem: diffusion coefficients sampled on both meshes,
/// lower-order coefficients and sources on the primal mesh, boundary data and
/// the initial state.
#[derive(Clone, Debug)]
pub struct SpdeProblem<S> {
    pub mesh: Mesh,
    pub time: TimeGrid,
    /// Per direction: diffusion coefficient sampled on the dual-i mesh.
    pub gamma_dual: Vec<GridFn<S>>,
    /// Per direction: the same coefficient sampled on the primal mesh.
    pub gamma_primal: Vec<GridFn<S>>,
    pub a1: Option<Vec<TimeSeries<S>>>,
    pub a2: Option<TimeSeries<S>>,
    pub a3: Option<TimeSeries<S>>,
    /// Deterministic drift source.
    pub f: Option<TimeSeries<S>>,
    /// Noise source; step-m slice may depend only on earlier increments.
    pub g: Option<TimeSeries<S>>,
    pub xi: BoundaryData<S>,
    pub w0: GridFn<S>,
}

impl<S: Scalar> SpdeProblem<S> {
    /// Pure-diffusion template with unit coefficients and zero data.
    pub fn diffusion(mesh: Mesh, time: TimeGrid, gamma: impl Fn(&[f64]) -> f64) -> SpdeProblem<S> {
        let gamma_dual = (0..mesh.dim())
            .map(|i| {
                GridFn::sample(mesh, Placement::DualK(i), |x: &[S]| {
                    let xf: Vec<f64> = x.iter().map(|v| v.to_f64c()).collect();
                    num::<S>(gamma(&xf))
                })
            })
            .collect();
        let gamma_primal = (0..mesh.dim())
            .map(|_| {
                GridFn::sample(mesh, Placement::Primal, |x: &[S]| {
                    let xf: Vec<f64> = x.iter().map(|v| v.to_f64c()).collect();
                    num::<S>(gamma(&xf))
                })
            })
            .collect();
        SpdeProblem {
            mesh,
            time,
            gamma_dual,
            gamma_primal,
            a1: None,
            a2: None,
            a3: None,
            f: None,
            g: None,
            xi: BoundaryData::Zero,
            w0: GridFn::zeros(mesh, Placement::Primal),
        }
    }

    /// Positivity of the diffusion coefficient and the regularity functional
    /// `reg(gamma) = sup(gamma + 1/gamma + sum_i |d_i gamma_i|^2)`, with the
    /// derivative taken by the discrete stencils.
    pub fn validate_gamma(&self) -> Result<f64> {
        let mesh = self.mesh;
        let n = mesh.dim();
        if self.gamma_dual.len() != n || self.gamma_primal.len() != n {
            return Err(Error::InvalidParam("gamma needs one sample per direction".into()));
        }
        let mut grad_sq = vec![0.0f64; mesh.card(Placement::Primal)];
        let mut reg = 0.0f64;
        for i in 0..n {
            self.gamma_dual[i].expect_placement(Placement::DualK(i))?;
            self.gamma_primal[i].expect_placement(Placement::Primal)?;
            for &v in self.gamma_dual[i].values().iter().chain(self.gamma_primal[i].values()) {
                let g = v.to_f64c();
                if !(g > 0.0) {
                    return Err(Error::InvalidParam(format!(
                        "gamma_{i} must be positive everywhere, found {g}"
                    )));
                }
                reg = reg.max(g + 1.0 / g);
            }
            // D_i of the closed extension of the primal sample, averaged back
            let closed = {
                let mut c = crate::grid::closed_from_primal(&self.gamma_primal[i])?;
                // extend the faces with the dual end values so the stencil
                // does not see an artificial jump to zero
                let bf = nearest_face_extension(&self.gamma_primal[i])?;
                scatter_boundary_into_closed(&bf, &mut c)?;
                c
            };
            let di = avg_dual(&diff(&closed, i)?, i)?;
            for (gs, d) in grad_sq.iter_mut().zip(di.values()) {
                *gs += d.to_f64c() * d.to_f64c();
            }
        }
        let max_grad = grad_sq.iter().fold(0.0f64, |a, &b| a.max(b));
        Ok(reg + max_grad)
    }

    /// Stable content digest for provenance records.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.mesh.dim().to_le_bytes());
        hasher.update(self.mesh.nodes_per_axis().to_le_bytes());
        hasher.update(self.time.t_final.to_le_bytes());
        hasher.update(self.time.steps.to_le_bytes());
        let mut feed = |g: &GridFn<S>| {
            for v in g.values() {
                hasher.update(v.to_f64c().to_le_bytes());
            }
        };
        for g in &self.gamma_dual {
            feed(g);
        }
        for g in &self.gamma_primal {
            feed(g);
        }
        feed(&self.w0);
        let mut feed_series = |s: &Option<TimeSeries<S>>| {
            if let Some(ts) = s {
                match ts {
                    TimeSeries::Constant(g) => feed(g),
                    TimeSeries::Steps(v) => v.iter().for_each(&mut feed),
                }
            }
        };
        feed_series(&self.a1.as_ref().map(|v| TimeSeries::Constant(v[0].at(0).clone())));
        feed_series(&self.a2);
        feed_series(&self.a3);
        feed_series(&self.f);
        feed_series(&self.g);
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Constant extrapolation of a primal function onto the faces (nearest
/// interior value), for coefficient stencils near the boundary.
fn nearest_face_extension<S: Scalar>(u: &GridFn<S>) -> Result<BoundaryFn<S>> {
    u.expect_placement(Placement::Primal)?;
    let mesh = u.mesh();
    let n = mesh.dim();
    let nodes = mesh.nodes_per_axis();
    let mut bf = BoundaryFn::zeros(mesh);
    for k in 0..n {
        let placement = Placement::BoundaryK(k);
        for flat in 0..mesh.card(placement) {
            let mut coords = mesh.unlocate(placement, flat)?;
            coords[k] = if coords[k] == 0 { 1 } else { nodes };
            let pf = mesh.locate(Placement::Primal, &coords[..n])?;
            bf.face_mut(k).values_mut()[flat] = u.values()[pf];
        }
    }
    Ok(bf)
}

/// One computed trajectory: closed states per step plus provenance.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub states: Vec<GridFn<S>>,
    pub problem_digest: String,
    pub path_seed: Option<u64>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn state(&self, m: usize) -> &GridFn<S> {
        &self.states[m]
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn terminal_primal(&self) -> Result<GridFn<S>> {
        crate::grid::primal_part(self.states.last().unwrap())
    }
}

/// Relative CG tolerance of the implicit step.
pub const STEP_CG_TOL: f64 = 1e-10;

/// Apply `v - dt * sum_i D_i(gamma_i D_i v)` on interior values extended by
/// zero on the boundary.
fn apply_helmholtz<S: Scalar>(
    mesh: Mesh,
    gamma_dual: &[GridFn<S>],
    dt: S,
    v: &[S],
    out: &mut [S],
) {
    let n = mesh.dim();
    let nodes = mesh.nodes_per_axis();
    let h = mesh.h::<S>();
    let h2 = h * h;
    let read = |c: &[usize; MAX_DIM]| -> S {
        for d in 0..n {
            if c[d] < 1 || c[d] > nodes {
                return S::zero();
            }
        }
        let mut pm = *c;
        for d in 0..n {
            pm[d] -= 1;
        }
        v[mesh.flat(Placement::Primal, &pm[..n])]
    };
    for flat in 0..out.len() {
        let mp = mesh.multi(Placement::Primal, flat);
        let mut c = [0usize; MAX_DIM];
        for d in 0..n {
            c[d] = mp[d] + 1;
        }
        let centre = v[flat];
        let mut acc = centre;
        for i in 0..n {
            // gamma at the dual slots straddling the node: slots mp[i] and mp[i]+1
            let mut dm = mp;
            let g_lo = gamma_dual[i].values()[mesh.flat(Placement::DualK(i), &dm[..n])];
            dm[i] += 1;
            let g_hi = gamma_dual[i].values()[mesh.flat(Placement::DualK(i), &dm[..n])];
            let mut cm = c;
            cm[i] -= 1;
            let mut cp = c;
            cp[i] += 1;
            let flux = (g_hi * (read(&cp) - centre) - g_lo * (centre - read(&cm))) / h2;
            acc = acc - dt * flux;
        }
        out[flat] = acc;
    }
}

/// `sum_i D_i(gamma_i D_i u)` of a closed state, on the primal mesh.
pub fn diffusion_term<S: Scalar>(
    mesh: Mesh,
    gamma_dual: &[GridFn<S>],
    u: &GridFn<S>,
) -> Result<GridFn<S>> {
    let mut total = GridFn::zeros(mesh, Placement::Primal);
    for i in 0..mesh.dim() {
        let du = diff(u, i)?;
        let flux = du.zip_map(&gamma_dual[i], |d, g| d * g)?;
        total = total.add(&crate::calculus::diff_dual(&flux, i)?)?;
    }
    Ok(total)
}

/// Assemble the closed state at step `m` from interior values and the
/// boundary data.
fn assemble_state<S: Scalar>(
    problem: &SpdeProblem<S>,
    interior: &GridFn<S>,
    m: usize,
) -> Result<GridFn<S>> {
    let mut closed = GridFn::zeros(problem.mesh, Placement::Closed);
    problem
        .xi
        .write_into(&mut closed, problem.time.time(m), m)?;
    scatter_primal_into_closed(interior, &mut closed)?;
    Ok(closed)
}

/// Advance one step: solve
/// `(I - dt L_gamma) w_{m+1} = w_m + dt (sum_i a1_i A_i D_i w_m + a2 w_m + f_m)
///                             + (a3 w_m + g_m) dB_m`
/// with the boundary of `w_{m+1}` taken from the data at `t_{m+1}`.
pub fn step<S: Scalar>(
    problem: &SpdeProblem<S>,
    w_m: &GridFn<S>,
    m: usize,
    db_m: S,
) -> Result<GridFn<S>> {
    w_m.expect_placement(Placement::Closed)?;
    let mesh = problem.mesh;
    let n = mesh.dim();
    let dt = num::<S>(problem.time.dt());

    let wp = crate::grid::primal_part(w_m)?;
    let mut rhs = wp.clone();

    if let Some(a1) = &problem.a1 {
        for i in 0..n {
            let adv = avg_dual(&diff(w_m, i)?, i)?;
            let term = adv.zip_map(a1[i].at(m), |d, a| d * a)?;
            rhs.axpy(dt, &term)?;
        }
    }
    if let Some(a2) = &problem.a2 {
        let term = wp.zip_map(a2.at(m), |w, a| w * a)?;
        rhs.axpy(dt, &term)?;
    }
    if let Some(f) = &problem.f {
        rhs.axpy(dt, f.at(m))?;
    }
    if let Some(a3) = &problem.a3 {
        let term = wp.zip_map(a3.at(m), |w, a| w * a)?;
        rhs.axpy(db_m, &term)?;
    }
    if let Some(g) = &problem.g {
        rhs.axpy(db_m, g.at(m))?;
    }

    // boundary coupling of the implicit operator at t_{m+1}
    if !problem.xi.is_zero() {
        let mut bdry = GridFn::zeros(mesh, Placement::Closed);
        problem
            .xi
            .write_into(&mut bdry, problem.time.time(m + 1), m + 1)?;
        let coupling = diffusion_term(mesh, &problem.gamma_dual, &bdry)?;
        rhs.axpy(dt, &coupling)?;
    }

    let unknowns = mesh.card(Placement::Primal);
    let mut x = wp.into_values();
    conjugate_gradient(
        |p: &[S], out: &mut [S]| apply_helmholtz(mesh, &problem.gamma_dual, dt, p, out),
        rhs.values(),
        &mut x,
        num::<S>(STEP_CG_TOL),
        10 * unknowns.max(50),
    )
    .map_err(|e| Error::NoConvergence(format!("implicit step {m}: {e}")))?;

    assemble_state(problem, &GridFn::from_values(mesh, Placement::Primal, x)?, m + 1)
}

/// Iterate [`step`] along a Brownian path.  Adaptedness holds by construction:
/// the state at step `m` never reads increments with index `>= m`.
pub fn solve_forward<S: Scalar>(
    problem: &SpdeProblem<S>,
    path: &BrownianPath<S>,
) -> Result<Trajectory<S>> {
    if path.increments.len() != problem.time.steps {
        return Err(Error::InvalidParam(format!(
            "path has {} increments, time grid has {} steps",
            path.increments.len(),
            problem.time.steps
        )));
    }
    let mut states = Vec::with_capacity(problem.time.steps + 1);
    let mut w = assemble_state(problem, &problem.w0, 0)?;
    states.push(w.clone());
    for m in 0..problem.time.steps {
        w = step(problem, &w, m, path.increments[m])?;
        states.push(w.clone());
    }
    Ok(Trajectory {
        states,
        problem_digest: problem.digest(),
        path_seed: Some(path.seed),
    })
}

/// Path-free forward solve for problems with zero noise channel; used by the
/// deterministic energy estimates and the boundary-data shift.
pub fn solve_deterministic<S: Scalar>(problem: &SpdeProblem<S>) -> Result<Trajectory<S>> {
    if problem.g.is_some() || problem.a3.is_some() {
        return Err(Error::InvalidParam(
            "deterministic solve requires g and a3 absent".into(),
        ));
    }
    let mut states = Vec::with_capacity(problem.time.steps + 1);
    let mut w = assemble_state(problem, &problem.w0, 0)?;
    states.push(w.clone());
    for m in 0..problem.time.steps {
        w = step(problem, &w, m, S::zero())?;
        states.push(w.clone());
    }
    Ok(Trajectory {
        states,
        problem_digest: problem.digest(),
        path_seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{norm, NormKind};

    #[test]
    fn time_grid_validates() {
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.time(4), 1.0);
    }

    #[test]
    fn same_seed_reproduces_bit_exactly() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let a = sample_path::<f64>(42, &grid);
        let b = sample_path::<f64>(42, &grid);
        assert_eq!(a.increments, b.increments);
        let c = sample_path::<f64>(43, &grid);
        assert!(a.increments.iter().zip(&c.increments).any(|(x, y)| x != y));
    }

    #[test]
    fn increment_moments_are_sane() {
        let grid = TimeGrid::new(1.0, 10_000).unwrap();
        let p = sample_path::<f64>(7, &grid);
        let dt = grid.dt();
        let mean = p.increments.iter().sum::<f64>() / p.increments.len() as f64;
        let var = p.increments.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (p.increments.len() - 1) as f64;
        // 5 standard errors around (0, dt)
        let se_mean = (dt / p.increments.len() as f64).sqrt();
        assert!(mean.abs() <= 5.0 * se_mean, "mean {mean}");
        let se_var = dt * (2.0 / (p.increments.len() as f64 - 1.0)).sqrt();
        assert!((var - dt).abs() <= 5.0 * se_var, "var {var} vs dt {dt}");
        assert!((0.9e-4..=1.1e-4).contains(&var));
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|i| derive_seed(12345, i)).collect();
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), s.len());
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let mesh = Mesh::new(1, 7).unwrap();
        let time = TimeGrid::new(0.1, 8).unwrap();
        let problem = SpdeProblem::<f64>::diffusion(mesh, time, |_| 1.0);
        let w = GridFn::zeros(mesh, Placement::Closed);
        let next = step(&problem, &w, 0, 0.3).unwrap();
        assert!(next.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn heat_step_matches_dense_two_by_two_solve() {
        // n=1, N=2: (I - dt L) w = w_m with L the tridiagonal Laplacian
        let mesh = Mesh::new(1, 2).unwrap();
        let time = TimeGrid::new(0.5, 2).unwrap();
        let dt = time.dt();
        let problem = SpdeProblem::<f64>::diffusion(mesh, time, |_| 1.0);
        let w0 = GridFn::from_values(mesh, Placement::Primal, vec![1.0, 2.0]).unwrap();
        let w = assemble_state(&problem, &w0, 0).unwrap();
        let next = step(&problem, &w, 0, 0.0).unwrap();
        let got = crate::grid::primal_part(&next).unwrap();

        let h = mesh.h::<f64>();
        let a = 1.0 + 2.0 * dt / (h * h);
        let b = -dt / (h * h);
        // solve [[a, b], [b, a]] x = [1, 2]
        let det = a * a - b * b;
        let x0 = (a * 1.0 - b * 2.0) / det;
        let x1 = (-b * 1.0 + a * 2.0) / det;
        assert!((got.values()[0] - x0).abs() <= 1e-10);
        assert!((got.values()[1] - x1).abs() <= 1e-10);
    }

    #[test]
    fn noise_response_is_linear_in_the_increment() {
        let mesh = Mesh::new(1, 7).unwrap();
        let time = TimeGrid::new(0.1, 8).unwrap();
        let mut problem = SpdeProblem::<f64>::diffusion(mesh, time, |_| 1.0);
        problem.g = Some(TimeSeries::Constant(GridFn::constant(
            mesh,
            Placement::Primal,
            1.5,
        )));
        let w0 = GridFn::sample(mesh, Placement::Primal, |x: &[f64]| (3.0 * x[0]).sin());
        problem.w0 = w0;
        let w = assemble_state(&problem, &problem.w0, 0).unwrap();
        let base = step(&problem, &w, 0, 0.0).unwrap();
        let da = step(&problem, &w, 0, 0.4).unwrap();
        let db = step(&problem, &w, 0, 0.1).unwrap();
        for i in 0..base.len() {
            let ra = da.values()[i] - base.values()[i];
            let rb = db.values()[i] - base.values()[i];
            assert!((ra - 4.0 * rb).abs() <= 1e-12 * (1.0 + ra.abs()));
        }
    }

    #[test]
    fn truncation_property_of_adaptedness() {
        let mesh = Mesh::new(1, 7).unwrap();
        let time = TimeGrid::new(0.1, 10).unwrap();
        let mut problem = SpdeProblem::<f64>::diffusion(mesh, time, |x| 1.0 + 0.5 * x[0]);
        problem.g = Some(TimeSeries::Constant(GridFn::sample(
            mesh,
            Placement::Primal,
            |x: &[f64]| 1.0 + x[0],
        )));
        let pa = sample_path::<f64>(5, &time);
        let mut pb = pa.clone();
        // perturb increments from step 6 on
        for m in 6..10 {
            pb.increments[m] += 1.0;
        }
        let ta = solve_forward(&problem, &pa).unwrap();
        let tb = solve_forward(&problem, &pb).unwrap();
        for m in 0..=6 {
            assert_eq!(ta.state(m).values(), tb.state(m).values());
        }
        assert!(ta.state(7).values() != tb.state(7).values());
    }

    #[test]
    fn deterministic_limit_is_path_independent() {
        let mesh = Mesh::new(1, 7).unwrap();
        let time = TimeGrid::new(0.1, 10).unwrap();
        let mut problem = SpdeProblem::<f64>::diffusion(mesh, time, |_| 1.0);
        problem.w0 = GridFn::sample(mesh, Placement::Primal, |x: &[f64]| x[0] * (1.0 - x[0]));
        let ta = solve_forward(&problem, &sample_path(1, &time)).unwrap();
        let tb = solve_forward(&problem, &sample_path(2, &time)).unwrap();
        for m in 0..=10 {
            assert_eq!(ta.state(m).values(), tb.state(m).values());
        }
    }

    #[test]
    fn pure_diffusion_energy_decays() {
        let mesh = Mesh::new(2, 5).unwrap();
        let time = TimeGrid::new(0.2, 16).unwrap();
        let mut problem = SpdeProblem::<f64>::diffusion(mesh, time, |x| 1.0 + 0.3 * x[1]);
        problem.w0 = GridFn::sample(mesh, Placement::Primal, |x: &[f64]| {
            (std::f64::consts::PI * x[0]).sin() * x[1]
        });
        let t = solve_deterministic(&problem).unwrap();
        let mut prev = f64::INFINITY;
        for m in 0..=16 {
            let e = norm(&crate::grid::primal_part(t.state(m)).unwrap(), NormKind::Lp(2.0))
                .unwrap();
            assert!(e <= prev + 1e-14);
            prev = e;
        }
    }

    #[test]
    fn boundary_values_track_the_data() {
        let mesh = Mesh::new(1, 7).unwrap();
        let time = TimeGrid::new(0.5, 8).unwrap();
        let mut problem = SpdeProblem::<f64>::diffusion(mesh, time, |_| 1.0);
        problem.xi = BoundaryData::Analytic(Arc::new(|x: &[f64], t: f64| {
            if x[0] > 0.5 {
                t * 2.0
            } else {
                0.0
            }
        }));
        let t = solve_deterministic(&problem).unwrap();
        for m in 0..=8 {
            let bf = boundary_part(t.state(m)).unwrap();
            assert_eq!(bf.face(0).values()[1], time.time(m) * 2.0);
            assert_eq!(bf.face(0).values()[0], 0.0);
        }
        // interior responds to the ramp
        let last = crate::grid::primal_part(t.state(8)).unwrap();
        assert!(last.values()[6] > 0.0);
    }

    #[test]
    fn manufactured_solution_converges_in_h() {
        // forcing with the discrete-Laplacian defect isolates the time error;
        // dt = h^2/4 gives an overall second-order decay in h
        let mut errors = Vec::new();
        let mut hs = Vec::new();
        for nodes in [7usize, 15, 31] {
            let mesh = Mesh::new(1, nodes).unwrap();
            let h = mesh.h::<f64>();
            let t_final = 0.1;
            let steps = (t_final / (h * h / 4.0)).round() as usize;
            let time = TimeGrid::new(t_final, steps).unwrap();
            let pi = std::f64::consts::PI;
            let exact = move |x: f64, t: f64| (-t as f64).exp() * (pi * x).sin();

            let mut problem = SpdeProblem::<f64>::diffusion(mesh, time, |_| 1.0);
            // f = w*_t - Lap_h w*
            let mut f_steps = Vec::with_capacity(steps);
            for m in 0..steps {
                let t = time.time(m);
                let w_star =
                    GridFn::sample(mesh, Placement::Closed, move |x: &[f64]| exact(x[0], t));
                let lap = diffusion_term(mesh, &problem.gamma_dual, &w_star).unwrap();
                let ft = GridFn::sample(mesh, Placement::Primal, move |x: &[f64]| {
                    -exact(x[0], t)
                })
                .sub(&lap)
                .unwrap();
                f_steps.push(ft);
            }
            problem.f = Some(TimeSeries::Steps(f_steps));
            problem.w0 = GridFn::sample(mesh, Placement::Primal, move |x: &[f64]| exact(x[0], 0.0));
            let traj = solve_deterministic(&problem).unwrap();
            let got = traj.terminal_primal().unwrap();
            let want =
                GridFn::sample(mesh, Placement::Primal, move |x: &[f64]| exact(x[0], t_final));
            let err = norm(&got.sub(&want).unwrap(), NormKind::Lp(2.0)).unwrap();
            errors.push(err.ln());
            hs.push(h.ln());
        }
        let slope = crate::linalg::fit_slope(&hs, &errors);
        assert!(slope >= 1.8, "convergence slope {slope}");
    }
}
