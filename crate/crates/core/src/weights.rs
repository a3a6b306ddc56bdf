//! Carleman weight families: the spatial weight `phi = exp(lambda*psi)`, the
//! temporal factor `s(t) = tau * exp(-lambda * beta |t - t0|^2)`, the derived
//! fields `r = exp(s*phi)`, `rho = 1/r`, and the numerical scaling laws they
//! obey on the mesh.
//!
//! Weight evaluation is kept at `f64`: the doubly exponential dynamic range of
//! `exp(2 s phi)` makes narrower scalars useless here, and the admissibility
//! guards below keep the fields inside the representable range.

use std::sync::Arc;

use crate::calculus::{avg, avg_dual, diff};
use crate::error::{Error, Result};
use crate::grid::GridFn;
use crate::linalg::fit_slope;
use crate::mesh::{Mesh, Placement};
use crate::Real;

/// Spatial profile of the weight exponent.
#[derive(Clone)]
pub enum PsiSpec {
    /// `psi(x) = |x - x_star|^2` with the reference point outside the closed cube.
    Quadratic { x_star: Vec<f64> },
    /// Generalized profile `Psi(x) = r2 - |x - center|^2` on an enclosing ball
    /// `G_1`; positive inside, zero on the ball boundary, nonvanishing
    /// gradient on the closed cube when the center lies outside it.
    Ball { center: Vec<f64>, r_squared: f64 },
    /// Arbitrary profile; derivatives are taken by half-step stencils and the
    /// sampled-gradient admissibility check applies.
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for PsiSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PsiSpec::Quadratic { x_star } => write!(f, "Quadratic(x_star={x_star:?})"),
            PsiSpec::Ball { center, r_squared } => {
                write!(f, "Ball(center={center:?}, r2={r_squared})")
            }
            PsiSpec::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PsiSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PsiSpec::Quadratic { x_star } => x
                .iter()
                .zip(x_star)
                .map(|(&xi, &ci)| (xi - ci) * (xi - ci))
                .sum(),
            PsiSpec::Ball { center, r_squared } => {
                r_squared
                    - x.iter()
                        .zip(center)
                        .map(|(&xi, &ci)| (xi - ci) * (xi - ci))
                        .sum::<f64>()
            }
            PsiSpec::Custom(f) => f(x),
        }
    }

    /// `d psi / d x_i`; stencil fallback for custom profiles.
    pub fn grad(&self, x: &[f64], i: usize, h: f64) -> f64 {
        match self {
            PsiSpec::Quadratic { x_star } => 2.0 * (x[i] - x_star[i]),
            PsiSpec::Ball { center, .. } => -2.0 * (x[i] - center[i]),
            PsiSpec::Custom(f) => {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += 0.5 * h;
                xm[i] -= 0.5 * h;
                (f(&xp) - f(&xm)) / h
            }
        }
    }

    /// `d^2 psi / d x_i^2`; stencil fallback for custom profiles.
    pub fn second(&self, x: &[f64], i: usize, h: f64) -> f64 {
        match self {
            PsiSpec::Quadratic { .. } => 2.0,
            PsiSpec::Ball { .. } => -2.0,
            PsiSpec::Custom(f) => {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f(&xp) - 2.0 * f(x) + f(&xm)) / (h * h)
            }
        }
    }
}

/// Largest admissible exponent of the tabulated fields; `exp` overflows f64
/// just above 709, so the squared weight needs `2 s phi` below this.
pub const MAX_WEIGHT_EXPONENT: f64 = 700.0;

/// Parameters of the Carleman weight family.
#[derive(Clone, Debug)]
pub struct CarlemanParams {
    pub psi: PsiSpec,
    pub lambda: f64,
    pub tau: f64,
    pub beta: f64,
    pub t0: f64,
    /// Admissible bound on `s(t) * h`; consumers may require the flag.
    pub eps0: f64,
}

impl CarlemanParams {
    pub fn new(psi: PsiSpec, lambda: f64, tau: f64, beta: f64, t0: f64) -> CarlemanParams {
        CarlemanParams {
            psi,
            lambda,
            tau,
            beta,
            t0,
            eps0: 0.5,
        }
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.beta * (t - self.t0) * (t - self.t0)
    }

    /// `s(t) = tau * exp(-lambda * theta(t))`.
    pub fn s(&self, t: f64) -> f64 {
        self.tau * (-self.lambda * self.theta(t)).exp()
    }

    /// `s'(t) = -2 lambda beta (t - t0) s(t)`.
    pub fn s_prime(&self, t: f64) -> f64 {
        -2.0 * self.lambda * self.beta * (t - self.t0) * self.s(t)
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        (self.lambda * self.psi.eval(x)).exp()
    }

    /// `d phi / d x_i = lambda phi d_i psi`.
    pub fn d_phi(&self, x: &[f64], i: usize, h: f64) -> f64 {
        self.lambda * self.phi(x) * self.psi.grad(x, i, h)
    }

    /// `d^2 phi / d x_i^2 = lambda phi (lambda (d_i psi)^2 + d^2_i psi)`.
    pub fn d2_phi(&self, x: &[f64], i: usize, h: f64) -> f64 {
        let g = self.psi.grad(x, i, h);
        self.lambda * self.phi(x) * (self.lambda * g * g + self.psi.second(x, i, h))
    }

    fn validate(&self, t_final: f64) -> Result<()> {
        if self.lambda < 1.0 {
            return Err(Error::InvalidParam(format!("lambda={} must be >= 1", self.lambda)));
        }
        if self.tau < 1.0 {
            return Err(Error::InvalidParam(format!("tau={} must be >= 1", self.tau)));
        }
        if self.beta <= 0.0 {
            return Err(Error::InvalidParam(format!("beta={} must be > 0", self.beta)));
        }
        if !(self.t0 > 0.0 && self.t0 < t_final) {
            return Err(Error::InvalidParam(format!(
                "t0={} must lie inside (0, {t_final})",
                self.t0
            )));
        }
        if let PsiSpec::Quadratic { x_star } = &self.psi {
            if x_star.iter().all(|&c| (0.0..=1.0).contains(&c)) {
                return Err(Error::InvalidParam(
                    "x_star must lie outside the closed unit hypercube".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Tabulated weight family on a mesh and time grid.
#[derive(Clone, Debug)]
pub struct WeightFields {
    pub params: CarlemanParams,
    mesh: Mesh,
    times: Vec<f64>,
    theta: Vec<f64>,
    s: Vec<f64>,
    s_prime: Vec<f64>,
    /// `max_m s(t_m) * h <= eps0`.
    pub sh_admissible: bool,
    /// `max_m s(t_m) * max_x phi(x)` over the closed grid.
    pub max_s_phi: f64,
    psi_closed: GridFn<Real>,
    phi_closed: GridFn<Real>,
}

/// Build and validate the weight family; rejects profiles whose sampled
/// gradient vanishes and exponents outside the representable range.
pub fn build_weights(params: CarlemanParams, mesh: Mesh, times: &[f64]) -> Result<WeightFields> {
    if times.len() < 2 {
        return Err(Error::InvalidParam("time grid needs at least two nodes".into()));
    }
    let t_final = *times.last().unwrap();
    params.validate(t_final)?;

    let h = mesh.h::<f64>();
    // sampled-gradient admissibility: |grad psi| > 0 at every primal point,
    // with the gradient taken by the same average/difference stencils
    let psi_closed = GridFn::<Real>::sample(mesh, Placement::Closed, |x| params.psi.eval(x));
    let mut min_grad_sq = f64::INFINITY;
    let mut grads: Vec<GridFn<Real>> = Vec::new();
    for i in 0..mesh.dim() {
        grads.push(avg_dual(&diff(&psi_closed, i)?, i)?);
    }
    for flat in 0..mesh.card(Placement::Primal) {
        let g2: f64 = grads.iter().map(|g| g.values()[flat] * g.values()[flat]).sum();
        min_grad_sq = min_grad_sq.min(g2);
    }
    if min_grad_sq <= 1e-24 {
        return Err(Error::InvalidParam(format!(
            "sampled |grad psi| vanishes (min |grad|^2 = {min_grad_sq:.3e}); weight profile inadmissible"
        )));
    }

    let phi_closed = psi_closed.map(|p| (params.lambda * p).exp());
    let phi_max = phi_closed
        .values()
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v));

    let theta: Vec<f64> = times.iter().map(|&t| params.theta(t)).collect();
    let s: Vec<f64> = times.iter().map(|&t| params.s(t)).collect();
    let s_prime: Vec<f64> = times.iter().map(|&t| params.s_prime(t)).collect();
    let s_max = s.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let max_s_phi = s_max * phi_max;
    if 2.0 * max_s_phi > MAX_WEIGHT_EXPONENT {
        return Err(Error::InvalidParam(format!(
            "weight exponent 2*s*phi reaches {:.1}, beyond the representable {MAX_WEIGHT_EXPONENT}; \
             reduce tau, lambda or move x_star closer",
            2.0 * max_s_phi
        )));
    }
    let sh_admissible = s_max * h <= params.eps0;

    Ok(WeightFields {
        params,
        mesh,
        times: times.to_vec(),
        theta,
        s,
        s_prime,
        sh_admissible,
        max_s_phi,
        psi_closed,
        phi_closed,
    })
}

impl WeightFields {
    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn theta_at(&self, m: usize) -> f64 {
        self.theta[m]
    }

    pub fn s_at(&self, m: usize) -> f64 {
        self.s[m]
    }

    pub fn s_prime_at(&self, m: usize) -> f64 {
        self.s_prime[m]
    }

    pub fn psi_closed(&self) -> &GridFn<Real> {
        &self.psi_closed
    }

    pub fn phi_closed(&self) -> &GridFn<Real> {
        &self.phi_closed
    }

    pub fn phi_max(&self) -> f64 {
        self.phi_closed.values().iter().fold(0.0f64, |a, &v| a.max(v))
    }

    /// `r = exp(s phi)` sampled on a placement.
    pub fn r_grid(&self, m: usize, placement: Placement) -> GridFn<Real> {
        let s = self.s[m];
        let p = &self.params;
        GridFn::sample(self.mesh, placement, |x| (s * p.phi(x)).exp())
    }

    /// `rho = exp(-s phi)` sampled on a placement.
    pub fn rho_grid(&self, m: usize, placement: Placement) -> GridFn<Real> {
        let s = self.s[m];
        let p = &self.params;
        GridFn::sample(self.mesh, placement, |x| (-s * p.phi(x)).exp())
    }

    /// `exp(2 s phi)` sampled on a placement.
    pub fn exp2sphi_grid(&self, m: usize, placement: Placement) -> GridFn<Real> {
        let s = self.s[m];
        let p = &self.params;
        GridFn::sample(self.mesh, placement, |x| (2.0 * s * p.phi(x)).exp())
    }

    /// `phi` sampled on a placement.
    pub fn phi_grid(&self, placement: Placement) -> GridFn<Real> {
        let p = &self.params;
        GridFn::sample(self.mesh, placement, |x| p.phi(x))
    }
}

/// `sup_x |exp(-2 s phi) A_i(exp(2 s phi)) - 1|` over all directions and dual
/// points: the leading correction of the averaged squared weight.
pub fn avg_exp_ratio_sup(mesh: Mesh, params: &CarlemanParams, s: f64) -> Result<f64> {
    let phi_max = GridFn::<Real>::sample(mesh, Placement::Closed, |x| params.phi(x))
        .values()
        .iter()
        .fold(0.0f64, |a, &v| a.max(v));
    if 2.0 * s * phi_max > MAX_WEIGHT_EXPONENT {
        return Err(Error::InvalidParam(format!(
            "2*s*phi = {:.1} not representable",
            2.0 * s * phi_max
        )));
    }
    let e2 = GridFn::<Real>::sample(mesh, Placement::Closed, |x| (2.0 * s * params.phi(x)).exp());
    let mut sup = 0.0f64;
    for i in 0..mesh.dim() {
        let a = avg(&e2, i)?;
        for flat in 0..a.len() {
            let x = mesh.point::<f64>(Placement::DualK(i), flat);
            let ratio = (-2.0 * s * params.phi(&x[..mesh.dim()])).exp() * a.values()[flat];
            sup = sup.max((ratio - 1.0).abs());
        }
    }
    Ok(sup)
}

/// One-sided excess of `A_i(|D_i exp(s phi)|^2)` over its continuum bound
/// `lambda^2 s^2 phi^2 (d_i psi)^2 exp(2 s phi)`, normalised by the bound plus
/// the bare squared weight.  Nonpositive when the inequality holds exactly;
/// decays like `(sh)^2` otherwise.
pub fn grad_bound_excess(mesh: Mesh, params: &CarlemanParams, s: f64) -> Result<f64> {
    let n = mesh.dim();
    let h = mesh.h::<f64>();
    let r = GridFn::<Real>::sample(mesh, Placement::Closed, |x| (s * params.phi(x)).exp());
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        let dr = diff(&r, i)?;
        let sq = dr.map(|v| v * v);
        let asq = avg_dual(&sq, i)?;
        for flat in 0..asq.len() {
            let x = mesh.point::<f64>(Placement::Primal, flat);
            let x = &x[..n];
            let e2 = (2.0 * s * params.phi(x)).exp();
            let g = params.psi.grad(x, i, h);
            let bound = params.lambda * params.lambda * s * s * params.phi(x) * params.phi(x) * g * g * e2;
            let excess = (asq.values()[flat] - bound) / (bound + e2);
            worst = worst.max(excess);
        }
    }
    Ok(worst)
}

/// Order-of-accuracy report of a weight scaling law across a mesh sweep.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ScalingReport {
    pub nodes: Vec<usize>,
    pub sh: Vec<f64>,
    pub sup_err: Vec<f64>,
    pub slope: f64,
}

/// Fit the log-log slope of `sup |exp(-2 s phi) A_i(exp(2 s phi)) - 1|`
/// against `s*h` across a mesh sweep at fixed `tau` (so `s = tau` at `t0` and
/// `s*h` shrinks with `h`).  The law predicts slope 2.
pub fn weight_ratio_scaling(
    params: &CarlemanParams,
    n: usize,
    nodes_sweep: &[usize],
) -> Result<ScalingReport> {
    if nodes_sweep.len() < 3 {
        return Err(Error::InvalidParam(
            "scaling sweep needs at least 3 mesh levels".into(),
        ));
    }
    let s = params.tau; // value of s(t0)
    let mut sh = Vec::new();
    let mut sup_err = Vec::new();
    let mut nodes = Vec::new();
    for &np in nodes_sweep {
        let mesh = Mesh::new(n, np)?;
        let h = mesh.h::<f64>();
        let sup = avg_exp_ratio_sup(mesh, params, s)?;
        nodes.push(np);
        sh.push(s * h);
        sup_err.push(sup);
    }
    let xs: Vec<f64> = sh.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = sup_err.iter().map(|v| v.ln()).collect();
    let slope = fit_slope(&xs, &ys);
    Ok(ScalingReport {
        nodes,
        sh,
        sup_err,
        slope,
    })
}

/// Same fit for the one-sided gradient bound excess.
pub fn grad_bound_scaling(
    params: &CarlemanParams,
    n: usize,
    nodes_sweep: &[usize],
) -> Result<ScalingReport> {
    if nodes_sweep.len() < 3 {
        return Err(Error::InvalidParam(
            "scaling sweep needs at least 3 mesh levels".into(),
        ));
    }
    let s = params.tau;
    let mut sh = Vec::new();
    let mut sup_err = Vec::new();
    let mut nodes = Vec::new();
    for &np in nodes_sweep {
        let mesh = Mesh::new(n, np)?;
        let h = mesh.h::<f64>();
        let excess = grad_bound_excess(mesh, params, s)?.max(1e-300);
        nodes.push(np);
        sh.push(s * h);
        sup_err.push(excess);
    }
    let xs: Vec<f64> = sh.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = sup_err.iter().map(|v| v.ln()).collect();
    let slope = fit_slope(&xs, &ys);
    Ok(ScalingReport {
        nodes,
        sh,
        sup_err,
        slope,
    })
}

/// Inputs of the generalized-weight construction for the Cauchy problem.
#[derive(Clone, Debug)]
pub struct CauchyWeightConfig {
    /// Ball center; must lie outside the closed cube.
    pub center: Vec<f64>,
    /// Added to `max_x |x-center|^2` to make the enclosing ball strict.
    pub margin: f64,
    /// The level count; the recovery set sits above the `4/n_levels` level.
    pub n_levels: f64,
    pub beta: f64,
    pub eps: f64,
    pub lambda: f64,
    pub t0: f64,
}

/// Generalized weight with its level constants and level sets.
#[derive(Clone, Debug)]
pub struct CauchyWeight {
    pub params: CarlemanParams,
    /// `||Psi||_{C(G1)} = r^2` for the ball profile.
    pub psi_sup: f64,
    pub mu: [f64; 4],
    /// Box of primal coordinates contained in the recovery level set.
    pub m0_lo: Vec<usize>,
    pub m0_hi: Vec<usize>,
    /// Per level `k = 1..4`: the (time index, primal flat) pairs with
    /// `Phi(x, t) > mu_k`.
    pub level_sets: Vec<Vec<(usize, usize)>>,
    pub inclusion_verified: bool,
}

/// Build the generalized weight of the Cauchy stability argument: an
/// enclosing-ball profile, the level constants `mu_1..mu_4`, the recovery box
/// and the level sets, with the inclusion of the recovery cylinder in the
/// fourth level set checked by enumeration.
pub fn cauchy_weight(mesh: Mesh, times: &[f64], cfg: &CauchyWeightConfig) -> Result<CauchyWeight> {
    let n = mesh.dim();
    if cfg.center.len() != n {
        return Err(Error::InvalidParam("center dimension mismatch".into()));
    }
    if cfg.center.iter().all(|&c| (0.0..=1.0).contains(&c)) {
        return Err(Error::InvalidParam(
            "ball center must lie outside the closed unit hypercube".into(),
        ));
    }
    if cfg.margin <= 0.0 {
        return Err(Error::InvalidParam("margin must be positive".into()));
    }
    if cfg.n_levels <= 4.0 {
        return Err(Error::InvalidParam(
            "n_levels must exceed 4 so the recovery level is proper".into(),
        ));
    }
    let t_final = *times.last().unwrap();
    let corner_dist_sq = |corner: &dyn Fn(usize) -> f64| -> f64 {
        (0..n)
            .map(|d| {
                let c = corner(d) - cfg.center[d];
                c * c
            })
            .sum()
    };
    // max over the cube of |x - center|^2 is attained at a corner
    let mut max_d2 = 0.0f64;
    for mask in 0..(1usize << n) {
        let d2 = corner_dist_sq(&|d| if mask >> d & 1 == 1 { 1.0 } else { 0.0 });
        max_d2 = max_d2.max(d2);
    }
    let r_squared = max_d2 + cfg.margin;
    let psi_sup = r_squared; // attained at the center of the ball

    // sandwich condition on beta
    if !(2.0 * cfg.beta * cfg.eps * cfg.eps > psi_sup && psi_sup > cfg.beta * cfg.eps * cfg.eps) {
        return Err(Error::InvalidParam(format!(
            "beta={} violates 2*beta*eps^2 > ||Psi|| > beta*eps^2 (||Psi|| = {psi_sup:.4}, eps = {})",
            cfg.beta, cfg.eps
        )));
    }
    let sqrt2_eps = std::f64::consts::SQRT_2 * cfg.eps;
    if !(cfg.t0 >= sqrt2_eps && cfg.t0 <= t_final - sqrt2_eps) {
        return Err(Error::InvalidParam(format!(
            "t0={} outside [sqrt(2) eps, T - sqrt(2) eps] = [{sqrt2_eps:.4}, {:.4}]",
            cfg.t0,
            t_final - sqrt2_eps
        )));
    }

    let psi = PsiSpec::Ball {
        center: cfg.center.clone(),
        r_squared,
    };
    let params = CarlemanParams::new(psi, cfg.lambda, 1.0, cfg.beta, cfg.t0);
    // monotone level constants
    let mu_k = |k: f64| {
        (cfg.lambda * (k / cfg.n_levels * psi_sup - cfg.beta * cfg.eps * cfg.eps / cfg.n_levels))
            .exp()
    };
    let mu = [mu_k(1.0), mu_k(2.0), mu_k(3.0), mu_k(4.0)];

    // recovery box: greedy expansion of the best point inside the level set
    let threshold = 4.0 / cfg.n_levels * psi_sup;
    let card = mesh.card(Placement::Primal);
    let mut best: Option<(usize, f64)> = None;
    let mut qualifies = vec![false; card];
    for flat in 0..card {
        let x = mesh.point::<f64>(Placement::Primal, flat);
        let v = params.psi.eval(&x[..n]);
        if v > threshold {
            qualifies[flat] = true;
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((flat, v));
            }
        }
    }
    let (seed_flat, _) = best.ok_or_else(|| {
        Error::Degenerate(format!(
            "recovery level set {{Psi > {threshold:.4}}} contains no primal point; \
             increase n_levels or the margin"
        ))
    })?;
    let seed = mesh.unlocate(Placement::Primal, seed_flat)?;
    let mut lo: Vec<usize> = seed[..n].to_vec();
    let mut hi = lo.clone();
    let box_qualifies = |lo: &[usize], hi: &[usize]| -> bool {
        let mut ok = true;
        crate::norms::for_each_box(n, lo, hi, &mut |c| {
            let flat = mesh.flat(Placement::Primal, &c.map(|v| v.saturating_sub(1))[..n]);
            if !qualifies[flat] {
                ok = false;
            }
        });
        ok
    };
    let mut grew = true;
    while grew {
        grew = false;
        for d in 0..n {
            if lo[d] > 1 {
                let mut cand = lo.clone();
                cand[d] -= 1;
                if box_qualifies(&cand, &hi) {
                    lo = cand;
                    grew = true;
                }
            }
            if hi[d] < mesh.nodes_per_axis() {
                let mut cand = hi.clone();
                cand[d] += 1;
                if box_qualifies(&lo, &cand) {
                    hi = cand;
                    grew = true;
                }
            }
        }
    }

    // level sets over the space-time grid
    let mut level_sets = vec![Vec::new(); 4];
    for (m, &t) in times.iter().enumerate() {
        let theta = cfg.beta * (t - cfg.t0) * (t - cfg.t0);
        for flat in 0..card {
            let x = mesh.point::<f64>(Placement::Primal, flat);
            let big_phi = (cfg.lambda * (params.psi.eval(&x[..n]) - theta)).exp();
            for (k, mu_val) in mu.iter().enumerate() {
                if big_phi > *mu_val {
                    level_sets[k].push((m, flat));
                }
            }
        }
    }

    // enumeration check of: box x (t0 - eps/sqrt(n_levels), t0 + eps/sqrt(n_levels))
    // inside the fourth level set
    let half_window = cfg.eps / cfg.n_levels.sqrt();
    let mut inclusion_verified = true;
    for (m, &t) in times.iter().enumerate() {
        if (t - cfg.t0).abs() >= half_window {
            continue;
        }
        let theta = cfg.beta * (t - cfg.t0) * (t - cfg.t0);
        crate::norms::for_each_box(n, &lo, &hi, &mut |c| {
            let flat = mesh.flat(Placement::Primal, &c.map(|v| v.saturating_sub(1))[..n]);
            let x = mesh.point::<f64>(Placement::Primal, flat);
            let big_phi = (cfg.lambda * (params.psi.eval(&x[..n]) - theta)).exp();
            if big_phi <= mu[3] {
                inclusion_verified = false;
            }
        });
        let _ = m;
    }

    Ok(CauchyWeight {
        params,
        psi_sup,
        mu,
        m0_lo: lo,
        m0_hi: hi,
        level_sets,
        inclusion_verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x_star: Vec<f64>, lambda: f64, tau: f64, beta: f64, t0: f64) -> CarlemanParams {
        CarlemanParams::new(PsiSpec::Quadratic { x_star }, lambda, tau, beta, t0)
    }

    #[test]
    fn plug_in_values() {
        let p = quadratic(vec![-1.0], 1.0, 1.0, 1.0, 0.5);
        assert!((p.psi.eval(&[0.5]) - 2.25).abs() < 1e-15);
        assert!((p.phi(&[0.5]) - 2.25f64.exp()).abs() < 1e-12);
        // theta(t0) = 0 hence s(t0) = tau
        let p = quadratic(vec![-1.0], 1.0, 3.0, 2.0, 0.5);
        assert_eq!(p.theta(0.5), 0.0);
        assert_eq!(p.s(0.5), 3.0);
        // tau=2, beta=1, t0=0.5, t=1: s = 2 exp(-lambda/4)
        let p = quadratic(vec![-1.0], 1.5, 2.0, 1.0, 0.5);
        assert!((p.s(1.0) - 2.0 * (-1.5 * 0.25f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn s_is_bounded_by_tau_with_equality_at_t0() {
        let p = quadratic(vec![-0.5], 2.0, 4.0, 1.5, 0.3);
        for m in 0..=100 {
            let t = m as f64 / 100.0;
            let s = p.s(t);
            assert!(s <= 4.0 + 1e-15);
            if (t - 0.3).abs() > 1e-9 {
                assert!(s < 4.0);
            }
        }
    }

    #[test]
    fn r_times_rho_is_one() {
        let mesh = Mesh::new(2, 5).unwrap();
        let times: Vec<f64> = (0..=8).map(|m| m as f64 / 8.0).collect();
        let p = quadratic(vec![-0.3, -0.3], 1.0, 2.0, 1.0, 0.5);
        let w = build_weights(p, mesh, &times).unwrap();
        for m in [0, 4, 8] {
            for placement in [Placement::Primal, Placement::DualK(0), Placement::Closed] {
                let r = w.r_grid(m, placement);
                let rho = w.rho_grid(m, placement);
                for (a, b) in r.values().iter().zip(rho.values()) {
                    assert!((a * b - 1.0).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn flat_profile_rejected() {
        let mesh = Mesh::new(1, 5).unwrap();
        let times = vec![0.0, 0.5, 1.0];
        let p = CarlemanParams::new(PsiSpec::Custom(Arc::new(|_| 3.0)), 1.0, 1.0, 1.0, 0.5);
        assert!(build_weights(p, mesh, &times).is_err());
    }

    #[test]
    fn overflow_guard_trips() {
        let mesh = Mesh::new(1, 5).unwrap();
        let times = vec![0.0, 0.5, 1.0];
        let p = quadratic(vec![-4.0], 2.0, 16.0, 1.0, 0.5);
        assert!(build_weights(p, mesh, &times).is_err());
    }

    #[test]
    fn quadratic_discrete_gradient_is_exact() {
        // psi quadratic makes A_i D_i psi equal the analytic gradient exactly
        let mesh = Mesh::new(2, 6).unwrap();
        let p = quadratic(vec![-0.5, -1.0], 1.0, 1.0, 1.0, 0.5);
        let psi = GridFn::<Real>::sample(mesh, Placement::Closed, |x| p.psi.eval(x));
        let h = mesh.h::<f64>();
        for i in 0..2 {
            let g = avg_dual(&diff(&psi, i).unwrap(), i).unwrap();
            for flat in 0..g.len() {
                let x = mesh.point::<f64>(Placement::Primal, flat);
                let exact = p.psi.grad(&x[..2], i, h);
                assert!((g.values()[flat] - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
            }
        }
    }

    #[test]
    fn ratio_error_positive_at_coarse_resolution() {
        let mesh = Mesh::new(1, 7).unwrap();
        let p = quadratic(vec![-1.0], 1.0, 1.0, 1.0, 0.5);
        let sup = avg_exp_ratio_sup(mesh, &p, 1.0).unwrap();
        assert!(sup > 0.0);
    }

    #[test]
    fn ratio_scaling_slope_is_two() {
        // the expansion parameter is s*h*lambda*phi*|grad psi|, so the sweep
        // must stay in the regime where that product is small
        let p = quadratic(vec![-0.05], 1.0, 2.0, 1.0, 0.5);
        let rep = weight_ratio_scaling(&p, 1, &[15, 31, 63]).unwrap();
        assert!(
            (rep.slope - 2.0).abs() <= 0.3,
            "slope {} err {:?}",
            rep.slope,
            rep.sup_err
        );
        assert!(weight_ratio_scaling(&p, 1, &[7, 15]).is_err());
    }

    #[test]
    fn doubling_tau_roughly_quadruples_the_error() {
        let mesh = Mesh::new(1, 63).unwrap();
        let p = quadratic(vec![-0.05], 1.0, 1.0, 1.0, 0.5);
        let e1 = avg_exp_ratio_sup(mesh, &p, 1.0).unwrap();
        let e2 = avg_exp_ratio_sup(mesh, &p, 2.0).unwrap();
        let ratio = e2 / e1;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gradient_bound_excess_scales_quadratically() {
        let p = quadratic(vec![-0.05], 1.0, 2.0, 1.0, 0.5);
        let rep = grad_bound_scaling(&p, 1, &[15, 31, 63]).unwrap();
        // one-sided law: either the bound already holds (excess at the floor)
        // or the excess decays at second order
        assert!(
            rep.sup_err.iter().all(|&e| e <= 1e-12) || (rep.slope - 2.0).abs() <= 0.5,
            "slope {} excess {:?}",
            rep.slope,
            rep.sup_err
        );
    }

    fn cauchy_cfg() -> CauchyWeightConfig {
        // ||Psi|| = max|x-c|^2 + margin = 1.44 + 0.2 = 1.64 must sit between
        // beta*eps^2 and 2*beta*eps^2
        CauchyWeightConfig {
            center: vec![-0.2],
            margin: 0.2,
            n_levels: 8.0,
            beta: 20.0,
            eps: 0.25,
            lambda: 1.0,
            t0: 0.5,
        }
    }

    #[test]
    fn cauchy_weight_levels_are_monotone_and_inclusion_holds() {
        let mesh = Mesh::new(1, 15).unwrap();
        let times: Vec<f64> = (0..=64).map(|m| m as f64 / 64.0).collect();
        let cw = cauchy_weight(mesh, &times, &cauchy_cfg()).unwrap();
        assert!(cw.mu[0] < cw.mu[1] && cw.mu[1] < cw.mu[2] && cw.mu[2] < cw.mu[3]);
        assert!(cw.inclusion_verified);
        assert!(!cw.level_sets[3].is_empty());
        // deeper levels are smaller
        assert!(cw.level_sets[0].len() >= cw.level_sets[3].len());
    }

    #[test]
    fn cauchy_weight_rejects_bad_sandwich() {
        let mesh = Mesh::new(1, 15).unwrap();
        let times: Vec<f64> = (0..=8).map(|m| m as f64 / 8.0).collect();
        let mut cfg = cauchy_cfg();
        cfg.beta = 1.0; // beta*eps^2 = 0.0625 << ||Psi||
        assert!(cauchy_weight(mesh, &times, &cfg).is_err());
    }
}
