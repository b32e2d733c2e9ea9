//! Dirichlet problems for the p-Laplacian and its shifted variant
//!
//! ```text
//!     −Δ_p u + ρ d(x)^e |u|^{p−2} u = h   in Ω,     u = 0 on ∂Ω
//! ```
//!
//! discretized with P1 elements. The flux term is integrated exactly
//! (gradients are constant per element). Zeroth-order terms use vertex
//! quadrature on every element: the weight `d^e` is evaluated at the
//! barycenter and the field at the vertex, so row `i` only involves `u_i`.
//! The nonlinear system is solved by a lagged-diffusivity (Kačanov) fixed
//! point with a banded Cholesky factorization for each linear step.

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::mesh::{gradient, Mesh, ScalarField};
use crate::real::{sup_norm, Real};

/// Right-hand side of a Dirichlet problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Source<T> {
    /// Nodal values, integrated as `h_i ∫φ_i`.
    Nodal(Vec<T>),
    /// Values at element barycenters, integrated as `Σ_e h_e |e|/k`.
    Element(Vec<T>),
    /// An already assembled load vector `∫ h φ_i`.
    Load(Vec<T>),
}

impl<T: Real> Source<T> {
    pub fn constant(mesh: &Mesh<T>, c: T) -> Self {
        Source::Nodal(vec![c; mesh.num_nodes()])
    }

    pub fn load_vector(&self, mesh: &Mesh<T>) -> Result<Vec<T>> {
        match self {
            Source::Nodal(h) => {
                mesh.check_len(h.len())?;
                Ok(h.iter().zip(mesh.lumped_mass()).map(|(&h, &w)| h * w).collect())
            }
            Source::Element(h) => {
                if h.len() != mesh.elements().len() {
                    return Err(Error::LengthMismatch {
                        expected: mesh.elements().len(),
                        got: h.len(),
                    });
                }
                let mut b = vec![T::zero(); mesh.num_nodes()];
                for (e, &v) in mesh.elements().iter().zip(h) {
                    let w = v * e.vertex_weight();
                    for &i in e.nodes() {
                        b[i] += w;
                    }
                }
                Ok(b)
            }
            Source::Load(b) => {
                mesh.check_len(b.len())?;
                Ok(b.clone())
            }
        }
    }

    /// `‖h‖∞` at the points where `h` is sampled.
    pub fn sup_norm(&self, mesh: &Mesh<T>) -> T {
        match self {
            Source::Nodal(h) => sup_norm(h),
            Source::Element(h) => sup_norm(h),
            Source::Load(b) => mesh
                .interior()
                .iter()
                .fold(T::zero(), |m, &i| m.max((b[i] / mesh.lumped_mass()[i]).abs())),
        }
    }

    fn is_finite(&self) -> bool {
        let v = match self {
            Source::Nodal(h) | Source::Element(h) | Source::Load(h) => h,
        };
        v.iter().all(|x| x.is_finite())
    }
}

/// The term `ρ d(x)^e |u|^{p−2}u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Shift<T> {
    pub rho_hat: T,
    pub exponent: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlapProblem<T> {
    pub p: T,
    pub rhs: Source<T>,
    pub shift: Option<Shift<T>>,
}

impl<T: Real> PlapProblem<T> {
    pub fn new(p: T, rhs: Source<T>) -> Self {
        Self {
            p,
            rhs,
            shift: None,
        }
    }

    pub fn with_shift(mut self, rho_hat: T, exponent: T) -> Self {
        self.shift = Some(Shift { rho_hat, exponent });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > T::one()) || !self.p.is_finite() {
            return Err(Error::InvalidProblem(format!("p must exceed 1, got {}", self.p)));
        }
        if let Some(s) = self.shift {
            if !(s.rho_hat >= T::zero()) {
                return Err(Error::InvalidProblem("shift coefficient must be nonnegative".into()));
            }
            if !(s.exponent > -self.p) {
                return Err(Error::InvalidProblem(format!(
                    "shift weight exponent {} must exceed -p = {}",
                    s.exponent, -self.p
                )));
            }
        }
        if !self.rhs.is_finite() {
            return Err(Error::InvalidProblem("right-hand side is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig<T> {
    /// ε in the lagged diffusivity `(|∇u|² + ε²)^{(p−2)/2}`.
    pub grad_reg: T,
    pub max_iter: usize,
    pub tol_residual: T,
    /// Upper bound for the update relaxation; the effective start value is
    /// `min(damping, 2/p)`.
    pub damping: T,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            grad_reg: T::lit(1e-8),
            max_iter: 400,
            tol_residual: T::lit(1e-10),
            damping: T::one(),
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > T::zero()) || self.max_iter == 0 {
            return Err(Error::InvalidProblem(
                "solver needs tol_residual > 0 and max_iter >= 1".into(),
            ));
        }
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::InvalidProblem("damping must lie in (0, 1]".into()));
        }
        if !(self.grad_reg >= T::zero()) {
            return Err(Error::InvalidProblem("grad_reg must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub residual: f64,
    pub damping: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub entries: Vec<TraceEntry>,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.entries.last().map_or(0, |e| e.iteration)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// `s |s|^{p−2}`, zero at `s = 0`.
#[inline]
pub(crate) fn signed_pow<T: Real>(s: T, p: T) -> T {
    if s == T::zero() {
        T::zero()
    } else {
        s * s.abs().powf(p - T::lit(2.0))
    }
}

/// Weak-form p-Laplacian `∫ |∇u|^{p−2}∇u·∇φ_i` for every node.
pub fn apply_plaplacian<T: Real>(mesh: &Mesh<T>, p: T, u: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); mesh.num_nodes()];
    let two = T::lit(2.0);
    for e in mesh.elements() {
        let g = e.gradient_of(u);
        let g2 = g[0] * g[0] + g[1] * g[1];
        if g2 == T::zero() {
            continue;
        }
        let k = e.measure() * g2.powf((p - two) / two);
        for (&i, b) in e.nodes().iter().zip(e.basis_grads()) {
            out[i] += k * (g[0] * b[0] + g[1] * b[1]);
        }
    }
    out
}

fn shift_weights<T: Real>(mesh: &Mesh<T>, shift: Option<Shift<T>>) -> Option<(T, Vec<T>)> {
    shift.map(|s| (s.rho_hat, mesh.weight_integrals(s.exponent)))
}

fn residual_with<T: Real>(
    mesh: &Mesh<T>,
    p: T,
    load: &[T],
    shift: &Option<(T, Vec<T>)>,
    u: &[T],
) -> Vec<T> {
    let mut r = apply_plaplacian(mesh, p, u);
    for i in 0..r.len() {
        if mesh.is_boundary(i) {
            r[i] = T::zero();
            continue;
        }
        if let Some((rho, w)) = shift {
            r[i] += *rho * w[i] * signed_pow(u[i], p);
        }
        r[i] -= load[i];
    }
    r
}

/// Discrete residual, zero at boundary nodes.
pub fn residual<T: Real>(mesh: &Mesh<T>, problem: &PlapProblem<T>, u: &[T]) -> Result<Vec<T>> {
    mesh.check_len(u.len())?;
    let load = problem.rhs.load_vector(mesh)?;
    let shift = shift_weights(mesh, problem.shift);
    Ok(residual_with(mesh, problem.p, &load, &shift, u))
}

/// Interior renumbering and band structure shared by the linear solves.
struct Layout {
    index: Vec<usize>,
    bw: usize,
}

impl Layout {
    fn new<T: Real>(mesh: &Mesh<T>) -> Self {
        let mut index = vec![usize::MAX; mesh.num_nodes()];
        for (k, &i) in mesh.interior().iter().enumerate() {
            index[i] = k;
        }
        let mut bw = 0;
        for e in mesh.elements() {
            for &a in e.nodes() {
                for &b in e.nodes() {
                    if index[a] != usize::MAX && index[b] != usize::MAX {
                        bw = bw.max(index[a].abs_diff(index[b]));
                    }
                }
            }
        }
        Self { index, bw }
    }
}

/// Solves the linear problem with frozen diffusivity `kappa_e` per element and
/// diagonal zeroth-order coefficients `diag_i`.
fn linear_solve<T: Real>(
    mesh: &Mesh<T>,
    layout: &Layout,
    kappa: &[T],
    diag: Option<&[T]>,
    load: &[T],
) -> Result<Vec<T>> {
    let n = mesh.interior().len();
    let mut a = BandMatrix::zeros(n, layout.bw);
    for (e, &k) in mesh.elements().iter().zip(kappa) {
        let km = k * e.measure();
        let nodes = e.nodes();
        let grads = e.basis_grads();
        for x in 0..nodes.len() {
            let ix = layout.index[nodes[x]];
            if ix == usize::MAX {
                continue;
            }
            for y in x..nodes.len() {
                let iy = layout.index[nodes[y]];
                if iy == usize::MAX {
                    continue;
                }
                let v = km * (grads[x][0] * grads[y][0] + grads[x][1] * grads[y][1]);
                a.add(ix, iy, v);
            }
        }
    }
    if let Some(diag) = diag {
        for (k, &i) in mesh.interior().iter().enumerate() {
            a.add(k, k, diag[i]);
        }
    }
    let rhs: Vec<T> = mesh.interior().iter().map(|&i| load[i]).collect();
    let x = a.cholesky()?.solve(&rhs);
    let mut u = vec![T::zero(); mesh.num_nodes()];
    for (k, &i) in mesh.interior().iter().enumerate() {
        u[i] = x[k];
    }
    Ok(u)
}

pub fn solve_dirichlet<T: Real>(
    mesh: &Mesh<T>,
    problem: &PlapProblem<T>,
    cfg: &SolverConfig<T>,
) -> Result<(ScalarField<T>, IterationTrace)> {
    solve_dirichlet_from(mesh, problem, cfg, None)
}

/// Like [`solve_dirichlet`], starting the fixed point from `initial` when given.
pub fn solve_dirichlet_from<T: Real>(
    mesh: &Mesh<T>,
    problem: &PlapProblem<T>,
    cfg: &SolverConfig<T>,
    initial: Option<&[T]>,
) -> Result<(ScalarField<T>, IterationTrace)> {
    problem.validate()?;
    cfg.validate()?;
    if mesh.interior().is_empty() {
        return Err(Error::EmptyInterior);
    }
    let p = problem.p;
    let two = T::lit(2.0);
    let load = problem.rhs.load_vector(mesh)?;
    let shift = shift_weights(mesh, problem.shift);
    let layout = Layout::new(mesh);
    let eps2 = cfg.grad_reg * cfg.grad_reg;
    let expo = (p - two) / two;

    let mut u = match initial {
        Some(u0) => {
            mesh.check_len(u0.len())?;
            let mut u = u0.to_vec();
            for &i in mesh.interior() {
                u[i] = u0[i];
            }
            for (v, &b) in u.iter_mut().zip(mesh.boundary_mask()) {
                if b {
                    *v = T::zero();
                }
            }
            u
        }
        None => initial_guess(mesh, &layout, p, &load, &shift)?,
    };

    let sup = |r: &[T]| sup_norm(r);
    let mut res = sup(&residual_with(mesh, p, &load, &shift, &u));
    let theta_max = cfg.damping.min(two / p);
    let theta_min = theta_max / T::lit(1024.0);
    let mut theta = theta_max;
    let mut trace = IterationTrace::default();
    trace.entries.push(TraceEntry {
        iteration: 0,
        residual: res.as_f64(),
        damping: theta.as_f64(),
    });

    for it in 1..=cfg.max_iter {
        if res < cfg.tol_residual {
            return Ok((ScalarField::new(u), trace));
        }
        let kappa: Vec<T> = mesh
            .elements()
            .iter()
            .map(|e| {
                let g = e.gradient_of(&u);
                (g[0] * g[0] + g[1] * g[1] + eps2).powf(expo)
            })
            .collect();
        let diag = shift.as_ref().map(|(rho, w)| {
            u.iter()
                .zip(w)
                .map(|(&ui, &wi)| *rho * wi * (ui * ui + eps2).powf(expo))
                .collect::<Vec<T>>()
        });
        let target = linear_solve(mesh, &layout, &kappa, diag.as_deref(), &load)?;

        let mut th = (theta * two).min(theta_max);
        let (cand, cres) = loop {
            let cand: Vec<T> = u
                .iter()
                .zip(&target)
                .map(|(&a, &b)| a + th * (b - a))
                .collect();
            let cres = sup(&residual_with(mesh, p, &load, &shift, &cand));
            if cres <= res || th <= theta_min || !res.is_finite() {
                break (cand, cres);
            }
            th /= two;
        };
        theta = th;
        u = cand;
        res = cres;
        trace.entries.push(TraceEntry {
            iteration: it,
            residual: res.as_f64(),
            damping: theta.as_f64(),
        });
    }
    if res < cfg.tol_residual {
        return Ok((ScalarField::new(u), trace));
    }
    Err(Error::NonConvergence {
        what: "p-Laplacian solve".into(),
        iterations: cfg.max_iter,
        residual: res.as_f64(),
        trace,
    })
}

/// Solution of the linear (p = 2) problem, rescaled by the factor that
/// balances the (p−1)-homogeneous energy identity `⟨A(tu₀), tu₀⟩ = ⟨b, tu₀⟩`.
fn initial_guess<T: Real>(
    mesh: &Mesh<T>,
    layout: &Layout,
    p: T,
    load: &[T],
    shift: &Option<(T, Vec<T>)>,
) -> Result<Vec<T>> {
    let ones = vec![T::one(); mesh.elements().len()];
    let diag = shift
        .as_ref()
        .map(|(rho, w)| w.iter().map(|&wi| *rho * wi).collect::<Vec<T>>());
    let u0 = linear_solve(mesh, layout, &ones, diag.as_deref(), load)?;
    let a = apply_plaplacian(mesh, p, &u0);
    let mut energy = T::zero();
    let mut work = T::zero();
    for &i in mesh.interior() {
        energy += a[i] * u0[i];
        if let Some((rho, w)) = shift {
            energy += *rho * w[i] * u0[i].abs().powf(p);
        }
        work += load[i] * u0[i];
    }
    let t = (work / energy).powf(T::one() / (p - T::one()));
    if t.is_finite() && t > T::zero() {
        Ok(u0.into_iter().map(|v| v * t).collect())
    } else {
        Ok(u0)
    }
}

/// Torsion function: the solution of `−Δ_p ξ = 1` with zero boundary values.
pub fn torsion<T: Real>(mesh: &Mesh<T>, p: T, cfg: &SolverConfig<T>) -> Result<ScalarField<T>> {
    let problem = PlapProblem::new(p, Source::constant(mesh, T::one()));
    Ok(solve_dirichlet(mesh, &problem, cfg)?.0)
}

/// Probe right-hand sides for [`estimate_k`]: `1`, `d`, `d^{-1/2}` at
/// barycenters, and a seeded random positive nodal field.
pub fn default_probes<T: Real>(mesh: &Mesh<T>, seed: u64) -> Vec<Source<T>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let random = (0..mesh.num_nodes())
        .map(|_| T::lit(rng.gen_range(0.1..1.0)))
        .collect();
    vec![
        Source::constant(mesh, T::one()),
        Source::Nodal(mesh.dist().to_vec()),
        Source::Element(
            mesh.elements()
                .iter()
                .map(|e| e.centroid_dist().powf(T::lit(-0.5)))
                .collect(),
        ),
        Source::Nodal(random),
    ]
}

/// Empirical lower bound for the constant in `‖∇u‖∞ ≤ K ‖h‖∞^{1/(p−1)}`.
pub fn estimate_k<T: Real>(
    mesh: &Mesh<T>,
    p: T,
    probes: &[Source<T>],
    cfg: &SolverConfig<T>,
) -> Result<T> {
    let mut best = T::zero();
    for probe in probes {
        let norm = probe.sup_norm(mesh);
        if !(norm > T::zero()) {
            return Err(Error::InvalidProblem("probe right-hand side vanishes".into()));
        }
        let (u, _) = solve_dirichlet(mesh, &PlapProblem::new(p, probe.clone()), cfg)?;
        let ratio = gradient(mesh, &u).sup_norm() / norm.powf(T::one() / (p - T::one()));
        best = best.max(ratio);
    }
    Ok(best)
}
