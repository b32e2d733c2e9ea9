//! First eigenpair of the Dirichlet p-Laplacian and the comparison
//! constants between eigenfields and the distance function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{ratio_extremes, Mesh, ScalarField};
use crate::plap::{
    apply_plaplacian, signed_pow, solve_dirichlet_from, torsion, IterationTrace, PlapProblem,
    SolverConfig, Source, TraceEntry,
};
use crate::real::{sup_diff, sup_norm, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig<T> {
    /// Stop once both the relative change of λ and the sup-norm change of φ
    /// fall below this value.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for EigenConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-9),
            max_iter: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenPair<T> {
    pub p: T,
    pub lambda: T,
    /// Normalized to `‖φ‖∞ = 1`.
    pub phi: ScalarField<T>,
    pub iterations: usize,
    /// `sup_i |⟨−Δ_p φ, φ_i⟩ − λ ∫φ^{p−1}φ_i|` over interior nodes.
    pub residual: T,
}

/// Rayleigh quotient `∫|∇φ|^p / ∫φ^p` with the quadrature of the assembly.
pub fn rayleigh_quotient<T: Real>(mesh: &Mesh<T>, p: T, phi: &[T]) -> T {
    let a = apply_plaplacian(mesh, p, phi);
    let mut num = T::zero();
    let mut den = T::zero();
    for &i in mesh.interior() {
        num += a[i] * phi[i];
        den += mesh.lumped_mass()[i] * phi[i].abs().powf(p);
    }
    num / den
}

fn eigen_residual<T: Real>(mesh: &Mesh<T>, p: T, lambda: T, phi: &[T]) -> T {
    let a = apply_plaplacian(mesh, p, phi);
    mesh.interior().iter().fold(T::zero(), |m, &i| {
        let r = a[i] - lambda * mesh.lumped_mass()[i] * signed_pow(phi[i], p);
        m.max(r.abs())
    })
}

/// Inverse power iteration `−Δ_p w = φ_k^{p−1}`, `φ_{k+1} = w/‖w‖∞`,
/// started from the torsion function.
pub fn first_eigenpair<T: Real>(
    mesh: &Mesh<T>,
    p: T,
    cfg: &EigenConfig<T>,
    solver: &SolverConfig<T>,
) -> Result<EigenPair<T>> {
    let start = torsion(mesh, p, solver)?;
    first_eigenpair_from(mesh, p, start.values(), cfg, solver)
}

/// As [`first_eigenpair`], from any field positive at interior nodes.
pub fn first_eigenpair_from<T: Real>(
    mesh: &Mesh<T>,
    p: T,
    start: &[T],
    cfg: &EigenConfig<T>,
    solver: &SolverConfig<T>,
) -> Result<EigenPair<T>> {
    mesh.check_len(start.len())?;
    if mesh.interior().is_empty() {
        return Err(Error::EmptyInterior);
    }
    let mut phi = normalized(mesh, start)?;
    let mut lambda = rayleigh_quotient(mesh, p, &phi);
    let pm1 = p - T::one();
    let mut trace = IterationTrace::default();

    for it in 1..=cfg.max_iter {
        let rhs = phi.iter().map(|&v| signed_pow(v, p)).collect();
        let guess: Vec<T> = phi
            .iter()
            .map(|&v| v * lambda.powf(-T::one() / pm1))
            .collect();
        let problem = PlapProblem::new(p, Source::Nodal(rhs));
        let (w, _) = solve_dirichlet_from(mesh, &problem, solver, Some(&guess))?;
        let next = normalized(mesh, &w)?;
        let next_lambda = rayleigh_quotient(mesh, p, &next);
        let dphi = sup_diff(&next, &phi);
        let dlam = (next_lambda - lambda).abs() / next_lambda;
        trace.entries.push(TraceEntry {
            iteration: it,
            residual: dphi.max(dlam).as_f64(),
            damping: 1.0,
        });
        phi = next;
        lambda = next_lambda;
        if dphi < cfg.tol && dlam < cfg.tol {
            let residual = eigen_residual(mesh, p, lambda, &phi);
            return Ok(EigenPair {
                p,
                lambda,
                phi: ScalarField::new(phi),
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "inverse power iteration".into(),
        iterations: cfg.max_iter,
        residual: trace.entries.last().map_or(f64::NAN, |e| e.residual),
        trace,
    })
}

fn normalized<T: Real>(mesh: &Mesh<T>, w: &[T]) -> Result<Vec<T>> {
    let s = sup_norm(w);
    for &i in mesh.interior() {
        if !(w[i] > T::zero()) {
            return Err(Error::DegenerateEigenfield { node: i });
        }
    }
    Ok(w.iter().map(|&v| v / s).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonNodes {
    pub l1: usize,
    pub l2: usize,
    pub l: usize,
    pub l_hat: usize,
}

/// `l1 φ_p ≤ φ_q ≤ l2 φ_p` and `l d ≤ φ_p, φ_q ≤ l_hat d` at interior nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonConstants<T> {
    pub l1: T,
    pub l2: T,
    pub l: T,
    pub l_hat: T,
    /// `max(‖φ_p‖∞, ‖φ_q‖∞)`
    #[serde(rename = "M")]
    pub big_m: T,
    pub nodes: ComparisonNodes,
}

pub fn comparison_constants<T: Real>(
    phi_p: &EigenPair<T>,
    phi_q: &EigenPair<T>,
    mesh: &Mesh<T>,
) -> Result<ComparisonConstants<T>> {
    let (a, b) = (phi_p.phi.values(), phi_q.phi.values());
    mesh.check_len(a.len())?;
    mesh.check_len(b.len())?;
    for &i in mesh.interior() {
        if !(a[i] > T::zero()) || !(b[i] > T::zero()) {
            return Err(Error::DegenerateEigenfield { node: i });
        }
    }
    let quotient: Vec<T> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| if x > T::zero() { y / x } else { T::zero() })
        .collect();
    let mut it = mesh.interior().iter();
    let &first = it.next().ok_or(Error::EmptyInterior)?;
    let (mut l1, mut l2) = ((quotient[first], first), (quotient[first], first));
    for &i in it {
        if quotient[i] < l1.0 {
            l1 = (quotient[i], i);
        }
        if quotient[i] > l2.0 {
            l2 = (quotient[i], i);
        }
    }
    let rp = ratio_extremes(mesh, a)?;
    let rq = ratio_extremes(mesh, b)?;
    let l = if rp.low <= rq.low { (rp.low, rp.low_node) } else { (rq.low, rq.low_node) };
    let l_hat = if rp.high >= rq.high {
        (rp.high, rp.high_node)
    } else {
        (rq.high, rq.high_node)
    };
    Ok(ComparisonConstants {
        l1: l1.0,
        l2: l2.0,
        l: l.0,
        l_hat: l_hat.0,
        big_m: sup_norm(a).max(sup_norm(b)),
        nodes: ComparisonNodes {
            l1: l1.1,
            l2: l2.1,
            l: l.1,
            l_hat: l_hat.1,
        },
    })
}

/// `π_p = 2π (p−1)^{1/p} / (p sin(π/p))`.
pub fn pi_p(p: f64) -> f64 {
    let pi = std::f64::consts::PI;
    2.0 * pi * (p - 1.0).powf(1.0 / p) / (p * (pi / p).sin())
}

/// First Dirichlet eigenvalue of the 1D p-Laplacian on an interval of
/// length `L`: `(π_p / L)^p`.
pub fn interval_eigenvalue(p: f64, length: f64) -> f64 {
    (pi_p(p) / length).powf(p)
}
