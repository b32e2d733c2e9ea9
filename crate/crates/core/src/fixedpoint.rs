//! The solution map `T(z₁, z₂) = (u*, v*)`, the smallest solution of the
//! frozen-gradient system, its Picard iteration on the set
//! `K₁(C) × K₂(C)`, and the final verification of the coupled system.

use serde::{Deserialize, Serialize};

use crate::auxiliary::{monotone_solve, AuxProblem, AuxSolution, Direction, FrozenRhs};
use crate::barriers::{BarrierField, BarrierPair};
use crate::error::{Error, Result};
use crate::hypotheses::NonlinearitySpec;
use crate::mesh::{gradient, Mesh, ScalarField};
use crate::plap::{
    apply_plaplacian, default_probes, estimate_k, IterationTrace, SolverConfig, TraceEntry,
};
use crate::real::{sup_diff, Real};

/// Absolute slack for rectangle membership, relative slack for the gradient bound.
pub const IN_K_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KProvenance {
    Estimated,
    UserOverride,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KValue<T> {
    pub value: T,
    pub provenance: KProvenance,
    /// Raw empirical estimate and the factor applied to it.
    pub raw_estimate: Option<T>,
    pub inflation: Option<T>,
}

impl<T: Real> KValue<T> {
    pub fn user(value: T) -> Self {
        Self {
            value,
            provenance: KProvenance::UserOverride,
            raw_estimate: None,
            inflation: None,
        }
    }
}

/// Empirical gradient constant from the default probes, times `inflation`.
pub fn calibrate_k<T: Real>(
    mesh: &Mesh<T>,
    p: T,
    seed: u64,
    inflation: T,
    solver: &SolverConfig<T>,
) -> Result<KValue<T>> {
    let raw = estimate_k(mesh, p, &default_probes(mesh, seed), solver)?;
    Ok(KValue {
        value: raw * inflation,
        provenance: KProvenance::Estimated,
        raw_estimate: Some(raw),
        inflation: Some(inflation),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KConfig<T> {
    pub c: T,
    pub r1: T,
    pub r2: T,
    pub k_p: KValue<T>,
    pub k_q: KValue<T>,
}

impl<T: Real> KConfig<T> {
    pub fn new(c: T, r1: T, r2: T, k_p: KValue<T>, k_q: KValue<T>) -> Result<Self> {
        if !(c > T::one()) || !(r1 > T::zero()) || !(r2 > T::zero()) {
            return Err(Error::InvalidProblem("K sets need C > 1 and R1, R2 > 0".into()));
        }
        Ok(Self { c, r1, r2, k_p, k_q })
    }

    /// `C`, `R1`, `R2` as recorded in the pair.
    pub fn from_pair(pair: &BarrierPair<T>, k_p: KValue<T>, k_q: KValue<T>) -> Result<Self> {
        Self::new(pair.c, pair.constants.r1, pair.constants.r2, k_p, k_q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InK<T> {
    pub inside: bool,
    /// `min (y − low)` and `min (up − y)` with the nodes attaining them.
    pub low_margin: T,
    pub low_node: usize,
    pub high_margin: T,
    pub high_node: usize,
    pub grad_sup: T,
    pub grad_bound: T,
}

/// `low ≤ y ≤ up` nodewise and `‖∇y‖∞ ≤ C R`.
pub fn in_k<T: Real>(mesh: &Mesh<T>, y: &[T], which: Which, kcfg: &KConfig<T>, pair: &BarrierPair<T>) -> Result<InK<T>> {
    mesh.check_len(y.len())?;
    let (lo, up, r) = match which {
        Which::First => (&pair.u_low, &pair.u_up, kcfg.r1),
        Which::Second => (&pair.v_low, &pair.v_up, kcfg.r2),
    };
    let mut out = InK {
        inside: true,
        low_margin: T::infinity(),
        low_node: 0,
        high_margin: T::infinity(),
        high_node: 0,
        grad_sup: gradient(mesh, y).sup_norm(),
        grad_bound: kcfg.c * r,
    };
    for i in 0..y.len() {
        let a = y[i] - lo.values[i];
        let b = up.values[i] - y[i];
        if a < out.low_margin {
            out.low_margin = a;
            out.low_node = i;
        }
        if b < out.high_margin {
            out.high_margin = b;
            out.high_node = i;
        }
    }
    let tol = T::lit(IN_K_TOL);
    out.inside = out.low_margin >= -tol
        && out.high_margin >= -tol
        && out.grad_sup <= out.grad_bound * (T::one() + tol);
    Ok(out)
}

fn describe<T: Real>(name: &str, r: &InK<T>, mesh: &Mesh<T>) -> String {
    if r.low_margin < -T::lit(IN_K_TOL) {
        format!(
            "{name} drops below the lower barrier by {:e} at {:?}",
            -r.low_margin.as_f64(),
            mesh.nodes()[r.low_node]
        )
    } else if r.high_margin < -T::lit(IN_K_TOL) {
        format!(
            "{name} exceeds the upper barrier by {:e} at {:?}; try a larger C",
            -r.high_margin.as_f64(),
            mesh.nodes()[r.high_node]
        )
    } else {
        format!(
            "sup gradient of {name} is {:e} > C R = {:e}; try a larger K override or C",
            r.grad_sup.as_f64(),
            r.grad_bound.as_f64()
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig<T> {
    /// Stop when the discrete C¹ difference of successive iterates is below this.
    pub tol_outer: T,
    pub max_outer: usize,
    /// Weight of the new iterate when blending with the previous one.
    pub damping: T,
    /// Residual tolerance of the final verification.
    pub verify_tol: T,
}

impl<T: Real> Default for PicardConfig<T> {
    fn default() -> Self {
        Self {
            tol_outer: T::lit(1e-6),
            max_outer: 50,
            damping: T::one(),
            verify_tol: T::lit(1e-6),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OuterEntry {
    pub iteration: usize,
    pub diff_values: f64,
    pub diff_gradients: f64,
    pub sweeps: usize,
    pub in_k_u: bool,
    pub in_k_v: bool,
    /// Realized right-hand sides, `sup f` and `sup g` over interior nodes.
    pub sup_f: f64,
    pub sup_g: f64,
    /// Whether the sufficient bounds `sup f ≤ (C R1 / K_p)^{p−1}` and
    /// `sup g ≤ (C R2 / K_q)^{q−1}` hold. Diagnostic only.
    pub gradient_bound_ok: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bounds<T> {
    /// `c̃₀ d ≤ u ≤ c̃₁ d`
    pub c0_tilde: T,
    pub c1_tilde: T,
    /// `c̃₀′ d ≤ v ≤ c̃₁′ d`
    pub c0_tilde_prime: T,
    pub c1_tilde_prime: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict<T> {
    pub residual_u: T,
    pub residual_v: T,
    pub residual_pass: bool,
    pub bounds: Bounds<T>,
    /// `C⁻¹ l`, the guaranteed lower bound for `c̃₀` and `c̃₀′`.
    pub lower_chain: T,
    /// `C max(c1, c1′)`, the guaranteed upper bound for `c̃₁` and `c̃₁′`.
    pub upper_chain: T,
    pub bounds_pass: bool,
    /// Worst rectangle violation (nonpositive when inside).
    pub rectangle_violation: T,
    pub rectangle_pass: bool,
    pub tol: T,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionReport<T> {
    pub u: ScalarField<T>,
    pub v: ScalarField<T>,
    pub outer_iterations: usize,
    pub outer: Vec<OuterEntry>,
    pub k: KConfig<T>,
    /// Inner trace of the last application of the solution map.
    pub last_inner: AuxSolution<T>,
    pub verdict: Verdict<T>,
}

/// Realized `sup_i b_i / ω_i` of a load vector.
fn sup_density<T: Real>(mesh: &Mesh<T>, load: &[T]) -> T {
    mesh.interior()
        .iter()
        .fold(T::zero(), |m, &i| m.max(load[i] / mesh.lumped_mass()[i]))
}

/// Picard iteration `zⁿ⁺¹ = T(zⁿ)` with every iterate checked against `K₁(C) × K₂(C)`.
pub fn picard<T: Real>(
    prob: &AuxProblem<'_, T>,
    kcfg: &KConfig<T>,
    init: Option<(&[T], &[T])>,
    cfg: &PicardConfig<T>,
) -> Result<SolutionReport<T>> {
    let mesh = prob.mesh;
    let pair = prob.pair;
    if !(cfg.damping > T::zero() && cfg.damping <= T::one()) || cfg.max_outer == 0 {
        return Err(Error::InvalidProblem(
            "picard needs damping in (0, 1] and max_outer >= 1".into(),
        ));
    }
    let (mut z1, mut z2) = match init {
        Some((a, b)) => (a.to_vec(), b.to_vec()),
        None => (pair.u_low.values.to_vec(), pair.v_low.values.to_vec()),
    };
    let check = |iteration: usize, a: &[T], b: &[T]| -> Result<(bool, bool)> {
        let ku = in_k(mesh, a, Which::First, kcfg, pair)?;
        let kv = in_k(mesh, b, Which::Second, kcfg, pair)?;
        for (name, r) in [("u", &ku), ("v", &kv)] {
            if !r.inside {
                return Err(Error::InvarianceFailure {
                    iteration,
                    detail: describe(name, r, mesh),
                });
            }
        }
        Ok((ku.inside, kv.inside))
    };
    check(0, &z1, &z2)?;

    let one = T::one();
    let theta = cfg.damping;
    let bound_f = (kcfg.c * kcfg.r1 / kcfg.k_p.value).powf(pair.p - one);
    let bound_g = (kcfg.c * kcfg.r2 / kcfg.k_q.value).powf(pair.q - one);
    let mut outer = Vec::new();

    for n in 1..=cfg.max_outer {
        let sol = monotone_solve(prob, &z1, &z2, Direction::FromBelow)?;
        let (n1, n2) = if theta == one {
            (sol.u.to_vec(), sol.v.to_vec())
        } else {
            let blend = |new: &[T], old: &[T]| -> Vec<T> {
                new.iter()
                    .zip(old)
                    .map(|(&a, &b)| theta * a + (one - theta) * b)
                    .collect()
            };
            (blend(&sol.u, &z1), blend(&sol.v, &z2))
        };
        let (in_k_u, in_k_v) = check(n, &n1, &n2)?;

        let sup_f = sup_density(mesh, &FrozenRhs::new(mesh, prob.f, &z1, &z2)?.load(&sol.u, &sol.v)?);
        let sup_g = sup_density(mesh, &FrozenRhs::new(mesh, prob.g, &z1, &z2)?.load(&sol.u, &sol.v)?);
        let diff_values = sup_diff(&n1, &z1).max(sup_diff(&n2, &z2));
        let diff_gradients = gradient(mesh, &n1)
            .sup_diff(&gradient(mesh, &z1))
            .max(gradient(mesh, &n2).sup_diff(&gradient(mesh, &z2)));
        outer.push(OuterEntry {
            iteration: n,
            diff_values: diff_values.as_f64(),
            diff_gradients: diff_gradients.as_f64(),
            sweeps: sol.sweeps,
            in_k_u,
            in_k_v,
            sup_f: sup_f.as_f64(),
            sup_g: sup_g.as_f64(),
            gradient_bound_ok: sup_f <= bound_f && sup_g <= bound_g,
        });
        z1 = n1;
        z2 = n2;
        if diff_values.max(diff_gradients) < cfg.tol_outer {
            let verdict = verify(mesh, &z1, &z2, pair, prob.f, prob.g, cfg.verify_tol)?;
            return Ok(SolutionReport {
                u: ScalarField::new(z1),
                v: ScalarField::new(z2),
                outer_iterations: n,
                outer,
                k: *kcfg,
                last_inner: sol,
                verdict,
            });
        }
    }
    let entries = outer
        .iter()
        .map(|e| TraceEntry {
            iteration: e.iteration,
            residual: e.diff_values.max(e.diff_gradients),
            damping: theta.as_f64(),
        })
        .collect();
    Err(Error::NonConvergence {
        what: "Picard iteration".into(),
        iterations: cfg.max_outer,
        residual: outer
            .last()
            .map_or(f64::NAN, |e| e.diff_values.max(e.diff_gradients)),
        trace: IterationTrace { entries },
    })
}

/// Full-system check with the fields' own gradients: weak residuals,
/// distance bounds and rectangle membership.
pub fn verify<T: Real>(
    mesh: &Mesh<T>,
    u: &[T],
    v: &[T],
    pair: &BarrierPair<T>,
    f: &NonlinearitySpec<T>,
    g: &NonlinearitySpec<T>,
    tol: T,
) -> Result<Verdict<T>> {
    mesh.check_len(u.len())?;
    mesh.check_len(v.len())?;
    let positive = mesh.interior().iter().all(|&i| u[i] > T::zero() && v[i] > T::zero());
    let (residual_u, residual_v) = if positive {
        let res = |p: T, w: &[T], spec: &NonlinearitySpec<T>| -> Result<T> {
            let load = FrozenRhs::new(mesh, spec, u, v)?.load(u, v)?;
            let a = apply_plaplacian(mesh, p, w);
            Ok(mesh
                .interior()
                .iter()
                .fold(T::zero(), |m, &i| m.max((a[i] - load[i]).abs())))
        };
        (res(pair.p, u, f)?, res(pair.q, v, g)?)
    } else {
        (T::infinity(), T::infinity())
    };
    let residual_pass = residual_u < tol && residual_v < tol;

    let ratios = |w: &[T]| {
        mesh.interior().iter().fold((T::infinity(), T::zero()), |(lo, hi), &i| {
            let r = w[i] / mesh.dist()[i];
            (lo.min(r), hi.max(r))
        })
    };
    let (c0, c1) = ratios(u);
    let (c0p, c1p) = ratios(v);
    let k = &pair.constants;
    let lower_chain = k.comparison.l / pair.c;
    let upper_chain = pair.c * k.c1.max(k.c1_prime);
    let bounds_pass = c0 > T::zero()
        && c0p > T::zero()
        && c1.is_finite()
        && c1p.is_finite()
        && c0.min(c0p) >= lower_chain - tol
        && c1.max(c1p) <= upper_chain + tol;

    let violation = |w: &[T], lo: &BarrierField<T>, up: &BarrierField<T>| {
        (0..w.len()).fold(T::neg_infinity(), |m, i| {
            m.max(lo.values[i] - w[i]).max(w[i] - up.values[i])
        })
    };
    let rectangle_violation =
        violation(u, &pair.u_low, &pair.u_up).max(violation(v, &pair.v_low, &pair.v_up));
    let rectangle_pass = rectangle_violation <= T::lit(IN_K_TOL);

    Ok(Verdict {
        residual_u,
        residual_v,
        residual_pass,
        bounds: Bounds {
            c0_tilde: c0,
            c1_tilde: c1,
            c0_tilde_prime: c0p,
            c1_tilde_prime: c1p,
        },
        lower_chain,
        upper_chain,
        bounds_pass,
        rectangle_violation,
        rectangle_pass,
        tol,
        pass: residual_pass && bounds_pass && rectangle_pass,
    })
}
