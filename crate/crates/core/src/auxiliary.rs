//! The frozen-gradient system
//!
//! ```text
//!     −Δ_p u = f(x, u, v, ∇z₁, ∇z₂),   −Δ_q v = g(x, u, v, ∇z₁, ∇z₂)
//! ```
//!
//! solved by monotone iteration between the barriers. Each sweep solves the
//! shifted problems `L_p w₁ = f̂`, `L_q w₂ = ĝ`, where the shift
//! `ρ̂ d^{α+β−(p−1)} s^{p−1}` makes the right-hand sides nondecreasing in
//! their own variable.

use serde::{Deserialize, Serialize};

use crate::barriers::BarrierPair;
use crate::error::{Error, Result};
use crate::hypotheses::{ExponentSet, Form, NonlinearitySpec};
use crate::mesh::{gradient, norm, Mesh, ScalarField};
use crate::plap::{
    apply_plaplacian, solve_dirichlet_from, IterationTrace, PlapProblem, SolverConfig, Source,
    TraceEntry,
};
use crate::real::{sup_diff, Real};

/// Larger of the two branches
/// `−α₁M₁/(p−1) (C⁻¹l)^{α₁−p+1} l̂^{β₁} C^{−β₁}` and
/// `−β₂M₂/(q−1) (C⁻¹l)^{β₂−q+1} l̂^{α₂} C^{−α₂}`, and zero.
pub fn rho_hat<T: Real>(
    f: &ExponentSet<T>,
    g: &ExponentSet<T>,
    c: T,
    l: T,
    l_hat: T,
    p: T,
    q: T,
) -> T {
    let one = T::one();
    let low = l / c;
    let b1 = -f.alpha * f.big_m / (p - one)
        * low.powf(f.alpha - p + one)
        * l_hat.powf(f.beta)
        * c.powf(-f.beta);
    let b2 = -g.beta * g.big_m / (q - one)
        * low.powf(g.beta - q + one)
        * l_hat.powf(g.alpha)
        * c.powf(-g.alpha);
    b1.max(b2).max(T::zero())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShiftParams<T> {
    pub rho_hat: T,
    pub p: T,
    pub q: T,
    /// `α₁ + β₁ − (p−1)`
    pub exponent_p: T,
    /// `α₂ + β₂ − (q−1)`
    pub exponent_q: T,
}

impl<T: Real> ShiftParams<T> {
    pub fn new(rho_hat: T, f: &ExponentSet<T>, g: &ExponentSet<T>, p: T, q: T) -> Result<Self> {
        let one = T::one();
        let s = Self {
            rho_hat,
            p,
            q,
            exponent_p: f.alpha + f.beta - (p - one),
            exponent_q: g.alpha + g.beta - (q - one),
        };
        if !(rho_hat >= T::zero()) || !rho_hat.is_finite() {
            return Err(Error::InvalidProblem(format!("invalid shift coefficient {rho_hat}")));
        }
        if !(s.exponent_p > -p) || !(s.exponent_q > -q) {
            return Err(Error::InvalidProblem(
                "shift weight exponents must exceed -p and -q".into(),
            ));
        }
        Ok(s)
    }
}

/// `(f̂, ĝ)` at a point with boundary distance `d`.
#[allow(clippy::too_many_arguments)]
pub fn shifted_rhs<T: Real>(
    f: &NonlinearitySpec<T>,
    g: &NonlinearitySpec<T>,
    shift: &ShiftParams<T>,
    x: [T; 2],
    d: T,
    s1: T,
    s2: T,
    grad1: [T; 2],
    grad2: [T; 2],
) -> Result<(T, T)> {
    let fv = f.eval(x, s1, s2, grad1, grad2)?;
    let gv = g.eval(x, s1, s2, grad1, grad2)?;
    let one = T::one();
    let fh = fv + shift.rho_hat * d.powf(shift.exponent_p) * s1.powf(shift.p - one);
    let gh = gv + shift.rho_hat * d.powf(shift.exponent_q) * s2.powf(shift.q - one);
    Ok((fh, gh))
}

/// Load vector `∫ f(x, w₁, w₂, ∇z₁, ∇z₂) φ_i` for frozen element gradients,
/// with the vertex quadrature of the assembly (field values at node `i`).
pub struct FrozenRhs<'a, T> {
    mesh: &'a Mesh<T>,
    spec: &'a NonlinearitySpec<T>,
    gz1: Vec<[T; 2]>,
    gz2: Vec<[T; 2]>,
    /// Gradient part of a canonical form, independent of `(w₁, w₂)`.
    grad_load: Option<Vec<T>>,
}

impl<'a, T: Real> FrozenRhs<'a, T> {
    pub fn new(mesh: &'a Mesh<T>, spec: &'a NonlinearitySpec<T>, z1: &[T], z2: &[T]) -> Result<Self> {
        mesh.check_len(z1.len())?;
        mesh.check_len(z2.len())?;
        let gz1 = gradient(mesh, z1).vectors().to_vec();
        let gz2 = gradient(mesh, z2).vectors().to_vec();
        let grad_load = match spec.form {
            Form::Canonical { a1, a2 } => {
                let mut b = vec![T::zero(); mesh.num_nodes()];
                for (k, e) in mesh.elements().iter().enumerate() {
                    let v = spec.gradient_part(a1, a2, norm(gz1[k]), norm(gz2[k]));
                    if v != T::zero() {
                        for &i in e.nodes() {
                            b[i] += v * e.vertex_weight();
                        }
                    }
                }
                Some(b)
            }
            Form::Custom(_) => None,
        };
        Ok(Self {
            mesh,
            spec,
            gz1,
            gz2,
            grad_load,
        })
    }

    pub fn load(&self, w1: &[T], w2: &[T]) -> Result<Vec<T>> {
        let mesh = self.mesh;
        let mut b = vec![T::zero(); mesh.num_nodes()];
        for &i in mesh.interior() {
            if !(w1[i] > T::zero()) || !(w2[i] > T::zero()) {
                return Err(Error::OutsideCone {
                    s1: w1[i].as_f64(),
                    s2: w2[i].as_f64(),
                });
            }
        }
        match &self.grad_load {
            Some(gl) => {
                let e = &self.spec.exponents;
                for &i in mesh.interior() {
                    b[i] = mesh.lumped_mass()[i] * e.lower(w1[i], w2[i]) + gl[i];
                }
            }
            None => {
                for (k, e) in mesh.elements().iter().enumerate() {
                    for &i in e.nodes() {
                        if mesh.is_boundary(i) {
                            continue;
                        }
                        let v = self.spec.eval_unchecked(
                            mesh.nodes()[i],
                            w1[i],
                            w2[i],
                            self.gz1[k],
                            self.gz2[k],
                        );
                        b[i] += v * e.vertex_weight();
                    }
                }
            }
        }
        Ok(b)
    }
}

/// Unshifted frozen-gradient residual `⟨−Δ_p w, φ_i⟩ − ⟨f, φ_i⟩`, sup over interior nodes.
fn residual_sup<T: Real>(mesh: &Mesh<T>, p: T, w: &[T], load: &[T]) -> T {
    let a = apply_plaplacian(mesh, p, w);
    mesh.interior()
        .iter()
        .fold(T::zero(), |m, &i| m.max((a[i] - load[i]).abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    FromBelow,
    FromAbove,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuxConfig<T> {
    /// Stop when both sweep differences drop below this sup-norm.
    pub tol_inner: T,
    pub max_sweeps: usize,
    /// Absolute slack for the monotonicity and rectangle checks.
    pub monotone_tol: T,
    /// Use the fresh `w₁` in the `w₂` update of the same sweep.
    pub gauss_seidel: bool,
}

impl<T: Real> Default for AuxConfig<T> {
    fn default() -> Self {
        Self {
            tol_inner: T::lit(1e-8),
            max_sweeps: 200,
            monotone_tol: T::lit(1e-10),
            gauss_seidel: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub sweep: usize,
    pub sup_diff_u: f64,
    pub sup_diff_v: f64,
    pub monotone_ok: bool,
    pub residual_u: f64,
    pub residual_v: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuxTrace {
    pub entries: Vec<SweepEntry>,
}

impl AuxTrace {
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&serde_json::to_string(e).expect("sweep entry serializes"));
            s.push('\n');
        }
        s
    }

    pub fn monotone(&self) -> bool {
        self.entries.iter().all(|e| e.monotone_ok)
    }

    /// Ratios of successive sweep differences.
    pub fn contraction_factors(&self) -> Vec<f64> {
        self.entries
            .windows(2)
            .map(|w| {
                let a = w[0].sup_diff_u.max(w[0].sup_diff_v);
                let b = w[1].sup_diff_u.max(w[1].sup_diff_v);
                b / a
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuxSolution<T> {
    pub u: ScalarField<T>,
    pub v: ScalarField<T>,
    pub direction: Direction,
    pub sweeps: usize,
    pub trace: AuxTrace,
    /// Unshifted frozen-gradient residuals of the final iterate.
    pub residual_u: T,
    pub residual_v: T,
    /// Largest violation of the monotone ordering between sweeps (0 if none).
    pub max_monotone_violation: T,
}

/// Everything a sweep needs that does not change between sweeps.
pub struct AuxProblem<'a, T> {
    pub mesh: &'a Mesh<T>,
    pub pair: &'a BarrierPair<T>,
    pub f: &'a NonlinearitySpec<T>,
    pub g: &'a NonlinearitySpec<T>,
    pub shift: ShiftParams<T>,
    pub solver: SolverConfig<T>,
    pub cfg: AuxConfig<T>,
}

impl<'a, T: Real> AuxProblem<'a, T> {
    /// Monotone iteration for the system with gradients frozen at `(z1, z2)`.
    pub fn solve(&self, z1: &[T], z2: &[T], direction: Direction) -> Result<AuxSolution<T>> {
        monotone_solve(self, z1, z2, direction)
    }
}

pub fn monotone_solve<T: Real>(
    prob: &AuxProblem<'_, T>,
    z1: &[T],
    z2: &[T],
    direction: Direction,
) -> Result<AuxSolution<T>> {
    let AuxProblem {
        mesh,
        pair,
        f,
        g,
        shift,
        solver,
        cfg,
    } = *prob;
    let rhs_f = FrozenRhs::new(mesh, f, z1, z2)?;
    let rhs_g = FrozenRhs::new(mesh, g, z1, z2)?;
    let one = T::one();
    let (p, q) = (pair.p, pair.q);
    let shifted = shift.rho_hat > T::zero();
    let wp = mesh.weight_integrals(shift.exponent_p);
    let wq = mesh.weight_integrals(shift.exponent_q);
    let add_shift = |b: &mut Vec<T>, w: &[T], weights: &[T], pw: T| {
        if shifted {
            for &i in mesh.interior() {
                b[i] += shift.rho_hat * weights[i] * w[i].powf(pw - one);
            }
        }
    };
    let problem = |b: Vec<T>, pw: T, e: T| {
        let pr = PlapProblem::new(pw, Source::Load(b));
        if shifted {
            pr.with_shift(shift.rho_hat, e)
        } else {
            pr
        }
    };

    let (mut w1, mut w2) = match direction {
        Direction::FromBelow => (pair.u_low.values.to_vec(), pair.v_low.values.to_vec()),
        Direction::FromAbove => (pair.u_up.values.to_vec(), pair.v_up.values.to_vec()),
    };
    let mut trace = AuxTrace::default();
    let mut worst_monotone = T::zero();

    for sweep in 1..=cfg.max_sweeps {
        let mut b1 = rhs_f.load(&w1, &w2)?;
        add_shift(&mut b1, &w1, &wp, p);
        let (n1, _) = solve_dirichlet_from(mesh, &problem(b1, p, shift.exponent_p), &solver, Some(&w1))?;
        let n1 = n1.into_values();

        let partner = if cfg.gauss_seidel { &n1 } else { &w1 };
        let mut b2 = rhs_g.load(partner, &w2)?;
        add_shift(&mut b2, &w2, &wq, q);
        let (n2, _) = solve_dirichlet_from(mesh, &problem(b2, q, shift.exponent_q), &solver, Some(&w2))?;
        let n2 = n2.into_values();

        for (name, new, lo, up) in [
            ("u", &n1, &pair.u_low, &pair.u_up),
            ("v", &n2, &pair.v_low, &pair.v_up),
        ] {
            for &i in mesh.interior() {
                let below = lo.values[i] - new[i];
                let above = new[i] - up.values[i];
                let amount = below.max(above);
                if amount > cfg.monotone_tol {
                    return Err(Error::MonotonicityViolation {
                        sweep,
                        field: name,
                        node: i,
                        amount: amount.as_f64(),
                    });
                }
            }
        }
        let sign = match direction {
            Direction::FromBelow => one,
            Direction::FromAbove => -one,
        };
        let mut violation = T::zero();
        for (new, old) in [(&n1, &w1), (&n2, &w2)] {
            for &i in mesh.interior() {
                violation = violation.max(sign * (old[i] - new[i]));
            }
        }
        worst_monotone = worst_monotone.max(violation);

        let du = sup_diff(&n1, &w1);
        let dv = sup_diff(&n2, &w2);
        let ru = residual_sup(mesh, p, &n1, &rhs_f.load(&n1, &n2)?);
        let rv = residual_sup(mesh, q, &n2, &rhs_g.load(&n1, &n2)?);
        trace.entries.push(SweepEntry {
            sweep,
            sup_diff_u: du.as_f64(),
            sup_diff_v: dv.as_f64(),
            monotone_ok: violation <= cfg.monotone_tol,
            residual_u: ru.as_f64(),
            residual_v: rv.as_f64(),
        });
        w1 = n1;
        w2 = n2;
        if du < cfg.tol_inner && dv < cfg.tol_inner {
            return Ok(AuxSolution {
                u: ScalarField::new(w1),
                v: ScalarField::new(w2),
                direction,
                sweeps: sweep,
                trace,
                residual_u: ru,
                residual_v: rv,
                max_monotone_violation: worst_monotone,
            });
        }
    }
    let entries = trace
        .entries
        .iter()
        .map(|e| TraceEntry {
            iteration: e.sweep,
            residual: e.sup_diff_u.max(e.sup_diff_v),
            damping: 1.0,
        })
        .collect();
    Err(Error::NonConvergence {
        what: "monotone iteration".into(),
        iterations: cfg.max_sweeps,
        residual: trace
            .entries
            .last()
            .map_or(f64::NAN, |e| e.sup_diff_u.max(e.sup_diff_v)),
        trace: IterationTrace { entries },
    })
}

/// Smallest `(C1, C2)` with `f ≤ C1 d^{α₁}` and `g ≤ C2 d^{β₂}` at interior
/// nodes, evaluating `f` at `(u̲, v̄)` and `g` at `(ū, v̲)` (the rectangle
/// corners where the singular power is largest) and every adjacent element
/// gradient of `(z1, z2)`.
pub fn singular_envelope<T: Real>(
    mesh: &Mesh<T>,
    pair: &BarrierPair<T>,
    f: &NonlinearitySpec<T>,
    g: &NonlinearitySpec<T>,
    z1: &[T],
    z2: &[T],
) -> Result<(T, T)> {
    mesh.check_len(z1.len())?;
    mesh.check_len(z2.len())?;
    let gz1 = gradient(mesh, z1);
    let gz2 = gradient(mesh, z2);
    let (ul, vl, uu, vu) = (
        &pair.u_low.values,
        &pair.v_low.values,
        &pair.u_up.values,
        &pair.v_up.values,
    );
    let mut c1 = T::zero();
    let mut c2 = T::zero();
    for (k, e) in mesh.elements().iter().enumerate() {
        let (a, b) = (gz1.vectors()[k], gz2.vectors()[k]);
        for &i in e.nodes() {
            if mesh.is_boundary(i) {
                continue;
            }
            let x = mesh.nodes()[i];
            let d = mesh.dist()[i];
            let fv = f.eval(x, ul[i], vu[i], a, b)?;
            let gv = g.eval(x, uu[i], vl[i], a, b)?;
            c1 = c1.max(fv * d.powf(-f.exponents.alpha));
            c2 = c2.max(gv * d.powf(-g.exponents.beta));
        }
    }
    Ok((c1, c2))
}

/// `∫ d^α u dx` by the barycenter rule (d > 0 there).
pub fn hardy_sobolev_integral<T: Real>(mesh: &Mesh<T>, alpha: T, u: &[T]) -> Result<T> {
    mesh.check_len(u.len())?;
    Ok(mesh
        .elements()
        .iter()
        .map(|e| e.measure() * e.centroid_dist().powf(alpha) * e.centroid_value(u))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::{build, BarrierData};
    use crate::eigen::{first_eigenpair, EigenConfig};
    use crate::hypotheses::Role;
    use crate::mesh::Domain;
    use crate::plap::torsion;
    use crate::real::sup_norm;

    fn exps() -> (ExponentSet<f64>, ExponentSet<f64>) {
        let f = ExponentSet {
            role: Role::F,
            m: 1.0,
            big_m: 1.0,
            alpha: -0.25,
            beta: 0.25,
            gamma: 0.5,
            theta: 0.5,
        };
        let g = ExponentSet {
            role: Role::G,
            alpha: 0.25,
            beta: -0.25,
            ..f
        };
        (f, g)
    }

    fn setup(cells: usize, c: f64) -> (Mesh<f64>, BarrierPair<f64>) {
        let mesh = Mesh::new(Domain::unit_interval(cells)).unwrap();
        let s = SolverConfig::default();
        let e = first_eigenpair(&mesh, 2.0, &EigenConfig::default(), &s).unwrap();
        let xi = torsion(&mesh, 2.0, &s).unwrap();
        let d = BarrierData::new(&mesh, e.clone(), e, xi.clone(), xi, 1.0, 1.0).unwrap();
        let pair = build(&d, c).unwrap();
        (mesh, pair)
    }

    #[test]
    fn rho_hat_examples() {
        let (f, g) = exps();
        let pi = std::f64::consts::PI;
        let r = rho_hat(&f, &g, 10.0, 2.0, pi, 2.0, 2.0);
        let b1 = 0.25 * 0.2f64.powf(-1.25) * pi.powf(0.25) * 10f64.powf(-0.25);
        assert!((r - b1).abs() < 1e-12);
        assert!((r - 1.40).abs() < 0.005, "{r}");
        // the g branch alone gives the same value for the mirrored exponents
        let mut f0 = f;
        f0.big_m = 0.0;
        assert!((rho_hat(&f0, &g, 10.0, 2.0, pi, 2.0, 2.0) - b1).abs() < 1e-12);
        let mut g0 = g;
        g0.big_m = 0.0;
        assert_eq!(rho_hat(&f0, &g0, 10.0, 2.0, pi, 2.0, 2.0), 0.0);
    }

    #[test]
    fn shifted_rhs_examples() {
        let (f, g) = exps();
        let fs = NonlinearitySpec::canonical(f, 0.0, 0.0).unwrap();
        let gs = NonlinearitySpec::canonical(g, 0.0, 0.0).unwrap();
        let z = [0.0; 2];
        let x = [0.5, 0.0];
        let none = ShiftParams::new(0.0, &f, &g, 2.0, 2.0).unwrap();
        let (fh, gh) = shifted_rhs(&fs, &gs, &none, x, 0.5, 1.0, 2.0, z, z).unwrap();
        assert_eq!(fh, fs.eval(x, 1.0, 2.0, z, z).unwrap());
        assert_eq!(gh, gs.eval(x, 1.0, 2.0, z, z).unwrap());

        let sh = ShiftParams::new(1.4, &f, &g, 2.0, 2.0).unwrap();
        let (fh, _) = shifted_rhs(&fs, &gs, &sh, x, 0.5, 1.0, 1.0, z, z).unwrap();
        assert!((fh - (1.0 + 2.8)).abs() < 1e-12);
        assert!(shifted_rhs(&fs, &gs, &sh, x, 0.5, 0.0, 1.0, z, z).is_err());
    }

    /// Sampled derivative sign of `t ↦ f̂` for `t ≥ min(u̲, v̲)` at every interior node,
    /// with the partner variable at `v̲` and the computed `ρ̂`.
    #[test]
    fn shifted_rhs_is_monotone_in_own_variable() {
        let (mesh, pair) = setup(64, 16.0);
        let (f, g) = exps();
        let k = pair.constants.comparison;
        let rho = rho_hat(&f, &g, pair.c, k.l, k.l_hat, 2.0, 2.0);
        let sh = ShiftParams::new(rho, &f, &g, 2.0, 2.0).unwrap();
        let fs = NonlinearitySpec::canonical(f, 0.0, 0.0).unwrap();
        let gs = NonlinearitySpec::canonical(g, 0.0, 0.0).unwrap();
        let z = [0.0; 2];
        for &i in mesh.interior() {
            let (x, d) = (mesh.nodes()[i], mesh.dist()[i]);
            let lo = pair.u_low.values[i].min(pair.v_low.values[i]);
            let hi = pair.u_up.values[i].max(pair.v_up.values[i]);
            let vl = pair.v_low.values[i];
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=200 {
                let t = lo * (hi / lo).powf(k as f64 / 200.0);
                let (fh, _) = shifted_rhs(&fs, &gs, &sh, x, d, t, vl, z, z).unwrap();
                assert!(fh >= prev - 1e-12 * fh.abs(), "node {i} t {t}");
                prev = fh;
            }
        }
    }

    fn aux<'a>(
        mesh: &'a Mesh<f64>,
        pair: &'a BarrierPair<f64>,
        fs: &'a NonlinearitySpec<f64>,
        gs: &'a NonlinearitySpec<f64>,
    ) -> AuxProblem<'a, f64> {
        let (f, g) = exps();
        let k = pair.constants.comparison;
        let rho = rho_hat(&f, &g, pair.c, k.l, k.l_hat, 2.0, 2.0);
        AuxProblem {
            mesh,
            pair,
            f: fs,
            g: gs,
            shift: ShiftParams::new(rho, &f, &g, 2.0, 2.0).unwrap(),
            solver: SolverConfig::default(),
            cfg: AuxConfig::default(),
        }
    }

    #[test]
    fn monotone_bracketing() {
        let (mesh, pair) = setup(64, 16.0);
        let (f, g) = exps();
        let fs = NonlinearitySpec::canonical(f, 0.0, 0.0).unwrap();
        let gs = NonlinearitySpec::canonical(g, 0.0, 0.0).unwrap();
        let prob = aux(&mesh, &pair, &fs, &gs);
        let zero = vec![0.0; mesh.num_nodes()];
        let lo = prob.solve(&zero, &zero, Direction::FromBelow).unwrap();
        let hi = prob.solve(&zero, &zero, Direction::FromAbove).unwrap();
        assert!(lo.trace.monotone() && hi.trace.monotone());
        assert!(lo.sweeps <= 200);
        for &i in mesh.interior() {
            assert!(lo.u[i] <= hi.u[i] + 1e-8 && lo.v[i] <= hi.v[i] + 1e-8);
        }
        assert!(lo.residual_u < 1e-8 && lo.residual_v < 1e-8);
        assert!(lo.trace.contraction_factors().iter().all(|&r| r < 1.0));
        assert_eq!(lo.trace.to_json_lines().lines().count(), lo.sweeps);
    }

    #[test]
    fn constant_nonlinearity_converges_in_one_sweep() {
        let (mesh, pair) = setup(32, 16.0);
        let (mut f, mut g) = exps();
        f.alpha = 0.0;
        f.beta = 0.0;
        g.alpha = 0.0;
        g.beta = 0.0;
        let fs = NonlinearitySpec::canonical(f, 0.0, 0.0).unwrap();
        let gs = NonlinearitySpec::canonical(g, 0.0, 0.0).unwrap();
        let prob = AuxProblem {
            shift: ShiftParams::new(0.0, &f, &g, 2.0, 2.0).unwrap(),
            ..aux(&mesh, &pair, &fs, &gs)
        };
        let zero = vec![0.0; mesh.num_nodes()];
        let s = prob.solve(&zero, &zero, Direction::FromBelow).unwrap();
        // the first sweep reaches the solution, the second confirms it
        assert!(s.sweeps <= 2);
        assert!(s.trace.entries[0].residual_u < 1e-10);
        // −u″ = 1 with lumped loads is exact at the nodes
        for (x, v) in mesh.nodes().iter().zip(s.u.values()) {
            assert!((v - x[0] * (1.0 - x[0]) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rectangle_escape_is_an_error() {
        let (mesh, mut pair) = setup(32, 16.0);
        pair.u_up.values = pair.u_low.values.scaled(1.01);
        let (f, g) = exps();
        let fs = NonlinearitySpec::canonical(f, 0.0, 0.0).unwrap();
        let gs = NonlinearitySpec::canonical(g, 0.0, 0.0).unwrap();
        let prob = aux(&mesh, &pair, &fs, &gs);
        let zero = vec![0.0; mesh.num_nodes()];
        assert!(matches!(
            prob.solve(&zero, &zero, Direction::FromBelow),
            Err(Error::MonotonicityViolation { field: "u", .. })
        ));
    }

    #[test]
    fn singular_envelope_examples() {
        let (mesh, pair) = setup(64, 16.0);
        let (f, g) = exps();
        let fs = NonlinearitySpec::canonical(f, 0.0, 0.0).unwrap();
        let gs = NonlinearitySpec::canonical(g, 0.0, 0.0).unwrap();
        let zero = vec![0.0; mesh.num_nodes()];
        let (c1, _) = singular_envelope(&mesh, &pair, &fs, &gs, &zero, &zero).unwrap();
        let direct = mesh
            .interior()
            .iter()
            .map(|&i| {
                f.big_m
                    * pair.u_low.values[i].powf(f.alpha)
                    * pair.v_up.values[i].powf(f.beta)
                    * mesh.dist()[i].powf(-f.alpha)
            })
            .fold(0.0, f64::max);
        assert!((c1 - direct).abs() < 1e-12 * direct);

        let t = 3.0;
        let scaled = NonlinearitySpec::custom(f, move |pt| t * pt.s1.powf(-0.25) * pt.s2.powf(0.25));
        let (c1t, _) = singular_envelope(&mesh, &pair, &scaled, &gs, &zero, &zero).unwrap();
        assert!((c1t - t * c1).abs() < 1e-12 * c1t);

        let (fine, fpair) = setup(128, 16.0);
        let zf = vec![0.0; fine.num_nodes()];
        let (c1f, _) = singular_envelope(&fine, &fpair, &fs, &gs, &zf, &zf).unwrap();
        assert!((c1f - c1).abs() / c1 < 0.05, "{c1} {c1f}");
    }

    #[test]
    fn hardy_sobolev_bounded_under_refinement() {
        let vals: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| {
                let (mesh, pair) = setup(n, 16.0);
                hardy_sobolev_integral(&mesh, -0.25, &pair.u_up.values).unwrap()
            })
            .collect();
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!((hi - lo) / lo < 0.02, "{vals:?}");
        assert!(sup_norm(&vals) < 10.0);
    }
}
