//! Sub/supersolution barriers
//!
//! ```text
//!     (u̲, v̲) = C⁻¹(φ_p, φ_q),     (ū, v̄) = C(ξ₁, ξ₂)
//! ```
//!
//! built from the first eigenfunctions and the torsion functions, the
//! search for a constant `C` large enough, and pointwise certification.
//!
//! Every barrier field carries its strong-form p-Laplacian per unit row
//! weight (`lap`), known in closed form from the eigen and torsion
//! identities: `C^{1−p} λ φ^{p−1}` for the lower fields and `C^{p−1}` for
//! the upper ones. Certification compares these values with the growth
//! envelope at interior nodes.

use serde::{Deserialize, Serialize};

use crate::eigen::{comparison_constants, ComparisonConstants, EigenPair};
use crate::error::{Error, Result};
use crate::hypotheses::ExponentSet;
use crate::mesh::{gradient, ratio_extremes, Mesh, ScalarField};
use crate::plap::{solve_dirichlet, PlapProblem, SolverConfig, Source};
use crate::real::{sup_norm, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig<T> {
    /// First candidate; later candidates double it.
    pub start: T,
    /// Every closed-form condition must hold with this factor to spare.
    pub margin_factor: T,
    pub cap: T,
}

impl<T: Real> Default for SearchConfig<T> {
    fn default() -> Self {
        Self {
            start: T::lit(2.0),
            margin_factor: T::lit(1.05),
            cap: T::lit(2f64.powi(40)),
        }
    }
}

/// `(min ξ/d, max ξ/d)` over interior nodes.
pub fn torsion_constants<T: Real>(mesh: &Mesh<T>, xi: &[T]) -> Result<(T, T)> {
    let r = ratio_extremes(mesh, xi)?;
    Ok((r.low, r.high))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarrierConstants<T> {
    pub lambda_p: T,
    pub lambda_q: T,
    pub comparison: ComparisonConstants<T>,
    /// `c0 d ≤ ξ₁ ≤ c1 d`
    pub c0: T,
    pub c1: T,
    /// `c0′ d ≤ ξ₂ ≤ c1′ d`
    pub c0_prime: T,
    pub c1_prime: T,
    /// Discrete C¹ norms `max(‖ξ‖∞, ‖∇ξ‖∞)`.
    pub xi1_c1_norm: T,
    pub xi2_c1_norm: T,
    pub k_p: T,
    pub k_q: T,
    pub r1: T,
    pub r2: T,
    /// Largest interior distance to the boundary.
    pub d_max: T,
}

/// Eigenpairs and torsion functions for both equations, plus the derived
/// constants. Independent of `C`.
#[derive(Clone, Debug)]
pub struct BarrierData<T> {
    pub p: T,
    pub q: T,
    pub eig_p: EigenPair<T>,
    pub eig_q: EigenPair<T>,
    pub xi1: ScalarField<T>,
    pub xi2: ScalarField<T>,
    pub constants: BarrierConstants<T>,
}

impl<T: Real> BarrierData<T> {
    /// `k_p`, `k_q` are the gradient-estimate constants entering `R1`, `R2`.
    pub fn new(
        mesh: &Mesh<T>,
        eig_p: EigenPair<T>,
        eig_q: EigenPair<T>,
        xi1: ScalarField<T>,
        xi2: ScalarField<T>,
        k_p: T,
        k_q: T,
    ) -> Result<Self> {
        let comparison = comparison_constants(&eig_p, &eig_q, mesh)?;
        let (c0, c1) = torsion_constants(mesh, &xi1)?;
        let (c0_prime, c1_prime) = torsion_constants(mesh, &xi2)?;
        let c1_norm = |xi: &[T]| sup_norm(xi).max(gradient(mesh, xi).sup_norm());
        let xi1_c1_norm = c1_norm(&xi1);
        let xi2_c1_norm = c1_norm(&xi2);
        let d_max = mesh
            .interior()
            .iter()
            .fold(T::zero(), |m, &i| m.max(mesh.dist()[i]));
        let constants = BarrierConstants {
            lambda_p: eig_p.lambda,
            lambda_q: eig_q.lambda,
            comparison,
            c0,
            c1,
            c0_prime,
            c1_prime,
            xi1_c1_norm,
            xi2_c1_norm,
            k_p,
            k_q,
            r1: xi1_c1_norm.max(k_p),
            r2: xi2_c1_norm.max(k_q),
            d_max,
        };
        Ok(Self {
            p: eig_p.p,
            q: eig_q.p,
            eig_p,
            eig_q,
            xi1,
            xi2,
            constants,
        })
    }
}

/// A barrier field with its pointwise `−Δ_p` per unit row weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierField<T> {
    pub values: ScalarField<T>,
    pub lap: Vec<T>,
}

impl<T: Real> BarrierField<T> {
    /// `C·ξ` where `−Δ_p ξ = h`, so that `−Δ_p(Cξ) = C^{p−1} h`.
    pub fn upper_from_load(
        mesh: &Mesh<T>,
        p: T,
        c: T,
        h: &[T],
        solver: &SolverConfig<T>,
    ) -> Result<Self> {
        let (xi, _) = solve_dirichlet(mesh, &PlapProblem::new(p, Source::Nodal(h.to_vec())), solver)?;
        let k = c.powf(p - T::one());
        Ok(Self {
            values: xi.scaled(c),
            lap: h.iter().map(|&v| k * v).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierPair<T> {
    pub c: T,
    pub p: T,
    pub q: T,
    pub u_low: BarrierField<T>,
    pub v_low: BarrierField<T>,
    pub u_up: BarrierField<T>,
    pub v_up: BarrierField<T>,
    pub constants: BarrierConstants<T>,
}

impl<T: Real> BarrierPair<T> {
    /// Worst `(node, up − low)` over both components.
    pub fn ordering_gap(&self) -> (usize, T) {
        let mut worst = (0, T::infinity());
        for (lo, up) in [(&self.u_low, &self.u_up), (&self.v_low, &self.v_up)] {
            for (i, (a, b)) in lo.values.iter().zip(up.values.iter()).enumerate() {
                let g = *b - *a;
                if g < worst.1 {
                    worst = (i, g);
                }
            }
        }
        worst
    }
}

/// Scales the eigen and torsion fields by `C⁻¹` and `C`; errors when the
/// resulting fields are not ordered.
pub fn build<T: Real>(data: &BarrierData<T>, c: T) -> Result<BarrierPair<T>> {
    let pair = build_unchecked(data, c)?;
    let (node, gap) = pair.ordering_gap();
    if gap < T::zero() {
        return Err(Error::CTooSmall {
            c: c.as_f64(),
            node,
            margin: gap.as_f64(),
        });
    }
    Ok(pair)
}

/// [`build`] without the ordering check.
pub fn build_unchecked<T: Real>(data: &BarrierData<T>, c: T) -> Result<BarrierPair<T>> {
    if !(c > T::one()) || !c.is_finite() {
        return Err(Error::InvalidProblem(format!("C must exceed 1, got {c}")));
    }
    let low = |e: &EigenPair<T>| {
        let k = c.powf(T::one() - e.p) * e.lambda;
        BarrierField {
            values: e.phi.scaled(T::one() / c),
            lap: e.phi.iter().map(|&v| k * v.powf(e.p - T::one())).collect(),
        }
    };
    let up = |xi: &ScalarField<T>, p: T| BarrierField {
        values: xi.scaled(c),
        lap: vec![c.powf(p - T::one()); xi.len()],
    };
    Ok(BarrierPair {
        c,
        p: data.p,
        q: data.q,
        u_low: low(&data.eig_p),
        v_low: low(&data.eig_q),
        u_up: up(&data.xi1, data.p),
        v_up: up(&data.xi2, data.q),
        constants: data.constants,
    })
}

/// One closed-form sufficient condition, normalized so that it holds iff
/// `value ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition<T> {
    pub name: &'static str,
    pub value: T,
    pub pass: bool,
}

/// The sufficient conditions on `C` for ordering, subsolution and
/// supersolution, each required to hold with `margin_factor` to spare.
pub fn conditions<T: Real>(
    data: &BarrierData<T>,
    f: &ExponentSet<T>,
    g: &ExponentSet<T>,
    c: T,
    margin_factor: T,
) -> Vec<Condition<T>> {
    let k = &data.constants;
    let cmp = &k.comparison;
    let one = T::one();
    let (p, q) = (data.p, data.q);
    let min_ratio = |num: &[T], den: &[T]| {
        num.iter()
            .zip(den)
            .filter(|(_, &d)| d > T::zero())
            .fold(T::infinity(), |m, (&a, &b)| m.min(a / b))
    };
    let ord_u = c * c * min_ratio(&data.xi1, &data.eig_p.phi);
    let ord_v = c * c * min_ratio(&data.xi2, &data.eig_q.phi);

    let ep = p - one - f.alpha - f.beta;
    let sub_u = f.m
        / (c.powf(-ep) * k.lambda_p * cmp.l1.powf(-f.beta) * cmp.big_m.powf(ep));
    let eq = q - one - g.alpha - g.beta;
    let sub_v = g.m
        / (c.powf(-eq) * k.lambda_q * cmp.l2.powf(g.alpha) * cmp.big_m.powf(eq));

    let grad_share = |e: &ExponentSet<T>, pw: T| {
        c.powf(e.gamma - (pw - one)) * k.r1.powf(e.gamma)
            + c.powf(e.theta - (pw - one)) * k.r2.powf(e.theta)
    };
    let sup_u = c.powf(ep)
        * k.c0.powf(-f.alpha)
        * k.c1_prime.powf(-f.beta)
        * k.d_max.powf(-(f.alpha + f.beta))
        * (one - grad_share(f, p))
        / f.big_m;
    let sup_v = c.powf(eq)
        * k.c1.powf(-g.alpha)
        * k.c0_prime.powf(-g.beta)
        * k.d_max.powf(-(g.alpha + g.beta))
        * (one - grad_share(g, q))
        / g.big_m;

    [
        ("ordering_u", ord_u),
        ("ordering_v", ord_v),
        ("subsolution_u", sub_u),
        ("subsolution_v", sub_v),
        ("supersolution_u", sup_u),
        ("supersolution_v", sup_v),
    ]
    .into_iter()
    .map(|(name, value)| Condition {
        name,
        value,
        pass: value >= margin_factor,
    })
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CSearch<T> {
    pub c: T,
    pub tried: Vec<T>,
    pub conditions: Vec<Condition<T>>,
    /// Certification of the built pair against its own lower fields.
    pub certification: CertificationReport<T>,
}

/// Doubling search for the smallest tested `C` meeting every condition.
pub fn find_c<T: Real>(
    mesh: &Mesh<T>,
    data: &BarrierData<T>,
    f: &ExponentSet<T>,
    g: &ExponentSet<T>,
    cfg: &SearchConfig<T>,
) -> Result<CSearch<T>> {
    if !(cfg.start > T::one()) || !(cfg.margin_factor >= T::one()) {
        return Err(Error::InvalidProblem(
            "search needs start > 1 and margin_factor >= 1".into(),
        ));
    }
    let mut c = cfg.start;
    let mut tried = Vec::new();
    loop {
        tried.push(c);
        let conds = conditions(data, f, g, c, cfg.margin_factor);
        if conds.iter().all(|x| x.pass) {
            let pair = build(data, c)?;
            let certification = certify(
                mesh,
                &pair,
                f,
                g,
                &pair.u_low.values,
                &pair.v_low.values,
            )?;
            return Ok(CSearch {
                c,
                tried,
                conditions: conds,
                certification,
            });
        }
        let next = c * T::lit(2.0);
        if next > cfg.cap {
            let failing: Vec<_> = conds.iter().filter(|x| !x.pass).map(|x| x.name).collect();
            return Err(Error::InfeasibleSearch {
                cap: cfg.cap.as_f64(),
                failing: failing.join(", "),
            });
        }
        c = next;
    }
}

/// Values that realized the worst margin of one inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorstSample<T> {
    pub w1: T,
    pub w2: T,
    pub grad1: T,
    pub grad2: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Margin<T> {
    pub name: &'static str,
    pub margin: T,
    pub node: usize,
    pub x: [T; 2],
    pub sample: WorstSample<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificationReport<T> {
    pub c: T,
    pub margins: Vec<Margin<T>>,
    pub pass: bool,
}

impl<T: Real> CertificationReport<T> {
    pub fn margin(&self, name: &str) -> Option<T> {
        self.margins.iter().find(|m| m.name == name).map(|m| m.margin)
    }

    pub fn min_margin(&self) -> T {
        self.margins
            .iter()
            .fold(T::infinity(), |m, x| m.min(x.margin))
    }
}

/// Per-node margins of every inequality, `+∞` at boundary nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMargins<T> {
    pub names: [&'static str; 6],
    pub values: [Vec<T>; 6],
    samples: [Vec<WorstSample<T>>; 6],
}

pub const INEQUALITIES: [&str; 6] = [
    "ordering_u",
    "ordering_v",
    "subsolution_u",
    "subsolution_v",
    "supersolution_u",
    "supersolution_v",
];

/// `max_{e ∋ i} (|∇z1_e|^a + |∇z2_e|^b)` per node, with the magnitudes attaining it.
fn gradient_terms<T: Real>(mesh: &Mesh<T>, z1: &[T], z2: &[T], a: T, b: T) -> Vec<(T, T, T)> {
    let g1 = gradient(mesh, z1).magnitudes();
    let g2 = gradient(mesh, z2).magnitudes();
    let mut out = vec![(T::zero(), T::zero(), T::zero()); mesh.num_nodes()];
    for (k, e) in mesh.elements().iter().enumerate() {
        let v = g1[k].powf(a) + g2[k].powf(b);
        for &i in e.nodes() {
            if v > out[i].0 {
                out[i] = (v, g1[k], g2[k]);
            }
        }
    }
    out
}

/// Pointwise margins at interior nodes:
///
/// * ordering: `up − low`
/// * subsolution: `m u̲^α v̲^β − (−Δ_p u̲)`, the lower envelope at the rectangle
///   extreme that minimizes it
/// * supersolution: `−Δ_p ū − (M ū^α v̄^β + |∇z1|^γ + |∇z2|^θ)`, the upper
///   envelope at the maximizing extreme and the steepest adjacent element
pub fn node_margins<T: Real>(
    mesh: &Mesh<T>,
    pair: &BarrierPair<T>,
    f: &ExponentSet<T>,
    g: &ExponentSet<T>,
    z1: &[T],
    z2: &[T],
) -> Result<NodeMargins<T>> {
    let n = mesh.num_nodes();
    for v in [
        &pair.u_low.values,
        &pair.v_low.values,
        &pair.u_up.values,
        &pair.v_up.values,
    ] {
        mesh.check_len(v.len())?;
    }
    mesh.check_len(z1.len())?;
    mesh.check_len(z2.len())?;
    let gf = gradient_terms(mesh, z1, z2, f.gamma, f.theta);
    let gg = gradient_terms(mesh, z1, z2, g.gamma, g.theta);
    let inf = T::infinity();
    let blank = WorstSample {
        w1: T::zero(),
        w2: T::zero(),
        grad1: T::zero(),
        grad2: T::zero(),
    };
    let mut values: [Vec<T>; 6] = std::array::from_fn(|_| vec![inf; n]);
    let mut samples: [Vec<WorstSample<T>>; 6] = std::array::from_fn(|_| vec![blank; n]);
    let (ul, vl, uu, vu) = (&pair.u_low, &pair.v_low, &pair.u_up, &pair.v_up);
    for &i in mesh.interior() {
        let (a, b, c, d) = (ul.values[i], vl.values[i], uu.values[i], vu.values[i]);
        let s = |w1, w2| WorstSample { w1, w2, grad1: T::zero(), grad2: T::zero() };
        values[0][i] = c - a;
        samples[0][i] = s(a, c);
        values[1][i] = d - b;
        samples[1][i] = s(b, d);
        values[2][i] = f.lower(a, b) - ul.lap[i];
        samples[2][i] = s(a, b);
        values[3][i] = g.lower(a, b) - vl.lap[i];
        samples[3][i] = s(a, b);
        values[4][i] = uu.lap[i] - (f.big_m * c.powf(f.alpha) * d.powf(f.beta) + gf[i].0);
        samples[4][i] = WorstSample { w1: c, w2: d, grad1: gf[i].1, grad2: gf[i].2 };
        values[5][i] = vu.lap[i] - (g.big_m * c.powf(g.alpha) * d.powf(g.beta) + gg[i].0);
        samples[5][i] = WorstSample { w1: c, w2: d, grad1: gg[i].1, grad2: gg[i].2 };
    }
    Ok(NodeMargins {
        names: INEQUALITIES,
        values,
        samples,
    })
}

impl<T: Real> NodeMargins<T> {
    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.names
            .iter()
            .position(|n| *n == name)
            .map(|k| self.values[k].as_slice())
    }

    pub fn summarize(&self, mesh: &Mesh<T>, c: T) -> CertificationReport<T> {
        let mut margins = Vec::with_capacity(6);
        for k in 0..6 {
            let mut worst = (mesh.interior().first().copied().unwrap_or(0), T::infinity());
            for &i in mesh.interior() {
                if self.values[k][i] < worst.1 {
                    worst = (i, self.values[k][i]);
                }
            }
            margins.push(Margin {
                name: self.names[k],
                margin: worst.1,
                node: worst.0,
                x: mesh.nodes()[worst.0],
                sample: self.samples[k][worst.0],
            });
        }
        let pass = margins.iter().all(|m| m.margin >= T::zero());
        CertificationReport { c, margins, pass }
    }
}

/// Summary of [`node_margins`]: minimum margin per inequality and where it
/// occurs. Passes iff every margin is nonnegative.
pub fn certify<T: Real>(
    mesh: &Mesh<T>,
    pair: &BarrierPair<T>,
    f: &ExponentSet<T>,
    g: &ExponentSet<T>,
    z1: &[T],
    z2: &[T],
) -> Result<CertificationReport<T>> {
    Ok(node_margins(mesh, pair, f, g, z1, z2)?.summarize(mesh, pair.c))
}

/// Nodewise max of the lower fields and min of the upper fields. Each
/// `lap` value is taken from the field attaining the extremum (on ties the
/// weaker of the two); the discrete comparison principle makes it a valid
/// bound for the combined field.
pub fn lattice_min<T: Real>(pa: &BarrierPair<T>, pb: &BarrierPair<T>) -> Result<BarrierPair<T>> {
    let n = pa.u_low.values.len();
    for f in [&pb.u_low, &pb.v_low, &pb.u_up, &pb.v_up] {
        if f.values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: f.values.len(),
            });
        }
    }
    let combine = |a: &BarrierField<T>, b: &BarrierField<T>, lower: bool| {
        let mut values = Vec::with_capacity(n);
        let mut lap = Vec::with_capacity(n);
        for i in 0..n {
            let (x, y) = (a.values[i], b.values[i]);
            let pick_a = if lower { x > y } else { x < y };
            let tie = x == y;
            values.push(if pick_a || tie { x } else { y });
            lap.push(if tie {
                if lower {
                    a.lap[i].max(b.lap[i])
                } else {
                    a.lap[i].min(b.lap[i])
                }
            } else if pick_a {
                a.lap[i]
            } else {
                b.lap[i]
            });
        }
        BarrierField {
            values: ScalarField::new(values),
            lap,
        }
    };
    let pair = BarrierPair {
        c: pa.c.max(pb.c),
        p: pa.p,
        q: pa.q,
        u_low: combine(&pa.u_low, &pb.u_low, true),
        v_low: combine(&pa.v_low, &pb.v_low, true),
        u_up: combine(&pa.u_up, &pb.u_up, false),
        v_up: combine(&pa.v_up, &pb.v_up, false),
        constants: pa.constants,
    };
    let (node, gap) = pair.ordering_gap();
    if gap < T::zero() {
        return Err(Error::Lattice {
            node,
            gap: gap.as_f64(),
        });
    }
    Ok(pair)
}
