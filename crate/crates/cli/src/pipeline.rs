//! Pipeline stages shared by the subcommands. Each stage is deterministic in
//! the configuration.

use plapsys::auxiliary::{rho_hat, AuxProblem, AuxSolution, Direction, ShiftParams};
use plapsys::barriers::{build, certify, find_c, BarrierData, BarrierPair, CSearch, CertificationReport};
use plapsys::eigen::{first_eigenpair, EigenPair};
use plapsys::fixedpoint::{calibrate_k, picard, verify, KConfig, KValue, SolutionReport, Verdict};
use plapsys::hypotheses::NonlinearitySpec;
use plapsys::mesh::{Mesh, ScalarField};
use plapsys::plap::torsion;
use plapsys::real::sup_diff;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

pub fn mesh(cfg: &RunConfig) -> Result<Mesh<f64>, CliError> {
    cfg.check_exponents()?;
    Ok(Mesh::new(cfg.domain.domain())?)
}

/// Runs `stage` for `p` and reuses the result for `q` when they coincide.
fn per_exponent<R: Clone>(
    cfg: &RunConfig,
    mut stage: impl FnMut(f64) -> Result<R, CliError>,
) -> Result<(R, R), CliError> {
    let a = stage(cfg.p)?;
    let b = if cfg.q == cfg.p { a.clone() } else { stage(cfg.q)? };
    Ok((a, b))
}

pub fn eigenpairs(cfg: &RunConfig, mesh: &Mesh<f64>) -> Result<(EigenPair<f64>, EigenPair<f64>), CliError> {
    per_exponent(cfg, |p| Ok(first_eigenpair(mesh, p, &cfg.eigen, &cfg.solver)?))
}

pub fn torsions(cfg: &RunConfig, mesh: &Mesh<f64>) -> Result<(ScalarField<f64>, ScalarField<f64>), CliError> {
    per_exponent(cfg, |p| Ok(torsion(mesh, p, &cfg.solver)?))
}

pub fn k_values(cfg: &RunConfig, mesh: &Mesh<f64>) -> Result<(KValue<f64>, KValue<f64>), CliError> {
    let k = &cfg.k;
    if k.inflation.is_nan() || k.inflation < 1.0 {
        return Err(CliError::Invalid(format!("k.inflation must be >= 1, got {}", k.inflation)));
    }
    let one = |p: f64, set: Option<f64>| -> Result<KValue<f64>, CliError> {
        match set {
            Some(v) if v > 0.0 && v.is_finite() => Ok(KValue::user(v)),
            Some(v) => Err(CliError::Invalid(format!("K overrides must be positive, got {v}"))),
            None => Ok(calibrate_k(mesh, p, k.seed, k.inflation, &cfg.solver)?),
        }
    };
    let kp = one(cfg.p, k.k_p)?;
    let kq = if cfg.q == cfg.p && k.k_q == k.k_p { kp } else { one(cfg.q, k.k_q)? };
    Ok((kp, kq))
}

pub struct Prepared {
    pub mesh: Mesh<f64>,
    pub data: BarrierData<f64>,
    pub k_p: KValue<f64>,
    pub k_q: KValue<f64>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let mesh = mesh(cfg)?;
    let (ep, eq) = eigenpairs(cfg, &mesh)?;
    let (xi1, xi2) = torsions(cfg, &mesh)?;
    let (k_p, k_q) = k_values(cfg, &mesh)?;
    let data = BarrierData::new(&mesh, ep, eq, xi1, xi2, k_p.value, k_q.value)?;
    Ok(Prepared { mesh, data, k_p, k_q })
}

#[derive(Clone, Debug, Serialize)]
pub struct Barriers {
    pub search: CSearch<f64>,
    /// Certification with gradients frozen at the upper fields.
    pub upper_certification: CertificationReport<f64>,
    #[serde(skip)]
    pub pair: BarrierPair<f64>,
}

impl Barriers {
    pub fn pass(&self) -> bool {
        self.search.certification.pass && self.upper_certification.pass
    }

    pub fn failures(&self) -> String {
        let mut out = Vec::new();
        for (tag, r) in [("lower", &self.search.certification), ("upper", &self.upper_certification)] {
            for m in r.margins.iter().filter(|m| m.margin < 0.0) {
                out.push(format!("{} ({tag} gradients) margin {:e} at {:?}", m.name, m.margin, m.x));
            }
        }
        out.join("; ")
    }
}

pub fn barriers(cfg: &RunConfig, prep: &Prepared) -> Result<Barriers, CliError> {
    let (f, g) = (cfg.spec_f.exponents(), cfg.spec_g.exponents());
    let search = find_c(&prep.mesh, &prep.data, &f, &g, &cfg.search)?;
    let pair = build(&prep.data, search.c)?;
    let upper_certification = certify(&prep.mesh, &pair, &f, &g, &pair.u_up.values, &pair.v_up.values)?;
    Ok(Barriers {
        search,
        upper_certification,
        pair,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Shift {
    pub rho_hat: f64,
    pub derived: f64,
    pub overridden: bool,
}

pub struct Specs {
    pub f: NonlinearitySpec<f64>,
    pub g: NonlinearitySpec<f64>,
}

impl Specs {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(Self {
            f: cfg.spec_f.spec()?,
            g: cfg.spec_g.spec()?,
        })
    }
}

pub fn shift(cfg: &RunConfig, pair: &BarrierPair<f64>) -> Shift {
    let cmp = pair.constants.comparison;
    let derived = rho_hat(
        &cfg.spec_f.exponents(),
        &cfg.spec_g.exponents(),
        pair.c,
        cmp.l,
        cmp.l_hat,
        cfg.p,
        cfg.q,
    );
    Shift {
        rho_hat: cfg.aux.rho_hat.unwrap_or(derived),
        derived,
        overridden: cfg.aux.rho_hat.is_some(),
    }
}

pub fn aux_problem<'a>(
    cfg: &RunConfig,
    mesh: &'a Mesh<f64>,
    pair: &'a BarrierPair<f64>,
    specs: &'a Specs,
    shift: &Shift,
) -> Result<AuxProblem<'a, f64>, CliError> {
    let params = ShiftParams::new(
        shift.rho_hat,
        &cfg.spec_f.exponents(),
        &cfg.spec_g.exponents(),
        cfg.p,
        cfg.q,
    )?;
    Ok(AuxProblem {
        mesh,
        pair,
        f: &specs.f,
        g: &specs.g,
        shift: params,
        solver: cfg.solver,
        cfg: cfg.aux.aux_config(),
    })
}

/// Sup-norm distance between the minimal and maximal solutions of the
/// frozen system at the converged gradients.
#[derive(Clone, Debug, Serialize)]
pub struct BracketGap {
    pub gap_u: f64,
    pub gap_v: f64,
    pub sweeps_from_above: usize,
}

pub struct Solved {
    pub barriers: Barriers,
    pub shift: Shift,
    pub solution: SolutionReport<f64>,
    pub gap: BracketGap,
}

pub fn solve(cfg: &RunConfig, prep: &Prepared) -> Result<Solved, CliError> {
    let specs = Specs::new(cfg)?;
    let barriers = barriers(cfg, prep)?;
    if !barriers.pass() {
        return Err(CliError::Certification(barriers.failures()));
    }
    let pair = &barriers.pair;
    let shift = shift(cfg, pair);
    let prob = aux_problem(cfg, &prep.mesh, pair, &specs, &shift)?;
    let kcfg = KConfig::from_pair(pair, prep.k_p, prep.k_q)?;
    let solution = picard(&prob, &kcfg, None, &cfg.fixed_point)?;
    let above: AuxSolution<f64> = prob.solve(&solution.u, &solution.v, Direction::FromAbove)?;
    let gap = BracketGap {
        gap_u: sup_diff(&above.u, &solution.last_inner.u),
        gap_v: sup_diff(&above.v, &solution.last_inner.v),
        sweeps_from_above: above.sweeps,
    };
    Ok(Solved {
        barriers,
        shift,
        solution,
        gap,
    })
}

pub fn verify_fields(
    cfg: &RunConfig,
    prep: &Prepared,
    pair: &BarrierPair<f64>,
    u: &[f64],
    v: &[f64],
) -> Result<Verdict<f64>, CliError> {
    let specs = Specs::new(cfg)?;
    Ok(verify(&prep.mesh, u, v, pair, &specs.f, &specs.g, cfg.fixed_point.verify_tol)?)
}

pub fn verdict_failures(v: &Verdict<f64>) -> String {
    let mut out = Vec::new();
    if !v.residual_pass {
        out.push(format!(
            "residuals {:e}, {:e} exceed {:e}",
            v.residual_u, v.residual_v, v.tol
        ));
    }
    if !v.bounds_pass {
        out.push(format!(
            "distance bounds [{:e}, {:e}] outside [{:e}, {:e}]",
            v.bounds.c0_tilde.min(v.bounds.c0_tilde_prime),
            v.bounds.c1_tilde.max(v.bounds.c1_tilde_prime),
            v.lower_chain,
            v.upper_chain
        ));
    }
    if !v.rectangle_pass {
        out.push(format!("fields leave the barrier rectangle by {:e}", v.rectangle_violation));
    }
    out.join("; ")
}
