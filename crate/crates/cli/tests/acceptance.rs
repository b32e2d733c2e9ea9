//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Expected values are computed here from closed forms or
//! independent integrations, never copied from solver output.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use plapsys::auxiliary::{hardy_sobolev_integral, rho_hat, AuxConfig, AuxProblem, Direction, ShiftParams};
use plapsys::barriers::{build, certify, find_c, lattice_min, BarrierData, BarrierField, BarrierPair, SearchConfig};
use plapsys::eigen::{first_eigenpair, EigenConfig};
use plapsys::fixedpoint::{calibrate_k, picard, KConfig, PicardConfig};
use plapsys::hypotheses::{ExponentSet, NonlinearitySpec, Role};
use plapsys::mesh::{Domain, Mesh, ScalarField};
use plapsys::plap::{solve_dirichlet, torsion, PlapProblem, SolverConfig, Source};
use plapsys::real::{sup_diff, sup_norm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, check and time limit in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(out: Outcome, took: Duration, limit: Duration) -> Outcome {
    match out {
        Ok(d) if took <= limit => Ok(d),
        Ok(d) => Err(format!("{d}; took {took:.2?} > {limit:.0?}")),
        e => e,
    }
}

fn interval(cells: usize) -> Mesh<f64> {
    Mesh::new(Domain::unit_interval(cells)).unwrap()
}

fn solve_nodal(mesh: &Mesh<f64>, p: f64, h: Vec<f64>) -> Vec<f64> {
    let prob = PlapProblem::new(p, Source::Nodal(h));
    solve_dirichlet(mesh, &prob, &SolverConfig::default()).unwrap().0.into_values()
}

fn sine_error(cells: usize) -> f64 {
    let mesh = interval(cells);
    let h = mesh.nodes().iter().map(|x| PI * PI * (PI * x[0]).sin()).collect();
    let u = solve_nodal(&mesh, 2.0, h);
    mesh.nodes()
        .iter()
        .zip(&u)
        .map(|(x, v)| (v - (PI * x[0]).sin()).abs())
        .fold(0.0, f64::max)
}

fn manufactured() -> Outcome {
    let e1 = sine_error(128);
    let e2 = sine_error(256);
    let order = (e1 / e2).log2();
    check(
        e2 <= 1e-3 && (order - 2.0).abs() <= 0.3,
        format!("error {e2:.3e} at h=1/256, observed order {order:.3}"),
    )
}

fn torsion_p3() -> Outcome {
    let mesh = interval(512);
    let xi = torsion(&mesh, 3.0, &SolverConfig::default()).unwrap();
    let exact = (2.0 / 3.0) * 0.5f64.powf(1.5);
    let rel = (sup_norm(&xi) - exact).abs() / exact;
    check(rel <= 0.01, format!("max {:.6} vs {exact:.6}, rel {rel:.2e}", sup_norm(&xi)))
}

/// Half-period of `(|φ'|^{p−2}φ')' + |φ|^{p−2}φ = 0` by RK4 in the variables
/// `(φ, w = |φ'|^{p−2}φ')` from `φ = 0, w = 1` until `w` changes sign.
fn shooting_eigenvalue(p: f64) -> f64 {
    let dphi = |w: f64| w.signum() * w.abs().powf(1.0 / (p - 1.0));
    let dw = |phi: f64| -phi.signum() * phi.abs().powf(p - 1.0);
    let f = |s: [f64; 2]| [dphi(s[1]), dw(s[0])];
    let dt = 1e-5;
    let (mut t, mut s) = (0.0, [0.0, 1.0]);
    loop {
        let k1 = f(s);
        let k2 = f([s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1]]);
        let k3 = f([s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1]]);
        let k4 = f([s[0] + dt * k3[0], s[1] + dt * k3[1]]);
        let next = [
            s[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if next[1] <= 0.0 {
            let frac = s[1] / (s[1] - next[1]);
            // the zero of φ on (0, L) with λ = 1 sits at L = 2 t*; λ₁ = L^p on (0, 1)
            let half = t + frac * dt;
            return (2.0 * half).powf(p);
        }
        s = next;
        t += dt;
    }
}

fn eigenpairs() -> Outcome {
    let ecfg = EigenConfig::default();
    let scfg = SolverConfig::default();
    let l2 = first_eigenpair(&interval(256), 2.0, &ecfg, &scfg).unwrap().lambda;
    let r2 = (l2 - PI * PI).abs() / (PI * PI);

    let closed = 2.0 * (2.0 * PI / (3.0 * (PI / 3.0).sin())).powf(3.0);
    let shot = shooting_eigenvalue(3.0);
    let l3 = first_eigenpair(&interval(256), 3.0, &ecfg, &scfg).unwrap().lambda;
    let r3 = (l3 - closed).abs() / closed;
    let agree = (shot - closed).abs() / closed;

    let square = Mesh::new(Domain::unit_square(64)).unwrap();
    let ls = first_eigenpair(&square, 2.0, &ecfg, &scfg).unwrap().lambda;
    let rs = (ls - 2.0 * PI * PI).abs() / (2.0 * PI * PI);
    check(
        r2 <= 0.01 && r3 <= 0.02 && agree <= 1e-3 && rs <= 0.02,
        format!(
            "p=2: {l2:.4} (rel {r2:.1e}); p=3: {l3:.4} vs {closed:.4} (rel {r3:.1e}, shooting {shot:.4}); square: {ls:.4} (rel {rs:.1e})"
        ),
    )
}

fn exps(a: f64) -> (ExponentSet<f64>, ExponentSet<f64>, NonlinearitySpec<f64>, NonlinearitySpec<f64>) {
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
    let fs = NonlinearitySpec::canonical(f, a, a).unwrap();
    let gs = NonlinearitySpec::canonical(g, a, a).unwrap();
    (f, g, fs, gs)
}

fn barrier_data(mesh: &Mesh<f64>) -> BarrierData<f64> {
    let s = SolverConfig::default();
    let e = first_eigenpair(mesh, 2.0, &EigenConfig::default(), &s).unwrap();
    let xi = torsion(mesh, 2.0, &s).unwrap();
    let k = calibrate_k(mesh, 2.0, 7, 2.0, &s).unwrap().value;
    BarrierData::new(mesh, e.clone(), e, xi.clone(), xi, k, k).unwrap()
}

fn certified(mesh: &Mesh<f64>, pair: &BarrierPair<f64>) -> (bool, f64) {
    let (f, g, _, _) = exps(0.0);
    let mut min = f64::INFINITY;
    let mut pass = true;
    for (z1, z2) in [(&pair.u_low, &pair.v_low), (&pair.u_up, &pair.v_up)] {
        let r = certify(mesh, pair, &f, &g, &z1.values, &z2.values).unwrap();
        pass &= r.pass;
        min = min.min(r.min_margin());
    }
    (pass, min)
}

fn barrier_certification() -> Outcome {
    let mesh = interval(128);
    let data = barrier_data(&mesh);
    let (f, g, _, _) = exps(0.0);
    let search = find_c(&mesh, &data, &f, &g, &SearchConfig::default()).unwrap();
    let pair = build(&data, search.c).unwrap();
    let (pass, min) = certified(&mesh, &pair);
    let binding: Vec<_> = plapsys::barriers::conditions(&data, &f, &g, search.c / 2.0, 1.05)
        .into_iter()
        .filter(|c| !c.pass)
        .map(|c| c.name)
        .collect();
    check(
        search.c >= PI * PI && pass,
        format!("C = {} (>= pi^2), min margin {min:.3e}, binding at C/2: {binding:?}", search.c),
    )
}

struct Frozen {
    mesh: Mesh<f64>,
    pair: BarrierPair<f64>,
    fs: NonlinearitySpec<f64>,
    gs: NonlinearitySpec<f64>,
    shift: ShiftParams<f64>,
}

impl Frozen {
    fn new(cells: usize, a: f64, c: Option<f64>) -> Self {
        let mesh = interval(cells);
        let data = barrier_data(&mesh);
        let (f, g, fs, gs) = exps(a);
        let c = c.unwrap_or_else(|| find_c(&mesh, &data, &f, &g, &SearchConfig::default()).unwrap().c);
        let pair = build(&data, c).unwrap();
        let cmp = pair.constants.comparison;
        let rho = rho_hat(&f, &g, c, cmp.l, cmp.l_hat, 2.0, 2.0);
        let shift = ShiftParams::new(rho, &f, &g, 2.0, 2.0).unwrap();
        Self {
            mesh,
            pair,
            fs,
            gs,
            shift,
        }
    }

    fn problem(&self) -> AuxProblem<'_, f64> {
        AuxProblem {
            mesh: &self.mesh,
            pair: &self.pair,
            f: &self.fs,
            g: &self.gs,
            shift: self.shift,
            solver: SolverConfig::default(),
            cfg: AuxConfig::default(),
        }
    }
}

fn monotone_iteration() -> Outcome {
    let coarse = Frozen::new(64, 0.0, None);
    let zero = vec![0.0; coarse.mesh.num_nodes()];
    let prob = coarse.problem();
    let below = prob.solve(&zero, &zero, Direction::FromBelow).map_err(|e| e.to_string())?;
    let above = prob.solve(&zero, &zero, Direction::FromAbove).map_err(|e| e.to_string())?;
    let last = below.trace.entries.last().unwrap();
    let inner = last.sup_diff_u.max(last.sup_diff_v);
    let gap = sup_diff(&below.u, &above.u).max(sup_diff(&below.v, &above.v));

    let fine = Frozen::new(256, 0.0, Some(coarse.pair.c));
    let fz = vec![0.0; fine.mesh.num_nodes()];
    let fsol = fine.problem().solve(&fz, &fz, Direction::FromBelow).map_err(|e| e.to_string())?;
    let mut diff: f64 = 0.0;
    for (i, x) in coarse.mesh.nodes().iter().enumerate() {
        let j = 4 * i;
        assert_eq!(fine.mesh.nodes()[j], *x);
        diff = diff.max((below.u[i] - fsol.u[j]).abs()).max((below.v[i] - fsol.v[j]).abs());
    }
    let scale = sup_norm(&fsol.u).max(sup_norm(&fsol.v));
    let rel = diff / scale;
    // the manufactured solution has unit sup norm, so its error is already relative
    let bound = 3.0 * sine_error(64);
    check(
        below.max_monotone_violation < 1e-10
            && below.trace.monotone()
            && below.sweeps <= 200
            && inner < 1e-8
            && rel <= bound,
        format!(
            "{} sweeps, inner diff {inner:.2e}, monotone violation {:.1e}, below/above gap {gap:.2e}, h/4 reference rel diff {rel:.2e} <= {bound:.2e}",
            below.sweeps, below.max_monotone_violation
        ),
    )
}

fn tilted(mesh: &Mesh<f64>, c: f64, slope: f64) -> BarrierField<f64> {
    let h: Vec<f64> = mesh.nodes().iter().map(|x| 1.0 + slope * (2.0 * x[0] - 1.0)).collect();
    BarrierField::upper_from_load(mesh, 2.0, c, &h, &SolverConfig::default()).unwrap()
}

fn lattice() -> Outcome {
    let mesh = interval(128);
    let data = barrier_data(&mesh);
    let (f, g, _, _) = exps(0.0);
    let c_star = find_c(&mesh, &data, &f, &g, &SearchConfig::default()).unwrap().c;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut lines = Vec::new();
    let mut all = true;
    for _ in 0..5 {
        let ca = c_star * rng.gen_range(4.0..16.0);
        let cb = ca * rng.gen_range(0.8..1.25);
        let (su, sv) = (rng.gen_range(0.2..0.5), rng.gen_range(0.2..0.5));
        // opposite tilts make the upper fields cross
        let make = |c: f64, sign: f64| {
            let mut pair = build(&data, c).unwrap();
            pair.u_up = tilted(&mesh, c, sign * su);
            pair.v_up = tilted(&mesh, c, -sign * sv);
            pair
        };
        let a = make(ca, 1.0);
        let b = make(cb, -1.0);
        let (pa, _) = certified(&mesh, &a);
        let (pb, _) = certified(&mesh, &b);
        let m = lattice_min(&a, &b).map_err(|e| e.to_string())?;
        let (pm, min) = certified(&mesh, &m);
        let from_b = (0..mesh.num_nodes())
            .filter(|&i| m.u_up.values[i] < a.u_up.values[i] || m.v_up.values[i] < a.v_up.values[i])
            .count();
        all &= pa && pb && pm;
        lines.push(format!("C=({:.1},{:.1}) min margin {min:.2e} [{from_b} nodes from 2nd]", a.c, b.c));
    }
    check(all, lines.join("; "))
}

fn fixed_point() -> Outcome {
    let fz = Frozen::new(128, 1e-3, None);
    let prob = fz.problem();
    let kv = calibrate_k(&fz.mesh, 2.0, 7, 2.0, &SolverConfig::default()).unwrap();
    let kcfg = KConfig::from_pair(&fz.pair, kv, kv).unwrap();
    let sol = picard(&prob, &kcfg, None, &PicardConfig::default()).map_err(|e| e.to_string())?;
    let last = sol.outer.last().unwrap();
    let diff = last.diff_values.max(last.diff_gradients);
    let v = &sol.verdict;
    let in_k = sol.outer.iter().all(|e| e.in_k_u && e.in_k_v);
    let c0 = v.bounds.c0_tilde.min(v.bounds.c0_tilde_prime);
    let one_d = sol.outer_iterations <= 50
        && diff < 1e-6
        && v.pass
        && v.residual_u.max(v.residual_v) < 1e-6
        && c0 > 0.0
        && c0 >= v.lower_chain - 1e-6
        && in_k;
    let detail = format!(
        "1D: {} outer, diff {diff:.1e}, residual {:.1e}, c0~ {c0:.4} >= C^-1 l = {:.4}, in_K {in_k}",
        sol.outer_iterations,
        v.residual_u.max(v.residual_v),
        v.lower_chain
    );

    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo2d.cfg");
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_plapsys"))
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    let took = start.elapsed();
    let two_d = out.status.code() == Some(0) && took < Duration::from_secs(120);
    check(
        one_d && two_d,
        format!(
            "{detail}; 2D 64x64 solve exit {:?} in {took:.1?}",
            out.status.code()
        ),
    )
}

fn gradient_free() -> Outcome {
    let fz = Frozen::new(128, 0.0, None);
    let prob = fz.problem();
    let kv = calibrate_k(&fz.mesh, 2.0, 7, 2.0, &SolverConfig::default()).unwrap();
    let kcfg = KConfig::from_pair(&fz.pair, kv, kv).unwrap();
    let sol = picard(&prob, &kcfg, None, &PicardConfig::default()).map_err(|e| e.to_string())?;
    let last = sol.outer.last().unwrap();
    // the map ignores z entirely: two unrelated inputs give identical outputs
    let a = prob.solve(&fz.pair.u_low.values, &fz.pair.v_low.values, Direction::FromBelow).unwrap();
    let z: ScalarField<f64> = ScalarField::from_fn_dirichlet(&fz.mesh, |x| 0.3 * (7.0 * x[0]).sin());
    let b = prob.solve(&z, &z, Direction::FromBelow).unwrap();
    let constant = a.u == b.u && a.v == b.v;
    check(
        sol.outer_iterations <= 2 && last.diff_values == 0.0 && last.diff_gradients == 0.0 && constant,
        format!(
            "stopped at outer iteration {}, final diff ({}, {}), map constant in z: {constant}",
            sol.outer_iterations, last.diff_values, last.diff_gradients
        ),
    )
}

fn hardy_sobolev() -> Outcome {
    let mut values = Vec::new();
    for cells in [64, 128, 256] {
        let fz = Frozen::new(cells, 0.0, None);
        values.push(hardy_sobolev_integral(&fz.mesh, -0.25, &fz.pair.u_up.values).unwrap());
    }
    let hi = values.iter().cloned().fold(f64::MIN, f64::max);
    let lo = values.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (hi - lo) / hi;
    check(spread < 0.02, format!("integrals {values:.6?}, spread {spread:.2e}"))
}

fn determinism() -> Outcome {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/convection1d.cfg");
    let mut reports = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_plapsys"))
            .args(["solve", "--config"])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap();
        if out.status.code() != Some(0) {
            return Err(format!("solve exited {:?}", out.status.code()));
        }
        let report = std::fs::read(dir.path().join("solve_report.json")).unwrap();
        let fields = std::fs::read(dir.path().join("solve_fields.csv")).unwrap();
        reports.push((report, fields));
    }
    check(
        reports[0] == reports[1],
        format!("{} report bytes, {} field bytes, identical", reports[0].0.len(), reports[0].1.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("manufactured solution", manufactured, 5),
        ("p=3 torsion", torsion_p3, 10),
        ("eigenpairs", eigenpairs, 60),
        ("barrier certification", barrier_certification, 600),
        ("monotone iteration", monotone_iteration, 600),
        ("lattice property", lattice, 600),
        ("fixed point", fixed_point, 600),
        ("gradient-free map", gradient_free, 600),
        ("Hardy-Sobolev surrogate", hardy_sobolev, 600),
        ("determinism", determinism, 600),
    ];
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let out = within_time(out, took, Duration::from_secs(*limit));
        match out {
            Ok(d) => println!("PASS {:>2} {name}: {d} ({took:.2?})", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} ({took:.2?})", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
