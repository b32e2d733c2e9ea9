use plapsys::auxiliary::{rho_hat, AuxConfig, AuxProblem, Direction, ShiftParams};
use plapsys::barriers::{build, certify, find_c, lattice_min, BarrierData, BarrierField, BarrierPair, SearchConfig};
use plapsys::eigen::{first_eigenpair, EigenConfig};
use plapsys::fixedpoint::{calibrate_k, picard, verify, KConfig, PicardConfig};
use plapsys::hypotheses::{validate, ExponentSet, NonlinearitySpec, Role};
use plapsys::mesh::{Domain, Mesh};
use plapsys::plap::{torsion, SolverConfig};
use proptest::prelude::*;
use std::sync::OnceLock;

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

fn data(mesh: &Mesh<f64>, p: f64, q: f64) -> BarrierData<f64> {
    let s = SolverConfig::default();
    let ep = first_eigenpair(mesh, p, &EigenConfig::default(), &s).unwrap();
    let eq = first_eigenpair(mesh, q, &EigenConfig::default(), &s).unwrap();
    let kp = calibrate_k(mesh, p, 7, 2.0, &s).unwrap().value;
    let kq = calibrate_k(mesh, q, 7, 2.0, &s).unwrap().value;
    BarrierData::new(mesh, ep, eq, torsion(mesh, p, &s).unwrap(), torsion(mesh, q, &s).unwrap(), kp, kq).unwrap()
}

fn interval() -> &'static (Mesh<f64>, BarrierData<f64>) {
    static CELL: OnceLock<(Mesh<f64>, BarrierData<f64>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mesh = Mesh::new(Domain::unit_interval(64)).unwrap();
        let d = data(&mesh, 2.0, 2.0);
        (mesh, d)
    })
}

fn certified(mesh: &Mesh<f64>, pair: &BarrierPair<f64>, f: &ExponentSet<f64>, g: &ExponentSet<f64>) -> bool {
    [(&pair.u_low, &pair.v_low), (&pair.u_up, &pair.v_up), (&pair.u_low, &pair.v_up)]
        .iter()
        .all(|(z1, z2)| certify(mesh, pair, f, g, &z1.values, &z2.values).unwrap().pass)
}

fn set(role: Role, sing: f64, part: f64, gamma: f64, theta: f64) -> ExponentSet<f64> {
    let (alpha, beta) = match role {
        Role::F => (sing, part),
        Role::G => (part, sing),
    };
    ExponentSet {
        role,
        m: 0.5,
        big_m: 1.5,
        alpha,
        beta,
        gamma,
        theta,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    // a feasible constant stays feasible when doubled
    #[test]
    fn doubled_constant_still_certifies(
        a in 0.05f64..0.45, b in 0.05f64..0.45,
        ta in 0.0f64..1.0, tb in 0.0f64..1.0,
        gam in 0.1f64..0.9, the in 0.1f64..0.9,
    ) {
        let (mesh, d) = interval();
        let f = set(Role::F, -a, a + ta * (1.0 - 2.0 * a), gam, the);
        let g = set(Role::G, -b, b + tb * (1.0 - 2.0 * b), the, gam);
        prop_assume!(validate(&f, &g, 2.0, 2.0).pass);
        let c = find_c(mesh, d, &f, &g, &SearchConfig::default()).unwrap().c;
        for k in [1.0, 2.0] {
            let pair = build(d, k * c).unwrap();
            prop_assert!(certified(mesh, &pair, &f, &g), "C = {}", k * c);
        }
    }
}

#[test]
fn lattice_of_crossing_pairs() {
    let (mesh, d) = interval();
    let (f, g) = exps();
    let c = 4.0 * find_c(mesh, d, &f, &g, &SearchConfig::default()).unwrap().c;
    let s = SolverConfig::default();
    let tilted = |slope: f64| -> BarrierField<f64> {
        let h: Vec<f64> = mesh.nodes().iter().map(|x| 1.0 + slope * (2.0 * x[0] - 1.0)).collect();
        BarrierField::upper_from_load(mesh, 2.0, c, &h, &s).unwrap()
    };
    let mut a = build(d, c).unwrap();
    let mut b = a.clone();
    a.u_up = tilted(0.5);
    b.u_up = tilted(-0.5);
    a.v_up = tilted(-0.5);
    b.v_up = tilted(0.5);
    assert!(certified(mesh, &a, &f, &g));
    assert!(certified(mesh, &b, &f, &g));

    let m = lattice_min(&a, &b).unwrap();
    let n = mesh.num_nodes();
    let strictly_below = |i: usize| m.u_up.values[i] < a.u_up.values[i] && m.u_up.values[i] <= b.u_up.values[i];
    assert!((0..n).any(strictly_below));
    assert!((0..n).any(|i| m.u_up.values[i] < b.u_up.values[i]));
    assert!(certified(mesh, &m, &f, &g));
}

fn run_fixed_point(mesh: &Mesh<f64>, d: &BarrierData<f64>, a: f64) {
    let (f, g) = exps();
    let (p, q) = (d.p, d.q);
    let c = find_c(mesh, d, &f, &g, &SearchConfig::default()).unwrap().c;
    let pair = build(d, c).unwrap();
    let report = certify(mesh, &pair, &f, &g, &pair.u_low.values, &pair.v_low.values).unwrap();
    assert!(report.pass, "{report:?}");

    let fs = NonlinearitySpec::canonical(f, a, a).unwrap();
    let gs = NonlinearitySpec::canonical(g, a, a).unwrap();
    let cmp = pair.constants.comparison;
    let rho = rho_hat(&f, &g, c, cmp.l, cmp.l_hat, p, q);
    let prob = AuxProblem {
        mesh,
        pair: &pair,
        f: &fs,
        g: &gs,
        shift: ShiftParams::new(rho, &f, &g, p, q).unwrap(),
        solver: SolverConfig::default(),
        cfg: AuxConfig::default(),
    };
    let from_below = prob.solve(&pair.u_low.values, &pair.v_low.values, Direction::FromBelow).unwrap();
    assert!(from_below.trace.monotone());

    let k = KConfig::from_pair(&pair, d_k(d, true), d_k(d, false)).unwrap();
    let sol = picard(&prob, &k, None, &PicardConfig::default()).unwrap();
    assert!(sol.verdict.pass);
    let v = verify(mesh, &sol.u, &sol.v, &pair, &fs, &gs, 1e-6).unwrap();
    assert!(v.pass, "{v:?}");
}

fn d_k(d: &BarrierData<f64>, first: bool) -> plapsys::fixedpoint::KValue<f64> {
    let v = if first { d.constants.k_p } else { d.constants.k_q };
    plapsys::fixedpoint::KValue::user(v)
}

#[test]
fn square_pipeline_converges() {
    let mesh = Mesh::new(Domain::unit_square(16)).unwrap();
    let d = data(&mesh, 2.0, 2.0);
    run_fixed_point(&mesh, &d, 1e-3);
}

#[test]
fn unequal_exponents_pipeline_converges() {
    let mesh = Mesh::new(Domain::unit_interval(64)).unwrap();
    let d = data(&mesh, 3.0, 2.5);
    run_fixed_point(&mesh, &d, 1e-3);
}

#[test]
fn single_precision_barriers() {
    let mesh = Mesh::new(Domain::<f32>::unit_interval(32)).unwrap();
    let s = SolverConfig {
        tol_residual: 1e-5f32,
        ..SolverConfig::default()
    };
    let e = first_eigenpair(
        &mesh,
        2.0,
        &EigenConfig {
            tol: 1e-5,
            ..EigenConfig::default()
        },
        &s,
    )
    .unwrap();
    let lam_exact = std::f32::consts::PI.powi(2);
    assert!((e.lambda - lam_exact).abs() / lam_exact < 5e-3, "{}", e.lambda);
    let xi = torsion(&mesh, 2.0, &s).unwrap();
    let d = BarrierData::new(&mesh, e.clone(), e, xi.clone(), xi, 1.0, 1.0).unwrap();
    let f = ExponentSet::<f32> {
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
    let c = find_c(&mesh, &d, &f, &g, &SearchConfig::default()).unwrap().c;
    let pair = build(&d, c).unwrap();
    assert!(certify(&mesh, &pair, &f, &g, &pair.u_low.values, &pair.v_low.values).unwrap().pass);
}
