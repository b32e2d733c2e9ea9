//! Growth hypotheses on the nonlinearities `f` (first equation) and `g`
//! (second equation), and evaluation of canonical or user-supplied forms.
//!
//! For `f` the singular variable is `s₁` (exponent `α < 0`), for `g` it is
//! `s₂` (exponent `β < 0`). Both share the envelope
//!
//! ```text
//!     m s₁^α s₂^β  ≤  f(x, s₁, s₂, ξ₁, ξ₂)  ≤  M s₁^α s₂^β + |ξ₁|^γ + |ξ₂|^θ.
//! ```

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::norm;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    F,
    G,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::F => "f",
            Role::G => "g",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet<T> {
    pub role: Role,
    pub m: T,
    #[serde(rename = "M")]
    pub big_m: T,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub theta: T,
}

impl<T: Real> ExponentSet<T> {
    /// `(singular, partner)` exponents: `(α, β)` for f and `(β, α)` for g.
    fn singular_partner(&self) -> (T, T) {
        match self.role {
            Role::F => (self.alpha, self.beta),
            Role::G => (self.beta, self.alpha),
        }
    }

    /// `m s₁^α s₂^β`
    pub fn lower(&self, s1: T, s2: T) -> T {
        self.m * s1.powf(self.alpha) * s2.powf(self.beta)
    }

    /// `M s₁^α s₂^β + |ξ₁|^γ + |ξ₂|^θ`, with gradient magnitudes.
    pub fn upper(&self, s1: T, s2: T, g1: T, g2: T) -> T {
        self.big_m * s1.powf(self.alpha) * s2.powf(self.beta)
            + g1.powf(self.gamma)
            + g2.powf(self.theta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Signed distance to the boundary of the constraint (positive when satisfied).
    pub slack: f64,
    pub strict: bool,
    /// Implied by the other constraints of the same block.
    pub redundant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            let names: Vec<_> = self.failures().iter().map(|c| c.name.clone()).collect();
            Err(Error::Hypotheses(names.join("; ")))
        }
    }
}

fn push<T: Real>(checks: &mut Vec<Check>, name: String, slack: T, strict: bool, redundant: bool) {
    let pass = if strict { slack > T::zero() } else { slack >= T::zero() };
    checks.push(Check {
        name,
        pass,
        slack: slack.as_f64(),
        strict,
        redundant,
    });
}

fn validate_one<T: Real>(checks: &mut Vec<Check>, spec: &ExponentSet<T>, expected: Role, power: T) {
    let tag = match expected {
        Role::F => "H(f)",
        Role::G => "H(g)",
    };
    let (sing, part) = spec.singular_partner();
    let (sn, pn) = match expected {
        Role::F => ("alpha", "beta"),
        Role::G => ("beta", "alpha"),
    };
    let pm1 = power - T::one();
    let exp = if expected == Role::F { "p-1" } else { "q-1" };
    let zero = T::zero();

    push(
        checks,
        format!("{tag}: role is {expected}"),
        if spec.role == expected { T::one() } else { -T::one() },
        true,
        false,
    );
    push(checks, format!("{tag}: m > 0"), spec.m, true, false);
    push(checks, format!("{tag}: M > 0"), spec.big_m, true, false);
    push(checks, format!("{tag}: m <= M"), spec.big_m - spec.m, false, false);
    push(checks, format!("{tag}: -1 < {sn}"), sing + T::one(), true, false);
    push(checks, format!("{tag}: {sn} < 0"), -sing, true, true);
    push(checks, format!("{tag}: {pn} > 0"), part, true, true);
    push(checks, format!("{tag}: gamma > 0"), spec.gamma, true, false);
    push(checks, format!("{tag}: theta > 0"), spec.theta, true, false);
    push(
        checks,
        format!("{tag}: 0 <= alpha + beta"),
        spec.alpha + spec.beta - zero,
        false,
        false,
    );
    // |singular| enters with the opposite sign: partner − singular
    let spread = part - sing;
    push(
        checks,
        format!("{tag}: alpha + beta < {pn} - {sn}"),
        spread - (spec.alpha + spec.beta),
        true,
        false,
    );
    push(checks, format!("{tag}: {pn} - {sn} < {exp}"), pm1 - spread, true, false);
    push(
        checks,
        format!("{tag}: max(gamma, theta) < {exp}"),
        pm1 - spec.gamma.max(spec.theta),
        true,
        false,
    );
    let finite = [spec.m, spec.big_m, spec.alpha, spec.beta, spec.gamma, spec.theta]
        .iter()
        .all(|v| v.is_finite());
    push(
        checks,
        format!("{tag}: parameters finite"),
        if finite { T::one() } else { -T::one() },
        true,
        false,
    );
}

/// Checks every inequality of both hypotheses.
pub fn validate<T: Real>(f: &ExponentSet<T>, g: &ExponentSet<T>, p: T, q: T) -> ValidationReport {
    let mut checks = Vec::new();
    push(&mut checks, "p > 1".into(), p - T::one(), true, false);
    push(&mut checks, "q > 1".into(), q - T::one(), true, false);
    validate_one(&mut checks, f, Role::F, p);
    validate_one(&mut checks, g, Role::G, q);
    let pass = checks.iter().all(|c| c.pass);
    ValidationReport { checks, pass }
}

/// Evaluation point handed to custom nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point<T> {
    pub x: [T; 2],
    pub s1: T,
    pub s2: T,
    pub grad1: [T; 2],
    pub grad2: [T; 2],
}

pub type CustomFn<T> = Arc<dyn Fn(&Point<T>) -> T + Send + Sync>;

#[derive(Clone)]
pub enum Form<T> {
    /// `m s₁^α s₂^β + a1 |ξ₁|^γ + a2 |ξ₂|^θ` with `a1, a2 ∈ [0, 1]`.
    Canonical { a1: T, a2: T },
    Custom(CustomFn<T>),
}

impl<T: fmt::Debug> fmt::Debug for Form<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Form::Canonical { a1, a2 } => f
                .debug_struct("Canonical")
                .field("a1", a1)
                .field("a2", a2)
                .finish(),
            Form::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NonlinearitySpec<T> {
    pub exponents: ExponentSet<T>,
    pub form: Form<T>,
}

impl<T: Real> NonlinearitySpec<T> {
    pub fn canonical(exponents: ExponentSet<T>, a1: T, a2: T) -> Result<Self> {
        let unit = |a: T| a >= T::zero() && a <= T::one();
        if !unit(a1) || !unit(a2) {
            return Err(Error::Hypotheses(format!(
                "canonical gradient coefficients must lie in [0, 1], got a1={a1}, a2={a2}"
            )));
        }
        Ok(Self {
            exponents,
            form: Form::Canonical { a1, a2 },
        })
    }

    pub fn custom(exponents: ExponentSet<T>, f: impl Fn(&Point<T>) -> T + Send + Sync + 'static) -> Self {
        Self {
            exponents,
            form: Form::Custom(Arc::new(f)),
        }
    }

    pub fn is_canonical(&self) -> bool {
        matches!(self.form, Form::Canonical { .. })
    }

    /// Canonical gradient coefficients; `None` for custom forms.
    pub fn gradient_coefficients(&self) -> Option<(T, T)> {
        match self.form {
            Form::Canonical { a1, a2 } => Some((a1, a2)),
            Form::Custom(_) => None,
        }
    }

    pub fn eval(&self, x: [T; 2], s1: T, s2: T, grad1: [T; 2], grad2: [T; 2]) -> Result<T> {
        if !(s1 > T::zero()) || !(s2 > T::zero()) {
            return Err(Error::OutsideCone {
                s1: s1.as_f64(),
                s2: s2.as_f64(),
            });
        }
        Ok(self.eval_unchecked(x, s1, s2, grad1, grad2))
    }

    /// [`eval`](Self::eval) without the cone check.
    pub(crate) fn eval_unchecked(&self, x: [T; 2], s1: T, s2: T, grad1: [T; 2], grad2: [T; 2]) -> T {
        match &self.form {
            Form::Canonical { a1, a2 } => {
                self.exponents.lower(s1, s2) + self.gradient_part(*a1, *a2, norm(grad1), norm(grad2))
            }
            Form::Custom(f) => f(&Point {
                x,
                s1,
                s2,
                grad1,
                grad2,
            }),
        }
    }

    /// `a1 |ξ₁|^γ + a2 |ξ₂|^θ`; a zero coefficient contributes an exact zero.
    pub(crate) fn gradient_part(&self, a1: T, a2: T, g1: T, g2: T) -> T {
        let e = &self.exponents;
        let mut s = T::zero();
        if a1 != T::zero() {
            s += a1 * g1.powf(e.gamma);
        }
        if a2 != T::zero() {
            s += a2 * g2.powf(e.theta);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample<T> {
    pub x: [T; 2],
    pub s1: T,
    pub s2: T,
    pub grad1: [T; 2],
    pub grad2: [T; 2],
}

/// Log-uniform `s ∈ [10⁻³, 10³]`, gradient magnitudes uniform in `[0, 10]`.
pub fn random_samples<T: Real>(count: usize, seed: u64) -> Vec<Sample<T>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vec2 = |rng: &mut rand_chacha::ChaCha8Rng| {
        let r: f64 = rng.gen_range(0.0..10.0);
        let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        [T::lit(r * a.cos()), T::lit(r * a.sin())]
    };
    (0..count)
        .map(|_| {
            let s1 = 10f64.powf(rng.gen_range(-3.0..3.0));
            let s2 = 10f64.powf(rng.gen_range(-3.0..3.0));
            let x = [T::lit(rng.gen_range(0.0..1.0)), T::lit(rng.gen_range(0.0..1.0))];
            let grad1 = vec2(&mut rng);
            let grad2 = vec2(&mut rng);
            Sample {
                x,
                s1: T::lit(s1),
                s2: T::lit(s2),
                grad1,
                grad2,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub samples: usize,
    /// `min (value − lower)` over samples.
    pub lower_margin: f64,
    pub lower_worst: usize,
    /// `min (upper − value)` over samples.
    pub upper_margin: f64,
    pub upper_worst: usize,
    pub pass: bool,
}

/// Checks the two-sided growth envelope on every sample. Margins within
/// `1e-12` of relative rounding count as satisfied.
pub fn envelope_check<T: Real>(spec: &NonlinearitySpec<T>, samples: &[Sample<T>]) -> Result<EnvelopeReport> {
    let e = &spec.exponents;
    let mut out = EnvelopeReport {
        samples: samples.len(),
        lower_margin: f64::INFINITY,
        lower_worst: 0,
        upper_margin: f64::INFINITY,
        upper_worst: 0,
        pass: true,
    };
    for (k, s) in samples.iter().enumerate() {
        let v = spec.eval(s.x, s.s1, s.s2, s.grad1, s.grad2)?;
        let lo = e.lower(s.s1, s.s2);
        let hi = e.upper(s.s1, s.s2, norm(s.grad1), norm(s.grad2));
        let lm = (v - lo).as_f64();
        let um = (hi - v).as_f64();
        let slack = 1e-12 * v.abs().as_f64().max(1.0);
        if lm < out.lower_margin {
            out.lower_margin = lm;
            out.lower_worst = k;
        }
        if um < out.upper_margin {
            out.upper_margin = um;
            out.upper_worst = k;
        }
        if lm < -slack || um < -slack || !v.is_finite() || !(v > T::zero()) {
            out.pass = false;
        }
    }
    Ok(out)
}
