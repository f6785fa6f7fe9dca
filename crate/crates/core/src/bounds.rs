//! Closed-form stability, optimization and excess-generalization bounds for
//! decentralized SGD, evaluated exactly as stated (indicator functions and
//! summation ranges included).
//!
//! Every bound returns a [`BoundValue`] carrying its additive terms, so a
//! composite bound is literally the sum of its stability and optimization
//! parts. Preconditions that fail do not suppress the value; they clear
//! `applicable` and add a warning. A schedule that does not match the
//! requested step-size form yields no value.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::StepSchedule;

/// `λ` at or above this is reported as near-singular.
pub const NEAR_SINGULAR: f64 = 1.0 - 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("lambda must lie in [0, 1), got {0}")]
    Lambda(f64),
    #[error("invalid bound input: {0}")]
    Input(String),
}

/// Step-size form of a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Any schedule; the bound sums the actual step sizes.
    General,
    ConstantAlpha,
    /// `α_t = 1/(t+1)`.
    InverseT,
    /// `α_t = 1/(ν(t+1))`.
    InverseNuT,
    /// `α_t = 1/(2ν(t+1))`.
    InverseTwoNuT,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::General => "general",
            Variant::ConstantAlpha => "constant-alpha",
            Variant::InverseT => "inverse-t",
            Variant::InverseNuT => "inverse-nu-t",
            Variant::InverseTwoNuT => "inverse-two-nu-t",
        }
    }

    /// The closed form matching a schedule.
    pub fn for_schedule(s: &StepSchedule) -> Variant {
        match s {
            StepSchedule::Constant { .. } => Variant::ConstantAlpha,
            StepSchedule::InverseT { .. } => Variant::InverseT,
            StepSchedule::InverseNuT { .. } => Variant::InverseNuT,
            StepSchedule::InverseTwoNuT { .. } => Variant::InverseTwoNuT,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub b: f64,
    pub l: f64,
    #[serde(default)]
    pub nu: f64,
    pub lambda: f64,
    pub m: usize,
    /// Samples per node.
    pub n: usize,
    /// Iteration count `T`.
    pub steps: usize,
    /// Radius of the feasible ball.
    pub r: f64,
    pub schedule: StepSchedule,
    /// Step constant for the nonconvex bound; defaults to the `InverseT` constant.
    #[serde(default)]
    pub c: Option<f64>,
    /// `‖x¹ − x*‖`; defaults to the ball diameter `2r`.
    #[serde(default)]
    pub x0_dist: Option<f64>,
    #[serde(default = "default_true")]
    pub convex: bool,
    /// `false` when `b`, `l` are sampled estimates.
    #[serde(default = "default_true")]
    pub certified: bool,
    /// Known `sup f(x; ξ)` over the ball, if any.
    #[serde(default)]
    pub loss_sup: Option<f64>,
}

fn default_true() -> bool {
    true
}

impl BoundInputs {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        b: f64,
        l: f64,
        nu: f64,
        lambda: f64,
        m: usize,
        n: usize,
        steps: usize,
        r: f64,
        schedule: StepSchedule,
    ) -> Self {
        BoundInputs {
            b,
            l,
            nu,
            lambda,
            m,
            n,
            steps,
            r,
            schedule,
            c: None,
            x0_dist: None,
            convex: true,
            certified: true,
            loss_sup: None,
        }
    }

    pub fn validate(&self) -> Result<(), BoundError> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(BoundError::Lambda(self.lambda));
        }
        let nonneg = [("b", self.b), ("l", self.l), ("nu", self.nu)];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(BoundError::Input(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(BoundError::Input(format!(
                "r must be positive, got {}",
                self.r
            )));
        }
        if self.m == 0 || self.n == 0 {
            return Err(BoundError::Input("m and n must be positive".into()));
        }
        if self.steps < 2 {
            return Err(BoundError::Input(format!(
                "T must be at least 2, got {}",
                self.steps
            )));
        }
        if let Some(c) = self.c {
            if !(c.is_finite() && c > 0.0) {
                return Err(BoundError::Input(format!("c must be positive, got {c}")));
            }
        }
        self.schedule
            .validate()
            .map_err(|e| BoundError::Input(e.to_string()))
    }

    fn mn(&self) -> f64 {
        (self.m * self.n) as f64
    }

    fn x0_dist(&self) -> f64 {
        self.x0_dist.unwrap_or(2.0 * self.r)
    }

    fn constant_alpha(&self) -> Option<f64> {
        match self.schedule {
            StepSchedule::Constant { alpha } => Some(alpha),
            _ => None,
        }
    }

    fn step_constant(&self) -> Option<f64> {
        self.c.or(match self.schedule {
            StepSchedule::InverseT { c } => Some(c),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundValue {
    pub bound_name: String,
    pub variant: Variant,
    pub value: Option<f64>,
    /// Additive pieces; they sum to `value`.
    pub terms: BTreeMap<String, f64>,
    /// Auxiliary quantities (exponents, `M(T)`, `C_λ`, ...), not summed.
    pub quantities: BTreeMap<String, f64>,
    pub applicable: bool,
    pub heuristic: bool,
    pub warnings: Vec<String>,
}

impl BoundValue {
    fn new(name: &str, variant: Variant, inp: &BoundInputs) -> Self {
        let mut v = BoundValue {
            bound_name: name.to_string(),
            variant,
            value: None,
            terms: BTreeMap::new(),
            quantities: BTreeMap::new(),
            applicable: true,
            heuristic: !inp.certified,
            warnings: Vec::new(),
        };
        if v.heuristic {
            v.warnings
                .push("constants are sampled estimates; bound is heuristic".into());
        }
        v
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.applicable = false;
        self.warnings.push(msg.into());
    }

    fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    fn term(&mut self, name: &str, value: f64) {
        self.terms.insert(name.to_string(), value);
    }

    fn quantity(&mut self, name: &str, value: f64) {
        self.quantities.insert(name.to_string(), value);
    }

    /// Sets `value` to the sum of `parts` in the given order.
    fn finish(mut self, parts: &[(&str, f64)]) -> Self {
        let mut total = 0.0;
        for &(name, v) in parts {
            self.term(name, v);
            total += v;
        }
        self.value = Some(total);
        self
    }

    fn mismatch(mut self, inp: &BoundInputs) -> Self {
        self.fail(format!(
            "schedule {} does not match the {} form",
            inp.schedule, self.variant
        ));
        self
    }

    fn check_lambda(&mut self, lambda: f64) {
        if lambda >= NEAR_SINGULAR {
            self.warn(format!("lambda = {lambda} is near-singular"));
        }
    }
}

fn ind(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

/// `C_λ`, with `C_0 = 0`.
pub fn c_lambda(lambda: f64) -> Result<f64, BoundError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(BoundError::Lambda(lambda));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let ln_inv = (1.0 / lambda).ln();
    Ok(ln_inv * lambda.powf(ln_inv) / lambda
        + ln_inv * ln_inv / (16.0 * lambda) * lambda.powf(ln_inv / 8.0)
        + 2.0 / (lambda * ln_inv))
}

/// `s_t = Σ_{j=0}^{t-1} α_j λ^{t-1-j}` for `t = 0..T-1` (`s_0 = 0`), via
/// `s_t = λ s_{t-1} + α_{t-1}`.
pub fn geometric_sums(schedule: &StepSchedule, lambda: f64, steps: usize) -> Vec<f64> {
    let mut s = Vec::with_capacity(steps.max(1));
    s.push(0.0);
    for t in 1..steps {
        let prev = s[t - 1];
        s.push(lambda * prev + schedule.alpha(t - 1));
    }
    s
}

/// `M(T) = max_{1≤t≤T-1} s_t`; zero when `T < 2`.
pub fn m_of_t(schedule: &StepSchedule, lambda: f64, steps: usize) -> f64 {
    geometric_sums(schedule, lambda, steps)
        .into_iter()
        .skip(1)
        .fold(0.0, f64::max)
}

/// `D_λ = B²/(2ν²) + λ²B²C_λ²/(2ν²m) + 2LrBC_λ/ν²`.
pub fn d_lambda(b: f64, l: f64, nu: f64, lambda: f64, m: usize, r: f64) -> Result<f64, BoundError> {
    let c = c_lambda(lambda)?;
    let nu2 = nu * nu;
    Ok(b * b / (2.0 * nu2)
        + lambda * lambda * b * b * c * c / (2.0 * nu2 * m as f64)
        + 2.0 * l * r * b * c / nu2)
}

fn step_sums(inp: &BoundInputs) -> (f64, f64) {
    let (mut s1, mut s2) = (0.0, 0.0);
    for t in 1..inp.steps {
        let a = inp.schedule.alpha(t);
        s1 += a;
        s2 += a * a;
    }
    (s1, s2)
}

fn require_convex(v: &mut BoundValue, inp: &BoundInputs) {
    if !inp.convex {
        v.fail("requires convex losses");
    }
}

fn require_max_step(v: &mut BoundValue, inp: &BoundInputs, limit: f64, label: &str) {
    let a0 = inp.schedule.alpha(0);
    if a0 > limit {
        v.fail(format!("step size {a0} exceeds {label} = {limit}"));
    }
}

fn require_strong(v: &mut BoundValue, inp: &BoundInputs) -> bool {
    if inp.nu > 0.0 {
        true
    } else {
        v.fail("requires nu > 0");
        false
    }
}

fn require_schedule_nu(v: &mut BoundValue, inp: &BoundInputs, nu: f64) {
    if nu != inp.nu {
        v.warn(format!(
            "schedule nu {nu} differs from modulus nu {}",
            inp.nu
        ));
    }
}

/// Last-iterate stability for convex losses under any schedule.
pub fn thm1_stability(inp: &BoundInputs) -> BoundValue {
    let mut v = BoundValue::new("thm1_stability", Variant::General, inp);
    require_convex(&mut v, inp);
    require_max_step(&mut v, inp, 2.0 / inp.l, "2/L");
    let b2 = inp.b * inp.b;
    let s = geometric_sums(&inp.schedule, inp.lambda, inp.steps);
    let mut alpha_sum = 0.0;
    let mut drift = 0.0;
    for (t, st) in s.iter().enumerate().skip(1) {
        let a = inp.schedule.alpha(t);
        alpha_sum += a;
        drift += (1.0 + a * inp.b) * st;
    }
    // the decentralization summand is absent for the uniform matrix
    let gate = ind(inp.lambda != 0.0);
    v.finish(&[
        ("generalization", 2.0 * b2 * alpha_sum / inp.mn()),
        ("decentralization", 4.0 * b2 * drift * gate),
    ])
}

/// Stability of the weighted average iterate, constant or `1/(t+1)` steps.
pub fn prop1_ave_stability(inp: &BoundInputs, variant: Variant) -> BoundValue {
    let mut v = BoundValue::new("prop1_ave_stability", variant, inp);
    require_convex(&mut v, inp);
    v.check_lambda(inp.lambda);
    let b2 = inp.b * inp.b;
    let t = inp.steps as f64;
    let not_one = ind(inp.lambda != 1.0);
    match variant {
        Variant::ConstantAlpha => {
            let Some(a) = inp.constant_alpha() else {
                return v.mismatch(inp);
            };
            require_max_step(&mut v, inp, 2.0 / inp.l, "2/L");
            v.finish(&[
                ("generalization", 2.0 * b2 * a * (t - 1.0) / inp.mn()),
                (
                    "decentralization",
                    4.0 * a * b2 * (1.0 + a * inp.b) * (t - 1.0) / (1.0 - inp.lambda) * not_one,
                ),
            ])
        }
        Variant::InverseT => {
            let StepSchedule::InverseT { c } = inp.schedule else {
                return v.mismatch(inp);
            };
            if c != 1.0 {
                v.fail(format!("closed form assumes c = 1, schedule has c = {c}"));
            }
            require_max_step(&mut v, inp, 2.0 / inp.l, "2/L");
            v.finish(&[
                ("generalization", b2 * t.ln() / inp.mn()),
                (
                    "decentralization",
                    4.0 * b2 * (1.0 + inp.b) / (t + 1.0).ln() * not_one,
                ),
            ])
        }
        _ => v.mismatch(inp),
    }
}

/// Strongly convex stability; independent of `T`.
pub fn thm2_stability(inp: &BoundInputs, variant: Variant) -> BoundValue {
    let mut v = BoundValue::new("thm2_stability", variant, inp);
    v.check_lambda(inp.lambda);
    let b2 = inp.b * inp.b;
    let nu = inp.nu;
    let gate = ind(inp.lambda != 0.0) / (1.0 - inp.lambda);
    match variant {
        Variant::ConstantAlpha => {
            let Some(a) = inp.constant_alpha() else {
                return v.mismatch(inp);
            };
            if !require_strong(&mut v, inp) {
                return v;
            }
            require_max_step(&mut v, inp, 1.0 / inp.l, "1/L");
            v.finish(&[
                ("generalization", 2.0 * b2 / (inp.mn() * nu)),
                ("decentralization", 4.0 * (1.0 + a * inp.b) * b2 / nu * gate),
            ])
        }
        Variant::InverseNuT => {
            let StepSchedule::InverseNuT { nu: snu } = inp.schedule else {
                return v.mismatch(inp);
            };
            if !require_strong(&mut v, inp) {
                return v;
            }
            require_schedule_nu(&mut v, inp, snu);
            v.finish(&[
                ("generalization", 2.0 * b2 / (inp.mn() * nu)),
                (
                    "decentralization",
                    4.0 * (1.0 + inp.b / nu) * (b2 / nu) * gate,
                ),
            ])
        }
        _ => v.mismatch(inp),
    }
}

/// Nonconvex stability for steps `α_t ≤ c/(t+1)` and losses bounded by 1.
pub fn thm3_stability(inp: &BoundInputs) -> BoundValue {
    let mut v = BoundValue::new("thm3_stability", Variant::General, inp);
    let Some(c) = inp.step_constant() else {
        v.fail("needs a step constant c (set `c` or use an inverse-t schedule)");
        return v;
    };
    let cl = c * inp.l;
    let p = 1.0 / (1.0 + cl);
    let q = cl / (1.0 + cl);
    let t = inp.steps as f64;
    let cp = c.powf(p);
    let tq = t.powf(q);
    let t0 = cp * tq;
    v.quantity("exponent", q);
    v.quantity("t0", t0);
    if let Some(bad) =
        (0..inp.steps).find(|&k| inp.schedule.alpha(k) > c / (k + 1) as f64 * (1.0 + 1e-12))
    {
        v.fail(format!("step size at t={bad} exceeds c/(t+1) with c = {c}"));
    }
    if t0 > inp.n as f64 {
        v.fail(format!("c too large: t0 = {t0} exceeds n = {}", inp.n));
    }
    match inp.loss_sup {
        Some(s) if s > 1.0 => v.fail(format!("losses must be bounded by 1, sup is {s}")),
        None => v.warn("assumes sup f <= 1 over the ball; not verified"),
        _ => {}
    }
    let cl_const = match c_lambda(inp.lambda) {
        Ok(x) => x,
        Err(e) => {
            v.fail(e.to_string());
            return v;
        }
    };
    v.quantity("c_lambda", cl_const);
    let b2 = inp.b * inp.b;
    v.finish(&[
        ("data", t0 / inp.mn()),
        ("generalization", cp * 2.0 * b2 * cl / inp.mn() * tq),
        (
            "decentralization",
            cp * 4.0 * (1.0 + c * inp.b) * b2 * inp.l * cl_const * tq,
        ),
    ])
}

/// Optimization error of the average iterate, convex losses, any schedule.
pub fn lemma3_opt_error(inp: &BoundInputs) -> BoundValue {
    let mut v = BoundValue::new("lemma3_opt_error", Variant::General, inp);
    require_convex(&mut v, inp);
    let (s1, s2) = step_sums(inp);
    let mt = m_of_t(&inp.schedule, inp.lambda, inp.steps);
    v.quantity("m_of_t", mt);
    let d = inp.x0_dist();
    let b = inp.b;
    v.finish(&[
        ("initial", d * d / s1),
        ("variance", 2.0 * b * b * s2 / (inp.m as f64 * s1)),
        ("consensus_drift", 8.0 * inp.l * inp.r * b * mt),
        (
            "consensus_sq",
            2.0 * inp.lambda * inp.lambda * b * b * mt * mt,
        ),
    ])
}

fn lemma4_terms(
    v: &mut BoundValue,
    inp: &BoundInputs,
    variant: Variant,
    d: f64,
) -> Option<Vec<(&'static str, f64)>> {
    let b = inp.b;
    let nu = inp.nu;
    let lam = inp.lambda;
    let t = inp.steps as f64;
    match variant {
        Variant::ConstantAlpha => {
            let a = inp.constant_alpha()?;
            if 2.0 * a * nu >= 1.0 {
                v.fail(format!(
                    "contraction needs 2*alpha*nu < 1, got {}",
                    2.0 * a * nu
                ));
            }
            let gate = ind(lam != 0.0);
            Some(vec![
                ("initial", (1.0 - 2.0 * a * nu).powf(t - 1.0) * d * d),
                (
                    "consensus_drift",
                    4.0 * a * inp.l * inp.r * b / ((1.0 - lam) * nu) * gate,
                ),
                (
                    "consensus_sq",
                    lam * lam * b * b * a / (inp.m as f64 * (1.0 - lam).powi(2) * nu) * gate,
                ),
            ])
        }
        Variant::InverseTwoNuT | Variant::InverseNuT => {
            let dl = d_lambda(b, inp.l, nu, lam, inp.m, inp.r).ok()?;
            v.quantity("d_lambda", dl);
            Some(vec![
                ("initial", d * d / (t - 1.0)),
                ("variance", dl * t.ln() / (t - 1.0)),
            ])
        }
        _ => None,
    }
}

/// `E‖x^T − x*‖²` for strongly convex losses.
pub fn lemma4_opt_error(inp: &BoundInputs, variant: Variant) -> BoundValue {
    let mut v = BoundValue::new("lemma4_opt_error", variant, inp);
    v.check_lambda(inp.lambda);
    let matches = match variant {
        Variant::ConstantAlpha => inp.constant_alpha().is_some(),
        Variant::InverseTwoNuT => matches!(inp.schedule, StepSchedule::InverseTwoNuT { .. }),
        _ => false,
    };
    if !matches {
        return v.mismatch(inp);
    }
    if !require_strong(&mut v, inp) {
        return v;
    }
    if let StepSchedule::InverseTwoNuT { nu } = inp.schedule {
        require_schedule_nu(&mut v, inp, nu);
    }
    let d = inp.x0_dist();
    match lemma4_terms(&mut v, inp, variant, d) {
        Some(parts) => v.finish(&parts),
        None => v.mismatch(inp),
    }
}

/// Convex excess generalization of the average iterate.
pub fn thm4_excess_gen(inp: &BoundInputs, variant: Variant) -> BoundValue {
    let stab = prop1_ave_stability(inp, variant);
    let mut v = BoundValue::new("thm4_excess_gen", variant, inp);
    inherit(&mut v, &stab);
    let Some(stab_value) = stab.value else {
        v.applicable = false;
        return v;
    };
    let b = inp.b;
    let (l, r, lam, m) = (inp.l, inp.r, inp.lambda, inp.m as f64);
    let t = inp.steps as f64;
    let not_one = ind(lam != 1.0);
    let parts = match variant {
        Variant::ConstantAlpha => {
            let a = inp.constant_alpha().expect("checked by prop1");
            vec![
                ("stability", stab_value),
                ("initial", 4.0 * r * r / ((t - 1.0) * a)),
                ("variance", 2.0 * b * b * a / m),
                (
                    "consensus_drift",
                    8.0 * l * r * b * a / (1.0 - lam) * not_one,
                ),
                (
                    "consensus_sq",
                    2.0 * lam * lam * b * b * a * a / (1.0 - lam).powi(2),
                ),
            ]
        }
        _ => {
            let cl = c_lambda(lam).expect("lambda validated");
            v.quantity("c_lambda", cl);
            let lt = (t + 1.0).ln();
            vec![
                ("stability", stab_value),
                ("consensus_sq", 2.0 * lam * lam * b * b * cl * cl),
                ("initial", 4.0 * r * r / lt),
                ("variance", 4.0 * b * b / (m * lt)),
                ("consensus_drift", 8.0 * l * r * b * cl * not_one),
            ]
        }
    };
    v.finish(&parts)
}

/// Strongly convex excess generalization of the last iterate.
pub fn thm5_excess_gen(inp: &BoundInputs, variant: Variant) -> BoundValue {
    let stab = thm2_stability(inp, variant);
    let mut v = BoundValue::new("thm5_excess_gen", variant, inp);
    inherit(&mut v, &stab);
    let Some(stab_value) = stab.value else {
        v.applicable = false;
        return v;
    };
    // optimization part with ‖x¹ − x*‖ replaced by the diameter 2r
    let opt_variant = match variant {
        Variant::InverseNuT => Variant::InverseTwoNuT,
        other => other,
    };
    let mut scratch = BoundValue::new("lemma4_opt_error", opt_variant, inp);
    let parts = lemma4_terms(&mut scratch, inp, opt_variant, 2.0 * inp.r).unwrap_or_default();
    // the contraction condition is not a hypothesis here, so it only warns
    scratch.applicable = true;
    inherit(&mut v, &scratch);
    v.quantities.extend(scratch.quantities);
    let inner: f64 = parts.iter().map(|(_, x)| x).sum();
    v.quantity("optimization_inner", inner);
    if inner < 0.0 {
        // (1 - 2αν)^{T-1} < 0 can make the radicand negative
        v.fail(format!("optimization radicand {inner} is negative"));
        return v;
    }
    v.finish(&[
        ("stability", stab_value),
        ("optimization", inp.b * inner.sqrt()),
    ])
}

fn inherit(v: &mut BoundValue, from: &BoundValue) {
    if !from.applicable {
        v.applicable = false;
    }
    for w in &from.warnings {
        if !v.warnings.contains(w) {
            v.warnings.push(w.clone());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub c_lambda: f64,
    pub m_of_t: f64,
    pub bounds: Vec<BoundValue>,
}

impl BoundReport {
    pub fn get(&self, name: &str) -> Option<&BoundValue> {
        self.bounds.iter().find(|b| b.bound_name == name)
    }
}

/// Every bound, each in the step-size form selected by the schedule.
pub fn bound_report(inp: &BoundInputs) -> Result<BoundReport, BoundError> {
    inp.validate()?;
    let variant = Variant::for_schedule(&inp.schedule);
    let lemma4_variant = match variant {
        Variant::InverseNuT => Variant::InverseTwoNuT,
        v => v,
    };
    Ok(BoundReport {
        inputs: inp.clone(),
        c_lambda: c_lambda(inp.lambda)?,
        m_of_t: m_of_t(&inp.schedule, inp.lambda, inp.steps),
        bounds: vec![
            thm1_stability(inp),
            prop1_ave_stability(inp, variant),
            thm2_stability(inp, variant),
            thm3_stability(inp),
            lemma3_opt_error(inp),
            lemma4_opt_error(inp, lemma4_variant),
            thm4_excess_gen(inp, variant),
            thm5_excess_gen(inp, variant),
        ],
    })
}

/// Reports for `λ ∈ {0, 0.1, …, 0.9}` with all other inputs fixed.
pub fn lambda_grid(inp: &BoundInputs) -> Result<Vec<BoundReport>, BoundError> {
    (0..10)
        .map(|k| {
            let mut i = inp.clone();
            i.lambda = k as f64 / 10.0;
            bound_report(&i)
        })
        .collect()
}

/// Whether `Σ_{j<t} λ^{t-1-j}/(j+1) ≤ C_λ/t` for all `t ≤ t_max`. Returns the
/// first violating `t` and its slack `C_λ/t − sum` when one exists.
pub fn c_lambda_violation(lambda: f64, t_max: usize) -> Result<Option<(usize, f64)>, BoundError> {
    let c = c_lambda(lambda)?;
    let mut s = 0.0;
    for t in 1..=t_max {
        // s_t = λ s_{t-1} + 1/t
        s = lambda * s + 1.0 / t as f64;
        let slack = c / t as f64 - s;
        if slack < 0.0 {
            return Ok(Some((t, slack)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    fn base(schedule: StepSchedule) -> BoundInputs {
        BoundInputs::new(1.0, 1.0, 0.1, 0.5, 10, 10, 4, 1.0, schedule)
    }

    #[test]
    fn c_lambda_values() {
        assert_eq!(c_lambda(0.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let expected = 1.0 + e / 16.0 * (-0.125f64).exp() + 2.0 * e;
        assert!(close(c_lambda(1.0 / e).unwrap(), expected, 1e-14));
        assert!(close(expected, 6.5865, 1e-4));
        assert!(c_lambda(1.0).is_err());
        assert!(c_lambda(-0.1).is_err());
    }

    #[test]
    fn c_lambda_inequality_fails_near_one() {
        for k in 1..=18 {
            let lam = 0.05 * k as f64;
            assert_eq!(
                c_lambda_violation(lam, 10_000).unwrap(),
                None,
                "lambda={lam}"
            );
        }
        let (t, slack) = c_lambda_violation(0.95, 10_000).unwrap().unwrap();
        assert_eq!(t, 29);
        assert!(slack < 0.0);
    }

    #[test]
    fn m_of_t_examples() {
        let s = StepSchedule::Constant { alpha: 0.1 };
        assert!(close(m_of_t(&s, 0.5, 4), 0.175, 1e-15));
        let s = StepSchedule::InverseT { c: 1.0 };
        assert_eq!(m_of_t(&s, 0.0, 10), 1.0);
        for lam in [0.1, 0.5, 0.9] {
            assert!(m_of_t(&s, lam, 1000) <= c_lambda(lam).unwrap());
        }
    }

    #[test]
    fn thm1_examples() {
        let mut inp = base(StepSchedule::Constant { alpha: 0.1 });
        inp.n = 10;
        let v = thm1_stability(&inp);
        assert!(close(v.value.unwrap(), 0.006 + 1.87, 1e-14));
        assert!(close(v.terms["generalization"], 0.006, 1e-14));
        inp.lambda = 0.0;
        let v = thm1_stability(&inp);
        assert!(close(v.value.unwrap(), 2.0 * 0.1 * 3.0 / 100.0, 1e-15));
        inp.b = 0.0;
        assert_eq!(thm1_stability(&inp).value, Some(0.0));
        inp.l = 100.0;
        assert!(!thm1_stability(&inp).applicable);
    }

    #[test]
    fn thm2_examples() {
        let mut inp = BoundInputs::new(
            1.0,
            1.0,
            0.1,
            0.0,
            10,
            100,
            50,
            1.0,
            StepSchedule::Constant { alpha: 0.5 },
        );
        let v = thm2_stability(&inp, Variant::ConstantAlpha);
        assert!(close(v.value.unwrap(), 0.02, 1e-15));
        let a = v.value;
        inp.steps = 5000;
        assert_eq!(thm2_stability(&inp, Variant::ConstantAlpha).value, a);
        inp.nu = 0.0;
        let v = thm2_stability(&inp, Variant::ConstantAlpha);
        assert!(!v.applicable && v.value.is_none());
        inp.nu = 0.1;
        assert!(thm2_stability(&inp, Variant::InverseNuT).value.is_none());
        inp.lambda = 1.0 - 1e-7;
        assert!(thm2_stability(&inp, Variant::ConstantAlpha)
            .warnings
            .iter()
            .any(|w| w.contains("near-singular")));
    }

    #[test]
    fn prop1_indicators_verbatim() {
        let mut inp = base(StepSchedule::Constant { alpha: 0.1 });
        inp.lambda = 0.0;
        let v = prop1_ave_stability(&inp, Variant::ConstantAlpha);
        assert!(v.terms["decentralization"] > 0.0);
        let mut inv = base(StepSchedule::InverseT { c: 1.0 });
        inv.m = 1000;
        inv.n = 1_000_000;
        inv.steps = 100;
        let v = prop1_ave_stability(&inv, Variant::InverseT);
        let limit = 4.0 * 2.0 / 101f64.ln();
        assert!(close(v.value.unwrap(), limit, 1e-7));
        inv.schedule = StepSchedule::InverseT { c: 0.5 };
        assert!(!prop1_ave_stability(&inv, Variant::InverseT).applicable);
    }

    #[test]
    fn lemma3_lambda_zero_constant() {
        let mut inp = base(StepSchedule::Constant { alpha: 0.1 });
        inp.lambda = 0.0;
        inp.steps = 50;
        inp.x0_dist = Some(0.7);
        let v = lemma3_opt_error(&inp);
        let expected = 0.49 / (0.1 * 49.0) + 2.0 * 0.1 / 10.0 + 8.0 * 0.1;
        assert!(close(v.value.unwrap(), expected, 1e-14));
        inp.b = 0.0;
        inp.x0_dist = Some(0.0);
        assert_eq!(lemma3_opt_error(&inp).value, Some(0.0));
    }

    #[test]
    fn lemma4_examples() {
        assert!(close(
            d_lambda(1.0, 1.0, 0.1, 0.0, 10, 1.0).unwrap(),
            50.0,
            1e-15
        ));
        let mut inp = base(StepSchedule::InverseTwoNuT { nu: 0.1 });
        inp.steps = 1_000_000_000;
        assert!(
            lemma4_opt_error(&inp, Variant::InverseTwoNuT)
                .value
                .unwrap()
                < 1e-3
        );
        let mut c = base(StepSchedule::Constant { alpha: 6.0 });
        c.lambda = 0.0;
        assert!(!lemma4_opt_error(&c, Variant::ConstantAlpha).applicable);
        c.schedule = StepSchedule::Constant { alpha: 1.0 };
        assert!(lemma4_opt_error(&c, Variant::ConstantAlpha).applicable);
    }

    #[test]
    fn frozen_plug_in_values() {
        assert!(close(
            d_lambda(1.0, 1.0, 0.1, 0.5, 10, 1.0).unwrap(),
            1_442.810_294_898_648,
            1e-13
        ));
        let mut t3 = BoundInputs::new(
            1.0,
            1.0,
            0.0,
            0.5,
            10,
            100,
            10_000,
            1.0,
            StepSchedule::InverseT { c: 0.01 },
        );
        t3.convex = false;
        let v = thm3_stability(&t3).value.unwrap();
        assert!(close(v, 0.309_663_315_917_392_6, 1e-12), "{v}");
        let t4 = BoundInputs::new(
            1.0,
            1.0,
            0.0,
            0.5,
            10,
            100,
            1000,
            1.0,
            StepSchedule::Constant { alpha: 0.01 },
        );
        let v = thm4_excess_gen(&t4, Variant::ConstantAlpha).value.unwrap();
        assert!(close(v, 81.301_780_400_400_4, 1e-13), "{v}");
    }

    #[test]
    fn thm3_limits() {
        let mut inp = BoundInputs::new(
            1.0,
            1.0,
            0.0,
            0.0,
            10,
            100_000_000_000,
            10_000,
            1.0,
            StepSchedule::InverseT { c: 0.01 },
        );
        let v = thm3_stability(&inp);
        assert!(v.value.unwrap() < 1e-10);
        inp.lambda = 0.5;
        inp.n = 100;
        let v = thm3_stability(&inp);
        let q = 0.01 / 1.01;
        assert!(close(v.quantities["exponent"], q, 1e-15));
        assert!(v.applicable);
        inp.schedule = StepSchedule::InverseT { c: 1e-9 };
        inp.c = None;
        assert!(thm3_stability(&inp).quantities["exponent"] < 1e-8);
    }

    #[test]
    fn composite_bounds_decompose() {
        for sched in [
            StepSchedule::Constant { alpha: 0.01 },
            StepSchedule::InverseT { c: 1.0 },
        ] {
            let inp = BoundInputs::new(1.0, 1.0, 0.0, 0.5, 10, 100, 1000, 1.0, sched);
            let variant = Variant::for_schedule(&sched);
            let t4 = thm4_excess_gen(&inp, variant);
            let p1 = prop1_ave_stability(&inp, variant);
            let opt: f64 = t4
                .terms
                .iter()
                .filter(|(k, _)| *k != "stability")
                .map(|(_, v)| v)
                .sum();
            assert!(close(t4.value.unwrap(), p1.value.unwrap() + opt, 1e-12));
        }
        for sched in [
            StepSchedule::Constant { alpha: 0.5 },
            StepSchedule::InverseNuT { nu: 0.1 },
        ] {
            let inp = BoundInputs::new(1.0, 1.0, 0.1, 0.5, 10, 100, 1000, 1.0, sched);
            let variant = Variant::for_schedule(&sched);
            let t5 = thm5_excess_gen(&inp, variant);
            let t2 = thm2_stability(&inp, variant);
            assert!(close(t5.terms["stability"], t2.value.unwrap(), 1e-15));
        }
    }

    #[test]
    fn thm4_zero_gradient_bound() {
        let inp = BoundInputs::new(
            0.0,
            1.0,
            0.0,
            0.5,
            10,
            100,
            1000,
            1.0,
            StepSchedule::Constant { alpha: 0.01 },
        );
        let v = thm4_excess_gen(&inp, Variant::ConstantAlpha);
        assert!(close(v.value.unwrap(), 4.0 / (999.0 * 0.01), 1e-14));
    }

    #[test]
    fn thm5_limit_is_centralized() {
        let inp = BoundInputs::new(
            1.0,
            1.0,
            0.1,
            0.0,
            10,
            100,
            1 << 52,
            1.0,
            StepSchedule::InverseNuT { nu: 0.1 },
        );
        let v = thm5_excess_gen(&inp, Variant::InverseNuT);
        assert!((v.value.unwrap() - 0.02).abs() < 1e-4);
    }

    #[test]
    fn report_and_grid() {
        let inp = BoundInputs::new(
            1.0,
            1.0,
            0.1,
            0.3,
            10,
            100,
            100,
            1.0,
            StepSchedule::Constant { alpha: 0.5 },
        );
        let rep = bound_report(&inp).unwrap();
        assert_eq!(rep.bounds.len(), 8);
        assert!(rep.get("thm2_stability").unwrap().value.is_some());
        let grid = lambda_grid(&inp).unwrap();
        assert_eq!(grid.len(), 10);
        let mut bad = inp.clone();
        bad.lambda = 1.0;
        assert!(bound_report(&bad).is_err());
    }
}
