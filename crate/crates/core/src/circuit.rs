//! Element and circuit data model, constitutive laws and waveforms.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::error::{CircuitError, TopologyError};
use crate::topology;

pub const GROUND: &str = "0";

/// Functional form of a monotone constitutive relation `y = f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Linear { slope: f64 },
    /// `y = Σ c_k x^k`
    Polynomial { coeffs: Vec<f64> },
    /// `y = gain * scale * tanh(x / scale)`: slope `gain` at the origin,
    /// saturating at `±gain * scale`.
    TanhSaturating { gain: f64, scale: f64 },
}

/// Result of evaluating a constitutive relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstitutiveValue {
    pub y: f64,
    pub dy_dx: f64,
    /// `x` fell outside the declared operating range.
    pub extrapolated: bool,
}

/// A constitutive relation together with its declared operating range.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstitutiveSpec {
    family: Family,
    range: (f64, f64),
}

impl ConstitutiveSpec {
    pub const DEFAULT_RANGE: (f64, f64) = (-1.0e3, 1.0e3);

    pub fn new(family: Family, range: (f64, f64)) -> Result<Self, CircuitError> {
        match &family {
            Family::Linear { slope } if !(*slope > 0.0) => {
                return Err(CircuitError::BadConstitutive(format!(
                    "linear slope must be positive, got {slope}"
                )))
            }
            Family::Polynomial { coeffs } if coeffs.is_empty() => {
                return Err(CircuitError::BadConstitutive(
                    "polynomial needs at least one coefficient".to_string(),
                ))
            }
            Family::TanhSaturating { gain, scale } if !(*gain > 0.0 && *scale > 0.0) => {
                return Err(CircuitError::BadConstitutive(format!(
                    "tanh gain and scale must be positive, got {gain}, {scale}"
                )))
            }
            _ => {}
        }
        if !(range.0 < range.1) {
            return Err(CircuitError::BadConstitutive(format!(
                "empty operating range {}:{}",
                range.0, range.1
            )));
        }
        Ok(Self { family, range })
    }

    pub fn linear(slope: f64) -> Result<Self, CircuitError> {
        Self::new(Family::Linear { slope }, Self::DEFAULT_RANGE)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// Slope if the relation is linear.
    pub fn linear_slope(&self) -> Option<f64> {
        match self.family {
            Family::Linear { slope } => Some(slope),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> ConstitutiveValue {
        let (y, dy_dx) = match &self.family {
            Family::Linear { slope } => (slope * x, *slope),
            Family::Polynomial { coeffs } => {
                let mut y = 0.0;
                let mut dy = 0.0;
                for c in coeffs.iter().rev() {
                    dy = dy * x + y;
                    y = y * x + c;
                }
                (y, dy)
            }
            Family::TanhSaturating { gain, scale } => {
                let th = libm::tanh(x / scale);
                (gain * scale * th, gain * (1.0 - th * th))
            }
        };
        ConstitutiveValue {
            y,
            dy_dx,
            extrapolated: x < self.range.0 || x > self.range.1,
        }
    }

    /// `∫_0^x f(s) ds`
    pub fn antiderivative(&self, x: f64) -> f64 {
        match &self.family {
            Family::Linear { slope } => 0.5 * slope * x * x,
            Family::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (k, c) in coeffs.iter().enumerate().rev() {
                    acc = acc * x + c / (k + 1) as f64;
                }
                acc * x
            }
            Family::TanhSaturating { gain, scale } => gain * scale * scale * ln_cosh(x / scale),
        }
    }

    /// Checks monotonicity by sampling the operating range.
    pub fn is_monotone(&self) -> bool {
        const SAMPLES: usize = 257;
        let (lo, hi) = self.range;
        (0..SAMPLES).all(|k| {
            let x = lo + (hi - lo) * k as f64 / (SAMPLES - 1) as f64;
            self.eval(x).dy_dx >= 0.0
        })
    }

    /// Solves `f(x) = y` for monotone `f`, returning `(x, dx/dy)`.
    pub fn invert(&self, y: f64) -> (f64, f64) {
        if let Family::Linear { slope } = self.family {
            return (y / slope, 1.0 / slope);
        }
        // bracket, then safeguarded newton
        let mut lo = -1.0;
        let mut hi = 1.0;
        let mut guard = 0;
        while self.eval(lo).y > y && guard < 200 {
            lo *= 2.0;
            guard += 1;
        }
        while self.eval(hi).y < y && guard < 400 {
            hi *= 2.0;
            guard += 1;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let v = self.eval(x);
            let f = v.y - y;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let mut next = if v.dy_dx > 0.0 { x - f / v.dy_dx } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if libm::fabs(next - x) <= 1e-15 * (1.0 + libm::fabs(x)) {
                x = next;
                break;
            }
            x = next;
        }
        let d = self.eval(x).dy_dx;
        (x, if d > 0.0 { 1.0 / d } else { f64::INFINITY })
    }
}

fn ln_cosh(u: f64) -> f64 {
    let a = libm::fabs(u);
    a + libm::log1p(libm::exp(-2.0 * a)) - core::f64::consts::LN_2
}

/// Constitutive law of a fractional memristor of order 1/2.
#[derive(Debug, Clone, PartialEq)]
pub enum MemristorLaw {
    /// `r = r̂(Ψ)`
    FluxControlled(ConstitutiveSpec),
    /// `Ψ = Ψ̂(r)`
    ChargeControlled(ConstitutiveSpec),
}

impl MemristorLaw {
    /// `r` and `dr/dΨ` at half-flux `psi`.
    pub fn response(&self, psi: f64) -> ConstitutiveValue {
        match self {
            MemristorLaw::FluxControlled(spec) => spec.eval(psi),
            MemristorLaw::ChargeControlled(spec) => {
                let (r, dr) = spec.invert(psi);
                ConstitutiveValue {
                    y: r,
                    dy_dx: dr,
                    extrapolated: r < spec.range.0 || r > spec.range.1,
                }
            }
        }
    }

    /// `∫_0^Ψ r̂(s) ds`; for the charge-controlled form this is the
    /// Legendre dual `Ψ r - ∫_0^r Ψ̂` (assuming `Ψ̂(0) = 0`).
    pub fn content(&self, psi: f64) -> f64 {
        match self {
            MemristorLaw::FluxControlled(spec) => spec.antiderivative(psi),
            MemristorLaw::ChargeControlled(spec) => {
                let (r, _) = spec.invert(psi);
                psi * r - spec.antiderivative(r)
            }
        }
    }

    pub fn spec(&self) -> &ConstitutiveSpec {
        match self {
            MemristorLaw::FluxControlled(s) | MemristorLaw::ChargeControlled(s) => s,
        }
    }
}

/// Time-dependent drive `V_i(t)`, `I(t)` or target `T_k(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    Const(f64),
    /// `value` for `t >= t0`, zero before.
    Step { value: f64, t0: f64 },
    /// `amp * sin(2π freq t + phase)`
    Sine { amp: f64, freq: f64, phase: f64 },
    /// Uniform samples starting at `t_start`, linearly interpolated.
    Samples {
        t_start: f64,
        dt: f64,
        values: Vec<f64>,
    },
}

impl Waveform {
    /// `None` when `t` lies outside a sampled waveform's support.
    pub fn eval(&self, t: f64) -> Option<f64> {
        match self {
            Waveform::Const(v) => Some(*v),
            Waveform::Step { value, t0 } => Some(if t >= *t0 { *value } else { 0.0 }),
            Waveform::Sine { amp, freq, phase } => {
                Some(amp * libm::sin(2.0 * PI * freq * t + phase))
            }
            Waveform::Samples {
                t_start,
                dt,
                values,
            } => {
                if values.is_empty() {
                    return None;
                }
                let pos = (t - t_start) / dt;
                let last = (values.len() - 1) as f64;
                let nearest = libm::round(pos);
                if libm::fabs(pos - nearest) <= 1e-9 && nearest >= 0.0 && nearest <= last {
                    return Some(values[nearest as usize]);
                }
                if pos < 0.0 || pos > last {
                    return None;
                }
                let k = libm::floor(pos) as usize;
                let frac = pos - k as f64;
                Some(values[k] * (1.0 - frac) + values[k + 1] * frac)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Resistor { conductance: f64, trainable: bool },
    /// `q = q̂(v)`
    Capacitor(ConstitutiveSpec),
    /// `i = î(Φ)`
    Inductor(ConstitutiveSpec),
    FracMemristor { law: MemristorLaw, order: f64 },
    VoltageSource(Waveform),
    CurrentSource(Waveform),
    /// Output capacitor of capacitance `βC`; its lower plate is driven by
    /// the target `T_k`. The capacitance scale `C` lives on the circuit.
    OutputCapacitor { target: Option<Waveform> },
}

impl ElementKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ElementKind::Resistor { .. } => "R",
            ElementKind::Capacitor(_) => "C",
            ElementKind::Inductor(_) => "L",
            ElementKind::FracMemristor { .. } => "M",
            ElementKind::VoltageSource(_) => "V",
            ElementKind::CurrentSource(_) => "I",
            ElementKind::OutputCapacitor { .. } => "OC",
        }
    }
}

/// A two-terminal element oriented `n_plus -> n_minus`.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub n_plus: String,
    pub n_minus: String,
    pub kind: ElementKind,
}

impl Element {
    pub fn new(
        name: impl Into<String>,
        n_plus: impl Into<String>,
        n_minus: impl Into<String>,
        kind: ElementKind,
    ) -> Self {
        Self {
            name: name.into(),
            n_plus: n_plus.into(),
            n_minus: n_minus.into(),
            kind,
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(
            self.kind,
            ElementKind::Resistor {
                trainable: true,
                ..
            }
        )
    }

    fn check(&self) -> Result<(), CircuitError> {
        let positive = |what: &'static str, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(CircuitError::NonPositive {
                    name: self.name.clone(),
                    what,
                    value,
                })
            }
        };
        if self.n_plus == self.n_minus {
            return Err(CircuitError::SelfLoop(self.name.clone()));
        }
        match &self.kind {
            ElementKind::Resistor { conductance, .. } => positive("conductance", *conductance),
            ElementKind::Capacitor(spec) => match spec.linear_slope() {
                Some(c) => positive("capacitance", c),
                None => Ok(()),
            },
            ElementKind::Inductor(spec) => match spec.linear_slope() {
                Some(s) => positive("inverse inductance", s),
                None => Ok(()),
            },
            ElementKind::FracMemristor { law, .. } => match law.spec().linear_slope() {
                Some(s) => positive("memristance slope", s),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// Strength `β` of the output nudge and output capacitance scale `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoupling {
    pub beta: f64,
    pub c: f64,
}

impl Default for LossCoupling {
    fn default() -> Self {
        Self { beta: 0.0, c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    elements: Vec<Element>,
    nodes: Vec<String>,
    coupling: LossCoupling,
}

impl Circuit {
    pub fn new(elements: Vec<Element>, coupling: LossCoupling) -> Result<Self, CircuitError> {
        if elements.is_empty() {
            return Err(CircuitError::Empty);
        }
        let mut seen = BTreeSet::new();
        for e in &elements {
            if !seen.insert(e.name.as_str()) {
                return Err(CircuitError::DuplicateName(e.name.clone()));
            }
            e.check()?;
        }
        if !(coupling.c > 0.0) {
            return Err(CircuitError::NonPositive {
                name: String::from("<coupling>"),
                what: "output capacitance scale",
                value: coupling.c,
            });
        }
        if !(coupling.beta >= 0.0) {
            return Err(CircuitError::NonPositive {
                name: String::from("<coupling>"),
                what: "beta",
                value: coupling.beta,
            });
        }
        let mut nodes: Vec<String> = Vec::new();
        let has_ground = elements
            .iter()
            .any(|e| e.n_plus == GROUND || e.n_minus == GROUND);
        if has_ground {
            nodes.push(GROUND.to_string());
        }
        for e in &elements {
            for n in [&e.n_plus, &e.n_minus] {
                if !nodes.contains(n) {
                    nodes.push(n.clone());
                }
            }
        }
        Ok(Self {
            elements,
            nodes,
            coupling,
        })
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Node names; ground (if present) comes first, the rest in order of
    /// first appearance.
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn has_ground(&self) -> bool {
        self.nodes.first().map(|n| n == GROUND).unwrap_or(false)
    }

    pub fn coupling(&self) -> LossCoupling {
        self.coupling
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.name == name)
    }

    /// Indices of trainable resistors in declaration order.
    pub fn trainables(&self) -> Vec<usize> {
        (0..self.elements.len())
            .filter(|&i| self.elements[i].is_trainable())
            .collect()
    }

    pub fn outputs(&self) -> Vec<usize> {
        (0..self.elements.len())
            .filter(|&i| matches!(self.elements[i].kind, ElementKind::OutputCapacitor { .. }))
            .collect()
    }

    pub fn conductance(&self, index: usize) -> Option<f64> {
        match self.elements.get(index)?.kind {
            ElementKind::Resistor { conductance, .. } => Some(conductance),
            _ => None,
        }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        let mut c = self.clone();
        c.coupling.beta = beta;
        c
    }

    pub fn with_conductance(&self, index: usize, g: f64) -> Result<Self, CircuitError> {
        let mut c = self.clone();
        let e = c
            .elements
            .get_mut(index)
            .ok_or_else(|| CircuitError::UnknownElement(format!("#{index}")))?;
        match &mut e.kind {
            ElementKind::Resistor { conductance, .. } => *conductance = g,
            _ => return Err(CircuitError::NotAResistor(e.name.clone())),
        }
        e.check()?;
        Ok(c)
    }

    /// Replaces an element's kind keeping name and terminals.
    pub fn with_kind(&self, index: usize, kind: ElementKind) -> Result<Self, CircuitError> {
        let mut c = self.clone();
        let e = c
            .elements
            .get_mut(index)
            .ok_or_else(|| CircuitError::UnknownElement(format!("#{index}")))?;
        e.kind = kind;
        e.check()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    NoGround,
    Floating(Vec<String>),
    MissingTarget(String),
    NonMonotone(String),
    VoltageLoop(Vec<String>),
    CurrentCutset(Vec<String>),
    /// Nodes reachable from ground only through output capacitors or
    /// current sources; the free phase leaves them undetermined.
    Undetermined(Vec<String>),
    FractionalOrder(String),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoGround => write!(f, "no ground node `0`"),
            Diagnostic::Floating(n) => write!(f, "floating subcircuit: nodes {}", n.join(", ")),
            Diagnostic::MissingTarget(e) => write!(f, "missing target on output `{e}`"),
            Diagnostic::NonMonotone(e) => {
                write!(f, "constitutive law of `{e}` decreases in its operating range")
            }
            Diagnostic::VoltageLoop(e) => write!(f, "voltage sources form a loop: {}", e.join(", ")),
            Diagnostic::CurrentCutset(e) => {
                write!(f, "current sources form a cut-set: {}", e.join(", "))
            }
            Diagnostic::Undetermined(n) => write!(
                f,
                "nodes {} connect to the rest only through outputs or current sources",
                n.join(", ")
            ),
            Diagnostic::FractionalOrder(e) => {
                write!(f, "memristor `{e}` must have order 1/2")
            }
        }
    }
}

/// Problems that keep a circuit from being simulated. Empty means ready.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub diagnostics: Vec<Diagnostic>,
}

impl Report {
    pub fn is_ready(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

pub fn validate(circuit: &Circuit) -> Report {
    let mut diagnostics = Vec::new();
    if !circuit.has_ground() {
        diagnostics.push(Diagnostic::NoGround);
        return Report { diagnostics };
    }
    for e in circuit.elements() {
        match &e.kind {
            ElementKind::OutputCapacitor { target: None } => {
                diagnostics.push(Diagnostic::MissingTarget(e.name.clone()))
            }
            ElementKind::Capacitor(s) | ElementKind::Inductor(s) if !s.is_monotone() => {
                diagnostics.push(Diagnostic::NonMonotone(e.name.clone()))
            }
            ElementKind::FracMemristor { law, order } => {
                if !law.spec().is_monotone() {
                    diagnostics.push(Diagnostic::NonMonotone(e.name.clone()));
                }
                if *order != 0.5 {
                    diagnostics.push(Diagnostic::FractionalOrder(e.name.clone()));
                }
            }
            _ => {}
        }
    }
    let floating = topology::unreachable_nodes(circuit, |_| true);
    if !floating.is_empty() {
        diagnostics.push(Diagnostic::Floating(floating));
        return Report { diagnostics };
    }
    let undetermined = topology::unreachable_nodes(circuit, |k| {
        !matches!(
            k,
            ElementKind::OutputCapacitor { .. } | ElementKind::CurrentSource(_)
        )
    });
    if !undetermined.is_empty() {
        diagnostics.push(Diagnostic::Undetermined(undetermined));
    }
    let graph = topology::build_graph(circuit);
    match topology::select_tree(&graph, circuit) {
        Err(TopologyError::VoltageLoop(v)) => diagnostics.push(Diagnostic::VoltageLoop(v)),
        Err(TopologyError::CurrentCutset(v)) => diagnostics.push(Diagnostic::CurrentCutset(v)),
        Err(TopologyError::Floating(v)) => diagnostics.push(Diagnostic::Floating(v)),
        Err(TopologyError::NoGround) => diagnostics.push(Diagnostic::NoGround),
        Ok(_) => {}
    }
    Report { diagnostics }
}

/// `eval_constitutive(spec, x) -> (y, dy/dx)` with the extrapolation flag.
pub fn eval_constitutive(spec: &ConstitutiveSpec, x: f64) -> ConstitutiveValue {
    spec.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn poly(c: &[f64]) -> ConstitutiveSpec {
        ConstitutiveSpec::new(
            Family::Polynomial {
                coeffs: c.to_vec(),
            },
            ConstitutiveSpec::DEFAULT_RANGE,
        )
        .unwrap()
    }

    fn tanh(gain: f64, scale: f64) -> ConstitutiveSpec {
        ConstitutiveSpec::new(
            Family::TanhSaturating { gain, scale },
            ConstitutiveSpec::DEFAULT_RANGE,
        )
        .unwrap()
    }

    #[test]
    fn constitutive_examples() {
        let v = eval_constitutive(&ConstitutiveSpec::linear(2.0).unwrap(), 3.0);
        assert_eq!((v.y, v.dy_dx), (6.0, 2.0));
        let v = eval_constitutive(&tanh(1.0, 1.0), 0.0);
        assert_eq!((v.y, v.dy_dx), (0.0, 1.0));
        let v = eval_constitutive(&poly(&[0.0, 1.0, 0.0, 0.1]), 2.0);
        assert!((v.y - 2.8).abs() < 1e-12 && (v.dy_dx - 2.2).abs() < 1e-12);
        assert!(!v.extrapolated);
    }

    #[test]
    fn out_of_range_is_flagged() {
        let s = ConstitutiveSpec::new(Family::Linear { slope: 1.0 }, (-1.0, 1.0)).unwrap();
        assert!(s.eval(1.5).extrapolated);
        assert!(!s.eval(0.5).extrapolated);
    }

    #[test]
    fn antiderivatives_match_quadrature() {
        let specs = [poly(&[0.3, 1.0, -0.2, 0.1]), tanh(2.0, 0.7)];
        for s in &specs {
            for &x in &[-1.3, 0.4, 2.0] {
                let n = 4000;
                let h = x / n as f64;
                let mut q = 0.5 * (s.eval(0.0).y + s.eval(x).y);
                for k in 1..n {
                    q += s.eval(k as f64 * h).y;
                }
                q *= h;
                assert!((q - s.antiderivative(x)).abs() < 1e-6, "{s:?} {x}");
            }
        }
    }

    #[test]
    fn inversion_round_trips() {
        let s = tanh(1.0, 2.0);
        for &y in &[-1.9, -0.5, 0.0, 0.3, 1.7] {
            let (x, dx) = s.invert(y);
            assert!((s.eval(x).y - y).abs() < 1e-12);
            assert!((dx * s.eval(x).dy_dx - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn charge_controlled_content_is_legendre_dual() {
        let law = MemristorLaw::ChargeControlled(poly(&[0.0, 2.0, 0.0, 0.5]));
        let psi = 1.3;
        let h = 1e-5;
        let d = (law.content(psi + h) - law.content(psi - h)) / (2.0 * h);
        assert!((d - law.response(psi).y).abs() < 1e-7);
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(ConstitutiveSpec::linear(-1.0).is_err());
        assert!(ConstitutiveSpec::new(Family::Polynomial { coeffs: vec![] }, (-1.0, 1.0)).is_err());
        assert!(ConstitutiveSpec::new(Family::Linear { slope: 1.0 }, (1.0, 1.0)).is_err());
        assert!(!poly(&[0.0, -1.0]).is_monotone());
    }

    #[test]
    fn waveforms() {
        assert_eq!(Waveform::Step { value: 2.0, t0: 1.0 }.eval(0.5), Some(0.0));
        assert_eq!(Waveform::Step { value: 2.0, t0: 1.0 }.eval(1.0), Some(2.0));
        let s = Waveform::Sine {
            amp: 2.0,
            freq: 0.25,
            phase: 0.0,
        };
        assert!((s.eval(1.0).unwrap() - 2.0).abs() < 1e-12);
        let w = Waveform::Samples {
            t_start: 0.0,
            dt: 0.5,
            values: vec![0.0, 1.0, 4.0],
        };
        assert_eq!(w.eval(0.5), Some(1.0));
        assert_eq!(w.eval(0.75), Some(2.5));
        assert_eq!(w.eval(1.5), None);
    }

    fn r(name: &str, a: &str, b: &str) -> Element {
        Element::new(
            name,
            a,
            b,
            ElementKind::Resistor {
                conductance: 1.0,
                trainable: false,
            },
        )
    }

    #[test]
    fn circuit_invariants() {
        assert_eq!(
            Circuit::new(vec![r("a", "1", "0"), r("a", "1", "0")], LossCoupling::default()),
            Err(CircuitError::DuplicateName("a".into()))
        );
        assert!(matches!(
            Circuit::new(vec![r("a", "1", "1")], LossCoupling::default()),
            Err(CircuitError::SelfLoop(_))
        ));
        assert_eq!(
            Circuit::new(vec![], LossCoupling::default()),
            Err(CircuitError::Empty)
        );
        let c = Circuit::new(vec![r("a", "x", "0"), r("b", "x", "y")], LossCoupling::default())
            .unwrap();
        assert_eq!(c.nodes(), &["0", "x", "y"]);
        assert!(c.with_conductance(0, -1.0).is_err());
        assert_eq!(c.with_conductance(0, 0.25).unwrap().conductance(0), Some(0.25));
    }

    #[test]
    fn validate_reports() {
        let floating = Circuit::new(
            vec![r("a", "1", "0"), r("b", "2", "3")],
            LossCoupling::default(),
        )
        .unwrap();
        let rep = validate(&floating);
        assert_eq!(
            rep.diagnostics,
            vec![Diagnostic::Floating(vec!["2".into(), "3".into()])]
        );

        let no_target = Circuit::new(
            vec![
                r("a", "1", "0"),
                Element::new("o", "1", "0", ElementKind::OutputCapacitor { target: None }),
            ],
            LossCoupling::default(),
        )
        .unwrap();
        assert_eq!(
            validate(&no_target).diagnostics,
            vec![Diagnostic::MissingTarget("o".into())]
        );

        let no_ground = Circuit::new(vec![r("a", "1", "2")], LossCoupling::default()).unwrap();
        assert_eq!(validate(&no_ground).diagnostics, vec![Diagnostic::NoGround]);

        let vloop = Circuit::new(
            vec![
                Element::new("v1", "1", "0", ElementKind::VoltageSource(Waveform::Const(1.0))),
                Element::new("v2", "1", "0", ElementKind::VoltageSource(Waveform::Const(2.0))),
            ],
            LossCoupling::default(),
        )
        .unwrap();
        assert!(matches!(
            validate(&vloop).diagnostics[..],
            [Diagnostic::VoltageLoop(_)]
        ));

        let only_output = Circuit::new(
            vec![
                r("a", "1", "0"),
                Element::new(
                    "o",
                    "2",
                    "1",
                    ElementKind::OutputCapacitor {
                        target: Some(Waveform::Const(0.0)),
                    },
                ),
            ],
            LossCoupling::default(),
        )
        .unwrap();
        assert_eq!(
            validate(&only_output).diagnostics,
            vec![Diagnostic::Undetermined(vec!["2".into()])]
        );
    }
}
