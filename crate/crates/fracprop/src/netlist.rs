//! Line-oriented netlist format.
//!
//! ```text
//! # comment
//! .coupling beta=0 c=1
//! V  V1  in  0   w=sine(1,0.5,0)
//! R  G1  in  out g=0.5 trainable
//! C  C1  out 0   c=1
//! C  C2  out 0   q=tanh(1,0.5) range=-5:5
//! L  L1  a   b   l=2
//! M  M1  a   b   r=0.5
//! I  I1  0   a   w=step(1,0.2)
//! OC OUT out 0   w=0.3
//! ```
//!
//! Each element line is `KIND name n+ n- key=value...`. Numbers are plain
//! decimal or exponent notation. Waveforms are `<number>`, `const(v)`,
//! `step(v,t0)`, `sine(amp,freq,phase)` or `samples(t0,dt,v0,v1,...)`.
//! Constitutive families are `lin(s)`, `poly(c0,c1,...)` or
//! `tanh(gain,scale)`.

use std::collections::BTreeSet;
use std::fmt;

use fracprop_core::error::CircuitError;
use fracprop_core::circuit::{
    Circuit, ConstitutiveSpec, Element, ElementKind, Family, LossCoupling, MemristorLaw, Waveform,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Whitespace-separated tokens with their 1-based columns.
pub(crate) fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(s, t)| (line[..s].chars().count() + 1, t))
        .collect()
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse_number(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a finite number")),
    }
}

/// Shortest text that parses back to the same value.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn call(s: &str) -> Result<(&str, Vec<&str>), String> {
    let open = s.find('(').ok_or_else(|| format!("expected `name(args)`, got `{s}`"))?;
    if !s.ends_with(')') {
        return Err(format!("missing `)` in `{s}`"));
    }
    let args = &s[open + 1..s.len() - 1];
    let args = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',').collect()
    };
    Ok((&s[..open], args))
}

fn numbers(args: &[&str]) -> Result<Vec<f64>, String> {
    args.iter().map(|a| parse_number(a)).collect()
}

fn arity(name: &str, got: &[f64], want: usize) -> Result<(), String> {
    if got.len() != want {
        return Err(format!("`{name}` takes {want} arguments, got {}", got.len()));
    }
    Ok(())
}

pub fn parse_waveform(s: &str) -> Result<Waveform, String> {
    if !s.contains('(') {
        return parse_number(s).map(Waveform::Const);
    }
    let (name, args) = call(s)?;
    let a = numbers(&args)?;
    match name {
        "const" => {
            arity(name, &a, 1)?;
            Ok(Waveform::Const(a[0]))
        }
        "step" => {
            arity(name, &a, 2)?;
            Ok(Waveform::Step { value: a[0], t0: a[1] })
        }
        "sine" => {
            arity(name, &a, 3)?;
            Ok(Waveform::Sine {
                amp: a[0],
                freq: a[1],
                phase: a[2],
            })
        }
        "samples" => {
            if a.len() < 4 {
                return Err("`samples` needs t0, dt and at least two values".into());
            }
            if !(a[1] > 0.0) {
                return Err(format!("`samples` step must be positive, got {}", a[1]));
            }
            Ok(Waveform::Samples {
                t_start: a[0],
                dt: a[1],
                values: a[2..].to_vec(),
            })
        }
        _ => Err(format!("unknown waveform `{name}`")),
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| format_number(x)).collect::<Vec<_>>().join(",")
}

pub fn format_waveform(w: &Waveform) -> String {
    match w {
        Waveform::Const(v) => format_number(*v),
        Waveform::Step { value, t0 } => format!("step({})", join(&[*value, *t0])),
        Waveform::Sine { amp, freq, phase } => format!("sine({})", join(&[*amp, *freq, *phase])),
        Waveform::Samples { t_start, dt, values } => {
            let mut all = vec![*t_start, *dt];
            all.extend_from_slice(values);
            format!("samples({})", join(&all))
        }
    }
}

fn parse_family(s: &str) -> Result<Family, String> {
    let (name, args) = call(s)?;
    let a = numbers(&args)?;
    match name {
        "lin" => {
            arity(name, &a, 1)?;
            Ok(Family::Linear { slope: a[0] })
        }
        "poly" => {
            if a.is_empty() {
                return Err("`poly` needs at least one coefficient".into());
            }
            Ok(Family::Polynomial { coeffs: a })
        }
        "tanh" => {
            arity(name, &a, 2)?;
            Ok(Family::TanhSaturating { gain: a[0], scale: a[1] })
        }
        _ => Err(format!("unknown constitutive family `{name}`")),
    }
}

fn format_family(f: &Family) -> String {
    match f {
        Family::Linear { slope } => format!("lin({})", format_number(*slope)),
        Family::Polynomial { coeffs } => format!("poly({})", join(coeffs)),
        Family::TanhSaturating { gain, scale } => format!("tanh({})", join(&[*gain, *scale])),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("range must be `lo:hi`, got `{s}`"))?;
    Ok((parse_number(lo)?, parse_number(hi)?))
}

struct Params<'a> {
    line: usize,
    items: Vec<(usize, &'a str, Option<&'a str>)>,
    used: BTreeSet<usize>,
}

impl<'a> Params<'a> {
    fn new(line: usize, toks: &[(usize, &'a str)]) -> Result<Self, ParseError> {
        let mut items = Vec::new();
        let mut seen = BTreeSet::new();
        for &(col, t) in toks {
            let (k, v) = match t.split_once('=') {
                Some((k, v)) => (k, Some(v)),
                None => (t, None),
            };
            if k.is_empty() || v == Some("") {
                return Err(ParseError::new(line, col, format!("malformed parameter `{t}`")));
            }
            if !seen.insert(k) {
                return Err(ParseError::new(line, col, format!("parameter `{k}` given twice")));
            }
            items.push((col, k, v));
        }
        Ok(Self {
            line,
            items,
            used: BTreeSet::new(),
        })
    }

    fn take(&mut self, key: &str) -> Option<(usize, Option<&'a str>)> {
        let i = self.items.iter().position(|x| x.1 == key)?;
        self.used.insert(i);
        Some((self.items[i].0, self.items[i].2))
    }

    fn value<T>(
        &mut self,
        key: &str,
        f: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ParseError> {
        let line = self.line;
        match self.take(key) {
            None => Ok(None),
            Some((col, None)) => Err(ParseError::new(line, col, format!("`{key}` needs a value"))),
            Some((col, Some(v))) => f(v)
                .map(Some)
                .map_err(|m| ParseError::new(line, col + key.len() + 1, m)),
        }
    }

    fn flag(&mut self, key: &str) -> Result<bool, ParseError> {
        match self.take(key) {
            None => Ok(false),
            Some((_, None)) => Ok(true),
            Some((col, Some(_))) => Err(ParseError::new(self.line, col, format!("`{key}` takes no value"))),
        }
    }

    fn finish(self) -> Result<(), ParseError> {
        for (i, &(col, k, _)) in self.items.iter().enumerate() {
            if !self.used.contains(&i) {
                return Err(ParseError::new(self.line, col, format!("unexpected parameter `{k}`")));
            }
        }
        Ok(())
    }
}

fn spec_from(
    p: &mut Params,
    linear_key: &str,
    family_key: &str,
    invert: bool,
    col: usize,
) -> Result<ConstitutiveSpec, ParseError> {
    let line = p.line;
    let range = p.value("range", parse_range)?.unwrap_or(ConstitutiveSpec::DEFAULT_RANGE);
    let lin = p.value(linear_key, parse_number)?;
    let fam = p.value(family_key, parse_family)?;
    let family = match (lin, fam) {
        (Some(x), None) => {
            if !(x > 0.0) {
                return Err(ParseError::new(line, col, format!("`{linear_key}` must be positive, got {x}")));
            }
            Family::Linear {
                slope: if invert { 1.0 / x } else { x },
            }
        }
        (None, Some(f)) => f,
        (Some(_), Some(_)) => {
            return Err(ParseError::new(
                line,
                col,
                format!("give either `{linear_key}=` or `{family_key}=`, not both"),
            ))
        }
        (None, None) => {
            return Err(ParseError::new(
                line,
                col,
                format!("missing `{linear_key}=` or `{family_key}=`"),
            ))
        }
    };
    ConstitutiveSpec::new(family, range).map_err(|e| ParseError::new(line, col, e.to_string()))
}

pub fn parse_netlist(text: &str) -> Result<Circuit, ParseError> {
    let mut elements = Vec::new();
    let mut lines_of = Vec::new();
    let mut coupling = LossCoupling::default();
    let mut coupling_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks = tokens(strip_comment(raw));
        let Some(&(col, head)) = toks.first() else { continue };
        if head == ".coupling" {
            if coupling_seen {
                return Err(ParseError::new(line, col, "`.coupling` given twice"));
            }
            coupling_seen = true;
            let mut p = Params::new(line, &toks[1..])?;
            if let Some(b) = p.value("beta", parse_number)? {
                coupling.beta = b;
            }
            if let Some(c) = p.value("c", parse_number)? {
                coupling.c = c;
            }
            p.finish()?;
            if !(coupling.beta >= 0.0) {
                return Err(ParseError::new(line, col, "beta must be non-negative"));
            }
            if !(coupling.c > 0.0) {
                return Err(ParseError::new(line, col, "c must be positive"));
            }
            continue;
        }
        if head.starts_with('.') {
            return Err(ParseError::new(line, col, format!("unknown directive `{head}`")));
        }
        if toks.len() < 4 {
            let col = toks.last().map(|t| t.0 + t.1.len()).unwrap_or(col);
            return Err(ParseError::new(line, col, "expected `KIND name n+ n- key=value...`"));
        }
        let name = toks[1].1;
        if name.contains('=') {
            return Err(ParseError::new(line, toks[1].0, format!("invalid element name `{name}`")));
        }
        let (np, nm) = (toks[2].1, toks[3].1);
        for &(c, n) in &toks[2..4] {
            if n.contains('=') {
                return Err(ParseError::new(line, c, format!("invalid node name `{n}`")));
            }
        }
        let mut p = Params::new(line, &toks[4..])?;
        let kind = match head.to_ascii_uppercase().as_str() {
            "R" => {
                let g = p
                    .value("g", parse_number)?
                    .ok_or_else(|| ParseError::new(line, col, "resistor needs `g=` (siemens)"))?;
                let trainable = p.flag("trainable")?;
                ElementKind::Resistor { conductance: g, trainable }
            }
            "C" => ElementKind::Capacitor(spec_from(&mut p, "c", "q", false, col)?),
            "L" => ElementKind::Inductor(spec_from(&mut p, "l", "i", true, col)?),
            "M" => {
                let order = p.value("order", parse_number)?.unwrap_or(0.5);
                let law = if p.items.iter().any(|x| x.1 == "psi") {
                    let range = p.value("range", parse_range)?.unwrap_or(ConstitutiveSpec::DEFAULT_RANGE);
                    let f = p.value("psi", parse_family)?.unwrap_or(Family::Linear { slope: 1.0 });
                    if p.items.iter().any(|x| x.1 == "r") {
                        return Err(ParseError::new(line, col, "give either `r=` or `psi=`, not both"));
                    }
                    MemristorLaw::ChargeControlled(
                        ConstitutiveSpec::new(f, range).map_err(|e| ParseError::new(line, col, e.to_string()))?,
                    )
                } else {
                    MemristorLaw::FluxControlled(memristor_spec(&mut p, col)?)
                };
                ElementKind::FracMemristor { law, order }
            }
            "V" | "I" => {
                let w = p
                    .value("w", parse_waveform)?
                    .ok_or_else(|| ParseError::new(line, col, "source needs `w=` waveform"))?;
                if head.eq_ignore_ascii_case("V") {
                    ElementKind::VoltageSource(w)
                } else {
                    ElementKind::CurrentSource(w)
                }
            }
            "OC" => ElementKind::OutputCapacitor {
                target: p.value("w", parse_waveform)?,
            },
            _ => return Err(ParseError::new(line, col, format!("unknown element kind `{head}`"))),
        };
        p.finish()?;
        elements.push(Element::new(name, np, nm, kind));
        lines_of.push((line, toks[1].0));
    }
    if elements.is_empty() {
        return Err(ParseError::new(1, 1, "netlist has no elements"));
    }
    Circuit::new(elements.clone(), coupling).map_err(|e| {
        let name = match &e {
            CircuitError::DuplicateName(n) | CircuitError::SelfLoop(n) => Some(n.as_str()),
            CircuitError::NonPositive { name, .. } => Some(name.as_str()),
            _ => None,
        };
        let at = name
            .and_then(|n| {
                let idx = match &e {
                    CircuitError::DuplicateName(_) => elements.iter().rposition(|x| x.name == n),
                    _ => elements.iter().position(|x| x.name == n),
                };
                idx.map(|i| lines_of[i])
            })
            .unwrap_or((1, 1));
        ParseError::new(at.0, at.1, e.to_string())
    })
}

/// `r=<slope>` or `r=family(...)` for a flux-controlled memristor.
fn memristor_spec(p: &mut Params, col: usize) -> Result<ConstitutiveSpec, ParseError> {
    let line = p.line;
    let range = p.value("range", parse_range)?.unwrap_or(ConstitutiveSpec::DEFAULT_RANGE);
    let family = p
        .value("r", |s| {
            if s.contains('(') {
                parse_family(s)
            } else {
                parse_number(s).map(|slope| Family::Linear { slope })
            }
        })?
        .ok_or_else(|| ParseError::new(line, col, "memristor needs `r=` or `psi=`"))?;
    ConstitutiveSpec::new(family, range).map_err(|e| ParseError::new(line, col, e.to_string()))
}

struct Line {
    params: Vec<(String, Option<String>)>,
}

impl Line {
    fn new() -> Self {
        Self { params: Vec::new() }
    }

    fn kv(mut self, k: &str, v: String) -> Self {
        self.params.push((k.to_string(), Some(v)));
        self
    }

    fn flag(mut self, k: &str) -> Self {
        self.params.push((k.to_string(), None));
        self
    }

    fn range(self, spec: &ConstitutiveSpec) -> Self {
        if spec.range() == ConstitutiveSpec::DEFAULT_RANGE {
            self
        } else {
            let (lo, hi) = spec.range();
            self.kv("range", format!("{}:{}", format_number(lo), format_number(hi)))
        }
    }
}

impl fmt::Display for Line {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut ps = self.params.clone();
        ps.sort();
        for (k, v) in ps {
            match v {
                Some(v) => write!(f, " {k}={v}")?,
                None => write!(f, " {k}")?,
            }
        }
        Ok(())
    }
}

fn linear_or_family(spec: &ConstitutiveSpec, linear_key: &str, family_key: &str, invert: bool) -> Line {
    let l = Line::new().range(spec);
    match spec.family() {
        Family::Linear { slope } if *slope > 0.0 => {
            let x = if invert { 1.0 / slope } else { *slope };
            let back = if invert { 1.0 / x } else { x };
            if back == *slope {
                l.kv(linear_key, format_number(x))
            } else {
                l.kv(family_key, format_family(spec.family()))
            }
        }
        f => l.kv(family_key, format_family(f)),
    }
}

/// Canonical text: one `.coupling` line, then elements in order with
/// alphabetized parameters.
pub fn serialize_netlist(c: &Circuit) -> String {
    let mut out = String::new();
    let k = c.coupling();
    out.push_str(&format!(
        ".coupling beta={} c={}\n",
        format_number(k.beta),
        format_number(k.c)
    ));
    for e in c.elements() {
        let params = match &e.kind {
            ElementKind::Resistor { conductance, trainable } => {
                let l = Line::new().kv("g", format_number(*conductance));
                if *trainable {
                    l.flag("trainable")
                } else {
                    l
                }
            }
            ElementKind::Capacitor(s) => linear_or_family(s, "c", "q", false),
            ElementKind::Inductor(s) => linear_or_family(s, "l", "i", true),
            ElementKind::FracMemristor { law, order } => {
                let l = match law {
                    MemristorLaw::FluxControlled(s) => {
                        let l = Line::new().range(s);
                        match s.family() {
                            Family::Linear { slope } => l.kv("r", format_number(*slope)),
                            f => l.kv("r", format_family(f)),
                        }
                    }
                    MemristorLaw::ChargeControlled(s) => Line::new().range(s).kv("psi", format_family(s.family())),
                };
                if *order == 0.5 {
                    l
                } else {
                    l.kv("order", format_number(*order))
                }
            }
            ElementKind::VoltageSource(w) | ElementKind::CurrentSource(w) => Line::new().kv("w", format_waveform(w)),
            ElementKind::OutputCapacitor { target } => match target {
                Some(w) => Line::new().kv("w", format_waveform(w)),
                None => Line::new(),
            },
        };
        out.push_str(&format!("{} {} {} {}{}\n", e.kind.tag(), e.name, e.n_plus, e.n_minus, params));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        let text = "\
# demo
.coupling beta=0.01 c=2
V V1 in 0 w=sine(1,0.5,0)
R G1 in out g=0.5 trainable
R R2 out 0 g=1
C C1 out 0 c=1e-3
C C2 out 0 q=tanh(1,0.5) range=-5:5
L L1 out a l=2
M M1 a 0 r=0.5
M M2 a 0 psi=poly(0,1,0,0.2)
I I1 0 a w=step(1,0.2)
OC OUT out 0 w=0.3
";
        let c = parse_netlist(text).unwrap();
        assert_eq!(c.elements().len(), 10);
        assert_eq!(c.coupling(), LossCoupling { beta: 0.01, c: 2.0 });
        assert!(c.elements()[1].is_trainable() && !c.elements()[2].is_trainable());
        match &c.elements()[5].kind {
            ElementKind::Inductor(s) => assert_eq!(s.linear_slope(), Some(0.5)),
            k => panic!("{k:?}"),
        }
        assert_eq!(parse_netlist(&serialize_netlist(&c)).unwrap(), c);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_netlist("R G1 a 0 g=x\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 12));
        let e = parse_netlist("# only\n\nQ X1 a 0\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 1));
        let e = parse_netlist("R G1 a 0 g=1\nR G1 a 0 g=2\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("G1"));
        let e = parse_netlist("R G1 a 0 g=-1\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_netlist("R G1 a 0 g=1 foo=2\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 14));
        let e = parse_netlist("R G1 a\n").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(parse_netlist("").unwrap_err(), ParseError::new(1, 1, "netlist has no elements"));
        assert!(parse_netlist("# nothing\n   \n").is_err());
    }

    #[test]
    fn waveforms_round_trip() {
        for s in ["1.5", "step(2,0.1)", "sine(1,2,0.5)", "samples(0,0.5,1,2,3)"] {
            let w = parse_waveform(s).unwrap();
            assert_eq!(format_waveform(&w), s);
        }
        assert_eq!(parse_waveform("const(2)").unwrap(), Waveform::Const(2.0));
        assert!(parse_waveform("sine(1,2)").is_err());
        assert!(parse_waveform("inf").is_err());
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -0.1, 1e-6, 3.5e20, 1.0 / 3.0, f64::MIN_POSITIVE, -7e-300] {
            assert_eq!(parse_number(&format_number(x)).unwrap(), x);
        }
    }

    #[test]
    fn tokens_report_columns() {
        assert_eq!(tokens("  R  G1 a"), vec![(3, "R"), (6, "G1"), (9, "a")]);
    }
}
