//! Causal time-domain simulation in cut-set coordinates.
//!
//! Each step is backward Euler in the tree-branch voltages: branch
//! voltages follow from `Qᵀ v_tree`, branch currents from the constitutive
//! laws, and Newton drives the cut-set current balance `Q i = 0` of every
//! non-source tree branch below the tolerance. Fractional memristors carry
//! two Grünwald–Letnikov histories: `Ψ = D^½ Φ` and `i = D^½ r̂(Ψ)`.
//!
//! The circuit starts at rest at `t = a`: every flux and charge is zero,
//! capacitors are uncharged and sample 0 records zero rates.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{validate, Circuit, ElementKind, Waveform};
use crate::error::{LagrangianError, SimError};
use crate::frac_ops::{caputo_left_with, gl_weights, trapezoid, FracOrder, History, SampleGrid, Signal};
use crate::linalg::solve_dense;
use crate::topology::{CoordinateMap, Topology};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: SampleGrid,
    /// Largest accepted cut-set current imbalance, amperes.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub history: History,
}

impl SimConfig {
    pub const DEFAULT_TOL: f64 = 1e-9;
    pub const DEFAULT_MAX_ITERS: usize = 50;

    pub fn new(grid: SampleGrid) -> Self {
        Self {
            grid,
            newton_tol: Self::DEFAULT_TOL,
            newton_max_iters: Self::DEFAULT_MAX_ITERS,
            history: History::Full,
        }
    }

    pub fn check(&self) -> Result<(), SimError> {
        if !(self.newton_tol > 0.0) {
            return Err(SimError::Config(format!(
                "newton_tol must be positive, got {}",
                self.newton_tol
            )));
        }
        if self.newton_max_iters == 0 {
            return Err(SimError::Config("newton_max_iters must be at least 1".to_string()));
        }
        if let History::Window(len) = self.history {
            if len < 10 {
                return Err(SimError::Config(format!(
                    "history window must cover at least 10 samples, got {len}"
                )));
            }
        }
        Ok(())
    }
}

/// Waveform overrides for sources (`inputs`) and output targets.
/// Anything not listed keeps the waveform declared in the circuit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriveSet {
    pub inputs: BTreeMap<String, Waveform>,
    pub targets: BTreeMap<String, Waveform>,
}

impl DriveSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(mut self, name: impl Into<String>, w: Waveform) -> Self {
        self.inputs.insert(name.into(), w);
        self
    }

    pub fn target(mut self, name: impl Into<String>, w: Waveform) -> Self {
        self.targets.insert(name.into(), w);
        self
    }

    /// Sampled waveform of every source and output, indexed by element.
    fn sample(&self, circuit: &Circuit, grid: &SampleGrid) -> Result<Vec<Vec<f64>>, SimError> {
        for name in self.inputs.keys() {
            match circuit.index_of(name).map(|i| &circuit.elements()[i].kind) {
                Some(ElementKind::VoltageSource(_)) | Some(ElementKind::CurrentSource(_)) => {}
                _ => return Err(SimError::UnknownDrive(name.clone())),
            }
        }
        for name in self.targets.keys() {
            match circuit.index_of(name).map(|i| &circuit.elements()[i].kind) {
                Some(ElementKind::OutputCapacitor { .. }) => {}
                _ => return Err(SimError::UnknownDrive(name.clone())),
            }
        }
        circuit
            .elements()
            .iter()
            .map(|e| {
                let w = match &e.kind {
                    ElementKind::VoltageSource(w) | ElementKind::CurrentSource(w) => {
                        Some(self.inputs.get(&e.name).unwrap_or(w))
                    }
                    ElementKind::OutputCapacitor { target } => {
                        self.targets.get(&e.name).or(target.as_ref())
                    }
                    _ => None,
                };
                match w {
                    None => Ok(Vec::new()),
                    Some(w) => grid
                        .times()
                        .map(|t| {
                            w.eval(t).ok_or_else(|| SimError::WaveformRange {
                                name: e.name.clone(),
                                time: t,
                            })
                        })
                        .collect(),
                }
            })
            .collect()
    }
}

/// Samples of one generalized coordinate: its value (flux or charge), its
/// rate (voltage or current) and its Caputo half-derivative (`Ψ` or `r`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateTrace {
    pub branch: usize,
    pub name: String,
    pub value: Signal,
    pub rate: Signal,
    pub half: Signal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputTrace {
    pub element: usize,
    pub name: String,
    /// Voltage across the output, `v_k(t)`.
    pub voltage: Signal,
    pub target: Signal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: SampleGrid,
    pub beta: f64,
    pub coords: CoordinateMap,
    /// One trace per cut-set flux coordinate (`Φ`, `v`, `Ψ`).
    pub cutset: Vec<CoordinateTrace>,
    /// One trace per loop charge coordinate (`q`, `i`, `r`).
    pub loops: Vec<CoordinateTrace>,
    pub outputs: Vec<OutputTrace>,
    /// Largest accepted cut-set residual over all steps.
    pub max_kcl_residual: f64,
}

impl Trajectory {
    fn combine<'a>(&'a self, terms: &[(usize, i64)], pick: impl Fn(usize) -> &'a Signal) -> Signal {
        let mut values = vec![0.0; self.grid.count()];
        for &(k, c) in terms {
            for (v, s) in values.iter_mut().zip(pick(k).values()) {
                *v += c as f64 * s;
            }
        }
        Signal::from_parts(self.grid, values)
    }

    pub fn branch_flux(&self, branch: usize) -> Signal {
        self.combine(&self.coords.flux_terms[branch], |k| &self.cutset[k].value)
    }

    pub fn branch_voltage(&self, branch: usize) -> Signal {
        self.combine(&self.coords.flux_terms[branch], |k| &self.cutset[k].rate)
    }

    pub fn branch_half_flux(&self, branch: usize) -> Signal {
        self.combine(&self.coords.flux_terms[branch], |k| &self.cutset[k].half)
    }

    pub fn branch_charge(&self, branch: usize) -> Signal {
        self.combine(&self.coords.charge_terms[branch], |l| &self.loops[l].value)
    }

    pub fn branch_current(&self, branch: usize) -> Signal {
        self.combine(&self.coords.charge_terms[branch], |l| &self.loops[l].rate)
    }
}

/// `J = ∫ Σ_k (v_k - T_k)^2 dt`, trapezoidal.
pub fn trajectory_loss(traj: &Trajectory) -> Result<f64, LagrangianError> {
    if traj.outputs.is_empty() {
        return Err(LagrangianError::MissingOutput);
    }
    let mut sq = vec![0.0; traj.grid.count()];
    for out in &traj.outputs {
        for ((s, v), t) in sq.iter_mut().zip(out.voltage.values()).zip(out.target.values()) {
            let e = v - t;
            *s += e * e;
        }
    }
    Ok(trapezoid(&Signal::from_parts(traj.grid, sq)))
}

enum Branch<'a> {
    Resistor(f64),
    Capacitor(&'a crate::circuit::ConstitutiveSpec),
    Inductor(&'a crate::circuit::ConstitutiveSpec),
    Memristor(&'a crate::circuit::MemristorLaw),
    Voltage,
    Current,
    Output,
}

struct MemristorState {
    flux: Vec<f64>,
    response: Vec<f64>,
}

pub fn simulate(
    circuit: &Circuit,
    drive: &DriveSet,
    beta: f64,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(SimError::NegativeBeta(beta));
    }
    cfg.check()?;
    let report = validate(circuit);
    if !report.is_ready() {
        return Err(SimError::NotReady(format!("{report}")));
    }
    let topo = Topology::analyze(circuit)?;
    let grid = cfg.grid;
    let n_samples = grid.count();
    let dt = grid.dt();
    let waves = drive.sample(circuit, &grid)?;
    let elements = circuit.elements();
    let nb = elements.len();
    let coupling = circuit.coupling().c * beta;

    let branches: Vec<Branch> = elements
        .iter()
        .map(|e| match &e.kind {
            ElementKind::Resistor { conductance, .. } => Branch::Resistor(*conductance),
            ElementKind::Capacitor(s) => Branch::Capacitor(s),
            ElementKind::Inductor(s) => Branch::Inductor(s),
            ElementKind::FracMemristor { law, .. } => Branch::Memristor(law),
            ElementKind::VoltageSource(_) => Branch::Voltage,
            ElementKind::CurrentSource(_) => Branch::Current,
            ElementKind::OutputCapacitor { .. } => Branch::Output,
        })
        .collect();

    let coords = &topo.coords;
    let tree = &coords.cutset_flux_coords;
    let links = &coords.loop_charge_coords;
    let q = &coords.matrices.q;
    let unknown: Vec<usize> = (0..tree.len())
        .filter(|&k| !matches!(branches[tree[k]], Branch::Voltage))
        .collect();
    let m = unknown.len();

    let has_memristor = branches.iter().any(|b| matches!(b, Branch::Memristor(_)));
    let weights = if has_memristor {
        gl_weights(0.5, n_samples - 1)?
    } else {
        Vec::new()
    };
    let inv_sqrt_dt = 1.0 / libm::sqrt(dt);
    let mut mem: Vec<Option<MemristorState>> = branches
        .iter()
        .map(|b| match b {
            Branch::Memristor(law) => {
                let mut flux = Vec::with_capacity(n_samples);
                let mut response = Vec::with_capacity(n_samples);
                flux.push(0.0);
                response.push(law.response(0.0).y);
                Some(MemristorState { flux, response })
            }
            _ => None,
        })
        .collect();

    let mut cut_flux = vec![vec![0.0; n_samples]; tree.len()];
    let mut cut_rate = vec![vec![0.0; n_samples]; tree.len()];
    let mut loop_charge = vec![vec![0.0; n_samples]; links.len()];
    let mut loop_rate = vec![vec![0.0; n_samples]; links.len()];
    let outputs: Vec<usize> = circuit.outputs();
    let mut out_voltage = vec![vec![0.0; n_samples]; outputs.len()];

    // per-branch state carried between steps
    let mut flux_prev = vec![0.0; nb];
    let mut charge_prev = vec![0.0; nb];
    let mut out_prev = vec![0.0; nb];

    let mut x = vec![0.0; m];
    let mut vt = vec![0.0; tree.len()];
    let mut vb = vec![0.0; nb];
    let mut ib = vec![0.0; nb];
    let mut gb = vec![0.0; nb];
    let mut hist_psi = vec![0.0; nb];
    let mut hist_r = vec![0.0; nb];
    let mut jac = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    let mut max_residual: f64 = 0.0;

    for n in 1..n_samples {
        let t = grid.time(n);
        let lim = match cfg.history {
            History::Full => n,
            History::Window(len) => n.min(len - 1),
        };
        for (b, state) in mem.iter().enumerate() {
            if let Some(s) = state {
                let r0 = s.response[0];
                let mut hp = 0.0;
                let mut hr = 0.0;
                for (k, w) in weights.iter().enumerate().take(lim + 1).skip(1) {
                    hp += w * s.flux[n - k];
                    hr += w * (s.response[n - k] - r0);
                }
                hist_psi[b] = hp;
                hist_r[b] = hr;
            }
        }
        for (k, &b) in tree.iter().enumerate() {
            if matches!(branches[b], Branch::Voltage) {
                vt[k] = waves[b][n];
            }
        }
        let mut iterations = 0;
        let residual = loop {
            for (j, &k) in unknown.iter().enumerate() {
                vt[k] = x[j];
            }
            for b in 0..nb {
                vb[b] = coords.flux_terms[b]
                    .iter()
                    .map(|&(k, c)| c as f64 * vt[k])
                    .sum();
                let flux = flux_prev[b] + dt * vb[b];
                let (i, g) = match &branches[b] {
                    Branch::Resistor(g) => (g * vb[b], *g),
                    Branch::Capacitor(spec) => {
                        let c = spec.eval(vb[b]);
                        ((c.y - charge_prev[b]) / dt, c.dy_dx / dt)
                    }
                    Branch::Inductor(spec) => {
                        let c = spec.eval(flux);
                        (c.y, c.dy_dx * dt)
                    }
                    Branch::Memristor(law) => {
                        let s = mem[b].as_ref().unwrap();
                        let psi = inv_sqrt_dt * (flux + hist_psi[b]);
                        let r = law.response(psi);
                        let i = inv_sqrt_dt * (r.y - s.response[0] + hist_r[b]);
                        (i, r.dy_dx)
                    }
                    Branch::Output if coupling > 0.0 => {
                        let u = vb[b] - waves[b][n];
                        (coupling * (u - out_prev[b]) / dt, coupling / dt)
                    }
                    Branch::Output => (0.0, 0.0),
                    Branch::Current => (waves[b][n], 0.0),
                    Branch::Voltage => (0.0, 0.0),
                };
                ib[b] = i;
                gb[b] = g;
            }
            let mut worst: f64 = 0.0;
            for (j, &k) in unknown.iter().enumerate() {
                let f: f64 = q[k].iter().zip(&ib).map(|(&c, &i)| c as f64 * i).sum();
                rhs[j] = -f;
                worst = worst.max(libm::fabs(f));
            }
            if worst <= cfg.newton_tol {
                break worst;
            }
            if iterations >= cfg.newton_max_iters {
                return Err(SimError::StepFailure {
                    time: t,
                    residual: worst,
                    iterations,
                });
            }
            for (r, &kr) in unknown.iter().enumerate() {
                for (c, &kc) in unknown.iter().enumerate() {
                    jac[r * m + c] = q[kr]
                        .iter()
                        .zip(&q[kc])
                        .zip(&gb)
                        .map(|((&a, &b), &g)| (a * b) as f64 * g)
                        .sum();
                }
            }
            if solve_dense(&mut jac, &mut rhs, m).is_none() {
                return Err(SimError::Singular { time: t });
            }
            for j in 0..m {
                x[j] += rhs[j];
            }
            iterations += 1;
        };
        max_residual = max_residual.max(residual);

        // voltage-source currents close their own cut-sets
        for (k, &b) in tree.iter().enumerate() {
            if matches!(branches[b], Branch::Voltage) {
                let others: f64 = q[k]
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c != b)
                    .map(|(c, &coef)| coef as f64 * ib[c])
                    .sum();
                ib[b] = -others;
            }
        }
        for b in 0..nb {
            let flux = flux_prev[b] + dt * vb[b];
            match &branches[b] {
                Branch::Capacitor(spec) => charge_prev[b] = spec.eval(vb[b]).y,
                Branch::Output => out_prev[b] = vb[b] - waves[b][n],
                Branch::Memristor(law) => {
                    let s = mem[b].as_mut().unwrap();
                    let psi = inv_sqrt_dt * (flux + hist_psi[b]);
                    s.flux.push(flux);
                    s.response.push(law.response(psi).y);
                }
                _ => {}
            }
            flux_prev[b] = flux;
        }
        for (k, _) in tree.iter().enumerate() {
            cut_rate[k][n] = vt[k];
            cut_flux[k][n] = cut_flux[k][n - 1] + dt * vt[k];
        }
        for (l, &b) in links.iter().enumerate() {
            loop_rate[l][n] = ib[b];
            loop_charge[l][n] = loop_charge[l][n - 1] + dt * ib[b];
        }
        for (o, &b) in outputs.iter().enumerate() {
            out_voltage[o][n] = vb[b];
        }
    }

    let trace = |branch: usize, value: Vec<f64>, rate: Vec<f64>| -> Result<CoordinateTrace, SimError> {
        let value = Signal::new(grid, value)?;
        let half = caputo_left_with(&value, FracOrder::HALF, cfg.history)?;
        Ok(CoordinateTrace {
            branch,
            name: elements[branch].name.clone(),
            value,
            rate: Signal::new(grid, rate)?,
            half,
        })
    };
    let cutset = tree
        .iter()
        .zip(cut_flux.into_iter().zip(cut_rate))
        .map(|(&b, (v, r))| trace(b, v, r))
        .collect::<Result<Vec<_>, _>>()?;
    let loops = links
        .iter()
        .zip(loop_charge.into_iter().zip(loop_rate))
        .map(|(&b, (v, r))| trace(b, v, r))
        .collect::<Result<Vec<_>, _>>()?;
    let outputs = outputs
        .iter()
        .zip(out_voltage)
        .map(|(&b, v)| {
            Ok(OutputTrace {
                element: b,
                name: elements[b].name.clone(),
                voltage: Signal::new(grid, v)?,
                target: Signal::new(grid, waves[b].clone())?,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    Ok(Trajectory {
        grid,
        beta,
        coords: topo.coords,
        cutset,
        loops,
        outputs,
        max_kcl_residual: max_residual,
    })
}
