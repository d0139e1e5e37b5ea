//! Element Lagrangians, the action and its explicit partial derivatives,
//! and the fractional Euler–Lagrange residual.
//!
//! Sign convention: capacitors contribute `-∫ q̂ dv` and inductors
//! `+∫ î dΦ`, so the conservative Euler–Lagrange equations are the cut-set
//! current balances solved by the simulator. Dissipative elements enter
//! through the half-flux `Ψ` with an imaginary weight. Sources are
//! constrained branches and carry no term.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::circuit::{Circuit, ElementKind};
use crate::dynamics::{trajectory_loss, Trajectory};
use crate::error::LagrangianError;
use crate::frac_ops::{half_energy_integral, rl_derivative_right, trapezoid, ComplexSignal, FracOrder, Scalar, Signal};
use crate::topology::CoordinateMap;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Instantaneous branch quantities, all derived from the generalized
/// coordinates through the coordinate map.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitState {
    pub t: f64,
    pub flux: Vec<f64>,
    pub voltage: Vec<f64>,
    pub half_flux: Vec<f64>,
    pub charge: Vec<f64>,
    pub current: Vec<f64>,
    pub half_charge: Vec<f64>,
    /// Target `T_k` on output branches, zero elsewhere.
    pub target: Vec<f64>,
}

impl CircuitState {
    pub fn zero(branches: usize) -> Self {
        Self {
            t: 0.0,
            flux: vec![0.0; branches],
            voltage: vec![0.0; branches],
            half_flux: vec![0.0; branches],
            charge: vec![0.0; branches],
            current: vec![0.0; branches],
            half_charge: vec![0.0; branches],
            target: vec![0.0; branches],
        }
    }

    /// `cutset` holds `(Φ, v, Ψ)` per cut-set coordinate, `loops` holds
    /// `(q, i, r)` per loop coordinate.
    pub fn from_coordinates(
        map: &CoordinateMap,
        t: f64,
        cutset: &[(f64, f64, f64)],
        loops: &[(f64, f64, f64)],
        target: Vec<f64>,
    ) -> Self {
        let pick = |xs: &[(f64, f64, f64)], f: fn(&(f64, f64, f64)) -> f64| -> Vec<f64> {
            xs.iter().map(f).collect()
        };
        Self {
            t,
            flux: map.branch_fluxes(&pick(cutset, |x| x.0)),
            voltage: map.branch_fluxes(&pick(cutset, |x| x.1)),
            half_flux: map.branch_fluxes(&pick(cutset, |x| x.2)),
            charge: map.branch_charges(&pick(loops, |x| x.0)),
            current: map.branch_charges(&pick(loops, |x| x.1)),
            half_charge: map.branch_charges(&pick(loops, |x| x.2)),
            target,
        }
    }

    /// State at sample `n` of a trajectory.
    pub fn at(traj: &Trajectory, n: usize) -> Self {
        let cut: Vec<_> = traj
            .cutset
            .iter()
            .map(|c| (c.value.values()[n], c.rate.values()[n], c.half.values()[n]))
            .collect();
        let loops: Vec<_> = traj
            .loops
            .iter()
            .map(|c| (c.value.values()[n], c.rate.values()[n], c.half.values()[n]))
            .collect();
        let mut target = vec![0.0; traj.coords.branch_count()];
        for o in &traj.outputs {
            target[o.element] = o.target.values()[n];
        }
        Self::from_coordinates(&traj.coords, traj.grid.time(n), &cut, &loops, target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LagrangianParts {
    pub inductive: Complex64,
    pub capacitive: Complex64,
    pub memristive: Complex64,
    pub synaptic: Complex64,
    pub output: Complex64,
    /// Fixed (non-trainable) resistors.
    pub hidden: Complex64,
}

impl LagrangianParts {
    pub fn sum(&self) -> Complex64 {
        self.inductive + self.capacitive + self.memristive + self.synaptic + self.output + self.hidden
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianValue {
    pub total: Complex64,
    pub parts: LagrangianParts,
    /// Some constitutive law was evaluated outside its declared range.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementTerm {
    pub value: Complex64,
    pub extrapolated: bool,
}

/// Lagrangian contribution of element `index`. The output term uses the
/// circuit's coupling: `-βC (v - T)^2`.
pub fn element_term(circuit: &Circuit, index: usize, state: &CircuitState) -> ElementTerm {
    let e = &circuit.elements()[index];
    let real = |v: f64| Complex64::new(v, 0.0);
    let mut extrapolated = false;
    let value = match &e.kind {
        ElementKind::Inductor(spec) => {
            let phi = state.flux[index];
            extrapolated = spec.eval(phi).extrapolated;
            real(spec.antiderivative(phi))
        }
        ElementKind::Capacitor(spec) => {
            let v = state.voltage[index];
            extrapolated = spec.eval(v).extrapolated;
            real(-spec.antiderivative(v))
        }
        ElementKind::FracMemristor { law, .. } => {
            let psi = state.half_flux[index];
            extrapolated = law.response(psi).extrapolated;
            J * (0.5 * law.content(psi))
        }
        ElementKind::Resistor { conductance, .. } => {
            let psi = state.half_flux[index];
            J * (0.5 * conductance * psi * psi)
        }
        ElementKind::OutputCapacitor { .. } => {
            let c = circuit.coupling();
            let d = state.voltage[index] - state.target[index];
            real(-c.beta * c.c * d * d)
        }
        ElementKind::VoltageSource(_) | ElementKind::CurrentSource(_) => Complex64::new(0.0, 0.0),
    };
    ElementTerm {
        value,
        extrapolated,
    }
}

pub fn total_lagrangian(circuit: &Circuit, state: &CircuitState) -> LagrangianValue {
    let mut parts = LagrangianParts::default();
    let mut extrapolated = false;
    for (i, e) in circuit.elements().iter().enumerate() {
        let term = element_term(circuit, i, state);
        extrapolated |= term.extrapolated;
        let slot = match &e.kind {
            ElementKind::Inductor(_) => &mut parts.inductive,
            ElementKind::Capacitor(_) => &mut parts.capacitive,
            ElementKind::FracMemristor { .. } => &mut parts.memristive,
            ElementKind::Resistor { trainable: true, .. } => &mut parts.synaptic,
            ElementKind::Resistor { .. } => &mut parts.hidden,
            ElementKind::OutputCapacitor { .. } => &mut parts.output,
            ElementKind::VoltageSource(_) | ElementKind::CurrentSource(_) => continue,
        };
        *slot += term.value;
    }
    LagrangianValue {
        total: parts.sum(),
        parts,
        extrapolated,
    }
}

fn check_shape(circuit: &Circuit, traj: &Trajectory) -> Result<(), LagrangianError> {
    if traj.coords.branch_count() != circuit.elements().len() {
        return Err(LagrangianError::Mismatch);
    }
    Ok(())
}

/// Lagrangian sampled along the whole trajectory.
pub fn lagrangian_along(circuit: &Circuit, traj: &Trajectory) -> Result<Vec<LagrangianValue>, LagrangianError> {
    check_shape(circuit, traj)?;
    Ok((0..traj.grid.count())
        .map(|n| total_lagrangian(circuit, &CircuitState::at(traj, n)))
        .collect())
}

/// `S = ∫ ℒ dt`, trapezoidal.
pub fn action(circuit: &Circuit, traj: &Trajectory) -> Result<Complex64, LagrangianError> {
    let values: Vec<Complex64> = lagrangian_along(circuit, traj)?.iter().map(|l| l.total).collect();
    Ok(trapezoid(&Signal::from_parts(traj.grid, values)))
}

/// `∂S/∂β = -C J` on a frozen trajectory.
pub fn action_beta_partial(circuit: &Circuit, traj: &Trajectory) -> Result<f64, LagrangianError> {
    check_shape(circuit, traj)?;
    Ok(-circuit.coupling().c * trajectory_loss(traj)?)
}

/// `∂S/∂g_l = (j/2) ∫ Ψ_l^2 dt` on a frozen trajectory.
pub fn action_g_partial(circuit: &Circuit, traj: &Trajectory, index: usize) -> Result<Complex64, LagrangianError> {
    check_shape(circuit, traj)?;
    let e = circuit
        .elements()
        .get(index)
        .ok_or(LagrangianError::Mismatch)?;
    if !e.is_trainable() {
        return Err(LagrangianError::NotTrainable(e.name.clone()));
    }
    let energy = half_energy_integral(&traj.branch_flux(index))?;
    Ok(J * (0.5 * energy))
}

/// Euler–Lagrange residual of one free cut-set coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ElResidual {
    /// Index into the trajectory's cut-set coordinates.
    pub coordinate: usize,
    pub branch: usize,
    pub signal: ComplexSignal,
}

impl ElResidual {
    /// Max norm over samples `skip..len-skip`.
    pub fn interior_max(&self, skip: usize) -> f64 {
        let v = self.signal.values();
        if v.len() <= 2 * skip {
            return 0.0;
        }
        v[skip..v.len() - skip].iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

fn central_difference(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| match k {
            0 => (x[1] - x[0]) / dt,
            k if k == n - 1 => (x[k] - x[k - 1]) / dt,
            k => (x[k + 1] - x[k - 1]) / (2.0 * dt),
        })
        .collect()
}

/// `∂ℒ/∂Φ - d/dt ∂ℒ/∂Φ̇ + tD_b^(1/2) ∂ℒ/∂Ψ` per cut-set coordinate that is
/// not pinned by a voltage source. Time derivatives are central
/// differences; the right derivative needs the whole trajectory, so the
/// last sample is not meaningful.
pub fn el_residual(circuit: &Circuit, traj: &Trajectory) -> Result<Vec<ElResidual>, LagrangianError> {
    check_shape(circuit, traj)?;
    let grid = traj.grid;
    let n = grid.count();
    let dt = grid.dt();
    let coupling = circuit.coupling();
    let q = &traj.coords.matrices.q;
    let targets: Vec<Option<&Signal>> = (0..circuit.elements().len())
        .map(|b| traj.outputs.iter().find(|o| o.element == b).map(|o| &o.target))
        .collect();

    // per-branch generalized force, split into the local part and the
    // part that still needs the right half-derivative
    let mut local: Vec<Option<Vec<f64>>> = Vec::new();
    let mut nonlocal: Vec<Option<ComplexSignal>> = Vec::new();
    for (b, e) in circuit.elements().iter().enumerate() {
        let (l, nl) = match &e.kind {
            ElementKind::Inductor(spec) => {
                let phi = traj.branch_flux(b);
                (Some(phi.values().iter().map(|&p| spec.eval(p).y).collect()), None)
            }
            ElementKind::Capacitor(spec) => {
                let charge: Vec<f64> = traj.branch_voltage(b).values().iter().map(|&v| spec.eval(v).y).collect();
                (Some(central_difference(&charge, dt)), None)
            }
            ElementKind::OutputCapacitor { .. } => {
                let v = traj.branch_voltage(b);
                let zero = Signal::zeros(grid);
                let t = targets[b].unwrap_or(&zero);
                let d: Vec<f64> = v
                    .values()
                    .iter()
                    .zip(t.values())
                    .map(|(v, t)| 2.0 * coupling.beta * coupling.c * (v - t))
                    .collect();
                (Some(central_difference(&d, dt)), None)
            }
            ElementKind::CurrentSource(_) => (Some(traj.branch_current(b).into_values()), None),
            ElementKind::Resistor { conductance, .. } => {
                let g = *conductance;
                let psi = traj.branch_half_flux(b);
                (None, Some(psi.map(|p| J * (g * p))))
            }
            ElementKind::FracMemristor { law, .. } => {
                let psi = traj.branch_half_flux(b);
                (None, Some(psi.map(|p| J * (0.5 * law.response(p).y))))
            }
            ElementKind::VoltageSource(_) => (None, None),
        };
        local.push(l);
        nonlocal.push(match nl {
            Some(s) => Some(rl_derivative_right(&s, FracOrder::HALF)?.signal),
            None => None,
        });
    }

    let mut out = Vec::new();
    for (k, c) in traj.cutset.iter().enumerate() {
        if matches!(circuit.elements()[c.branch].kind, ElementKind::VoltageSource(_)) {
            continue;
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (b, &coef) in q[k].iter().enumerate() {
            if coef == 0 {
                continue;
            }
            let coef = coef as f64;
            if let Some(l) = &local[b] {
                for (a, x) in acc.iter_mut().zip(l) {
                    *a += coef * x;
                }
            }
            if let Some(s) = &nonlocal[b] {
                for (a, x) in acc.iter_mut().zip(s.values()) {
                    *a += x * coef;
                }
            }
        }
        out.push(ElResidual {
            coordinate: k,
            branch: c.branch,
            signal: Signal::from_parts(grid, acc),
        });
    }
    Ok(out)
}
