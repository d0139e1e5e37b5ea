//! Fractional operators on sampled series, plus an analytic self-test.

use fracprop_core::error::FracError;
use fracprop_core::frac_ops::{
    caputo_left, caputo_right, rl_derivative_left, rl_derivative_right, rl_integral_left, FracOrder,
    SampleGrid, Signal,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Operator {
    Caputo,
    Rl,
    RlIntegral,
    CaputoRight,
    RlRight,
}

pub fn apply(op: Operator, x: &Signal, alpha: f64) -> Result<Signal, FracError> {
    let order = || FracOrder::new(alpha);
    match op {
        Operator::Caputo => caputo_left(x, order()?),
        Operator::Rl => rl_derivative_left(x, order()?),
        Operator::RlIntegral => rl_integral_left(x, alpha),
        Operator::CaputoRight => caputo_right(x, order()?),
        Operator::RlRight => Ok(rl_derivative_right(x, order()?)?.signal),
    }
}

/// Checks that `t` is uniform and builds the grid.
pub fn grid_from_times(t: &[f64]) -> Result<SampleGrid, String> {
    if t.len() < 2 {
        return Err(format!("need at least 2 samples, got {}", t.len()));
    }
    let dt = t[1] - t[0];
    for (k, w) in t.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.abs() {
            return Err(format!("grid is not uniform at row {}", k + 3));
        }
    }
    SampleGrid::new(t[0], dt, t.len()).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub op: Operator,
    pub alpha: f64,
    pub power: f64,
    pub max_error: f64,
    pub threshold: f64,
}

impl Case {
    pub fn passed(&self) -> bool {
        self.max_error <= self.threshold
    }
}

/// `x = t^p` on `[0, 1]` with `dt = 1e-3` against closed forms.
pub fn self_test() -> Vec<Case> {
    let grid = SampleGrid::new(0.0, 1e-3, 1001).expect("static grid");
    let gamma = libm::tgamma;
    let table: [(Operator, f64, f64, f64); 7] = [
        (Operator::Caputo, 0.5, 1.0, 2e-2),
        (Operator::Caputo, 0.5, 1.5, 5e-3),
        (Operator::Caputo, 0.5, 2.0, 5e-3),
        (Operator::Caputo, 1.0, 2.0, 2e-3),
        (Operator::Rl, 0.5, 2.0, 5e-3),
        (Operator::RlIntegral, 0.5, 1.0, 1e-9),
        (Operator::RlIntegral, 0.5, 2.0, 1e-4),
    ];
    table
        .iter()
        .map(|&(op, alpha, p, threshold)| {
            let x = Signal::from_fn(grid, |t| t.powf(p));
            let y = apply(op, &x, alpha).expect("valid order");
            let exact = |t: f64| match op {
                Operator::RlIntegral => gamma(p + 1.0) / gamma(p + 1.0 + alpha) * t.powf(p + alpha),
                _ => gamma(p + 1.0) / gamma(p + 1.0 - alpha) * t.powf(p - alpha),
            };
            let max_error = grid
                .times()
                .zip(y.values())
                .skip(1)
                .map(|(t, v)| (v - exact(t)).abs())
                .fold(0.0, f64::max);
            Case {
                op,
                alpha,
                power: p,
                max_error,
                threshold,
            }
        })
        .collect()
}
