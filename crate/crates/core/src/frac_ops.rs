//! Discrete fractional operators on uniformly sampled signals.
//!
//! Derivatives use Grünwald–Letnikov (GL) convolutions; the Caputo variants
//! subtract the initial value first so that GL and Caputo coincide for
//! orders below one. The left Riemann–Liouville integral uses product
//! integration, which is exact for piecewise-linear input. Right-sided
//! operators are the left operators applied to the time-reversed signal.

use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::FracError;

/// Scalar values a [`Signal`] can carry.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;

    fn is_finite(self) -> bool;

    fn norm(self) -> f64;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;

    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    fn norm(self) -> f64 {
        libm::fabs(self)
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);

    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    fn norm(self) -> f64 {
        libm::hypot(self.re, self.im)
    }
}

/// Uniform time grid `t_k = t_start + k * dt`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrid {
    t_start: f64,
    dt: f64,
    count: usize,
}

impl SampleGrid {
    pub fn new(t_start: f64, dt: f64, count: usize) -> Result<Self, FracError> {
        if !(dt > 0.0) || !dt.is_finite() || !t_start.is_finite() {
            return Err(FracError::InvalidGrid { dt, count });
        }
        if count < 2 {
            return Err(FracError::GridTooSmall(count));
        }
        Ok(Self { t_start, dt, count })
    }

    /// Grid covering `[t_start, t_end]` with step `dt`.
    ///
    /// The span must be an integer multiple of `dt` up to a relative
    /// tolerance of 1e-9 steps; the stored end point is then recomputed
    /// from the count so the grid stays exactly uniform.
    pub fn spanning(t_start: f64, t_end: f64, dt: f64) -> Result<Self, FracError> {
        if !(dt > 0.0) || !(t_end > t_start) {
            return Err(FracError::InvalidGrid { dt, count: 0 });
        }
        let steps = (t_end - t_start) / dt;
        let rounded = libm::round(steps);
        if libm::fabs(steps - rounded) > 1e-9 * rounded.max(1.0) {
            return Err(FracError::InvalidGrid { dt, count: 0 });
        }
        Self::new(t_start, dt, rounded as usize + 1)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.count - 1)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |k| self.time(k))
    }
}

/// A sampled time series living on a [`SampleGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Signal<T = f64> {
    grid: SampleGrid,
    values: Vec<T>,
}

pub type ComplexSignal = Signal<Complex64>;

impl<T: Scalar> Signal<T> {
    pub fn new(grid: SampleGrid, values: Vec<T>) -> Result<Self, FracError> {
        if values.len() != grid.count() {
            return Err(FracError::LengthMismatch {
                expected: grid.count(),
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FracError::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SampleGrid, mut f: impl FnMut(f64) -> T) -> Self {
        let values = grid.times().map(&mut f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: SampleGrid) -> Self {
        Self {
            grid,
            values: alloc::vec![T::ZERO; grid.count()],
        }
    }

    /// Construction for values produced by operators on finite inputs.
    pub(crate) fn from_parts(grid: SampleGrid, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.count());
        Self { grid, values }
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> T {
        self.values[0]
    }

    pub fn last(&self) -> T {
        self.values[self.values.len() - 1]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Signal<U> {
        Signal {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    /// Pointwise `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self, FracError> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| x * a + y * b)
            .collect();
        Ok(Self::from_parts(self.grid, values))
    }

    /// The same samples read backwards in time, on the same grid.
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self::from_parts(self.grid, values)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn check_same_grid<U>(&self, other: &Signal<U>) -> Result<(), FracError> {
        if self.grid != other.grid {
            return Err(FracError::GridMismatch);
        }
        Ok(())
    }
}

impl Signal<f64> {
    pub fn to_complex(&self) -> ComplexSignal {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

/// Fractional order `alpha` in `(0, 2)` together with `ceil(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    alpha: f64,
    ceil_n: u32,
}

impl FracOrder {
    pub const HALF: FracOrder = FracOrder {
        alpha: 0.5,
        ceil_n: 1,
    };
    pub const ONE: FracOrder = FracOrder {
        alpha: 1.0,
        ceil_n: 1,
    };

    pub fn new(alpha: f64) -> Result<Self, FracError> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(FracError::InvalidOrder(alpha));
        }
        Ok(Self {
            alpha,
            ceil_n: libm::ceil(alpha) as u32,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ceil_n(&self) -> u32 {
        self.ceil_n
    }
}

/// How much past history a convolution sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum History {
    #[default]
    Full,
    /// Only the most recent `len` samples (including the current one).
    Window(usize),
}

impl History {
    fn limit(self, n: usize) -> usize {
        match self {
            History::Full => n,
            History::Window(len) => n.min(len.saturating_sub(1)),
        }
    }
}

/// Grünwald–Letnikov weights `w_k = (-1)^k C(alpha, k)` for `k = 0..=n`.
pub fn gl_weights(alpha: f64, n: usize) -> Result<Vec<f64>, FracError> {
    FracOrder::new(alpha)?;
    let mut w = Vec::with_capacity(n + 1);
    w.push(1.0);
    for k in 1..=n {
        let prev = w[k - 1];
        w.push(prev * ((k as f64 - 1.0 - alpha) / k as f64));
    }
    Ok(w)
}

fn gl_convolve<T: Scalar>(values: &[T], weights: &[f64], history: History) -> Vec<T> {
    (0..values.len())
        .map(|n| {
            let mut acc = T::ZERO;
            for k in 0..=history.limit(n) {
                acc = acc + values[n - k] * weights[k];
            }
            acc
        })
        .collect()
}

fn require_grid<T: Scalar>(x: &Signal<T>) -> Result<(), FracError> {
    if x.len() < 2 {
        return Err(FracError::GridTooSmall(x.len()));
    }
    Ok(())
}

/// Left Riemann–Liouville derivative `(d/dt)^n aI_t^(n-alpha) x` by plain GL.
pub fn rl_derivative_left<T: Scalar>(
    x: &Signal<T>,
    order: FracOrder,
) -> Result<Signal<T>, FracError> {
    rl_derivative_left_with(x, order, History::Full)
}

pub fn rl_derivative_left_with<T: Scalar>(
    x: &Signal<T>,
    order: FracOrder,
    history: History,
) -> Result<Signal<T>, FracError> {
    require_grid(x)?;
    let alpha = order.alpha();
    let weights = gl_weights(alpha, x.len() - 1)?;
    let scale = libm::pow(x.grid().dt(), -alpha);
    let values = gl_convolve(x.values(), &weights, history)
        .into_iter()
        .map(|v| v * scale)
        .collect();
    Ok(Signal::from_parts(*x.grid(), values))
}

/// Left Caputo derivative on the grid.
///
/// GL applied to `x(t) - x(a)` (and, for orders above one, minus the
/// linear Taylor term built from the first forward difference).
pub fn caputo_left<T: Scalar>(x: &Signal<T>, order: FracOrder) -> Result<Signal<T>, FracError> {
    caputo_left_with(x, order, History::Full)
}

pub fn caputo_left_with<T: Scalar>(
    x: &Signal<T>,
    order: FracOrder,
    history: History,
) -> Result<Signal<T>, FracError> {
    require_grid(x)?;
    let x0 = x.first();
    let slope = (x.values()[1] - x0) * (1.0 / x.grid().dt());
    let taylor = order.ceil_n() > 1;
    let dt = x.grid().dt();
    let shifted: Vec<T> = x
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut d = v - x0;
            if taylor {
                d = d - slope * (k as f64 * dt);
            }
            d
        })
        .collect();
    rl_derivative_left_with(&Signal::from_parts(*x.grid(), shifted), order, history)
}

/// Left Riemann–Liouville integral of order `alpha > 0`.
///
/// Product trapezoidal rule: the kernel `(t - s)^(alpha - 1)` is integrated
/// exactly against the piecewise-linear interpolant of `x`.
pub fn rl_integral_left<T: Scalar>(x: &Signal<T>, alpha: f64) -> Result<Signal<T>, FracError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(FracError::InvalidOrder(alpha));
    }
    require_grid(x)?;
    let n_samples = x.len();
    let a1 = alpha + 1.0;
    // m^(alpha+1) for m = 0..n
    let pw: Vec<f64> = (0..n_samples).map(|m| libm::pow(m as f64, a1)).collect();
    let kernel: Vec<f64> = (0..n_samples)
        .map(|m| match m {
            0 => 1.0,
            _ => libm::pow((m + 1) as f64, a1) - 2.0 * pw[m] + pw[m - 1],
        })
        .collect();
    let scale = libm::pow(x.grid().dt(), alpha) / libm::tgamma(alpha + 2.0);
    let xs = x.values();
    let mut out = Vec::with_capacity(n_samples);
    out.push(T::ZERO);
    for n in 1..n_samples {
        let nf = n as f64;
        let first = pw[n - 1] - (nf - 1.0 - alpha) * libm::pow(nf, alpha);
        let mut acc = xs[0] * first;
        for j in 1..=n {
            acc = acc + xs[j] * kernel[n - j];
        }
        out.push(acc * scale);
    }
    Ok(Signal::from_parts(*x.grid(), out))
}

/// Result of a right-sided derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct RightDerivative<T = f64> {
    pub signal: Signal<T>,
    /// The continuum value diverges at `t = b` because the input does not
    /// vanish there; the last sample is the finite one-sided stencil value.
    pub singular_endpoint: bool,
}

/// Right Riemann–Liouville derivative `(-d/dt)^n tI_b^(n-alpha) x`.
///
/// Reversing time maps `tI_b` onto `aI_t` and `-d/dt` onto `d/dt`, so this
/// is the left GL derivative of the reversed samples, reversed back.
pub fn rl_derivative_right<T: Scalar>(
    x: &Signal<T>,
    order: FracOrder,
) -> Result<RightDerivative<T>, FracError> {
    let left = rl_derivative_left(&x.reversed(), order)?;
    let scale = x.max_norm().max(1.0);
    Ok(RightDerivative {
        signal: left.reversed(),
        singular_endpoint: x.last().norm() > 1e-12 * scale,
    })
}

/// Right Caputo derivative `(-1)^n tI_b^(n-alpha) x^(n)`.
pub fn caputo_right<T: Scalar>(x: &Signal<T>, order: FracOrder) -> Result<Signal<T>, FracError> {
    Ok(caputo_left(&x.reversed(), order)?.reversed())
}

/// Trapezoidal integral of the samples over the whole grid.
pub fn trapezoid<T: Scalar>(x: &Signal<T>) -> T {
    let v = x.values();
    let n = v.len();
    let mut acc = (v[0] + v[n - 1]) * 0.5;
    for &s in &v[1..n - 1] {
        acc = acc + s;
    }
    acc * x.grid().dt()
}

/// `∫_a^b (cD^(1/2) phi)^2 dt`: caputo half-derivative, then trapezoid.
pub fn half_energy_integral(phi: &Signal<f64>) -> Result<f64, FracError> {
    half_energy_integral_with(phi, History::Full)
}

pub fn half_energy_integral_with(phi: &Signal<f64>, history: History) -> Result<f64, FracError> {
    let psi = caputo_left_with(phi, FracOrder::HALF, history)?;
    Ok(trapezoid(&psi.map(|v| v * v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    fn grid(n: usize, b: f64) -> SampleGrid {
        SampleGrid::new(0.0, b / (n - 1) as f64, n).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        libm::fabs(a - b) <= tol
    }

    #[test]
    fn weights_first_difference() {
        assert_eq!(gl_weights(1.0, 3).unwrap(), vec![1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn weights_half_order() {
        // exact rationals: 1, -1/2, -1/8, -1/16
        assert_eq!(
            gl_weights(0.5, 3).unwrap(),
            vec![1.0, -0.5, -0.125, -0.0625]
        );
    }

    #[test]
    fn weights_reject_bad_orders() {
        assert!(matches!(gl_weights(0.0, 3), Err(FracError::InvalidOrder(_))));
        assert!(matches!(gl_weights(2.0, 3), Err(FracError::InvalidOrder(_))));
        assert!(matches!(gl_weights(-0.3, 3), Err(FracError::InvalidOrder(_))));
    }

    #[test]
    fn weight_partial_sums_decrease_to_zero() {
        let w = gl_weights(0.5, 10_000).unwrap();
        assert_eq!(w[0], 1.0);
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        for (k, wk) in w.iter().enumerate() {
            if k > 0 {
                assert!(*wk < 0.0);
            }
            sum += wk;
            assert!(sum > 0.0 && sum <= 1.0);
            assert!(sum < prev);
            prev = sum;
        }
        assert!(sum < 0.01);
    }

    #[test]
    fn caputo_of_constant_vanishes() {
        let g = grid(101, 1.0);
        let x = Signal::from_fn(g, |_| 3.7);
        let d = caputo_left(&x, FracOrder::HALF).unwrap();
        assert!(d.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn caputo_of_ramp_at_one() {
        let g = grid(1001, 1.0);
        let x = Signal::from_fn(g, |t| t);
        let d = caputo_left(&x, FracOrder::HALF).unwrap();
        // 2 sqrt(1/pi) = 1.128379...
        assert!(close(d.last(), 2.0 / libm::sqrt(PI), 5e-4));
    }

    #[test]
    fn caputo_integer_order_is_backward_difference() {
        let g = grid(501, 1.0);
        let x = Signal::from_fn(g, |t| t * t);
        let d = caputo_left(&x, FracOrder::ONE).unwrap();
        let dt = g.dt();
        for k in 1..g.count() {
            let bd = (x.values()[k] - x.values()[k - 1]) / dt;
            assert!(close(d.values()[k], bd, 1e-9));
            assert!(close(d.values()[k], 2.0 * g.time(k), 2.0 * dt * 2.0));
        }
    }

    #[test]
    fn caputo_rejects_single_sample() {
        assert!(matches!(
            SampleGrid::new(0.0, 0.1, 1),
            Err(FracError::GridTooSmall(1))
        ));
    }

    #[test]
    fn rl_integral_integer_order_is_trapezoid() {
        let g = grid(11, 1.0);
        let x = Signal::from_fn(g, |_| 1.0);
        let i = rl_integral_left(&x, 1.0).unwrap();
        for k in 0..g.count() {
            assert!(close(i.values()[k], g.time(k), 1e-13));
        }
    }

    #[test]
    fn rl_integral_half_of_one() {
        let g = grid(1001, 1.0);
        let x = Signal::from_fn(g, |_| 1.0);
        let i = rl_integral_left(&x, 0.5).unwrap();
        // exact for constants (piecewise linear)
        for k in 0..g.count() {
            let want = 2.0 * libm::sqrt(g.time(k) / PI);
            assert!(close(i.values()[k], want, 1e-12), "k={k}");
        }
    }

    #[test]
    fn rl_integral_semigroup() {
        let g = grid(401, 1.0);
        let x = Signal::from_fn(g, |t| libm::cos(3.0 * t) + t);
        let twice = rl_integral_left(&rl_integral_left(&x, 0.5).unwrap(), 0.5).unwrap();
        let once = rl_integral_left(&x, 1.0).unwrap();
        let err = twice.combine(1.0, &once, -1.0).unwrap().max_norm();
        assert!(err < 5.0 * g.dt(), "err={err}");
    }

    #[test]
    fn rl_integral_rejects_nonpositive_order() {
        let g = grid(5, 1.0);
        let x = Signal::from_fn(g, |t| t);
        assert!(matches!(
            rl_integral_left(&x, 0.0),
            Err(FracError::InvalidOrder(_))
        ));
    }

    #[test]
    fn right_derivative_of_constant() {
        let g = grid(2001, 1.0);
        let c = 1.5;
        let x = Signal::from_fn(g, |_| c);
        let d = rl_derivative_right(&x, FracOrder::HALF).unwrap();
        assert!(d.singular_endpoint);
        // compare away from the endpoint singularity
        for k in 0..g.count() - 200 {
            let want = c / libm::sqrt(PI * (1.0 - g.time(k)));
            let got = d.signal.values()[k];
            assert!(libm::fabs(got - want) / want < 2e-2, "k={k} got={got} want={want}");
        }
    }

    #[test]
    fn right_derivative_integer_order() {
        let g = grid(1001, 1.0);
        let x = Signal::from_fn(g, |t| (1.0 - t) * (1.0 - t));
        let d = rl_derivative_right(&x, FracOrder::ONE).unwrap();
        assert!(!d.singular_endpoint);
        for k in 0..g.count() - 1 {
            let want = 2.0 * (1.0 - g.time(k));
            assert!(close(d.signal.values()[k], want, 2.0 * g.dt()));
        }
    }

    #[test]
    fn right_composition_gives_negative_derivative() {
        for &n in &[201usize, 401, 801] {
            let g = grid(n, 1.0);
            let x = Signal::from_fn(g, |t| t * t);
            let inner = caputo_right(&x, FracOrder::HALF).unwrap();
            let outer = rl_derivative_right(&inner, FracOrder::HALF).unwrap().signal;
            for k in 1..n - 1 {
                let want = -2.0 * g.time(k);
                assert!(close(outer.values()[k], want, 2.0 * g.dt()));
            }
        }
    }

    #[test]
    fn half_energy_examples() {
        let g = grid(1001, 1.0);
        assert_eq!(half_energy_integral(&Signal::zeros(g)).unwrap(), 0.0);
        let phi = Signal::from_fn(g, |t| t);
        let e = half_energy_integral(&phi).unwrap();
        assert!(close(e, 2.0 / PI, 5e-3), "e={e}");
        let e3 = half_energy_integral(&phi.scale(3.0)).unwrap();
        assert!(close(e3, 9.0 * e, 1e-12));
    }

    #[test]
    fn windowed_history_matches_full_inside_window() {
        let g = grid(101, 1.0);
        let x = Signal::from_fn(g, |t| libm::sin(4.0 * t));
        let full = caputo_left(&x, FracOrder::HALF).unwrap();
        let win = caputo_left_with(&x, FracOrder::HALF, History::Window(30)).unwrap();
        assert_eq!(&full.values()[..30], &win.values()[..30]);
        assert_ne!(full.values()[80], win.values()[80]);
    }

    #[test]
    fn complex_operators_act_componentwise() {
        let g = grid(65, 1.0);
        let re = Signal::from_fn(g, |t| t * t);
        let im = Signal::from_fn(g, libm::sin);
        let z = Signal::from_fn(g, |t| Complex64::new(t * t, libm::sin(t)));
        let dz = caputo_left(&z, FracOrder::HALF).unwrap();
        let dre = caputo_left(&re, FracOrder::HALF).unwrap();
        let dim = caputo_left(&im, FracOrder::HALF).unwrap();
        for k in 0..g.count() {
            assert!(close(dz.values()[k].re, dre.values()[k], 1e-12));
            assert!(close(dz.values()[k].im, dim.values()[k], 1e-12));
        }
    }

    #[test]
    fn grid_spanning() {
        let g = SampleGrid::spanning(0.0, 5.0, 1e-3).unwrap();
        assert_eq!(g.count(), 5001);
        assert!(close(g.t_end(), 5.0, 1e-12));
        assert!(SampleGrid::spanning(0.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn signal_rejects_non_finite() {
        let g = grid(3, 1.0);
        assert!(matches!(
            Signal::new(g, vec![0.0, f64::NAN, 1.0]),
            Err(FracError::NonFinite { index: 1 })
        ));
        assert!(matches!(
            Signal::new(g, vec![0.0, 1.0]),
            Err(FracError::LengthMismatch { .. })
        ));
    }
}
