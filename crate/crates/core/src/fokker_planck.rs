//! Crank-Nicolson evolution of log-price densities (forward) and expected
//! payoffs (backward).
//!
//! Forward: `∂_t p = -∂_x[(μ - σ²/2) p] + ½ ∂²_x[σ² p]`, zero-flux walls.
//! Backward: `∂_t V = -(μ - σ²/2) ∂_x V - ½ σ² ∂²_x V`, solved from expiry.
//!
//! Both use one node-centred finite-volume operator `A`. Node `i` owns the
//! control volume `w_i` (`h`, or `h/2` at the ends), so `Σ w_i p_i` is the
//! trapezoid mass and `1ᵀA = 0` makes every step conserve it. The backward
//! generator is `W⁻¹Aᵀ`; with Crank-Nicolson on both sides the pairing
//! `Σ w_i p_i V_i` is preserved step for step.

use std::io::{self, Write};

use crate::dynamics::{fmt_real, MarketParams};
use crate::error::{Error, Result};
use crate::pricing::OptionStyle;
use crate::tridiag::Tridiagonal;

pub const MIN_GRID_POINTS: usize = 16;
/// Allowed drift of total probability per unit time.
pub const MASS_TOLERANCE: f64 = 1e-6;
/// Probability mass near the walls that signals a truncated domain.
pub const LEAKAGE_TOLERANCE: f64 = 1e-4;
/// Cell Péclet number above which the advective flux is upwinded.
pub const PECLET_UPWIND: f64 = 2.0;

type Field = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift `μ(x, t)` and volatility `σ(x, t)` of the log price.
pub struct CoefficientField {
    drift: Field,
    vol: Field,
    constant: Option<(f64, f64)>,
}

impl std::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.constant {
            Some((mu, sigma)) => write!(f, "CoefficientField(mu={mu}, sigma={sigma})"),
            None => write!(f, "CoefficientField(<functions>)"),
        }
    }
}

impl CoefficientField {
    pub fn new<D, V>(drift_of: D, vol_of: V) -> Self
    where
        D: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            drift: Box::new(drift_of),
            vol: Box::new(vol_of),
            constant: None,
        }
    }

    pub fn constant(mu: f64, sigma: f64) -> Self {
        Self {
            drift: Box::new(move |_, _| mu),
            vol: Box::new(move |_, _| sigma),
            constant: Some((mu, sigma)),
        }
    }

    /// Constant coefficients drifting at `params.mu`.
    pub fn from_params(params: &MarketParams) -> Self {
        Self::constant(params.mu, params.sigma)
    }

    pub fn drift_of(&self, x: f64, t: f64) -> f64 {
        (self.drift)(x, t)
    }

    pub fn vol_of(&self, x: f64, t: f64) -> f64 {
        (self.vol)(x, t)
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }
}

/// Uniform grid of `n` nodes on `[x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, n: usize) -> Result<Self> {
        if n < MIN_GRID_POINTS {
            return Err(Error::Argument(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {n}"
            )));
        }
        if !(x_lo.is_finite() && x_hi.is_finite() && x_hi > x_lo) {
            return Err(Error::Argument(format!(
                "invalid grid bounds [{x_lo}, {x_hi}]"
            )));
        }
        Ok(Self { x_lo, x_hi, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight (control-volume width) of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i == self.n - 1 {
            0.5 * h
        } else {
            h
        }
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| self.weight(i) * v)
            .sum()
    }

    /// Four-point Lagrange interpolation at `x`.
    pub fn interpolate_cubic(&self, values: &[f64], x: f64) -> Result<f64> {
        if !(x >= self.x_lo && x <= self.x_hi) {
            return Err(Error::Argument(format!(
                "x = {x} outside grid [{}, {}]",
                self.x_lo, self.x_hi
            )));
        }
        let h = self.spacing();
        let s = (x - self.x_lo) / h;
        let nearest = s.round();
        if (s - nearest).abs() < 1e-12 {
            return Ok(values[nearest as usize]);
        }
        let i = (s.floor() as usize).clamp(1, self.n - 3);
        let t = s - i as f64;
        // nodes at offsets -1, 0, 1, 2 from i
        let (a, b, c, d) = (values[i - 1], values[i], values[i + 1], values[i + 2]);
        Ok(
            -t * (t - 1.0) * (t - 2.0) / 6.0 * a + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * b
                - (t + 1.0) * t * (t - 2.0) / 2.0 * c
                + (t + 1.0) * t * (t - 1.0) / 6.0 * d,
        )
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.x_lo == other.x_lo && self.x_hi == other.x_hi && self.n == other.n
    }
}

/// Probability density of the log price on a uniform grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityGrid {
    /// Values must integrate to one within `MASS_TOLERANCE`; they are then
    /// rescaled to unit mass.
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        check_values(&grid, &values)?;
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            return Err(Error::Argument(format!(
                "density values must be non-negative, got {v}"
            )));
        }
        let mass = grid.integrate(&values);
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Argument(format!(
                "density integrates to {mass}, not 1"
            )));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(Self { grid, values, time })
    }

    /// Samples and normalizes a non-negative function.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, time: f64, f: F) -> Result<Self> {
        let values: Vec<f64> = grid.nodes().into_iter().map(f).collect();
        check_values(&grid, &values)?;
        let mass = grid.integrate(&values);
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Argument(format!(
                "cannot normalize density with mass {mass}"
            )));
        }
        Self::new(grid, values.into_iter().map(|v| v / mass).collect(), time)
    }

    pub fn gaussian(grid: Grid, time: f64, mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(Error::Argument(format!("std must be positive, got {std}")));
        }
        Self::from_fn(grid, time, |x| {
            let z = (x - mean) / std;
            (-0.5 * z * z).exp()
        })
    }

    /// Stand-in for a point mass at `x0`: a Gaussian one grid spacing wide.
    pub fn near_delta(grid: Grid, time: f64, x0: f64) -> Result<Self> {
        Self::gaussian(grid, time, x0, grid.spacing())
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn mean(&self) -> f64 {
        let xs = self.grid.nodes();
        let m: Vec<f64> = xs.iter().zip(&self.values).map(|(x, p)| x * p).collect();
        self.grid.integrate(&m) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let xs = self.grid.nodes();
        let m: Vec<f64> = xs
            .iter()
            .zip(&self.values)
            .map(|(x, p)| (x - mean) * (x - mean) * p)
            .collect();
        self.grid.integrate(&m) / self.mass()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Trapezoid L1 distance to a reference density.
    pub fn l1_distance<F: Fn(f64) -> f64>(&self, reference: F) -> f64 {
        let diff: Vec<f64> = self
            .grid
            .nodes()
            .into_iter()
            .zip(&self.values)
            .map(|(x, p)| (p - reference(x)).abs())
            .collect();
        self.grid.integrate(&diff)
    }

    /// Mass held by the outermost nodes on either side.
    pub fn edge_mass(&self) -> f64 {
        let k = (self.grid.n / 50).max(2);
        let n = self.grid.n;
        (0..k)
            .chain(n - k..n)
            .map(|i| self.grid.weight(i) * self.values[i])
            .sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_grid_csv(out, &self.grid, &self.values, self.time)
    }
}

/// Terminal payoff the backward solver is evolving, if known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffKind {
    pub style: OptionStyle,
    pub strike: f64,
}

impl PayoffKind {
    pub fn at(&self, s: f64) -> f64 {
        match self.style {
            OptionStyle::Call => (s - self.strike).max(0.0),
            OptionStyle::Put => (self.strike - s).max(0.0),
        }
    }

    /// Undiscounted value far from the strike, where `S_T` is effectively
    /// certain to finish on one side: the intrinsic value of the forward.
    fn asymptote(&self, s: f64, growth: f64) -> f64 {
        self.at(s * growth)
    }
}

/// Value (undiscounted expected payoff) on a log-price grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
    pub payoff: Option<PayoffKind>,
    /// Non-fatal findings from the solver (boundary mismatch, monotonicity).
    pub diagnostics: Vec<String>,
}

impl ValueGrid {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        check_values(&grid, &values)?;
        Ok(Self {
            grid,
            values,
            time,
            payoff: None,
            diagnostics: Vec::new(),
        })
    }

    /// Payoff sampled at the nodes; at expiry the grid equals it exactly.
    pub fn from_payoff(grid: Grid, payoff: PayoffKind, expiry: f64) -> Result<Self> {
        if !(payoff.strike >= 0.0 && payoff.strike.is_finite()) {
            return Err(Error::Argument(format!(
                "strike must be >= 0, got {}",
                payoff.strike
            )));
        }
        let values = grid
            .nodes()
            .into_iter()
            .map(|x| payoff.at(x.exp()))
            .collect();
        let mut v = Self::new(grid, values, expiry)?;
        v.payoff = Some(payoff);
        Ok(v)
    }

    pub fn at(&self, x: f64) -> Result<f64> {
        self.grid.interpolate_cubic(&self.values, x)
    }

    /// Checks the ordering a call (put) value must have in `x`.
    pub fn monotonicity_violation(&self) -> Option<String> {
        let payoff = self.payoff?;
        let tol = 1e-9 * self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let bad = self.values.windows(2).position(|w| match payoff.style {
            OptionStyle::Call => w[1] < w[0] - tol,
            OptionStyle::Put => w[1] > w[0] + tol,
        })?;
        Some(format!(
            "{:?} value not monotone between x = {} and x = {}",
            payoff.style,
            self.grid.x(bad),
            self.grid.x(bad + 1)
        ))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_grid_csv(out, &self.grid, &self.values, self.time)
    }
}

fn check_values(grid: &Grid, values: &[f64]) -> Result<()> {
    if values.len() != grid.n {
        return Err(Error::Argument(format!(
            "{} values for a grid of {} points",
            values.len(),
            grid.n
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Argument(format!("non-finite grid value {v}")));
    }
    Ok(())
}

fn write_grid_csv<W: Write>(mut out: W, grid: &Grid, values: &[f64], time: f64) -> io::Result<()> {
    writeln!(
        out,
        "# time={} x_lo={} x_hi={} n={}",
        time, grid.x_lo, grid.x_hi, grid.n
    )?;
    writeln!(out, "x,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{},{}", fmt_real(grid.x(i)), fmt_real(*v))?;
    }
    out.flush()
}

/// Forward operator `A` at time `t`, so that `W dp/dt = A p`.
///
/// Face flux `F_{i+½} = a (p_i + p_{i+1})/2 - (D_{i+1} p_{i+1} - D_i p_i)/(2h)`
/// with `a = μ - σ²/2` at the face and `D = σ²` at the nodes; the advective
/// part is upwinded where the cell Péclet number exceeds 2.
fn assemble(grid: &Grid, coeffs: &CoefficientField, t: f64) -> Result<Tridiagonal> {
    let n = grid.n;
    let h = grid.spacing();
    let mut diff = Vec::with_capacity(n);
    for i in 0..n {
        let x = grid.x(i);
        let sigma = coeffs.vol_of(x, t);
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Coefficient { x, t, vol: sigma });
        }
        diff.push(sigma * sigma);
    }
    let mut a = Tridiagonal::zeros(n);
    for i in 0..n - 1 {
        let xf = grid.x_lo + (i as f64 + 0.5) * h;
        let sigma_f = coeffs.vol_of(xf, t);
        if !(sigma_f.is_finite() && sigma_f > 0.0) {
            return Err(Error::Coefficient {
                x: xf,
                t,
                vol: sigma_f,
            });
        }
        let adv = coeffs.drift_of(xf, t) - 0.5 * sigma_f * sigma_f;
        if !adv.is_finite() {
            return Err(Error::Scheme(format!(
                "non-finite drift at x = {xf}, t = {t}"
            )));
        }
        let face_diff = 0.5 * (diff[i] + diff[i + 1]);
        let peclet = adv.abs() * h / (0.5 * face_diff);
        let (wl, wr) = if peclet > PECLET_UPWIND {
            if adv > 0.0 {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            }
        } else {
            (0.5, 0.5)
        };
        let fl = adv * wl + diff[i] / (2.0 * h);
        let fr = adv * wr - diff[i + 1] / (2.0 * h);
        // row i loses F, row i+1 gains it
        a.diag[i] -= fl;
        a.upper[i] -= fr;
        a.lower[i + 1] += fl;
        a.diag[i + 1] += fr;
    }
    Ok(a)
}

/// Largest step for which the explicit half of Crank-Nicolson keeps a
/// non-negative density non-negative at time `t`.
pub fn positivity_step_bound(grid: &Grid, coeffs: &CoefficientField, t: f64) -> Result<f64> {
    let a = assemble(grid, coeffs, t)?;
    let mut bound = f64::INFINITY;
    for i in 0..grid.n {
        if a.diag[i] < 0.0 {
            bound = bound.min(2.0 * grid.weight(i) / -a.diag[i]);
        }
    }
    Ok(bound)
}

/// Evolves a density forward to `t_final` in `n_steps` Crank-Nicolson steps.
pub fn evolve_forward(
    density: &DensityGrid,
    coeffs: &CoefficientField,
    t_final: f64,
    n_steps: usize,
) -> Result<DensityGrid> {
    if !(t_final > density.time) {
        return Err(Error::Argument(format!(
            "t_final = {t_final} must exceed the density time {}",
            density.time
        )));
    }
    if n_steps == 0 {
        return Err(Error::Argument("n_steps must be at least 1".into()));
    }
    let grid = density.grid;
    let dt = (t_final - density.time) / n_steps as f64;
    let mass0 = density.mass();
    let mut p = density.values.clone();
    let mut rhs = vec![0.0; grid.n];
    let mut scratch = Vec::new();
    let mut cached: Option<(Tridiagonal, Tridiagonal)> = None;
    for step in 0..n_steps {
        let t_mid = density.time + (step as f64 + 0.5) * dt;
        if cached.is_none() || !coeffs.is_constant() {
            let a = assemble(&grid, coeffs, t_mid)?;
            cached = Some(crank_nicolson_pair(&grid, &a, dt));
        }
        let (implicit, explicit) = cached.as_ref().expect("assembled above");
        explicit.mul_vec(&p, &mut rhs);
        implicit
            .solve_in_place(&mut rhs, &mut scratch)
            .ok_or_else(|| Error::Scheme("singular Crank-Nicolson system".into()))?;
        std::mem::swap(&mut p, &mut rhs);
    }
    let out = DensityGrid {
        grid,
        values: p,
        time: t_final,
    };
    let drift = (out.mass() - mass0).abs();
    if drift > MASS_TOLERANCE * (t_final - density.time).max(1.0) {
        return Err(Error::Scheme(format!(
            "probability mass drifted by {drift:e}"
        )));
    }
    let leaked = out.edge_mass();
    if leaked > LEAKAGE_TOLERANCE {
        return Err(Error::BoundaryTruncation { leaked });
    }
    Ok(out)
}

/// `(W - dt/2 A, W + dt/2 A)`.
fn crank_nicolson_pair(grid: &Grid, a: &Tridiagonal, dt: f64) -> (Tridiagonal, Tridiagonal) {
    let mut implicit = a.clone();
    let mut explicit = a.clone();
    for i in 0..grid.n {
        let w = grid.weight(i);
        implicit.lower[i] *= -0.5 * dt;
        implicit.diag[i] = w - 0.5 * dt * a.diag[i];
        implicit.upper[i] *= -0.5 * dt;
        explicit.lower[i] *= 0.5 * dt;
        explicit.diag[i] = w + 0.5 * dt * a.diag[i];
        explicit.upper[i] *= 0.5 * dt;
    }
    (implicit, explicit)
}

/// Evolves an expected payoff backward from `value_at_T.time` to `t_start`.
///
/// With a declared payoff the end nodes hold the forward's intrinsic value
/// `max(±(S e^{μ τ} - K), 0)`; otherwise the end rows are the adjoint of the
/// zero-flux walls. Values are undiscounted.
pub fn evolve_backward_value(
    value_at_t: &ValueGrid,
    coeffs: &CoefficientField,
    t_start: f64,
    n_steps: usize,
) -> Result<ValueGrid> {
    let t_end = value_at_t.time;
    if !(t_start < t_end) {
        return Err(Error::Argument(format!(
            "t_start = {t_start} must precede the value time {t_end}"
        )));
    }
    if n_steps == 0 {
        return Err(Error::Argument("n_steps must be at least 1".into()));
    }
    let grid = value_at_t.grid;
    let n = grid.n;
    let dt = (t_end - t_start) / n_steps as f64;
    let mut out = value_at_t.clone();
    out.diagnostics.clear();

    if let Some(payoff) = value_at_t.payoff {
        let (lo, hi) = (grid.x_lo.exp(), grid.x_hi.exp());
        let tol = 1e-9 * payoff.strike.max(hi);
        if (value_at_t.values[0] - payoff.at(lo)).abs() > tol
            || (value_at_t.values[n - 1] - payoff.at(hi)).abs() > tol
        {
            out.diagnostics
                .push("terminal values at the grid ends differ from the declared payoff".into());
        }
    }

    let mut v = value_at_t.values.clone();
    let mut rhs = vec![0.0; n];
    let mut scratch = Vec::new();
    let mut cached: Option<(Tridiagonal, Tridiagonal)> = None;
    for step in 0..n_steps {
        let t_hi = t_end - step as f64 * dt;
        let t_lo = t_hi - dt;
        let t_mid = t_hi - 0.5 * dt;
        if cached.is_none() || !coeffs.is_constant() {
            let a = assemble(&grid, coeffs, t_mid)?.transpose();
            cached = Some(crank_nicolson_pair(&grid, &a, dt));
        }
        let (implicit, explicit) = cached.as_ref().expect("assembled above");
        explicit.mul_vec(&v, &mut rhs);
        match value_at_t.payoff {
            Some(payoff) => {
                let mut sys = implicit.clone();
                let tau = t_end - t_lo;
                for (i, x) in [(0, grid.x_lo), (n - 1, grid.x_hi)] {
                    let growth = (coeffs.drift_of(x, t_lo) * tau).exp();
                    sys.lower[i] = 0.0;
                    sys.upper[i] = 0.0;
                    sys.diag[i] = 1.0;
                    rhs[i] = payoff.asymptote(x.exp(), growth);
                }
                sys.solve_in_place(&mut rhs, &mut scratch)
            }
            None => implicit.solve_in_place(&mut rhs, &mut scratch),
        }
        .ok_or_else(|| Error::Scheme("singular Crank-Nicolson system".into()))?;
        std::mem::swap(&mut v, &mut rhs);
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::Scheme(format!(
                "non-finite value {bad} after step {step}"
            )));
        }
    }
    out.values = v;
    out.time = t_start;
    if let Some(msg) = out.monotonicity_violation() {
        out.diagnostics.push(msg);
    }
    Ok(out)
}

/// `Σ w_i p_i V_i`.
pub fn pairing(density: &DensityGrid, value: &ValueGrid) -> Result<f64> {
    if !density.grid.same_as(&value.grid) {
        return Err(Error::Argument(
            "density and value live on different grids".into(),
        ));
    }
    let prod: Vec<f64> = density
        .values
        .iter()
        .zip(&value.values)
        .map(|(p, v)| p * v)
        .collect();
    Ok(density.grid.integrate(&prod))
}

/// Steps `density` forward from its time to `value.time`, steps `value`
/// back to the density's time (without payoff boundaries), and returns how
/// much the pairing `∫ p V dx` changed.
pub fn adjoint_consistency_check(
    density: &DensityGrid,
    value: &ValueGrid,
    coeffs: &CoefficientField,
) -> Result<f64> {
    if !density.grid.same_as(&value.grid) {
        return Err(Error::Argument(
            "density and value live on different grids".into(),
        ));
    }
    if !coeffs.is_constant() {
        return Err(Error::Argument(
            "adjoint check requires constant coefficients".into(),
        ));
    }
    let p_later = evolve_forward(density, coeffs, value.time, 1)?;
    let mut natural = value.clone();
    natural.payoff = None;
    let v_earlier = evolve_backward_value(&natural, coeffs, density.time, 1)?;
    let before = pairing(density, &v_earlier)?;
    let after = pairing(&p_later, value)?;
    Ok((after - before).abs())
}
