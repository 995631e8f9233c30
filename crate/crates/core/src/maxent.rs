//! Maximum-entropy inference for log-price transitions.
//!
//! Scale invariance singles out the log price as the variable whose
//! distribution is unchanged under a change of currency units. Updating a
//! prior under a second-moment (continuity) constraint and a first-moment
//! (drift) constraint yields an exponential-family density
//! `p(x) ∝ q(x) exp(-α x²/2 + β x)` in the log return `x = ln(S'/S)`.
//! This module evaluates that posterior in closed form and also recovers
//! `(α, β)` numerically from target moments by Newton's method on the dual.

use std::f64::consts::PI;

use crate::dynamics::{GaussianKernel, MarketParams};
use crate::error::{domain, Error, Result};

/// Default absolute tolerance on the moment residuals in [`solve_dual`].
pub const DEFAULT_DUAL_TOL: f64 = 1e-10;
/// Iteration cap for the Newton solver.
pub const MAX_NEWTON_ITERATIONS: usize = 100;
/// Step shrink factor used during backtracking.
pub const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

/// Natural log of a positive price.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogPrice(f64);

impl LogPrice {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn price(self) -> f64 {
        self.0.exp()
    }
}

/// Maps a price to its log price.
pub fn log_transform(price: f64) -> Result<LogPrice> {
    if !(price.is_finite() && price > 0.0) {
        return Err(domain(format!(
            "price must be positive and finite, got {price}"
        )));
    }
    Ok(LogPrice(price.ln()))
}

/// Shift `C(l)` induced on the log price by rescaling all prices by `l`.
///
/// Satisfies `C(l) + C(l') = C(l l')`.
pub fn scale_shift(scale_factor: f64) -> Result<f64> {
    if !(scale_factor.is_finite() && scale_factor > 0.0) {
        return Err(domain(format!(
            "scale factor must be positive and finite, got {scale_factor}"
        )));
    }
    Ok(scale_factor.ln())
}

/// Targets for `⟨x²⟩` and `⟨x⟩` of the log return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSpec {
    pub second_moment_k: f64,
    pub first_moment_kprime: f64,
}

impl ConstraintSpec {
    pub fn new(second_moment_k: f64, first_moment_kprime: f64) -> Result<Self> {
        if !(second_moment_k.is_finite() && first_moment_kprime.is_finite()) {
            return Err(domain("moment targets must be finite"));
        }
        if second_moment_k < 0.0 {
            return Err(domain(format!(
                "second moment must be non-negative, got {second_moment_k}"
            )));
        }
        Ok(Self {
            second_moment_k,
            first_moment_kprime,
        })
    }

    /// Moments of a Gaussian log return with the given mean and variance.
    pub fn from_mean_variance(mean: f64, variance: f64) -> Result<Self> {
        Self::new(variance + mean * mean, mean)
    }

    pub fn variance(&self) -> f64 {
        self.second_moment_k - self.first_moment_kprime * self.first_moment_kprime
    }

    fn check_feasible(&self) -> Result<()> {
        let first_sq = self.first_moment_kprime * self.first_moment_kprime;
        if self.second_moment_k <= first_sq {
            return Err(Error::Infeasible {
                second: self.second_moment_k,
                first_sq,
            });
        }
        Ok(())
    }
}

/// Lagrange multipliers of the maxent posterior and its log normalizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxEntSolution {
    /// Precision multiplier (inverse variance of the log return).
    pub alpha: f64,
    /// Multiplier on the first moment; the mean log return is `beta / alpha`.
    pub beta: f64,
    /// `ln Z`, relative to whatever base measure the solution was built on.
    pub log_normalizer: f64,
}

impl MaxEntSolution {
    pub fn mean_shift(&self) -> f64 {
        self.beta / self.alpha
    }

    pub fn variance(&self) -> f64 {
        1.0 / self.alpha
    }

    /// The second-moment target `k = 1/α + (β/α)²` this solution satisfies.
    pub fn implied_constraints(&self) -> ConstraintSpec {
        let m = self.mean_shift();
        ConstraintSpec {
            second_moment_k: self.variance() + m * m,
            first_moment_kprime: m,
        }
    }

    /// Gaussian transition kernel once the elapsed time is known.
    pub fn kernel(&self, dt: f64) -> Result<GaussianKernel> {
        GaussianKernel::new(self.mean_shift(), self.variance(), dt)
    }
}

/// Posterior `exp(-α x²/2 + β x) / Z` against Lebesgue measure.
///
/// Completing the square gives a Gaussian with mean `β/α` and variance `1/α`,
/// and `ln Z = ½ ln(2π/α) + β²/(2α)`.
pub fn closed_form_posterior(alpha: f64, beta: f64) -> Result<MaxEntSolution> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(domain(format!("alpha must be positive, got {alpha}")));
    }
    if !beta.is_finite() {
        return Err(domain("beta must be finite"));
    }
    Ok(MaxEntSolution {
        alpha,
        beta,
        log_normalizer: 0.5 * (2.0 * PI / alpha).ln() + beta * beta / (2.0 * alpha),
    })
}

/// Multipliers implied by market parameters over a step `dt`:
/// `α = 1/(σ² dt)` and `β = μ/σ² - 1/2`.
pub fn multipliers_from_market(params: &MarketParams, dt: f64) -> Result<MaxEntSolution> {
    let sigma = params.sigma;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(domain(format!("dt must be positive, got {dt}")));
    }
    let var = sigma * sigma;
    closed_form_posterior(1.0 / (var * dt), params.mu / var - 0.5)
}

/// Moment targets of the log return over `dt`: mean `(μ - σ²/2) dt`,
/// variance `σ² dt`.
pub fn market_constraints(params: &MarketParams, dt: f64) -> Result<ConstraintSpec> {
    params.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(domain(format!("dt must be positive, got {dt}")));
    }
    ConstraintSpec::from_mean_variance(params.log_drift() * dt, params.sigma * params.sigma * dt)
}

/// Half-width, in target standard deviations, of the base grid used by
/// [`fit_market`].
pub const MARKET_FIT_HALF_WIDTH: f64 = 10.0;
pub const MARKET_FIT_POINTS: usize = 2001;

/// Numerical counterpart of [`multipliers_from_market`]: solves the dual
/// against a flat base on a grid of ±10 target standard deviations.
pub fn fit_market(params: &MarketParams, dt: f64, tol: f64) -> Result<DualFit> {
    let c = market_constraints(params, dt)?;
    let (m, s) = (c.first_moment_kprime, c.variance().sqrt());
    let half = MARKET_FIT_HALF_WIDTH * s;
    let base = DiscretizedDensity::uniform(m - half, m + half, MARKET_FIT_POINTS)?;
    solve_dual(&c, &base, tol)
}

/// A probability density sampled on a uniform grid, normalized under the
/// composite trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedDensity {
    grid_lo: f64,
    grid_hi: f64,
    weights: Vec<f64>,
}

const NORMALIZATION_SLACK: f64 = 1e-6;

impl DiscretizedDensity {
    /// Accepts weights whose trapezoid integral is within 1e-6 of one and
    /// rescales them to unit mass.
    pub fn new(grid_lo: f64, grid_hi: f64, weights: Vec<f64>) -> Result<Self> {
        let raw = Self::unchecked(grid_lo, grid_hi, weights)?;
        let mass = raw.integrate(|_, w| w);
        if (mass - 1.0).abs() > NORMALIZATION_SLACK {
            return Err(Error::Argument(format!(
                "weights integrate to {mass}, not 1; use from_unnormalized for unnormalized input"
            )));
        }
        Ok(raw.scaled(1.0 / mass))
    }

    /// Samples `f` on `n_points` nodes and normalizes it explicitly.
    pub fn from_unnormalized<F: Fn(f64) -> f64>(
        grid_lo: f64,
        grid_hi: f64,
        n_points: usize,
        f: F,
    ) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::Argument(format!(
                "need at least 3 grid points, got {n_points}"
            )));
        }
        let h = (grid_hi - grid_lo) / (n_points - 1) as f64;
        let weights = (0..n_points).map(|i| f(grid_lo + i as f64 * h)).collect();
        let raw = Self::unchecked(grid_lo, grid_hi, weights)?;
        let mass = raw.integrate(|_, w| w);
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Argument(format!(
                "cannot normalize density with mass {mass}"
            )));
        }
        Ok(raw.scaled(1.0 / mass))
    }

    pub fn uniform(grid_lo: f64, grid_hi: f64, n_points: usize) -> Result<Self> {
        Self::from_unnormalized(grid_lo, grid_hi, n_points, |_| 1.0)
    }

    /// Discretized normal density.
    pub fn gaussian(
        grid_lo: f64,
        grid_hi: f64,
        n_points: usize,
        mean: f64,
        std: f64,
    ) -> Result<Self> {
        if !(std > 0.0) {
            return Err(domain(format!("std must be positive, got {std}")));
        }
        Self::from_unnormalized(grid_lo, grid_hi, n_points, |x| {
            let z = (x - mean) / std;
            (-0.5 * z * z).exp()
        })
    }

    fn unchecked(grid_lo: f64, grid_hi: f64, weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 3 {
            return Err(Error::Argument(format!(
                "need at least 3 grid points, got {}",
                weights.len()
            )));
        }
        if !(grid_lo.is_finite() && grid_hi.is_finite() && grid_hi > grid_lo) {
            return Err(Error::Argument(format!(
                "invalid grid [{grid_lo}, {grid_hi}]"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Argument(format!(
                "weights must be finite and non-negative, got {w}"
            )));
        }
        Ok(Self {
            grid_lo,
            grid_hi,
            weights,
        })
    }

    fn scaled(mut self, factor: f64) -> Self {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self
    }

    pub fn grid_lo(&self) -> f64 {
        self.grid_lo
    }

    pub fn grid_hi(&self) -> f64 {
        self.grid_hi
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        (self.grid_hi - self.grid_lo) / (self.weights.len() - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.grid_lo + i as f64 * self.spacing()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.grid_lo == other.grid_lo
            && self.grid_hi == other.grid_hi
            && self.weights.len() == other.weights.len()
    }

    /// Trapezoid rule for `∫ g(x, p(x)) dx`.
    pub fn integrate<G: Fn(f64, f64) -> f64>(&self, g: G) -> f64 {
        let n = self.weights.len();
        let h = self.spacing();
        let mut s = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            let c = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            s += c * g(self.x(i), w);
        }
        s * h
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|x, p| x * p)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.integrate(|x, p| (x - m) * (x - m) * p)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Relative entropy `S[p, q] = -∫ p ln(p/q)`; never positive.
pub fn relative_entropy(p: &DiscretizedDensity, q: &DiscretizedDensity) -> Result<f64> {
    if !p.same_grid(q) {
        return Err(Error::Argument(
            "p and q are defined on different grids".into(),
        ));
    }
    let n = p.n_points();
    let mut s = 0.0;
    for i in 0..n {
        let (pi, qi) = (p.weights[i], q.weights[i]);
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::Support { x: p.x(i) });
        }
        let c = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        s += c * pi * (pi / qi).ln();
    }
    Ok(-s * p.spacing())
}

/// Result of a numerical maxent fit.
#[derive(Debug, Clone)]
pub struct DualFit {
    pub solution: MaxEntSolution,
    /// The fitted density on the base grid.
    pub density: DiscretizedDensity,
    pub iterations: usize,
    /// `(⟨x²⟩ - k, ⟨x⟩ - k')` under the fitted density.
    pub residual: [f64; 2],
}

/// Moments of `base · exp(-α x²/2 + β x)` on the base grid.
struct Tilted {
    log_z: f64,
    density: Vec<f64>,
    m1: f64,
    m2: f64,
    // Covariance of the features (-x²/2, x).
    cov: [[f64; 2]; 2],
}

fn tilt(base: &DiscretizedDensity, alpha: f64, beta: f64) -> Tilted {
    let n = base.n_points();
    let h = base.spacing();
    let coef = |i: usize| if i == 0 || i == n - 1 { 0.5 * h } else { h };
    let logs: Vec<f64> = (0..n)
        .map(|i| {
            let b = base.weights[i];
            if b > 0.0 {
                let x = base.x(i);
                b.ln() - 0.5 * alpha * x * x + beta * x
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut density: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = (0..n).map(|i| coef(i) * density[i]).sum();
    density.iter_mut().for_each(|d| *d /= z);

    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (i, d) in density.iter().enumerate() {
        let x = base.x(i);
        m1 += coef(i) * d * x;
        m2 += coef(i) * d * x * x;
    }
    let (mut vxx, mut vqq, mut vqx) = (0.0, 0.0, 0.0);
    for (i, d) in density.iter().enumerate() {
        let x = base.x(i);
        let dx = x - m1;
        let dq = x * x - m2;
        let w = coef(i) * d;
        vxx += w * dx * dx;
        vqq += w * dq * dq;
        vqx += w * dq * dx;
    }
    Tilted {
        log_z: top + z.ln(),
        density,
        m1,
        m2,
        cov: [[0.25 * vqq, -0.5 * vqx], [-0.5 * vqx, vxx]],
    }
}

/// Recovers `(α, β)` such that `base · exp(-α x²/2 + β x) / Z` matches the
/// target moments, by damped Newton iteration on the convex dual
/// `ln Z(α, β) + α k/2 - β k'`.
pub fn solve_dual(
    constraints: &ConstraintSpec,
    base: &DiscretizedDensity,
    tol: f64,
) -> Result<DualFit> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    constraints.check_feasible()?;
    let k = constraints.second_moment_k;
    let kp = constraints.first_moment_kprime;

    // Gaussian guess: exact when the base itself is Gaussian.
    let target_var = constraints.variance();
    let (mb, vb) = (base.mean(), base.variance());
    let mut theta = [1.0 / target_var - 1.0 / vb, kp / target_var - mb / vb];

    let dual = |t: &Tilted, th: &[f64; 2]| t.log_z + 0.5 * th[0] * k - th[1] * kp;
    let mut cur = tilt(base, theta[0], theta[1]);
    for iteration in 0..=MAX_NEWTON_ITERATIONS {
        let residual = [cur.m2 - k, cur.m1 - kp];
        if residual[0].abs() <= tol && residual[1].abs() <= tol {
            let solution = MaxEntSolution {
                alpha: theta[0],
                beta: theta[1],
                log_normalizer: cur.log_z,
            };
            let density = DiscretizedDensity {
                grid_lo: base.grid_lo,
                grid_hi: base.grid_hi,
                weights: cur.density,
            };
            return Ok(DualFit {
                solution,
                density,
                iterations: iteration,
                residual,
            });
        }
        if iteration == MAX_NEWTON_ITERATIONS {
            break;
        }
        // gradient of the dual with respect to (α, β)
        let g = [0.5 * (k - cur.m2), cur.m1 - kp];
        let step = newton_step(&cur.cov, &g).ok_or_else(|| Error::Convergence {
            iterations: iteration,
            residual: residual[0].abs().max(residual[1].abs()),
        })?;
        let decrement = -(g[0] * step[0] + g[1] * step[1]);
        let d0 = dual(&cur, &theta);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = [theta[0] + t * step[0], theta[1] + t * step[1]];
            let next = tilt(base, trial[0], trial[1]);
            let d1 = dual(&next, &trial);
            let armijo = d1.is_finite() && d1 <= d0 - 1e-4 * t * decrement;
            // Near the optimum the dual decrease drowns in rounding; fall back
            // to the Newton decrement, which is scale free.
            let g_next = [0.5 * (k - next.m2), next.m1 - kp];
            let smaller_gradient = newton_step(&next.cov, &g_next)
                .map(|s| -(g_next[0] * s[0] + g_next[1] * s[1]) < decrement)
                .unwrap_or(false);
            if armijo || smaller_gradient {
                accepted = Some((trial, next));
                break;
            }
            t *= BACKTRACK_FACTOR;
        }
        match accepted {
            Some((trial, next)) => {
                theta = trial;
                cur = next;
            }
            None => {
                return Err(Error::Convergence {
                    iterations: iteration,
                    residual: residual[0].abs().max(residual[1].abs()),
                })
            }
        }
    }
    Err(Error::Convergence {
        iterations: MAX_NEWTON_ITERATIONS,
        residual: (cur.m2 - k).abs().max((cur.m1 - kp).abs()),
    })
}

/// Solves `H s = -g` for the 2x2 covariance `H`.
fn newton_step(h: &[[f64; 2]; 2], g: &[f64; 2]) -> Option<[f64; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if !(det.is_finite() && det > 0.0) {
        return None;
    }
    Some([
        -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
        -(h[0][0] * g[1] - h[1][0] * g[0]) / det,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fit_market_matches_closed_form() {
        let p = MarketParams::new(0.05, 0.2, 0.0).unwrap();
        let fit = fit_market(&p, 1.0 / 252.0, 1e-14).unwrap();
        let exact = multipliers_from_market(&p, 1.0 / 252.0).unwrap();
        assert!(((fit.solution.alpha - exact.alpha) / exact.alpha).abs() < 1e-6);
        assert!(((fit.solution.beta - exact.beta) / exact.beta).abs() < 1e-6);
        assert!(fit_market(&p, 0.0, 1e-12).is_err());
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn log_transform_examples() {
        assert_eq!(log_transform(1.0).unwrap().value(), 0.0);
        assert!((log_transform(std::f64::consts::E).unwrap().value() - 1.0).abs() < 1e-15);
        assert!((log_transform(100.0).unwrap().value() - 4.605_170_185_988_092).abs() < 1e-15);
        assert!(log_transform(0.0).is_err());
        assert!(log_transform(-3.0).is_err());
        assert!(log_transform(f64::INFINITY).is_err());
        assert!(log_transform(f64::NAN).is_err());
        let p = 123.456;
        assert!(rel(log_transform(p).unwrap().price(), p) < 4.0 * f64::EPSILON);
    }

    #[test]
    fn scale_shift_examples() {
        assert_eq!(scale_shift(1.0).unwrap(), 0.0);
        let lhs = scale_shift(2.0).unwrap() + scale_shift(3.0).unwrap();
        assert!((lhs - scale_shift(6.0).unwrap()).abs() < 1e-15);
        assert!((scale_shift(10.0).unwrap() - std::f64::consts::LN_10).abs() < 1e-15);
        assert!(scale_shift(0.0).is_err());
        assert!(scale_shift(-1.0).is_err());
    }

    #[test]
    fn scale_shift_functional_equation() {
        // Deterministic sweep of 1000 factor pairs over several decades.
        for i in 0..1000 {
            let l = 10f64.powf(-3.0 + 6.0 * ((i * 7919) % 1000) as f64 / 1000.0);
            let lp = 10f64.powf(-3.0 + 6.0 * ((i * 104_729) % 997) as f64 / 997.0);
            let lhs = scale_shift(l).unwrap() + scale_shift(lp).unwrap();
            let rhs = scale_shift(l * lp).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "l={l} l'={lp}");
        }
    }

    #[test]
    fn relative_entropy_examples() {
        let g = |m: f64, s: f64| DiscretizedDensity::gaussian(-14.0, 14.0, 4001, m, s).unwrap();
        let p = g(0.3, 0.8);
        assert!(relative_entropy(&p, &p).unwrap().abs() < 1e-12);
        // KL(N(0,1) || N(0,2)) = ½(½ + ln 2 - 1)
        let s = relative_entropy(&g(0.0, 1.0), &g(0.0, 2f64.sqrt())).unwrap();
        assert!((s + 0.096_573_590_279_972_65).abs() < 1e-10, "{s}");
        // KL for a pure mean shift is shift²/2
        let s = relative_entropy(&g(0.5, 1.0), &g(0.0, 1.0)).unwrap();
        assert!((s + 0.125).abs() < 1e-10, "{s}");
    }

    #[test]
    fn relative_entropy_errors() {
        let p = DiscretizedDensity::uniform(0.0, 1.0, 11).unwrap();
        let other = DiscretizedDensity::uniform(0.0, 1.0, 12).unwrap();
        assert!(matches!(
            relative_entropy(&p, &other),
            Err(Error::Argument(_))
        ));
        let q =
            DiscretizedDensity::from_unnormalized(
                0.0,
                1.0,
                11,
                |x| if x < 0.5 { 0.0 } else { 1.0 },
            )
            .unwrap();
        assert!(matches!(
            relative_entropy(&p, &q),
            Err(Error::Support { .. })
        ));
        // the reverse direction is fine: p = 0 wherever q = 0 is allowed
        assert!(relative_entropy(&q, &p).unwrap() <= 0.0);
    }

    #[test]
    fn density_construction_rules() {
        let h = 1.0 / 10.0;
        let mut w = vec![1.0; 11];
        assert!(DiscretizedDensity::new(0.0, 1.0, w.clone()).is_ok());
        w[3] += 0.1 / h;
        assert!(DiscretizedDensity::new(0.0, 1.0, w.clone()).is_err());
        assert!(DiscretizedDensity::new(0.0, 1.0, vec![1.0, 1.0]).is_err());
        assert!(DiscretizedDensity::new(0.0, 1.0, vec![1.0, -1.0, 3.0]).is_err());
        let d = DiscretizedDensity::new(0.0, 1.0, vec![1.0 + 5e-7; 11]).unwrap();
        assert!((d.integrate(|_, p| p) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn closed_form_posterior_examples() {
        let s = closed_form_posterior(1.0, 0.0).unwrap();
        assert_eq!((s.mean_shift(), s.variance()), (0.0, 1.0));
        assert!((s.log_normalizer - 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        let s = closed_form_posterior(4.0, 2.0).unwrap();
        assert_eq!((s.mean_shift(), s.variance()), (0.5, 0.25));
        let params = MarketParams::new(0.05, 0.2, 0.0).unwrap();
        let s = multipliers_from_market(&params, 0.01).unwrap();
        assert!(rel(s.mean_shift(), 3.0e-4) < 1e-12);
        assert!(rel(s.variance(), 4.0e-4) < 1e-12);
        assert!(closed_form_posterior(0.0, 1.0).is_err());
        assert!(closed_form_posterior(-2.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_normalizer_matches_quadrature() {
        let s = closed_form_posterior(3.0, 1.2).unwrap();
        let d = DiscretizedDensity::uniform(-10.0, 10.0, 20001).unwrap();
        let z = d.integrate(|x, _| (-0.5 * s.alpha * x * x + s.beta * x).exp());
        assert!((z.ln() - s.log_normalizer).abs() < 1e-12);
    }

    #[test]
    fn multipliers_from_market_examples() {
        let s = multipliers_from_market(&MarketParams::new(0.0, 1.0, 0.0).unwrap(), 1.0).unwrap();
        assert_eq!((s.alpha, s.beta), (1.0, -0.5));
        for sigma in [0.1, 0.35, 1.7] {
            let p = MarketParams::new(0.5 * sigma * sigma, sigma, 0.0).unwrap();
            assert!(multipliers_from_market(&p, 0.3).unwrap().beta.abs() < 1e-15);
        }
        let p = MarketParams::new(0.05, 0.2, 0.0).unwrap();
        let s = multipliers_from_market(&p, 1.0 / 252.0).unwrap();
        assert!(rel(s.alpha, 6300.0) < 1e-12);
        assert!(rel(s.beta, 0.75) < 1e-12);
        assert!(multipliers_from_market(&p, 0.0).is_err());
        let zero_vol = MarketParams { sigma: 0.0, ..p };
        assert!(multipliers_from_market(&zero_vol, 1.0).is_err());
    }

    fn market_fit(mu: f64, sigma: f64, dt: f64) -> (MaxEntSolution, DualFit) {
        let p = MarketParams::new(mu, sigma, 0.0).unwrap();
        let oracle = multipliers_from_market(&p, dt).unwrap();
        let (m, sd) = (oracle.mean_shift(), oracle.variance().sqrt());
        let base = DiscretizedDensity::uniform(m - 10.0 * sd, m + 10.0 * sd, 2001).unwrap();
        let c = oracle.implied_constraints();
        (oracle, solve_dual(&c, &base, 1e-14).unwrap())
    }

    #[test]
    fn dual_recovers_market_multipliers() {
        let (oracle, fit) = market_fit(0.05, 0.2, 0.01);
        assert!(rel(fit.solution.alpha, 2500.0) < 1e-6);
        assert!(rel(fit.solution.beta, 0.75) < 1e-6);
        assert!(rel(fit.solution.alpha, oracle.alpha) < 1e-6);
        assert!(fit.iterations <= MAX_NEWTON_ITERATIONS);
        // moments re-derived independently from the returned density
        let m1 = fit.density.mean();
        let m2 = fit.density.integrate(|x, p| x * x * p);
        assert!((m1 - 3.0e-4).abs() < 1e-12);
        assert!((m2 - (4.0e-4 + 9.0e-8)).abs() < 1e-12);
    }

    #[test]
    fn dual_symmetric_targets_give_zero_beta() {
        let base = DiscretizedDensity::uniform(-10.0, 10.0, 2001).unwrap();
        let c = ConstraintSpec::new(1.0, 0.0).unwrap();
        let fit = solve_dual(&c, &base, DEFAULT_DUAL_TOL).unwrap();
        assert!(fit.solution.beta.abs() < 1e-12);
        assert!(rel(fit.solution.alpha, 1.0) < 1e-8);
    }

    #[test]
    fn dual_rejects_degenerate_targets() {
        let base = DiscretizedDensity::uniform(-1.0, 1.0, 101).unwrap();
        let c = ConstraintSpec::new(0.04, 0.2).unwrap();
        assert!(matches!(
            solve_dual(&c, &base, DEFAULT_DUAL_TOL),
            Err(Error::Infeasible { .. })
        ));
        let c = ConstraintSpec::new(0.01, 0.2).unwrap();
        assert!(matches!(
            solve_dual(&c, &base, DEFAULT_DUAL_TOL),
            Err(Error::Infeasible { .. })
        ));
        assert!(ConstraintSpec::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn dual_reports_non_convergence() {
        // A tolerance below what double precision can resolve never converges.
        let base = DiscretizedDensity::uniform(-10.0, 10.0, 201).unwrap();
        let c = ConstraintSpec::new(1.3, 0.4).unwrap();
        match solve_dual(&c, &base, 1e-300) {
            Err(Error::Convergence { residual, .. }) => assert!(residual < 1e-10),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn zero_information_returns_the_base() {
        let base = DiscretizedDensity::gaussian(-6.0, 6.0, 1201, 0.2, 0.5).unwrap();
        let c = ConstraintSpec::from_mean_variance(base.mean(), base.variance()).unwrap();
        let fit = solve_dual(&c, &base, DEFAULT_DUAL_TOL).unwrap();
        assert!(fit.density.max_abs_diff(&base) < DEFAULT_DUAL_TOL);
        assert!(fit.solution.alpha.abs() < 1e-8 && fit.solution.beta.abs() < 1e-8);
    }

    #[test]
    fn dual_converges_from_a_poor_start() {
        // Target far from the base: the Gaussian guess is poor.
        let base = DiscretizedDensity::gaussian(-5.0, 5.0, 4001, -2.0, 0.6).unwrap();
        let c = ConstraintSpec::from_mean_variance(1.0, 0.09).unwrap();
        let fit = solve_dual(&c, &base, DEFAULT_DUAL_TOL).unwrap();
        assert!((fit.density.mean() - 1.0).abs() < 1e-9);
        assert!((fit.density.variance() - 0.09).abs() < 1e-9);
    }

    /// Random direction that keeps normalization and both moments fixed.
    fn feasible_perturbation(p: &DiscretizedDensity, raw: &[f64]) -> Vec<f64> {
        let n = p.n_points();
        let h = p.spacing();
        let inner = |a: &[f64], b: &[f64]| -> f64 {
            (0..n)
                .map(|i| {
                    let c = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                    c * p.weights()[i] * a[i] * b[i]
                })
                .sum()
        };
        let basis_raw: Vec<Vec<f64>> = vec![
            vec![1.0; n],
            (0..n).map(|i| p.x(i)).collect(),
            (0..n).map(|i| p.x(i) * p.x(i)).collect(),
        ];
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for mut v in basis_raw {
            for b in &basis {
                let c = inner(&v, b);
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= c * bi);
            }
            let norm = inner(&v, &v).sqrt();
            v.iter_mut().for_each(|vi| *vi /= norm);
            basis.push(v);
        }
        let mut u: Vec<f64> = (0..n).map(|i| raw[i % raw.len()]).collect();
        for b in &basis {
            let c = inner(&u, b);
            u.iter_mut().zip(b).for_each(|(ui, bi)| *ui -= c * bi);
        }
        let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        u.iter().map(|v| v / scale).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn solved_density_maximizes_entropy(
            raw in prop::collection::vec(-1.0f64..1.0, 7..40),
            eps in 0.01f64..0.9,
        ) {
            let base = DiscretizedDensity::uniform(-1.0, 1.0, 201).unwrap();
            let c = ConstraintSpec::from_mean_variance(0.1, 0.04).unwrap();
            let fit = solve_dual(&c, &base, DEFAULT_DUAL_TOL).unwrap();
            let u = feasible_perturbation(&fit.density, &raw);
            let w: Vec<f64> = fit.density.weights().iter().zip(&u).map(|(p, v)| p * (1.0 + eps * v)).collect();
            let perturbed = DiscretizedDensity::new(-1.0, 1.0, w).unwrap();
            // the perturbation keeps both moments
            prop_assert!((perturbed.mean() - 0.1).abs() < 1e-9);
            let best = relative_entropy(&fit.density, &base).unwrap();
            let other = relative_entropy(&perturbed, &base).unwrap();
            prop_assert!(other < best, "perturbed {} >= optimum {}", other, best);
        }

        #[test]
        fn dual_moments_match_targets(mean in -0.5f64..0.5, std in 0.05f64..0.6) {
            let base = DiscretizedDensity::uniform(-6.0, 6.0, 2401).unwrap();
            let c = ConstraintSpec::from_mean_variance(mean, std * std).unwrap();
            let fit = solve_dual(&c, &base, DEFAULT_DUAL_TOL).unwrap();
            let m1 = fit.density.mean();
            let m2 = fit.density.integrate(|x, p| x * x * p);
            prop_assert!((m1 - mean).abs() < 1e-9);
            prop_assert!((m2 - c.second_moment_k).abs() < 1e-9);
        }
    }
}
