//! European option pricing under the risk-neutral measure.
//!
//! Four independent routes to the same number: the Black-Scholes closed
//! form, quadrature of the payoff against the lognormal terminal law, a
//! Crank-Nicolson solve of the backward equation, and Monte Carlo.

use serde::{Deserialize, Serialize};

use crate::dynamics::{sample_terminal_log_prices, terminal_distribution, MarketParams};
use crate::error::{domain, Error, Result};
use crate::fokker_planck::{evolve_backward_value, CoefficientField, Grid, PayoffKind, ValueGrid};
use crate::special::GaussLegendre;

pub use crate::special::std_normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionStyle {
    Call,
    Put,
}

/// European contract. `strike = 0` is allowed as a degenerate contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub style: OptionStyle,
    pub strike: f64,
    pub expiry: f64,
}

impl OptionSpec {
    pub fn new(style: OptionStyle, strike: f64, expiry: f64) -> Result<Self> {
        let s = Self {
            style,
            strike,
            expiry,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn call(strike: f64, expiry: f64) -> Result<Self> {
        Self::new(OptionStyle::Call, strike, expiry)
    }

    pub fn put(strike: f64, expiry: f64) -> Result<Self> {
        Self::new(OptionStyle::Put, strike, expiry)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike.is_finite() && self.strike >= 0.0) {
            return Err(domain(format!("strike must be >= 0, got {}", self.strike)));
        }
        if !(self.expiry.is_finite() && self.expiry > 0.0) {
            return Err(domain(format!("expiry must be > 0, got {}", self.expiry)));
        }
        Ok(())
    }

    pub fn with_style(&self, style: OptionStyle) -> Self {
        Self { style, ..*self }
    }

    pub fn payoff(&self, s: f64) -> f64 {
        match self.style {
            OptionStyle::Call => (s - self.strike).max(0.0),
            OptionStyle::Put => (self.strike - s).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    Pde,
    MonteCarlo,
}

/// A premium with the diagnostics of the route that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    pub premium: f64,
    pub method: Method,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub std_error: Option<f64>,
    /// Risk-neutral expected payoff at expiry, before discounting.
    pub undiscounted_payoff: f64,
    pub spot: f64,
    pub spec: OptionSpec,
    pub params: MarketParams,
}

#[derive(Serialize)]
struct ParamsRecord {
    spot: f64,
    strike: f64,
    expiry: f64,
    risk_free_rate: f64,
    sigma: f64,
    mu: f64,
}

#[derive(Serialize)]
struct PricingRecord {
    method: Method,
    style: OptionStyle,
    premium: f64,
    d1: Option<f64>,
    d2: Option<f64>,
    std_error: Option<f64>,
    params: ParamsRecord,
}

impl PricingResult {
    fn from_expected_payoff(
        method: Method,
        undiscounted_payoff: f64,
        spot: f64,
        spec: &OptionSpec,
        params: &MarketParams,
    ) -> Self {
        Self {
            premium: discount(params, spec) * undiscounted_payoff,
            method,
            d1: None,
            d2: None,
            std_error: None,
            undiscounted_payoff,
            spot,
            spec: *spec,
            params: *params,
        }
    }

    /// One-line JSON record.
    pub fn to_json_line(&self) -> String {
        let record = PricingRecord {
            method: self.method,
            style: self.spec.style,
            premium: self.premium,
            d1: self.d1,
            d2: self.d2,
            std_error: self.std_error,
            params: ParamsRecord {
                spot: self.spot,
                strike: self.spec.strike,
                expiry: self.spec.expiry,
                risk_free_rate: self.params.risk_free_rate,
                sigma: self.params.sigma,
                mu: self.params.mu,
            },
        };
        serde_json::to_string(&record).expect("pricing record serializes")
    }
}

fn discount(params: &MarketParams, spec: &OptionSpec) -> f64 {
    (-params.risk_free_rate * spec.expiry).exp()
}

/// Replaces the physical drift with the risk-free rate.
pub fn risk_neutralize(params: &MarketParams) -> MarketParams {
    MarketParams {
        mu: params.risk_free_rate,
        ..*params
    }
}

fn check_inputs(s0: f64, spec: &OptionSpec, params: &MarketParams) -> Result<()> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(domain(format!("spot must be positive, got {s0}")));
    }
    spec.validate()?;
    params.validate()
}

/// `d1 = [ln(S0/K) + (r + σ²/2) T] / (σ √T)` and `d2 = d1 - σ √T`.
pub fn d1_d2(s0: f64, spec: &OptionSpec, params: &MarketParams) -> Result<(f64, f64)> {
    check_inputs(s0, spec, params)?;
    if spec.strike == 0.0 {
        return Err(domain("d1 and d2 are undefined for a zero strike"));
    }
    let vol_t = params.sigma * spec.expiry.sqrt();
    let d1 = ((s0 / spec.strike).ln()
        + (params.risk_free_rate + 0.5 * params.sigma * params.sigma) * spec.expiry)
        / vol_t;
    Ok((d1, d1 - vol_t))
}

fn require_style(spec: &OptionSpec, style: OptionStyle) -> Result<()> {
    if spec.style != style {
        return Err(Error::Argument(format!(
            "expected a {style:?} contract, got {:?}",
            spec.style
        )));
    }
    Ok(())
}

/// `C = S0 N(d1) - e^{-rT} K N(d2)`.
pub fn bs_call(s0: f64, spec: &OptionSpec, params: &MarketParams) -> Result<PricingResult> {
    check_inputs(s0, spec, params)?;
    require_style(spec, OptionStyle::Call)?;
    let df = discount(params, spec);
    let mut out = if spec.strike == 0.0 {
        PricingResult::from_expected_payoff(Method::ClosedForm, s0 / df, s0, spec, params)
    } else {
        let (d1, d2) = d1_d2(s0, spec, params)?;
        let premium = s0 * std_normal_cdf(d1) - df * spec.strike * std_normal_cdf(d2);
        let mut r =
            PricingResult::from_expected_payoff(Method::ClosedForm, premium / df, s0, spec, params);
        r.d1 = Some(d1);
        r.d2 = Some(d2);
        r.premium = premium;
        r
    };
    if spec.strike == 0.0 {
        out.premium = s0;
    }
    Ok(out)
}

/// `P = e^{-rT} K N(-d2) - S0 N(-d1)`.
pub fn bs_put(s0: f64, spec: &OptionSpec, params: &MarketParams) -> Result<PricingResult> {
    check_inputs(s0, spec, params)?;
    require_style(spec, OptionStyle::Put)?;
    if spec.strike == 0.0 {
        return Ok(PricingResult::from_expected_payoff(
            Method::ClosedForm,
            0.0,
            s0,
            spec,
            params,
        ));
    }
    let df = discount(params, spec);
    let (d1, d2) = d1_d2(s0, spec, params)?;
    let premium = df * spec.strike * std_normal_cdf(-d2) - s0 * std_normal_cdf(-d1);
    let mut r =
        PricingResult::from_expected_payoff(Method::ClosedForm, premium / df, s0, spec, params);
    r.premium = premium;
    r.d1 = Some(d1);
    r.d2 = Some(d2);
    Ok(r)
}

pub fn closed_form_price(
    s0: f64,
    spec: &OptionSpec,
    params: &MarketParams,
) -> Result<PricingResult> {
    match spec.style {
        OptionStyle::Call => bs_call(s0, spec, params),
        OptionStyle::Put => bs_put(s0, spec, params),
    }
}

/// Integration range and resolution for [`quadrature_price`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Truncation distance in log standard deviations.
    pub n_std: f64,
    pub panels: usize,
    pub nodes_per_panel: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            n_std: 12.0,
            panels: 128,
            nodes_per_panel: 16,
        }
    }
}

/// Tail mass allowed outside the quadrature range.
pub const QUADRATURE_TAIL_TOLERANCE: f64 = 1e-10;

/// Discounted integral of the payoff against the risk-neutral lognormal
/// law of `S_T`, taken in log price over the exercise region.
pub fn quadrature_price(
    s0: f64,
    spec: &OptionSpec,
    params: &MarketParams,
    grid: &QuadratureSpec,
) -> Result<PricingResult> {
    check_inputs(s0, spec, params)?;
    if !(grid.n_std > 0.0) || grid.panels == 0 || grid.nodes_per_panel == 0 {
        return Err(Error::Argument(
            "quadrature spec needs positive range and sizes".into(),
        ));
    }
    // Mass outside [m - n s, m + s² + n s] under both the price measure and
    // the share measure (the latter is shifted up by s²).
    let tail_mass = 2.0 * std_normal_cdf(-grid.n_std);
    if tail_mass > QUADRATURE_TAIL_TOLERANCE {
        return Err(Error::Truncation { tail_mass });
    }
    let rn = risk_neutralize(params);
    let law = terminal_distribution(&rn, s0, spec.expiry)?;
    let (m, s) = (law.log_mean, law.log_std);
    let lo = m - grid.n_std * s;
    let hi = m + s * s + grid.n_std * s;
    let k = spec.strike;
    let (a, b) = match spec.style {
        OptionStyle::Call if k > 0.0 => (k.ln().max(lo), hi),
        OptionStyle::Call => (lo, hi),
        OptionStyle::Put if k > 0.0 => (lo, k.ln().min(hi)),
        OptionStyle::Put => (0.0, 0.0),
    };
    let rule = GaussLegendre::new(grid.nodes_per_panel);
    let expected = rule.integrate(|x| spec.payoff(x.exp()) * law.log_pdf(x), a, b, grid.panels);
    Ok(PricingResult::from_expected_payoff(
        Method::Quadrature,
        expected,
        s0,
        spec,
        params,
    ))
}

/// Grid for [`pde_price`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeGridSpec {
    pub n_space: usize,
    pub n_time: usize,
    /// Half-width of the log-price domain in terminal log standard deviations.
    pub half_width_std: f64,
    /// Explicit `(x_lo, x_hi)`; overrides the centred layout.
    pub bounds: Option<(f64, f64)>,
}

impl Default for PdeGridSpec {
    fn default() -> Self {
        Self {
            n_space: 400,
            n_time: 400,
            half_width_std: 8.0,
            bounds: None,
        }
    }
}

impl PdeGridSpec {
    pub fn square(n: usize) -> Self {
        Self {
            n_space: n,
            n_time: n,
            ..Self::default()
        }
    }

    /// Grid around `ln s0` extending `half_width_std` terminal log-stds plus
    /// the drift over the life of the option on each side, shifted so that
    /// the payoff kink at `ln K` falls on a node.
    pub fn layout(&self, s0: f64, spec: &OptionSpec, params: &MarketParams) -> Result<Grid> {
        if let Some((lo, hi)) = self.bounds {
            return Grid::new(lo, hi, self.n_space);
        }
        if self.n_space < 2 {
            return Grid::new(0.0, 1.0, self.n_space);
        }
        let x0 = s0.ln();
        let half = self.half_width_std * params.sigma * spec.expiry.sqrt()
            + ((params.risk_free_rate - 0.5 * params.sigma * params.sigma) * spec.expiry).abs();
        let h = 2.0 * half / (self.n_space - 1) as f64;
        let below = (self.n_space - 1) / 2;
        let mut x_lo = x0 - below as f64 * h;
        if spec.strike > 0.0 {
            let anchor = spec.strike.ln();
            x_lo = anchor - ((anchor - x_lo) / h).round() * h;
        }
        Grid::new(x_lo, x_lo + (self.n_space - 1) as f64 * h, self.n_space)
    }
}

/// Solves the backward equation for the undiscounted value `V`, then
/// discounts: the premium is `e^{-rT} V(ln s0, 0)`.
pub fn pde_price(
    s0: f64,
    spec: &OptionSpec,
    params: &MarketParams,
    grid_spec: &PdeGridSpec,
) -> Result<PricingResult> {
    check_inputs(s0, spec, params)?;
    if grid_spec.n_time == 0 {
        return Err(Error::Argument("n_time must be at least 1".into()));
    }
    let grid = grid_spec.layout(s0, spec, params)?;
    let x0 = s0.ln();
    let h = grid.spacing();
    if !(x0 > grid.x_lo + h && x0 < grid.x_hi - h) {
        return Err(Error::Argument(format!(
            "ln spot {x0} is not inside the grid interior [{}, {}]",
            grid.x_lo + h,
            grid.x_hi - h
        )));
    }
    let value = solve_value_grid(spec, params, grid, grid_spec.n_time)?;
    let v0 = value.at(x0)?;
    Ok(PricingResult::from_expected_payoff(
        Method::Pde,
        v0,
        s0,
        spec,
        params,
    ))
}

/// Undiscounted value grid at `t = 0` for the contract.
pub fn solve_value_grid(
    spec: &OptionSpec,
    params: &MarketParams,
    grid: Grid,
    n_time: usize,
) -> Result<ValueGrid> {
    let payoff = PayoffKind {
        style: spec.style,
        strike: spec.strike,
    };
    let terminal = ValueGrid::from_payoff(grid, payoff, spec.expiry)?;
    let coeffs = CoefficientField::from_params(&risk_neutralize(params));
    evolve_backward_value(&terminal, &coeffs, 0.0, n_time)
}

/// Minimum path count for [`mc_price`].
pub const MIN_MC_PATHS: usize = 100;

/// Discounted sample mean of the payoff over `n_paths` risk-neutral
/// terminal prices. Same seed, same numbers.
pub fn mc_price(
    s0: f64,
    spec: &OptionSpec,
    params: &MarketParams,
    n_paths: usize,
    seed: u64,
) -> Result<PricingResult> {
    check_inputs(s0, spec, params)?;
    if n_paths < MIN_MC_PATHS {
        return Err(domain(format!(
            "need at least {MIN_MC_PATHS} paths, got {n_paths}"
        )));
    }
    let rn = risk_neutralize(params);
    let xs = sample_terminal_log_prices(&rn, s0, spec.expiry, 1, n_paths, seed)?;
    let payoffs: Vec<f64> = xs.iter().map(|x| spec.payoff(x.exp())).collect();
    let n = n_paths as f64;
    let mean = payoffs.iter().sum::<f64>() / n;
    let var = payoffs.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
    let mut r = PricingResult::from_expected_payoff(Method::MonteCarlo, mean, s0, spec, params);
    r.std_error = Some(discount(params, spec) * (var / n).sqrt());
    Ok(r)
}

/// Routes to one of the four pricers with default numerics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    pub quadrature: QuadratureSpec,
    pub pde: PdeGridSpec,
    pub mc_paths: usize,
    pub seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            quadrature: QuadratureSpec::default(),
            pde: PdeGridSpec::default(),
            mc_paths: 1_000_000,
            seed: 20_240_601,
        }
    }
}

pub fn price(
    method: Method,
    s0: f64,
    spec: &OptionSpec,
    params: &MarketParams,
    numerics: &Numerics,
) -> Result<PricingResult> {
    match method {
        Method::ClosedForm => closed_form_price(s0, spec, params),
        Method::Quadrature => quadrature_price(s0, spec, params, &numerics.quadrature),
        Method::Pde => pde_price(s0, spec, params, &numerics.pde),
        Method::MonteCarlo => mc_price(s0, spec, params, numerics.mc_paths, numerics.seed),
    }
}

/// `(C - P) - (s0 - K e^{-rT})`.
///
/// For Monte Carlo pairs priced on common random numbers, pass the
/// simulated discounted forward (the zero-strike call premium) as `s0` and
/// the payoff identity makes the gap vanish path by path.
pub fn parity_gap(
    call_premium: f64,
    put_premium: f64,
    s0: f64,
    spec: &OptionSpec,
    params: &MarketParams,
) -> f64 {
    (call_premium - put_premium) - (s0 - spec.strike * discount(params, spec))
}

/// Both legs of a contract priced by one method, and their parity gap.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityReport {
    pub method: Method,
    pub call: PricingResult,
    pub put: PricingResult,
    /// Spot used in the parity relation: `s0`, or for Monte Carlo the
    /// simulated discounted forward on the same draws.
    pub reference_spot: f64,
    pub gap: f64,
}

pub fn parity_check(
    method: Method,
    s0: f64,
    spec: &OptionSpec,
    params: &MarketParams,
    numerics: &Numerics,
) -> Result<ParityReport> {
    let call = price(
        method,
        s0,
        &spec.with_style(OptionStyle::Call),
        params,
        numerics,
    )?;
    let put = price(
        method,
        s0,
        &spec.with_style(OptionStyle::Put),
        params,
        numerics,
    )?;
    let reference_spot = if method == Method::MonteCarlo {
        let forward = OptionSpec {
            style: OptionStyle::Call,
            strike: 0.0,
            expiry: spec.expiry,
        };
        price(method, s0, &forward, params, numerics)?.premium
    } else {
        s0
    };
    let gap = parity_gap(call.premium, put.premium, reference_spot, spec, params);
    Ok(ParityReport {
        method,
        call,
        put,
        reference_spot,
        gap,
    })
}
