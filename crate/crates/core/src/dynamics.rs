//! Log-price transition kernels, Wiener-process sampling and the lognormal
//! terminal law.

use std::f64::consts::PI;
use std::io::{self, Write};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::rng::StreamRng;
use crate::special::std_normal_cdf;

/// Per-stock parameters. Rates and volatilities are annualized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Expected relative return per unit time.
    pub mu: f64,
    /// Volatility of the log price per square-root unit time.
    pub sigma: f64,
    pub risk_free_rate: f64,
}

impl MarketParams {
    pub fn new(mu: f64, sigma: f64, risk_free_rate: f64) -> Result<Self> {
        let p = Self {
            mu,
            sigma,
            risk_free_rate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.risk_free_rate.is_finite()) {
            return Err(domain("drift and risk-free rate must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(domain(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Expected log return per unit time, `μ - σ²/2`.
    pub fn log_drift(&self) -> f64 {
        self.mu - 0.5 * self.sigma * self.sigma
    }
}

/// Gaussian law of the log return `ln(S'/S)` over an elapsed time `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    pub mean_shift: f64,
    pub variance: f64,
    pub dt: f64,
}

impl GaussianKernel {
    pub fn new(mean_shift: f64, variance: f64, dt: f64) -> Result<Self> {
        if !mean_shift.is_finite() {
            return Err(domain("mean shift must be finite"));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(domain(format!("variance must be positive, got {variance}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(domain(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            mean_shift,
            variance,
            dt,
        })
    }

    /// The zero-duration kernel; neutral element of [`compose_kernels`].
    pub const fn identity() -> Self {
        Self {
            mean_shift: 0.0,
            variance: 0.0,
            dt: 0.0,
        }
    }

    /// Density of `ln S'` given `ln S`.
    pub fn log_density(&self, log_from: f64, log_to: f64) -> f64 {
        let d = log_to - log_from - self.mean_shift;
        (-d * d / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).sqrt()
    }
}

/// Kernel of the log price over `dt`: mean `(μ - σ²/2) dt`, variance `σ² dt`.
pub fn transition_kernel(params: &MarketParams, dt: f64) -> Result<GaussianKernel> {
    params.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(domain(format!("dt must be positive, got {dt}")));
    }
    GaussianKernel::new(
        params.log_drift() * dt,
        params.sigma * params.sigma * dt,
        dt,
    )
}

/// Lognormal density of `S'` given `S`, i.e. the log kernel times the
/// Jacobian `1/S'`.
pub fn price_transition_density(kernel: &GaussianKernel, s_from: f64, s_to: f64) -> Result<f64> {
    if !(s_from.is_finite() && s_from > 0.0 && s_to.is_finite() && s_to > 0.0) {
        return Err(domain(format!(
            "prices must be positive and finite, got {s_from} -> {s_to}"
        )));
    }
    Ok(kernel.log_density(s_from.ln(), s_to.ln()) / s_to)
}

/// Chapman-Kolmogorov composition of two Gaussian kernels.
pub fn compose_kernels(k1: &GaussianKernel, k2: &GaussianKernel) -> GaussianKernel {
    GaussianKernel {
        mean_shift: k1.mean_shift + k2.mean_shift,
        variance: k1.variance + k2.variance,
        dt: k1.dt + k2.dt,
    }
}

/// Lognormal law: `ln S ~ N(log_mean, log_std²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalSpec {
    pub log_mean: f64,
    pub log_std: f64,
}

impl LognormalSpec {
    pub fn new(log_mean: f64, log_std: f64) -> Result<Self> {
        if !log_mean.is_finite() {
            return Err(domain("log mean must be finite"));
        }
        if !(log_std.is_finite() && log_std > 0.0) {
            return Err(domain(format!("log std must be positive, got {log_std}")));
        }
        Ok(Self { log_mean, log_std })
    }

    /// Density of `ln S` at `x`.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.log_mean) / self.log_std;
        (-0.5 * z * z).exp() / (self.log_std * (2.0 * PI).sqrt())
    }

    /// CDF of `ln S` at `x`.
    pub fn log_cdf(&self, x: f64) -> f64 {
        std_normal_cdf((x - self.log_mean) / self.log_std)
    }

    /// Density of `S` at a positive price.
    pub fn pdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.log_pdf(s.ln()) / s
    }

    /// `E[S] = exp(log_mean + log_std²/2)`.
    pub fn mean(&self) -> f64 {
        (self.log_mean + 0.5 * self.log_std * self.log_std).exp()
    }
}

/// Law of `S_T` given `S_0 = s0`, drifting at `params.mu`.
///
/// Pass risk-neutralized parameters to obtain the pricing measure.
pub fn terminal_distribution(
    params: &MarketParams,
    s0: f64,
    t_final: f64,
) -> Result<LognormalSpec> {
    params.validate()?;
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(domain(format!("s0 must be positive, got {s0}")));
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(domain(format!("t_final must be positive, got {t_final}")));
    }
    LognormalSpec::new(
        s0.ln() + params.log_drift() * t_final,
        params.sigma * t_final.sqrt(),
    )
}

/// Sampled log-price paths, stored row-major (`n_paths` rows of `times.len()`).
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub initial_price: f64,
    pub times: Vec<f64>,
    pub log_prices: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub params: MarketParams,
}

impl PathEnsemble {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let m = self.n_times();
        &self.log_prices[i * m..(i + 1) * m]
    }

    pub fn terminal_log_prices(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.n_times();
        self.log_prices.chunks_exact(m).map(move |row| row[m - 1])
    }

    /// Writes the ensemble as CSV: a `# seed=.. s0=.. mu=.. sigma=..` line,
    /// a header of the sample times, then one row of log prices per path.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "# seed={} s0={} mu={} sigma={}",
            self.seed, self.initial_price, self.params.mu, self.params.sigma
        )?;
        write_row(&mut out, &self.times)?;
        for i in 0..self.n_paths {
            write_row(&mut out, self.path(i))?;
        }
        out.flush()
    }
}

/// Formats with 17 significant digits.
pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_row<W: Write>(out: &mut W, row: &[f64]) -> io::Result<()> {
    let line: Vec<String> = row.iter().map(|&v| fmt_real(v)).collect();
    writeln!(out, "{}", line.join(","))
}

/// Fills `row` with one path: `row[0] = x0`, then uniform steps of
/// `drift + sd * z`, accumulated separately from `x0`.
fn fill_path(row: &mut [f64], x0: f64, drift: f64, sd: f64, rng: &StreamRng, path: u64) {
    row[0] = x0;
    let mut cum = 0.0;
    for (j, slot) in row.iter_mut().enumerate().skip(1) {
        cum += drift + sd * rng.normal(path, (j - 1) as u64);
        *slot = x0 + cum;
    }
}

fn check_sizes(s0: f64, horizon: f64, n_steps: usize, n_paths: usize) -> Result<()> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(domain(format!("s0 must be positive, got {s0}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(domain(format!("horizon must be positive, got {horizon}")));
    }
    if n_steps == 0 || n_paths == 0 {
        return Err(domain("n_steps and n_paths must be at least 1"));
    }
    Ok(())
}

/// Simulates `ln S` on a uniform time grid. Path `i`, step `j` consumes the
/// variate at counter `(seed, i, j)`, so any path can be regenerated alone.
pub fn sample_paths(
    params: &MarketParams,
    s0: f64,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    params.validate()?;
    check_sizes(s0, horizon, n_steps, n_paths)?;
    let m = n_steps + 1;
    let dt = horizon / n_steps as f64;
    let times: Vec<f64> = (0..m)
        .map(|j| horizon * j as f64 / n_steps as f64)
        .collect();
    let drift = params.log_drift() * dt;
    let sd = params.sigma * dt.sqrt();
    let x0 = s0.ln();
    let rng = StreamRng::new(seed);
    let mut log_prices = vec![0.0; n_paths * m];

    #[cfg(feature = "parallel")]
    log_prices
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(i, row)| fill_path(row, x0, drift, sd, &rng, i as u64));
    #[cfg(not(feature = "parallel"))]
    log_prices
        .chunks_mut(m)
        .enumerate()
        .for_each(|(i, row)| fill_path(row, x0, drift, sd, &rng, i as u64));

    Ok(PathEnsemble {
        initial_price: s0,
        times,
        log_prices,
        n_paths,
        seed,
        params: *params,
    })
}

/// Terminal log prices only, bit-identical to the last column of
/// [`sample_paths`] with the same arguments.
pub fn sample_terminal_log_prices(
    params: &MarketParams,
    s0: f64,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    params.validate()?;
    check_sizes(s0, horizon, n_steps, n_paths)?;
    let dt = horizon / n_steps as f64;
    let drift = params.log_drift() * dt;
    let sd = params.sigma * dt.sqrt();
    let x0 = s0.ln();
    let rng = StreamRng::new(seed);
    let terminal = |i: usize| {
        let mut cum = 0.0;
        for j in 0..n_steps {
            cum += drift + sd * rng.normal(i as u64, j as u64);
        }
        x0 + cum
    };
    #[cfg(feature = "parallel")]
    let out = (0..n_paths).into_par_iter().map(terminal).collect();
    #[cfg(not(feature = "parallel"))]
    let out = (0..n_paths).map(terminal).collect();
    Ok(out)
}

/// Kolmogorov-Smirnov statistic of `samples` against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Argument("no samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MarketParams {
        MarketParams::new(0.05, 0.2, 0.05).unwrap()
    }

    #[test]
    fn market_params_validation() {
        assert!(MarketParams::new(0.1, 0.0, 0.0).is_err());
        assert!(MarketParams::new(0.1, -0.2, 0.0).is_err());
        assert!(MarketParams::new(f64::NAN, 0.2, 0.0).is_err());
        assert!(MarketParams::new(0.1, 0.2, f64::INFINITY).is_err());
    }

    #[test]
    fn transition_kernel_examples() {
        for sigma in [0.05, 0.3, 1.1] {
            let p = MarketParams::new(0.5 * sigma * sigma, sigma, 0.0).unwrap();
            assert_eq!(transition_kernel(&p, 0.7).unwrap().mean_shift, 0.0);
        }
        let k = transition_kernel(&params(), 1.0).unwrap();
        assert!((k.mean_shift - 0.03).abs() < 1e-15);
        assert!((k.variance - 0.04).abs() < 1e-15);
        let k = transition_kernel(&MarketParams::new(0.0, 0.2, 0.0).unwrap(), 1.0).unwrap();
        assert!((k.mean_shift + 0.02).abs() < 1e-15);
        assert!(transition_kernel(&params(), 0.0).is_err());
        assert!(transition_kernel(&params(), -1.0).is_err());
    }

    #[test]
    fn price_density_normalizes() {
        let k = transition_kernel(&params(), 0.5).unwrap();
        let s_from: f64 = 80.0;
        let (m, sd) = (s_from.ln() + k.mean_shift, k.variance.sqrt());
        // integrate in s_to over an 8-log-std range, on a fine uniform price grid
        let (lo, hi) = ((m - 8.0 * sd).exp(), (m + 8.0 * sd).exp());
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let s = lo + i as f64 * h;
            let c = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += c * price_transition_density(&k, s_from, s).unwrap();
        }
        assert!((total * h - 1.0).abs() < 1e-8, "{}", total * h);
        assert!(price_transition_density(&k, 0.0, 1.0).is_err());
        assert!(price_transition_density(&k, 1.0, -1.0).is_err());
    }

    #[test]
    fn price_density_mode() {
        let k = transition_kernel(&MarketParams::new(0.1, 0.4, 0.0).unwrap(), 1.0).unwrap();
        let s_from: f64 = 50.0;
        let want = (s_from.ln() + k.mean_shift - k.variance).exp();
        let (mut best, mut arg) = (0.0, 0.0);
        let step = 1e-4;
        for i in 1..2_000_000 {
            let s = i as f64 * step;
            let d = price_transition_density(&k, s_from, s).unwrap();
            if d > best {
                best = d;
                arg = s;
            }
        }
        assert!(
            (arg - want).abs() <= step,
            "grid mode {arg}, formula {want}"
        );
    }

    #[test]
    fn price_density_scale_covariance() {
        let k = transition_kernel(&params(), 0.25).unwrap();
        for (l, a, b) in [(0.01, 90.0, 101.0), (3.7, 10.0, 9.0), (137.0, 1.5, 1.6)] {
            let lhs = price_transition_density(&k, l * a, l * b).unwrap() * l;
            let rhs = price_transition_density(&k, a, b).unwrap();
            assert!(((lhs - rhs) / rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn log_kernel_is_scale_invariant() {
        let k = transition_kernel(&params(), 0.1).unwrap();
        for (l, s, sp) in [
            (0.01f64, 100.0f64, 103.0f64),
            (137.0, 42.0, 40.5),
            (2.5, 1.0, 1.01),
        ] {
            let a = k.log_density(s.ln(), sp.ln());
            let b = k.log_density((l * s).ln(), (l * sp).ln());
            assert!(((a - b) / a).abs() < 1e-12, "l = {l}");
        }
    }

    #[test]
    fn composition_examples() {
        let p = params();
        let k = transition_kernel(&p, 0.3).unwrap();
        assert_eq!(compose_kernels(&k, &GaussianKernel::identity()), k);
        let tiny = transition_kernel(&p, 1e-300).unwrap();
        let c = compose_kernels(&k, &tiny);
        assert_eq!(
            (c.mean_shift, c.variance, c.dt),
            (k.mean_shift, k.variance, k.dt)
        );
        let kk = compose_kernels(&k, &k);
        assert_eq!(
            (kk.mean_shift, kk.variance),
            (2.0 * k.mean_shift, 2.0 * k.variance)
        );
        let (t1, t2) = (0.25, 0.5);
        let c = compose_kernels(
            &transition_kernel(&p, t1).unwrap(),
            &transition_kernel(&p, t2).unwrap(),
        );
        let direct = transition_kernel(&p, t1 + t2).unwrap();
        assert!((c.mean_shift - direct.mean_shift).abs() < 1e-16);
        assert!((c.variance - direct.variance).abs() < 1e-16);
    }

    #[test]
    fn chapman_kolmogorov_closure() {
        // Dyadic splits composed pairwise are exact in floating point.
        let p = params();
        let t = 1.0;
        let whole = transition_kernel(&p, t).unwrap();
        for n in [2usize, 4, 16] {
            let mut acc = transition_kernel(&p, t / n as f64).unwrap();
            let mut pieces = 1;
            while pieces < n {
                acc = compose_kernels(&acc, &acc);
                pieces *= 2;
            }
            assert_eq!(acc.mean_shift, whole.mean_shift, "n = {n}");
            assert_eq!(acc.variance, whole.variance, "n = {n}");
            assert_eq!(acc.dt, whole.dt);

            // left-to-right accumulation agrees to rounding
            let piece = transition_kernel(&p, t / n as f64).unwrap();
            let seq = (0..n).fold(GaussianKernel::identity(), |a, _| {
                compose_kernels(&a, &piece)
            });
            assert!((seq.mean_shift - whole.mean_shift).abs() < 1e-16);
            assert!((seq.variance - whole.variance).abs() < 1e-16);
        }
    }

    #[test]
    fn terminal_distribution_examples() {
        let d = terminal_distribution(&params(), 100.0, 1.0).unwrap();
        assert!((d.log_mean - (100f64.ln() + 0.03)).abs() < 1e-14);
        assert!((d.log_std - 0.2).abs() < 1e-15);
        let d = terminal_distribution(&params(), 100.0, 1e-12).unwrap();
        assert!(d.log_std < 1e-6);
        assert!((d.log_mean - 100f64.ln()).abs() < 1e-12);
        assert!(terminal_distribution(&params(), 100.0, 0.0).is_err());
        assert!(terminal_distribution(&params(), -1.0, 1.0).is_err());
    }

    #[test]
    fn terminal_mean_is_forward_price() {
        // E[S_T] by trapezoid quadrature in log space
        let p = params();
        let d = terminal_distribution(&p, 100.0, 1.0).unwrap();
        let (lo, hi) = (d.log_mean - 12.0 * d.log_std, d.log_mean + 12.0 * d.log_std);
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let c = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += c * x.exp() * d.log_pdf(x);
        }
        let discounted = (-p.risk_free_rate * 1.0f64).exp() * s * h;
        assert!((discounted - 100.0).abs() < 1e-8, "{discounted}");
        assert!((d.mean() - 100.0 * 0.05f64.exp()).abs() < 1e-11);
    }

    #[test]
    fn vanishing_volatility_paths_are_deterministic() {
        let p = MarketParams::new(0.05, 1e-12, 0.0).unwrap();
        let e = sample_paths(&p, 100.0, 2.0, 50, 8, 3).unwrap();
        for i in 0..e.n_paths {
            for (j, &x) in e.path(i).iter().enumerate() {
                let want = 100f64.ln() + p.log_drift() * e.times[j];
                assert!((x - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ensemble_layout() {
        let e = sample_paths(&params(), 50.0, 1.0, 12, 5, 9).unwrap();
        assert_eq!(e.n_times(), 13);
        assert_eq!(e.times[0], 0.0);
        assert_eq!(e.times[12], 1.0);
        assert!(e.times.windows(2).all(|w| w[1] > w[0]));
        for i in 0..5 {
            assert_eq!(e.path(i)[0], 50f64.ln());
        }
        assert!(e.log_prices.iter().all(|v| v.is_finite()));
        assert!(sample_paths(&params(), 50.0, 1.0, 0, 5, 9).is_err());
        assert!(sample_paths(&params(), 50.0, 1.0, 3, 0, 9).is_err());
        assert!(sample_paths(&params(), 50.0, 0.0, 3, 1, 9).is_err());
    }

    #[test]
    fn terminal_sampler_matches_full_paths() {
        let e = sample_paths(&params(), 70.0, 0.5, 7, 64, 11).unwrap();
        let t = sample_terminal_log_prices(&params(), 70.0, 0.5, 7, 64, 11).unwrap();
        for (a, b) in e.terminal_log_prices().zip(&t) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn sampling_is_scale_equivariant() {
        let p = params();
        let a = sample_paths(&p, 100.0, 1.0, 20, 16, 5).unwrap();
        for l in [0.01, 137.0] {
            let b = sample_paths(&p, l * 100.0, 1.0, 20, 16, 5).unwrap();
            let shift = l.ln();
            for (x, y) in a.log_prices.iter().zip(&b.log_prices) {
                assert!((y - x - shift).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn terminal_moments_match_kernel() {
        let p = params();
        let n = 1_000_000;
        let xs = sample_terminal_log_prices(&p, 100.0, 1.0, 1, n, 20240601).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let se_mean = 0.2 / (n as f64).sqrt();
        assert!((mean - (100f64.ln() + 0.03)).abs() < 4.0 * se_mean);
        // SE of a normal sample variance is σ²·sqrt(2/(n-1))
        let se_var = 0.04 * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - 0.04).abs() < 4.0 * se_var);
    }

    #[test]
    fn terminal_samples_pass_ks() {
        let p = params();
        let n = 100_000;
        let xs = sample_terminal_log_prices(&p, 100.0, 1.0, 4, n, 77).unwrap();
        let law = terminal_distribution(&p, 100.0, 1.0).unwrap();
        let d = ks_statistic(&xs, |x| law.log_cdf(x)).unwrap();
        // asymptotic 1% critical value
        assert!(d < 1.6276 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn csv_layout() {
        let e = sample_paths(&params(), 100.0, 1.0, 3, 2, 42).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed=42 s0=100 mu=0.05 sigma=0.2");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').count(), 4);
        let parsed: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(parsed, e.path(0));
    }
}
