//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The plain functions do the work and are tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use entropic_core::dynamics::{sample_paths, terminal_distribution, MarketParams};
use entropic_core::fokker_planck::{evolve_forward, CoefficientField, DensityGrid, Grid};
use entropic_core::pricing::{price, Method, Numerics, OptionSpec, OptionStyle};
use wasm_bindgen::prelude::*;

/// `[closed, quadrature, pde, monte carlo, monte carlo std error]`.
#[allow(clippy::too_many_arguments)]
pub fn compare_methods(
    spot: f64,
    strike: f64,
    rate: f64,
    vol: f64,
    expiry: f64,
    call: bool,
    mc_paths: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let style = if call {
        OptionStyle::Call
    } else {
        OptionStyle::Put
    };
    let spec = OptionSpec::new(style, strike, expiry).map_err(|e| e.to_string())?;
    let params = MarketParams::new(rate, vol, rate).map_err(|e| e.to_string())?;
    let numerics = Numerics {
        mc_paths,
        seed,
        ..Numerics::default()
    };
    let mut out = Vec::with_capacity(5);
    let mut mc_se = 0.0;
    for method in [
        Method::ClosedForm,
        Method::Quadrature,
        Method::Pde,
        Method::MonteCarlo,
    ] {
        let r = price(method, spot, &spec, &params, &numerics).map_err(|e| e.to_string())?;
        out.push(r.premium);
        mc_se = r.std_error.unwrap_or(mc_se);
    }
    out.push(mc_se);
    Ok(out)
}

/// Log-price density evolved from a point mass at `ln spot`, with the
/// exact lognormal law for comparison.
#[wasm_bindgen]
pub struct DensityView {
    x: Vec<f64>,
    numeric: Vec<f64>,
    exact: Vec<f64>,
    l1: f64,
}

#[wasm_bindgen]
impl DensityView {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn numeric(&self) -> Vec<f64> {
        self.numeric.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn l1(&self) -> f64 {
        self.l1
    }
}

pub fn density_view(
    spot: f64,
    mu: f64,
    vol: f64,
    t_final: f64,
    n_grid: usize,
    n_steps: usize,
) -> Result<DensityView, String> {
    let run = || {
        let params = MarketParams::new(mu, vol, 0.0)?;
        let x0 = spot.ln();
        let shift = params.log_drift() * t_final;
        let half = 8.0 * vol * t_final.sqrt();
        let grid = Grid::new(
            x0 + shift.min(0.0) - half,
            x0 + shift.max(0.0) + half,
            n_grid,
        )?;
        let d0 = DensityGrid::near_delta(grid, 0.0, x0)?;
        let d = evolve_forward(
            &d0,
            &CoefficientField::from_params(&params),
            t_final,
            n_steps,
        )?;
        let law = terminal_distribution(&params, spot, t_final)?;
        let x = grid.nodes();
        let exact = x.iter().map(|&v| law.log_pdf(v)).collect();
        Ok::<_, entropic_core::Error>(DensityView {
            l1: d.l1_distance(|v| law.log_pdf(v)),
            x,
            numeric: d.values,
            exact,
        })
    };
    run().map_err(|e| e.to_string())
}

/// Prices (not log prices), row-major: `paths` rows of `steps + 1`.
pub fn price_paths(
    spot: f64,
    mu: f64,
    vol: f64,
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let params = MarketParams::new(mu, vol, 0.0).map_err(|e| e.to_string())?;
    let e = sample_paths(&params, spot, horizon, steps, paths, seed).map_err(|e| e.to_string())?;
    Ok(e.log_prices.iter().map(|x| x.exp()).collect())
}

#[wasm_bindgen(js_name = compareMethods)]
#[allow(clippy::too_many_arguments)]
pub fn compare_methods_js(
    spot: f64,
    strike: f64,
    rate: f64,
    vol: f64,
    expiry: f64,
    call: bool,
    mc_paths: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    compare_methods(spot, strike, rate, vol, expiry, call, mc_paths, seed as u64)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = evolveDensity)]
pub fn density_view_js(
    spot: f64,
    mu: f64,
    vol: f64,
    t_final: f64,
    n_grid: usize,
    n_steps: usize,
) -> Result<DensityView, JsError> {
    density_view(spot, mu, vol, t_final, n_grid, n_steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = samplePaths)]
pub fn price_paths_js(
    spot: f64,
    mu: f64,
    vol: f64,
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    price_paths(spot, mu, vol, horizon, steps, paths, seed as u64).map_err(|e| JsError::new(&e))
}
