use entropic_core::dynamics::{terminal_distribution, MarketParams};
use entropic_core::fokker_planck::{evolve_forward, CoefficientField, DensityGrid, Grid};
use entropic_core::pricing::{bs_call, pde_price, OptionSpec, PdeGridSpec};

fn order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

fn setup() -> (MarketParams, f64, f64, f64) {
    let p = MarketParams::new(0.05, 0.2, 0.05).unwrap();
    let x0 = 100f64.ln();
    (p, x0, x0 - 1.6, x0 + 1.6)
}

/// Lognormal law of ln S at time t, started from a point mass at ln 100.
fn oracle(p: &MarketParams, t: f64) -> impl Fn(f64) -> f64 {
    let law = terminal_distribution(p, 100.0, t).unwrap();
    move |x| law.log_pdf(x)
}

fn forward_error(n: usize, steps: usize) -> f64 {
    let (p, _, lo, hi) = setup();
    let grid = Grid::new(lo, hi, n).unwrap();
    // Start from the exact law at t0 so the initial data is smooth.
    let t0 = 0.1;
    let f0 = oracle(&p, t0);
    let d0 = DensityGrid::from_fn(grid, t0, f0).unwrap();
    let out = evolve_forward(&d0, &CoefficientField::from_params(&p), 1.0, steps).unwrap();
    out.l1_distance(oracle(&p, 1.0))
}

#[test]
fn forward_order_in_space() {
    let errs: Vec<f64> = [100, 199, 397]
        .iter()
        .map(|&n| forward_error(n, 4000))
        .collect();
    for w in errs.windows(2) {
        let q = order(w[0], w[1], 2.0);
        assert!(q >= 1.8, "space order {q:.3} from {errs:?}");
    }
}

#[test]
fn forward_order_in_time() {
    let (p, _, lo, hi) = setup();
    let grid = Grid::new(lo, hi, 400).unwrap();
    let d0 = DensityGrid::from_fn(grid, 0.1, oracle(&p, 0.1)).unwrap();
    let c = CoefficientField::from_params(&p);
    let reference = evolve_forward(&d0, &c, 1.0, 6400).unwrap();
    let errs: Vec<f64> = [25, 50, 100]
        .iter()
        .map(|&s| {
            let e = evolve_forward(&d0, &c, 1.0, s).unwrap();
            grid.integrate(
                &e.values
                    .iter()
                    .zip(&reference.values)
                    .map(|(a, b)| (a - b).abs())
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    for w in errs.windows(2) {
        let q = order(w[0], w[1], 2.0);
        assert!(q >= 1.8, "time order {q:.3} from {errs:?}");
    }
}

#[test]
fn pde_price_refinement_ladder() {
    let (p, ..) = setup();
    let spec = OptionSpec::call(100.0, 1.0).unwrap();
    let exact = bs_call(100.0, &spec, &p).unwrap().premium;
    let errs: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| {
            (pde_price(100.0, &spec, &p, &PdeGridSpec::square(n))
                .unwrap()
                .premium
                - exact)
                .abs()
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
        let q = order(w[0], w[1], 2.0);
        assert!(q >= 1.8, "order {q:.3} from {errs:?}");
    }
}
