//! Rough Bergomi puts and calls, and price convergence in n under common
//! random numbers.

use ou_lift::{
    build_scheme, call_via_parity, simulate_terminal_prices, simulate_terminal_prices_common,
    ModelParams, PricingConfig, VolSource,
};

fn main() -> ou_lift::Result<()> {
    let params = ModelParams::new(0.1, 1.0)?;
    let config = PricingConfig {
        strike: 1.0,
        horizon: 1.0,
        steps: 128,
        paths: 20_000,
        rho: -0.7,
        vol: VolSource::Scheme(build_scheme(&params, 16, 5, None)?),
        seed: 1,
    };
    let put = simulate_terminal_prices(&config)?.put(1.0)?;
    let call = call_via_parity(&put, 1.0);
    println!("{}", put.to_json());
    println!("{}", call.to_json());

    let oracle = PricingConfig {
        vol: VolSource::ExactOracle { hurst: 0.1 },
        ..config
    };
    let exact = simulate_terminal_prices(&oracle)?.put(1.0)?;
    println!("exact-driver put {:.4} +- {:.4}", exact.price, exact.stderr);

    let ns = [2, 4, 8, 16, 32];
    let schemes = ns
        .iter()
        .map(|&n| build_scheme(&params, n, 5, None))
        .collect::<ou_lift::Result<Vec<_>>>()?;
    let samples = simulate_terminal_prices_common(&schemes, 1.0, 128, 20_000, 0.0, 1)?;
    let puts: Vec<f64> = samples
        .iter()
        .map(|s| s.put(1.0).map(|p| p.price))
        .collect::<Result<_, _>>()?;
    for (n, p) in ns.iter().zip(&puts) {
        println!(
            "n={n:<3} put {p:.4}  gap to n=32 {:.4}",
            (p - puts[4]).abs()
        );
    }
    Ok(())
}
