//! Exact Cholesky samples of the Volterra process, and the strong error of a
//! scheme estimated by joint sampling.

use ou_lift::simulate::rl_covariance;
use ou_lift::{build_scheme, exact_rl_fbm, joint_terminal_error_mc, l2_error, ModelParams};

fn main() -> ou_lift::Result<()> {
    let h = 0.1;
    let times: Vec<f64> = (1..=64).map(|i| i as f64 / 64.0).collect();
    let samples = exact_rl_fbm(h, &times, 20_000, 7)?;
    let last = samples.column(63);
    let var = last.iter().map(|v| v * v).sum::<f64>() / last.len() as f64;
    println!(
        "Var W^H_1: sample {var:.4}, exact {:.4}",
        rl_covariance(h, 1.0, 1.0)
    );

    let scheme = build_scheme(&ModelParams::new(h, 1.0)?, 16, 3, None)?;
    let (mc, se) = joint_terminal_error_mc(&scheme, 1.0, 50_000, 7)?;
    let exact = l2_error(&scheme, 1.0)?.abs_error.powi(2);
    println!("E(W^H_1 - W^(H,n)_1)^2: MC {mc:.5} +- {se:.5}, closed form {exact:.5}");
    Ok(())
}
