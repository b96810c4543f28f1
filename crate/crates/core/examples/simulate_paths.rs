//! Exact simulation of the OU-sum process and a check of its terminal variance.

use ou_lift::analysis::lift_variance;
use ou_lift::{build_scheme, increment_model, simulate_lift, ModelParams};

fn main() -> ou_lift::Result<()> {
    let scheme = build_scheme(&ModelParams::new(0.1, 1.0)?, 20, 5, None)?;
    let steps = 64;

    let model = increment_model(&scheme, 1.0 / steps as f64, 1e-12)?;
    println!(
        "{} factors, increment covariance rank {}",
        scheme.len(),
        model.rank
    );

    let batch = simulate_lift(&scheme, 1.0, steps, -0.7, 20_000, 42)?;
    let terminal = batch.terminal_values();
    let n = terminal.len() as f64;
    let mean = terminal.iter().sum::<f64>() / n;
    let var = terminal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    println!(
        "Var W_1: sample {var:.4}, closed form {:.4}",
        lift_variance(&scheme, 1.0)
    );

    // First path, every eighth step.
    for (t, w) in batch.times.iter().zip(batch.path(0)).step_by(8) {
        println!("{t:.4} {w:+.5}");
    }
    Ok(())
}
