//! Strong error against the number of intervals, and the fitted rate.

use ou_lift::analysis::sweep_to_csv;
use ou_lift::{error_sweep, fit_rate, predicted_rate};

fn main() -> ou_lift::Result<()> {
    let ns = [4, 8, 16, 32, 64, 128, 256];
    for (h, m) in [(0.1, 2), (0.1, 5), (0.25, 3)] {
        let records = error_sweep(h, m, &ns, 1.0, None)?;
        let fit = fit_rate(&records)?;
        println!(
            "H={h} m={m}: slope {:.4}, predicted {:.4}",
            fit.slope,
            predicted_rate(h, m)
        );
        if m == 5 {
            print!("{}", sweep_to_csv(&records));
        }
    }
    Ok(())
}
