//! Build a Gauss scheme on the geometric grid and look at what it produces.

use ou_lift::{build_scheme, ModelParams};

fn main() -> ou_lift::Result<()> {
    let params = ModelParams::new(0.1, 1.0)?;
    let scheme = build_scheme(&params, 16, 5, None)?;

    println!("{} nodes, r = {:.4}", scheme.len(), scheme.r);
    println!(
        "grid spans [{:.3e}, {:.3e}]",
        scheme.grid.lower(),
        scheme.grid.upper()
    );
    println!("worst moment residual {:.2e}", scheme.max_moment_residual());

    for t in [0.01f64, 0.1, 1.0] {
        let target = t.powf(params.hurst() - 0.5);
        println!(
            "K_n({t}) = {:.5}   t^(H-1/2) = {target:.5}",
            scheme.kernel_eval(t)
        );
    }

    // The JSON form round-trips exactly.
    let again = ou_lift::QuadratureScheme::from_json(&scheme.to_json())?;
    assert_eq!(again, scheme);
    Ok(())
}
