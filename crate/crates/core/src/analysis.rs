//! Deterministic strong-error analysis of a quadrature scheme.
//!
//! By the Itô isometry the `L^2(Ω)` distance at time `T` between the Volterra
//! process and its OU-sum approximation equals the `L^2(0, T)` distance of
//! their kernels:
//!
//! ```text
//! ‖W^H_T − W^{H,n}_T‖² = ∫_0^T (s^(H-1/2) − K_n(s))² ds
//!     = T^(2H)/(2H)
//!       − 2 Σ_j w_j x_j^(-α) γ(α, x_j T)
//!       + Σ_{j,l} w_j w_l (1 − e^(-(x_j+x_l) T)) / (x_j + x_l)
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{build_scheme, ModelParams, QuadratureScheme};
use crate::special::lower_incomplete_gamma;

/// One row of an error sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    #[serde(rename = "H")]
    pub hurst: f64,
    pub m: usize,
    pub n: usize,
    pub r: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

/// Least-squares fit of `log e = intercept − slope · log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `Var(W^H_T) = T^(2H) / (2H)`.
pub fn volterra_variance(hurst: f64, horizon: f64) -> f64 {
    horizon.powf(2.0 * hurst) / (2.0 * hurst)
}

/// `Cov(W^H_T, ∫_0^T e^(-(T-s)x) dW_s) = ∫_0^T t^(α-1) e^(-x t) dt`.
pub fn kernel_ou_covariance(alpha: f64, x: f64, horizon: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(horizon.powf(alpha) / alpha);
    }
    Ok(x.powf(-alpha) * lower_incomplete_gamma(alpha, x * horizon)?)
}

/// `Cov(∫_0^T e^(-(T-s)x) dW_s, ∫_0^T e^(-(T-s)y) dW_s) = (1 − e^(-(x+y)T)) / (x+y)`.
pub fn ou_covariance(x: f64, y: f64, horizon: f64) -> f64 {
    let s = x + y;
    if s == 0.0 {
        horizon
    } else {
        -(-s * horizon).exp_m1() / s
    }
}

/// Variance of `W^{H,n}_T`: the double sum above.
pub fn lift_variance(scheme: &QuadratureScheme, horizon: f64) -> f64 {
    let x = &scheme.nodes;
    let w = &scheme.kernel_weights;
    let mut acc = CompensatedSum::default();
    for j in 0..x.len() {
        acc.add(w[j] * w[j] * ou_covariance(x[j], x[j], horizon));
        for l in 0..j {
            acc.add(2.0 * w[j] * w[l] * ou_covariance(x[j], x[l], horizon));
        }
    }
    acc.value()
}

/// Closed-form strong error of `scheme` at time `horizon`.
pub fn l2_error(scheme: &QuadratureScheme, horizon: f64) -> Result<ErrorRecord> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let hurst = scheme.hurst();
    let alpha = scheme.params.alpha();
    let target = volterra_variance(hurst, horizon);

    let mut acc = CompensatedSum::default();
    acc.add(target);
    for (x, w) in scheme.nodes.iter().zip(&scheme.kernel_weights) {
        if *w != 0.0 {
            acc.add(-2.0 * w * kernel_ou_covariance(alpha, *x, horizon)?);
        }
    }
    acc.add(lift_variance(scheme, horizon));
    let mut sq = acc.value();
    if sq < 0.0 {
        if sq >= -1e-12 * target {
            sq = 0.0;
        } else {
            return Err(Error::numerical(format!(
                "squared L2 error {sq:e} is negative beyond rounding (scheme {})",
                scheme.scheme_id()
            )));
        }
    }
    let abs_error = sq.sqrt();
    Ok(ErrorRecord {
        hurst,
        m: scheme.m,
        n: scheme.n,
        r: scheme.r,
        horizon,
        abs_error,
        rel_error: abs_error / target.sqrt(),
    })
}

/// Builds a scheme for each `n` and evaluates its strong error. Schemes are
/// evaluated in parallel; the output order follows `n_list`.
pub fn error_sweep(
    hurst: f64,
    m: usize,
    n_list: &[usize],
    horizon: f64,
    r: Option<f64>,
) -> Result<Vec<ErrorRecord>> {
    let params = ModelParams::new(hurst, horizon)?;
    if let Some(&bad) = n_list.iter().find(|&&n| n < 2) {
        return Err(Error::invalid(format!("all n must be >= 2, got {bad}")));
    }
    n_list
        .par_iter()
        .map(|&n| {
            let scheme = build_scheme(&params, n, m, r)?;
            l2_error(&scheme, horizon)
        })
        .collect()
}

/// Fits the decay exponent of `rel_error` against `n` on log-log scale by
/// ordinary least squares.
pub fn fit_rate(records: &[ErrorRecord]) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.n as f64, r.rel_error)).collect();
    fit_power_law(&points)
}

/// Least-squares fit of `log y = intercept − slope · log x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::invalid("rate fit needs at least two points"));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::invalid(format!(
            "rate fit needs positive n and errors, got ({}, {})",
            p.0, p.1
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least two distinct n"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let beta = sxy / sxx;
    let intercept = mean_y - beta * mean_x;
    let residual = (logs
        .iter()
        .map(|p| (p.1 - intercept - beta * p.0).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(RateFit {
        slope: -beta,
        intercept,
        residual,
    })
}

/// Convergence rate `2Hm/3` of the `m`-point scheme.
pub fn predicted_rate(hurst: f64, m: usize) -> f64 {
    crate::quadrature::default_rate(hurst, m)
}

pub const SWEEP_CSV_HEADER: &str = "H,m,n,r,T,abs_error,rel_error";

/// CSV rendering of a sweep, header included.
pub fn sweep_to_csv(records: &[ErrorRecord]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.hurst, r.m, r.n, r.r, r.horizon, r.abs_error, r.rel_error
        ));
    }
    out
}

/// JSON summary of a rate fit alongside the predicted rate.
pub fn fit_to_json(fit: &RateFit, predicted: f64) -> String {
    serde_json::json!({
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residual": fit.residual,
        "predicted": predicted,
    })
    .to_string()
}
