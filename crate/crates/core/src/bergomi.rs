//! Monte Carlo pricing in the rough Bergomi model
//! `S_t = 1 + ∫_0^t S_s exp(V_s) dB_s`, where the log-volatility `V` is
//! either the OU-sum approximation `W^{H,n}` or the exact Volterra process.
//!
//! Prices are stepped in log space with the volatility frozen at the left
//! endpoint of each step:
//!
//! ```text
//! log S_{t+dt} = log S_t − ½ e^(2 V_t) dt + e^(V_t) ΔB
//! ```
//!
//! `V` is sampled exactly at the grid times, so the only time-discretization
//! error comes from freezing the volatility over a step.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::quadrature::QuadratureScheme;
use crate::rng::{fill_normals, path_rng};
use crate::simulate::{
    joint_volterra_driver_factor, mean_and_stderr, IncrementModel, OuPath, DEFAULT_TOL_RANK,
};

/// Bound on `|V|` before exponentiation.
pub const VOL_CLAMP: f64 = 40.0;

/// Source of the log-volatility process `V`.
#[derive(Debug, Clone, PartialEq)]
pub enum VolSource {
    /// `V = W^{H,n}` from a quadrature scheme.
    Scheme(QuadratureScheme),
    /// `V = W^H`, sampled exactly by Cholesky factorization.
    ExactOracle { hurst: f64 },
}

impl VolSource {
    pub fn hurst(&self) -> f64 {
        match self {
            VolSource::Scheme(s) => s.hurst(),
            VolSource::ExactOracle { hurst } => *hurst,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingConfig {
    pub strike: f64,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub rho: f64,
    pub vol: VolSource,
    pub seed: u64,
}

impl PricingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike >= 0.0) || !self.strike.is_finite() {
            return Err(Error::invalid(format!(
                "strike must be >= 0, got {}",
                self.strike
            )));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.steps == 0 {
            return Err(Error::invalid("need at least one time step"));
        }
        if self.paths < 2 {
            return Err(Error::invalid(format!(
                "need at least two paths, got {}",
                self.paths
            )));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid(format!(
                "correlation must lie in [-1, 1], got {}",
                self.rho
            )));
        }
        if let VolSource::ExactOracle { hurst } = self.vol {
            if !(hurst > 0.0 && hurst < 0.5) {
                return Err(Error::invalid(format!(
                    "Hurst index must lie in (0, 1/2), got {hurst}"
                )));
            }
        }
        Ok(())
    }

    /// Negative (or zero) correlation makes `S` a true martingale, so calls
    /// may be priced by put-call parity.
    pub fn parity_safe(&self) -> bool {
        self.rho <= 0.0
    }

    fn provenance(&self, clamped: u64) -> Provenance {
        let (n, m, r) = match &self.vol {
            VolSource::Scheme(s) => (Some(s.n), Some(s.m), Some(s.r)),
            VolSource::ExactOracle { .. } => (None, None, None),
        };
        Provenance {
            horizon: self.horizon,
            steps: self.steps,
            rho: self.rho,
            hurst: self.vol.hurst(),
            n,
            m,
            r,
            seed: self.seed,
            clamped,
        }
    }
}

/// Configuration a price was computed under.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "k")]
    pub steps: usize,
    pub rho: f64,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub r: Option<f64>,
    pub seed: u64,
    pub clamped: u64,
}

/// Simulated terminal prices, stored as `log S_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSamples {
    pub log_prices: Vec<f64>,
    /// Number of volatility evaluations where `|V|` hit [`VOL_CLAMP`].
    pub clamped: u64,
    pub provenance: Provenance,
}

impl TerminalSamples {
    pub fn prices(&self) -> Vec<f64> {
        self.log_prices.iter().map(|l| l.exp()).collect()
    }

    pub fn put(&self, strike: f64) -> Result<PricingResult> {
        let mut res = put_price(&self.prices(), strike)?;
        res.provenance = Some(self.provenance.clone());
        Ok(res)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Put,
    Call,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    pub kind: OptionKind,
    pub price: f64,
    pub stderr: f64,
    pub paths: usize,
    pub strike: f64,
    pub provenance: Option<Provenance>,
}

impl PricingResult {
    /// JSON `{price, stderr, N, K, T, k, rho, H, n, m, r, seed, clamped, kind}`.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::json!({
            "kind": self.kind,
            "price": self.price,
            "stderr": self.stderr,
            "N": self.paths,
            "K": self.strike,
        });
        if let Some(p) = &self.provenance {
            let extra = serde_json::to_value(p).expect("provenance serializes");
            v.as_object_mut()
                .unwrap()
                .extend(extra.as_object().unwrap().clone());
        }
        v.to_string()
    }
}

/// Put price `E (K − S_T)_+` with its Monte Carlo standard error.
pub fn put_price(samples: &[f64], strike: f64) -> Result<PricingResult> {
    if samples.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least two samples, got {}",
            samples.len()
        )));
    }
    if !(strike >= 0.0) {
        return Err(Error::invalid(format!("strike must be >= 0, got {strike}")));
    }
    let payoffs: Vec<f64> = samples.iter().map(|s| (strike - s).max(0.0)).collect();
    let (price, stderr) = mean_and_stderr(&payoffs);
    Ok(PricingResult {
        kind: OptionKind::Put,
        price,
        stderr,
        paths: samples.len(),
        strike,
        provenance: None,
    })
}

/// Call price from a put price by parity, `C = P + S_0 − K` with `S_0 = 1`.
pub fn call_via_parity(put: &PricingResult, strike: f64) -> PricingResult {
    if let Some(p) = &put.provenance {
        if p.rho > 0.0 {
            log::warn!(
                "call via put-call parity with rho = {} > 0: the price process need not be a martingale",
                p.rho
            );
        }
    }
    PricingResult {
        kind: OptionKind::Call,
        price: put.price + 1.0 - strike,
        stderr: put.stderr,
        paths: put.paths,
        strike,
        provenance: put.provenance.clone(),
    }
}

#[inline]
fn clamp_vol(v: f64, clamped: &mut u64) -> f64 {
    if v.abs() > VOL_CLAMP {
        *clamped += 1;
        v.clamp(-VOL_CLAMP, VOL_CLAMP)
    } else {
        v
    }
}

/// Simulates `log S_T` for every path of `config`.
pub fn simulate_terminal_prices(config: &PricingConfig) -> Result<TerminalSamples> {
    config.validate()?;
    let (log_prices, clamped) = match &config.vol {
        VolSource::Scheme(scheme) => {
            let mut out = simulate_coupled(
                std::slice::from_ref(scheme),
                config.horizon,
                config.steps,
                config.paths,
                config.rho,
                config.seed,
            )?;
            out.pop().unwrap()
        }
        VolSource::ExactOracle { hurst } => simulate_oracle(*hurst, config)?,
    };
    check_finite(&log_prices)?;
    Ok(TerminalSamples {
        log_prices,
        clamped,
        provenance: config.provenance(clamped),
    })
}

/// Terminal prices under several schemes driven by one Brownian motion.
///
/// All OU factors of all schemes are simulated jointly, so every scheme sees
/// the same `W` and the same `B`. Differences between schemes are then
/// estimated with common random numbers.
pub fn simulate_terminal_prices_common(
    schemes: &[QuadratureScheme],
    horizon: f64,
    steps: usize,
    paths: usize,
    rho: f64,
    seed: u64,
) -> Result<Vec<TerminalSamples>> {
    let configs: Vec<PricingConfig> = schemes
        .iter()
        .map(|s| PricingConfig {
            strike: 0.0,
            horizon,
            steps,
            paths,
            rho,
            vol: VolSource::Scheme(s.clone()),
            seed,
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let raw = simulate_coupled(schemes, horizon, steps, paths, rho, seed)?;
    raw.into_iter()
        .zip(&configs)
        .map(|((log_prices, clamped), c)| {
            check_finite(&log_prices)?;
            Ok(TerminalSamples {
                log_prices,
                clamped,
                provenance: c.provenance(clamped),
            })
        })
        .collect()
}

fn check_finite(log_prices: &[f64]) -> Result<()> {
    match log_prices.iter().position(|l| !l.is_finite()) {
        Some(p) => Err(Error::numerical(format!(
            "log price of path {p} is not finite ({}); aborting run",
            log_prices[p]
        ))),
        None => Ok(()),
    }
}

fn simulate_coupled(
    schemes: &[QuadratureScheme],
    horizon: f64,
    steps: usize,
    paths: usize,
    rho: f64,
    seed: u64,
) -> Result<Vec<(Vec<f64>, u64)>> {
    let mut offsets = Vec::with_capacity(schemes.len());
    let mut nodes = Vec::new();
    for s in schemes {
        offsets.push(nodes.len());
        nodes.extend_from_slice(&s.nodes);
    }
    let dt = horizon / steps as f64;
    let model = IncrementModel::from_nodes(&nodes, dt, DEFAULT_TOL_RANK)?;
    let count = schemes.len();

    let per_path: Vec<(Vec<f64>, Vec<u64>)> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut path = OuPath::new(&model, seed, p as u64);
            let mut log_s = vec![0.0; count];
            let mut vol = vec![0.0; count];
            let mut clamped = vec![0u64; count];
            for _ in 0..steps {
                let inc = path.step();
                let db = inc.correlated(rho);
                for i in 0..count {
                    let v = clamp_vol(vol[i], &mut clamped[i]);
                    let sigma = v.exp();
                    log_s[i] += -0.5 * sigma * sigma * dt + sigma * db;
                }
                for (i, s) in schemes.iter().enumerate() {
                    vol[i] = path.combine(&s.kernel_weights, offsets[i]);
                }
            }
            (log_s, clamped)
        })
        .collect();

    Ok((0..count)
        .map(|i| {
            let logs = per_path.iter().map(|(l, _)| l[i]).collect();
            let clamped = per_path.iter().map(|(_, c)| c[i]).sum();
            (logs, clamped)
        })
        .collect())
}

fn simulate_oracle(hurst: f64, config: &PricingConfig) -> Result<(Vec<f64>, u64)> {
    let steps = config.steps;
    let dt = config.horizon / steps as f64;
    let factor: Matrix = joint_volterra_driver_factor(hurst, config.horizon, steps)?;
    let dim = factor.rows();
    let nv = steps - 1;
    let rho = config.rho;
    let perp = (1.0 - rho * rho).max(0.0).sqrt();
    let per_path: Vec<(f64, u64)> = (0..config.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(config.seed, p as u64);
            let mut z = vec![0.0; dim];
            fill_normals(&mut rng, &mut z);
            let mut zp = vec![0.0; steps];
            fill_normals(&mut rng, &mut zp);
            let draw: Vec<f64> = (0..dim)
                .map(|i| factor.row(i)[..=i].iter().zip(&z).map(|(a, b)| a * b).sum())
                .collect();
            let mut log_s = 0.0;
            let mut clamped = 0;
            for i in 0..steps {
                let v = if i == 0 { 0.0 } else { draw[i - 1] };
                let sigma = clamp_vol(v, &mut clamped).exp();
                let db = rho * draw[nv + i] + perp * dt.sqrt() * zp[i];
                log_s += -0.5 * sigma * sigma * dt + sigma * db;
            }
            (log_s, clamped)
        })
        .collect();
    Ok((
        per_path.iter().map(|p| p.0).collect(),
        per_path.iter().map(|p| p.1).sum(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_scheme, ModelParams};

    fn scheme(n: usize) -> QuadratureScheme {
        build_scheme(&ModelParams::new(0.1, 1.0).unwrap(), n, 5, None).unwrap()
    }

    fn config(vol: VolSource, paths: usize) -> PricingConfig {
        PricingConfig {
            strike: 1.0,
            horizon: 1.0,
            steps: 32,
            paths,
            rho: 0.0,
            vol,
            seed: 42,
        }
    }

    #[test]
    fn put_edge_cases() {
        let zero = put_price(&[0.5, 1.5, 2.0], 0.0).unwrap();
        assert_eq!((zero.price, zero.stderr), (0.0, 0.0));
        let flat = put_price(&[1.0; 10], 2.0).unwrap();
        assert_eq!((flat.price, flat.stderr), (1.0, 0.0));
        assert!(put_price(&[], 1.0).unwrap_err().is_invalid_argument());
        assert!(put_price(&[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn parity_arithmetic() {
        let put = |price| PricingResult {
            kind: OptionKind::Put,
            price,
            stderr: 0.01,
            paths: 10,
            strike: 0.0,
            provenance: None,
        };
        assert!((call_via_parity(&put(0.382925), 1.0).price - 0.382925).abs() < 1e-15);
        assert_eq!(call_via_parity(&put(1.0), 2.0).price, 0.0);
        let c = call_via_parity(&put(0.2), 0.5);
        assert!((c.price - 0.7).abs() < 1e-15);
        assert_eq!(c.stderr, 0.01);
        assert_eq!(c.kind, OptionKind::Call);
    }

    #[test]
    fn put_is_monotone_in_strike() {
        let s = simulate_terminal_prices(&config(VolSource::Scheme(scheme(4)), 500)).unwrap();
        let mut prev = -1.0;
        for i in 0..40 {
            let p = s.put(0.05 * i as f64).unwrap();
            assert!(p.price >= prev && p.price <= 0.05 * i as f64);
            prev = p.price;
        }
    }

    #[test]
    fn terminal_prices_deterministic_and_positive() {
        let c = config(VolSource::Scheme(scheme(4)), 200);
        let a = simulate_terminal_prices(&c).unwrap();
        assert_eq!(a, simulate_terminal_prices(&c).unwrap());
        assert!(a.prices().iter().all(|&s| s >= 0.0));
        assert!(a.log_prices.iter().all(|l| l.is_finite()));
        assert_eq!(a.clamped, 0);
    }

    #[test]
    fn single_scheme_matches_coupled_run_of_one() {
        let s = scheme(4);
        let single = simulate_terminal_prices(&config(VolSource::Scheme(s.clone()), 50)).unwrap();
        let coupled = simulate_terminal_prices_common(&[s], 1.0, 32, 50, 0.0, 42).unwrap();
        assert_eq!(single.log_prices, coupled[0].log_prices);
    }

    #[test]
    fn oracle_source_runs() {
        let c = config(VolSource::ExactOracle { hurst: 0.1 }, 100);
        let a = simulate_terminal_prices(&c).unwrap();
        assert_eq!(a, simulate_terminal_prices(&c).unwrap());
        assert_eq!(a.provenance.n, None);
    }

    #[test]
    fn config_validation() {
        let mut c = config(VolSource::ExactOracle { hurst: 0.1 }, 100);
        c.rho = -1.2;
        assert!(simulate_terminal_prices(&c)
            .unwrap_err()
            .is_invalid_argument());
        c.rho = -0.5;
        assert!(c.parity_safe());
        c.paths = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_fields() {
        let s = simulate_terminal_prices(&config(VolSource::Scheme(scheme(2)), 20)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.put(1.0).unwrap().to_json()).unwrap();
        for key in [
            "price", "stderr", "N", "K", "T", "k", "rho", "H", "n", "m", "r", "seed", "clamped",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
