//! Exact simulation of the OU lift on a uniform time grid, and an exact
//! Cholesky sampler of the Volterra process used as a reference.
//!
//! Over one step of length `dt` every OU factor evolves as
//! `Y_{t+dt}(x_j) = e^(-x_j dt) Y_t(x_j) + ε_j`, where the increments
//! `ε_j = ∫_t^{t+dt} e^(-(t+dt-s) x_j) dW_s` and the Brownian increment `ΔW`
//! are jointly Gaussian with
//!
//! ```text
//! Cov(ε_j, ε_l) = (1 − e^(-dt (x_j+x_l))) / (x_j + x_l)
//! Cov(ε_j, ΔW)  = (1 − e^(-dt x_j)) / x_j
//! Var(ΔW)       = dt
//! ```
//!
//! This covariance has low numerical rank for small `dt`, so it is factored
//! with a pivoted Cholesky and sampled with `rank` normals per step.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{kernel_ou_covariance, ou_covariance, volterra_variance, CompensatedSum};
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_with_jitter, gauss_legendre, pivoted_cholesky, Matrix, PivotedCholesky,
};
use crate::quadrature::QuadratureScheme;
use crate::rng::{fill_normals, normal, path_rng, PathRng};
use crate::special::gamma_fn;

/// Relative trace tolerance at which the increment factorization is truncated.
pub const DEFAULT_TOL_RANK: f64 = 1e-12;

/// Factorized joint law of one step's OU increments and Brownian increment.
#[derive(Debug, Clone)]
pub struct IncrementModel {
    pub dt: f64,
    pub nodes: Vec<f64>,
    /// `e^(-dt x_j)`.
    pub decay: Vec<f64>,
    pub cov_factor: PivotedCholesky,
    pub rank: usize,
    /// Columns of `P L` in the original ordering, `rank × (nodes + 1)`.
    columns: Vec<Vec<f64>>,
}

/// Joint covariance of `(ε_1, …, ε_d, ΔW)` for the given speeds.
pub fn increment_covariance(nodes: &[f64], dt: f64) -> Matrix {
    let d = nodes.len();
    Matrix::from_fn(d + 1, d + 1, |i, j| match (i < d, j < d) {
        (true, true) => ou_covariance(nodes[i], nodes[j], dt),
        (true, false) => ou_covariance(nodes[i], 0.0, dt),
        (false, true) => ou_covariance(0.0, nodes[j], dt),
        (false, false) => dt,
    })
}

pub fn increment_model(
    scheme: &QuadratureScheme,
    dt: f64,
    tol_rank: f64,
) -> Result<IncrementModel> {
    IncrementModel::from_nodes(&scheme.nodes, dt, tol_rank)
}

impl IncrementModel {
    pub fn from_nodes(nodes: &[f64], dt: f64, tol_rank: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if let Some(x) = nodes.iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::invalid(format!(
                "mean-reversion speeds must be >= 0, got {x}"
            )));
        }
        let cov = increment_covariance(nodes, dt);
        let factor = pivoted_cholesky(&cov, tol_rank).map_err(|e| match e {
            Error::NotPsd { .. } => Error::numerical(format!("increment covariance: {e}")),
            other => other,
        })?;
        let err = factor.reconstruct().max_abs_diff(&cov);
        let bound = tol_rank.max(64.0 * f64::EPSILON) * factor.trace;
        if err > bound {
            return Err(Error::numerical(format!(
                "increment factorization error {err:e} exceeds {bound:e} at rank {}",
                factor.rank
            )));
        }
        let g = factor.unpermuted();
        let columns = (0..factor.rank)
            .map(|c| (0..g.rows()).map(|i| g[(i, c)]).collect())
            .collect();
        Ok(Self {
            dt,
            nodes: nodes.to_vec(),
            decay: nodes.iter().map(|x| (-dt * x).exp()).collect(),
            rank: factor.rank,
            cov_factor: factor,
            columns,
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }
}

/// Brownian increments produced by one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepIncrements {
    /// Increment of the Brownian motion driving the OU factors.
    pub dw: f64,
    /// Increment of an independent Brownian motion.
    pub dw_perp: f64,
}

impl StepIncrements {
    /// `ρ ΔW + √(1-ρ²) ΔW⊥`.
    pub fn correlated(&self, rho: f64) -> f64 {
        rho * self.dw + (1.0 - rho * rho).max(0.0).sqrt() * self.dw_perp
    }
}

/// State of all OU factors along a single path, with the path's own stream.
///
/// Each step consumes `rank` normals for the joint increment followed by one
/// normal for the independent driver.
#[derive(Debug, Clone)]
pub struct OuPath<'m> {
    model: &'m IncrementModel,
    state: Vec<f64>,
    rng: PathRng,
    z: Vec<f64>,
    eps: Vec<f64>,
}

impl<'m> OuPath<'m> {
    pub fn new(model: &'m IncrementModel, seed: u64, path: u64) -> Self {
        Self {
            model,
            state: vec![0.0; model.dim()],
            rng: path_rng(seed, path),
            z: vec![0.0; model.rank],
            eps: vec![0.0; model.dim() + 1],
        }
    }

    pub fn step(&mut self) -> StepIncrements {
        fill_normals(&mut self.rng, &mut self.z);
        self.eps.iter_mut().for_each(|e| *e = 0.0);
        for (col, &zc) in self.model.columns.iter().zip(&self.z) {
            for (e, g) in self.eps.iter_mut().zip(col) {
                *e += g * zc;
            }
        }
        for ((y, d), e) in self.state.iter_mut().zip(&self.model.decay).zip(&self.eps) {
            *y = d * *y + e;
        }
        let dw_perp = self.model.dt.sqrt() * normal(&mut self.rng);
        StepIncrements {
            dw: self.eps[self.model.dim()],
            dw_perp,
        }
    }

    /// OU factor values `∫_0^t e^(-(t-s) x_j) dW_s`.
    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// `Σ_j w_j Y_t(x_j)` for the given weights, which may cover a sub-range
    /// of the factors starting at `offset`.
    pub fn combine(&self, weights: &[f64], offset: usize) -> f64 {
        weights
            .iter()
            .zip(&self.state[offset..])
            .map(|(w, y)| w * y)
            .sum()
    }
}

/// Simulated trajectories of `W^{H,n}` and of the price driver increments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftPathBatch {
    pub times: Vec<f64>,
    /// Row-major `paths × (steps + 1)`.
    pub whn: Vec<f64>,
    /// Row-major `paths × steps`, `ΔB = ρ ΔW + √(1-ρ²) ΔW⊥`.
    #[serde(skip)]
    pub db: Vec<f64>,
    pub seed: u64,
    pub scheme_id: String,
    #[serde(skip)]
    pub paths: usize,
}

impl LiftPathBatch {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let w = self.times.len();
        &self.whn[p * w..(p + 1) * w]
    }

    pub fn driver_increments(&self, p: usize) -> &[f64] {
        let k = self.steps();
        &self.db[p * k..(p + 1) * k]
    }

    /// Values of all paths at the final time.
    pub fn terminal_values(&self) -> Vec<f64> {
        (0..self.paths)
            .map(|p| *self.path(p).last().unwrap())
            .collect()
    }

    pub const CSV_HEADER: &'static str = "path,t,whn";

    /// Long-format CSV `path,t,whn`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in 0..self.paths {
            for (t, v) in self.times.iter().zip(self.path(p)) {
                out.push_str(&format!("{p},{t},{v}\n"));
            }
        }
        out
    }

    /// JSON `{times, whn, seed, scheme_id}` with `whn` as one array per path.
    pub fn to_json(&self) -> String {
        let rows: Vec<&[f64]> = (0..self.paths).map(|p| self.path(p)).collect();
        serde_json::json!({
            "times": self.times,
            "whn": rows,
            "seed": self.seed,
            "scheme_id": self.scheme_id,
        })
        .to_string()
    }
}

fn validate_rho(rho: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "correlation must lie in [-1, 1], got {rho}"
        )))
    }
}

fn uniform_times(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| horizon * i as f64 / steps as f64)
        .collect()
}

/// Simulates `paths` trajectories of `W^{H,n}` on `steps` uniform steps up to
/// `horizon`. Exact in distribution at the grid times.
pub fn simulate_lift(
    scheme: &QuadratureScheme,
    horizon: f64,
    steps: usize,
    rho: f64,
    paths: usize,
    seed: u64,
) -> Result<LiftPathBatch> {
    if steps == 0 || paths == 0 {
        return Err(Error::invalid("need at least one step and one path"));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    validate_rho(rho)?;
    let model = increment_model(scheme, horizon / steps as f64, DEFAULT_TOL_RANK)?;
    let weights = &scheme.kernel_weights;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut path = OuPath::new(&model, seed, p as u64);
            let mut whn = Vec::with_capacity(steps + 1);
            let mut db = Vec::with_capacity(steps);
            whn.push(0.0);
            for _ in 0..steps {
                let inc = path.step();
                db.push(inc.correlated(rho));
                whn.push(path.combine(weights, 0));
            }
            (whn, db)
        })
        .collect();
    let (whn, db): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.into_iter().unzip();
    Ok(LiftPathBatch {
        times: uniform_times(horizon, steps),
        whn: whn.concat(),
        db: db.concat(),
        seed,
        scheme_id: scheme.scheme_id(),
        paths,
    })
}

/// A batch of lift paths that can be advanced in several calls.
///
/// Advancing by `a` then `b` steps reproduces a single advance by `a + b`
/// bit for bit, since every path keeps its own stream position.
pub struct LiftBatchState<'m> {
    paths: Vec<OuPath<'m>>,
    weights: Vec<f64>,
}

impl<'m> LiftBatchState<'m> {
    pub fn new(model: &'m IncrementModel, weights: &[f64], paths: usize, seed: u64) -> Self {
        Self {
            paths: (0..paths)
                .map(|p| OuPath::new(model, seed, p as u64))
                .collect(),
            weights: weights.to_vec(),
        }
    }

    /// Advances every path and returns the `W^{H,n}` values after each step,
    /// row-major `paths × steps`.
    pub fn advance(&mut self, steps: usize) -> Vec<f64> {
        let weights = &self.weights;
        self.paths
            .par_iter_mut()
            .flat_map_iter(|path| {
                (0..steps)
                    .map(|_| {
                        path.step();
                        path.combine(weights, 0)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// `R(s, t) = ∫_0^(s∧t) ((t-u)(s-u))^(H-1/2) du`, the covariance of the
/// Volterra process.
///
/// With `d = |t - s|` and `w = v^(1/α)` the integral becomes
/// `(1/α) ∫_0^{(s∧t)^α} (d + v^(1/α))^(α-1) dv`, which is bounded for
/// `d > 0` and has an integrable power singularity for `d = 0`. It is
/// evaluated by Gauss-Legendre on dyadic pieces refined towards `v = 0`.
pub fn rl_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    if s <= 0.0 {
        return 0.0;
    }
    let alpha = hurst + 0.5;
    let d = t - s;
    let upper = s.powf(alpha);
    // below `cutoff` the integrand is replaced by its value at v = 0
    let cutoff = if d > 0.0 {
        upper.min(d.powf(alpha)) * 2f64.powi(-40)
    } else {
        upper * 2f64.powi(-60)
    };
    let (gx, gw) = rl_rule();
    let integrand = |v: f64| (d + v.powf(1.0 / alpha)).powf(alpha - 1.0);
    let mut acc = CompensatedSum::default();
    let mut hi = upper;
    while hi > cutoff {
        let lo = (0.5 * hi).max(cutoff);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let piece: f64 = gx
            .iter()
            .zip(gw)
            .map(|(x, w)| w * integrand(mid + half * x))
            .sum();
        acc.add(half * piece);
        hi = lo;
    }
    let tail = if d > 0.0 {
        cutoff * d.powf(alpha - 1.0)
    } else {
        // ∫_0^c v^((α-1)/α) dv
        alpha * cutoff.powf((2.0 * alpha - 1.0) / alpha) / (2.0 * alpha - 1.0)
    };
    acc.add(tail);
    acc.value() / alpha
}

fn rl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// Covariance matrix `R(t_i, t_j)` on the given times.
pub fn rl_covariance_matrix(hurst: f64, times: &[f64]) -> Matrix {
    let k = times.len();
    let upper: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            (i..k)
                .map(|j| rl_covariance(hurst, times[i], times[j]))
                .collect()
        })
        .collect();
    let mut m = Matrix::zeros(k, k);
    for (i, row) in upper.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            m[(i, i + off)] = *v;
            m[(i + off, i)] = *v;
        }
    }
    m
}

/// Exact samples of the Volterra process at given times.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmSamples {
    pub times: Vec<f64>,
    /// Row-major `paths × times`.
    pub values: Vec<f64>,
    pub paths: usize,
}

impl FbmSamples {
    pub fn path(&self, p: usize) -> &[f64] {
        let k = self.times.len();
        &self.values[p * k..(p + 1) * k]
    }

    /// Values of every path at time index `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.paths).map(|p| self.path(p)[i]).collect()
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("need at least one sampling time"));
    }
    if !(times[0] > 0.0) || !times.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "sampling times must be positive and strictly increasing",
        ));
    }
    Ok(())
}

/// Lower-triangular matrix-vector product `L z`.
fn lower_mul(l: &Matrix, z: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = l.row(i)[..=i].iter().zip(z).map(|(a, b)| a * b).sum();
    }
}

/// Samples `W^H` exactly at `times` by Cholesky factorization of its
/// covariance. Cubic in the number of times.
pub fn exact_rl_fbm(hurst: f64, times: &[f64], paths: usize, seed: u64) -> Result<FbmSamples> {
    if !(hurst > 0.0 && hurst < 0.5) {
        return Err(Error::invalid(format!(
            "Hurst index must lie in (0, 1/2), got {hurst}"
        )));
    }
    validate_times(times)?;
    if paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let l = cholesky_with_jitter(&rl_covariance_matrix(hurst, times))?;
    let k = times.len();
    let rows: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut z = vec![0.0; k];
            fill_normals(&mut rng, &mut z);
            let mut out = vec![0.0; k];
            lower_mul(&l, &z, &mut out);
            out
        })
        .collect();
    Ok(FbmSamples {
        times: times.to_vec(),
        values: rows.concat(),
        paths,
    })
}

/// `Cov(W^H_t, W_s) = ∫_0^(s∧t) (t-u)^(α-1) du`.
pub fn rl_brownian_covariance(hurst: f64, t: f64, s: f64) -> f64 {
    let alpha = hurst + 0.5;
    let m = s.min(t);
    (t.powf(alpha) - (t - m).powf(alpha)) / alpha
}

/// Lower Cholesky factor of the joint law of `(W^H_{t_1}, …, W^H_{t_{k-1}},
/// ΔW_1, …, ΔW_k)` on a uniform grid of `k` steps.
pub(crate) fn joint_volterra_driver_factor(
    hurst: f64,
    horizon: f64,
    steps: usize,
) -> Result<Matrix> {
    let times = uniform_times(horizon, steps);
    let inner = &times[1..steps];
    let nv = inner.len();
    let dim = nv + steps;
    let rl = rl_covariance_matrix(hurst, inner);
    let dt = horizon / steps as f64;
    let cov = Matrix::from_fn(dim, dim, |i, j| match (i < nv, j < nv) {
        (true, true) => rl[(i, j)],
        (true, false) => {
            let q = j - nv;
            rl_brownian_covariance(hurst, inner[i], times[q + 1])
                - rl_brownian_covariance(hurst, inner[i], times[q])
        }
        (false, true) => {
            let q = i - nv;
            rl_brownian_covariance(hurst, inner[j], times[q + 1])
                - rl_brownian_covariance(hurst, inner[j], times[q])
        }
        (false, false) => {
            if i == j {
                dt
            } else {
                0.0
            }
        }
    });
    cholesky_with_jitter(&cov)
}

/// Joint covariance of `(W^H_T, OU_1(T), …, OU_d(T))` with
/// `OU_j(T) = ∫_0^T e^(-(T-s) x_j) dW_s`.
pub fn terminal_joint_covariance(scheme: &QuadratureScheme, horizon: f64) -> Result<Matrix> {
    let alpha = scheme.params.alpha();
    let x = &scheme.nodes;
    let cross: Vec<f64> = x
        .iter()
        .map(|&xj| kernel_ou_covariance(alpha, xj, horizon))
        .collect::<Result<_>>()?;
    let var = volterra_variance(scheme.hurst(), horizon);
    Ok(Matrix::from_fn(x.len() + 1, x.len() + 1, |i, j| {
        match (i, j) {
            (0, 0) => var,
            (0, j) => cross[j - 1],
            (i, 0) => cross[i - 1],
            (i, j) => ou_covariance(x[i - 1], x[j - 1], horizon),
        }
    }))
}

/// Monte Carlo estimate of `E (W^H_T − W^{H,n}_T)²` and its standard error,
/// from exact draws of the joint Gaussian vector of `W^H_T` and the OU factors.
pub fn joint_terminal_error_mc(
    scheme: &QuadratureScheme,
    horizon: f64,
    paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if paths < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let cov = terminal_joint_covariance(scheme, horizon)?;
    let factor = pivoted_cholesky(&cov, DEFAULT_TOL_RANK)
        .map_err(|e| Error::numerical(format!("joint terminal covariance: {e}")))?;
    let g = factor.unpermuted();
    let rank = factor.rank;
    let w = &scheme.kernel_weights;
    let squares: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut z = vec![0.0; rank];
            fill_normals(&mut rng, &mut z);
            let draw: Vec<f64> = (0..g.rows())
                .map(|i| g.row(i).iter().zip(&z).map(|(a, b)| a * b).sum())
                .collect();
            let approx: f64 = w.iter().zip(&draw[1..]).map(|(w, y)| w * y).sum();
            (draw[0] - approx).powi(2)
        })
        .collect();
    Ok(mean_and_stderr(&squares))
}

/// Sample mean and its standard error, summed in index order.
pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut sum = CompensatedSum::default();
    values.iter().for_each(|&v| sum.add(v));
    let mean = sum.value() / n;
    let mut ss = CompensatedSum::default();
    values.iter().for_each(|&v| ss.add((v - mean).powi(2)));
    let var = if values.len() > 1 {
        ss.value() / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

/// `Y_t(x) = (W_t − ∫_0^t W_s x e^(-(t-s)x) ds) / Γ(1/2 − H)` along a sampled
/// Brownian path, with the integral by the trapezoid rule.
///
/// `w[0]` is the value at time 0 and consecutive samples are `dt` apart.
pub fn lift_from_path(w: &[f64], dt: f64, x: f64, hurst: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("speed must be >= 0, got {x}")));
    }
    if !(hurst > 0.0 && hurst < 0.5) {
        return Err(Error::invalid(format!(
            "Hurst index must lie in (0, 1/2), got {hurst}"
        )));
    }
    let norm = gamma_fn(0.5 - hurst)?;
    let decay = (-x * dt).exp();
    let mut integral = 0.0;
    let mut out = Vec::with_capacity(w.len());
    for (i, &wi) in w.iter().enumerate() {
        if i > 0 {
            integral = decay * integral + 0.5 * dt * x * (decay * w[i - 1] + wi);
        }
        out.push((wi - integral) / norm);
    }
    Ok(out)
}

/// A Brownian path together with the OU process `∫_0^t e^(-(t-s)x) dW_s` it
/// drives, both exact at the grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivenOuPath {
    pub brownian: Vec<f64>,
    pub ou: Vec<f64>,
}

/// Samples one path of `(W, OU)` on `steps` steps of size `dt`.
pub fn exact_ou_with_driver(
    x: f64,
    dt: f64,
    steps: usize,
    seed: u64,
    path: u64,
) -> Result<DrivenOuPath> {
    let model = IncrementModel::from_nodes(&[x], dt, DEFAULT_TOL_RANK)?;
    let mut ou_path = OuPath::new(&model, seed, path);
    let mut brownian = Vec::with_capacity(steps + 1);
    let mut ou = Vec::with_capacity(steps + 1);
    brownian.push(0.0);
    ou.push(0.0);
    for _ in 0..steps {
        let inc = ou_path.step();
        brownian.push(brownian.last().unwrap() + inc.dw);
        ou.push(ou_path.state()[0]);
    }
    Ok(DrivenOuPath { brownian, ou })
}
