//! Geometric grids of mean-reversion speeds and Gauss rules for the weight
//! `x^(-α)`, assembled into a finite sum of exponentials approximating the
//! fractional kernel `t^(H-1/2)`.
//!
//! Each interval `[ξ_i, ξ_{i+1}]` of the grid carries an `m`-point Gauss rule
//! with respect to `x^(-α)`. Rules are built in the rescaled variable
//! `u = x / ξ_i ∈ [1, λ]` so that the large upper truncation point never
//! enters a power directly:
//!
//! 1. discretize `u^(-α) du` with composite Gauss-Legendre on a geometric
//!    subdivision of `[1, λ]`,
//! 2. run the Stieltjes procedure on the discrete measure to obtain the
//!    Jacobi matrix,
//! 3. take its eigenvalues and squared first eigenvector components,
//! 4. map back with `x = ξ_i u`, `c = ξ_i^(1-α) c_u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::gauss_legendre;
use crate::special::gamma_fn;

/// Largest `m` for which double precision reliably meets the moment tolerance.
pub const MAX_RELIABLE_POINTS: usize = 10;

/// Gauss-Legendre points per geometric piece of the discretized weight.
const PIECE_POINTS: usize = 32;
/// Minimum number of geometric pieces; with `PIECE_POINTS` this gives at least 256 points.
const MIN_PIECES: usize = 8;
/// Upper bound on the ratio of endpoints of a single piece.
const PIECE_RATIO: f64 = 2.0;

/// Hurst index and time horizon, with the derived exponents used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    hurst: f64,
    horizon: f64,
}

impl ModelParams {
    pub fn new(hurst: f64, horizon: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 0.5) {
            return Err(Error::invalid(format!(
                "Hurst index must lie in (0, 1/2), got {hurst}"
            )));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!(
                "time horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self { hurst, horizon })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `α = H + 1/2`, the exponent of the weight `x^(-α)`.
    pub fn alpha(&self) -> f64 {
        self.hurst + 0.5
    }

    /// `γ = 1/2 - H`, governs the lower truncation point.
    pub fn gamma(&self) -> f64 {
        0.5 - self.hurst
    }

    /// `δ = H`, governs the upper truncation point.
    pub fn delta(&self) -> f64 {
        self.hurst
    }
}

/// Log-equidistant breakpoints `ξ_0 < ξ_1 < … < ξ_n` with
/// `ξ_0 = n^(-r/γ)` and `ξ_n = n^(r/δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricGrid {
    pub n: usize,
    pub r: f64,
    pub xi: Vec<f64>,
}

impl GeometricGrid {
    pub fn lower(&self) -> f64 {
        self.xi[0]
    }

    pub fn upper(&self) -> f64 {
        self.xi[self.n]
    }

    /// Interval `i` as `(ξ_i, ξ_{i+1})`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.xi[i], self.xi[i + 1])
    }
}

pub fn geometric_grid(params: &ModelParams, n: usize, r: f64) -> Result<GeometricGrid> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "geometric grid needs n >= 2 intervals, got {n}"
        )));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("rate r must be positive, got {r}")));
    }
    // re-validate in case params were built through deserialization
    let params = ModelParams::new(params.hurst, params.horizon)?;
    let log_n = (n as f64).ln();
    let log_lo = -r / params.gamma() * log_n;
    let log_hi = r / params.delta() * log_n;
    let mut xi: Vec<f64> = (0..=n)
        .map(|i| (log_lo + (log_hi - log_lo) * i as f64 / n as f64).exp())
        .collect();
    xi[0] = log_lo.exp();
    xi[n] = log_hi.exp();
    if !xi.iter().all(|v| v.is_finite() && *v > 0.0) || !xi.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::numerical(format!(
            "geometric grid with n={n}, r={r} is not representable in double precision"
        )));
    }
    Ok(GeometricGrid { n, r, xi })
}

/// Moments `m_k = ∫_a^b x^(k-α) dx` for `k = 0..count`.
pub fn weighted_moments(a: f64, b: f64, alpha: f64, count: usize) -> Result<Vec<f64>> {
    if !(a > 0.0) {
        return Err(Error::invalid(format!(
            "lower endpoint must be positive, got {a}"
        )));
    }
    if !(b >= a) {
        return Err(Error::invalid(format!("need b >= a, got a={a}, b={b}")));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "weight exponent must lie in [0, 1), got {alpha}"
        )));
    }
    let log_ratio = (b / a).ln();
    Ok((0..count)
        .map(|k| {
            let p = k as f64 + 1.0 - alpha;
            a.powf(p) * (p * log_ratio).exp_m1() / p
        })
        .collect())
}

/// `m`-point Gauss rule on `[a, b]` for the weight `x^(-α)`.
///
/// Returns ascending nodes strictly inside `(a, b)` and positive weights `c_j`
/// with `Σ_j c_j x_j^k = ∫_a^b x^(k-α) dx` for `k < 2m`.
pub fn gauss_rule_weighted(a: f64, b: f64, alpha: f64, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!(
            "lower endpoint must be positive, got {a}"
        )));
    }
    if !(b > a) || !b.is_finite() {
        return Err(Error::invalid(format!(
            "Gauss rule needs a < b, got a={a}, b={b}"
        )));
    }
    if m == 0 {
        return Err(Error::invalid("Gauss rule needs m >= 1 points"));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "weight exponent must lie in [0, 1), got {alpha}"
        )));
    }
    let lambda = b / a;
    let (nodes_u, weights_u) = unit_gauss_rule(lambda, alpha, m)?;
    let scale = a.powf(1.0 - alpha);
    let nodes: Vec<f64> = nodes_u.iter().map(|u| a * u).collect();
    let weights: Vec<f64> = weights_u.iter().map(|c| scale * c).collect();

    let inside = nodes.iter().all(|&x| x > a && x < b);
    let ascending = nodes.windows(2).all(|w| w[0] < w[1]);
    let positive = weights.iter().all(|&c| c > 0.0 && c.is_finite());
    if !(inside && ascending && positive) {
        return Err(Error::numerical(format!(
            "Gauss rule on [{a}, {b}] with m={m}, alpha={alpha} lost interior nodes or positive \
             weights: nodes={nodes:?}, weights={weights:?}"
        )));
    }
    Ok((nodes, weights))
}

/// Gauss rule for `u^(-α) du` on `[1, λ]`.
fn unit_gauss_rule(lambda: f64, alpha: f64, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (points, masses) = discretize_weight(lambda, alpha, m);
    let (diag, offdiag) = stieltjes(&points, &masses, m)?;
    let total: f64 = masses.iter().sum();
    let (eig, first) = tridiagonal_eigen(diag, offdiag)?;
    let mut rule: Vec<(f64, f64)> = eig
        .into_iter()
        .zip(first)
        .map(|(x, z)| (x, total * z * z))
        .collect();
    rule.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(rule.into_iter().unzip())
}

/// Composite Gauss-Legendre discretization of `u^(-α) du` on `[1, λ]` over
/// geometric pieces of ratio at most 2.
fn discretize_weight(lambda: f64, alpha: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let pieces = ((lambda.ln() / PIECE_RATIO.ln()).ceil() as usize).max(MIN_PIECES);
    let per_piece = PIECE_POINTS.max(m + 4);
    let (gx, gw) = gauss_legendre(per_piece);
    let log_lambda = lambda.ln();
    let mut points = Vec::with_capacity(pieces * per_piece);
    let mut masses = Vec::with_capacity(pieces * per_piece);
    for p in 0..pieces {
        let lo = (log_lambda * p as f64 / pieces as f64).exp();
        let hi = if p + 1 == pieces {
            lambda
        } else {
            (log_lambda * (p + 1) as f64 / pieces as f64).exp()
        };
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in gx.iter().zip(&gw) {
            let u = mid + half * x;
            points.push(u);
            masses.push(w * half * u.powf(-alpha));
        }
    }
    (points, masses)
}

/// Stieltjes procedure with orthonormalized polynomials and full
/// reorthogonalization. Returns the diagonal and off-diagonal of the `m × m`
/// Jacobi matrix of the discrete measure.
fn stieltjes(points: &[f64], masses: &[f64], m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let npts = points.len();
    let inner = |p: &[f64], q: &[f64]| -> f64 {
        masses
            .iter()
            .zip(p.iter().zip(q))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    };
    let total: f64 = masses.iter().sum();
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / total.sqrt(); npts]];
    let mut diag = Vec::with_capacity(m);
    let mut offdiag = Vec::with_capacity(m.saturating_sub(1));
    for k in 0..m {
        let pk = &basis[k];
        let xp: Vec<f64> = points.iter().zip(pk).map(|(x, p)| x * p).collect();
        let a_k = inner(&xp, pk);
        diag.push(a_k);
        if k + 1 == m {
            break;
        }
        let mut q: Vec<f64> = xp.iter().zip(pk).map(|(xp, p)| xp - a_k * p).collect();
        if k > 0 {
            let b = offdiag[k - 1];
            for (qi, prev) in q.iter_mut().zip(&basis[k - 1]) {
                *qi -= b * prev;
            }
        }
        for _ in 0..2 {
            for pj in &basis {
                let proj = inner(&q, pj);
                for (qi, pji) in q.iter_mut().zip(pj) {
                    *qi -= proj * pji;
                }
            }
        }
        let norm = inner(&q, &q).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::numerical(format!(
                "Stieltjes procedure broke down at degree {}",
                k + 1
            )));
        }
        offdiag.push(norm);
        basis.push(q.into_iter().map(|v| v / norm).collect());
    }
    Ok((diag, offdiag))
}

/// Eigenvalues and first eigenvector components of a symmetric tridiagonal
/// matrix by implicit QL with Wilkinson-type shifts.
fn tridiagonal_eigen(mut d: Vec<f64>, offdiag: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let mut e = offdiag;
    e.resize(n, 0.0);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return Err(Error::numerical(format!(
                    "tridiagonal eigensolver did not converge for eigenvalue {l} \
                     (diag={d:?}, offdiag={e:?})"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}

/// Finite sum of exponentials `K_n(t) = Σ_j w_j e^(-t x_j)` approximating the
/// fractional kernel `t^(H-1/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureScheme {
    pub params: ModelParams,
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub grid: GeometricGrid,
    /// Mean-reversion speeds, ascending, `m` per interval.
    pub nodes: Vec<f64>,
    /// Gauss weights for `x^(-α) dx`.
    pub gauss_weights: Vec<f64>,
    /// `gauss_weights / Γ(1-α)`.
    pub kernel_weights: Vec<f64>,
}

/// Rate `2Hm/3` at which the `m`-point scheme converges.
pub fn default_rate(hurst: f64, m: usize) -> f64 {
    2.0 * hurst * m as f64 / 3.0
}

pub fn build_scheme(
    params: &ModelParams,
    n: usize,
    m: usize,
    r: Option<f64>,
) -> Result<QuadratureScheme> {
    if m == 0 {
        return Err(Error::invalid("points per interval m must be >= 1"));
    }
    if m > MAX_RELIABLE_POINTS {
        log::warn!(
            "m = {m} exceeds {MAX_RELIABLE_POINTS}; moment residuals may exceed tolerance in double precision"
        );
    }
    let r = r.unwrap_or_else(|| default_rate(params.hurst(), m));
    let grid = geometric_grid(params, n, r)?;
    let alpha = params.alpha();
    let mut nodes = Vec::with_capacity(n * m);
    let mut gauss_weights = Vec::with_capacity(n * m);
    for i in 0..n {
        let (a, b) = grid.interval(i);
        let (x, c) = gauss_rule_weighted(a, b, alpha, m)?;
        nodes.extend(x);
        gauss_weights.extend(c);
    }
    let norm = gamma_fn(1.0 - alpha)?;
    let kernel_weights = gauss_weights.iter().map(|c| c / norm).collect();
    Ok(QuadratureScheme {
        params: *params,
        n,
        m,
        r,
        grid,
        nodes,
        gauss_weights,
        kernel_weights,
    })
}

impl QuadratureScheme {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn hurst(&self) -> f64 {
        self.params.hurst()
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon()
    }

    /// `K_n(t) = Σ_j w_j e^(-t x_j)`.
    pub fn kernel_eval(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.kernel_weights)
            .map(|(x, w)| w * (-t * x).exp())
            .sum()
    }

    /// Nodes and Gauss weights of interval `i`.
    pub fn interval_rule(&self, i: usize) -> (&[f64], &[f64]) {
        let range = i * self.m..(i + 1) * self.m;
        (&self.nodes[range.clone()], &self.gauss_weights[range])
    }

    /// Largest relative moment residual over all intervals and `k < 2m`.
    ///
    /// Computed in the rescaled variable `u = x / ξ_i`, which leaves the
    /// relative residual unchanged and avoids overflow of `ξ_n^k`.
    pub fn max_moment_residual(&self) -> f64 {
        let alpha = self.params.alpha();
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (a, b) = self.grid.interval(i);
            let (x, c) = self.interval_rule(i);
            let exact =
                weighted_moments(1.0, b / a, alpha, 2 * self.m).expect("grid intervals are valid");
            let scale = a.powf(1.0 - alpha);
            for (k, mk) in exact.iter().enumerate() {
                let approx: f64 = x
                    .iter()
                    .zip(c)
                    .map(|(x, c)| (c / scale) * (x / a).powi(k as i32))
                    .sum();
                worst = worst.max(((approx - mk) / mk).abs());
            }
        }
        worst
    }

    /// Copy of the scheme with every kernel weight set to zero, i.e. `K_n ≡ 0`.
    pub fn zeroed(&self) -> Self {
        let mut s = self.clone();
        s.gauss_weights.iter_mut().for_each(|w| *w = 0.0);
        s.kernel_weights.iter_mut().for_each(|w| *w = 0.0);
        s
    }

    /// Short provenance tag identifying the construction parameters.
    pub fn scheme_id(&self) -> String {
        format!(
            "H={};T={};n={};m={};r={}",
            self.hurst(),
            self.horizon(),
            self.n,
            self.m,
            self.r
        )
    }

    pub fn to_document(&self) -> SchemeDocument {
        SchemeDocument {
            hurst: self.hurst(),
            horizon: self.horizon(),
            n: self.n,
            m: self.m,
            r: self.r,
            xi: self.grid.xi.clone(),
            nodes: self.nodes.clone(),
            gauss_weights: self.gauss_weights.clone(),
            kernel_weights: self.kernel_weights.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("scheme serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SchemeDocument = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("malformed scheme document: {e}")))?;
        doc.into_scheme()
    }
}

/// On-disk JSON layout of a [`QuadratureScheme`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeDocument {
    #[serde(rename = "H")]
    pub hurst: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub xi: Vec<f64>,
    pub nodes: Vec<f64>,
    pub gauss_weights: Vec<f64>,
    pub kernel_weights: Vec<f64>,
}

impl SchemeDocument {
    pub fn into_scheme(self) -> Result<QuadratureScheme> {
        let params = ModelParams::new(self.hurst, self.horizon)?;
        let len = self.n * self.m;
        if self.xi.len() != self.n + 1
            || self.nodes.len() != len
            || self.gauss_weights.len() != len
            || self.kernel_weights.len() != len
        {
            return Err(Error::invalid(format!(
                "scheme document lengths do not match n={}, m={}",
                self.n, self.m
            )));
        }
        Ok(QuadratureScheme {
            params,
            n: self.n,
            m: self.m,
            r: self.r,
            grid: GeometricGrid {
                n: self.n,
                r: self.r,
                xi: self.xi,
            },
            nodes: self.nodes,
            gauss_weights: self.gauss_weights,
            kernel_weights: self.kernel_weights,
        })
    }
}
