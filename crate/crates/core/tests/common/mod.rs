//! Test-only oracles, independent of the library's integration paths.
#![allow(dead_code, clippy::excessive_precision)]

use ou_lift::QuadratureScheme;

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One Gauss-Kronrod 7/15 panel: (kronrod estimate, |kronrod − gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature by recursive bisection.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, est: (f64, f64), depth: u32) -> f64 {
        if est.1 <= tol || depth > 60 {
            return est.0;
        }
        let m = 0.5 * (a + b);
        let l = gk15(f, a, m);
        let r = gk15(f, m, b);
        rec(f, a, m, 0.5 * tol, l, depth + 1) + rec(f, m, b, 0.5 * tol, r, depth + 1)
    }
    let est = gk15(f, a, b);
    rec(f, a, b, abs_tol, est, 0)
}

/// `∫_0^T (s^(H-1/2) − K_n(s))² ds` by adaptive quadrature on dyadic pieces
/// `[T 2^(-j-1), T 2^(-j)]`, with the piece next to 0 replaced by the leading
/// terms of its expansion.
pub fn squared_kernel_distance(scheme: &QuadratureScheme, horizon: f64) -> f64 {
    let h = scheme.hurst();
    let a = h + 0.5;
    let f = |s: f64| (s.powf(a - 1.0) - scheme.kernel_eval(s)).powi(2);
    let mut total = 0.0;
    let mut hi = horizon;
    for _ in 0..220 {
        let lo = 0.5 * hi;
        let piece_scale = hi.powf(2.0 * h);
        total += adaptive(&f, lo, hi, 1e-15 * piece_scale);
        hi = lo;
    }
    let k0 = scheme.kernel_eval(0.0);
    let eps = hi;
    total + eps.powf(2.0 * h) / (2.0 * h) - 2.0 * k0 * eps.powf(a) / a + k0 * k0 * eps
}

/// Black-Scholes put with `S_0 = K = T = σ = 1`: `Φ(1/2) − Φ(−1/2)` (mpmath).
pub const UNIT_VOL_ATM_PUT: f64 = 0.382_924_922_548_026_207_275_409_221_217;

/// Unbiased sample variance and the standard error of that variance
/// estimate for Gaussian data.
pub fn variance_with_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var, var * (2.0 / (n - 1.0)).sqrt())
}
