//! Reference computations used only by the tests. They share no code with the
//! library: special functions come from `statrs` and integrals from a
//! globally adaptive Gauss–Kronrod (7, 15) rule written here.

#![allow(dead_code, clippy::excessive_precision)]

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

const XK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let s = f(c - h * XK[j]) + f(c + h * XK[j]);
        k += WK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive: the interval with the largest error estimate is bisected
/// until the total estimate meets `tol` or roundoff, or a cap is reached.
fn adapt(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..4000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= tol.max(1e-15 * total.abs()) {
            break;
        }
        let (k, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = parts.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}

/// `∫_a^b f` with absolute error about `tol`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adapt(&mut f, a, b, tol)
}

/// Integral over a sequence of break points.
pub fn integrate_pieces(mut f: impl FnMut(f64) -> f64, points: &[f64], tol: f64) -> f64 {
    let n = (points.len() - 1) as f64;
    points
        .windows(2)
        .map(|w| adapt(&mut f, w[0], w[1], tol / n))
        .sum()
}

/// `∫_a^∞ f` via `x = a + u / (1 - u)`.
pub fn integrate_to_inf(mut f: impl FnMut(f64) -> f64, a: f64, tol: f64) -> f64 {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let d = 1.0 - u;
            f(a + u / d) / (d * d)
        },
        0.0,
        1.0,
        tol,
    )
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn t_pdf(x: f64, nu: f64) -> f64 {
    (ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p())
    .exp()
}

/// Central t CDF by integrating the density from 0.
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    let half = integrate(|u| t_pdf(u, nu), 0.0, x.abs(), 1e-15);
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Increasing bisection solve of `g(x) = target` on `[lo, hi]`.
pub fn bisect(g: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn t_quantile(p: f64, nu: f64) -> f64 {
    bisect(|x| t_cdf(x, nu), p, -60.0, 60.0)
}

/// Upper tail as the integral from `x` to infinity.
pub fn t_sf(x: f64, nu: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - t_sf(-x, nu);
    }
    integrate_to_inf(|u| t_pdf(u, nu), x, 1e-300_f64.max(1e-16 * t_pdf(x, nu)))
}

/// The `x` with `t_sf(x) = p`, by bisection on the log tail.
pub fn t_isf(p: f64, nu: f64) -> f64 {
    bisect(|x| -t_sf(x, nu).ln(), -p.ln(), -60.0, 1e4)
}

/// Density of `W = sqrt(V / ν)`, `V ~ χ²_ν`.
pub fn scaled_chi_pdf(w: f64, nu: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let v = nu * w * w;
    ((0.5 * nu - 1.0) * v.ln() - 0.5 * v - 0.5 * nu * std::f64::consts::LN_2 - ln_gamma(0.5 * nu)).exp()
        * 2.0
        * nu
        * w
}

fn chi_breaks(nu: f64) -> Vec<f64> {
    let s = (0.5 / nu).sqrt();
    let mut pts = vec![0.0];
    for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let p = 1.0 + k * s;
        if p > *pts.last().unwrap() {
            pts.push(p);
        }
    }
    pts
}

/// `E[g(W)]` with the tail past the last break point mapped to a finite range.
fn chi_expectation(g: impl Fn(f64) -> f64, nu: f64, tol: f64) -> f64 {
    let pts = chi_breaks(nu);
    let last = *pts.last().unwrap();
    let h = |w: f64| g(w) * scaled_chi_pdf(w, nu);
    integrate_pieces(h, &pts, tol) + integrate_to_inf(h, last, tol)
}

/// Non-central t CDF from `P(T <= x) = E[Φ(xW − δ)]`.
pub fn nct_cdf(x: f64, nu: f64, delta: f64) -> f64 {
    chi_expectation(|w| norm_cdf(x * w - delta), nu, 1e-14)
}

/// Non-central t density, `E[W φ(xW − δ)]`.
pub fn nct_pdf(x: f64, nu: f64, delta: f64) -> f64 {
    chi_expectation(|w| w * norm_pdf(x * w - delta), nu, 1e-15)
}

/// Four-point central difference of `f` at `x`.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

/// `1 − Ψ_{ν,δ}(x)` at the upper-τ point `x` of the central t.
pub fn power(tau: f64, delta: f64, nu: f64) -> f64 {
    1.0 - nct_cdf(t_isf(tau, nu), nu, delta)
}

/// Rejection set of the step-up rule, computed without sorting: for every
/// voxel the rank is the number of p-values not above it, the cutoff rank is
/// the largest rank meeting `p <= rank q / n`.
pub fn bh_bruteforce(p: &[f64], q: f64) -> Vec<bool> {
    let n = p.len();
    let rank = |x: f64| p.iter().filter(|&&y| y <= x).count();
    let mut k_star = 0;
    let mut cutoff = f64::NEG_INFINITY;
    for &x in p {
        let r = rank(x);
        if x <= r as f64 * q / n as f64 && r > k_star {
            k_star = r;
            cutoff = x;
        }
    }
    p.iter().map(|&x| x <= cutoff).collect()
}

/// Kolmogorov–Smirnov statistic of a sample against a CDF. Repeated values
/// (atoms such as clamped p-values) are compared at their right limit only.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len();
    let mut d = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sample[j + 1] == sample[i] {
            j += 1;
        }
        let f = cdf(sample[i]);
        d = d.max((f - (j + 1) as f64 / n as f64).abs());
        if j == i {
            d = d.max((f - i as f64 / n as f64).abs());
        }
        i = j + 1;
    }
    d
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

/// `∫₀¹ (√f − √g)² dp` on `p = e^{-w}`, splitting the `w` axis where the
/// densities change fastest.
pub fn hellinger_sq(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
    let h = |w: f64| {
        let p = (-w).exp();
        if p <= 0.0 || p >= 1.0 {
            return 0.0;
        }
        let d = f(p).sqrt() - g(p).sqrt();
        d * d * p
    };
    let pts = [0.0, 1e-6, 0.05, 0.3, 1.0, 2.0, 4.0, 7.0, 11.0, 16.0, 24.0, 40.0];
    integrate_pieces(h, &pts, 1e-12) + integrate_to_inf(h, 40.0, 1e-13)
}
