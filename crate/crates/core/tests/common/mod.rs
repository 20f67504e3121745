//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code, clippy::excessive_precision)]

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    let (whole, _) = gk15(&f, a, b);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        let width_share = (hi - lo) / (b - a);
        if err <= rel_tol * scale * width_share.max(1e-3) || depth > 60 {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// `int_0^upper x^m exp(-a x^gamma) dx`, integrated in `s = ln x`.
pub fn se_integral(a: f64, gamma: f64, m: f64, upper: f64) -> f64 {
    let g = |s: f64| ((m + 1.0) * s - a * (gamma * s).exp()).exp();
    // the integrand is below e^-745 (zero in f64) past this point
    let mut s_hi = 0.0f64;
    while (m + 1.0) * s_hi - a * (gamma * s_hi).exp() > -800.0 {
        s_hi += 0.5;
    }
    let s_hi = s_hi.min(upper.ln());
    let s_lo = -800.0 / (m + 1.0);
    if s_hi <= s_lo {
        return 0.0;
    }
    // split at the peak of the integrand for robustness
    let peak = (((m + 1.0) / (a * gamma)).ln() / gamma).clamp(s_lo, s_hi);
    let mut total = 0.0;
    for (lo, hi) in [(s_lo, peak), (peak, s_hi)] {
        if hi > lo {
            total += integrate(g, lo, hi, 1e-13);
        }
    }
    total
}

/// Root moment `<x^m>^(1/m)` of the density proportional to `exp(-a x^gamma)`.
pub fn se_root_moment_quad(a: f64, gamma: f64, m: f64) -> f64 {
    (se_integral(a, gamma, m, f64::INFINITY) / se_integral(a, gamma, 0.0, f64::INFINITY)).powf(1.0 / m)
}

/// CDF by quadrature of the unnormalized density.
pub fn se_cdf_quad(a: f64, gamma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    se_integral(a, gamma, 0.0, x) / se_integral(a, gamma, 0.0, f64::INFINITY)
}

/// Invert a non-decreasing function on `(0, inf)` by bisection.
pub fn invert<F: Fn(f64) -> f64>(f: F, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal upper tail via quadrature of the density.
pub fn normal_sf(z: f64) -> f64 {
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    integrate(phi, z, z + 40.0, 1e-13)
}
