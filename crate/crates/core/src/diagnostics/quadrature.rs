//! Adaptive Gauss-Kronrod (7/15) quadrature and trapezoid helpers.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and the difference to the embedded 7-point Gauss rule.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// `∫_a^b f` to relative tolerance `rel_tol` by recursive bisection, at most
/// `max_depth` levels deep. Returns the estimate and the accumulated error bound.
pub fn integrate_adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64, max_depth: u32) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let (whole, err) = gk15(&mut f, a, b);
    let target = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
    if err <= target {
        return (whole, err);
    }
    let mut stack = vec![(a, b, whole, err, 0u32)];
    let mut total = 0.0;
    let mut total_err = 0.0;
    while let Some((lo, hi, est, e, depth)) = stack.pop() {
        let width_share = (hi - lo) / (b - a);
        if e <= target * width_share || depth >= max_depth {
            total += est;
            total_err += e;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (l, le) = gk15(&mut f, lo, mid);
        let (r, re) = gk15(&mut f, mid, hi);
        stack.push((lo, mid, l, le, depth + 1));
        stack.push((mid, hi, r, re, depth + 1));
    }
    (total, total_err)
}

/// Trapezoid rule for samples `v` at increasing times `t`.
pub fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2).zip(v.windows(2)).map(|(tw, vw)| 0.5 * (tw[1] - tw[0]) * (vw[0] + vw[1])).sum()
}
