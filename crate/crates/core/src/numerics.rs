//! Shared numerical kernels: bracketed bisection, golden-section search,
//! the Lambert W function, adaptive Simpson quadrature, compensated
//! summation, and fixed-significance float formatting.

/// Root of `f` inside `[lo, hi]` by bisection. Requires a sign change on
/// the bracket. Converges to `tol` absolute (floored at a few ulps), which
/// 200 halvings always reach for finite brackets.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64, String> {
    if !(lo < hi) {
        return Err(format!("bad bracket [{lo}, {hi}]"));
    }
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(format!("no sign change on [{lo}, {hi}]"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol.max(4.0 * f64::EPSILON * mid.abs()) {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expand a bracket upward from `[lo, lo + step]` by doubling the width
/// until `f` changes sign, then bisect. `hi_cap` bounds the search.
pub fn bisect_expanding<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    step: f64,
    hi_cap: f64,
    tol: f64,
) -> Result<f64, String> {
    let flo = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    let mut width = step.max(1e-12);
    let mut hi = (lo + width).min(hi_cap);
    for _ in 0..200 {
        if f(hi).signum() != flo.signum() {
            return bisect(f, lo, hi, tol);
        }
        if hi >= hi_cap {
            return Err(format!("no sign change on [{lo}, {hi_cap}]"));
        }
        width *= 2.0;
        hi = (lo + width).min(hi_cap);
    }
    Err("bracket expansion did not terminate".into())
}

/// Argmin of a unimodal `f` on `[lo, hi]` by golden-section search, to
/// `tol` absolute in the argument.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let invphi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = hi - invphi * (hi - lo);
    let mut x2 = lo + invphi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Argmax counterpart of [`golden_min`].
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    golden_min(|x| -f(x), lo, hi, tol)
}

/// Principal branch W₀ of the Lambert W function (w e^w = x) for
/// x ≥ −1/e, by Halley iteration.
pub fn lambert_w0(x: f64) -> Result<f64, String> {
    let min_x = -1.0 / std::f64::consts::E;
    if x < min_x {
        return Err(format!("lambert_w0 undefined for x = {x} < -1/e"));
    }
    let mut w = if x > std::f64::consts::E {
        let l = x.ln();
        l - l.ln()
    } else if x >= 0.0 {
        x / (1.0 + x)
    } else {
        // Series seed near the branch point.
        let p = (2.0 * (1.0 + std::f64::consts::E * x)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0
    };
    for _ in 0..100 {
        let ew = w.exp();
        let diff = w * ew - x;
        if diff.abs() <= 1e-16 * (1.0 + x.abs()) {
            break;
        }
        let denom = ew * (w + 1.0) - (w + 2.0) * diff / (2.0 * w + 2.0);
        let step = diff / denom;
        w -= step;
        if step.abs() <= 1e-16 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Compensated (Kahan) summation accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

/// p-th percentile (p in [0, 100]) of an ascending-sorted slice, with
/// linear interpolation on rank p/100 · (n − 1).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let rank = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = rank - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Mean and standard error of a sample.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut s = KahanSum::new();
    for &v in values {
        s.add(v);
    }
    let mean = s.total() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let mut sq = KahanSum::new();
    for &v in values {
        sq.add((v - mean) * (v - mean));
    }
    let var = sq.total() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Format with 12 significant digits, shortest-form (no trailing zeros),
/// switching to scientific notation outside a readable magnitude window.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let s = if (-4..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.11e}", x)
    };
    trim_trailing_zeros(&s)
}

fn trim_trailing_zeros(s: &str) -> String {
    if let Some(epos) = s.find('e') {
        let (mant, exp) = s.split_at(epos);
        let mant = trim_trailing_zeros(mant);
        return format!("{mant}{exp}");
    }
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0');
    t.trim_end_matches('.').to_string()
}
