//! Adaptive Simpson quadrature, plus helpers for piecewise-smooth and
//! semi-infinite integrands.

/// Absolute tolerance used for every density and transform integral.
pub const DEFAULT_TOL: f64 = 1e-9;

const MAX_DEPTH: u32 = 48;
const MIN_DEPTH: u32 = 5;
// Relative accuracy floor, so huge integrands cannot force a full-depth tree.
const REL_FLOOR: f64 = 1e-13;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -simpson(f, b, a, tol);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
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
    let accept = tol.max(REL_FLOOR * (left + right).abs());
    if depth >= MAX_DEPTH || (depth >= MIN_DEPTH && delta.abs() <= 15.0 * accept) {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

/// Integrates over `[a, b]`, splitting at every interior breakpoint so that
/// kinks and jumps of the integrand sit on piece boundaries.
pub fn simpson_pieces<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a && x < b && x.is_finite())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts);
    nodes.push(b);
    let piece_tol = tol / (nodes.len() - 1) as f64;
    nodes.windows(2).map(|w| simpson(f, w[0], w[1], piece_tol)).sum()
}

/// Integrates a non-negative integrand over `[a, ∞)`.
///
/// The half-line is covered by pieces of doubling width starting at `scale`.
/// Returns `f64::INFINITY` when the pieces have not died out by `1e12`, which
/// is how a divergent transform shows up.
pub fn simpson_to_infinity<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    breaks: &[f64],
    scale: f64,
    tol: f64,
) -> f64 {
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    // Finite breakpoints are absorbed into the first stretch.
    let last_break = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a)
        .fold(a, f64::max);
    let mut lo = a;
    let mut hi = last_break + scale;
    let mut total = simpson_pieces(f, lo, hi, breaks, tol * 0.5);
    if !total.is_finite() {
        return f64::INFINITY;
    }
    let mut width = scale;
    let mut small_run = 0;
    for _ in 0..200 {
        lo = hi;
        width *= 2.0;
        hi = lo + width;
        let piece = simpson(f, lo, hi, tol * 1e-3);
        if !piece.is_finite() {
            return f64::INFINITY;
        }
        total += piece;
        if total > 1e250 {
            return f64::INFINITY;
        }
        if piece.abs() <= tol * 1e-3 {
            small_run += 1;
            if small_run >= 2 {
                return total;
            }
        } else {
            small_run = 0;
        }
        if hi > 1e12 {
            break;
        }
    }
    f64::INFINITY
}
