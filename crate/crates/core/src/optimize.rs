//! One-dimensional bounded maximization.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
pub(crate) fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol * (1.0 + x1.abs() + x2.abs()) {
        if f1 < f2 || f1.is_nan() {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Climb from `start` by expanding steps until `f` turns down, then polish
/// the bracket with golden section. Returns `None` if `f` is nowhere finite
/// along the path.
pub(crate) fn local_max<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Option<(f64, f64)> {
    let start = start.clamp(lo, hi);
    let f0 = f(start);
    if !f0.is_finite() {
        return None;
    }
    let step0 = 0.02 * (hi - lo);
    let up = {
        let probe = (start + step0).min(hi);
        let down = (start - step0).max(lo);
        let (fu, fd) = (f(probe), f(down));
        if fu.is_finite() && (fu >= fd || !fd.is_finite()) {
            1.0
        } else {
            -1.0
        }
    };

    let mut prev = (start - up * step0).clamp(lo, hi);
    let mut best = (start, f0);
    let mut step = step0;
    loop {
        let next = (best.0 + up * step).clamp(lo, hi);
        let fnext = f(next);
        if fnext.is_finite() && fnext > best.1 {
            prev = best.0;
            best = (next, fnext);
            if next == lo || next == hi {
                break;
            }
            step *= 2.0;
        } else {
            let (x, fx) = golden_max(&mut f, prev.min(next), prev.max(next), tol);
            return Some(if fx.is_finite() && fx >= best.1 {
                (x, fx)
            } else {
                best
            });
        }
    }
    // ran into a bound; polish next to it
    let (a, b) = (prev.min(best.0), prev.max(best.0));
    let (x, fx) = golden_max(&mut f, a, b, tol);
    Some(if fx.is_finite() && fx >= best.1 {
        (x, fx)
    } else {
        best
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let (x, fx) = golden_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx.abs() < 1e-15);
    }

    #[test]
    fn climbs_from_either_side() {
        for start in [0.05, 0.6, 1.9] {
            let (x, _) = local_max(|x| -(x - 1.2).powi(2), start, 0.05, 2.0, 1e-12).unwrap();
            assert!((x - 1.2).abs() < 1e-7, "start {start}: {x}");
        }
    }

    #[test]
    fn stops_at_bound() {
        let (x, _) = local_max(|x| x, 0.5, 0.05, 2.0, 1e-12).unwrap();
        assert!((x - 2.0).abs() < 1e-9);
        let (x, _) = local_max(|x| -x, 0.5, 0.05, 2.0, 1e-12).unwrap();
        assert!((x - 0.05).abs() < 1e-9);
    }
}
