//! Piecewise cubic Hermite interpolation with a Fritsch–Carlson limiter.

/// Index `i` with `xs[i] <= x <= xs[i+1]`, clamped to a valid interval.
pub(crate) fn locate(xs: &[f64], x: f64) -> usize {
    debug_assert!(xs.len() >= 2);
    let i = xs.partition_point(|&v| v <= x);
    i.saturating_sub(1).min(xs.len() - 2)
}

/// Limits the end slopes of one interval so the cubic stays monotone when the
/// data are.
fn limited_slopes(h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let secant = (y1 - y0) / h;
    if secant == 0.0 {
        return (0.0, 0.0);
    }
    let a = d0 / secant;
    let b = d1 / secant;
    if a < 0.0 || b < 0.0 {
        // slopes disagree with the data direction; fall back to the secant
        // unless the interval contains a genuine extremum
        if d0 * d1 < 0.0 {
            return (d0, d1);
        }
        return (secant, secant);
    }
    let r = a * a + b * b;
    if r > 9.0 {
        let t = 3.0 / r.sqrt();
        (t * a * secant, t * b * secant)
    } else {
        (d0, d1)
    }
}

/// Cubic Hermite value and derivative on one interval.
pub(crate) fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let (d0, d1) = limited_slopes(h, y0, y1, d0, d1);
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let slope = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (value, slope)
}

/// Three-point slope estimates (Fritsch–Butland harmonic mean) for data
/// without known derivatives.
pub(crate) fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    let delta: Vec<f64> = (0..n - 1)
        .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
        .collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a * b <= 0.0 {
            d[i] = 0.0;
        } else {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            d[i] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_with_exact_slopes() {
        let f = |x: f64| 0.3 * x * x * x - x + 2.0;
        let df = |x: f64| 0.9 * x * x - 1.0;
        let (v, s) = hermite(1.0, 2.0, f(1.0), f(2.0), df(1.0), df(2.0), 1.37);
        assert!((v - f(1.37)).abs() < 1e-13);
        assert!((s - df(1.37)).abs() < 1e-12);
    }

    #[test]
    fn reproduces_lines_exactly() {
        let (v, s) = hermite(0.0, 0.5, 1.0, 2.0, 2.0, 2.0, 0.2);
        assert_eq!(v, 1.4);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn limiter_keeps_monotone() {
        // wildly steep end slopes would overshoot without limiting
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let (v, _) = hermite(0.0, 1.0, 0.0, 1.0, 20.0, 20.0, x);
            assert!((-1e-12..=1.0 + 1e-12).contains(&v), "x={x} v={v}");
        }
    }

    #[test]
    fn locate_clamps() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(locate(&xs, -1.0), 0);
        assert_eq!(locate(&xs, 0.0), 0);
        assert_eq!(locate(&xs, 1.5), 1);
        assert_eq!(locate(&xs, 3.0), 2);
        assert_eq!(locate(&xs, 9.0), 2);
    }
}
