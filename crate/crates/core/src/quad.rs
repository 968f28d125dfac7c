//! Quadrature rules on uniform grids.

/// Composite Simpson rule for samples spaced by `h`.
///
/// An odd number of intervals is closed with the 3/8 rule on the last three.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let simpson_end = if intervals % 2 == 0 { n - 1 } else { n - 4 };
            let mut acc = values[0] + values[simpson_end];
            for (i, v) in values.iter().enumerate().take(simpson_end).skip(1) {
                acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = acc * h / 3.0;
            if simpson_end != n - 1 {
                let s = simpson_end;
                total += 3.0 * h / 8.0
                    * (values[s] + 3.0 * values[s + 1] + 3.0 * values[s + 2] + values[s + 3]);
            }
            total
        }
    }
}

/// Simpson rule applied to a function sampled at `n` nodes.
pub fn simpson_fn(n: usize, h: f64, f: impl Fn(usize) -> f64) -> f64 {
    let values: Vec<f64> = (0..n).map(f).collect();
    simpson(&values, h)
}

/// Plain Riemann sum `h * sum(a_i b_i)`, the discrete inner product used by
/// the modulation machinery (trapezoid rule for data vanishing at the ends).
pub fn dot(a: &[f64], b: &[f64], h: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Trapezoid rule for samples spaced by `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}
