/// Central difference `(f(x+h) - f(x-h)) / 2h`.
///
/// With `h = None` the step is `max(1e-6 |x|, 1e-9)`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: Option<f64>) -> f64 {
    let h = h.unwrap_or_else(|| (1e-6 * x.abs()).max(1e-9));
    (f(x + h) - f(x - h)) / (2.0 * h)
}
