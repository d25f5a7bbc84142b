/// Bisection on a bracket with `f(lo)` and `f(hi)` of opposite sign (or zero).
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid <= lo || mid >= hi {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// All sign changes of `f` on `[a, b]`, located by a scan over `grid_n`
/// equal panels and refined by bisection to absolute tolerance `tol`.
///
/// Roots where `f` touches zero without changing sign, and pairs of roots
/// inside one panel, are not detected.
pub fn find_roots_bracketed<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    grid_n: usize,
    tol: f64,
) -> Vec<f64> {
    let n = grid_n.max(1);
    let h = (b - a) / n as f64;
    let mut roots = Vec::new();
    let mut x0 = a;
    let mut f0 = f(a);
    if f0 == 0.0 {
        roots.push(a);
    }
    for i in 1..=n {
        let x1 = if i == n { b } else { a + h * i as f64 };
        let f1 = f(x1);
        if f1 == 0.0 {
            roots.push(x1);
        } else if f0 != 0.0 && f0.signum() != f1.signum() {
            if let Some(r) = bisect(&f, x0, x1, tol) {
                roots.push(r);
            }
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn square_root_of_two() {
        let r = find_roots_bracketed(|x| x * x - 2.0, 0.0, 2.0, 10, 1e-14);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn sine_roots_sorted() {
        let r = find_roots_bracketed(f64::sin, 1.0, 7.0, 50, 1e-14);
        assert_eq!(r.len(), 2);
        assert!((r[0] - PI).abs() < 1e-13);
        assert!((r[1] - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn no_sign_change_is_empty() {
        assert!(find_roots_bracketed(|x| x * x + 1.0, -3.0, 3.0, 100, 1e-12).is_empty());
    }

    #[test]
    fn exact_grid_zero_counted_once() {
        let r = find_roots_bracketed(|x| x - 1.0, 0.0, 2.0, 4, 1e-12);
        assert_eq!(r, vec![1.0]);
    }
}
