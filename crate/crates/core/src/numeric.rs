//! Small scalar search utilities shared by the materials, dispersion and
//! spectra modules.

/// Scan `f` on a log-spaced grid of `n` points over `[lo, hi]` and return
/// `(x, f(x))` at each interior local minimum, refined by golden section.
pub(crate) fn local_minima_log<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for i in 1..n - 1 {
        if ys[i] < ys[i - 1] && ys[i] <= ys[i + 1] {
            let x = golden_min(&f, xs[i - 1], xs[i + 1], 1e-10);
            out.push((x, f(x)));
        }
    }
    out
}

/// Golden-section minimisation of a unimodal function on `[a, b]` down to
/// a bracket of relative width `rel_tol`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= rel_tol * 0.5 * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
/// Bisection on a sign change of `f` in `[a, b]`.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, rel_tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= rel_tol * m.abs() {
            return Some(m);
        }
        let fm = f(m);
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let x = golden_min(&|x: f64| (x - 1.7).powi(2), 0.0, 5.0, 1e-12);
        assert!((x - 1.7).abs() < 1e-8);
    }

    #[test]
    fn minima_of_cosine() {
        let m = local_minima_log(|x: f64| x.cos(), 1.0, 20.0, 500);
        let xs: Vec<f64> = m.iter().map(|p| p.0).collect();
        assert_eq!(xs.len(), 3);
        for (x, k) in xs.iter().zip([1.0, 3.0, 5.0]) {
            assert!((x - k * std::f64::consts::PI).abs() < 1e-6);
        }
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-6).is_none());
    }
}
