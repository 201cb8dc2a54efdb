//! One-dimensional quadrature and bracketed root finding.

use crate::Real;

const GL5_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
    0.236_926_885_056_189_08,
];

/// Five-point Gauss–Legendre rule on `[a, b]`; exact for polynomials of degree ≤ 9.
pub fn gauss_legendre5<T, E, F>(mut f: F, a: T, b: T) -> Result<T, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let mut acc = T::zero();
    for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
        acc += T::lit(*w) * f(mid + half * T::lit(*x))?;
    }
    Ok(acc * half)
}

/// Outcome of [`adaptive_simpson`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub subdivisions: usize,
    /// False when the subdivision budget ran out before the tolerance was met.
    pub converged: bool,
}

/// Adaptive composite Simpson rule with a relative tolerance.
///
/// The tolerance is taken relative to a coarse estimate of `∫|f|`, so an
/// integrand that vanishes identically terminates immediately instead of
/// chasing an absolute zero.
pub fn adaptive_simpson<T, E, F>(
    mut f: F,
    a: T,
    b: T,
    rel_tol: T,
    max_subdivisions: usize,
) -> Result<Quadrature<T>, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    if a == b {
        return Ok(Quadrature {
            value: T::zero(),
            subdivisions: 0,
            converged: true,
        });
    }
    let half = T::lit(0.5);
    let six = T::lit(6.0);

    // Coarse scale estimate from 8 uniform panels.
    let panels = 8usize;
    let h = (b - a) / T::from_usize_lossy(panels);
    let mut samples = Vec::with_capacity(2 * panels + 1);
    for k in 0..=2 * panels {
        let x = a + h * half * T::from_usize_lossy(k);
        samples.push(f(x)?);
    }
    let mut scale = T::zero();
    for p in 0..panels {
        let (fa, fm, fb) = (samples[2 * p], samples[2 * p + 1], samples[2 * p + 2]);
        scale += (fa.abs() + T::lit(4.0) * fm.abs() + fb.abs()) * h / six;
    }
    let abs_tol = rel_tol * scale.max(T::min_positive_value());

    struct Panel<T> {
        a: T,
        b: T,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        tol: T,
    }

    let mut stack = Vec::with_capacity(64);
    for p in (0..panels).rev() {
        let pa = a + h * T::from_usize_lossy(p);
        let pb = pa + h;
        let (fa, fm, fb) = (samples[2 * p], samples[2 * p + 1], samples[2 * p + 2]);
        stack.push(Panel {
            a: pa,
            b: pb,
            fa,
            fm,
            fb,
            whole: (fa + T::lit(4.0) * fm + fb) * h / six,
            tol: abs_tol / T::from_usize_lossy(panels),
        });
    }

    let mut value = T::zero();
    let mut subdivisions = panels;
    let mut converged = true;
    while let Some(p) = stack.pop() {
        let m = (p.a + p.b) * half;
        let lm = (p.a + m) * half;
        let rm = (m + p.b) * half;
        let flm = f(lm)?;
        let frm = f(rm)?;
        let hl = m - p.a;
        let hr = p.b - m;
        let left = (p.fa + T::lit(4.0) * flm + p.fm) * hl / six;
        let right = (p.fm + T::lit(4.0) * frm + p.fb) * hr / six;
        let delta = left + right - p.whole;
        let width_exhausted = m <= p.a || m >= p.b;
        if delta.abs() <= T::lit(15.0) * p.tol || width_exhausted {
            value += left + right + delta / T::lit(15.0);
            continue;
        }
        if subdivisions >= max_subdivisions {
            converged = false;
            value += left + right + delta / T::lit(15.0);
            continue;
        }
        subdivisions += 1;
        let tol = p.tol * half;
        stack.push(Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
            tol,
        });
        stack.push(Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
            tol,
        });
    }
    Ok(Quadrature {
        value,
        subdivisions,
        converged,
    })
}

/// Bisection on a bracket `[lo, hi]` with `f(lo)` and `f(hi)` of opposite sign
/// (or zero). Stops when `|f| < abs_tol` or the bracket stops shrinking.
pub fn bisect<T, F>(mut f: F, mut lo: T, mut hi: T, abs_tol: T) -> T
where
    T: Real,
    F: FnMut(T) -> T,
{
    let mut flo = f(lo);
    if flo == T::zero() {
        return lo;
    }
    let fhi = f(hi);
    if fhi == T::zero() {
        return hi;
    }
    let half = T::lit(0.5);
    for _ in 0..400 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            return mid;
        }
        let fm = f(mid);
        if fm.abs() < abs_tol {
            return mid;
        }
        if (fm < T::zero()) == (flo < T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok(x: f64) -> Result<f64, Infallible> {
        Ok(x)
    }

    #[test]
    fn gl5_exact_for_degree_nine() {
        let v = gauss_legendre5(|x: f64| ok(x.powi(9) + 3.0 * x.powi(4)), -1.0, 2.0).unwrap();
        let exact = (2f64.powi(10) - 1.0) / 10.0 + 3.0 * (2f64.powi(5) + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn simpson_reaches_relative_tolerance() {
        let q = adaptive_simpson(
            |x: f64| ok(x.sin()),
            0.0,
            std::f64::consts::PI,
            1e-10,
            1 << 20,
        )
        .unwrap();
        assert!(q.converged);
        assert!((q.value - 2.0).abs() < 2e-10);
    }

    #[test]
    fn simpson_zero_integrand_terminates() {
        let q = adaptive_simpson(|_x: f64| ok(0.0), 0.0, 1.0, 1e-10, 1 << 20).unwrap();
        assert_eq!(q.value, 0.0);
        assert_eq!(q.subdivisions, 8);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }
}
