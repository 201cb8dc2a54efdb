//! Cayley (Crank–Nicolson) factors for one lattice direction.
//!
//! Along a line with hops `h_k` (edge k → k+1) the kinetic operator is
//! `(Hψ)_k = β(2ψ_k − h_k ψ_{k+1} − h̄_{k−1} ψ_{k−1})`, β = 1/(2m h²). We solve
//! `(1 + iτH)ψ' = (1 − iτH)ψ` by Thomas elimination. Because `|h| = 1` on open
//! edges and `0` on edges touching walls, the eliminated diagonal depends only
//! on the wall pattern, so it is computed once and reused for every gauge.

use num_complex::Complex;

use crate::Real;

#[derive(Debug, Clone)]
pub(crate) struct CayleyLines<T> {
    n: usize,
    lambda: Complex<T>,
    one_minus_two_lambda: Complex<T>,
    /// `1 / d'_k` for every node of every line.
    inv_d: Vec<Complex<T>>,
    /// `λ / d'_k`, the back-substitution coefficient without the hop.
    lam_inv_d: Vec<Complex<T>>,
}

impl<T: Real> CayleyLines<T> {
    /// `wall(line, k)` flags Dirichlet nodes; edges touching them are closed.
    pub fn new(
        n: usize,
        lines: usize,
        tau: T,
        beta: T,
        wall: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let lambda = Complex::new(T::zero(), tau * beta);
        let one = Complex::new(T::one(), T::zero());
        let lam2 = lambda * lambda;
        let mut inv_d = Vec::with_capacity(n * lines);
        let mut lam_inv_d = Vec::with_capacity(n * lines);
        for line in 0..lines {
            let mut prev: Option<Complex<T>> = None;
            let mut prev_wall = true;
            for k in 0..n {
                let w = wall(line, k);
                let d = if w {
                    one
                } else {
                    let base = one + lambda + lambda;
                    match prev {
                        Some(pd) if !prev_wall => base - lam2 / pd,
                        _ => base,
                    }
                };
                let inv = one / d;
                inv_d.push(inv);
                lam_inv_d.push(lambda * inv);
                prev = Some(d);
                prev_wall = w;
            }
        }
        Self {
            n,
            lambda,
            one_minus_two_lambda: one - lambda - lambda,
            inv_d,
            lam_inv_d,
        }
    }

    pub fn line_len(&self) -> usize {
        self.n
    }

    /// Solves line `line` in place. `hops[k]` is the edge k → k+1 (the last
    /// entry is ignored) and must be zero on edges touching walls; wall
    /// amplitudes must already be zero. Returns false if the result is not
    /// finite.
    pub fn solve(&self, line: usize, hops: &[Complex<T>], psi: &mut [Complex<T>]) -> bool {
        let n = self.n;
        debug_assert_eq!(psi.len(), n);
        debug_assert_eq!(hops.len(), n);
        let base = line * n;
        let inv_d = &self.inv_d[base..base + n];
        let lam_inv_d = &self.lam_inv_d[base..base + n];
        let zero = Complex::new(T::zero(), T::zero());
        let lam = self.lambda;
        let c0 = self.one_minus_two_lambda;

        // Forward sweep: r_k − a_k y_{k−1} = c0 ψ_k + λ(h_k ψ_{k+1} + h̄_{k−1}(ψ_{k−1} + y_{k−1})).
        let mut prev_orig = zero;
        let mut y_prev = zero;
        let mut h_prev = zero;
        for k in 0..n {
            let cur = psi[k];
            let fwd = if k + 1 < n {
                hops[k] * psi[k + 1]
            } else {
                zero
            };
            let back = h_prev.conj() * (prev_orig + y_prev);
            let y = (c0 * cur + lam * (fwd + back)) * inv_d[k];
            psi[k] = y;
            prev_orig = cur;
            y_prev = y;
            h_prev = if k + 1 < n { hops[k] } else { zero };
        }
        // Back substitution: x_k = y_k + (λ/d'_k) h_k x_{k+1}.
        let mut check = psi[n - 1].re + psi[n - 1].im;
        for k in (0..n - 1).rev() {
            let x = psi[k] + lam_inv_d[k] * hops[k] * psi[k + 1];
            psi[k] = x;
            check += x.re + x.im;
        }
        check.is_finite()
    }
}
