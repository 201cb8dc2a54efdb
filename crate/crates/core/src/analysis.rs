//! Interference-pattern observables and cross-run profile comparison.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

/// Peaks below this fraction of the window maximum are ignored.
pub const PEAK_THRESHOLD: f64 = 0.05;
/// Peaks whose prominence is below this fraction of the window maximum are
/// treated as noise.
pub const MIN_PROMINENCE: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("insufficient fringes: found {found} maxima, need at least 3")]
    InsufficientFringes { found: usize },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("profiles have disjoint x ranges")]
    Disjoint,
    #[error("window [{lo}, {hi}] contains fewer than 3 samples")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("profile csv: {0}")]
    Csv(String),
}

/// Intensity samples on a strictly increasing coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile<T> {
    pub x: Vec<T>,
    pub intensity: Vec<T>,
}

impl<T: Real> Profile<T> {
    pub fn new(x: Vec<T>, intensity: Vec<T>) -> Result<Self, AnalysisError> {
        if x.len() != intensity.len() {
            return Err(AnalysisError::InvalidProfile(
                "x and intensity lengths differ".into(),
            ));
        }
        if x.len() < 3 {
            return Err(AnalysisError::InvalidProfile(
                "need at least 3 samples".into(),
            ));
        }
        if x.iter().chain(&intensity).any(|v| !v.is_finite()) {
            return Err(AnalysisError::InvalidProfile("non-finite sample".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AnalysisError::InvalidProfile(
                "x must be strictly increasing".into(),
            ));
        }
        if intensity.iter().any(|&v| v < T::zero()) {
            return Err(AnalysisError::InvalidProfile("negative intensity".into()));
        }
        Ok(Self { x, intensity })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn range(&self) -> (T, T) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn max(&self) -> T {
        self.intensity.iter().copied().fold(T::zero(), T::max)
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn sample(&self, at: T) -> Option<T> {
        let (lo, hi) = self.range();
        if at < lo || at > hi {
            return None;
        }
        let k = self
            .x
            .partition_point(|&v| v <= at)
            .clamp(1, self.len() - 1);
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        if at == x1 {
            return Some(self.intensity[k]);
        }
        let s = (at - x0) / (x1 - x0);
        Some(self.intensity[k - 1] + (self.intensity[k] - self.intensity[k - 1]) * s)
    }

    /// Middle `fraction` of the sampled range.
    pub fn central_window(&self, fraction: T) -> (T, T) {
        let (lo, hi) = self.range();
        let c = (lo + hi) * T::lit(0.5);
        let half = (hi - lo) * fraction * T::lit(0.5);
        (c - half, c + half)
    }
}

/// `x,intensity` with a header row and shortest round-trip formatting.
pub fn write_profile_csv<T: Real, W: Write>(
    profile: &Profile<T>,
    out: W,
) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| AnalysisError::Csv(e.to_string());
    w.write_record(["x", "intensity"]).map_err(err)?;
    for (x, i) in profile.x.iter().zip(&profile.intensity) {
        w.write_record([x.to_f64_lossy().to_string(), i.to_f64_lossy().to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| AnalysisError::Csv(e.to_string()))
}

pub fn read_profile_csv<R: Read>(input: R) -> Result<Profile<f64>, AnalysisError> {
    let mut r = csv::Reader::from_reader(input);
    let (mut x, mut intensity) = (Vec::new(), Vec::new());
    for rec in r.deserialize::<(f64, f64)>() {
        let (a, b) = rec.map_err(|e| AnalysisError::Csv(e.to_string()))?;
        x.push(a);
        intensity.push(b);
    }
    Profile::new(x, intensity)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FringeReport<T> {
    pub fringe_spacing: T,
    /// Sample standard deviation of the gaps between adjacent maxima.
    pub spacing_uncertainty: T,
    pub central_max_position: T,
    pub visibility: T,
    pub maxima_positions: Vec<T>,
    /// Central-maximum displacement in fringes, wrapped to (−½, ½].
    pub shift_vs_reference: Option<T>,
}

impl<T: Real> FringeReport<T> {
    /// `(central − reference central)/reference spacing`, wrapped to (−½, ½].
    pub fn shift_from(&self, reference: &Self) -> T {
        wrap_fringes(
            (self.central_max_position - reference.central_max_position) / reference.fringe_spacing,
        )
    }

    pub fn with_reference(mut self, reference: &Self) -> Self {
        self.shift_vs_reference = Some(self.shift_from(reference));
        self
    }
}

/// Tolerance under which a wrapped shift counts as exactly −½ and maps to +½.
pub const HALF_FRINGE_TIE: f64 = 1e-3;

/// Wraps a fringe count to (−½, ½], mapping values within
/// [`HALF_FRINGE_TIE`] of −½ to +½.
pub fn wrap_fringes<T: Real>(s: T) -> T {
    let half = T::lit(0.5);
    let mut w = s - s.round();
    if w <= -half + T::lit(HALF_FRINGE_TIE) {
        w += T::one();
    }
    w
}

/// Vertex of the least-squares parabola through `(u_k, y_k)` with `u`
/// relative to the center sample; returns `(offset, value)` or `None` when
/// the fit is not concave (`concave = true`) or convex.
fn parabola_vertex<T: Real>(u: &[T], y: &[T], concave: bool) -> Option<(T, T)> {
    // Normal equations for y = c0 + c1 u + c2 u².
    let n = T::from_usize_lossy(u.len());
    let (mut s1, mut s2, mut s3, mut s4) = (T::zero(), T::zero(), T::zero(), T::zero());
    let (mut t0, mut t1, mut t2) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in u.iter().zip(y) {
        let a2 = a * a;
        s1 += a;
        s2 += a2;
        s3 += a2 * a;
        s4 += a2 * a2;
        t0 += b;
        t1 += a * b;
        t2 += a2 * b;
    }
    let m = [[n, s1, s2], [s1, s2, s3], [s2, s3, s4]];
    let det3 = |m: [[T; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(m);
    if d == T::zero() {
        return None;
    }
    let rhs = [t0, t1, t2];
    let solve = |col: usize| {
        let mut mm = m;
        for r in 0..3 {
            mm[r][col] = rhs[r];
        }
        det3(mm) / d
    };
    let (c0, c1, c2) = (solve(0), solve(1), solve(2));
    if (concave && c2 >= T::zero()) || (!concave && c2 <= T::zero()) {
        return None;
    }
    let v = -c1 / (c2 + c2);
    Some((v, c0 + c1 * v + c2 * v * v))
}

/// Refines a discrete extremum at `k` by a parabola over `±half` samples,
/// falling back to the sample itself when the fit is degenerate or the
/// vertex leaves the fitted span.
fn refine<T: Real>(x: &[T], y: &[T], k: usize, half: usize, concave: bool) -> (T, T) {
    let lo = k.saturating_sub(half);
    let hi = (k + half).min(x.len() - 1);
    let u: Vec<T> = x[lo..=hi].iter().map(|&v| v - x[k]).collect();
    match parabola_vertex(&u, &y[lo..=hi], concave) {
        Some((v, val)) if v >= u[0] && v <= u[u.len() - 1] => (x[k] + v, val),
        _ => (x[k], y[k]),
    }
}

/// Discrete peaks with prominence filtering; indices into `y`.
fn discrete_peaks<T: Real>(y: &[T], floor: T, min_prom: T) -> Vec<usize> {
    let n = y.len();
    let mut cand: Vec<usize> = (1..n - 1)
        .filter(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1] && y[k] > floor)
        .collect();
    cand.retain(|&k| {
        // Lowest point between k and the nearest higher sample on each side.
        let mut left = y[k];
        let mut l = k;
        while l > 0 && y[l - 1] <= y[k] {
            l -= 1;
            left = left.min(y[l]);
        }
        let mut right = y[k];
        let mut r = k;
        while r + 1 < n && y[r + 1] <= y[k] {
            r += 1;
            right = right.min(y[r]);
        }
        y[k] - left.max(right) >= min_prom
    });
    cand
}

/// Maxima, spacing, visibility and central maximum of the pattern in `window`.
///
/// The fit half-width grows with the sampling density (about a tenth of a
/// fringe) so that noisy, finely sampled profiles are refined robustly; at
/// coarse sampling it is the 3-point parabola.
pub fn fringe_extract<T: Real>(
    profile: &Profile<T>,
    window: (T, T),
) -> Result<FringeReport<T>, AnalysisError> {
    let (lo, hi) = window;
    let idx: Vec<usize> = (0..profile.len())
        .filter(|&k| profile.x[k] >= lo && profile.x[k] <= hi)
        .collect();
    if idx.len() < 3 {
        return Err(AnalysisError::EmptyWindow {
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        });
    }
    let x: Vec<T> = idx.iter().map(|&k| profile.x[k]).collect();
    let y: Vec<T> = idx.iter().map(|&k| profile.intensity[k]).collect();
    let top = y.iter().copied().fold(T::zero(), T::max);
    if top <= T::zero() {
        return Err(AnalysisError::InsufficientFringes { found: 0 });
    }
    let peaks = discrete_peaks(
        &y,
        top * T::lit(PEAK_THRESHOLD),
        top * T::lit(MIN_PROMINENCE),
    );
    if peaks.len() < 3 {
        return Err(AnalysisError::InsufficientFringes { found: peaks.len() });
    }
    let samples_per_fringe = T::from_usize_lossy(peaks[peaks.len() - 1] - peaks[0])
        / T::from_usize_lossy(peaks.len() - 1);
    let half = (samples_per_fringe / T::lit(10.0))
        .round()
        .to_usize()
        .unwrap_or(1)
        .max(1);

    let maxima: Vec<(T, T)> = peaks
        .iter()
        .map(|&k| refine(&x, &y, k, half, true))
        .collect();
    let positions: Vec<T> = maxima.iter().map(|m| m.0).collect();
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::InvalidProfile(
            "refined maxima are not ordered".into(),
        ));
    }
    let gaps: Vec<T> = positions.windows(2).map(|w| w[1] - w[0]).collect();
    let ng = T::from_usize_lossy(gaps.len());
    let spacing = gaps.iter().copied().sum::<T>() / ng;
    let uncertainty = if gaps.len() > 1 {
        (gaps
            .iter()
            .map(|&g| (g - spacing) * (g - spacing))
            .sum::<T>()
            / (ng - T::one()))
        .sqrt()
    } else {
        T::zero()
    };

    // Nearest to the window center; near-ties go to the larger coordinate.
    let center = (lo + hi) * T::lit(0.5);
    let tie = spacing * T::lit(1e-3);
    let mut c = 0;
    for k in 1..positions.len() {
        if (positions[k] - center).abs() <= (positions[c] - center).abs() + tie {
            c = k;
        }
    }
    let imax = maxima[c].1;
    // Minima between the central maximum and its neighbors.
    let mut mins = Vec::new();
    if c > 0 {
        mins.push(trough(&x, &y, peaks[c - 1], peaks[c], half));
    }
    if c + 1 < peaks.len() {
        mins.push(trough(&x, &y, peaks[c], peaks[c + 1], half));
    }
    let imin = (mins.iter().copied().sum::<T>() / T::from_usize_lossy(mins.len())).max(T::zero());
    let visibility = if imax + imin > T::zero() {
        ((imax - imin) / (imax + imin)).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    Ok(FringeReport {
        fringe_spacing: spacing,
        spacing_uncertainty: uncertainty,
        central_max_position: positions[c],
        visibility,
        maxima_positions: positions,
        shift_vs_reference: None,
    })
}

fn trough<T: Real>(x: &[T], y: &[T], a: usize, b: usize, half: usize) -> T {
    let k = (a..=b)
        .min_by(|&i, &j| y[i].partial_cmp(&y[j]).expect("finite"))
        .expect("non-empty");
    refine(x, y, k, half, false).1.min(y[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileComparison<T> {
    pub max_abs_dev: T,
    pub rms_dev: T,
    /// Displacement of `p2` relative to `p1` (positive when `p2` lies at larger x).
    pub shift_estimate: T,
}

/// Compares unit-max-normalized profiles on `p1`'s samples inside the common range.
pub fn compare_profiles<T: Real>(
    p1: &Profile<T>,
    p2: &Profile<T>,
) -> Result<ProfileComparison<T>, AnalysisError> {
    let (a0, a1) = p1.range();
    let (b0, b1) = p2.range();
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if lo >= hi {
        return Err(AnalysisError::Disjoint);
    }
    let keep: Vec<usize> = (0..p1.len())
        .filter(|&k| p1.x[k] >= lo && p1.x[k] <= hi)
        .collect();
    if keep.len() < 2 {
        return Err(AnalysisError::Disjoint);
    }
    let a: Vec<T> = keep.iter().map(|&k| p1.intensity[k]).collect();
    let b: Vec<T> = keep
        .iter()
        .map(|&k| p2.sample(p1.x[k]).expect("inside common range"))
        .collect();
    let norm = |v: Vec<T>| {
        let m = v.iter().copied().fold(T::zero(), T::max);
        if m > T::zero() {
            v.into_iter().map(|s| s / m).collect()
        } else {
            v
        }
    };
    let (a, b) = (norm(a), norm(b));
    let n = a.len();
    let mut max_abs = T::zero();
    let mut sq = T::zero();
    for (u, v) in a.iter().zip(&b) {
        let d = (*u - *v).abs();
        max_abs = max_abs.max(d);
        sq += d * d;
    }
    let rms = (sq / T::from_usize_lossy(n)).sqrt();

    // Zero-padded cross-correlation c(l) = Σ a_k b_{k+l}.
    let corr = |l: isize| -> T {
        let mut s = T::zero();
        for k in 0..n {
            let m = k as isize + l;
            if m >= 0 && (m as usize) < n {
                s += a[k] * b[m as usize];
            }
        }
        s
    };
    let nl = n as isize;
    let mut best = (0isize, corr(0));
    for l in -(nl - 1)..nl {
        let c = corr(l);
        if c > best.1 || (c == best.1 && l.abs() < best.0.abs()) {
            best = (l, c);
        }
    }
    let (l, c0) = best;
    let mut frac = T::zero();
    if l > -(nl - 1) && l < nl - 1 {
        let (cm, cp) = (corr(l - 1), corr(l + 1));
        let den = cm - c0 - c0 + cp;
        if den < T::zero() {
            frac = T::lit(0.5) * (cm - cp) / den;
        }
    }
    let h = (p1.x[keep[n - 1]] - p1.x[keep[0]]) / T::from_usize_lossy(n - 1);
    let shift = (T::from_isize(l).expect("lag fits") + frac) * h;
    Ok(ProfileComparison {
        max_abs_dev: max_abs,
        rms_dev: rms,
        shift_estimate: shift,
    })
}
