//! Thinness at infinity of rotation bodies `{x1 >= 0, x2^2 + x3^2 <= rho(x1)^2}`
//! through the shell capacity series.
//!
//! Shell capacities use a slender-body model: charge on segments of the axis,
//! potential taken on the body's surface. Radii are handled through their
//! logarithms so profiles such as `exp(-x^2)` stay representable.

use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Carrier, PointCloud};
use crate::kernels::KernelParams;
use rayon::prelude::*;

use crate::numerics::{gauss_legendre, linear_fit, Cholesky};
use crate::solver::capacity::capacity_from_matrix;
use crate::solver::qp::QpSettings;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `x^-s`, `s >= 0`.
    Power { s: f64 },
    /// `exp(-x^s)`, `s > 0`.
    Exponential { s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFamily {
    PowerLaw,
    SlowExponential,
    FastExponential,
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile::Power { s } if s >= 0.0 && s.is_finite() => Ok(()),
            Profile::Exponential { s } if s > 0.0 && s.is_finite() => Ok(()),
            _ => Err(Error::param("profile exponent out of range")),
        }
    }

    pub fn ln_radius(&self, x: f64) -> f64 {
        match *self {
            Profile::Power { s } => -s * x.ln(),
            Profile::Exponential { s } => -x.powf(s),
        }
    }

    pub fn family(&self) -> ProfileFamily {
        match *self {
            Profile::Power { .. } => ProfileFamily::PowerLaw,
            Profile::Exponential { s } if s <= 1.0 => ProfileFamily::SlowExponential,
            Profile::Exponential { .. } => ProfileFamily::FastExponential,
        }
    }
}

/// Axis segments of a piece `start <= x1 < end` of a rotation body.
#[derive(Debug, Clone)]
pub struct WireShell {
    pub start: f64,
    pub end: f64,
    /// Segment midpoints.
    pub nodes: Vec<f64>,
    pub lengths: Vec<f64>,
    pub ln_radius: Vec<f64>,
    /// The widest radius is below `exp(LN_RADIUS_FLOOR)` times the length,
    /// far under any surface mesh.
    pub negligible: bool,
}

const LN_RADIUS_FLOOR: f64 = -27.6;
const MAX_SEGMENTS: usize = 256;

/// Shell `q^k <= x1 < q^(k+1)` of the rotation body of `profile`.
pub fn rotation_body_shell(profile: &Profile, k: u32, q: f64) -> Result<WireShell> {
    if k < 1 || !(q > 1.0) {
        return Err(Error::param("shells need k >= 1 and q > 1"));
    }
    let start = q.powi(k as i32);
    rotation_body_piece(profile, start, start * q)
}

pub fn rotation_body_piece(profile: &Profile, start: f64, end: f64) -> Result<WireShell> {
    profile.validate()?;
    if !(start > 0.0 && end > start && end.is_finite()) {
        return Err(Error::param("piece needs 0 < start < end"));
    }
    let len = end - start;
    let ln_rmax = profile.ln_radius(start).max(profile.ln_radius(end));
    // Segments no shorter than the widest radius keep the model well posed.
    let ratio = len.ln() - ln_rmax;
    let m = if ratio < (MAX_SEGMENTS as f64).ln() {
        (ratio.exp().floor() as usize).clamp(4, MAX_SEGMENTS)
    } else {
        MAX_SEGMENTS
    };
    let w = len / m as f64;
    let nodes: Vec<f64> = (0..m).map(|i| start + (i as f64 + 0.5) * w).collect();
    let ln_radius: Vec<f64> = nodes.iter().map(|&x| profile.ln_radius(x)).collect();
    Ok(WireShell {
        start,
        end,
        lengths: vec![w; m],
        negligible: ln_rmax - len.ln() < LN_RADIUS_FLOOR,
        ln_radius,
        nodes,
    })
}

/// `asinh(u / rho)` from `ln rho`.
fn asinh_scaled(u: f64, ln_rho: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let lr = u.abs().ln() - ln_rho;
    let v = if lr < 30.0 {
        (u.abs() * (-ln_rho).exp()).asinh()
    } else {
        std::f64::consts::LN_2 + lr
    };
    v.copysign(u)
}

/// Integral over `t` in `[a, b]` of `((x - t)^2 + rho^2)^(-s/2)` as
/// `(value, ln_factor)`, the integral being `value * exp(ln_factor)`.
fn segment_potential(x: f64, a: f64, b: f64, ln_rho: f64, s: f64, gl: &(Vec<f64>, Vec<f64>)) -> (f64, f64) {
    let ua = asinh_scaled(a - x, ln_rho);
    let ub = asinh_scaled(b - x, ln_rho);
    if s == 1.0 {
        return (ub - ua, 0.0);
    }
    // With t - x = rho sinh u the integrand is rho^(1-s) cosh(u)^(1-s).
    let cut = 40.0 / (s - 1.0).abs().max(1e-3);
    let (lo, hi) = (ua.max(-cut), ub.min(cut));
    if hi <= lo {
        return (0.0, 0.0);
    }
    let pieces = (hi - lo).ceil().max(1.0) as usize;
    let step = (hi - lo) / pieces as f64;
    let mut acc = 0.0;
    for p in 0..pieces {
        let a0 = lo + p as f64 * step;
        for (xi, wi) in gl.0.iter().zip(&gl.1) {
            let u = a0 + 0.5 * step * (xi + 1.0);
            acc += 0.5 * step * wi * u.cosh().powf(1.0 - s);
        }
    }
    (acc, (1.0 - s) * ln_rho)
}

fn log_sum_exp(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShellCapacity {
    pub ln_value: f64,
    /// For `alpha = 2` the capacity of a prolate spheroid containing the
    /// piece, otherwise the sum of the segments' self-capacities.
    pub ln_upper_bound: f64,
    pub negligible: bool,
}

impl ShellCapacity {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }

    pub fn upper_bound(&self) -> f64 {
        self.ln_upper_bound.exp()
    }
}

impl WireShell {
    /// Newtonian capacity of a spheroid with semi-axes `L/sqrt 2` and
    /// `sqrt 2 rho_max`, which contains the piece.
    fn ln_spheroid_bound(&self) -> f64 {
        let len = self.end - self.start;
        let a = len / 2f64.sqrt();
        let ln_b = 0.5 * 2f64.ln() + self.ln_radius.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ln_ratio = ln_b - a.ln();
        if ln_ratio < -15.0 {
            // e = 1 to double precision; artanh(e) = ln(2a/b).
            a.ln() - ((2.0 * a).ln() - ln_b).ln()
        } else {
            let e = (1.0 - (2.0 * ln_ratio).exp()).sqrt();
            (a * e / e.atanh()).ln()
        }
    }

    /// The axis nodes as a cloud carrying the wire charge.
    pub fn cloud(&self) -> Result<PointCloud> {
        PointCloud::new(
            self.nodes.iter().map(|&x| [x, 0.0, 0.0]).collect(),
            self.lengths.iter().map(|w| 0.5 * w).collect(),
            self.lengths.clone(),
            vec![0.0; self.nodes.len()],
            Carrier::Curve,
        )
    }

    pub fn capacity(&self, p: &KernelParams) -> Result<ShellCapacity> {
        let mut piece = self.clone();
        loop {
            let wire = piece.kernel_matrix(p);
            if Cholesky::new(wire.k.as_ref(), "wire kernel").is_ok() {
                let cloud = piece.cloud()?.subset(&wire.kept)?;
                let cap = capacity_from_matrix(Arc::new(cloud), wire.k, &QpSettings::default())?;
                let ln_upper_bound = if p.is_newtonian() {
                    self.ln_spheroid_bound()
                } else {
                    log_sum_exp(wire.ln_diag.iter().map(|d| -d))
                };
                return Ok(ShellCapacity {
                    ln_value: cap.value.ln() - wire.ln_scale,
                    ln_upper_bound,
                    negligible: self.negligible,
                });
            }
            if piece.nodes.len() <= 2 {
                return Err(Error::NotPositiveDefinite("wire kernel of a shell".into()));
            }
            piece = piece.coarsened();
        }
    }

    fn coarsened(&self) -> WireShell {
        let m = self.nodes.len() / 2;
        let w = (self.end - self.start) / m as f64;
        let nodes: Vec<f64> = (0..m).map(|i| self.start + (i as f64 + 0.5) * w).collect();
        let ln_radius = nodes.iter().map(|&x| interpolate(&self.nodes, &self.ln_radius, x)).collect();
        WireShell {
            start: self.start,
            end: self.end,
            lengths: vec![w; m],
            ln_radius,
            nodes,
            negligible: self.negligible,
        }
    }

    /// Mean potential of each segment's uniform unit charge at the surface
    /// over the other midpoints. Segments whose self-potential exceeds the
    /// smallest one by more than `exp(DROP_LN)` are left out: their share of
    /// the capacity is below that factor.
    fn kernel_matrix(&self, p: &KernelParams) -> WireKernel {
        let s = p.decay();
        let gl = gauss_legendre(16);
        let entry = |i: usize, j: usize| {
            let (c, w) = (self.nodes[j], self.lengths[j]);
            let (v, lf) = segment_potential(self.nodes[i], c - 0.5 * w, c + 0.5 * w, self.ln_radius[i], s, &gl);
            (v / w, lf)
        };
        let ln_diag: Vec<f64> = (0..self.nodes.len())
            .map(|i| {
                let (v, lf) = entry(i, i);
                v.ln() + lf
            })
            .collect();
        let ln_scale = ln_diag.iter().copied().fold(f64::INFINITY, f64::min);
        let kept: Vec<usize> = (0..ln_diag.len()).filter(|&i| ln_diag[i] <= ln_scale + DROP_LN).collect();
        let m = kept.len();
        let k = Mat::from_fn(m, m, |a, b| {
            let (v, lf) = entry(kept[a], kept[b]);
            v * (lf - ln_scale).exp()
        });
        WireKernel {
            k: Mat::from_fn(m, m, |i, j| 0.5 * (k[(i, j)] + k[(j, i)])),
            ln_scale,
            ln_diag,
            kept,
        }
    }
}

const DROP_LN: f64 = 40.0;

/// Wire kernel divided by `exp(ln_scale)` on the kept segments.
struct WireKernel {
    k: Mat<f64>,
    ln_scale: f64,
    ln_diag: Vec<f64>,
    kept: Vec<usize>,
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.len() == 1 || x <= xs[0] {
        return ys[0];
    }
    for w in 0..xs.len() - 1 {
        if x <= xs[w + 1] {
            let f = (x - xs[w]) / (xs[w + 1] - xs[w]);
            return ys[w] * (1.0 - f) + ys[w + 1] * f;
        }
    }
    ys[ys.len() - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Thinness {
    NotThin,
    ThinInfiniteCapacity,
    FiniteCapacity,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShellRow {
    pub k: u32,
    pub capacity: f64,
    pub ln_capacity: f64,
    /// `capacity / q^(k (n - alpha))`.
    pub term: f64,
    pub ln_term: f64,
    pub negligible: bool,
    pub upper_bound: f64,
    pub partial_terms: f64,
    pub partial_capacities: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WienerReport {
    pub q: f64,
    pub alpha: f64,
    pub profile: Profile,
    pub shells: Vec<ShellRow>,
    /// Limit of `-log_q(t_(k+1) / t_k)`, extrapolated in `1/k` from the last
    /// ratios. Zero for terms that decay like a power of `k`.
    pub term_exponent: f64,
    pub term_exponent_se: f64,
    /// Least-squares slope of `log_q t_k` over the last shells, negated.
    pub local_term_exponent: f64,
    /// Least-squares slope of `log_q c_k` over the last shells.
    pub capacity_exponent: f64,
    pub classification: Thinness,
}

/// Terms decaying slower than `q^(-k * GEOMETRIC_THRESHOLD)` count as not
/// geometric; capacities decaying faster than that are summable.
pub const GEOMETRIC_THRESHOLD: f64 = 0.25;

const TAIL: usize = 4;

pub fn wiener_test(profile: &Profile, p: &KernelParams, q: f64, k_max: u32) -> Result<WienerReport> {
    if k_max < 4 {
        return Err(Error::param("the shell series needs at least 4 shells"));
    }
    let decay = p.decay();
    let caps: Vec<Result<ShellCapacity>> = (1..=k_max)
        .into_par_iter()
        .map(|k| rotation_body_shell(profile, k, q)?.capacity(p))
        .collect();
    let mut shells = Vec::with_capacity(k_max as usize);
    let (mut st, mut sc) = (0.0, 0.0);
    let mut failed = false;
    for (k, cap) in (1..=k_max).zip(caps) {
        let cap = match cap {
            Ok(c) => c,
            Err(e @ Error::InvalidParameter(_)) => return Err(e),
            Err(_) => {
                failed = true;
                ShellCapacity {
                    ln_value: f64::NAN,
                    ln_upper_bound: f64::NAN,
                    negligible: false,
                }
            }
        };
        let ln_term = cap.ln_value - k as f64 * decay * q.ln();
        st += ln_term.exp();
        sc += cap.value();
        shells.push(ShellRow {
            k,
            capacity: cap.value(),
            ln_capacity: cap.ln_value,
            term: ln_term.exp(),
            ln_term,
            negligible: cap.negligible,
            upper_bound: cap.upper_bound(),
            partial_terms: st,
            partial_capacities: sc,
        });
    }
    let lq = q.ln();
    let tail = &shells[shells.len() - TAIL..];
    let ks: Vec<f64> = tail.iter().map(|r| r.k as f64).collect();
    let lt: Vec<f64> = tail.iter().map(|r| r.ln_term / lq).collect();
    let lc: Vec<f64> = tail.iter().map(|r| r.ln_capacity / lq).collect();
    let local_term_exponent = -linear_fit(&ks, &lt).0;
    let capacity_exponent = linear_fit(&ks, &lc).0;

    // Decrements 1 - t_(k+1)/t_k against 1/k; the intercept is the limit.
    let pairs = &shells[shells.len() - TAIL - 1..];
    let inv_k: Vec<f64> = pairs.windows(2).map(|w| 1.0 / w[0].k as f64).collect();
    let dec: Vec<f64> = pairs.windows(2).map(|w| 1.0 - (w[1].ln_term - w[0].ln_term).exp()).collect();
    let (_, limit, slope_se) = linear_fit(&inv_k, &dec);
    let mean_sq = inv_k.iter().map(|x| x * x).sum::<f64>() / inv_k.len() as f64;
    let limit_se = slope_se * mean_sq.sqrt();
    let (term_exponent, term_exponent_se) = if limit <= 0.0 {
        (0.0, limit_se / lq)
    } else if limit >= 1.0 {
        (f64::INFINITY, f64::NAN)
    } else {
        (-(1.0 - limit).ln() / lq, limit_se / ((1.0 - limit) * lq))
    };

    let classification = if failed || lt.iter().chain(&lc).any(|v| !v.is_finite()) || limit.is_nan() {
        Thinness::Inconclusive
    } else if term_exponent < GEOMETRIC_THRESHOLD {
        Thinness::NotThin
    } else if capacity_exponent > -GEOMETRIC_THRESHOLD {
        Thinness::ThinInfiniteCapacity
    } else {
        Thinness::FiniteCapacity
    };
    Ok(WienerReport {
        q,
        alpha: p.alpha,
        profile: *profile,
        shells,
        term_exponent,
        term_exponent_se,
        local_term_exponent,
        capacity_exponent,
        classification,
    })
}
