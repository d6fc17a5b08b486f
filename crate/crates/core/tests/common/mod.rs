//! Oracles computed without the library's solvers.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riesz_condenser::geometry::{Carrier, Point, PointCloud};

pub fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn mirror(x: &Point) -> Point {
    [-x[0], x[1], x[2]]
}

/// Mean of `1/|x - y|` over pairs of uniform points of a cell of radius `h`.
pub fn newton_cell_mean(h: f64, carrier: Carrier) -> f64 {
    match carrier {
        Carrier::Volume => 6.0 / (5.0 * h),
        _ => 16.0 / (3.0 * PI * h),
    }
}

/// Mean of `1/|c - y|` for `y` uniform in a ball of radius `h` and `|c| = d`.
pub fn ball_average_inverse(d: f64, h: f64) -> f64 {
    if d >= h {
        1.0 / d
    } else {
        (3.0 * h * h - d * d) / (2.0 * h.powi(3))
    }
}

/// Newtonian matrix, row major, with cell means on the diagonal.
pub fn newton_matrix(c: &PointCloud) -> Vec<f64> {
    let n = c.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = if i == j {
                newton_cell_mean(c.spacing[i], c.carrier)
            } else {
                1.0 / dist(&c.points[i], &c.points[j])
            };
        }
    }
    a
}

/// Green matrix of the half-space `x1 > 0` by the method of images.
pub fn image_green_matrix(c: &PointCloud) -> Vec<f64> {
    let n = c.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let x = &c.points[i];
        for j in 0..n {
            a[i * n + j] = if i == j {
                newton_cell_mean(c.spacing[i], c.carrier) - ball_average_inverse(2.0 * x[0], c.spacing[i])
            } else {
                let y = &c.points[j];
                1.0 / dist(x, y) - 1.0 / dist(x, &mirror(y))
            };
        }
    }
    a
}

pub fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|i| a[i * n..(i + 1) * n].iter().zip(x).map(|(u, v)| u * v).sum()).collect()
}

pub fn quad(a: &[f64], x: &[f64]) -> f64 {
    matvec(a, x).iter().zip(x).map(|(u, v)| u * v).sum()
}

/// Conjugate gradients for a symmetric positive definite system.
pub fn cg(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let bb: f64 = b.iter().map(|v| v * v).sum();
    let mut rr = bb;
    for _ in 0..20 * n {
        if rr <= 1e-28 * bb {
            break;
        }
        let ap = matvec(a, &p);
        let pap: f64 = p.iter().zip(&ap).map(|(u, v)| u * v).sum();
        assert!(pap > 0.0, "matrix is not positive definite");
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let next: f64 = r.iter().map(|v| v * v).sum();
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

/// Capacity `1' A^-1 1` of a matrix and the normalised minimiser.
pub struct Capacity {
    pub value: f64,
    pub weights: Vec<f64>,
}

pub fn matrix_capacity(a: &[f64], n: usize) -> Capacity {
    let v = cg(a, &vec![1.0; n]);
    let value: f64 = v.iter().sum();
    Capacity {
        weights: v.iter().map(|x| x / value).collect(),
        value,
    }
}

pub fn potential(points: &[Point], weights: &[f64], x: &Point) -> f64 {
    points.iter().zip(weights).map(|(y, w)| w / dist(x, y)).sum()
}

/// Newtonian energy with cell means on the diagonal.
pub fn newton_energy(c: &PointCloud, w: &[f64]) -> f64 {
    let n = c.len();
    let mut e = 0.0;
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        let mut row = w[i] * newton_cell_mean(c.spacing[i], c.carrier);
        for j in 0..n {
            if j != i {
                row += w[j] / dist(&c.points[i], &c.points[j]);
            }
        }
        e += w[i] * row;
    }
    e
}

/// Capacity of a prolate spheroid with semi-axes `a >= b`, unit sphere = 1.
pub fn prolate_capacity(a: f64, b: f64) -> f64 {
    if a - b <= 1e-12 * a {
        return a;
    }
    (a * a - b * b).sqrt() / (a / b).acosh()
}

/// Uniform points of a box, at least `gap(y)` away from every listed point.
pub fn box_probes(
    lo: Point,
    hi: Point,
    count: usize,
    seed: u64,
    avoid: &[&PointCloud],
) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = [
            rng.gen_range(lo[0]..hi[0]),
            rng.gen_range(lo[1]..hi[1]),
            rng.gen_range(lo[2]..hi[2]),
        ];
        let clear = avoid
            .iter()
            .all(|c| c.points.iter().zip(&c.spacing).all(|(y, h)| dist(&x, y) >= *h));
        if clear {
            out.push(x);
        }
    }
    out
}
