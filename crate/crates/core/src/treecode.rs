//! Barnes–Hut evaluation of `sum_j w_j k_j(x)` where `k_j` is `|x - y_j|^-s`
//! averaged over a ball of radius `h_j`, with quadrupole expansions.

use crate::geometry::{dist2, Point};
use crate::kernels::{power_kernel, BallAveragedKernel};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
struct Node {
    center: Point,
    /// Max distance from `center` to a source, plus its cell radius.
    radius: f64,
    /// Max distance from `center` to a source position.
    point_radius: f64,
    m0: f64,
    /// Sum of w h^2, for the ball-average correction.
    mh2: f64,
    d: [f64; 3],
    /// Second moments xx, xy, xz, yy, yz, zz.
    q: [f64; 6],
    start: usize,
    end: usize,
    children: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Treecode {
    kernel: BallAveragedKernel,
    theta: f64,
    pos: Vec<Point>,
    w: Vec<f64>,
    h: Vec<f64>,
    nodes: Vec<Node>,
}

impl Treecode {
    /// `decay` is the power `s`; `theta` the opening ratio.
    pub fn new(pos: &[Point], w: &[f64], h: &[f64], decay: f64, theta: f64) -> Self {
        let mut idx: Vec<usize> = (0..pos.len()).collect();
        let mut tc = Treecode {
            kernel: BallAveragedKernel::new(decay),
            theta,
            pos: Vec::new(),
            w: Vec::new(),
            h: Vec::new(),
            nodes: Vec::new(),
        };
        if !pos.is_empty() {
            tc.build(pos, &mut idx, 0, pos.len(), 0);
        }
        tc.pos = idx.iter().map(|&i| pos[i]).collect();
        tc.w = idx.iter().map(|&i| w[i]).collect();
        tc.h = idx.iter().map(|&i| h[i]).collect();
        tc.finish_moments();
        tc
    }

    fn build(&mut self, pos: &[Point], idx: &mut [usize], start: usize, end: usize, depth: usize) -> usize {
        let me = self.nodes.len();
        self.nodes.push(Node {
            center: [0.0; 3],
            radius: 0.0,
            point_radius: 0.0,
            m0: 0.0,
            mh2: 0.0,
            d: [0.0; 3],
            q: [0.0; 6],
            start,
            end,
            children: Vec::new(),
        });
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &idx[start..end] {
            for k in 0..3 {
                lo[k] = lo[k].min(pos[i][k]);
                hi[k] = hi[k].max(pos[i][k]);
            }
        }
        let c = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        self.nodes[me].center = c;
        let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        if end - start <= LEAF_SIZE || depth > 48 || extent == 0.0 {
            return me;
        }
        // Partition into octants around the box centre.
        let slice = &mut idx[start..end];
        let octant = |p: &Point| {
            (usize::from(p[0] > c[0])) | (usize::from(p[1] > c[1]) << 1) | (usize::from(p[2] > c[2]) << 2)
        };
        slice.sort_by_key(|&i| octant(&pos[i]));
        let mut bounds = Vec::with_capacity(9);
        let mut cur = 0;
        bounds.push(0);
        for o in 0..8 {
            while cur < slice.len() && octant(&pos[slice[cur]]) == o {
                cur += 1;
            }
            bounds.push(cur);
        }
        let mut children = Vec::new();
        for o in 0..8 {
            let (a, b) = (bounds[o], bounds[o + 1]);
            if b > a {
                let child = self.build(pos, idx, start + a, start + b, depth + 1);
                children.push(child);
            }
        }
        self.nodes[me].children = children;
        me
    }

    fn finish_moments(&mut self) {
        for n in 0..self.nodes.len() {
            let (start, end, c) = (self.nodes[n].start, self.nodes[n].end, self.nodes[n].center);
            let mut m0 = 0.0;
            let mut mh2 = 0.0;
            let mut d = [0.0; 3];
            let mut q = [0.0; 6];
            let mut rad = 0.0f64;
            let mut prad = 0.0f64;
            for j in start..end {
                let y = self.pos[j];
                let w = self.w[j];
                let r = [y[0] - c[0], y[1] - c[1], y[2] - c[2]];
                m0 += w;
                mh2 += w * self.h[j] * self.h[j];
                for k in 0..3 {
                    d[k] += w * r[k];
                }
                q[0] += w * r[0] * r[0];
                q[1] += w * r[0] * r[1];
                q[2] += w * r[0] * r[2];
                q[3] += w * r[1] * r[1];
                q[4] += w * r[1] * r[2];
                q[5] += w * r[2] * r[2];
                let dr = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                prad = prad.max(dr);
                rad = rad.max(dr + self.h[j]);
            }
            let node = &mut self.nodes[n];
            node.m0 = m0;
            node.mh2 = mh2;
            node.d = d;
            node.q = q;
            node.radius = rad;
            node.point_radius = prad;
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let p = self.kernel.decay();
        let corr = self.kernel.far_correction();
        let mut acc = 0.0;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let r = [x[0] - node.center[0], x[1] - node.center[1], x[2] - node.center[2]];
            let s2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
            if s2 * self.theta * self.theta > node.radius * node.radius && s2 > 0.0 {
                let f = power_kernel(s2, p);
                let t1 = p * f / s2;
                let t2 = p * (p + 2.0) * f / (s2 * s2);
                let dr = node.d[0] * r[0] + node.d[1] * r[1] + node.d[2] * r[2];
                let q = &node.q;
                let rqr = q[0] * r[0] * r[0]
                    + q[3] * r[1] * r[1]
                    + q[5] * r[2] * r[2]
                    + 2.0 * (q[1] * r[0] * r[1] + q[2] * r[0] * r[2] + q[4] * r[1] * r[2]);
                let tr = q[0] + q[3] + q[5];
                acc += node.m0 * f + t1 * dr + 0.5 * (t2 * rqr - t1 * tr) + corr * node.mh2 * f / s2;
            } else if node.children.is_empty() {
                for j in node.start..node.end {
                    acc += self.w[j] * self.kernel.eval(dist2(x, &self.pos[j]), self.h[j]);
                }
            } else {
                stack.extend(node.children.iter().rev());
            }
        }
        acc
    }

    /// Distance from `x` to the nearest source and that source's cell radius.
    pub fn nearest(&self, x: &Point) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        if self.nodes.is_empty() {
            return best;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let dc = dist2(x, &node.center).sqrt();
            if dc - node.point_radius >= best.0 {
                continue;
            }
            if node.children.is_empty() {
                for j in node.start..node.end {
                    let d = dist2(x, &self.pos[j]).sqrt();
                    if d < best.0 {
                        best = (d, self.h[j]);
                    }
                }
            } else {
                stack.extend(node.children.iter());
            }
        }
        best
    }

    pub fn total_variation(&self) -> f64 {
        self.w.iter().map(|w| w.abs()).sum()
    }

    pub fn min_spacing(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Centre of the root box and the radius of the smallest ball about it
    /// containing every source cell.
    pub fn bounding_ball(&self) -> (Point, f64) {
        match self.nodes.first() {
            Some(n) => (n.center, n.radius),
            None => ([0.0; 3], 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_direct_sum_far_and_near() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 3000;
        let pos: Vec<Point> = (0..n)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.1..0.1)])
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = vec![0.02; n];
        for s in [1.0, 2.0, 1.25] {
            let tc = Treecode::new(&pos, &w, &h, s, 0.3);
            let k = BallAveragedKernel::new(s);
            for x in [[0.3, 0.2, 0.5], [5.0, -3.0, 1.0], [0.0, 0.0, 0.0]] {
                let direct: f64 = (0..n)
                    .map(|j| w[j] * k.eval(dist2(&x, &pos[j]), h[j]))
                    .sum();
                let absum: f64 = (0..n)
                    .map(|j| (w[j] * k.eval(dist2(&x, &pos[j]), h[j])).abs())
                    .sum();
                let t = tc.eval(&x);
                assert!((t - direct).abs() < 2e-3 * absum, "s={s} {t} vs {direct}");
            }
        }
    }

    #[test]
    fn nearest_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pos: Vec<Point> = (0..500)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let h: Vec<f64> = (0..500).map(|i| 0.01 + i as f64 * 1e-4).collect();
        let tc = Treecode::new(&pos, &vec![1.0; 500], &h, 1.0, 0.3);
        let x = [0.25, -0.5, 0.1];
        let (d, hh) = tc.nearest(&x);
        let (i, dd) = pos
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dist2(p, &x).sqrt()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert!((d - dd).abs() < 1e-15 && hh == h[i]);
    }
}
