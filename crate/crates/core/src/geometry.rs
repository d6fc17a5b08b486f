//! Point clouds, discrete measures, domains and condensers in R^3.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelParams;

pub type Point = [f64; 3];

pub const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[inline]
pub fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Mirror image across the plane x1 = 0.
#[inline]
pub fn reflect(x: &Point) -> Point {
    [-x[0], x[1], x[2]]
}

/// Dimension of the set a cloud discretises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Carrier {
    Atoms,
    Curve,
    Surface,
    Volume,
}

impl Carrier {
    pub fn dim(self) -> usize {
        match self {
            Carrier::Atoms => 0,
            Carrier::Curve => 1,
            Carrier::Surface => 2,
            Carrier::Volume => 3,
        }
    }
}

/// Nodes with cell sizes and quadrature weights.
///
/// `spacing[i]` is the radius of a ball with the same measure as the cell
/// (area for surfaces, volume for solids). `boundary_distance[i]` is the
/// distance from the node to the relative boundary of the set being
/// discretised, used to exclude edge nodes from pointwise checks.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub spacing: Vec<f64>,
    pub quad_weight: Vec<f64>,
    pub boundary_distance: Vec<f64>,
    pub carrier: Carrier,
}

impl PointCloud {
    pub fn new(
        points: Vec<Point>,
        spacing: Vec<f64>,
        quad_weight: Vec<f64>,
        boundary_distance: Vec<f64>,
        carrier: Carrier,
    ) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Mesh("empty point cloud".into()));
        }
        if spacing.len() != n || quad_weight.len() != n || boundary_distance.len() != n {
            return Err(Error::Mesh("attribute arrays differ in length".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Mesh("non-finite coordinate".into()));
        }
        if spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::Mesh("spacing must be positive".into()));
        }
        if quad_weight.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
            return Err(Error::Mesh("quadrature weights must be positive".into()));
        }
        let cloud = PointCloud {
            points,
            spacing,
            quad_weight,
            boundary_distance,
            carrier,
        };
        cloud.check_distinct()?;
        Ok(cloud)
    }

    /// Unit-weight atoms. Spacing is half the nearest-neighbour distance.
    pub fn atoms(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        let mut spacing = vec![1.0; n];
        if n > 1 {
            for i in 0..n {
                let mut best = f64::INFINITY;
                for j in 0..n {
                    if i != j {
                        best = best.min(dist(&points[i], &points[j]));
                    }
                }
                spacing[i] = 0.5 * best;
            }
        }
        PointCloud::new(points, spacing, vec![1.0; n], vec![0.0; n], Carrier::Atoms)
    }

    fn check_distinct(&self) -> Result<()> {
        let mut idx: Vec<usize> = (0..self.points.len()).collect();
        idx.sort_by(|&a, &b| {
            self.points[a]
                .partial_cmp(&self.points[b])
                .expect("finite coordinates")
        });
        for w in idx.windows(2) {
            if self.points[w[0]] == self.points[w[1]] {
                return Err(Error::Mesh(format!(
                    "duplicate node at {:?}",
                    self.points[w[0]]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.quad_weight.iter().sum()
    }

    /// Radius within which kernels to node `i` are smoothed; zero for atoms.
    pub fn smoothing(&self, i: usize) -> f64 {
        if self.carrier == Carrier::Atoms {
            0.0
        } else {
            self.spacing[i]
        }
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    pub fn translated(&self, v: &Point) -> Result<Self> {
        let points = self.points.iter().map(|p| add(p, v)).collect();
        PointCloud::new(
            points,
            self.spacing.clone(),
            self.quad_weight.clone(),
            self.boundary_distance.clone(),
            self.carrier,
        )
    }

    /// Dilation about the origin. Weights scale with the carrier dimension.
    pub fn scaled(&self, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::param("scale factor must be positive"));
        }
        let wscale = r.powi(self.carrier.dim() as i32);
        PointCloud::new(
            self.points
                .iter()
                .map(|p| [p[0] * r, p[1] * r, p[2] * r])
                .collect(),
            self.spacing.iter().map(|h| h * r).collect(),
            self.quad_weight.iter().map(|q| q * wscale).collect(),
            self.boundary_distance.iter().map(|d| d * r).collect(),
            self.carrier,
        )
    }

    /// Disjoint union. The carrier is kept only if both parts agree.
    pub fn union(&self, other: &PointCloud) -> Result<Self> {
        let carrier = if self.carrier == other.carrier {
            self.carrier
        } else {
            self.carrier.max_dim(other.carrier)
        };
        let cat = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().collect::<Vec<_>>();
        PointCloud::new(
            self.points.iter().chain(&other.points).copied().collect(),
            cat(&self.spacing, &other.spacing),
            cat(&self.quad_weight, &other.quad_weight),
            cat(&self.boundary_distance, &other.boundary_distance),
            carrier,
        )
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        PointCloud::new(
            idx.iter().map(|&i| self.points[i]).collect(),
            idx.iter().map(|&i| self.spacing[i]).collect(),
            idx.iter().map(|&i| self.quad_weight[i]).collect(),
            idx.iter().map(|&i| self.boundary_distance[i]).collect(),
            self.carrier,
        )
    }

    /// Index and distance of the node nearest to `x`.
    pub fn nearest(&self, x: &Point) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = dist2(p, x);
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    pub fn centroid(&self) -> Point {
        let mut c = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        let n = self.len() as f64;
        [c[0] / n, c[1] / n, c[2] / n]
    }

    /// Largest distance from `c` to a node.
    pub fn radius_about(&self, c: &Point) -> f64 {
        self.points.iter().map(|p| dist(p, c)).fold(0.0, f64::max)
    }
}

impl Carrier {
    fn max_dim(self, other: Carrier) -> Carrier {
        if self.dim() >= other.dim() {
            self
        } else {
            other
        }
    }
}

/// Non-negative weights on a cloud.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    pub cloud: Arc<PointCloud>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(cloud: Arc<PointCloud>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != cloud.len() {
            return Err(Error::param("weight count differs from node count"));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::param("measure weights must be finite and non-negative"));
        }
        Ok(DiscreteMeasure { cloud, weights })
    }

    /// Masses `rho(x_i) q_i`.
    pub fn from_density(cloud: Arc<PointCloud>, rho: impl Fn(&Point) -> f64) -> Result<Self> {
        let w = cloud
            .points
            .iter()
            .zip(&cloud.quad_weight)
            .map(|(p, q)| rho(p) * q)
            .collect();
        DiscreteMeasure::new(cloud, w)
    }

    /// Uniform density normalised to the given total mass.
    pub fn uniform(cloud: Arc<PointCloud>, mass: f64) -> Result<Self> {
        let tot = cloud.total_weight();
        let w = cloud.quad_weight.iter().map(|q| mass * q / tot).collect();
        DiscreteMeasure::new(cloud, w)
    }

    pub fn zero(cloud: Arc<PointCloud>) -> Self {
        let n = cloud.len();
        DiscreteMeasure {
            cloud,
            weights: vec![0.0; n],
        }
    }

    pub fn total_mass(&self) -> f64 {
        crate::numerics::sum(&self.weights)
    }

    pub fn is_atomic(&self) -> bool {
        self.cloud.carrier == Carrier::Atoms
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        DiscreteMeasure::new(self.cloud.clone(), self.weights.iter().map(|w| w * c).collect())
    }

    /// Nodes carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }
}

/// A signed measure as a pair of mutually singular non-negative parts.
#[derive(Debug, Clone)]
pub struct SignedDiscreteMeasure {
    pub plus: DiscreteMeasure,
    pub minus: DiscreteMeasure,
}

impl SignedDiscreteMeasure {
    pub fn new(plus: DiscreteMeasure, minus: DiscreteMeasure) -> Result<Self> {
        if Arc::ptr_eq(&plus.cloud, &minus.cloud) {
            if plus
                .weights
                .iter()
                .zip(&minus.weights)
                .any(|(a, b)| *a > 0.0 && *b > 0.0)
            {
                return Err(Error::param("positive and negative parts share a node"));
            }
        } else {
            for (i, p) in plus.cloud.points.iter().enumerate() {
                if plus.weights[i] == 0.0 {
                    continue;
                }
                for (j, q) in minus.cloud.points.iter().enumerate() {
                    if minus.weights[j] > 0.0 && p == q {
                        return Err(Error::param("positive and negative parts share a node"));
                    }
                }
            }
        }
        Ok(SignedDiscreteMeasure { plus, minus })
    }

    /// Jordan decomposition of `a - b` on a common cloud.
    pub fn difference(a: &[f64], b: &[f64], cloud: Arc<PointCloud>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::param("length mismatch"));
        }
        let plus = a.iter().zip(b).map(|(x, y)| (x - y).max(0.0)).collect();
        let minus = a.iter().zip(b).map(|(x, y)| (y - x).max(0.0)).collect();
        SignedDiscreteMeasure::new(
            DiscreteMeasure::new(cloud.clone(), plus)?,
            DiscreteMeasure::new(cloud, minus)?,
        )
    }

    pub fn total_variation(&self) -> f64 {
        self.plus.total_mass() + self.minus.total_mass()
    }

    pub fn net_mass(&self) -> f64 {
        self.plus.total_mass() - self.minus.total_mass()
    }

    /// Nodes and signed masses of both parts, positive part first.
    pub fn atoms(&self) -> (Vec<Point>, Vec<f64>, Vec<f64>) {
        let mut pts = Vec::new();
        let mut w = Vec::new();
        let mut h = Vec::new();
        for (m, s) in [(&self.plus, 1.0), (&self.minus, -1.0)] {
            for i in 0..m.weights.len() {
                if m.weights[i] > 0.0 {
                    pts.push(m.cloud.points[i]);
                    w.push(s * m.weights[i]);
                    h.push(m.cloud.spacing[i]);
                }
            }
        }
        (pts, w, h)
    }
}

/// Open domains with complements the library knows how to discretise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    /// {x : x1 > 0}.
    HalfSpace,
    BallInterior { center: Point, radius: f64 },
    /// Exterior of a closed ball; its complement is compact.
    BallExterior { center: Point, radius: f64 },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::HalfSpace => Ok(()),
            Domain::BallInterior { radius, center } | Domain::BallExterior { radius, center } => {
                if !(*radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    Err(Error::param("ball domain needs a positive radius"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Domain::HalfSpace => x[0] > 0.0,
            Domain::BallInterior { center, radius } => dist(x, center) < *radius,
            Domain::BallExterior { center, radius } => dist(x, center) > *radius,
        }
    }

    pub fn distance_to_boundary(&self, x: &Point) -> f64 {
        match self {
            Domain::HalfSpace => x[0].abs(),
            Domain::BallInterior { center, radius } | Domain::BallExterior { center, radius } => {
                (dist(x, center) - radius).abs()
            }
        }
    }

    /// Whether the complement is unbounded, so that sweeping can lose mass.
    pub fn complement_unbounded(&self) -> bool {
        !matches!(self, Domain::BallExterior { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain: Domain,
    /// Radius beyond which an unbounded complement is cut off.
    pub truncation_radius: f64,
}

impl DomainSpec {
    pub fn new(domain: Domain, truncation_radius: f64) -> Result<Self> {
        domain.validate()?;
        if !(truncation_radius > 0.0) {
            return Err(Error::param("truncation radius must be positive"));
        }
        Ok(DomainSpec {
            domain,
            truncation_radius,
        })
    }

    /// Truncation radius at which a measure of mass `mass` has a far-field
    /// contribution below `0.1 * residual` at the origin.
    pub fn auto_truncation(mass: f64, residual: f64, p: &KernelParams) -> f64 {
        let expo = p.alpha - p.n as f64;
        (0.1 * residual / mass.max(1e-300)).powf(1.0 / expo)
    }
}

/// Compact sets referred to by scenarios and the thinness tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Disc { center: Point, radius: f64 },
    Ball { center: Point, radius: f64 },
    Sphere { center: Point, radius: f64 },
    /// {x1 >= 0}, only used for reduced-kernel queries.
    ClosedHalfSpace,
    Union { parts: Vec<Shape> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducedKernel {
    /// Every point of the set is a point of density for the capacity.
    Itself,
    Empty,
    /// Not decidable from the shape alone.
    Unknown,
}

/// Closed-form reduced kernels for shapes where it is known.
pub fn reduced_kernel(shape: &Shape, p: &KernelParams) -> ReducedKernel {
    match shape {
        // Discs are non-thin at every point for α > 1, and for α = 2 in particular.
        Shape::Disc { .. } if p.alpha > 1.0 => ReducedKernel::Itself,
        Shape::Disc { .. } => ReducedKernel::Empty,
        Shape::Ball { .. } | Shape::ClosedHalfSpace => ReducedKernel::Itself,
        Shape::Sphere { .. } if p.alpha > 1.0 => ReducedKernel::Itself,
        Shape::Sphere { .. } => ReducedKernel::Empty,
        Shape::Union { parts } => {
            let ks: Vec<_> = parts.iter().map(|s| reduced_kernel(s, p)).collect();
            if ks.iter().all(|k| *k == ReducedKernel::Itself) {
                ReducedKernel::Itself
            } else if ks.iter().all(|k| *k == ReducedKernel::Empty) {
                ReducedKernel::Empty
            } else {
                ReducedKernel::Unknown
            }
        }
    }
}

/// Sunflower disc of radius `radius` in the plane x1 = center[0], centred at `center`.
pub fn disc_cloud(radius: f64, center: &Point, node_count: usize) -> Result<PointCloud> {
    if node_count < 16 {
        return Err(Error::Mesh(format!(
            "a disc needs at least 16 nodes, got {node_count}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::Mesh("disc radius must be positive".into()));
    }
    let n = node_count as f64;
    let q = PI * radius * radius / n;
    let h = (q / PI).sqrt();
    let mut pts = Vec::with_capacity(node_count);
    let mut bd = Vec::with_capacity(node_count);
    for k in 0..node_count {
        let r = radius * ((k as f64 + 0.5) / n).sqrt();
        let t = k as f64 * GOLDEN_ANGLE;
        pts.push([center[0], center[1] + r * t.cos(), center[2] + r * t.sin()]);
        bd.push(radius - r);
    }
    PointCloud::new(pts, vec![h; node_count], vec![q; node_count], bd, Carrier::Surface)
}

/// Evenly spread unit vectors.
pub fn fibonacci_directions(count: usize, twist: f64) -> Vec<Point> {
    let n = count as f64;
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = k as f64 * GOLDEN_ANGLE + twist;
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

/// Sphere surface nodes.
pub fn sphere_cloud(radius: f64, center: &Point, node_count: usize) -> Result<PointCloud> {
    if node_count < 16 {
        return Err(Error::Mesh(format!(
            "a sphere needs at least 16 nodes, got {node_count}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::Mesh("sphere radius must be positive".into()));
    }
    let q = 4.0 * PI * radius * radius / node_count as f64;
    let h = (q / PI).sqrt();
    let pts = fibonacci_directions(node_count, 0.0)
        .into_iter()
        .map(|u| {
            [
                center[0] + radius * u[0],
                center[1] + radius * u[1],
                center[2] + radius * u[2],
            ]
        })
        .collect();
    PointCloud::new(
        pts,
        vec![h; node_count],
        vec![q; node_count],
        vec![f64::INFINITY; node_count],
        Carrier::Surface,
    )
}

fn ball_radius_of_volume(v: f64) -> f64 {
    (3.0 * v / (4.0 * PI)).cbrt()
}

/// Spherical shells between `r_in` and `r_out` around `center`, each filled
/// with Fibonacci points carrying exact shell volumes. `radii` are the shell
/// breakpoints. Returns points, spacings and weights.
fn shell_layers(
    center: &Point,
    radii: &[f64],
    counts: &[usize],
) -> (Vec<Point>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut pts = Vec::new();
    let mut h = Vec::new();
    let mut q = Vec::new();
    let mut rr = Vec::new();
    for (l, w) in radii.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let m = counts[l];
        let vol = 4.0 / 3.0 * PI * (b.powi(3) - a.powi(3));
        let qi = vol / m as f64;
        let hi = ball_radius_of_volume(qi);
        if m == 1 && a == 0.0 {
            pts.push(*center);
            h.push(hi);
            q.push(qi);
            rr.push(0.0);
            continue;
        }
        // Radius splitting the shell volume in half.
        let r = ((a.powi(3) + b.powi(3)) / 2.0).cbrt();
        for u in fibonacci_directions(m, 0.7 * l as f64) {
            pts.push([center[0] + r * u[0], center[1] + r * u[1], center[2] + r * u[2]]);
            h.push(hi);
            q.push(qi);
            rr.push(r);
        }
    }
    (pts, h, q, rr)
}

/// Solid ball made of concentric shells of roughly equal cell volume.
pub fn ball_cloud(radius: f64, center: &Point, node_count: usize) -> Result<PointCloud> {
    if node_count < 16 {
        return Err(Error::Mesh(format!(
            "a ball needs at least 16 nodes, got {node_count}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::Mesh("ball radius must be positive".into()));
    }
    let n = node_count as f64;
    let cell = (4.0 / 3.0 * PI * radius.powi(3) / n).cbrt();
    let layers = ((radius / cell).round() as usize).max(1);
    let t = radius / layers as f64;
    let radii: Vec<f64> = (0..=layers).map(|l| l as f64 * t).collect();
    let l3 = (layers as f64).powi(3);
    let counts: Vec<usize> = (0..layers)
        .map(|l| {
            let frac = ((l + 1) as f64).powi(3) - (l as f64).powi(3);
            ((n * frac / l3).round() as usize).max(1)
        })
        .collect();
    let (pts, h, q, rr) = shell_layers(center, &radii, &counts);
    let bd = rr.iter().map(|r| radius - r).collect();
    PointCloud::new(pts, h, q, bd, Carrier::Volume)
}

/// Resolution controls for the discretised complement of a domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplementResolution {
    /// Spacing of the uniform core.
    pub core_spacing: f64,
    /// Radius of the uniform core, which must cover the plates.
    pub core_radius: f64,
    /// Ratio between consecutive ring widths outside the core.
    pub growth: f64,
}

impl ComplementResolution {
    pub fn validate(&self) -> Result<()> {
        if !(self.core_spacing > 0.0) || !(self.core_radius > self.core_spacing) {
            return Err(Error::param(
                "complement core radius must exceed its positive spacing",
            ));
        }
        if !(self.growth >= 1.0 && self.growth < 2.0) {
            return Err(Error::param("complement growth must lie in [1, 2)"));
        }
        Ok(())
    }
}

/// Breakpoints: a uniform run of width `h` to `core`, then widths growing by
/// `growth` until `outer`.
fn graded_breaks(start: f64, h: f64, core: f64, growth: f64, outer: f64) -> Vec<f64> {
    let mut b = vec![start];
    let mut r = start;
    while r + 0.5 * h < core {
        r += h;
        b.push(r.min(core));
    }
    let mut w = h;
    while r < outer {
        w *= growth;
        r += w;
        if outer - r < 0.5 * w {
            r = outer;
        }
        b.push(r.min(outer));
    }
    b
}

/// Graded polar mesh of the plane x1 = 0 out to radius `truncation`.
pub fn plane_cloud(res: &ComplementResolution, truncation: f64) -> Result<PointCloud> {
    res.validate()?;
    if truncation <= res.core_radius {
        return Err(Error::Mesh(
            "truncation radius must exceed the complement core radius".into(),
        ));
    }
    let h = res.core_spacing;
    let r0 = 0.56 * h;
    let mut breaks = graded_breaks(r0, h, res.core_radius, res.growth, truncation);
    breaks.insert(0, 0.0);
    let mut pts = Vec::new();
    let mut hs = Vec::new();
    let mut qs = Vec::new();
    let mut bd = Vec::new();
    for (k, w) in breaks.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let area = PI * (b * b - a * a);
        let r = ((a * a + b * b) / 2.0).sqrt();
        let m = if a == 0.0 {
            1
        } else {
            ((2.0 * PI * r / (b - a)).round() as usize).max(6)
        };
        let q = area / m as f64;
        let hi = (q / PI).sqrt();
        let phase = 0.5 * GOLDEN_ANGLE * k as f64;
        for j in 0..m {
            let t = phase + 2.0 * PI * j as f64 / m as f64;
            let p = if a == 0.0 {
                [0.0, 0.0, 0.0]
            } else {
                [0.0, r * t.cos(), r * t.sin()]
            };
            pts.push(p);
            hs.push(hi);
            qs.push(q);
            bd.push(truncation - r);
        }
    }
    PointCloud::new(pts, hs, qs, bd, Carrier::Surface)
}

/// Volume mesh of {x1 <= 0, |x| <= truncation}: hemispherical shells of
/// width `core_spacing` out to the core radius, then widening by `growth`,
/// each filled with roughly cubic cells.
pub fn lower_halfspace_cloud(res: &ComplementResolution, truncation: f64) -> Result<PointCloud> {
    res.validate()?;
    if truncation <= res.core_radius {
        return Err(Error::Mesh(
            "truncation radius must exceed the complement core radius".into(),
        ));
    }
    let radii = graded_breaks(0.0, res.core_spacing, res.core_radius, res.growth, truncation);
    let mut pts = Vec::new();
    let mut hs = Vec::new();
    let mut qs = Vec::new();
    let mut bd = Vec::new();
    for (l, w) in radii.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let vol = 2.0 / 3.0 * PI * (b.powi(3) - a.powi(3));
        let m = ((vol / (b - a).powi(3)).round() as usize).max(1);
        let q = vol / m as f64;
        let hi = ball_radius_of_volume(q);
        let r = ((a.powi(3) + b.powi(3)) / 2.0).cbrt();
        let phase = 0.7 * l as f64;
        for k in 0..m {
            // Uniform in the cosine of the angle to the inward normal.
            let z = (k as f64 + 0.5) / m as f64;
            let s = (1.0 - z * z).sqrt();
            let t = phase + k as f64 * GOLDEN_ANGLE;
            pts.push([-r * z, r * s * t.cos(), r * s * t.sin()]);
            hs.push(hi);
            qs.push(q);
            bd.push(truncation - r);
        }
    }
    PointCloud::new(pts, hs, qs, bd, Carrier::Volume)
}

/// Shells from `inner` out to `outer`, graded outward from width `h`.
pub fn shell_region_cloud(
    center: &Point,
    inner: f64,
    outer: f64,
    h: f64,
    growth: f64,
) -> Result<PointCloud> {
    if !(outer > inner && h > 0.0) {
        return Err(Error::Mesh("invalid shell region".into()));
    }
    let radii = graded_breaks(inner, h, inner + 3.0 * h, growth, outer);
    let counts: Vec<usize> = radii
        .windows(2)
        .map(|w| {
            let vol = 4.0 / 3.0 * PI * (w[1].powi(3) - w[0].powi(3));
            let cell = (w[1] - w[0]).powi(3);
            ((vol / cell).round() as usize).max(16)
        })
        .collect();
    let (pts, hs, qs, rr) = shell_layers(center, &radii, &counts);
    let bd = rr.iter().map(|r| outer - r).collect();
    PointCloud::new(pts, hs, qs, bd, Carrier::Volume)
}

/// Discretises the complement of a domain for sweeping.
///
/// For α = 2 only the boundary carries swept mass, so the plane or sphere is
/// meshed. For α < 2 the full complement is meshed, truncated at the
/// truncation radius when unbounded.
pub fn discretize_complement(
    spec: &DomainSpec,
    res: &ComplementResolution,
    p: &KernelParams,
) -> Result<PointCloud> {
    res.validate()?;
    let newtonian = p.is_newtonian();
    match spec.domain {
        Domain::HalfSpace => {
            if newtonian {
                plane_cloud(res, spec.truncation_radius)
            } else {
                lower_halfspace_cloud(res, spec.truncation_radius)
            }
        }
        Domain::BallInterior { center, radius } => {
            if newtonian {
                let n = (4.0 * radius * radius / (res.core_spacing * res.core_spacing)).ceil();
                sphere_cloud(radius, &center, (n as usize).max(16))
            } else {
                if spec.truncation_radius <= radius {
                    return Err(Error::Mesh(
                        "truncation radius must exceed the ball radius".into(),
                    ));
                }
                shell_region_cloud(
                    &center,
                    radius,
                    spec.truncation_radius,
                    res.core_spacing,
                    res.growth,
                )
            }
        }
        Domain::BallExterior { center, radius } => {
            if newtonian {
                let n = (4.0 * radius * radius / (res.core_spacing * res.core_spacing)).ceil();
                sphere_cloud(radius, &center, (n as usize).max(16))
            } else {
                let n = 4.0 / 3.0 * PI * radius.powi(3) / res.core_spacing.powi(3);
                ball_cloud(radius, &center, (n.ceil() as usize).max(16))
            }
        }
    }
}

/// Plates inside a domain.
#[derive(Debug, Clone)]
pub struct CondenserSpec {
    pub domain: DomainSpec,
    pub a1: Arc<PointCloud>,
    pub a2: Arc<PointCloud>,
    /// Distance from the first plate to the boundary of the domain.
    pub separation: f64,
}

impl CondenserSpec {
    pub fn new(domain: DomainSpec, a1: Arc<PointCloud>, a2: Arc<PointCloud>) -> Result<Self> {
        for x in &a1.points {
            if !domain.domain.contains(x) {
                return Err(Error::OutsideDomain { point: *x });
            }
        }
        for x in &a2.points {
            if domain.domain.contains(x) {
                return Err(Error::param(format!(
                    "second plate node {x:?} lies inside the domain"
                )));
            }
        }
        let separation = a1
            .points
            .iter()
            .map(|x| domain.domain.distance_to_boundary(x))
            .fold(f64::INFINITY, f64::min);
        Ok(CondenserSpec {
            domain,
            a1,
            a2,
            separation,
        })
    }

    /// True when the first plate is within one cell of the boundary.
    pub fn touches_boundary(&self) -> bool {
        self.a1
            .points
            .iter()
            .zip(&self.a1.spacing)
            .any(|(x, h)| self.domain.domain.distance_to_boundary(x) < *h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_weights_sum_to_area() {
        let c = disc_cloud(2.0, &[0.5, 0.0, 0.0], 400).unwrap();
        assert!((c.total_weight() - 4.0 * PI).abs() < 1e-12);
        assert!(c.points.iter().all(|p| p[0] == 0.5));
        assert!(c.points.iter().all(|p| (p[1] * p[1] + p[2] * p[2]).sqrt() < 2.0));
    }

    #[test]
    fn disc_rejects_tiny_mesh() {
        assert!(matches!(disc_cloud(1.0, &[0.0; 3], 15), Err(Error::Mesh(_))));
    }

    #[test]
    fn ball_weights_sum_to_volume() {
        let c = ball_cloud(1.5, &[2.0, 0.0, 0.0], 2000).unwrap();
        let vol = 4.0 / 3.0 * PI * 1.5f64.powi(3);
        assert!((c.total_weight() - vol).abs() < 1e-9 * vol);
        assert!(c.points.iter().all(|p| dist(p, &[2.0, 0.0, 0.0]) < 1.5));
        let n = c.len() as f64;
        assert!((n - 2000.0).abs() < 0.1 * 2000.0);
    }

    #[test]
    fn plane_mesh_covers_truncated_disc_exactly() {
        let res = ComplementResolution {
            core_spacing: 0.1,
            core_radius: 1.5,
            growth: 1.15,
        };
        let c = plane_cloud(&res, 40.0).unwrap();
        let area = PI * 40.0 * 40.0;
        assert!((c.total_weight() - area).abs() < 1e-9 * area);
        assert!(c.points.iter().all(|p| p[0] == 0.0));
        // Cells in the core have roughly the core spacing.
        let core: Vec<_> = (0..c.len())
            .filter(|&i| norm(&c.points[i]) < 1.4)
            .map(|i| c.quad_weight[i].sqrt())
            .collect();
        assert!(core.iter().all(|s| *s > 0.05 && *s < 0.2));
    }

    #[test]
    fn lower_halfspace_volume_matches_half_ball_roughly() {
        let res = ComplementResolution {
            core_spacing: 0.25,
            core_radius: 1.0,
            growth: 1.3,
        };
        let c = lower_halfspace_cloud(&res, 10.0).unwrap();
        let vol = 2.0 / 3.0 * PI * 1000.0;
        assert!(c.points.iter().all(|p| p[0] < 0.0));
        assert!((c.total_weight() - vol).abs() < 0.1 * vol);
    }

    #[test]
    fn signed_measure_rejects_overlap() {
        let cloud = Arc::new(PointCloud::atoms(vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap());
        let a = DiscreteMeasure::new(cloud.clone(), vec![1.0, 0.0]).unwrap();
        let b = DiscreteMeasure::new(cloud.clone(), vec![0.5, 0.0]).unwrap();
        assert!(SignedDiscreteMeasure::new(a, b).is_err());
        let s = SignedDiscreteMeasure::difference(&[1.0, 0.0], &[0.5, 2.0], cloud).unwrap();
        assert!((s.net_mass() + 1.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_nodes_rejected() {
        assert!(PointCloud::atoms(vec![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn condenser_validates_plates() {
        let dom = DomainSpec::new(Domain::HalfSpace, 50.0).unwrap();
        let a1 = Arc::new(disc_cloud(1.0, &[1.0, 0.0, 0.0], 64).unwrap());
        let a2 = Arc::new(disc_cloud(1.0, &[-1.0, 0.0, 0.0], 64).unwrap());
        let c = CondenserSpec::new(dom, a1.clone(), a2.clone()).unwrap();
        assert_eq!(c.separation, 1.0);
        assert!(CondenserSpec::new(dom, a2, a1).is_err());
    }

    #[test]
    fn reduced_kernels() {
        let p = KernelParams::newtonian();
        let d = Shape::Disc {
            center: [0.0; 3],
            radius: 1.0,
        };
        assert_eq!(reduced_kernel(&d, &p), ReducedKernel::Itself);
        let q = KernelParams::new(3, 0.8).unwrap();
        assert_eq!(reduced_kernel(&d, &q), ReducedKernel::Empty);
    }
}
