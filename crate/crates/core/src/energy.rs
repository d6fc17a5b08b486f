//! Standard, Green and weak Riesz energies of discrete measures.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dist2, Carrier, CondenserSpec, DiscreteMeasure, Point, SignedDiscreteMeasure};
use crate::green::GreenKernel;
use crate::kernels::{self_term, smoothed_kernel, DiagonalPolicy, KernelParams};
use crate::numerics::{gauss_legendre, matvec, sum, sum_iter};
use crate::treecode::Treecode;

/// `sum_ij a_i b_j k(x_i, y_j)`, with the diagonal policy on a shared cloud and
/// cell smoothing between different clouds.
pub fn mutual_energy(a: &DiscreteMeasure, b: &DiscreteMeasure, p: &KernelParams, policy: DiagonalPolicy) -> f64 {
    let s = p.decay();
    let sa = a.support();
    let sb = b.support();
    if sa.is_empty() || sb.is_empty() {
        return 0.0;
    }
    let same = Arc::ptr_eq(&a.cloud, &b.cloud);
    let pol = if a.is_atomic() { DiagonalPolicy::Atomic } else { policy };
    let carrier = if a.cloud.carrier == Carrier::Volume || b.cloud.carrier == Carrier::Volume {
        Carrier::Volume
    } else {
        Carrier::Surface
    };
    let rows: Vec<f64> = sa
        .par_iter()
        .map(|&i| {
            let x = &a.cloud.points[i];
            let v = sum_iter(sb.iter().map(|&j| {
                let k = if same && i == j {
                    self_term(a.cloud.spacing[i], a.cloud.carrier, p, pol)
                } else if same {
                    crate::kernels::power_kernel(dist2(x, &b.cloud.points[j]), s)
                } else {
                    let h = a.cloud.smoothing(i).max(b.cloud.smoothing(j));
                    smoothed_kernel(dist2(x, &b.cloud.points[j]), h, s, carrier)
                };
                b.weights[j] * k
            }));
            a.weights[i] * v
        })
        .collect();
    sum(&rows)
}

pub fn energy_of(mu: &DiscreteMeasure, p: &KernelParams, policy: DiagonalPolicy) -> f64 {
    mutual_energy(mu, mu, p, policy)
}

/// `E(nu+) - 2 E(nu+, nu-) + E(nu-)`.
pub fn energy_standard(nu: &SignedDiscreteMeasure, p: &KernelParams, policy: DiagonalPolicy) -> f64 {
    energy_of(&nu.plus, p, policy) - 2.0 * mutual_energy(&nu.plus, &nu.minus, p, policy)
        + energy_of(&nu.minus, p, policy)
}

/// Green energy `mu' G mu`.
pub fn energy_green(mu: &DiscreteMeasure, green: &GreenKernel) -> Result<f64> {
    let g = green.matrix(&mu.cloud)?;
    Ok(crate::numerics::dot(&mu.weights, &matvec(g.as_ref(), &mu.weights)))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeakEnergySettings {
    /// Leaf size near sources, in units of the local cell radius.
    pub leaf_factor: f64,
    /// Leaf size away from sources, as a fraction of the distance to them.
    pub distance_factor: f64,
    /// Gauss–Legendre points per axis in each leaf.
    pub order: usize,
    /// Treecode opening ratio.
    pub theta: f64,
    /// Largest allowed tail bound relative to the computed value.
    pub tail_fraction: f64,
    pub max_cells: usize,
}

impl Default for WeakEnergySettings {
    fn default() -> Self {
        WeakEnergySettings {
            leaf_factor: 2.0,
            distance_factor: 1.0,
            order: 3,
            theta: 0.35,
            tail_fraction: 0.01,
            max_cells: 3_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeakEnergy {
    pub value: f64,
    pub tail_bound: f64,
    pub cells: usize,
    /// Half-size of the integration cube.
    pub radius: f64,
}

/// Adaptive cubature of the squared half-order potential over a cube.
struct Cubature<'a> {
    tree: &'a Treecode,
    settings: &'a WeakEnergySettings,
    gl: (Vec<f64>, Vec<f64>),
    min_half: f64,
}

impl Cubature<'_> {
    fn leaves(&self, center: Point, half: f64, out: &mut Vec<(Point, f64)>) -> Result<()> {
        let mut stack = vec![(center, half)];
        while let Some((c, a)) = stack.pop() {
            let (dn, hn) = self.tree.nearest(&c);
            let gap = (dn - 3f64.sqrt() * a).max(0.0);
            let target = (self.settings.leaf_factor * hn).max(self.settings.distance_factor * gap);
            if 2.0 * a > target && a > self.min_half {
                let b = 0.5 * a;
                for o in 0..8 {
                    let sx = if o & 1 == 0 { -b } else { b };
                    let sy = if o & 2 == 0 { -b } else { b };
                    let sz = if o & 4 == 0 { -b } else { b };
                    stack.push(([c[0] + sx, c[1] + sy, c[2] + sz], b));
                }
            } else {
                out.push((c, a));
                if out.len() > self.settings.max_cells {
                    return Err(Error::param(format!(
                        "weak-energy grid exceeds {} cells",
                        self.settings.max_cells
                    )));
                }
            }
        }
        Ok(())
    }

    fn integrate(&self, leaves: &[(Point, f64)]) -> f64 {
        let (x, w) = &self.gl;
        let vals: Vec<f64> = leaves
            .par_iter()
            .map(|(c, a)| {
                let mut acc = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    for (j, xj) in x.iter().enumerate() {
                        for (k, xk) in x.iter().enumerate() {
                            let p = [c[0] + a * xi, c[1] + a * xj, c[2] + a * xk];
                            let phi = self.tree.eval(&p);
                            acc += w[i] * w[j] * w[k] * phi * phi;
                        }
                    }
                }
                acc * a * a * a
            })
            .collect();
        sum(&vals)
    }
}

/// Bound on the integral of the squared half potential outside a ball of
/// radius `a` about a centre whose ball of radius `r0` holds every source.
fn tail_integral(total_variation: f64, a: f64, r0: f64, p: &KernelParams) -> f64 {
    if a <= r0 {
        return f64::INFINITY;
    }
    let ap = a - r0;
    let nm = p.decay();
    total_variation.powi(2) * 4.0 * std::f64::consts::PI * (a / ap).powi(2) * ap.powf(-nm) / nm
}

/// Weak energy `(1/C) * integral of (k_{alpha/2} nu)^2`.
pub fn energy_weak(nu: &SignedDiscreteMeasure, p: &KernelParams, settings: &WeakEnergySettings) -> Result<WeakEnergy> {
    for part in [&nu.plus, &nu.minus] {
        if part.is_atomic() && part.total_mass() > 0.0 {
            return Err(Error::AtomicMeasure);
        }
    }
    let (pos, w, h) = nu.atoms();
    if pos.is_empty() {
        return Ok(WeakEnergy {
            value: 0.0,
            tail_bound: 0.0,
            cells: 0,
            radius: 0.0,
        });
    }
    let half = p.half();
    let tree = Treecode::new(&pos, &w, &h, half.decay(), settings.theta);
    let (c, r0) = tree.bounding_ball();
    let cub = Cubature {
        tree: &tree,
        settings,
        gl: gauss_legendre(settings.order),
        min_half: 0.05 * tree.min_spacing(),
    };
    let constant = p.composition_constant();
    let tv = tree.total_variation();
    let mut a = 2.0 * r0.max(tree.min_spacing());
    let mut leaves = Vec::new();
    cub.leaves(c, a, &mut leaves)?;
    let mut total = cub.integrate(&leaves);
    let mut cells = leaves.len();
    for _ in 0..60 {
        let tail = tail_integral(tv, a, r0, p);
        if tail <= settings.tail_fraction * total {
            break;
        }
        // Add the shell between the cube of half-size a and that of 2a.
        let mut shell = Vec::new();
        let q = 0.5 * a;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    if (1..=2).contains(&i) && (1..=2).contains(&j) && (1..=2).contains(&k) {
                        continue;
                    }
                    let off = |t: usize| -2.0 * a + q * (2 * t + 1) as f64;
                    cub.leaves([c[0] + off(i), c[1] + off(j), c[2] + off(k)], q, &mut shell)?;
                }
            }
        }
        total += cub.integrate(&shell);
        cells += shell.len();
        a *= 2.0;
    }
    let tail = tail_integral(tv, a, r0, p);
    Ok(WeakEnergy {
        value: total / constant + surface_cell_correction(nu, p),
        tail_bound: tail / constant,
        cells,
        radius: a,
    })
}

/// The cubature smears every node over a ball. Surface nodes stand for
/// discs, so their self-interaction is swapped for the disc-cell value.
fn surface_cell_correction(nu: &SignedDiscreteMeasure, p: &KernelParams) -> f64 {
    let mut acc = 0.0;
    for part in [&nu.plus, &nu.minus] {
        let cloud = &part.cloud;
        if cloud.carrier != Carrier::Surface {
            continue;
        }
        acc += sum_iter(part.weights.iter().zip(&cloud.spacing).map(|(w, &h)| {
            w * w
                * (self_term(h, Carrier::Surface, p, DiagonalPolicy::CellAverage)
                    - self_term(h, Carrier::Volume, p, DiagonalPolicy::CellAverage))
        }));
    }
    acc
}

pub fn energy_weak_positive(mu: &DiscreteMeasure, p: &KernelParams, settings: &WeakEnergySettings) -> Result<WeakEnergy> {
    let nu = SignedDiscreteMeasure::new(mu.clone(), DiscreteMeasure::zero(mu.cloud.clone()))?;
    energy_weak(&nu, p, settings)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub e_standard: f64,
    pub e_green: Option<f64>,
    pub e_weak: f64,
    pub tail_bound: f64,
}

/// Standard and weak energies of a signed measure, plus the Green energy of
/// its positive part when a Green kernel is supplied.
pub fn energy_report(
    nu: &SignedDiscreteMeasure,
    p: &KernelParams,
    green: Option<&GreenKernel>,
    settings: &WeakEnergySettings,
) -> Result<EnergyReport> {
    let weak = energy_weak(nu, p, settings)?;
    let e_green = match green {
        Some(g) => Some(energy_green(&nu.plus, g)?),
        None => None,
    };
    Ok(EnergyReport {
        e_standard: energy_standard(nu, p, DiagonalPolicy::CellAverage),
        e_green,
        e_weak: weak.value,
        tail_bound: weak.tail_bound,
    })
}

/// Flags a measure whose two parts have self-energies that keep growing under
/// refinement while the weak energy settles. Each triple is
/// (E(nu+), E(nu-), weak energy) at one resolution, coarse to fine.
pub fn undefined_in_continuum(levels: &[(f64, f64, f64)]) -> bool {
    if levels.len() < 3 {
        return false;
    }
    let grows = |f: fn(&(f64, f64, f64)) -> f64| levels.windows(2).all(|w| f(&w[1]) > 1.1 * f(&w[0]));
    let weak: Vec<f64> = levels.iter().map(|l| l.2).collect();
    let settles = weak
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() <= 0.05 * w[1].abs().max(1e-300));
    grows(|l| l.0) && grows(|l| l.1) && settles
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub separation: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub mutual: f64,
    /// `separation^(alpha - n)`.
    pub mutual_bound: f64,
    pub e_standard: f64,
    pub e_weak: f64,
    pub relative_difference: f64,
}

/// Checks standard and weak energies against each other for a separated condenser.
pub fn separation_equivalence_check(
    nu: &SignedDiscreteMeasure,
    condenser: &CondenserSpec,
    p: &KernelParams,
    settings: &WeakEnergySettings,
) -> Result<SeparationReport> {
    if !(condenser.separation > 0.0) {
        return Err(Error::param("plates must be separated from the boundary"));
    }
    let policy = DiagonalPolicy::CellAverage;
    let e_plus = energy_of(&nu.plus, p, policy);
    let e_minus = energy_of(&nu.minus, p, policy);
    let mutual_raw = mutual_energy(&nu.plus, &nu.minus, p, policy);
    let e_standard = e_plus - 2.0 * mutual_raw + e_minus;
    let e_weak = energy_weak(nu, p, settings)?.value;
    // Normalised so that unit-mass parts can be compared with the kernel bound.
    let norm = nu.plus.total_mass() * nu.minus.total_mass();
    let mutual = if norm > 0.0 { mutual_raw / norm } else { 0.0 };
    Ok(SeparationReport {
        separation: condenser.separation,
        e_plus,
        e_minus,
        mutual,
        mutual_bound: condenser.separation.powf(-p.decay()),
        e_standard,
        e_weak,
        relative_difference: (e_standard - e_weak).abs() / e_weak.abs().max(1e-300),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationStep {
    pub window_radius: f64,
    pub mass: f64,
    /// Green-norm distance between the restricted and the full measure.
    pub green_distance: f64,
}

/// Restricts `mu` to growing balls about `center` and tracks mass and Green distance.
pub fn truncation_convergence_check(
    mu: &DiscreteMeasure,
    green: &GreenKernel,
    center: &Point,
    radii: &[f64],
) -> Result<Vec<TruncationStep>> {
    let g = green.matrix(&mu.cloud)?;
    radii
        .iter()
        .map(|&r| {
            let diff: Vec<f64> = mu
                .cloud
                .points
                .iter()
                .zip(&mu.weights)
                .map(|(x, w)| if dist2(x, center) <= r * r { 0.0 } else { *w })
                .collect();
            let e = crate::numerics::dot(&diff, &matvec(g.as_ref(), &diff)).max(0.0);
            Ok(TruncationStep {
                window_radius: r,
                mass: mu.total_mass() - sum(&diff),
                green_distance: e.sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ball_cloud, disc_cloud, PointCloud};

    #[test]
    fn uniform_ball_energy_and_weak_energy() {
        // Uniform unit-mass density on the unit ball has energy 6/5.
        let cloud = Arc::new(ball_cloud(1.0, &[0.0; 3], 1500).unwrap());
        let mu = DiscreteMeasure::uniform(cloud, 1.0).unwrap();
        let p = KernelParams::newtonian();
        let e = energy_of(&mu, &p, DiagonalPolicy::CellAverage);
        assert!((e - 1.2).abs() < 0.02 * 1.2, "{e}");
        let w = energy_weak_positive(&mu, &p, &WeakEnergySettings::default()).unwrap();
        assert!((w.value - 1.2).abs() < 0.03 * 1.2, "{:?}", w);
        assert!(w.tail_bound <= 0.01 * w.value + 1e-12);
    }

    #[test]
    fn uniform_disc_energy() {
        // Mean inverse distance between uniform points of the unit disc: 16/(3 pi).
        let cloud = Arc::new(disc_cloud(1.0, &[0.0; 3], 1500).unwrap());
        let mu = DiscreteMeasure::uniform(cloud, 1.0).unwrap();
        let e = energy_of(&mu, &KernelParams::newtonian(), DiagonalPolicy::CellAverage);
        let exact = 16.0 / (3.0 * std::f64::consts::PI);
        assert!((e - exact).abs() < 0.01 * exact, "{e}");
    }

    #[test]
    fn uniform_disc_weak_energy() {
        let cloud = Arc::new(disc_cloud(1.0, &[0.0; 3], 600).unwrap());
        let mu = DiscreteMeasure::uniform(cloud, 1.0).unwrap();
        let w = energy_weak_positive(&mu, &KernelParams::newtonian(), &WeakEnergySettings::default()).unwrap();
        let exact = 16.0 / (3.0 * std::f64::consts::PI);
        assert!((w.value - exact).abs() < 0.02 * exact, "{}", w.value);
    }

    #[test]
    fn two_atoms_mutual_term() {
        let d = 5.0;
        let c = Arc::new(PointCloud::atoms(vec![[0.0; 3], [d, 0.0, 0.0]]).unwrap());
        let mu = DiscreteMeasure::new(c, vec![1.0, 1.0]).unwrap();
        let e = energy_of(&mu, &KernelParams::newtonian(), DiagonalPolicy::CellAverage);
        assert!((e - 2.0 / d).abs() < 1e-15);
    }

    #[test]
    fn weak_energy_rejects_atoms() {
        let c = Arc::new(PointCloud::atoms(vec![[1.0, 0.0, 0.0]]).unwrap());
        let mu = DiscreteMeasure::new(c, vec![1.0]).unwrap();
        assert!(matches!(
            energy_weak_positive(&mu, &KernelParams::newtonian(), &WeakEnergySettings::default()),
            Err(Error::AtomicMeasure)
        ));
    }

    #[test]
    fn zero_measure_has_zero_energies() {
        let cloud = Arc::new(disc_cloud(1.0, &[0.0; 3], 64).unwrap());
        let z = DiscreteMeasure::zero(cloud.clone());
        let nu = SignedDiscreteMeasure::new(z.clone(), z).unwrap();
        let p = KernelParams::newtonian();
        assert_eq!(energy_standard(&nu, &p, DiagonalPolicy::CellAverage), 0.0);
        assert_eq!(energy_weak(&nu, &p, &WeakEnergySettings::default()).unwrap().value, 0.0);
    }
}
