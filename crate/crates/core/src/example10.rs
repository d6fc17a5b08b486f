//! Discs parallel to the boundary of the Newtonian half-space whose Green
//! capacities are summable while the Newtonian energy of the Green equilibrium
//! measure of their union diverges.
//!
//! `psi(delta)` is the Green capacity of the unit disc at height `delta`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::energy_of;
use crate::error::{Error, Result};
use crate::geometry::{dist, disc_cloud, DiscreteMeasure, PointCloud};
use crate::green::GreenKernel;
use crate::kernels::{DiagonalPolicy, KernelParams};
use crate::nnls::{self, NnlsSettings};
use crate::numerics::{sum, symv, Cholesky};
use crate::solver::capacity::green_capacity;

/// Disc of radius `r` parallel to the boundary plane, centred at `(eps, s, 0)`.
pub fn offset_disc(r: f64, eps: f64, s: f64, nodes: usize) -> Result<PointCloud> {
    if !(r > 0.0 && eps > 0.0) {
        return Err(Error::param("disc radius and height must be positive"));
    }
    let cloud = disc_cloud(r, &[eps, s, 0.0], nodes)?;
    let h = cloud.max_spacing();
    if h >= eps {
        return Err(Error::Resolution(format!(
            "{nodes} nodes give spacing {h:.3e} on a disc of radius {r} at height {eps:.3e}"
        )));
    }
    Ok(cloud)
}

pub fn green_capacity_of_disc(r: f64, eps: f64, nodes: usize) -> Result<f64> {
    let cloud = Arc::new(offset_disc(r, eps, 0.0, nodes)?);
    Ok(green_capacity(cloud, &GreenKernel::halfspace())?.value)
}

pub fn psi(delta: f64, nodes: usize) -> Result<f64> {
    green_capacity_of_disc(1.0, delta, nodes)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PsiSample {
    pub delta: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PsiCurve {
    pub nodes: usize,
    /// Ordered by decreasing `delta`.
    pub samples: Vec<PsiSample>,
}

impl PsiCurve {
    pub fn min(&self) -> f64 {
        self.samples.iter().map(|s| s.psi).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().map(|s| s.psi).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn increasing_as_delta_decreases(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].psi > w[0].psi)
    }

    /// Adjacent samples with `psi` on both sides of `target`.
    pub fn bracket(&self, target: f64) -> Option<(PsiSample, PsiSample)> {
        self.samples
            .windows(2)
            .find(|w| (w[0].psi - target) * (w[1].psi - target) <= 0.0)
            .map(|w| (w[0], w[1]))
    }
}

pub fn compute_psi(deltas: &[f64], nodes: usize) -> Result<PsiCurve> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::param("psi needs positive heights"));
    }
    let mut deltas = deltas.to_vec();
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    let samples = deltas
        .par_iter()
        .map(|&delta| Ok(PsiSample { delta, psi: psi(delta, nodes)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(PsiCurve { nodes, samples })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HomogeneityCheck {
    pub r: f64,
    pub eps: f64,
    /// Green capacity of the disc of radius `r` at height `eps`.
    pub direct: f64,
    /// `r psi(eps / r)`.
    pub scaled: f64,
    pub relative_error: f64,
}

/// Compares the capacity of a scaled disc with the scaled capacity of the
/// unit disc, each solved on its own cloud.
pub fn homogeneity_check(r: f64, eps: f64, nodes: usize) -> Result<HomogeneityCheck> {
    let direct = green_capacity_of_disc(r, eps, nodes)?;
    let scaled = r * psi(eps / r, nodes)?;
    Ok(HomogeneityCheck {
        r,
        eps,
        direct,
        scaled,
        relative_error: (direct - scaled).abs() / scaled,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaJ {
    pub j: u32,
    pub delta: f64,
    pub psi: f64,
    /// Certified bracket: `psi < j` at the first height and `psi > j` at the second.
    pub bracket: (PsiSample, PsiSample),
    pub evaluations: usize,
}

/// Finds `delta` with `psi(delta) = j` inside a bracket, by bisection in
/// `ln delta` with false-position steps on `ln psi`.
pub fn find_delta_j(j: u32, bracket: (f64, f64), b_hat: f64, nodes: usize, tolerance: f64) -> Result<DeltaJ> {
    let target = j as f64;
    if target <= b_hat {
        return Err(Error::param(format!("j = {j} does not exceed the computed infimum {b_hat:.4}")));
    }
    let (d0, d1) = (bracket.0.max(bracket.1), bracket.0.min(bracket.1));
    let mut hi = PsiSample { delta: d0, psi: psi(d0, nodes)? };
    let mut lo = PsiSample { delta: d1, psi: psi(d1, nodes)? };
    let mut evaluations = 2;
    if !(hi.psi < target && lo.psi > target) {
        return Err(Error::param(format!(
            "psi({d0}) = {:.4} and psi({d1}) = {:.4} do not straddle {j}",
            hi.psi, lo.psi
        )));
    }
    let certified = (hi, lo);
    let f = |s: &PsiSample| s.psi.ln() - target.ln();
    let (mut fh, mut fl) = (f(&hi), f(&lo));
    // Illinois weighting keeps false position from stalling on one side.
    let mut last_hi: Option<bool> = None;
    let mut best = if fh.abs() < fl.abs() { hi } else { lo };
    for _ in 0..60 {
        if (best.psi - target).abs() <= tolerance * target {
            return Ok(DeltaJ {
                j,
                delta: best.delta,
                psi: best.psi,
                bracket: certified,
                evaluations,
            });
        }
        let (x0, x1) = (hi.delta.ln(), lo.delta.ln());
        let mut x = x1 - fl * (x1 - x0) / (fl - fh);
        if !(x < x0 && x > x1) {
            x = 0.5 * (x0 + x1);
        }
        let d = x.exp();
        let s = PsiSample { delta: d, psi: psi(d, nodes)? };
        evaluations += 1;
        let fs = f(&s);
        if fs < 0.0 {
            hi = s;
            fh = fs;
            if last_hi == Some(true) {
                fl *= 0.5;
            }
            last_hi = Some(true);
        } else {
            lo = s;
            fl = fs;
            if last_hi == Some(false) {
                fh *= 0.5;
            }
            last_hi = Some(false);
        }
        if fs.abs() < f(&best).abs() {
            best = s;
        }
    }
    Err(Error::NonConvergence {
        what: "psi root",
        iterations: evaluations,
        residual: (best.psi - target).abs() / target,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Example10Settings {
    /// Nodes per disc.
    pub nodes: usize,
    pub schedule: Vec<f64>,
    /// Largest `j` attempted.
    pub j_max: u32,
    /// Relative tolerance of `psi(delta_j) = j`.
    pub root_tolerance: f64,
    pub max_sweeps: usize,
    pub sweep_tolerance: f64,
}

impl Example10Settings {
    pub fn with_nodes(nodes: usize) -> Self {
        Example10Settings {
            nodes,
            schedule: vec![1.0, 0.5, 0.25, 0.1, 0.05],
            j_max: 6,
            root_tolerance: 0.005,
            max_sweeps: 100,
            sweep_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Component {
    pub j: u32,
    pub delta: f64,
    pub eps: f64,
    pub r: f64,
    pub s: f64,
    pub nodes: usize,
    pub green_capacity: f64,
    /// `j^-2`.
    pub capacity_target: f64,
    pub gamma_mass: f64,
    /// Range of the Green potential of the component's own part on its nodes.
    pub own_potential_min: f64,
    pub own_potential_max: f64,
    /// Largest Green potential of the other components on this one.
    pub cross_potential_max: f64,
    /// Newtonian energy of the component's part, cell-averaged diagonal.
    pub energy: f64,
    /// `gamma(F_j)^2 / diam`, with the diameter measured on the nodes.
    pub energy_lower_nodes: f64,
    /// `gamma(F_j)^2 / (2 r_j)`.
    pub energy_lower_diameter: f64,
    /// `c_g(F_j)^2 / (8 r_j)`.
    pub energy_lower_capacity: f64,
    /// `1 / (8 j)`.
    pub harmonic_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialSum {
    pub j: u32,
    pub capacities: f64,
    pub capacity_targets: f64,
    pub energies: f64,
    pub harmonic: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Example10Report {
    pub nodes: usize,
    pub a: f64,
    pub b_hat: f64,
    pub psi: PsiCurve,
    pub deltas: Vec<DeltaJ>,
    pub components: Vec<Component>,
    pub partial_sums: Vec<PartialSum>,
    pub gamma_total: f64,
    /// Smallest distance between nodes of different components.
    pub min_separation: f64,
    /// `gamma(F) / (a - 2)`.
    pub cross_bound: f64,
    /// `gamma(F) / (a / 2)`.
    pub cross_bound_half: f64,
    pub joint_converged: bool,
    pub sweeps: usize,
    /// Largest `|g gamma - 1|` over nodes carrying mass.
    pub equilibrium_residual: f64,
}

struct Block {
    cloud: Arc<PointCloud>,
    g: faer::Mat<f64>,
    chol: Cholesky,
}

/// Green equilibrium of a union of far-apart components by block
/// Gauss-Seidel. Returns the component weights, the sweep count and whether
/// the sweeps converged.
fn joint_equilibrium(blocks: &[Block], green: &GreenKernel, max_sweeps: usize, tol: f64) -> Result<(Vec<Vec<f64>>, usize, bool)> {
    let settings = NnlsSettings::default();
    let solve = |b: &Block, rhs: &[f64]| -> Result<Vec<f64>> {
        Ok(nnls::require_converged(nnls::solve(&b.g, &b.chol, rhs, &settings)?, "component equilibrium")?.x)
    };
    let mut gamma: Vec<Vec<f64>> = blocks
        .iter()
        .map(|b| solve(b, &vec![1.0; b.cloud.len()]))
        .collect::<Result<_>>()?;
    for sweep in 1..=max_sweeps {
        let mut change: f64 = 0.0;
        for j in 0..blocks.len() {
            let rhs = {
                let cross = cross_potential(blocks, &gamma, j, green)?;
                cross.iter().map(|c| 1.0 - c).collect::<Vec<_>>()
            };
            let next = solve(&blocks[j], &rhs)?;
            let scale = sum(&gamma[j]).max(1e-300);
            change = change.max(next.iter().zip(&gamma[j]).map(|(a, b)| (a - b).abs()).sum::<f64>() / scale);
            gamma[j] = next;
        }
        if change <= tol {
            return Ok((gamma, sweep, true));
        }
    }
    Ok((gamma, max_sweeps, false))
}

/// Green potential at the nodes of block `j` of all other blocks.
fn cross_potential(blocks: &[Block], gamma: &[Vec<f64>], j: usize, green: &GreenKernel) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; blocks[j].cloud.len()];
    for (k, b) in blocks.iter().enumerate() {
        if k == j {
            continue;
        }
        let mu = DiscreteMeasure::new(b.cloud.clone(), gamma[k].clone())?;
        for (a, v) in acc.iter_mut().zip(green.potential(&mu, &blocks[j].cloud.points)?) {
            *a += v;
        }
    }
    Ok(acc)
}

fn diameter(cloud: &PointCloud) -> f64 {
    let pts = &cloud.points;
    (0..pts.len())
        .into_par_iter()
        .map(|i| pts[i + 1..].iter().map(|y| dist(&pts[i], y)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// The full construction: the psi curve, the heights `delta_j`, the discs
/// `F_j` and the joint equilibrium on their union.
pub fn run_example10(settings: &Example10Settings) -> Result<Example10Report> {
    let nodes = settings.nodes;
    let curve = compute_psi(&settings.schedule, nodes)?;
    let b_hat = curve.min();
    let j_min = b_hat.ceil() as u32 + 1;
    let mut deltas = Vec::new();
    for j in j_min..=settings.j_max {
        let Some((a, b)) = curve.bracket(j as f64) else {
            break;
        };
        deltas.push(find_delta_j(j, (a.delta, b.delta), b_hat, nodes, settings.root_tolerance)?);
    }
    if deltas.len() < 3 {
        return Err(Error::Resolution(format!(
            "only {} values of j are reachable on the schedule",
            deltas.len()
        )));
    }
    let green = GreenKernel::halfspace();
    let newtonian = KernelParams::newtonian();

    // gamma(F) does not grow with a, so one enlargement suffices.
    let mut a = 4.0;
    let mut attempt = 0;
    loop {
        attempt += 1;
        let blocks = deltas
            .iter()
            .map(|d| {
                let r = (d.j as f64).powi(-3);
                let cloud = Arc::new(offset_disc(r, r * d.delta, a * d.j as f64, nodes)?);
                let g = green.matrix(&cloud)?;
                let chol = Cholesky::new(g.as_ref(), "disc Green matrix")?;
                Ok(Block { cloud, g, chol })
            })
            .collect::<Result<Vec<_>>>()?;
        let (gamma, sweeps, joint_converged) =
            joint_equilibrium(&blocks, &green, settings.max_sweeps, settings.sweep_tolerance)?;
        let gamma_total: f64 = gamma.iter().map(|g| sum(g)).sum();
        if gamma_total > a && attempt == 1 {
            a = gamma_total;
            continue;
        }

        let mut components = Vec::with_capacity(blocks.len());
        let mut equilibrium_residual: f64 = 0.0;
        for (i, (d, b)) in deltas.iter().zip(&blocks).enumerate() {
            let jf = d.j as f64;
            let r = jf.powi(-3);
            let own = symv(&b.g, &gamma[i]);
            let cross = cross_potential(&blocks, &gamma, i, &green)?;
            for ((o, c), w) in own.iter().zip(&cross).zip(&gamma[i]) {
                if *w > 0.0 {
                    equilibrium_residual = equilibrium_residual.max((o + c - 1.0).abs());
                }
            }
            let mass = sum(&gamma[i]);
            let cap = green_capacity(b.cloud.clone(), &green)?.value;
            let mu = DiscreteMeasure::new(b.cloud.clone(), gamma[i].clone())?;
            components.push(Component {
                j: d.j,
                delta: d.delta,
                eps: r * d.delta,
                r,
                s: a * jf,
                nodes: b.cloud.len(),
                green_capacity: cap,
                capacity_target: jf.powi(-2),
                gamma_mass: mass,
                own_potential_min: own.iter().copied().fold(f64::INFINITY, f64::min),
                own_potential_max: own.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                cross_potential_max: cross.iter().copied().fold(0.0, f64::max),
                energy: energy_of(&mu, &newtonian, DiagonalPolicy::CellAverage),
                energy_lower_nodes: mass * mass / diameter(&b.cloud),
                energy_lower_diameter: mass * mass / (2.0 * r),
                energy_lower_capacity: cap * cap / (8.0 * r),
                harmonic_bound: 1.0 / (8.0 * jf),
            });
        }
        let mut partial_sums = Vec::with_capacity(components.len());
        let (mut sc, mut st, mut se, mut sh) = (0.0, 0.0, 0.0, 0.0);
        for c in &components {
            sc += c.green_capacity;
            st += c.capacity_target;
            se += c.energy;
            sh += c.harmonic_bound;
            partial_sums.push(PartialSum {
                j: c.j,
                capacities: sc,
                capacity_targets: st,
                energies: se,
                harmonic: sh,
            });
        }
        let mut min_separation = f64::INFINITY;
        for i in 0..blocks.len() {
            for k in i + 1..blocks.len() {
                for x in &blocks[i].cloud.points {
                    for y in &blocks[k].cloud.points {
                        min_separation = min_separation.min(dist(x, y));
                    }
                }
            }
        }
        return Ok(Example10Report {
            nodes,
            a,
            b_hat,
            psi: curve,
            deltas,
            components,
            partial_sums,
            gamma_total,
            min_separation,
            cross_bound: gamma_total / (a - 2.0),
            cross_bound_half: gamma_total / (a / 2.0),
            joint_converged,
            sweeps,
            equilibrium_residual,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_disc_at_small_height_is_rejected() {
        assert!(matches!(offset_disc(1.0, 0.01, 0.0, 400), Err(Error::Resolution(_))));
        assert!(offset_disc(1.0, 0.2, 0.0, 400).is_ok());
    }

    #[test]
    fn psi_exceeds_free_space_capacity_and_grows() {
        let c = compute_psi(&[2.0, 0.5], 300).unwrap();
        assert!(c.increasing_as_delta_decreases());
        // The Green kernel is below the Newtonian one; the unit disc has
        // Newtonian capacity 2/pi for the kernel 1/r.
        assert!(c.min() > 2.0 / std::f64::consts::PI);
    }

    #[test]
    fn bracket_picks_adjacent_straddling_samples() {
        let c = PsiCurve {
            nodes: 0,
            samples: vec![
                PsiSample { delta: 1.0, psi: 0.9 },
                PsiSample { delta: 0.5, psi: 1.3 },
                PsiSample { delta: 0.1, psi: 3.4 },
            ],
        };
        let (a, b) = c.bracket(2.0).unwrap();
        assert_eq!((a.delta, b.delta), (0.5, 0.1));
        assert!(c.bracket(5.0).is_none());
    }
}
