//! Scenario pipelines. Each turns a validated scenario into checks, tables
//! and a JSON summary; nothing is written here.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::balayage::{potential, reflected_potential, Sweeper};
use crate::energy::{energy_green, energy_of, energy_weak, energy_weak_positive, WeakEnergySettings};
use crate::error::{Error, Result};
use crate::example10::{homogeneity_check, offset_disc, run_example10, Example10Settings};
use crate::geometry::{
    ball_cloud, disc_cloud, discretize_complement, sphere_cloud, CondenserSpec, DiscreteMeasure, Domain, DomainSpec,
    Point, PointCloud, SignedDiscreteMeasure,
};
use crate::green::GreenKernel;
use crate::kernels::{riesz_matrix, DiagonalPolicy, KernelParams};
use crate::records::{Check, RunOutput, Table};
use crate::scenario::*;
use crate::solver::{
    capacity, condenser_measure, determinism_check, green_capacity, green_equilibrium, solve_condenser,
    support_analysis, unsolvability_demo, ConstraintSpec, ExternalField, GaussProblem, QpSettings, QpStart,
};
use crate::thinness::{wiener_test, Thinness};

/// Runs the pipeline named by the scenario at one resolution.
pub fn run(scenario: &Scenario, resolution: Resolution) -> Result<RunOutput> {
    let mut out = match scenario {
        Scenario::Capacity(s) => run_capacity(s, resolution),
        Scenario::Equilibrium(s) => run_equilibrium(s, resolution),
        Scenario::Balayage(s) => run_balayage(s),
        Scenario::Condenser(s) => run_condenser(s, resolution),
        Scenario::Gauss(s) => run_gauss(s, resolution),
        Scenario::Thinness(s) => run_thinness(s),
        Scenario::Example10(s) => run_example10_pipeline(s, resolution),
        Scenario::Identities(s) => run_identities(s, resolution),
    }?;
    out.command = scenario.command().into();
    out.resolution = resolution.to_string();
    out.summary = json!({ "scenario": scenario, "results": out.summary });
    Ok(out)
}

pub fn plate_cloud(plate: &PlateSpec, nodes: usize) -> Result<Arc<PointCloud>> {
    let cloud = match *plate {
        PlateSpec::Disc { radius_length, center } => disc_cloud(radius_length, &center, nodes),
        PlateSpec::Ball { radius_length, center } => ball_cloud(radius_length, &center, nodes),
        PlateSpec::Sphere { radius_length, center } => sphere_cloud(radius_length, &center, nodes),
    }?;
    Ok(Arc::new(cloud))
}

/// Domain, optional complement sweeper and the Green kernel to use.
pub struct GreenSetup {
    pub spec: DomainSpec,
    pub sweeper: Option<Arc<Sweeper>>,
    pub green: GreenKernel,
}

pub fn green_setup(
    p: &KernelParams,
    domain: &DomainSection,
    complement: Option<&ComplementSection>,
) -> Result<GreenSetup> {
    let spec = domain.spec()?;
    let sweeper = match complement {
        Some(c) => {
            let a2 = Arc::new(discretize_complement(&spec, &c.resolution(), p)?);
            Some(Arc::new(Sweeper::new(spec, a2, *p)?))
        }
        None => None,
    };
    let green = if domain.analytic_green(p) {
        GreenKernel::halfspace()
    } else {
        match &sweeper {
            Some(sw) => GreenKernel::numeric(sw.clone()),
            None => {
                return Err(Error::Scenario {
                    location: "complement".into(),
                    message: "a numeric Green kernel needs a complement section".into(),
                })
            }
        }
    };
    Ok(GreenSetup { spec, sweeper, green })
}

fn needs_sweeper(setup: &GreenSetup) -> Result<Arc<Sweeper>> {
    setup.sweeper.clone().ok_or_else(|| Error::Scenario {
        location: "complement".into(),
        message: "this pipeline sweeps measures and needs a complement section".into(),
    })
}

/// Pseudo-random probes of the domain in a box around `around`, at least one
/// cell radius from every node of the `avoid` clouds.
pub fn domain_probes(domain: &Domain, around: &PointCloud, avoid: &[&PointCloud], count: usize, seed: u64) -> Vec<Point> {
    let c = around.centroid();
    let half = 2.0 * around.radius_about(&c) + 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 10_000 * count.max(1) {
        attempts += 1;
        let x = [
            c[0] + rng.gen_range(-half..half),
            c[1] + rng.gen_range(-half..half),
            c[2] + rng.gen_range(-half..half),
        ];
        if !domain.contains(&x) {
            continue;
        }
        let clear = avoid.iter().all(|cloud| {
            let (i, d) = cloud.nearest(&x);
            d >= cloud.spacing[i]
        });
        if clear {
            out.push(x);
        }
    }
    out
}

fn levels_up_to(ladder: &Ladder, r: Resolution) -> Vec<usize> {
    let mut v = vec![ladder.coarse];
    for (level, n) in [(Resolution::Medium, ladder.medium), (Resolution::Fine, ladder.fine)] {
        if level as u8 <= r as u8 && v.last() != Some(&n) {
            v.push(n);
        }
    }
    v
}

fn run_capacity(s: &CapacityScenario, res: Resolution) -> Result<RunOutput> {
    let p = s.kernel.params()?;
    let policy: DiagonalPolicy = s.kernel.diagonal.into();
    let setup = match &s.domain {
        Some(d) => Some(green_setup(&p, d, s.complement.as_ref())?),
        None => None,
    };
    let mut out = RunOutput::new("capacity", res.to_string());
    let mut table = Table::new("capacity", &["nodes", "capacity", "relative_error"]);
    let mut rows = Vec::new();
    for n in levels_up_to(&s.nodes, res) {
        let cloud = plate_cloud(&s.plate, n)?;
        let cap = match &setup {
            Some(g) => green_capacity(cloud, &g.green)?,
            None => capacity(cloud, &p, policy)?,
        };
        let err = s.target.as_ref().map_or(f64::NAN, |t| (cap.value - t.value).abs() / t.value.abs());
        table.push(&[n as f64, cap.value, err]);
        rows.push((n, cap.value, err, cap.solution.certificate.max_violation()));
    }
    let &(n, value, err, violation) = rows.last().expect("at least one level");
    out.check(Check::at_most("capacitary measure certificate", violation, 1e-6));
    if let Some(t) = &s.target {
        out.check(Check::relative(format!("capacity against {}", t.label), value, t.value, t.relative_tolerance));
        if rows.len() > 1 {
            out.check(
                Check::holds("refinement reduces the capacity error", err < rows[0].2)
                    .with_note(format!("{} nodes: {:.3e}, {} nodes: {:.3e}", rows[0].0, rows[0].2, n, err)),
            );
        }
    }
    out.summary = json!({
        "nodes": n,
        "capacity": value,
        "levels": rows.iter().map(|r| json!({"nodes": r.0, "capacity": r.1})).collect::<Vec<_>>(),
    });
    out.tables.push(table);
    Ok(out)
}

fn run_equilibrium(s: &EquilibriumScenario, res: Resolution) -> Result<RunOutput> {
    let p = s.kernel.params()?;
    let setup = green_setup(&p, &s.domain, s.complement.as_ref())?;
    let cloud = plate_cloud(&s.plate, s.nodes.at(res))?;
    let eq = green_equilibrium(cloud.clone(), &setup.green)?;
    let tol = s.potential_tolerance;
    let mut out = RunOutput::new("equilibrium", res.to_string());

    let interior: Vec<usize> = (0..cloud.len())
        .filter(|&i| cloud.boundary_distance[i] >= cloud.spacing[i])
        .collect();
    let on_support = interior
        .iter()
        .filter(|&&i| eq.gamma.weights[i] > 0.0)
        .map(|&i| (eq.potential[i] - 1.0).abs())
        .fold(0.0, f64::max);
    let lowest = interior.iter().map(|&i| eq.potential[i]).fold(f64::INFINITY, f64::min);
    out.check(Check::at_most("green potential is one on the support", on_support, tol));
    out.check(Check::at_least("green potential is at least one on the plate", lowest, 1.0 - tol));
    out.check(Check::relative(
        "equilibrium mass equals green capacity",
        eq.gamma.total_mass(),
        eq.capacity,
        1e-9,
    ));

    let mut avoid = vec![cloud.as_ref()];
    if let Some(sw) = &setup.sweeper {
        avoid.push(sw.a2.as_ref());
    }
    let probes = domain_probes(&setup.spec.domain, &cloud, &avoid, 100, 7);
    let at_probes = setup.green.potential(&eq.gamma, &probes)?;
    let highest = at_probes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.check(Check::at_most("green potential is at most one in the domain", highest, 1.0 + tol));
    let mut numeric_gap = None;
    if let (Some(sw), GreenKernel::HalfSpace { .. }) = (&setup.sweeper, &setup.green) {
        let numeric = sw.green_potential(&eq.gamma, &probes)?;
        let gap = numeric
            .iter()
            .zip(&at_probes)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        numeric_gap = Some(gap);
        // Absolute, in units of the plate potential.
        out.check(Check::at_most("swept and closed-form green potentials agree", gap, tol));
    }

    let mut table = Table::new("equilibrium_nodes", &["x1", "x2", "x3", "mass", "green_potential"]);
    for (i, x) in cloud.points.iter().enumerate() {
        table.push(&[x[0], x[1], x[2], eq.gamma.weights[i], eq.potential[i]]);
    }
    out.tables.push(table);
    out.summary = json!({
        "nodes": cloud.len(),
        "green_capacity": eq.capacity,
        "max_potential_at_probes": highest,
        "numeric_green_gap": numeric_gap,
    });
    Ok(out)
}

fn atoms_measure(atoms: &AtomsSection) -> Result<DiscreteMeasure> {
    let (points, masses) = match atoms {
        AtomsSection::Given { points, masses } => (points.clone(), masses.clone()),
        AtomsSection::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let pts: Vec<Point> = (0..*count)
                .map(|_| [rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let m: Vec<f64> = (0..*count).map(|_| rng.gen_range(0.5..1.5)).collect();
            let total: f64 = m.iter().sum();
            (pts, m.into_iter().map(|v| v / total).collect())
        }
    };
    DiscreteMeasure::new(Arc::new(PointCloud::atoms(points)?), masses)
}

fn run_balayage(s: &BalayageScenario) -> Result<RunOutput> {
    let p = s.kernel.params()?;
    let setup = green_setup(&p, &s.domain, Some(&s.complement))?;
    let sw = needs_sweeper(&setup)?;
    let mu = atoms_measure(&s.atoms)?;
    for x in &mu.cloud.points {
        if !setup.spec.domain.contains(x) {
            return Err(Error::Scenario {
                location: "atoms".into(),
                message: format!("atom {x:?} is outside the domain"),
            });
        }
    }
    let result = sw.sweep(&mu)?;
    let mut out = RunOutput::new("balayage", "fixed");
    out.check(Check::at_most(
        "swept potential matches on the complement",
        result.potential_residual,
        s.potential_tolerance,
    ));
    let conserves = matches!(s.domain, DomainSection::HalfSpace { .. }) && p.is_newtonian()
        || matches!(s.domain, DomainSection::BallExterior { .. });
    if conserves {
        out.check(Check::relative(
            "sweeping preserves total mass",
            result.mass_out,
            result.mass_in,
            s.mass_tolerance,
        ));
    }
    let superposition = sw.superposition_check(&mu)?;
    out.check(Check::at_most("sweeping is additive over atoms", superposition.max_discrepancy, 1e-6));

    let probes = domain_probes(&setup.spec.domain, &mu.cloud, &[sw.a2.as_ref()], s.probe_count, 11);
    let mut table = Table::new("balayage_probes", &["x1", "x2", "x3", "swept_potential", "reference_potential"]);
    let mut worst = 0.0f64;
    let reflection = matches!(s.domain, DomainSection::HalfSpace { .. }) && p.is_newtonian();
    for x in &probes {
        let a = potential(&result.swept, x, &p);
        let b = if reflection { reflected_potential(&mu, x, &p) } else { f64::NAN };
        worst = worst.max((a - b).abs() / b.abs());
        table.push(&[x[0], x[1], x[2], a, b]);
    }
    if reflection {
        out.check(
            Check::at_most("swept potential equals the mirror-image potential", worst, s.potential_tolerance)
                .with_note(format!("{} probes in the domain", probes.len())),
        );
    }
    out.tables.push(table);
    out.summary = json!({
        "atoms": mu.cloud.len(),
        "complement_nodes": sw.a2.len(),
        "mass_in": result.mass_in,
        "mass_out": result.mass_out,
        "tail_bound": result.tail_bound,
        "potential_residual": result.potential_residual,
        "superposition_discrepancy": superposition.max_discrepancy,
    });
    Ok(out)
}

fn run_condenser(s: &CondenserScenario, res: Resolution) -> Result<RunOutput> {
    let p = s.kernel.params()?;
    let setup = green_setup(&p, &s.domain, Some(&s.complement))?;
    let sw = needs_sweeper(&setup)?;
    let a1 = plate_cloud(&s.plate, s.nodes.at(res))?;
    let condenser = CondenserSpec::new(setup.spec, a1.clone(), sw.a2.clone())?;
    let settings = QpSettings::default();
    let sol = solve_condenser(
        &condenser,
        &sw,
        &setup.green,
        &ExternalField::None,
        &ConstraintSpec::unbounded(),
        &settings,
        &WeakEnergySettings::default(),
    )?;
    let cg = green_capacity(a1.clone(), &setup.green)?.value;
    let w = sol.gauss.w;
    let tol = s.potential_tolerance;
    let mut out = RunOutput::new("condenser", res.to_string());
    out.check(Check::relative("mass multiplier equals reciprocal green capacity", w, 1.0 / cg, s.energy_tolerance));
    out.check(Check::relative(
        "weak energy of the condenser solution equals the mass multiplier",
        sol.weak.value,
        w,
        s.energy_tolerance,
    ));

    let theta = condenser_measure(&condenser, &sw, &setup.green)?;
    let probes = domain_probes(&setup.spec.domain, &a1, &[&a1, &sw.a2], s.probe_count, 13);
    let pc = theta.potential_check(&condenser, &sw, &probes)?;
    out.check(Check::absolute("condenser potential on the plate, lowest", pc.plate.min, 1.0, tol));
    out.check(Check::absolute("condenser potential on the plate, highest", pc.plate.max, 1.0, tol));
    out.check(Check::at_most(
        "condenser potential vanishes on the complement",
        pc.complement.min.abs().max(pc.complement.max.abs()),
        tol,
    ));
    out.check(Check::at_least("condenser potential in the domain, lowest", pc.probes.min, -tol));
    out.check(Check::at_most("condenser potential in the domain, highest", pc.probes.max, 1.0 + tol));

    let support = support_analysis(&sol.nu, w, &condenser, &p, &probes, 1e-6)?;
    let mut table = Table::new("condenser_plate", &["x1", "x2", "x3", "lambda", "theta_plus"]);
    for (i, x) in a1.points.iter().enumerate() {
        table.push(&[x[0], x[1], x[2], sol.gauss.lambda.weights[i], theta.theta.plus.weights[i]]);
    }
    out.tables.push(table);
    out.summary = json!({
        "nodes": a1.len(),
        "complement_nodes": sw.a2.len(),
        "separation": condenser.separation,
        "w": w,
        "green_capacity": cg,
        "weak_energy": sol.weak.value,
        "weak_tail_bound": sol.weak.tail_bound,
        "standard_objective": sol.standard_objective,
        "theta_potential": pc,
        "support": support,
    });
    Ok(out)
}

fn field_of(field: &FieldSection) -> Result<ExternalField> {
    Ok(match field {
        FieldSection::None => ExternalField::None,
        FieldSection::Charges { points, masses } => {
            let cloud = Arc::new(PointCloud::atoms(points.clone())?);
            let plus = masses.iter().map(|m| m.max(0.0)).collect();
            let minus = masses.iter().map(|m| (-m).max(0.0)).collect();
            ExternalField::GreenPotential {
                zeta: SignedDiscreteMeasure::new(
                    DiscreteMeasure::new(cloud.clone(), plus)?,
                    DiscreteMeasure::new(cloud, minus)?,
                )?,
            }
        }
    })
}

/// Moves 1% of the mass of `x` onto the free node with the largest weighted
/// potential.
pub fn perturb(problem: &GaussProblem, x: &[f64]) -> Vec<f64> {
    let wp = problem.qp().weighted_potential(x);
    let room = |i: usize| problem.upper.as_ref().map_or(f64::INFINITY, |u| u[i]) - 0.99 * x[i];
    let target = (0..x.len())
        .filter(|&i| room(i) >= 0.01)
        .max_by(|&a, &b| wp[a].total_cmp(&wp[b]))
        .unwrap_or(0);
    let mut y: Vec<f64> = x.iter().map(|v| 0.99 * v).collect();
    y[target] += 0.01;
    y
}

fn run_gauss(s: &GaussScenario, res: Resolution) -> Result<RunOutput> {
    let p = s.kernel.params()?;
    let setup = green_setup(&p, &s.domain, s.complement.as_ref())?;
    let a1 = plate_cloud(&s.plate, s.nodes.at(res))?;
    let constraint = match s.constraint {
        ConstraintSection::None => ConstraintSpec::unbounded(),
        ConstraintSection::UniformDensity { density } => ConstraintSpec::from_density(&a1, |_| density)?,
    };
    if constraint.total() <= 1.0 {
        return Err(Error::Infeasible("the constraint carries total mass at most one".into()));
    }
    let problem = GaussProblem::new(a1.clone(), &setup.green, &field_of(&s.field)?, &constraint)?;
    let settings = QpSettings::default();
    let sol = problem.solve(&QpStart::Uniform, &settings)?;
    let tol = s.certificate_tolerance;
    let cert = &sol.certificate;
    let mut out = RunOutput::new("gauss", res.to_string());
    out.check(Check::holds("solver converged", sol.converged));
    out.check(Check::at_most("certificate lower violation", cert.lower_violation, tol));
    out.check(Check::at_most("certificate upper violation", cert.upper_violation, tol));
    let perturbed = problem.verify(&perturb(&problem, &sol.lambda.weights));
    out.check(Check::at_least(
        "perturbed solution is rejected by the certificate",
        perturbed.max_violation(),
        10.0 * tol,
    ));

    let scale = sol.w.abs().max(1e-300);
    let est_tol = s.estimator_tolerance;
    let gap = |v: f64| (v - cert.w_duality).abs() / scale;
    out.check(Check::at_most("duality estimate of w matches the multiplier", gap(sol.w), est_tol));
    match (&constraint.upper, cert.w_complement_average) {
        // The average over the unfilled part of the constraint needs a zero field.
        (Some(_), Some(avg)) if cert.cap_active && matches!(s.field, FieldSection::None) => out.check(Check::at_most(
            "complement-average estimate of w matches the duality estimate",
            gap(avg),
            est_tol,
        )),
        (None, _) => out.check(Check::at_most(
            "support-average estimate of w matches the duality estimate",
            gap(cert.w_support_average),
            est_tol,
        )),
        _ => {}
    }
    let det = determinism_check(&problem, &QpStart::Uniform, &QpStart::Vertex(0), &settings)?;

    let mut table = Table::new("gauss_plate", &["x1", "x2", "x3", "lambda", "cap"]);
    for (i, x) in a1.points.iter().enumerate() {
        let cap = constraint.upper.as_ref().map_or(f64::INFINITY, |u| u[i]);
        table.push(&[x[0], x[1], x[2], sol.lambda.weights[i], cap]);
    }
    out.tables.push(table);

    let mut demo = serde_json::Value::Null;
    if let Some(u) = &s.unsolvability {
        let trace = unsolvability_demo(u.height_length, &u.radii_length, u.nodes)?;
        out.check(Check::holds("unsolvable problem: objectives strictly decrease", trace.strictly_decreasing));
        out.check(Check::holds("unsolvable problem: objectives stay positive", trace.all_positive));
        let last = trace.steps.last().map_or(f64::NAN, |s| s.objective);
        out.check(Check::at_most("unsolvable problem: objective falls below the bound", last, u.objective_below));
        let mut t = Table::new("unsolvability", &["radius", "relative_height", "nodes", "objective"]);
        for st in &trace.steps {
            t.push(&[st.radius, st.relative_height, st.nodes as f64, st.objective]);
        }
        out.tables.push(t);
        demo = serde_json::to_value(&trace)?;
    }
    out.summary = json!({
        "nodes": a1.len(),
        "objective": sol.objective,
        "w": sol.w,
        "method": sol.method,
        "iterations": sol.iterations,
        "saturated": sol.saturated,
        "certificate": cert,
        "perturbed_violation": perturbed.max_violation(),
        "determinism": det,
        "unsolvability": demo,
    });
    Ok(out)
}

fn expected_matches(expected: ExpectedThinness, got: Thinness) -> bool {
    matches!(
        (expected, got),
        (ExpectedThinness::NotThin, Thinness::NotThin)
            | (ExpectedThinness::ThinInfiniteCapacity, Thinness::ThinInfiniteCapacity)
            | (ExpectedThinness::FiniteCapacity, Thinness::FiniteCapacity)
    )
}

fn profile_label(profile: &crate::thinness::Profile) -> String {
    match *profile {
        crate::thinness::Profile::Power { s } => format!("power s={s}"),
        crate::thinness::Profile::Exponential { s } => format!("exponential s={s}"),
    }
}

fn run_thinness(s: &ThinnessScenario) -> Result<RunOutput> {
    let p = s.kernel.params()?;
    let mut out = RunOutput::new("thinness", "fixed");
    let mut table = Table::new(
        "thinness_shells",
        &["profile", "k", "capacity", "term", "upper_bound", "negligible", "partial_terms", "partial_capacities"],
    );
    let mut reports = Vec::new();
    for case in &s.cases {
        let r = wiener_test(&case.profile, &p, s.ratio, s.shells)?;
        let label = profile_label(&case.profile);
        for row in &r.shells {
            table.push_cells(vec![
                label.clone(),
                row.k.to_string(),
                format!("{:e}", row.capacity),
                format!("{:e}", row.term),
                format!("{:e}", row.upper_bound),
                row.negligible.to_string(),
                format!("{:e}", row.partial_terms),
                format!("{:e}", row.partial_capacities),
            ]);
        }
        out.check(Check::holds(format!("{label}: classification is conclusive"), r.classification != Thinness::Inconclusive));
        if let Some(e) = case.expected {
            out.check(
                Check::holds(format!("{label}: classified as expected"), expected_matches(e, r.classification))
                    .with_note(format!(
                        "term exponent {:.3}, capacity exponent {:.3}",
                        r.term_exponent, r.capacity_exponent
                    )),
            );
        }
        reports.push(r);
    }
    out.tables.push(table);
    out.summary = serde_json::to_value(&reports)?;
    Ok(out)
}

fn run_example10_pipeline(s: &Example10Scenario, res: Resolution) -> Result<RunOutput> {
    let nodes = s.nodes.at(res);
    let mut out = RunOutput::new("example10", res.to_string());
    let mut homogeneity = Vec::new();
    for &[r, eps] in &s.homogeneity_cases {
        let h = homogeneity_check(r, eps, nodes)?;
        out.check(Check::relative(
            format!("disc capacity scales with the radius, r={r} eps={eps}"),
            h.direct,
            h.scaled,
            0.02,
        ));
        homogeneity.push(h);
    }
    let green = GreenKernel::halfspace();
    let base = green_capacity(Arc::new(offset_disc(1.0, 0.5, 0.0, nodes)?), &green)?.value;
    for &off in &s.translation_offsets_length {
        let moved = green_capacity(Arc::new(offset_disc(1.0, 0.5, off, nodes)?), &green)?.value;
        out.check(Check::relative(
            format!("disc capacity is invariant along the boundary, offset {off}"),
            moved,
            base,
            1e-9,
        ));
    }

    let mut settings = Example10Settings::with_nodes(nodes);
    settings.schedule = s.schedule.clone();
    settings.j_max = s.j_max;
    let report = run_example10(&settings)?;
    out.check(Check::holds("psi increases as the height decreases", report.psi.increasing_as_delta_decreases()));
    // Longest run of consecutive j whose height hits psi = j within 2%.
    let mut run = 0usize;
    let mut best = 0usize;
    let mut prev: Option<u32> = None;
    for d in &report.deltas {
        let hit = (d.psi - d.j as f64).abs() <= 0.02 * d.j as f64;
        run = match (hit, prev) {
            (false, _) => 0,
            (true, Some(j)) if j + 1 == d.j && run > 0 => run + 1,
            (true, _) => 1,
        };
        prev = Some(d.j);
        best = best.max(run);
    }
    out.check(Check::at_least("consecutive j with psi equal to j", best as f64, 3.0));
    for c in &report.components {
        out.check(Check::at_least(
            format!("own green potential at least one half on F_{}", c.j),
            c.own_potential_min,
            0.47,
        ));
        out.check(Check::at_most(
            format!("green capacity of F_{} at most twice its equilibrium mass", c.j),
            c.green_capacity,
            2.0 * c.gamma_mass,
        ));
    }
    let cross = report.components.iter().map(|c| c.cross_potential_max).fold(0.0, f64::max);
    out.check(Check::at_most("potential of the other components at most one half", cross, 0.5));
    if let Some(last) = report.partial_sums.last() {
        out.check(Check::at_least(
            "energy partial sums dominate the harmonic partial sums",
            last.energies,
            last.harmonic,
        ));
    }
    out.check(Check::holds("joint equilibrium converged", report.joint_converged));

    let mut t = Table::new("psi", &["delta", "psi"]);
    for p in &report.psi.samples {
        t.push(&[p.delta, p.psi]);
    }
    out.tables.push(t);
    let mut t = Table::new(
        "components",
        &["j", "delta", "eps", "r", "s", "green_capacity", "gamma_mass", "own_potential_min", "cross_potential_max", "energy", "harmonic_bound"],
    );
    for c in &report.components {
        t.push(&[
            c.j as f64,
            c.delta,
            c.eps,
            c.r,
            c.s,
            c.green_capacity,
            c.gamma_mass,
            c.own_potential_min,
            c.cross_potential_max,
            c.energy,
            c.harmonic_bound,
        ]);
    }
    out.tables.push(t);
    let mut t = Table::new("partial_sums", &["j", "capacities", "capacity_targets", "energies", "harmonic"]);
    for p in &report.partial_sums {
        t.push(&[p.j as f64, p.capacities, p.capacity_targets, p.energies, p.harmonic]);
    }
    out.tables.push(t);
    out.summary = json!({ "homogeneity": homogeneity, "report": report });
    Ok(out)
}

/// Smooth positive density used for the energy identities.
fn smooth_density(x: &Point) -> f64 {
    1.0 + 0.3 * (1.7 * x[1] + 0.9 * x[2]).sin()
}

fn run_identities(s: &IdentitiesScenario, res: Resolution) -> Result<RunOutput> {
    let p = s.kernel.params()?;
    let policy: DiagonalPolicy = s.kernel.diagonal.into();
    let setup = green_setup(&p, &s.domain, Some(&s.complement))?;
    let sw = needs_sweeper(&setup)?;
    let weak = WeakEnergySettings::default();
    let mut out = RunOutput::new("identities", res.to_string());
    let mut table = Table::new(
        "identities",
        &["plate", "green_energy", "standard_energy", "swept_standard_energy", "weak_energy_difference", "weak_energy"],
    );
    let mut rows = Vec::new();
    for (k, plate) in s.plates.iter().enumerate() {
        let cloud = plate_cloud(plate, s.nodes.at(res))?;
        let raw = DiscreteMeasure::from_density(cloud, smooth_density)?;
        let mu = raw.scaled(1.0 / raw.total_mass())?;
        let swept = sw.sweep(&mu)?.swept;
        let e_green = energy_green(&mu, &setup.green)?;
        let e_mu = energy_of(&mu, &p, policy);
        let e_swept = energy_of(&swept, &p, policy);
        let nu = SignedDiscreteMeasure::new(mu.clone(), swept)?;
        let e_weak_nu = energy_weak(&nu, &p, &weak)?.value;
        let e_weak_mu = energy_weak_positive(&mu, &p, &weak)?.value;
        let tag = format!("plate {}", k + 1);
        out.check(Check::relative(
            format!("{tag}: green energy equals the drop in standard energy under sweeping"),
            e_green,
            e_mu - e_swept,
            s.decomposition_tolerance,
        ));
        out.check(Check::relative(
            format!("{tag}: green energy equals the weak energy of mu minus its sweep"),
            e_weak_nu,
            e_green,
            s.energy_tolerance,
        ));
        out.check(Check::relative(
            format!("{tag}: standard and weak energies agree for a positive measure"),
            e_weak_mu,
            e_mu,
            s.energy_tolerance,
        ));
        table.push(&[(k + 1) as f64, e_green, e_mu, e_swept, e_weak_nu, e_weak_mu]);
        rows.push(json!({
            "plate": plate,
            "green_energy": e_green,
            "standard_energy": e_mu,
            "swept_standard_energy": e_swept,
            "weak_energy_difference": e_weak_nu,
            "weak_energy": e_weak_mu,
        }));
    }
    out.tables.push(table);
    out.summary = json!({ "complement_nodes": sw.a2.len(), "plates": rows });
    Ok(out)
}

/// Faults that a test harness can inject into the self-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negates the kernel matrix used by the energy positivity check.
    FlipKernelSign,
}

fn guarded(out: &mut RunOutput, name: &str, f: impl FnOnce() -> Result<Vec<Check>>) {
    match f() {
        Ok(checks) => out.checks.extend(checks),
        Err(e) => out.check(Check::holds(name, false).with_note(e.to_string())),
    }
}

/// Fast subset of the acceptance checks.
pub fn selftest(fault: Option<Fault>) -> RunOutput {
    let mut out = RunOutput::new("selftest", "fixed");
    let newton = KernelParams::newtonian();

    guarded(&mut out, "energy is positive definite", || {
        let cloud = disc_cloud(1.0, &[0.0; 3], 300)?;
        let mut k = riesz_matrix(&cloud, &newton, DiagonalPolicy::CellAverage)?;
        if fault == Some(Fault::FlipKernelSign) {
            k = -k;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut lowest = f64::INFINITY;
        for _ in 0..20 {
            let x: Vec<f64> = (0..cloud.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let kx = crate::numerics::matvec(k.as_ref(), &x);
            let q = crate::numerics::dot(&x, &kx) / crate::numerics::dot(&x, &x);
            lowest = lowest.min(q);
        }
        Ok(vec![Check::at_least("energy is positive on signed node weights", lowest, f64::MIN_POSITIVE)])
    });

    guarded(&mut out, "disc capacity", || {
        let c = capacity(Arc::new(disc_cloud(1.0, &[0.0; 3], 500)?), &newton, DiagonalPolicy::CellAverage)?;
        Ok(vec![Check::relative(
            "unit disc capacity against the closed form 2/pi",
            c.value,
            2.0 / std::f64::consts::PI,
            0.03,
        )])
    });

    guarded(&mut out, "sphere capacity", || {
        let c = capacity(Arc::new(sphere_cloud(1.0, &[0.0; 3], 500)?), &newton, DiagonalPolicy::CellAverage)?;
        Ok(vec![Check::relative("unit sphere capacity against 1", c.value, 1.0, 0.02)])
    });

    guarded(&mut out, "balayage", || {
        let domain = DomainSection::HalfSpace {
            truncation_radius_length: 100.0,
        };
        let complement = ComplementSection {
            core_spacing_length: 0.15,
            core_radius_length: 3.0,
            growth: 1.25,
        };
        let setup = green_setup(&newton, &domain, Some(&complement))?;
        let sw = needs_sweeper(&setup)?;
        let mu = atoms_measure(&AtomsSection::Random { count: 3, seed: 5 })?;
        let r = sw.sweep(&mu)?;
        let probes = domain_probes(&Domain::HalfSpace, &mu.cloud, &[sw.a2.as_ref()], 20, 3);
        let worst = probes
            .iter()
            .map(|x| {
                let b = reflected_potential(&mu, x, &newton);
                (potential(&r.swept, x, &newton) - b).abs() / b
            })
            .fold(0.0, f64::max);
        Ok(vec![
            Check::at_most("swept potential equals the mirror-image potential", worst, 0.02),
            Check::relative("sweeping preserves total mass", r.mass_out, r.mass_in, 0.03),
        ])
    });

    guarded(&mut out, "gauss certificate", || {
        let a1 = Arc::new(disc_cloud(0.5, &[1.0, 0.0, 0.0], 300)?);
        let constraint = ConstraintSpec::from_density(&a1, |_| 2.0)?;
        let field = field_of(&FieldSection::Charges {
            points: vec![[1.0, 0.0, 0.3]],
            masses: vec![0.5],
        })?;
        let problem = GaussProblem::new(a1, &GreenKernel::halfspace(), &field, &constraint)?;
        let sol = problem.solve(&QpStart::Uniform, &QpSettings::default())?;
        let perturbed = problem.verify(&perturb(&problem, &sol.lambda.weights));
        Ok(vec![
            Check::at_most("certificate violations of the solution", sol.certificate.max_violation(), 1e-6),
            Check::at_least("perturbed solution is rejected by the certificate", perturbed.max_violation(), 1e-5),
        ])
    });

    guarded(&mut out, "unsolvable problem", || {
        let t = unsolvability_demo(0.5, &[1.0, 2.0, 4.0], 300)?;
        Ok(vec![
            Check::holds("unsolvable problem: objectives strictly decrease", t.strictly_decreasing),
            Check::holds("unsolvable problem: objectives stay positive", t.all_positive),
        ])
    });

    guarded(&mut out, "homogeneity", || {
        let h = homogeneity_check(2.0, 1.0, 300)?;
        Ok(vec![Check::relative("disc capacity scales with the radius", h.direct, h.scaled, 0.02)])
    });

    guarded(&mut out, "thinness", || {
        let r = wiener_test(&crate::thinness::Profile::Exponential { s: 2.0 }, &newton, 2.0, 6)?;
        Ok(vec![Check::holds(
            "fast exponential cusp has finite capacity",
            r.classification == Thinness::FiniteCapacity,
        )])
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_respect_domain_and_spacing() {
        let plate = disc_cloud(0.5, &[1.0, 0.0, 0.0], 200).unwrap();
        let probes = domain_probes(&Domain::HalfSpace, &plate, &[&plate], 50, 1);
        assert_eq!(probes.len(), 50);
        for x in &probes {
            assert!(x[0] > 0.0);
            let (i, d) = plate.nearest(x);
            assert!(d >= plate.spacing[i]);
        }
        assert_eq!(probes, domain_probes(&Domain::HalfSpace, &plate, &[&plate], 50, 1));
    }

    #[test]
    fn random_atoms_have_unit_mass_in_the_slab() {
        let mu = atoms_measure(&AtomsSection::Random { count: 7, seed: 3 }).unwrap();
        assert!((mu.total_mass() - 1.0).abs() < 1e-12);
        assert!(mu.cloud.points.iter().all(|x| (0.5..2.0).contains(&x[0])));
    }

    #[test]
    fn levels_follow_the_ladder() {
        let l = Ladder::new(10, 20, 40);
        assert_eq!(levels_up_to(&l, Resolution::Coarse), vec![10]);
        assert_eq!(levels_up_to(&l, Resolution::Fine), vec![10, 20, 40]);
    }
}
