//! Scenario files: TOML with one table per pipeline. Every key is checked
//! before any computation starts; unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ComplementResolution, Domain, DomainSpec, Point};
use crate::kernels::{DiagonalPolicy, KernelParams};
use crate::thinness::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Coarse,
    #[default]
    Medium,
    Fine,
}

impl std::str::FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(Resolution::Coarse),
            "medium" => Ok(Resolution::Medium),
            "fine" => Ok(Resolution::Fine),
            _ => Err(Error::param(format!("unknown resolution {s:?}"))),
        }
    }
}

impl std::fmt::Display for Resolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Resolution::Coarse => "coarse",
            Resolution::Medium => "medium",
            Resolution::Fine => "fine",
        })
    }
}

/// Node counts per resolution level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub coarse: usize,
    pub medium: usize,
    pub fine: usize,
}

impl Ladder {
    pub const fn new(coarse: usize, medium: usize, fine: usize) -> Self {
        Ladder { coarse, medium, fine }
    }

    pub fn at(&self, r: Resolution) -> usize {
        match r {
            Resolution::Coarse => self.coarse,
            Resolution::Medium => self.medium,
            Resolution::Fine => self.fine,
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.coarse < 16 || self.coarse > self.medium || self.medium > self.fine {
            return Err(Error::Scenario {
                location: what.into(),
                message: "node ladder must be increasing and start at 16 or more".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlateSpec {
    Disc { radius_length: f64, center: Point },
    Ball { radius_length: f64, center: Point },
    Sphere { radius_length: f64, center: Point },
}

impl PlateSpec {
    fn validate(&self) -> Result<()> {
        let (r, c) = match self {
            PlateSpec::Disc { radius_length, center }
            | PlateSpec::Ball { radius_length, center }
            | PlateSpec::Sphere { radius_length, center } => (*radius_length, center),
        };
        if !(r > 0.0 && r.is_finite()) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Scenario {
                location: "plate".into(),
                message: "radius_length must be positive and the center finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kernel {
    #[serde(default = "newtonian_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub diagonal: Diagonal,
}

fn newtonian_alpha() -> f64 {
    2.0
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel {
            alpha: 2.0,
            diagonal: Diagonal::CellAverage,
        }
    }
}

impl Kernel {
    pub fn params(&self) -> Result<KernelParams> {
        KernelParams::new(3, self.alpha).map_err(|e| Error::Scenario {
            location: "kernel.alpha".into(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Diagonal {
    #[default]
    CellAverage,
    CenterValue,
    Atomic,
}

impl From<Diagonal> for DiagonalPolicy {
    fn from(d: Diagonal) -> Self {
        match d {
            Diagonal::CellAverage => DiagonalPolicy::CellAverage,
            Diagonal::CenterValue => DiagonalPolicy::CenterValue,
            Diagonal::Atomic => DiagonalPolicy::Atomic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSection {
    HalfSpace {
        #[serde(default = "default_truncation")]
        truncation_radius_length: f64,
    },
    BallInterior {
        center: Point,
        radius_length: f64,
        /// Outer radius of the meshed shell around the ball when `alpha < 2`.
        #[serde(default = "default_truncation")]
        truncation_radius_length: f64,
    },
    BallExterior {
        center: Point,
        radius_length: f64,
    },
}

fn default_truncation() -> f64 {
    40.0
}

impl DomainSection {
    pub fn domain(&self) -> Domain {
        match *self {
            DomainSection::HalfSpace { .. } => Domain::HalfSpace,
            DomainSection::BallInterior { center, radius_length, .. } => Domain::BallInterior {
                center,
                radius: radius_length,
            },
            DomainSection::BallExterior { center, radius_length } => Domain::BallExterior {
                center,
                radius: radius_length,
            },
        }
    }

    pub fn spec(&self) -> Result<DomainSpec> {
        let truncation = match *self {
            DomainSection::HalfSpace { truncation_radius_length } => truncation_radius_length,
            DomainSection::BallInterior {
                truncation_radius_length, ..
            } => truncation_radius_length,
            DomainSection::BallExterior { radius_length, .. } => radius_length,
        };
        DomainSpec::new(self.domain(), truncation).map_err(|e| Error::Scenario {
            location: "domain".into(),
            message: e.to_string(),
        })
    }

    /// Whether the Green kernel is known in closed form.
    pub fn analytic_green(&self, p: &KernelParams) -> bool {
        matches!(self, DomainSection::HalfSpace { .. }) && p.is_newtonian()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplementSection {
    pub core_spacing_length: f64,
    pub core_radius_length: f64,
    pub growth: f64,
}

impl ComplementSection {
    pub fn resolution(&self) -> ComplementResolution {
        ComplementResolution {
            core_spacing: self.core_spacing_length,
            core_radius: self.core_radius_length,
            growth: self.growth,
        }
    }
}

/// A pinned reference value with its relative tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub value: f64,
    pub label: String,
    pub relative_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityScenario {
    #[serde(default)]
    pub kernel: Kernel,
    pub plate: PlateSpec,
    pub nodes: Ladder,
    /// Green capacity in this domain instead of the free-space one.
    pub domain: Option<DomainSection>,
    pub complement: Option<ComplementSection>,
    pub target: Option<Target>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumScenario {
    #[serde(default)]
    pub kernel: Kernel,
    pub plate: PlateSpec,
    pub nodes: Ladder,
    pub domain: DomainSection,
    pub complement: Option<ComplementSection>,
    #[serde(default = "default_potential_tolerance")]
    pub potential_tolerance: f64,
}

fn default_potential_tolerance() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalayageScenario {
    #[serde(default)]
    pub kernel: Kernel,
    pub domain: DomainSection,
    pub complement: ComplementSection,
    pub atoms: AtomsSection,
    #[serde(default = "default_probe_count")]
    pub probe_count: usize,
    #[serde(default = "default_balayage_tolerance")]
    pub potential_tolerance: f64,
    #[serde(default = "default_mass_tolerance")]
    pub mass_tolerance: f64,
}

fn default_probe_count() -> usize {
    50
}
fn default_balayage_tolerance() -> f64 {
    0.02
}
fn default_mass_tolerance() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AtomsSection {
    Given { points: Vec<Point>, masses: Vec<f64> },
    /// Random atoms in `0.5 <= x1 <= 2`, `|x2|, |x3| <= 1`.
    Random { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondenserScenario {
    #[serde(default)]
    pub kernel: Kernel,
    pub plate: PlateSpec,
    pub nodes: Ladder,
    pub domain: DomainSection,
    pub complement: ComplementSection,
    #[serde(default = "default_condenser_probes")]
    pub probe_count: usize,
    #[serde(default = "default_potential_tolerance")]
    pub potential_tolerance: f64,
    #[serde(default = "default_energy_tolerance")]
    pub energy_tolerance: f64,
}

fn default_condenser_probes() -> usize {
    200
}
fn default_energy_tolerance() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSection {
    #[default]
    None,
    /// Green potential of point charges in the domain; negative masses attract.
    Charges { points: Vec<Point>, masses: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSection {
    #[default]
    None,
    /// Constant density bound; its total over the plate must exceed one.
    UniformDensity { density: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnsolvabilitySection {
    pub height_length: f64,
    pub radii_length: Vec<f64>,
    pub nodes: usize,
    pub objective_below: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussScenario {
    #[serde(default)]
    pub kernel: Kernel,
    pub plate: PlateSpec,
    pub nodes: Ladder,
    pub domain: DomainSection,
    pub complement: Option<ComplementSection>,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub constraint: ConstraintSection,
    #[serde(default = "default_certificate_tolerance")]
    pub certificate_tolerance: f64,
    #[serde(default = "default_estimator_tolerance")]
    pub estimator_tolerance: f64,
    pub unsolvability: Option<UnsolvabilitySection>,
}

fn default_certificate_tolerance() -> f64 {
    1e-6
}
fn default_estimator_tolerance() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedThinness {
    NotThin,
    ThinInfiniteCapacity,
    FiniteCapacity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileCase {
    pub profile: Profile,
    pub expected: Option<ExpectedThinness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinnessScenario {
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_shells")]
    pub shells: u32,
    pub cases: Vec<ProfileCase>,
}

fn default_ratio() -> f64 {
    2.0
}
fn default_shells() -> u32 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example10Scenario {
    pub nodes: Ladder,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<f64>,
    #[serde(default = "default_j_max")]
    pub j_max: u32,
    /// Pairs `[radius_length, height_length]` for the scaling identity.
    #[serde(default = "default_homogeneity")]
    pub homogeneity_cases: Vec<[f64; 2]>,
    /// Offsets along the boundary plane for the translation identity.
    #[serde(default = "default_offsets")]
    pub translation_offsets_length: Vec<f64>,
}

fn default_schedule() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.1, 0.05]
}
fn default_j_max() -> u32 {
    6
}
fn default_homogeneity() -> Vec<[f64; 2]> {
    vec![[0.5, 0.1], [2.0, 0.1], [2.0, 1.0]]
}
fn default_offsets() -> Vec<f64> {
    vec![3.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesScenario {
    #[serde(default)]
    pub kernel: Kernel,
    pub domain: DomainSection,
    pub complement: ComplementSection,
    pub plates: Vec<PlateSpec>,
    pub nodes: Ladder,
    #[serde(default = "default_decomposition_tolerance")]
    pub decomposition_tolerance: f64,
    #[serde(default = "default_energy_tolerance")]
    pub energy_tolerance: f64,
}

fn default_decomposition_tolerance() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Scenario {
    Capacity(CapacityScenario),
    Equilibrium(EquilibriumScenario),
    Balayage(BalayageScenario),
    Condenser(CondenserScenario),
    Gauss(GaussScenario),
    Thinness(ThinnessScenario),
    Example10(Example10Scenario),
    Identities(IdentitiesScenario),
}

/// Tagged sections lose their spans, so find the key or value named in the
/// message instead.
fn guess_line(text: &str, message: &str) -> Option<String> {
    let name = message.split('`').nth(1)?;
    text.lines().enumerate().find_map(|(k, line)| {
        let t = line.trim_start();
        let key = t.split('=').next()?.trim();
        let hit = key == name || t.contains(&format!("\"{name}\""));
        hit.then(|| format!("line {}, column {}", k + 1, line.len() - t.len() + 1))
    })
}

impl Scenario {
    pub fn command(&self) -> &'static str {
        match self {
            Scenario::Capacity(_) => "capacity",
            Scenario::Equilibrium(_) => "equilibrium",
            Scenario::Balayage(_) => "balayage",
            Scenario::Condenser(_) => "condenser",
            Scenario::Gauss(_) => "gauss",
            Scenario::Thinness(_) => "thinness",
            Scenario::Example10(_) => "example10",
            Scenario::Identities(_) => "identities",
        }
    }

    /// Parses and validates a scenario. Errors carry the line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let before = &text[..span.start.min(text.len())];
                    let line = before.matches('\n').count() + 1;
                    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                    format!("line {line}, column {col}")
                }
                None => guess_line(text, e.message()).unwrap_or_else(|| "scenario".into()),
            };
            Error::Scenario {
                location,
                message: e.message().to_string(),
            }
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, loc: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Scenario {
                    location: loc.into(),
                    message: format!("must be positive, got {v}"),
                })
            }
        };
        let domain = |d: &DomainSection| -> Result<()> { d.spec().map(|_| ()) };
        let needs_complement = |k: &Kernel, d: &DomainSection, c: &Option<ComplementSection>| -> Result<()> {
            if c.is_none() && !d.analytic_green(&k.params()?) {
                return Err(Error::Scenario {
                    location: "complement".into(),
                    message: "a numeric Green kernel needs a complement section".into(),
                });
            }
            Ok(())
        };
        let complement = |c: &ComplementSection| -> Result<()> {
            c.resolution().validate().map_err(|e| Error::Scenario {
                location: "complement".into(),
                message: e.to_string(),
            })
        };
        match self {
            Scenario::Capacity(s) => {
                s.kernel.params()?;
                s.plate.validate()?;
                s.nodes.validate("nodes")?;
                if let Some(d) = &s.domain {
                    domain(d)?;
                }
                if let Some(c) = &s.complement {
                    complement(c)?;
                }
                if let Some(t) = &s.target {
                    positive(t.relative_tolerance, "target.relative_tolerance")?;
                }
                if let Some(d) = &s.domain {
                    needs_complement(&s.kernel, d, &s.complement)?;
                }
            }
            Scenario::Equilibrium(s) => {
                s.kernel.params()?;
                s.plate.validate()?;
                s.nodes.validate("nodes")?;
                domain(&s.domain)?;
                if let Some(c) = &s.complement {
                    complement(c)?;
                }
                needs_complement(&s.kernel, &s.domain, &s.complement)?;
                positive(s.potential_tolerance, "potential_tolerance")?;
            }
            Scenario::Balayage(s) => {
                s.kernel.params()?;
                domain(&s.domain)?;
                complement(&s.complement)?;
                match &s.atoms {
                    AtomsSection::Given { points, masses } => {
                        if points.is_empty() || points.len() != masses.len() {
                            return Err(Error::Scenario {
                                location: "atoms".into(),
                                message: "points and masses must be non-empty and of equal length".into(),
                            });
                        }
                        for m in masses {
                            positive(*m, "atoms.masses")?;
                        }
                    }
                    AtomsSection::Random { count, .. } => {
                        if *count == 0 || *count > 10 {
                            return Err(Error::Scenario {
                                location: "atoms.count".into(),
                                message: "between 1 and 10 random atoms".into(),
                            });
                        }
                    }
                }
                positive(s.potential_tolerance, "potential_tolerance")?;
                positive(s.mass_tolerance, "mass_tolerance")?;
            }
            Scenario::Condenser(s) => {
                s.kernel.params()?;
                s.plate.validate()?;
                s.nodes.validate("nodes")?;
                domain(&s.domain)?;
                complement(&s.complement)?;
                positive(s.potential_tolerance, "potential_tolerance")?;
                positive(s.energy_tolerance, "energy_tolerance")?;
            }
            Scenario::Gauss(s) => {
                s.kernel.params()?;
                s.plate.validate()?;
                s.nodes.validate("nodes")?;
                domain(&s.domain)?;
                if let Some(c) = &s.complement {
                    complement(c)?;
                }
                needs_complement(&s.kernel, &s.domain, &s.complement)?;
                if let FieldSection::Charges { points, masses } = &s.field {
                    if points.is_empty() || points.len() != masses.len() {
                        return Err(Error::Scenario {
                            location: "field".into(),
                            message: "points and masses must be non-empty and of equal length".into(),
                        });
                    }
                }
                if let ConstraintSection::UniformDensity { density } = s.constraint {
                    positive(density, "constraint.density")?;
                }
                positive(s.certificate_tolerance, "certificate_tolerance")?;
                positive(s.estimator_tolerance, "estimator_tolerance")?;
                if let Some(u) = &s.unsolvability {
                    positive(u.height_length, "unsolvability.height_length")?;
                    for r in &u.radii_length {
                        positive(*r, "unsolvability.radii_length")?;
                    }
                    if u.radii_length.len() < 2 {
                        return Err(Error::Scenario {
                            location: "unsolvability.radii_length".into(),
                            message: "at least two radii".into(),
                        });
                    }
                }
            }
            Scenario::Thinness(s) => {
                s.kernel.params()?;
                if !(s.ratio > 1.0) {
                    return Err(Error::Scenario {
                        location: "ratio".into(),
                        message: "shell ratio must exceed 1".into(),
                    });
                }
                if s.shells < 4 {
                    return Err(Error::Scenario {
                        location: "shells".into(),
                        message: "at least 4 shells".into(),
                    });
                }
                for c in &s.cases {
                    c.profile.validate().map_err(|e| Error::Scenario {
                        location: "cases.profile".into(),
                        message: e.to_string(),
                    })?;
                }
            }
            Scenario::Example10(s) => {
                s.nodes.validate("nodes")?;
                if s.schedule.len() < 2 {
                    return Err(Error::Scenario {
                        location: "schedule".into(),
                        message: "at least two heights".into(),
                    });
                }
                for d in &s.schedule {
                    positive(*d, "schedule")?;
                }
                for [r, e] in &s.homogeneity_cases {
                    positive(*r, "homogeneity_cases")?;
                    positive(*e, "homogeneity_cases")?;
                }
                for d in &s.translation_offsets_length {
                    if !d.is_finite() {
                        return Err(Error::Scenario {
                            location: "translation_offsets_length".into(),
                            message: "offsets must be finite".into(),
                        });
                    }
                }
            }
            Scenario::Identities(s) => {
                s.kernel.params()?;
                domain(&s.domain)?;
                complement(&s.complement)?;
                s.nodes.validate("nodes")?;
                if s.plates.is_empty() {
                    return Err(Error::Scenario {
                        location: "plates".into(),
                        message: "at least one plate".into(),
                    });
                }
                for p in &s.plates {
                    p.validate()?;
                }
                positive(s.decomposition_tolerance, "decomposition_tolerance")?;
                positive(s.energy_tolerance, "energy_tolerance")?;
            }
        }
        Ok(())
    }
}
