//! Example systems with analytic derivatives.
//!
//! - `rolling_disk`: a vertical disk rolling without slipping on a circular
//!   table, coordinates `(x, y, theta, phi)`.
//! - `particle_in_disk`: a free point mass in the plane inside a circular
//!   wall; the nonholonomic machinery reduces to billiards.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mechanics::{ConstraintSet, InequalityConstraint, MechanicalSystem, Unconstrained};
use crate::stepper::{DiscreteLagrangian, QuadraticDiscreteLagrangian};
use crate::{Matrix, Vector};

/// A complete system definition: Lagrangian, velocity constraints,
/// inequality constraints and discrete Lagrangian.
#[derive(Clone)]
pub struct Model {
    pub name: String,
    /// Physical parameters by name, as listed in the catalog entry.
    pub parameters: BTreeMap<String, f64>,
    pub system: Arc<dyn MechanicalSystem>,
    pub constraints: Arc<dyn ConstraintSet>,
    /// Admissible means every gap is non-positive.
    pub boundaries: Vec<Arc<dyn InequalityConstraint>>,
    pub lagrangian: Arc<dyn DiscreteLagrangian>,
}

impl Model {
    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn boundary(&self, label: &str) -> Option<&dyn InequalityConstraint> {
        self.boundaries
            .iter()
            .find(|b| b.label() == label)
            .map(|b| b.as_ref())
    }

    /// Gap of every inequality constraint at `q`, in order.
    pub fn gaps(&self, q: &Vector) -> Vec<f64> {
        self.boundaries.iter().map(|b| b.gap(q)).collect()
    }

    pub fn is_admissible(&self, q: &Vector, tolerance: f64) -> bool {
        self.gaps(q).into_iter().all(|g| g <= tolerance)
    }
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("parameters", &self.parameters)
            .field("dim", &self.dim())
            .field("constraints", &self.constraints.count())
            .field(
                "boundaries",
                &self
                    .boundaries
                    .iter()
                    .map(|b| b.label().to_string())
                    .collect::<Vec<_>>(),
            )
            .finish()
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: name.to_string(),
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

/// Vertical rolling disk: `L = m/2 (x'^2 + y'^2) + I/2 theta'^2 + J/2 phi'^2`
/// with rolling constraints `x' = R cos(phi) theta'`, `y' = R sin(phi) theta'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingDisk {
    pub mass: f64,
    /// Moment of inertia about the rolling axis.
    pub roll_inertia: f64,
    /// Moment of inertia about the vertical axis.
    pub turn_inertia: f64,
    pub radius: f64,
}

impl RollingDisk {
    pub fn mass_matrix(&self) -> Matrix {
        Matrix::from_diagonal(&Vector::from_vec(vec![
            self.mass,
            self.mass,
            self.roll_inertia,
            self.turn_inertia,
        ]))
    }

    /// Basis of `D_q`: rolling `(R cos phi, R sin phi, 1, 0)` and turning
    /// `(0, 0, 0, 1)`.
    pub fn distribution_basis(&self, q: &Vector) -> [Vector; 2] {
        let (s, c) = q[3].sin_cos();
        [
            Vector::from_vec(vec![self.radius * c, self.radius * s, 1.0, 0.0]),
            Vector::from_vec(vec![0.0, 0.0, 0.0, 1.0]),
        ]
    }

    /// Velocity `omega * rolling + turn_rate * turning`.
    pub fn velocity(&self, q: &Vector, omega: f64, turn_rate: f64) -> Vector {
        let [roll, turn] = self.distribution_basis(q);
        omega * roll + turn_rate * turn
    }

    /// Exact solution from `q0` with constant rolling rate `omega` and turn
    /// rate `turn_rate` (the interior dynamics keep both constant).
    pub fn arc(&self, q0: &Vector, omega: f64, turn_rate: f64, t: f64) -> Vector {
        let phi = q0[3] + turn_rate * t;
        let theta = q0[2] + omega * t;
        let (x, y) = if turn_rate == 0.0 {
            let (s, c) = q0[3].sin_cos();
            (
                q0[0] + self.radius * omega * t * c,
                q0[1] + self.radius * omega * t * s,
            )
        } else {
            let rho = self.radius * omega / turn_rate;
            (
                q0[0] + rho * (phi.sin() - q0[3].sin()),
                q0[1] - rho * (phi.cos() - q0[3].cos()),
            )
        };
        Vector::from_vec(vec![x, y, theta, phi])
    }

    /// First time `t > 0` at which the exact solution from `q0` brings the
    /// edge point `center + sign R e(phi)` to the circle of radius
    /// `table_radius`, or `None` if it never does.
    ///
    /// Along a turning arc the edge point moves on a circle about
    /// `c = (x0 - rho sin phi0, y0 + rho cos phi0)` of radius
    /// `sqrt(rho^2 + R^2)` at angle `phi - beta`, `beta = atan2(rho, sign R)`,
    /// so the contact condition reduces to `cos(phi - beta - gamma) = k`.
    pub fn first_edge_contact(
        &self,
        q0: &Vector,
        omega: f64,
        turn_rate: f64,
        table_radius: f64,
        sign: f64,
    ) -> Option<f64> {
        let (s0, c0) = q0[3].sin_cos();
        let p0 = (
            q0[0] + sign * self.radius * c0,
            q0[1] + sign * self.radius * s0,
        );
        if turn_rate == 0.0 {
            let d = (self.radius * omega * c0, self.radius * omega * s0);
            let a = d.0 * d.0 + d.1 * d.1;
            let b = 2.0 * (p0.0 * d.0 + p0.1 * d.1);
            let c = p0.0 * p0.0 + p0.1 * p0.1 - table_radius * table_radius;
            let disc = b * b - 4.0 * a * c;
            if a == 0.0 || disc < 0.0 {
                return None;
            }
            let t = (-b + disc.sqrt()) / (2.0 * a);
            return (t > 0.0).then_some(t);
        }
        let rho = self.radius * omega / turn_rate;
        let center = (q0[0] - rho * s0, q0[1] + rho * c0);
        let r_edge = rho.hypot(self.radius);
        let beta = rho.atan2(sign * self.radius);
        let dist = center.0.hypot(center.1);
        if dist == 0.0 {
            return None;
        }
        let gamma = center.1.atan2(center.0);
        let k =
            (table_radius * table_radius - dist * dist - r_edge * r_edge) / (2.0 * r_edge * dist);
        if !(-1.0..=1.0).contains(&k) {
            return None;
        }
        let psi0 = q0[3] - beta;
        let mut best: Option<f64> = None;
        for root in [gamma + k.acos(), gamma - k.acos()] {
            // Smallest t > 0 with psi0 + turn_rate t = root (mod 2 pi).
            let delta = (root - psi0) * turn_rate.signum();
            let delta = delta.rem_euclid(2.0 * PI);
            let delta = if delta < 1e-12 {
                delta + 2.0 * PI
            } else {
                delta
            };
            let t = delta / turn_rate.abs();
            if best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
        best
    }
}

impl MechanicalSystem for RollingDisk {
    fn dim(&self) -> usize {
        4
    }

    fn mass_matrix(&self, _q: &Vector) -> Matrix {
        RollingDisk::mass_matrix(self)
    }

    fn potential(&self, _q: &Vector) -> f64 {
        0.0
    }

    fn potential_gradient(&self, _q: &Vector) -> Vector {
        Vector::zeros(4)
    }

    fn mass_matrix_rate(&self, _q: &Vector, _v: &Vector) -> Matrix {
        Matrix::zeros(4, 4)
    }

    fn kinetic_gradient(&self, _q: &Vector, _v: &Vector) -> Vector {
        Vector::zeros(4)
    }
}

impl ConstraintSet for RollingDisk {
    fn count(&self) -> usize {
        2
    }

    fn one_forms(&self, q: &Vector) -> Matrix {
        let (s, c) = q[3].sin_cos();
        let r = self.radius;
        Matrix::from_row_slice(2, 4, &[1.0, 0.0, -r * c, 0.0, 0.0, 1.0, -r * s, 0.0])
    }

    fn one_forms_rate(&self, q: &Vector, v: &Vector) -> Matrix {
        let (s, c) = q[3].sin_cos();
        let r = self.radius;
        let w = v[3];
        Matrix::from_row_slice(2, 4, &[0.0, 0.0, r * s * w, 0.0, 0.0, 0.0, -r * c * w, 0.0])
    }

    /// Midpoint-angle discretization of the rolling constraints.
    fn discrete(&self, q0: &Vector, q1: &Vector) -> Vector {
        let (s, c) = (0.5 * (q0[3] + q1[3])).sin_cos();
        let dtheta = q1[2] - q0[2];
        let r = self.radius;
        Vector::from_vec(vec![
            q1[0] - q0[0] - r * c * dtheta,
            q1[1] - q0[1] - r * s * dtheta,
        ])
    }

    fn discrete_jacobian_q0(&self, q0: &Vector, q1: &Vector) -> Matrix {
        let (s, c) = (0.5 * (q0[3] + q1[3])).sin_cos();
        let dtheta = q1[2] - q0[2];
        let r = self.radius;
        Matrix::from_row_slice(
            2,
            4,
            &[
                -1.0,
                0.0,
                r * c,
                0.5 * r * s * dtheta,
                0.0,
                -1.0,
                r * s,
                -0.5 * r * c * dtheta,
            ],
        )
    }

    fn discrete_jacobian_q1(&self, q0: &Vector, q1: &Vector) -> Matrix {
        let (s, c) = (0.5 * (q0[3] + q1[3])).sin_cos();
        let dtheta = q1[2] - q0[2];
        let r = self.radius;
        Matrix::from_row_slice(
            2,
            4,
            &[
                1.0,
                0.0,
                -r * c,
                0.5 * r * s * dtheta,
                0.0,
                1.0,
                -r * s,
                -0.5 * r * c * dtheta,
            ],
        )
    }
}

/// Edge of the disk staying on a circular table of radius `a`:
/// `g = (x + s R cos phi)^2 + (y + s R sin phi)^2 - a^2` with `s = +1` for
/// `C+` and `s = -1` for `C-`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEdge {
    pub sign: f64,
    pub radius: f64,
    pub table_radius: f64,
    label: String,
}

impl TableEdge {
    pub fn plus(radius: f64, table_radius: f64) -> Self {
        TableEdge {
            sign: 1.0,
            radius,
            table_radius,
            label: "C+".to_string(),
        }
    }

    pub fn minus(radius: f64, table_radius: f64) -> Self {
        TableEdge {
            sign: -1.0,
            radius,
            table_radius,
            label: "C-".to_string(),
        }
    }

    /// The table point checked by this constraint.
    pub fn contact_point(&self, q: &Vector) -> (f64, f64) {
        let (s, c) = q[3].sin_cos();
        (
            q[0] + self.sign * self.radius * c,
            q[1] + self.sign * self.radius * s,
        )
    }
}

impl InequalityConstraint for TableEdge {
    fn label(&self) -> &str {
        &self.label
    }

    fn gap(&self, q: &Vector) -> f64 {
        let (px, py) = self.contact_point(q);
        px * px + py * py - self.table_radius * self.table_radius
    }

    fn gap_gradient(&self, q: &Vector) -> Vector {
        let (px, py) = self.contact_point(q);
        let (s, c) = q[3].sin_cos();
        let sr = self.sign * self.radius;
        Vector::from_vec(vec![
            2.0 * px,
            2.0 * py,
            0.0,
            2.0 * px * (-sr * s) + 2.0 * py * (sr * c),
        ])
    }
}

/// Free point mass in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub mass: f64,
}

impl MechanicalSystem for PointMass {
    fn dim(&self) -> usize {
        2
    }

    fn mass_matrix(&self, _q: &Vector) -> Matrix {
        Matrix::identity(2, 2) * self.mass
    }

    fn potential(&self, _q: &Vector) -> f64 {
        0.0
    }

    fn potential_gradient(&self, _q: &Vector) -> Vector {
        Vector::zeros(2)
    }

    fn mass_matrix_rate(&self, _q: &Vector, _v: &Vector) -> Matrix {
        Matrix::zeros(2, 2)
    }

    fn kinetic_gradient(&self, _q: &Vector, _v: &Vector) -> Vector {
        Vector::zeros(2)
    }
}

/// `g = x^2 + y^2 - a^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularWall {
    pub radius: f64,
}

impl InequalityConstraint for CircularWall {
    fn label(&self) -> &str {
        "wall"
    }

    fn gap(&self, q: &Vector) -> f64 {
        q[0] * q[0] + q[1] * q[1] - self.radius * self.radius
    }

    fn gap_gradient(&self, q: &Vector) -> Vector {
        Vector::from_vec(vec![2.0 * q[0], 2.0 * q[1]])
    }
}

/// Rolling disk with mass `m`, inertias `i` (rolling) and `j` (turning) and
/// radius `r` on a table of radius `a`, with edge constraints `C+` and `C-`.
pub fn make_rolling_disk(m: f64, i: f64, j: f64, r: f64, a: f64) -> Result<Model> {
    for (name, value) in [("m", m), ("I", i), ("J", j), ("R", r), ("a", a)] {
        require_positive(name, value)?;
    }
    if !(r < a) {
        return Err(Error::InvalidParameter {
            name: "R".to_string(),
            reason: format!("disk radius {r} must be smaller than the table radius {a}"),
        });
    }
    let disk = Arc::new(RollingDisk {
        mass: m,
        roll_inertia: i,
        turn_inertia: j,
        radius: r,
    });
    Ok(Model {
        name: "rolling_disk".to_string(),
        parameters: [("m", m), ("I", i), ("J", j), ("R", r), ("a", a)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        lagrangian: Arc::new(QuadraticDiscreteLagrangian {
            mass: disk.mass_matrix(),
        }),
        system: disk.clone(),
        constraints: disk,
        boundaries: vec![
            Arc::new(TableEdge::plus(r, a)),
            Arc::new(TableEdge::minus(r, a)),
        ],
    })
}

/// Point mass `mass` inside a circle of radius `a`.
pub fn make_particle_in_disk(mass: f64, a: f64) -> Result<Model> {
    require_positive("mass", mass)?;
    require_positive("a", a)?;
    Ok(Model {
        name: "particle_in_disk".to_string(),
        parameters: BTreeMap::from([("mass".to_string(), mass), ("a".to_string(), a)]),
        system: Arc::new(PointMass { mass }),
        constraints: Arc::new(Unconstrained { dim: 2 }),
        boundaries: vec![Arc::new(CircularWall { radius: a })],
        lagrangian: Arc::new(QuadraticDiscreteLagrangian {
            mass: Matrix::identity(2, 2) * mass,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSpec {
    pub name: &'static str,
    pub default: f64,
    pub description: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub coordinates: &'static [&'static str],
    pub parameters: &'static [ParameterSpec],
}

const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "rolling_disk",
        description: "vertical disk rolling without slipping on a circular table (edges C+ and C-)",
        coordinates: &["x", "y", "theta", "phi"],
        parameters: &[
            ParameterSpec {
                name: "m",
                default: 1.0,
                description: "mass",
            },
            ParameterSpec {
                name: "I",
                default: 1.0,
                description: "moment of inertia about the rolling axis",
            },
            ParameterSpec {
                name: "J",
                default: 1.0,
                description: "moment of inertia about the vertical axis",
            },
            ParameterSpec {
                name: "R",
                default: 1.0,
                description: "disk radius",
            },
            ParameterSpec {
                name: "a",
                default: 3.0,
                description: "table radius",
            },
        ],
    },
    CatalogEntry {
        name: "particle_in_disk",
        description: "free point mass inside a circular wall (billiard)",
        coordinates: &["x", "y"],
        parameters: &[
            ParameterSpec {
                name: "mass",
                default: 1.0,
                description: "particle mass",
            },
            ParameterSpec {
                name: "a",
                default: 1.0,
                description: "wall radius",
            },
        ],
    },
];

pub fn entries() -> &'static [CatalogEntry] {
    ENTRIES
}

pub fn entry(name: &str) -> Option<&'static CatalogEntry> {
    ENTRIES.iter().find(|e| e.name == name)
}

/// Builds a catalog system by name. Missing parameters take their defaults;
/// unknown ones are rejected.
pub fn build(name: &str, params: &BTreeMap<String, f64>) -> Result<Model> {
    let entry = entry(name).ok_or_else(|| Error::InvalidParameter {
        name: "system".to_string(),
        reason: format!(
            "unknown system {name:?}; known: {}",
            ENTRIES
                .iter()
                .map(|e| e.name)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    })?;
    for key in params.keys() {
        if !entry.parameters.iter().any(|p| p.name == key) {
            return Err(Error::InvalidParameter {
                name: key.clone(),
                reason: format!("not a parameter of {name}"),
            });
        }
    }
    let get = |key: &str| {
        params.get(key).copied().unwrap_or_else(|| {
            entry
                .parameters
                .iter()
                .find(|p| p.name == key)
                .map(|p| p.default)
                .unwrap_or(f64::NAN)
        })
    };
    match name {
        "rolling_disk" => make_rolling_disk(get("m"), get("I"), get("J"), get("R"), get("a")),
        "particle_in_disk" => make_particle_in_disk(get("mass"), get("a")),
        _ => unreachable!("entry table and builder disagree"),
    }
}

/// A random boundary configuration of a catalog system together with an
/// incoming velocity in `D_q`, for the constraint with index `boundary`.
///
/// The normal velocity `dg . v` is kept above `1e-3 |dg| |v|` so the state
/// is clearly non-grazing.
pub fn sample_incoming_state<R: Rng + ?Sized>(
    model: &Model,
    boundary: usize,
    rng: &mut R,
) -> Result<(Vector, Vector)> {
    let get = |key: &str, default: f64| model.parameters.get(key).copied().unwrap_or(default);
    let ic = model
        .boundaries
        .get(boundary)
        .ok_or_else(|| Error::InvalidParameter {
            name: "boundary".to_string(),
            reason: format!("{} has no constraint {boundary}", model.name),
        })?
        .clone();
    for _ in 0..1000 {
        let (q, v) = match model.name.as_str() {
            "rolling_disk" => {
                let disk = RollingDisk {
                    mass: get("m", 1.0),
                    roll_inertia: get("I", 1.0),
                    turn_inertia: get("J", 1.0),
                    radius: get("R", 1.0),
                };
                let a = get("a", 3.0);
                let sign = if boundary == 0 { 1.0 } else { -1.0 };
                let phi = rng.random_range(-PI..PI);
                let psi = rng.random_range(-PI..PI);
                let theta = rng.random_range(-PI..PI);
                let q = Vector::from_vec(vec![
                    a * psi.cos() - sign * disk.radius * phi.cos(),
                    a * psi.sin() - sign * disk.radius * phi.sin(),
                    theta,
                    phi,
                ]);
                let v = disk.velocity(&q, rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                (q, v)
            }
            "particle_in_disk" => {
                let a = get("a", 1.0);
                let psi = rng.random_range(-PI..PI);
                let q = Vector::from_vec(vec![a * psi.cos(), a * psi.sin()]);
                let v = Vector::from_vec(vec![
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ]);
                (q, v)
            }
            other => {
                return Err(Error::InvalidParameter {
                    name: "system".to_string(),
                    reason: format!("no boundary sampler for {other}"),
                })
            }
        };
        let dg = ic.gap_gradient(&q);
        let normal = dg.dot(&v);
        if normal.abs() > 1e-3 * dg.norm() * v.norm() {
            return Ok((q, if normal > 0.0 { v } else { -v }));
        }
    }
    Err(Error::Precondition(
        "could not sample a non-grazing boundary state".to_string(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q4(x: f64, y: f64, theta: f64, phi: f64) -> Vector {
        Vector::from_vec(vec![x, y, theta, phi])
    }

    #[test]
    fn unit_disk_mass_matrix_is_identity() {
        let model = make_rolling_disk(1.0, 1.0, 1.0, 1.0, 3.0).unwrap();
        let m = model.system.mass_matrix(&q4(0.2, 0.1, 0.0, 1.0));
        assert_eq!(m, Matrix::identity(4, 4));
    }

    #[test]
    fn disk_one_forms_at_reference_angles() {
        let disk = RollingDisk {
            mass: 1.0,
            roll_inertia: 1.0,
            turn_inertia: 1.0,
            radius: 1.0,
        };
        let mu = ConstraintSet::one_forms(&disk, &q4(0.0, 0.0, 0.0, 0.0));
        assert_eq!(
            mu,
            Matrix::from_row_slice(2, 4, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
        let mu = ConstraintSet::one_forms(&disk, &q4(0.0, 0.0, 0.0, PI / 2.0));
        let expected = Matrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0]);
        assert!((mu - expected).amax() < 1e-15);
    }

    #[test]
    fn table_edge_values() {
        let plus = TableEdge::plus(1.0, 3.0);
        assert_eq!(plus.gap(&q4(0.0, 0.0, 0.0, 0.0)), -8.0);
        let q = q4(2.0, 0.0, 0.0, 0.0);
        assert_eq!(plus.gap(&q), 0.0);
        assert_eq!(
            plus.gap_gradient(&q),
            Vector::from_vec(vec![6.0, 0.0, 0.0, 0.0])
        );
        let minus = TableEdge::minus(1.0, 3.0);
        assert_eq!(minus.gap(&q4(-2.0, 0.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn build_by_name_with_defaults() {
        let model = build("rolling_disk", &BTreeMap::new()).unwrap();
        assert_eq!(model.dim(), 4);
        assert_eq!(model.gaps(&q4(0.0, 0.0, 0.0, 0.0)), vec![-8.0, -8.0]);
        let params = BTreeMap::from([("a".to_string(), 2.0)]);
        let model = build("particle_in_disk", &params).unwrap();
        assert_eq!(model.gaps(&Vector::from_vec(vec![2.0, 0.0])), vec![0.0]);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(build("sleigh", &BTreeMap::new()).is_err());
        let params = BTreeMap::from([("b".to_string(), 2.0)]);
        assert!(build("rolling_disk", &params).is_err());
        assert!(make_rolling_disk(1.0, 1.0, 1.0, 3.0, 3.0).is_err());
        assert!(make_rolling_disk(-1.0, 1.0, 1.0, 1.0, 3.0).is_err());
        assert!(make_particle_in_disk(1.0, 0.0).is_err());
    }

    #[test]
    fn arc_satisfies_rolling_constraints() {
        let disk = RollingDisk {
            mass: 1.0,
            roll_inertia: 1.0,
            turn_inertia: 1.0,
            radius: 0.7,
        };
        let q0 = q4(0.3, -0.2, 0.1, 0.4);
        let (omega, turn) = (1.3, -0.6);
        let t = 0.8;
        let dt = 1e-5;
        let qd =
            (disk.arc(&q0, omega, turn, t + dt) - disk.arc(&q0, omega, turn, t - dt)) / (2.0 * dt);
        let q = disk.arc(&q0, omega, turn, t);
        assert!((ConstraintSet::one_forms(&disk, &q) * qd).amax() < 1e-9);
    }
}
