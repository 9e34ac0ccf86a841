//! Optimal-step nonrigid registration.
//!
//! The energy over per-vertex affines X_i (stored 4×3, acting as Xᵗ·[p;1])
//!
//!   E(X) = α Σᵢ wᵢ‖Xᵢᵗ[Vᵢ;1] − cᵢ‖²           (distance)
//!        + β Σ_{(i,j)∈edges} ‖Xᵢ − Xⱼ‖²_F      (stiffness)
//!        + γ Σ_κ ‖X_κᵗ[V_κ;1] − LM_κ‖²         (landmarks)
//!        + η Σᵢ wᵢ‖Xᵢᵗ[Nᵢ;0] − nᵢ‖²            (normals)
//!
//! is quadratic once correspondences (cᵢ, nᵢ, wᵢ) are frozen, so each inner
//! iteration is one exact sparse solve. The three coordinate columns of the
//! stacked unknowns never couple — every row of every term reads a single
//! column of X — so instead of a 12n system we factor one 4n×4n SPD matrix
//! and back-substitute three right-hand sides. The outer loop lowers the
//! stiffness weight β over a fixed schedule, re-finding closest points
//! between solves.

use nalgebra::{DMatrix, Matrix4x3, Point3, Vector3, Vector4};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::Serialize;

use crate::config::RegistrationConfig;
use crate::error::{MorphError, Result};
use crate::landmarks::LandmarkSet;
use crate::mesh::{compute_vertex_normals, Mesh, TargetSurface};
use crate::spatial::{build_index, SpatialIndex};
use crate::transform::Affine4x3;

/// One affine per template vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexAffineStack {
    transforms: Vec<Affine4x3>,
}

impl VertexAffineStack {
    pub fn identity(n: usize) -> Self {
        VertexAffineStack {
            transforms: vec![Affine4x3::identity(); n],
        }
    }

    pub fn from_transforms(transforms: Vec<Affine4x3>) -> Self {
        VertexAffineStack { transforms }
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    pub fn transforms(&self) -> &[Affine4x3] {
        &self.transforms
    }

    pub fn get(&self, i: usize) -> &Affine4x3 {
        &self.transforms[i]
    }

    /// Map rest positions through the per-vertex transforms.
    pub fn apply(&self, positions: &[Point3<f64>]) -> Vec<Point3<f64>> {
        assert_eq!(positions.len(), self.transforms.len());
        self.transforms
            .iter()
            .zip(positions)
            .map(|(t, p)| t.apply_point(p))
            .collect()
    }

    /// Plain (unweighted) Frobenius norm of the stack difference,
    /// √(Σᵢ ‖Xᵢ − Yᵢ‖²_F).
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len());
        self.transforms
            .iter()
            .zip(&other.transforms)
            .map(|(a, b)| a.frobenius_distance_sq(b, 1.0))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.transforms.iter().all(Affine4x3::is_finite)
    }
}

/// Scalar weights of the four energy terms for one stiffness stage, plus
/// the translation-row weight inside the stiffness Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub translation_weight: f64,
}

impl EnergyWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64, eta: f64) -> Self {
        EnergyWeights {
            alpha,
            beta,
            gamma,
            eta,
            translation_weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(MorphError::Invalid(format!(
                    "energy weight {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.alpha == 0.0 && self.gamma == 0.0 {
            return Err(MorphError::Invalid(
                "at least one of alpha and gamma must be positive".into(),
            ));
        }
        if !(self.translation_weight > 0.0) {
            return Err(MorphError::Invalid(format!(
                "translation_weight must be positive, got {}",
                self.translation_weight
            )));
        }
        Ok(())
    }
}

/// Closest-point match for one template vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub position: Point3<f64>,
    /// Target normal at the closest point; `None` when the target carries
    /// no normals or the hit primitive is degenerate.
    pub normal: Option<Vector3<f64>>,
    /// Reliability weight: 1 kept, 0 pruned.
    pub weight: f64,
    /// Index of the target primitive that produced the hit.
    pub primitive: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    entries: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(entries: Vec<Correspondence>) -> Self {
        CorrespondenceSet { entries }
    }

    pub fn entries(&self) -> &[Correspondence] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Correspondence rejection thresholds. Everything off by default: the
/// plain formulas use every vertex.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PruningConfig {
    pub max_distance: Option<f64>,
    /// Maximum angle (radians) between the deformed template normal and
    /// the target normal.
    pub max_normal_angle: Option<f64>,
    /// Reject hits on open boundary edges of the target.
    pub drop_target_boundary: bool,
}

/// Closest target point per deformed vertex, with pruning applied as
/// zeroed weights (the entry itself is kept for inspection).
///
/// `normals` are the deformed template normals used by the angle rule;
/// vertices with a zero normal skip that rule rather than being dropped.
pub fn find_correspondences(
    positions: &[Point3<f64>],
    normals: &[Vector3<f64>],
    index: &SpatialIndex,
    pruning: &PruningConfig,
) -> CorrespondenceSet {
    assert_eq!(positions.len(), normals.len());
    let entries = positions
        .iter()
        .zip(normals)
        .map(|(p, nrm)| {
            let hit = index.closest_point(p);
            let mut weight = 1.0;
            if let Some(max_d) = pruning.max_distance {
                if hit.distance > max_d {
                    weight = 0.0;
                }
            }
            if let Some(max_angle) = pruning.max_normal_angle {
                if let Some(tn) = hit.normal {
                    let len = nrm.norm();
                    if len > 0.0 {
                        let cos = (nrm.dot(&tn) / len).clamp(-1.0, 1.0);
                        if cos.acos() > max_angle {
                            weight = 0.0;
                        }
                    }
                }
            }
            if pruning.drop_target_boundary && hit.on_boundary {
                weight = 0.0;
            }
            Correspondence {
                position: hit.position,
                normal: hit.normal,
                weight,
                primitive: hit.primitive,
                distance: hit.distance,
            }
        })
        .collect();
    CorrespondenceSet { entries }
}

/// The four raw (unweighted) sums and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub e_d: f64,
    pub e_s: f64,
    pub e_l: f64,
    pub e_n: f64,
    pub total: f64,
}

/// Exact evaluation of all four sums at `stack`. Pruned correspondences
/// (w = 0) contribute nothing to the distance and normal terms; matches
/// without a target normal contribute nothing to the normal term.
pub fn energy(
    stack: &VertexAffineStack,
    mesh: &Mesh,
    corr: &CorrespondenceSet,
    landmarks: &LandmarkSet,
    weights: &EnergyWeights,
) -> EnergyBreakdown {
    energy_with_normals(
        stack,
        mesh,
        mesh.vertex_normals(),
        corr,
        landmarks,
        weights,
        true,
    )
}

/// Energy with an explicit normal slice (register may recompute normals
/// from the deformed positions) and a switch that zeroes the normal sum
/// for builds that never assemble normal rows.
pub(crate) fn energy_with_normals(
    stack: &VertexAffineStack,
    mesh: &Mesh,
    normals: &[Vector3<f64>],
    corr: &CorrespondenceSet,
    landmarks: &LandmarkSet,
    weights: &EnergyWeights,
    include_normal_term: bool,
) -> EnergyBreakdown {
    let n = mesh.vertex_count();
    assert_eq!(stack.len(), n, "one transform per vertex");
    assert_eq!(corr.len(), n, "one correspondence per vertex");
    assert_eq!(normals.len(), n, "one normal per vertex");
    let verts = mesh.vertices();

    let mut e_d = 0.0;
    let mut e_n = 0.0;
    for (i, c) in corr.entries().iter().enumerate() {
        if c.weight == 0.0 {
            continue;
        }
        let mapped = stack.get(i).apply_point(&verts[i]);
        e_d += c.weight * (mapped - c.position).norm_squared();
        if include_normal_term {
            if let Some(tn) = c.normal {
                let moved = stack.get(i).apply_direction(&normals[i]);
                e_n += c.weight * (moved - tn).norm_squared();
            }
        }
    }

    let mut e_s = 0.0;
    for &(i, j) in mesh.edges() {
        e_s += stack
            .get(i)
            .frobenius_distance_sq(stack.get(j), weights.translation_weight);
    }

    let mut e_l = 0.0;
    for lm in landmarks.entries() {
        let mapped = stack.get(lm.vertex).apply_point(&verts[lm.vertex]);
        e_l += (mapped - lm.target).norm_squared();
    }

    let total =
        weights.alpha * e_d + weights.beta * e_s + weights.gamma * e_l + weights.eta * e_n;
    EnergyBreakdown {
        e_d,
        e_s,
        e_l,
        e_n,
        total,
    }
}

/// Push `scale·v vᵗ` onto the 4×4 diagonal block of vertex `i` and
/// `scale·v·targetᵗ` onto its right-hand-side rows. The shared shape of
/// the distance, landmark, and normal rows after squaring.
fn add_outer_block(
    coo: &mut CooMatrix<f64>,
    rhs: &mut DMatrix<f64>,
    i: usize,
    v: &Vector4<f64>,
    target: &Vector3<f64>,
    scale: f64,
) {
    let base = 4 * i;
    for r in 0..4 {
        for c in 0..4 {
            coo.push(base + r, base + c, scale * v[r] * v[c]);
        }
        for k in 0..3 {
            rhs[(base + r, k)] += scale * v[r] * target[k];
        }
    }
}

fn homogeneous(p: &Point3<f64>) -> Vector4<f64> {
    Vector4::new(p.x, p.y, p.z, 1.0)
}

/// Minimize the energy with correspondences frozen: assemble the sparse
/// normal equations over the stacked transforms and solve by sparse
/// Cholesky. Returns the unique global minimizer when the system is
/// positive definite.
pub fn solve_step(
    mesh: &Mesh,
    corr: &CorrespondenceSet,
    landmarks: &LandmarkSet,
    weights: &EnergyWeights,
) -> Result<VertexAffineStack> {
    solve_step_with_normals(mesh, mesh.vertex_normals(), corr, landmarks, weights, true)
}

pub(crate) fn solve_step_with_normals(
    mesh: &Mesh,
    normals: &[Vector3<f64>],
    corr: &CorrespondenceSet,
    landmarks: &LandmarkSet,
    weights: &EnergyWeights,
    assemble_normal_rows: bool,
) -> Result<VertexAffineStack> {
    weights.validate()?;
    let n = mesh.vertex_count();
    if corr.len() != n {
        return Err(MorphError::Invalid(format!(
            "expected {n} correspondences, found {}",
            corr.len()
        )));
    }
    landmarks.validate_for(mesh)?;
    assert_eq!(normals.len(), n, "one normal per vertex");

    let dim = 4 * n;
    let mut coo = CooMatrix::new(dim, dim);
    let mut rhs = DMatrix::<f64>::zeros(dim, 3);
    let verts = mesh.vertices();

    // Distance rows.
    for (i, c) in corr.entries().iter().enumerate() {
        let scale = weights.alpha * c.weight;
        if scale == 0.0 {
            continue;
        }
        add_outer_block(&mut coo, &mut rhs, i, &homogeneous(&verts[i]), &c.position.coords, scale);
    }

    // Landmark rows.
    if weights.gamma != 0.0 {
        for lm in landmarks.entries() {
            add_outer_block(
                &mut coo,
                &mut rhs,
                lm.vertex,
                &homogeneous(&verts[lm.vertex]),
                &lm.target.coords,
                weights.gamma,
            );
        }
    }

    // Stiffness: the Frobenius penalty over an edge decouples per transform
    // entry, so each of the four rows r contributes a 2×2 graph-Laplacian
    // stamp scaled by β (times the translation-row weight on r = 3).
    for &(i, j) in mesh.edges() {
        for r in 0..4 {
            let s = if r == 3 { weights.translation_weight } else { 1.0 };
            let scale = weights.beta * s;
            if scale == 0.0 {
                continue;
            }
            let (a, b) = (4 * i + r, 4 * j + r);
            coo.push(a, a, scale);
            coo.push(b, b, scale);
            coo.push(a, b, -scale);
            coo.push(b, a, -scale);
        }
    }

    // Normal rows, direction vectors instead of homogeneous points. These
    // are assembled whenever the build carries the normal term — even at
    // η = 0, where they contribute exact zeros — so that disabling the
    // term structurally is a genuinely different build.
    if assemble_normal_rows {
        for (i, c) in corr.entries().iter().enumerate() {
            let Some(tn) = c.normal else { continue };
            if c.weight == 0.0 || normals[i].norm_squared() == 0.0 {
                continue;
            }
            let g = Vector4::new(normals[i].x, normals[i].y, normals[i].z, 0.0);
            add_outer_block(&mut coo, &mut rhs, i, &g, &tn, weights.eta * c.weight);
        }
    }

    let matrix = CscMatrix::from(&coo);
    let factor = CscCholesky::factor(&matrix)
        .map_err(|_| MorphError::Solver("registration system singular".into()))?;
    let solution = factor.solve(&rhs);

    let transforms = (0..n)
        .map(|i| {
            let mut m = Matrix4x3::zeros();
            for r in 0..4 {
                for k in 0..3 {
                    m[(r, k)] = solution[(4 * i + r, k)];
                }
            }
            Affine4x3::from_matrix(m)
        })
        .collect();
    Ok(VertexAffineStack::from_transforms(transforms))
}

/// One line of the energy log: the breakdown after an inner solve,
/// evaluated with the correspondences that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub stage: usize,
    pub beta: f64,
    pub iteration: usize,
    pub e_d: f64,
    pub e_s: f64,
    pub e_l: f64,
    pub e_n: f64,
    pub total: f64,
    pub max_vertex_delta: f64,
}

#[derive(Debug, Clone)]
pub struct RegisterResult {
    pub stack: VertexAffineStack,
    /// Template connectivity, solved positions.
    pub warped: Mesh,
    pub log: Vec<EnergyRecord>,
    pub final_correspondences: CorrespondenceSet,
}

/// Full registration: for each stiffness stage, alternate closest-point
/// correspondence with exact solves until the stack stops moving
/// (‖X_new − X_old‖_F / √n < epsilon) or the inner cap is reached.
pub fn register(
    template: &Mesh,
    target: &TargetSurface,
    landmarks: &LandmarkSet,
    config: &RegistrationConfig,
) -> Result<RegisterResult> {
    config.validate()?;
    landmarks.validate_for(template)?;

    let index = build_index(target);
    let n = template.vertex_count();
    let rest = template.vertices();
    let rest_normals = template.vertex_normals();
    let pruning = PruningConfig {
        max_distance: config.prune_max_distance,
        max_normal_angle: config.prune_max_normal_angle_deg.map(f64::to_radians),
        drop_target_boundary: config.prune_target_boundary,
    };

    let mut stack = VertexAffineStack::identity(n);
    let mut positions = rest.to_vec();
    let mut log = Vec::new();
    let mut last_corr = None;

    for (stage, &beta) in config.beta_schedule.iter().enumerate() {
        let gamma = config
            .gamma_schedule
            .as_ref()
            .map_or(config.gamma, |g| g[stage]);
        let weights = EnergyWeights {
            alpha: config.alpha,
            beta,
            gamma,
            eta: config.eta,
            translation_weight: config.translation_weight,
        };
        for iteration in 0..config.max_inner {
            // N_i for the normal rows: rest normals by default (the energy
            // carries them through X_i itself), or recomputed from the
            // current deformed positions when configured. The angle-pruning
            // rule always sees a deformed normal.
            let recomputed = config
                .recompute_normals
                .then(|| compute_vertex_normals(&positions, template.faces()).normals);
            let term_normals: &[Vector3<f64>] = recomputed.as_deref().unwrap_or(rest_normals);
            let query_normals: Vec<Vector3<f64>> = match &recomputed {
                Some(v) => v.clone(),
                None => rest_normals
                    .iter()
                    .enumerate()
                    .map(|(i, nrm)| stack.get(i).apply_direction(nrm))
                    .collect(),
            };

            let corr = find_correspondences(&positions, &query_normals, &index, &pruning);
            let new_stack = solve_step_with_normals(
                template,
                term_normals,
                &corr,
                landmarks,
                &weights,
                config.normal_term,
            )?;
            let breakdown = energy_with_normals(
                &new_stack,
                template,
                term_normals,
                &corr,
                landmarks,
                &weights,
                config.normal_term && weights.eta > 0.0,
            );
            if !breakdown.total.is_finite() || !new_stack.is_finite() {
                return Err(MorphError::Solver(format!(
                    "energy diverged (NaN/inf) at stage {stage} iteration {iteration}"
                )));
            }

            let new_positions = new_stack.apply(rest);
            let max_vertex_delta = positions
                .iter()
                .zip(&new_positions)
                .map(|(a, b)| (b - a).norm())
                .fold(0.0, f64::max);
            log.push(EnergyRecord {
                stage,
                beta,
                iteration,
                e_d: breakdown.e_d,
                e_s: breakdown.e_s,
                e_l: breakdown.e_l,
                e_n: breakdown.e_n,
                total: breakdown.total,
                max_vertex_delta,
            });

            let step = new_stack.frobenius_distance(&stack) / (n as f64).sqrt();
            stack = new_stack;
            positions = new_positions;
            last_corr = Some(corr);
            if step < config.epsilon {
                break;
            }
        }
    }

    let warped = template.with_positions(positions)?;
    Ok(RegisterResult {
        stack,
        warped,
        log,
        final_correspondences: last_corr.expect("validated schedule is nonempty"),
    })
}
