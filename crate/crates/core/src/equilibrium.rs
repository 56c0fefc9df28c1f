//! Standing equilibrium of the reduced system and its stability certificate.
//!
//! The equilibrium is found by continuation from the infinitely stiff
//! limit: first every spring at its rest length with only the ground heights
//! free, then the spring compliance `ε = 1/κ_s` is switched on gradually.
//! Derivatives of the reduced potential are exact (hyper-dual arithmetic).

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dual::{self, HyperDual, Scalar};
use crate::error::{CrawlError, Result};
use crate::model::Crawler;
use crate::reduction::SymmetryReduction;
use crate::smoothing::chi_generic;

pub const TOL_GRAD: f64 = 1e-10;
pub const TOL_EIG: f64 = 1e-10;

const CONTINUATION_STEPS: i32 = 8;
const MAX_HALVINGS: usize = 20;

/// Gravity and ground terms of the reduced potential.
fn support_energy<R: SymmetryReduction, S: Scalar>(red: &R, shape: &[S]) -> Result<S> {
    let p = red.crawler().params();
    let top = red.apex_height(shape)?;
    let mut heights = S::from_f64(0.0);
    let mut ground = chi_generic(top, p.profile);
    for &z in &shape[..red.n_ground()] {
        heights = heights + z;
        ground = ground + chi_generic(z, p.profile);
    }
    Ok((heights + top).scale(p.gravity) + ground.scale(p.kappa_np))
}

fn reduced_potential_generic<R: SymmetryReduction, S: Scalar>(red: &R, shape: &[S]) -> Result<S> {
    let p = red.crawler().params();
    let ng = red.n_ground();
    let mut springs = S::from_f64(0.0);
    for (l, &rest) in shape[ng..].iter().zip(&p.rest_lengths) {
        let d = *l - S::from_f64(rest);
        springs = springs + d * d;
    }
    Ok(springs.scale(0.5 * p.kappa_s) + support_energy(red, shape)?)
}

/// `Û(shape)`: springs, gravity and ground penalty with the top mass placed by the shape.
pub fn reduced_potential<R: SymmetryReduction>(red: &R, shape: &[f64]) -> Result<f64> {
    reduced_potential_generic(red, shape)
}

pub fn reduced_gradient<R: SymmetryReduction>(red: &R, shape: &[f64]) -> Result<Vec<f64>> {
    Ok(dual::gradient(|s: &[HyperDual]| reduced_potential_generic(red, s), shape)?.1)
}

pub fn reduced_hessian<R: SymmetryReduction>(red: &R, shape: &[f64]) -> Result<DMatrix<f64>> {
    let (_, _, h) = dual::hessian(|s: &[HyperDual]| reduced_potential_generic(red, s), shape)?;
    Ok(to_matrix(&h))
}

fn to_matrix(h: &[Vec<f64>]) -> DMatrix<f64> {
    let n = h.len();
    DMatrix::from_fn(n, n, |i, j| h[i][j])
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Result of the continuation solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub shape: Vec<f64>,
    pub gradient_norm: f64,
    /// Ground heights found with all springs rigid.
    pub rigid_heights: Vec<f64>,
    pub continuation_steps: usize,
}

// ∂G/∂z_i with all other coordinates fixed.
fn support_partial<R: SymmetryReduction>(red: &R, shape: &[f64], i: usize) -> Result<f64> {
    let mut s: Vec<HyperDual> = shape.iter().map(|&v| HyperDual::constant(v)).collect();
    s[i].e1 = 1.0;
    Ok(support_energy(red, &s)?.e1)
}

// Root of a function that is negative far below and positive at `hi`,
// by bracketing downward and then Illinois false position.
fn root_below<F: FnMut(f64) -> Result<f64>>(mut f: F, hi: f64) -> Result<f64> {
    let mut b = hi;
    let mut fb = f(b)?;
    if !(fb > 0.0) {
        return Err(CrawlError::AssumptionViolated(format!(
            "ground balance has no sign change: residual {fb:e} at z = {hi}"
        )));
    }
    let mut step = 0.01;
    let mut a = b - step;
    let mut fa = f(a)?;
    while fa > 0.0 {
        b = a;
        fb = fa;
        step *= 2.0;
        a = b - step;
        if step > 1e6 {
            return Err(CrawlError::AssumptionViolated("ground penalty cannot support the weight".into()));
        }
        fa = f(a)?;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc == 0.0 || (b - a).abs() <= 4.0 * f64::EPSILON * c.abs().max(1e-300) {
            return Ok(c);
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

// Continuation residual F(ŷ, ε) and its Jacobian.
fn continuation_system<R: SymmetryReduction>(red: &R, y: &[f64], eps: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let ng = red.n_ground();
    let n = y.len();
    let rest = &red.crawler().params().rest_lengths;
    let (_, g, h) = dual::hessian(|s: &[HyperDual]| support_energy(red, s), y)?;
    let mut f = vec![0.0; n];
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        if i < ng {
            f[i] = g[i];
            for j in 0..n {
                jac[(i, j)] = h[i][j];
            }
        } else {
            f[i] = y[i] - rest[i - ng] + eps * g[i];
            for j in 0..n {
                jac[(i, j)] = eps * h[i][j] + if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    Ok((f, jac))
}

fn newton<F>(mut system: F, y0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<(Vec<f64>, DMatrix<f64>)>,
{
    let mut y = y0.to_vec();
    let (mut f, mut jac) = system(&y)?;
    let mut r = norm(&f);
    for _ in 0..max_iter {
        if r <= tol {
            return Ok(y);
        }
        let step = jac
            .clone()
            .lu()
            .solve(&-DVector::from_vec(f.clone()))
            .ok_or_else(|| CrawlError::NoConvergence("singular Newton matrix".into()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
            if let Ok((ft, jt)) = system(&trial) {
                let rt = norm(&ft);
                if rt < r || rt <= tol {
                    y = trial;
                    f = ft;
                    jac = jt;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if r <= tol {
        Ok(y)
    } else {
        Err(CrawlError::NoConvergence(format!("Newton stalled at residual {r:e}")))
    }
}

/// Finds the reduced equilibrium by rigid-spring ground balance followed by
/// continuation in the spring compliance.
pub fn homotopy_equilibrium<R: SymmetryReduction>(red: &R) -> Result<Equilibrium> {
    let p = red.crawler().params();
    let ng = red.n_ground();
    let rest = p.rest_lengths.clone();
    let mut y: Vec<f64> = vec![0.0; ng];
    y.extend_from_slice(&rest);

    // Stage 1: rigid springs, ground heights by Gauss–Seidel sweeps of 1D roots.
    for _sweep in 0..200 {
        let mut change: f64 = 0.0;
        for i in 0..ng {
            let mut trial = y.clone();
            let z = root_below(
                |z| {
                    trial[i] = z;
                    support_partial(red, &trial, i)
                },
                0.0,
            )?;
            change = change.max((z - y[i]).abs());
            y[i] = z;
        }
        if change <= 1e-14 {
            break;
        }
    }
    let z_only = |z: &[f64]| -> Result<(Vec<f64>, DMatrix<f64>)> {
        let mut full = z.to_vec();
        full.extend_from_slice(&rest);
        let (f, jac) = continuation_system(red, &full, 0.0)?;
        Ok((f[..ng].to_vec(), jac.view((0, 0), (ng, ng)).into_owned()))
    };
    let z = newton(z_only, &y[..ng], 1e-13, 50)
        .map_err(|e| CrawlError::ContinuationFailed(format!("rigid-spring ground balance: {e}")))?;
    y[..ng].copy_from_slice(&z);
    let rigid_heights = z;

    // Stage 2: continuation in ε up to 1/κ_s.
    let eps_end = 1.0 / p.kappa_s;
    let targets: Vec<f64> = (1..=CONTINUATION_STEPS).map(|j| eps_end * 2f64.powi(j - CONTINUATION_STEPS)).collect();
    let mut eps = 0.0;
    let mut steps = 0usize;
    for &target in &targets {
        let mut halvings = 0;
        while eps < target {
            let next = if halvings == 0 { target } else { eps + (target - eps) / 2f64.powi(halvings as i32) };
            match newton(|v| continuation_system(red, v, next), &y, 1e-12, 40) {
                Ok(v) => {
                    y = v;
                    eps = next;
                    steps += 1;
                    halvings = 0;
                }
                Err(_) if halvings < MAX_HALVINGS => halvings += 1,
                Err(e) => {
                    return Err(CrawlError::ContinuationFailed(format!(
                        "stalled at ε = {eps:e} on the way to {target:e}: {e}"
                    )))
                }
            }
        }
    }

    // Polish on the reduced potential itself.
    let grad_system = |v: &[f64]| -> Result<(Vec<f64>, DMatrix<f64>)> {
        let (_, g, h) = dual::hessian(|s: &[HyperDual]| reduced_potential_generic(red, s), v)?;
        Ok((g, to_matrix(&h)))
    };
    let shape = match newton(grad_system, &y, 0.1 * TOL_GRAD, 30) {
        Ok(v) => v,
        // rounding can keep the last digit from settling; keep the best point
        Err(_) => y,
    };
    let gradient_norm = norm(&reduced_gradient(red, &shape)?);
    Ok(Equilibrium { shape, gradient_norm, rigid_heights, continuation_steps: steps })
}

/// Symmetric eigenvalues in ascending order.
pub fn sorted_symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Orthonormal basis of the numerical null space, one column per vector.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    // pad to at least square so the SVD returns a full right basis
    let mut a = DMatrix::zeros(m.nrows().max(n), n);
    a.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = rel_tol * smax.max(1.0);
    let cols: Vec<DVector<f64>> =
        (0..n).filter(|&i| svd.singular_values[i] <= cut).map(|i| v_t.row(i).transpose()).collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Null spaces of the three damping blocks and of their intersections.
#[derive(Debug, Clone)]
pub struct RayleighKernels {
    pub debounce: DMatrix<f64>,
    pub noslip: DMatrix<f64>,
    pub shape: DMatrix<f64>,
    pub debounce_noslip: DMatrix<f64>,
    pub all: DMatrix<f64>,
}

pub fn rayleigh_kernels(crawler: &Crawler, q: &[f64]) -> Result<RayleighKernels> {
    let parts = crawler.rayleigh_parts(q)?;
    let tol = 1e-9;
    let stack = |ms: &[&DMatrix<f64>]| {
        let n = ms[0].ncols();
        let mut out = DMatrix::zeros(n * ms.len(), n);
        for (k, m) in ms.iter().enumerate() {
            out.view_mut((k * n, 0), (n, n)).copy_from(*m);
        }
        out
    };
    Ok(RayleighKernels {
        debounce: null_space(&parts.debounce, tol),
        noslip: null_space(&parts.noslip, tol),
        shape: null_space(&parts.shape, tol),
        debounce_noslip: null_space(&stack(&[&parts.debounce, &parts.noslip]), tol),
        all: null_space(&stack(&[&parts.debounce, &parts.noslip, &parts.shape]), tol),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighCertificate {
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
}

/// Definiteness of the damping matrix on all velocities at `q`.
pub fn certify_rayleigh(crawler: &Crawler, q: &[f64]) -> Result<RayleighCertificate> {
    let eigenvalues = sorted_symmetric_eigenvalues(&crawler.rayleigh_matrix(q)?);
    let min_eigenvalue = eigenvalues[0];
    Ok(RayleighCertificate { eigenvalues, min_eigenvalue, positive_definite: min_eigenvalue > TOL_EIG })
}

/// Choice of right inverse of the shape Jacobian in the linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightInverse {
    /// Shape directions with the group coordinate held fixed.
    FiberAdapted,
    /// Minimum-norm right inverse `Pᵀ(PPᵀ)⁻¹`.
    MinimumNorm,
}

/// Linearized reduced dynamics in `(δshape, u)` coordinates.
#[derive(Debug, Clone)]
pub struct Linearization {
    /// `[[0, P], [−K R, −ν]]`.
    pub a: DMatrix<f64>,
    pub shape_jacobian: DMatrix<f64>,
    pub right_inverse: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub reduced_hessian: DMatrix<f64>,
}

impl Linearization {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn shape_dim(&self) -> usize {
        self.shape_jacobian.nrows()
    }

    /// Quadratic form of the linear energy `½|u|² + ½ δsᵀ K̂ δs` (the `½` excluded).
    pub fn energy_form(&self) -> DMatrix<f64> {
        let m = self.shape_dim();
        let n = self.dim() - m;
        let mut w = DMatrix::zeros(m + n, m + n);
        w.view_mut((0, 0), (m, m)).copy_from(&self.reduced_hessian);
        w.view_mut((m, m), (n, n)).fill_with_identity();
        w
    }

    pub fn spectrum(&self) -> Vec<Complex<f64>> {
        let mut v: Vec<Complex<f64>> = self.a.complex_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
        v
    }
}

pub fn reduced_linearization<R: SymmetryReduction>(
    red: &R,
    shape: &[f64],
    choice: RightInverse,
) -> Result<Linearization> {
    let c = red.crawler();
    let q = red.lift_configuration(shape, &red.identity())?;
    let k = c.potential_hessian(&q, &c.params().rest_lengths)?;
    let nu = c.rayleigh_matrix(&q)?;
    let p = red.shape_jacobian(&q)?;
    let r = match choice {
        RightInverse::FiberAdapted => red.fiber_adapted_right_inverse(&q)?,
        RightInverse::MinimumNorm => {
            let ppt = &p * p.transpose();
            let inv =
                ppt.try_inverse().ok_or_else(|| CrawlError::ChartDomain("shape jacobian is rank deficient".into()))?;
            p.transpose() * inv
        }
    };
    let kernel = null_space(&k, 1e-9);
    let group_dim = red.n_coords() - red.shape_dim();
    if kernel.ncols() != group_dim {
        return Err(CrawlError::AssumptionViolated(format!(
            "potential hessian has a {}-dimensional kernel, expected {} (the symmetry directions)",
            kernel.ncols(),
            group_dim
        )));
    }
    let m = p.nrows();
    let n = p.ncols();
    let mut a = DMatrix::zeros(m + n, m + n);
    a.view_mut((0, m), (m, n)).copy_from(&p);
    a.view_mut((m, 0), (n, m)).copy_from(&(-(&k * &r)));
    a.view_mut((m, m), (n, n)).copy_from(&(-&nu));
    Ok(Linearization {
        a,
        shape_jacobian: p,
        right_inverse: r,
        stiffness: k,
        damping: nu,
        reduced_hessian: reduced_hessian(red, shape)?,
    })
}

/// `[[0, I], [−K, −ν]]` on the full phase space at `q`.
pub fn unreduced_linearization(crawler: &Crawler, q: &[f64]) -> Result<DMatrix<f64>> {
    let n = crawler.n_coords();
    let k = crawler.potential_hessian(q, &crawler.params().rest_lengths)?;
    let nu = crawler.rayleigh_matrix(q)?;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-k));
    a.view_mut((n, n), (n, n)).copy_from(&(-nu));
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RobustlyStable,
    Marginal,
    Unstable,
    IndefiniteInputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// Inputs outside the model's assumptions.
    Assumption,
    /// A solver did not converge.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub reduced_equilibrium: Vec<f64>,
    /// NaN (`null` in JSON) when the equilibrium was not found.
    #[serde(with = "nan_as_null")]
    pub gradient_norm: f64,
    pub hessian_eigenvalues: Vec<f64>,
    pub rayleigh_eigenvalues: Vec<f64>,
    /// Eigenvalues as `[re, im]`.
    pub linearization_spectrum: Vec<[f64; 2]>,
    #[serde(with = "nan_as_null")]
    pub spectral_abscissa: f64,
    pub verdict: Verdict,
    pub failure: Option<String>,
    pub failure_kind: Option<FailureKind>,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl StabilityReport {
    fn failed(e: CrawlError) -> Self {
        let kind = if e.is_domain_error() || matches!(e, CrawlError::ContinuationFailed(_)) {
            FailureKind::Assumption
        } else {
            FailureKind::Numerical
        };
        Self {
            reduced_equilibrium: Vec::new(),
            gradient_norm: f64::NAN,
            hessian_eigenvalues: Vec::new(),
            rayleigh_eigenvalues: Vec::new(),
            linearization_spectrum: Vec::new(),
            spectral_abscissa: f64::NAN,
            verdict: Verdict::IndefiniteInputs,
            failure: Some(e.to_string()),
            failure_kind: Some(kind),
        }
    }
}

/// Equilibrium, definiteness checks and spectral verdict in one report.
/// Failures are recorded in the report instead of returned.
pub fn certify_stability<R: SymmetryReduction>(red: &R) -> StabilityReport {
    match certify_inner(red) {
        Ok(r) => r,
        Err(e) => StabilityReport::failed(e),
    }
}

fn certify_inner<R: SymmetryReduction>(red: &R) -> Result<StabilityReport> {
    let eq = homotopy_equilibrium(red)?;
    let hess = sorted_symmetric_eigenvalues(&reduced_hessian(red, &eq.shape)?);
    let q = red.lift_configuration(&eq.shape, &red.identity())?;
    let ray = certify_rayleigh(red.crawler(), &q)?;
    let mut report = StabilityReport {
        reduced_equilibrium: eq.shape.clone(),
        gradient_norm: eq.gradient_norm,
        hessian_eigenvalues: hess.clone(),
        rayleigh_eigenvalues: ray.eigenvalues.clone(),
        linearization_spectrum: Vec::new(),
        spectral_abscissa: f64::NAN,
        verdict: Verdict::IndefiniteInputs,
        failure: None,
        failure_kind: None,
    };
    if !(eq.gradient_norm <= TOL_GRAD) {
        report.failure = Some(format!("equilibrium gradient {:e} above tolerance", eq.gradient_norm));
        report.failure_kind = Some(FailureKind::Numerical);
        return Ok(report);
    }
    if !(hess[0] > TOL_EIG) {
        report.failure = Some(format!("reduced hessian is not positive definite (min eigenvalue {:e})", hess[0]));
        report.failure_kind = Some(FailureKind::Assumption);
        return Ok(report);
    }
    let lin = reduced_linearization(red, &eq.shape, RightInverse::FiberAdapted)?;
    let spec = lin.spectrum();
    let abscissa = spec.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re));
    let radius = spec.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    report.linearization_spectrum = spec.iter().map(|z| [z.re, z.im]).collect();
    report.spectral_abscissa = abscissa;
    let tol = 1e-9 * radius.max(1.0);
    report.verdict = if abscissa > tol {
        Verdict::Unstable
    } else if abscissa >= -tol {
        Verdict::Marginal
    } else if ray.positive_definite {
        Verdict::RobustlyStable
    } else {
        report.failure = Some(format!("damping is not positive definite (min eigenvalue {:e})", ray.min_eigenvalue));
        Verdict::IndefiniteInputs
    };
    Ok(report)
}
