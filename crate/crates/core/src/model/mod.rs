//! Crawler models: three masses in the plane or four in space, joined by
//! damped springs and resting on regularized ground.
//!
//! Coordinates are stored mass by mass, `(x₁, z₁, x₂, z₂, x₃, z₃)` in the
//! planar model and `(x₁, y₁, z₁, …, x₄, y₄, z₄)` in the spatial one. The
//! vertical axis is always the last axis of each mass. All masses are unit.
//!
//! Forces are assembled per mass in the standard basis. The viscous part
//! derives from a Rayleigh function `R(q, u) = ½ uᵀ ν(q) u` with
//! `F = −∂R/∂u`; [`Crawler::rayleigh_matrix`] returns `ν(q)`.

mod schedule;

pub use schedule::{RestLengthSchedule, ScheduleMode, SpringHarmonic};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CrawlError, Result};
use crate::smoothing::{chi, chi_prime, chi_second, SmoothingProfile};

/// Pairs closer than this are treated as coincident.
pub const MIN_DISTANCE: f64 = 1e-8;

const MAX_COORDS: usize = 12;
const MAX_SPRINGS: usize = 6;

// Spring k is opposite mass k.
const PLANAR_PAIRS: [(usize, usize); 3] = [(1, 2), (0, 2), (0, 1)];
const SPATIAL_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Three masses in the (x, z) plane, ℝ translation symmetry.
    Planar,
    /// Four masses in space, SE(2) symmetry of the ground plane.
    Spatial,
}

impl Layout {
    pub fn dim(self) -> usize {
        match self {
            Layout::Planar => 2,
            Layout::Spatial => 3,
        }
    }

    pub fn n_masses(self) -> usize {
        match self {
            Layout::Planar => 3,
            Layout::Spatial => 4,
        }
    }

    pub fn n_coords(self) -> usize {
        self.dim() * self.n_masses()
    }

    /// Mass pairs in spring order.
    pub fn pairs(self) -> &'static [(usize, usize)] {
        match self {
            Layout::Planar => &PLANAR_PAIRS,
            Layout::Spatial => &SPATIAL_PAIRS,
        }
    }

    pub fn n_springs(self) -> usize {
        self.pairs().len()
    }

    /// Index of the vertical coordinate of mass `i`.
    #[inline]
    pub fn vertical(self, i: usize) -> usize {
        i * self.dim() + self.dim() - 1
    }
}

/// Which depth function multiplies the de-bounce damping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DebounceLaw {
    /// `−ν_db χ(z) ż`, quadratic in the penetration depth.
    #[default]
    Chi,
    /// `−ν_db |χ′(z)| ż`, linear in the penetration depth.
    ChiPrime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlerParams {
    pub kappa_s: f64,
    pub nu_s: f64,
    pub kappa_np: f64,
    pub nu_ns: f64,
    pub nu_db: f64,
    pub rest_lengths: Vec<f64>,
    pub gravity: f64,
    pub profile: SmoothingProfile,
    pub debounce: DebounceLaw,
}

impl Default for CrawlerParams {
    fn default() -> Self {
        Self::standard()
    }
}

impl CrawlerParams {
    /// Planar parameter set used for the reference experiments.
    pub fn standard() -> Self {
        Self {
            kappa_s: 10.0,
            nu_s: 10.0,
            kappa_np: 10.0,
            nu_ns: 10.0,
            nu_db: 5.0,
            rest_lengths: vec![1.0, 1.0, 1.0],
            gravity: 1.0,
            profile: SmoothingProfile::RawC1,
            debounce: DebounceLaw::Chi,
        }
    }

    /// Same constants on a unit regular tetrad.
    pub fn spatial_default() -> Self {
        Self { rest_lengths: vec![1.0; 6], ..Self::standard() }
    }

    pub fn with_viscosity_scale(&self, c: f64) -> Self {
        Self { nu_s: self.nu_s * c, nu_ns: self.nu_ns * c, nu_db: self.nu_db * c, ..self.clone() }
    }

    pub fn validate(&self, layout: Layout) -> Result<()> {
        let finite_nonneg =
            [("nu_s", self.nu_s), ("nu_ns", self.nu_ns), ("nu_db", self.nu_db), ("gravity", self.gravity)];
        for (name, v) in finite_nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CrawlError::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [("kappa_s", self.kappa_s), ("kappa_np", self.kappa_np)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CrawlError::InvalidParameter(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if let SmoothingProfile::Mollified { width } = self.profile {
            if !(width > 0.0 && width.is_finite()) {
                return Err(CrawlError::InvalidParameter(format!("mollifier width must be > 0, got {width}")));
            }
        }
        if self.rest_lengths.len() != layout.n_springs() {
            return Err(CrawlError::InvalidParameter(format!(
                "{:?} crawler needs {} rest lengths, got {}",
                layout,
                layout.n_springs(),
                self.rest_lengths.len()
            )));
        }
        if self.rest_lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(CrawlError::AssumptionViolated("rest lengths must be positive and finite".into()));
        }
        match layout {
            Layout::Planar => {
                let l = &self.rest_lengths;
                for k in 0..3 {
                    if l[k] >= l[(k + 1) % 3] + l[(k + 2) % 3] {
                        return Err(CrawlError::AssumptionViolated(format!(
                            "rest lengths {:?} do not form a non-degenerate triangle",
                            l
                        )));
                    }
                }
            }
            Layout::Spatial => {
                let cm = cayley_menger_volume_sq(&self.rest_lengths);
                let scale = self.rest_lengths.iter().fold(0.0f64, |m, &l| m.max(l)).powi(6);
                if !(cm > 1e-12 * scale) {
                    return Err(CrawlError::AssumptionViolated(format!(
                        "rest lengths {:?} do not form a non-degenerate tetrad",
                        self.rest_lengths
                    )));
                }
            }
        }
        Ok(())
    }

    /// Relabels a planar crawler so that spring 3 is the longest at rest,
    /// keeping masses 1 and 2 on the ground. Returns the applied mass swap.
    pub fn canonical_planar_labels(&self) -> (Self, Option<(usize, usize)>) {
        let l = &self.rest_lengths;
        if l.len() != 3 || l[2] >= l[0].max(l[1]) {
            return (self.clone(), None);
        }
        let m = if l[0] >= l[1] { 0 } else { 1 };
        let mut out = self.clone();
        out.rest_lengths.swap(m, 2);
        log::warn!("relabeling masses {} and 3 so the longest rest length {:?} is opposite mass 3", m + 1, l);
        (out, Some((m, 2)))
    }
}

/// `288 V²` of a tetrad from its six edge lengths in lexicographic pair order.
pub fn cayley_menger_volume_sq(lengths: &[f64]) -> f64 {
    let d = |i: usize, j: usize| -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let k = SPATIAL_PAIRS.iter().position(|&p| p == (a, b)).unwrap();
        lengths[k] * lengths[k]
    };
    let mut m = DMatrix::<f64>::zeros(5, 5);
    for i in 0..5 {
        for j in 0..5 {
            m[(i, j)] = match (i, j) {
                (0, 0) => 0.0,
                (0, _) | (_, 0) => 1.0,
                _ => d(i - 1, j - 1),
            };
        }
    }
    m.determinant()
}

/// Full unreduced state at a time instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub t: f64,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
}

impl PhaseState {
    pub fn at_rest(t: f64, q: Vec<f64>) -> Self {
        let u = vec![0.0; q.len()];
        Self { t, q, u }
    }

    pub fn from_slice(t: f64, y: &[f64]) -> Self {
        let n = y.len() / 2;
        Self { t, q: y[..n].to_vec(), u: y[n..].to_vec() }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut y = self.q.clone();
        y.extend_from_slice(&self.u);
        y
    }
}

/// The three Rayleigh blocks whose sum is `ν(q)`.
#[derive(Debug, Clone)]
pub struct RayleighParts {
    pub shape: DMatrix<f64>,
    pub noslip: DMatrix<f64>,
    pub debounce: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crawler {
    layout: Layout,
    params: CrawlerParams,
}

impl Crawler {
    pub fn new(layout: Layout, params: CrawlerParams) -> Result<Self> {
        params.validate(layout)?;
        Ok(Self { layout, params })
    }

    pub fn planar(params: CrawlerParams) -> Result<Self> {
        Self::new(Layout::Planar, params)
    }

    pub fn spatial(params: CrawlerParams) -> Result<Self> {
        Self::new(Layout::Spatial, params)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn params(&self) -> &CrawlerParams {
        &self.params
    }

    pub fn n_coords(&self) -> usize {
        self.layout.n_coords()
    }

    /// Schedule that holds the parameter rest lengths.
    pub fn constant_schedule(&self) -> RestLengthSchedule {
        RestLengthSchedule::constant(&self.params.rest_lengths)
    }

    #[inline]
    fn pair_vector(&self, q: &[f64], i: usize, j: usize) -> ([f64; 3], f64) {
        let d = self.layout.dim();
        let mut v = [0.0; 3];
        let mut s = 0.0;
        for a in 0..d {
            v[a] = q[i * d + a] - q[j * d + a];
            s += v[a] * v[a];
        }
        (v, s.sqrt())
    }

    #[inline]
    fn lengths_into(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        for (k, &(i, j)) in self.layout.pairs().iter().enumerate() {
            let (_, l) = self.pair_vector(q, i, j);
            if !(l >= MIN_DISTANCE) {
                return Err(CrawlError::DegenerateConfiguration { i: i + 1, j: j + 1, distance: l });
            }
            out[k] = l;
        }
        Ok(())
    }

    /// Spring lengths `ℓ_k` in spring order.
    pub fn spring_lengths(&self, q: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.layout.n_springs()];
        self.lengths_into(q, &mut out)?;
        Ok(out)
    }

    /// Covectors `dℓ_k` in the standard basis, one per spring.
    pub fn spring_length_gradients(&self, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        let d = self.layout.dim();
        let mut out = Vec::with_capacity(self.layout.n_springs());
        for &(i, j) in self.layout.pairs() {
            let (v, l) = self.pair_vector(q, i, j);
            if !(l >= MIN_DISTANCE) {
                return Err(CrawlError::DegenerateConfiguration { i: i + 1, j: j + 1, distance: l });
            }
            let mut g = vec![0.0; self.n_coords()];
            for a in 0..d {
                g[i * d + a] = v[a] / l;
                g[j * d + a] = -v[a] / l;
            }
            out.push(g);
        }
        Ok(out)
    }

    pub fn shape_potential(&self, q: &[f64], rest: &[f64]) -> Result<f64> {
        let l = self.spring_lengths(q)?;
        Ok(0.5 * self.params.kappa_s * l.iter().zip(rest).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
    }

    pub fn ground_potential(&self, q: &[f64]) -> f64 {
        let p = self.params.profile;
        self.params.kappa_np * (0..self.layout.n_masses()).map(|i| chi(q[self.layout.vertical(i)], p)).sum::<f64>()
    }

    pub fn gravity_potential(&self, q: &[f64]) -> f64 {
        self.params.gravity * (0..self.layout.n_masses()).map(|i| q[self.layout.vertical(i)]).sum::<f64>()
    }

    pub fn total_potential(&self, q: &[f64], rest: &[f64]) -> Result<f64> {
        Ok(self.shape_potential(q, rest)? + self.ground_potential(q) + self.gravity_potential(q))
    }

    pub fn kinetic_energy(&self, u: &[f64]) -> f64 {
        0.5 * u.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn total_energy(&self, q: &[f64], u: &[f64], rest: &[f64]) -> Result<f64> {
        Ok(self.kinetic_energy(u) + self.total_potential(q, rest)?)
    }

    /// Horizontal ground-friction coefficient `ν_ns |χ′(z)|`.
    #[inline]
    pub fn noslip_coefficient(&self, z: f64) -> f64 {
        self.params.nu_ns * chi_prime(z, self.params.profile).abs()
    }

    /// Vertical de-bounce coefficient.
    #[inline]
    pub fn debounce_coefficient(&self, z: f64) -> f64 {
        let p = self.params.profile;
        match self.params.debounce {
            DebounceLaw::Chi => self.params.nu_db * chi(z, p),
            DebounceLaw::ChiPrime => self.params.nu_db * chi_prime(z, p).abs(),
        }
    }

    fn add_shape_damping(&self, q: &[f64], u: &[f64], f: &mut [f64]) -> Result<()> {
        let d = self.layout.dim();
        for &(i, j) in self.layout.pairs() {
            let (v, l) = self.pair_vector(q, i, j);
            if !(l >= MIN_DISTANCE) {
                return Err(CrawlError::DegenerateConfiguration { i: i + 1, j: j + 1, distance: l });
            }
            let mut rate = 0.0;
            for a in 0..d {
                rate += (u[i * d + a] - u[j * d + a]) * v[a];
            }
            rate /= l;
            let c = -self.params.nu_s * rate / l;
            for a in 0..d {
                f[i * d + a] += c * v[a];
                f[j * d + a] -= c * v[a];
            }
        }
        Ok(())
    }

    fn add_noslip(&self, q: &[f64], u: &[f64], f: &mut [f64]) {
        let d = self.layout.dim();
        for i in 0..self.layout.n_masses() {
            let c = self.noslip_coefficient(q[self.layout.vertical(i)]);
            if c != 0.0 {
                for a in 0..d - 1 {
                    f[i * d + a] -= c * u[i * d + a];
                }
            }
        }
    }

    fn add_debounce(&self, q: &[f64], u: &[f64], f: &mut [f64]) {
        for i in 0..self.layout.n_masses() {
            let k = self.layout.vertical(i);
            f[k] -= self.debounce_coefficient(q[k]) * u[k];
        }
    }

    /// Viscous spring force `Σ_k −ν_s ℓ̇_k dℓ_k`.
    pub fn shape_damping_force(&self, q: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.n_coords()];
        self.add_shape_damping(q, u, &mut f)?;
        Ok(f)
    }

    /// Horizontal ground friction, damping every planar velocity component.
    pub fn noslip_force(&self, q: &[f64], u: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.n_coords()];
        self.add_noslip(q, u, &mut f);
        f
    }

    pub fn debounce_force(&self, q: &[f64], u: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.n_coords()];
        self.add_debounce(q, u, &mut f);
        f
    }

    pub fn viscous_force(&self, q: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.n_coords()];
        self.add_shape_damping(q, u, &mut f)?;
        self.add_noslip(q, u, &mut f);
        self.add_debounce(q, u, &mut f);
        Ok(f)
    }

    fn add_potential_gradient(&self, q: &[f64], rest: &[f64], g: &mut [f64]) -> Result<()> {
        let d = self.layout.dim();
        let p = self.params.profile;
        for (k, &(i, j)) in self.layout.pairs().iter().enumerate() {
            let (v, l) = self.pair_vector(q, i, j);
            if !(l >= MIN_DISTANCE) {
                return Err(CrawlError::DegenerateConfiguration { i: i + 1, j: j + 1, distance: l });
            }
            let c = self.params.kappa_s * (l - rest[k]) / l;
            for a in 0..d {
                g[i * d + a] += c * v[a];
                g[j * d + a] -= c * v[a];
            }
        }
        for i in 0..self.layout.n_masses() {
            let k = self.layout.vertical(i);
            g[k] += self.params.kappa_np * chi_prime(q[k], p) + self.params.gravity;
        }
        Ok(())
    }

    /// `dU` for the given rest lengths.
    pub fn potential_gradient(&self, q: &[f64], rest: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.n_coords()];
        self.add_potential_gradient(q, rest, &mut g)?;
        Ok(g)
    }

    /// Hessian of the total potential in the standard basis.
    pub fn potential_hessian(&self, q: &[f64], rest: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.layout.dim();
        let n = self.n_coords();
        let mut h = DMatrix::zeros(n, n);
        for (k, &(i, j)) in self.layout.pairs().iter().enumerate() {
            let (v, l) = self.pair_vector(q, i, j);
            if !(l >= MIN_DISTANCE) {
                return Err(CrawlError::DegenerateConfiguration { i: i + 1, j: j + 1, distance: l });
            }
            let stretch = (l - rest[k]) / l;
            for a in 0..d {
                for b in 0..d {
                    let nn = v[a] * v[b] / (l * l);
                    let eye = if a == b { 1.0 } else { 0.0 };
                    let block = self.params.kappa_s * (nn + stretch * (eye - nn));
                    h[(i * d + a, i * d + b)] += block;
                    h[(j * d + a, j * d + b)] += block;
                    h[(i * d + a, j * d + b)] -= block;
                    h[(j * d + a, i * d + b)] -= block;
                }
            }
        }
        for i in 0..self.layout.n_masses() {
            let k = self.layout.vertical(i);
            h[(k, k)] += self.params.kappa_np * chi_second(q[k], self.params.profile);
        }
        Ok(h)
    }

    pub fn rayleigh_parts(&self, q: &[f64]) -> Result<RayleighParts> {
        let d = self.layout.dim();
        let n = self.n_coords();
        let mut shape = DMatrix::zeros(n, n);
        for &(i, j) in self.layout.pairs() {
            let (v, l) = self.pair_vector(q, i, j);
            if !(l >= MIN_DISTANCE) {
                return Err(CrawlError::DegenerateConfiguration { i: i + 1, j: j + 1, distance: l });
            }
            for a in 0..d {
                for b in 0..d {
                    let c = self.params.nu_s * v[a] * v[b] / (l * l);
                    shape[(i * d + a, i * d + b)] += c;
                    shape[(j * d + a, j * d + b)] += c;
                    shape[(i * d + a, j * d + b)] -= c;
                    shape[(j * d + a, i * d + b)] -= c;
                }
            }
        }
        let mut noslip = DMatrix::zeros(n, n);
        let mut debounce = DMatrix::zeros(n, n);
        for i in 0..self.layout.n_masses() {
            let k = self.layout.vertical(i);
            let c = self.noslip_coefficient(q[k]);
            for a in 0..d - 1 {
                noslip[(i * d + a, i * d + a)] = c;
            }
            debounce[(k, k)] = self.debounce_coefficient(q[k]);
        }
        Ok(RayleighParts { shape, noslip, debounce })
    }

    /// Damping matrix `ν(q)`, symmetric positive semi-definite.
    pub fn rayleigh_matrix(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let p = self.rayleigh_parts(q)?;
        Ok(p.shape + p.noslip + p.debounce)
    }

    /// `R(q, u) = ½ uᵀ ν(q) u`, evaluated without forming `ν`.
    pub fn rayleigh_value(&self, q: &[f64], u: &[f64]) -> Result<f64> {
        let f = self.viscous_force(q, u)?;
        Ok(-0.5 * f.iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Accelerations `q̈ = F(q, u) − dU(q)` for fixed rest lengths.
    pub fn acceleration(&self, q: &[f64], u: &[f64], rest: &[f64]) -> Result<Vec<f64>> {
        let mut a = vec![0.0; self.n_coords()];
        self.acceleration_into(q, u, rest, &mut a)?;
        Ok(a)
    }

    fn acceleration_into(&self, q: &[f64], u: &[f64], rest: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.add_potential_gradient(q, rest, out)?;
        out.iter_mut().for_each(|v| *v = -*v);
        self.add_shape_damping(q, u, out)?;
        self.add_noslip(q, u, out);
        self.add_debounce(q, u, out);
        Ok(())
    }

    /// Lagrange–d'Alembert vector field on `y = (q, u)` with rest lengths
    /// taken from `schedule` at time `t`. Writes `(u, q̈)` into `dy`.
    pub fn eom_rhs(&self, t: f64, y: &[f64], schedule: &RestLengthSchedule, dy: &mut [f64]) -> Result<()> {
        let n = self.n_coords();
        let mut rest = [0.0; MAX_SPRINGS];
        let rest = &mut rest[..self.layout.n_springs()];
        schedule.eval_into(t, rest);
        let (q, u) = y.split_at(n);
        dy[..n].copy_from_slice(u);
        self.acceleration_into(q, u, rest, &mut dy[n..])
    }

    /// Convenience wrapper returning a fresh vector.
    pub fn eom(&self, t: f64, y: &[f64], schedule: &RestLengthSchedule) -> Result<Vec<f64>> {
        debug_assert!(self.n_coords() <= MAX_COORDS);
        let mut dy = vec![0.0; y.len()];
        self.eom_rhs(t, y, schedule, &mut dy)?;
        Ok(dy)
    }
}
