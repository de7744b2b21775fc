//! Bilinear saddle problems: min_x max_y f(x) + <Kx, y> - g(y).
//!
//! Each benchmark problem lives behind the [`SaddleProblem`] trait and is
//! registered by name in [`builtin`], so scenario files and the CLI select
//! problems at runtime. The smoothed-L1 regression instance is generated
//! from a seeded config and can be dumped/reloaded field-for-field.

use crate::linalg::{qr_orthonormal, LinalgError, Matrix, Vector};
use crate::rng::SeededRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid problem config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("instance parse error: {0}")]
    Parse(String),
}

/// A saddle point (x*, y*) of the Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    pub x: Vector,
    pub y: Vector,
}

impl SaddlePoint {
    pub fn origin(n: usize, m: usize) -> Self {
        SaddlePoint {
            x: Vector::zeros(n),
            y: Vector::zeros(m),
        }
    }

    /// Concatenated (x*, y*) on the product space.
    pub fn stacked(&self) -> Vector {
        self.x.concat(&self.y)
    }
}

/// A smooth convex-concave bilinear saddle problem.
///
/// `f` and `g` are continuously differentiable convex; the coupling is the
/// linear operator `K` (its adjoint is the transpose).
pub trait SaddleProblem: Send + Sync {
    fn name(&self) -> &str;
    fn primal_dim(&self) -> usize;
    fn dual_dim(&self) -> usize;
    fn f(&self, x: &Vector) -> f64;
    fn grad_f(&self, x: &Vector) -> Vector;
    fn g(&self, y: &Vector) -> f64;
    fn grad_g(&self, y: &Vector) -> Vector;
    fn coupling(&self) -> &Matrix;

    /// Primal objective when the saddle form came from a primal problem
    /// (regression: 0.5*||Kx - b||^2 + lambda*R^a(x)).
    fn primal_objective(&self, _x: &Vector) -> Option<f64> {
        None
    }

    /// Minimal-norm saddle point when it is known in closed form.
    fn known_min_norm_saddle(&self) -> Option<SaddlePoint> {
        None
    }
}

// ---------------------------------------------------------------------------
// Builtin registry
// ---------------------------------------------------------------------------

type ProblemCtor = fn() -> Box<dyn SaddleProblem>;

fn make_exp_bilinear() -> Box<dyn SaddleProblem> {
    Box::new(ExpBilinear::new())
}

fn make_shifted_quadratic() -> Box<dyn SaddleProblem> {
    Box::new(ShiftedQuadratic::default_probe())
}

static BUILTINS: &[(&str, ProblemCtor)] = &[
    ("example1", make_exp_bilinear),
    ("shifted-quadratic", make_shifted_quadratic),
];

/// Looks up a builtin problem by registry name.
pub fn builtin(name: &str) -> Option<Box<dyn SaddleProblem>> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor())
}

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

// ---------------------------------------------------------------------------
// example1: exponential-bilinear-quadratic saddle on R^2 x R^2
// ---------------------------------------------------------------------------

/// f(x) = exp((x1+x2)^2), g(y) = (y1+y2)^2, K = [[2,2],[2,2]].
///
/// The saddle set is {x1+x2 = 0, y1+y2 = 0}; the minimal-norm solution is the
/// origin.
pub struct ExpBilinear {
    k: Matrix,
}

impl ExpBilinear {
    pub fn new() -> Self {
        ExpBilinear {
            k: Matrix::from_rows(2, 2, vec![2.0, 2.0, 2.0, 2.0]).expect("2x2"),
        }
    }
}

impl Default for ExpBilinear {
    fn default() -> Self {
        Self::new()
    }
}

impl SaddleProblem for ExpBilinear {
    fn name(&self) -> &str {
        "example1"
    }

    fn primal_dim(&self) -> usize {
        2
    }

    fn dual_dim(&self) -> usize {
        2
    }

    fn f(&self, x: &Vector) -> f64 {
        let s = x[0] + x[1];
        (s * s).exp()
    }

    fn grad_f(&self, x: &Vector) -> Vector {
        let s = x[0] + x[1];
        let d = 2.0 * s * (s * s).exp();
        Vector::from_vec(vec![d, d])
    }

    fn g(&self, y: &Vector) -> f64 {
        let s = y[0] + y[1];
        s * s
    }

    fn grad_g(&self, y: &Vector) -> Vector {
        let s = y[0] + y[1];
        Vector::from_vec(vec![2.0 * s, 2.0 * s])
    }

    fn coupling(&self) -> &Matrix {
        &self.k
    }

    fn known_min_norm_saddle(&self) -> Option<SaddlePoint> {
        Some(SaddlePoint::origin(2, 2))
    }
}

// ---------------------------------------------------------------------------
// Shifted quadratic probe: unique saddle at (u, 0), zero coupling
// ---------------------------------------------------------------------------

/// f(x) = 0.5*||x - u||^2, g(y) = 0.5*||y||^2, K = 0.
pub struct ShiftedQuadratic {
    shift: Vector,
    dual_dim: usize,
    k: Matrix,
}

impl ShiftedQuadratic {
    pub fn new(shift: Vector, dual_dim: usize) -> Self {
        let k = Matrix::zeros(dual_dim, shift.dim());
        ShiftedQuadratic { shift, dual_dim, k }
    }

    /// The fixed probe used by the CLI registry: u = (0.3, -0.4).
    pub fn default_probe() -> Self {
        ShiftedQuadratic::new(Vector::from_vec(vec![0.3, -0.4]), 2)
    }

    pub fn shift(&self) -> &Vector {
        &self.shift
    }
}

impl SaddleProblem for ShiftedQuadratic {
    fn name(&self) -> &str {
        "shifted-quadratic"
    }

    fn primal_dim(&self) -> usize {
        self.shift.dim()
    }

    fn dual_dim(&self) -> usize {
        self.dual_dim
    }

    fn f(&self, x: &Vector) -> f64 {
        0.5 * (x - &self.shift).norm_sq()
    }

    fn grad_f(&self, x: &Vector) -> Vector {
        x - &self.shift
    }

    fn g(&self, y: &Vector) -> f64 {
        0.5 * y.norm_sq()
    }

    fn grad_g(&self, y: &Vector) -> Vector {
        y.clone()
    }

    fn coupling(&self) -> &Matrix {
        &self.k
    }

    fn known_min_norm_saddle(&self) -> Option<SaddlePoint> {
        Some(SaddlePoint {
            x: self.shift.clone(),
            y: Vector::zeros(self.dual_dim),
        })
    }
}

// ---------------------------------------------------------------------------
// Smoothed-L1 regression saddle
// ---------------------------------------------------------------------------

/// Configuration for the regression instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
    /// Smoothing sharpness of the L1 surrogate.
    pub a: f64,
    /// Target condition number of the coupling matrix (pinned exactly).
    pub kappa: f64,
    pub sigma_max: f64,
    pub seed: u64,
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.m < 2 || self.n < 2 {
            return Err(ProblemError::InvalidConfig(format!(
                "need m, n >= 2, got {}x{}",
                self.m, self.n
            )));
        }
        if !(self.kappa >= 1.0) {
            return Err(ProblemError::InvalidConfig(format!(
                "kappa must be >= 1, got {}",
                self.kappa
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(ProblemError::InvalidConfig(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.a > 0.0) {
            return Err(ProblemError::InvalidConfig(format!(
                "a must be > 0, got {}",
                self.a
            )));
        }
        if !(self.sigma_max > 0.0) {
            return Err(ProblemError::InvalidConfig(format!(
                "sigma_max must be > 0, got {}",
                self.sigma_max
            )));
        }
        Ok(())
    }
}

/// Saddle form of 0.5*||Kx - b||^2 + lambda*R^a(x):
/// f(x) = lambda*R^a(x), g(y) = 0.5*||y||^2 + <b, y>,
/// with R^a the coordinate-wise smoothed absolute value.
pub struct SmoothedL1Regression {
    config: RegressionConfig,
    k: Matrix,
    b: Vector,
}

/// log(1 + exp(z)) without overflow for large |z|.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl SmoothedL1Regression {
    /// Generates the instance deterministically from `config.seed`.
    ///
    /// Draw order is fixed: coupling matrix first (U, V, interior singular
    /// values), then the offset b.
    pub fn generate(config: &RegressionConfig) -> Result<Self, ProblemError> {
        config.validate()?;
        let mut rng = SeededRng::new(config.seed);
        let k = generate_conditioned_matrix(
            config.m,
            config.n,
            config.kappa,
            config.sigma_max,
            &mut rng,
        )?;
        let b = Vector::from_vec((0..config.m).map(|_| rng.normal()).collect());
        Ok(SmoothedL1Regression {
            config: config.clone(),
            k,
            b,
        })
    }

    pub fn config(&self) -> &RegressionConfig {
        &self.config
    }

    /// The offset vector b of the data-fit term.
    pub fn offset(&self) -> &Vector {
        &self.b
    }

    /// Smoothed-L1 value R^a(x).
    pub fn smoothed_l1(&self, x: &Vector) -> f64 {
        let a = self.config.a;
        x.as_slice()
            .iter()
            .map(|&xi| (softplus(a * xi) + softplus(-a * xi)) / a)
            .sum()
    }

    /// Field-for-field dump (dimensions, K entries, b, lambda, a, seed).
    pub fn to_instance_toml(&self) -> String {
        let file = InstanceFile {
            kind: "smoothed-l1-regression".to_string(),
            m: self.config.m,
            n: self.config.n,
            lambda: self.config.lambda,
            a: self.config.a,
            kappa: self.config.kappa,
            sigma_max: self.config.sigma_max,
            seed: self.config.seed,
            k_entries: self.k.entries().to_vec(),
            b: self.b.as_slice().to_vec(),
        };
        toml::to_string(&file).expect("instance serialization")
    }

    pub fn from_instance_toml(text: &str) -> Result<Self, ProblemError> {
        let file: InstanceFile =
            toml::from_str(text).map_err(|e| ProblemError::Parse(e.to_string()))?;
        if file.kind != "smoothed-l1-regression" {
            return Err(ProblemError::Parse(format!(
                "unknown instance kind {:?}",
                file.kind
            )));
        }
        let config = RegressionConfig {
            m: file.m,
            n: file.n,
            lambda: file.lambda,
            a: file.a,
            kappa: file.kappa,
            sigma_max: file.sigma_max,
            seed: file.seed,
        };
        config.validate()?;
        let k = Matrix::from_rows(file.m, file.n, file.k_entries)?;
        if file.b.len() != file.m {
            return Err(ProblemError::Parse(format!(
                "offset has {} entries, expected {}",
                file.b.len(),
                file.m
            )));
        }
        Ok(SmoothedL1Regression {
            config,
            k,
            b: Vector::from_vec(file.b),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    kind: String,
    m: usize,
    n: usize,
    lambda: f64,
    a: f64,
    kappa: f64,
    sigma_max: f64,
    seed: u64,
    k_entries: Vec<f64>,
    b: Vec<f64>,
}

impl SaddleProblem for SmoothedL1Regression {
    fn name(&self) -> &str {
        "smoothed-l1-regression"
    }

    fn primal_dim(&self) -> usize {
        self.config.n
    }

    fn dual_dim(&self) -> usize {
        self.config.m
    }

    fn f(&self, x: &Vector) -> f64 {
        self.config.lambda * self.smoothed_l1(x)
    }

    fn grad_f(&self, x: &Vector) -> Vector {
        let a = self.config.a;
        let lambda = self.config.lambda;
        Vector::from_vec(
            x.as_slice()
                .iter()
                .map(|&xi| lambda * (a * xi / 2.0).tanh())
                .collect(),
        )
    }

    fn g(&self, y: &Vector) -> f64 {
        0.5 * y.norm_sq() + self.b.dot(y)
    }

    fn grad_g(&self, y: &Vector) -> Vector {
        y + &self.b
    }

    fn coupling(&self) -> &Matrix {
        &self.k
    }

    fn primal_objective(&self, x: &Vector) -> Option<f64> {
        let residual = &self.k.apply(x).expect("dimensions checked at build") - &self.b;
        Some(0.5 * residual.norm_sq() + self.config.lambda * self.smoothed_l1(x))
    }
}

// ---------------------------------------------------------------------------
// Condition-number-controlled coupling matrices
// ---------------------------------------------------------------------------

/// K = U diag(sigma) V^T with orthonormal U (m x k), V (n x k), k = min(m,n).
///
/// The extreme singular values are pinned to sigma_max and sigma_max/kappa so
/// the condition number over the retained spectrum equals kappa exactly; the
/// interior values are log-uniform in between.
pub fn generate_conditioned_matrix(
    m: usize,
    n: usize,
    kappa: f64,
    sigma_max: f64,
    rng: &mut SeededRng,
) -> Result<Matrix, ProblemError> {
    if m < 2 || n < 2 {
        return Err(ProblemError::InvalidConfig(format!(
            "need m, n >= 2, got {}x{}",
            m, n
        )));
    }
    if !(kappa >= 1.0) || !(sigma_max > 0.0) {
        return Err(ProblemError::InvalidConfig(format!(
            "need kappa >= 1 and sigma_max > 0, got kappa={}, sigma_max={}",
            kappa, sigma_max
        )));
    }
    let k = m.min(n);
    let u = qr_orthonormal(rng, m, k)?;
    let v = qr_orthonormal(rng, n, k)?;

    let sigma_min = sigma_max / kappa;
    let mut sigma = vec![0.0; k];
    sigma[0] = sigma_max;
    sigma[k - 1] = sigma_min;
    let (lo, hi) = (sigma_min.ln(), sigma_max.ln());
    for s in sigma.iter_mut().take(k - 1).skip(1) {
        *s = (lo + rng.uniform() * (hi - lo)).exp();
    }

    let mut out = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for (l, &s) in sigma.iter().enumerate() {
                acc += u.get(i, l) * s * v.get(j, l);
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}
