//! Lorentz-Finsler metric constructions and their pointwise checks.
//!
//! A [`LorentzFinslerSpec`] is a 2-homogeneous Lagrangian `L` on a cone
//! domain of `R^d`, positive on the cone interior and zero on the cone.
//! Closed-form fundamental tensors are provided per variant; a numeric
//! Hessian oracle on `L` is the independent cross-check. The module also
//! hosts the Lorentzian signature checks, the anisotropic factor, the rough
//! Hilbert form, indicatrix smoothing, and the Kostelecky-family
//! classifier.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::cones::{decompose, ConeError, ConeTriple};
use crate::fields::{
    numeric_gradient, CovectorField, DiffConfig, FieldError, FieldExpr, MatrixField, VectorField,
};
use crate::norms::{angular_metric, fundamental_tensor, BilinearForm, FinslerSpec, NormError};

#[derive(Debug, Clone, Error)]
pub enum SpacetimeError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("tensor not extendable at the cone: {0}")]
    NonExtendableAtCone(String),
    #[error("tensor undefined: {0}")]
    TensorUndefined(String),
    #[error("empty cone: {0}")]
    EmptyCone(String),
    #[error("operation needs variant {0}")]
    VariantMismatch(String),
    #[error("vector not timelike: {0}")]
    NotTimelike(String),
    #[error("not strongly convex: {0}")]
    NotConvex(String),
    #[error("no probe direction with g_v(v,w) away from zero")]
    NoProbeDirection,
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

/// Angle tolerance when matching the radical eigenvector against `v`;
/// eigenvalue crossings make exact matching brittle.
pub const RADICAL_ANGLE_TOL: f64 = 1e-4;

/// A Lorentz-Finsler metric family on a chart `R^d`.
///
/// The first coordinate of base points and vectors is the time coordinate
/// when the spec lives on `R x R^n`; coefficient fields are expressions
/// over `(t, x1..x_(d-1))`.
#[derive(Debug, Clone)]
pub enum LorentzFinslerSpec {
    /// `L(v) = v' G(t,x) v` with `G` of signature `(+,-,..,-)`.
    QuadLorentz { g: MatrixField },
    /// `L = omega(v)^2 - Fhat(v)^2`. `Fhat` may be ambient (arity `d`) or
    /// spatial (arity `d-1`, applied to the components `v[1..]`).
    OmegaMinusF {
        omega: CovectorField,
        fhat: FinslerSpec,
    },
    /// `L = gR(v,v) - Fhat(v)^2` with `gR` Riemannian and ambient `Fhat`.
    RiemannMinusF { gr: MatrixField, fhat: FinslerSpec },
    /// `L = (sqrt(L_1) + .. + sqrt(L_k))^2` over a common cone domain.
    SumOfRoots { terms: Vec<LorentzFinslerSpec> },
    /// `L = sqrt(L_1 L_2)`.
    ProductRoot {
        l1: Box<LorentzFinslerSpec>,
        l2: Box<LorentzFinslerSpec>,
    },
    /// Bogoslovsky family `L = L0^(1+b) / beta^(2b)`, `-1 < b <= 0`.
    Bogoslovsky {
        l0: Box<LorentzFinslerSpec>,
        beta: CovectorField,
        b: f64,
    },
    /// Cone-triple metric `G(v) = Omega(v)^2 - F(pi(v))^2`; smooth away
    /// from `span(T)` unless the fiber is Riemannian.
    TripleG { triple: ConeTriple },
    /// Anisotropic scaling `L = mu(v) L_base` with `mu` positive and
    /// 0-homogeneous; `mu` is an expression in the direction variables
    /// `x1..xd` (the base time is available as `t`).
    Scaled {
        mu: FieldExpr,
        base: Box<LorentzFinslerSpec>,
    },
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LorentzFinslerSpec {
    /// Minkowski metric `dt^2 - |dx|^2` on `R^d`.
    pub fn minkowski(d: usize) -> LorentzFinslerSpec {
        let mut diag = vec![0.0; d * d];
        diag[0] = 1.0;
        for i in 1..d {
            diag[i * d + i] = -1.0;
        }
        LorentzFinslerSpec::QuadLorentz {
            g: MatrixField::constant(d, &diag, d - 1),
        }
    }

    /// Total dimension of tangent vectors.
    pub fn dim(&self) -> usize {
        match self {
            LorentzFinslerSpec::QuadLorentz { g } => g.n,
            LorentzFinslerSpec::OmegaMinusF { omega, .. } => omega.dim(),
            LorentzFinslerSpec::RiemannMinusF { gr, .. } => gr.n,
            LorentzFinslerSpec::SumOfRoots { terms } => terms[0].dim(),
            LorentzFinslerSpec::ProductRoot { l1, .. } => l1.dim(),
            LorentzFinslerSpec::Bogoslovsky { l0, .. } => l0.dim(),
            LorentzFinslerSpec::TripleG { triple } => triple.dim(),
            LorentzFinslerSpec::Scaled { base, .. } => base.dim(),
        }
    }

    pub fn validate_shape(&self) -> Result<(), SpacetimeError> {
        let d = self.dim();
        match self {
            LorentzFinslerSpec::QuadLorentz { .. } => {}
            LorentzFinslerSpec::OmegaMinusF { fhat, .. } => {
                fhat.validate_shape()?;
                let fa = fhat.arity();
                if fa != d && fa != d - 1 {
                    return Err(SpacetimeError::InvalidSpec(format!(
                        "Fhat arity {fa} incompatible with dimension {d}"
                    )));
                }
            }
            LorentzFinslerSpec::RiemannMinusF { fhat, .. } => {
                fhat.validate_shape()?;
                if fhat.arity() != d {
                    return Err(SpacetimeError::InvalidSpec(
                        "RiemannMinusF needs an ambient Fhat".into(),
                    ));
                }
            }
            LorentzFinslerSpec::SumOfRoots { terms } => {
                if terms.is_empty() {
                    return Err(SpacetimeError::InvalidSpec("empty sum".into()));
                }
                for term in terms {
                    term.validate_shape()?;
                    if term.dim() != d {
                        return Err(SpacetimeError::InvalidSpec("mixed dimensions".into()));
                    }
                }
            }
            LorentzFinslerSpec::ProductRoot { l1, l2 } => {
                l1.validate_shape()?;
                l2.validate_shape()?;
                if l2.dim() != d {
                    return Err(SpacetimeError::InvalidSpec("mixed dimensions".into()));
                }
            }
            LorentzFinslerSpec::Bogoslovsky { l0, beta, b } => {
                l0.validate_shape()?;
                if beta.dim() != d {
                    return Err(SpacetimeError::InvalidSpec("beta dimension".into()));
                }
                if !(*b > -1.0 && *b <= 0.0) {
                    return Err(SpacetimeError::InvalidSpec(format!(
                        "Bogoslovsky exponent b = {b} outside (-1, 0]"
                    )));
                }
            }
            LorentzFinslerSpec::TripleG { triple } => {
                triple.fiber.validate_shape()?;
                if triple.omega.dim() != d || triple.t_field.dim() != d {
                    return Err(SpacetimeError::InvalidSpec("triple dimensions".into()));
                }
            }
            LorentzFinslerSpec::Scaled { base, .. } => base.validate_shape()?,
        }
        Ok(())
    }

    /// Sampled check that `mu` is positively 0-homogeneous for `Scaled`.
    pub fn validate_scaled_homogeneity(
        &self,
        t: f64,
        samples: &[Vec<f64>],
    ) -> Result<(), SpacetimeError> {
        if let LorentzFinslerSpec::Scaled { mu, .. } = self {
            for v in samples {
                let a = mu.eval(t, v)?;
                let doubled: Vec<f64> = v.iter().map(|c| 2.0 * c).collect();
                let b = mu.eval(t, &doubled)?;
                if (a - b).abs() > 1e-8 * a.abs().max(1.0) {
                    return Err(SpacetimeError::InvalidSpec(format!(
                        "mu not 0-homogeneous: mu(v) = {a}, mu(2v) = {b}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn fhat_value(
    fhat: &FinslerSpec,
    d: usize,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<f64, SpacetimeError> {
    if fhat.arity() == d {
        Ok(fhat.eval(t, x, v)?)
    } else {
        let spatial = &v[1..];
        if euclid(spatial) == 0.0 {
            return Ok(0.0);
        }
        Ok(fhat.eval(t, x, spatial)?)
    }
}

/// Evaluates `L(v)`. For quadratic and difference-form variants the value
/// extends to all of `R^d \ {0}` (negative outside the cone); conic
/// variants report domain errors there.
pub fn lorentz_eval(
    spec: &LorentzFinslerSpec,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<f64, SpacetimeError> {
    let d = spec.dim();
    if v.len() != d {
        return Err(SpacetimeError::Field(FieldError::Dimension {
            expected: d,
            got: v.len(),
        }));
    }
    if euclid(v) == 0.0 {
        return Err(SpacetimeError::Domain("L at the zero vector".into()));
    }
    match spec {
        LorentzFinslerSpec::QuadLorentz { g } => {
            let m = g.eval(t, x)?;
            Ok(quad(&m, v))
        }
        LorentzFinslerSpec::OmegaMinusF { omega, fhat } => {
            let ov = omega.apply(t, x, v)?;
            let f = fhat_value(fhat, d, t, x, v)?;
            Ok(ov * ov - f * f)
        }
        LorentzFinslerSpec::RiemannMinusF { gr, fhat } => {
            let m = gr.eval(t, x)?;
            let f = fhat.eval(t, x, v)?;
            Ok(quad(&m, v) - f * f)
        }
        LorentzFinslerSpec::SumOfRoots { terms } => {
            let mut acc = 0.0;
            for term in terms {
                let l = lorentz_eval(term, t, x, v)?;
                if l < 0.0 {
                    return Err(SpacetimeError::Domain(format!(
                        "summand negative ({l}) outside the common cone domain"
                    )));
                }
                acc += l.sqrt();
            }
            Ok(acc * acc)
        }
        LorentzFinslerSpec::ProductRoot { l1, l2 } => {
            let a = lorentz_eval(l1, t, x, v)?;
            let b = lorentz_eval(l2, t, x, v)?;
            if a < 0.0 || b < 0.0 {
                return Err(SpacetimeError::Domain(format!(
                    "factor negative outside the common domain: L1 = {a}, L2 = {b}"
                )));
            }
            Ok((a * b).sqrt())
        }
        LorentzFinslerSpec::Bogoslovsky { l0, beta, b } => {
            let bv = beta.apply(t, x, v)?;
            if bv <= 0.0 {
                return Err(SpacetimeError::Domain(format!("beta(v) = {bv} <= 0")));
            }
            let l = lorentz_eval(l0, t, x, v)?;
            if l < 0.0 {
                return Err(SpacetimeError::Domain(format!("L0(v) = {l} < 0")));
            }
            Ok(l.powf(1.0 + b) / bv.powf(2.0 * b))
        }
        LorentzFinslerSpec::TripleG { triple } => {
            let (tau, w) = decompose(triple, t, x, v)?;
            let f = triple.fiber_norm(t, x, &w)?;
            Ok(tau * tau - f * f)
        }
        LorentzFinslerSpec::Scaled { mu, base } => {
            let m = mu.eval(t, v)?;
            if m <= 0.0 {
                return Err(SpacetimeError::Domain(format!("mu(v) = {m} <= 0")));
            }
            Ok(m * lorentz_eval(base, t, x, v)?)
        }
    }
}

fn quad(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += v[i] * m[(i, j)] * v[j];
        }
    }
    acc
}

/// Interior margin below which `L_k` counts as "on the cone" for the
/// composite closed forms.
fn cone_margin(v: &[f64]) -> f64 {
    let s = euclid(v);
    1e-10 * s * s
}

fn fhat_tensor(
    fhat: &FinslerSpec,
    d: usize,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<DMatrix<f64>, SpacetimeError> {
    if fhat.arity() == d {
        Ok(fundamental_tensor(fhat, t, x, v)?.matrix)
    } else {
        // Spatial fiber: pad with a zero time row/column.
        let spatial = &v[1..];
        let g_sp = if euclid(spatial) <= 1e-12 * euclid(v) {
            match fhat {
                FinslerSpec::RiemannQuad { g } => g.eval(t, x)?,
                _ => {
                    return Err(SpacetimeError::TensorUndefined(
                        "spatial fiber tensor at a vector in span(T)".into(),
                    ))
                }
            }
        } else {
            fundamental_tensor(fhat, t, x, spatial)?.matrix
        };
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d - 1 {
            for j in 0..d - 1 {
                m[(i + 1, j + 1)] = g_sp[(i, j)];
            }
        }
        Ok(m)
    }
}

/// Fundamental tensor `g_v` of the spec, closed form per variant.
///
/// Quadratic and difference forms extend to the cone; `SumOfRoots` uses an
/// inward Richardson extrapolation there; `Bogoslovsky` and `ProductRoot`
/// error at the cone, where the Lagrangian is not smooth.
pub fn lf_fundamental_tensor(
    spec: &LorentzFinslerSpec,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<BilinearForm, SpacetimeError> {
    if euclid(v) == 0.0 {
        return Err(SpacetimeError::Domain("tensor at the zero vector".into()));
    }
    let matrix = lf_tensor_matrix(spec, t, x, v)?;
    Ok(BilinearForm::new(matrix, t, x, v))
}

fn lf_tensor_matrix(
    spec: &LorentzFinslerSpec,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<DMatrix<f64>, SpacetimeError> {
    let d = spec.dim();
    match spec {
        LorentzFinslerSpec::QuadLorentz { g } => Ok(g.eval(t, x)?),
        LorentzFinslerSpec::OmegaMinusF { omega, fhat } => {
            let ov = omega.eval(t, x)?;
            let ghat = fhat_tensor(fhat, d, t, x, v)?;
            let mut m = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] = ov[i] * ov[j] - ghat[(i, j)];
                }
            }
            Ok(m)
        }
        LorentzFinslerSpec::RiemannMinusF { gr, fhat } => {
            let m = gr.eval(t, x)?;
            let ghat = fhat_tensor(fhat, d, t, x, v)?;
            Ok(m - ghat)
        }
        LorentzFinslerSpec::SumOfRoots { terms } => {
            let margin = cone_margin(v);
            let values: Vec<f64> = terms
                .iter()
                .map(|term| lorentz_eval(term, t, x, v))
                .collect::<Result<_, _>>()?;
            if values.iter().all(|&l| l > margin) {
                sum_of_roots_interior(terms, &values, t, x, v)
            } else {
                // On the common cone the interior expression develops
                // cancelling singular terms; extrapolate from inside along
                // a timelike direction instead.
                sum_of_roots_at_cone(spec, terms, t, x, v)
            }
        }
        LorentzFinslerSpec::ProductRoot { l1, l2 } => {
            let a = lorentz_eval(l1, t, x, v)?;
            let b = lorentz_eval(l2, t, x, v)?;
            let margin = cone_margin(v);
            if a <= margin || b <= margin {
                return Err(SpacetimeError::NonExtendableAtCone(format!(
                    "product-root tensor at L1 = {a}, L2 = {b}"
                )));
            }
            let g1 = lf_tensor_matrix(l1, t, x, v)?;
            let g2 = lf_tensor_matrix(l2, t, x, v)?;
            let l = (a * b).sqrt();
            let p = &g1 * b + &g2 * a;
            let pv = mat_vec(&p, v);
            let a1 = mat_vec(&g1, v);
            let a2 = mat_vec(&g2, v);
            let mut m = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] = (p[(i, j)] - pv[i] * pv[j] / (l * l)) / (2.0 * l)
                        + (a1[i] * a2[j] + a2[i] * a1[j]) / l;
                }
            }
            Ok(m)
        }
        LorentzFinslerSpec::Bogoslovsky { l0, beta, b } => {
            let l0v = lorentz_eval(l0, t, x, v)?;
            let margin = cone_margin(v);
            if l0v <= margin {
                return Err(SpacetimeError::NonExtendableAtCone(format!(
                    "Bogoslovsky tensor at L0 = {l0v}"
                )));
            }
            let bv = beta.apply(t, x, v)?;
            if bv <= 0.0 {
                return Err(SpacetimeError::Domain(format!("beta(v) = {bv} <= 0")));
            }
            let f0 = l0v.sqrt();
            let lv = l0v.powf(1.0 + b) / bv.powf(2.0 * b);
            let g0 = lf_tensor_matrix(l0, t, x, v)?;
            let a0 = mat_vec(&g0, v);
            let bcomp = beta.eval(t, x)?;
            let mut m = DMatrix::zeros(d, d);
            let ratio = lv / l0v;
            for i in 0..d {
                let xi = a0[i] / f0 - f0 / bv * bcomp[i];
                let yi = (b + 1.0) * a0[i] / f0 - b * f0 / bv * bcomp[i];
                for j in 0..d {
                    let xj = a0[j] / f0 - f0 / bv * bcomp[j];
                    let yj = (b + 1.0) * a0[j] / f0 - b * f0 / bv * bcomp[j];
                    let h0 = g0[(i, j)] - a0[i] * a0[j] / l0v;
                    m[(i, j)] = ratio * ((b + 1.0) * h0 + b * (b + 1.0) * xi * xj + yi * yj);
                }
            }
            Ok(m)
        }
        LorentzFinslerSpec::TripleG { triple } => {
            let ov = triple.omega.eval(t, x)?;
            let tv = triple.t_field.eval(t, x)?;
            let (_, w) = decompose(triple, t, x, v)?;
            let spatial = &w[1..];
            let n_sp = d - 1;
            let g_sp = if euclid(spatial) <= 1e-12 * euclid(v) {
                match &triple.fiber {
                    FinslerSpec::RiemannQuad { g } => g.eval(t, x)?,
                    _ => {
                        return Err(SpacetimeError::TensorUndefined(
                            "cone-triple tensor at a vector in span(T)".into(),
                        ))
                    }
                }
            } else {
                fundamental_tensor(&triple.fiber, t, x, spatial)?.matrix
            };
            // A v = spatial part of (v - Omega(v) T); g = Om (x) Om - A' g_sp A.
            let mut a = DMatrix::zeros(n_sp, d);
            for i in 0..n_sp {
                for j in 0..d {
                    let id = if i + 1 == j { 1.0 } else { 0.0 };
                    a[(i, j)] = id - tv[i + 1] * ov[j];
                }
            }
            let pulled = a.transpose() * g_sp * a;
            let mut m = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] = ov[i] * ov[j] - pulled[(i, j)];
                }
            }
            Ok(m)
        }
        LorentzFinslerSpec::Scaled { mu, base } => {
            let lb = lorentz_eval(base, t, x, v)?;
            let gb = lf_tensor_matrix(base, t, x, v)?;
            let muv = mu.eval(t, v)?;
            if muv <= 0.0 {
                return Err(SpacetimeError::Domain(format!("mu(v) = {muv} <= 0")));
            }
            let cfg = DiffConfig::default();
            let mu_fn = |u: &[f64]| mu.eval(t, u);
            let grad_mu = numeric_gradient(&mu_fn, v, &cfg)?;
            let hess_mu = numeric_hessian_full(&mu_fn, v, &cfg)?;
            let gbv = mat_vec(&gb, v); // dL_base = 2 g_base(v, .)
            let mut m = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] = muv * gb[(i, j)]
                        + grad_mu[i] * gbv[j]
                        + grad_mu[j] * gbv[i]
                        + 0.5 * lb * hess_mu[(i, j)];
                }
            }
            Ok(m)
        }
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = m.nrows();
    (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

fn numeric_hessian_full<F>(f: F, base: &[f64], cfg: &DiffConfig) -> Result<DMatrix<f64>, FieldError>
where
    F: Fn(&[f64]) -> Result<f64, FieldError>,
{
    let n = base.len();
    let mut m = DMatrix::zeros(n, n);
    let mut ei = vec![0.0; n];
    let mut ej = vec![0.0; n];
    for i in 0..n {
        ei.iter_mut().for_each(|a| *a = 0.0);
        ei[i] = 1.0;
        for j in i..n {
            ej.iter_mut().for_each(|a| *a = 0.0);
            ej[j] = 1.0;
            let d = crate::fields::directional_derivative(&f, base, &ei, Some(&ej), cfg)?;
            m[(i, j)] = d;
            m[(j, i)] = d;
        }
    }
    Ok(m)
}

fn sum_of_roots_interior(
    terms: &[LorentzFinslerSpec],
    values: &[f64],
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<DMatrix<f64>, SpacetimeError> {
    let d = terms[0].dim();
    let roots: Vec<f64> = values.iter().map(|l| l.sqrt()).collect();
    let f_total: f64 = roots.iter().sum();
    let tensors: Vec<DMatrix<f64>> = terms
        .iter()
        .map(|term| lf_tensor_matrix(term, t, x, v))
        .collect::<Result<_, _>>()?;
    let lowered: Vec<Vec<f64>> = tensors.iter().map(|g| mat_vec(g, v)).collect();
    let mut m = DMatrix::zeros(d, d);
    for k in 0..terms.len() {
        let r = f_total / roots[k];
        for i in 0..d {
            for j in 0..d {
                let h = tensors[k][(i, j)] - lowered[k][i] * lowered[k][j] / values[k];
                m[(i, j)] += r * h;
            }
        }
    }
    for k in 0..terms.len() {
        for l in 0..terms.len() {
            let c = 1.0 / (roots[k] * roots[l]);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += c * lowered[k][i] * lowered[l][j];
                }
            }
        }
    }
    Ok(m)
}

fn sum_of_roots_at_cone(
    spec: &LorentzFinslerSpec,
    terms: &[LorentzFinslerSpec],
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<DMatrix<f64>, SpacetimeError> {
    let d = terms[0].dim();
    let tau = 1e-4 * euclid(v);
    let mut axis = vec![0.0; d];
    axis[0] = 1.0;
    let inward =
        |sign: f64, step: f64| -> Vec<f64> { (0..d).map(|i| v[i] + sign * step * axis[i]).collect() };
    let works = |sign: f64| -> bool {
        let shifted = inward(sign, tau);
        terms.iter().all(|term| {
            matches!(lorentz_eval(term, t, x, &shifted), Ok(l) if l > cone_margin(&shifted))
        })
    };
    let sign = if works(1.0) {
        1.0
    } else if works(-1.0) {
        -1.0
    } else {
        return Err(SpacetimeError::TensorUndefined(
            "no inward time direction found at the cone".into(),
        ));
    };
    let g1 = lf_tensor_matrix(spec, t, x, &inward(sign, tau))?;
    let g2 = lf_tensor_matrix(spec, t, x, &inward(sign, 2.0 * tau))?;
    Ok(g1 * 2.0 - g2)
}

/// Single named check with its evaluation site and margin.
#[derive(Debug, Clone)]
pub struct CheckEntry {
    pub name: String,
    pub time: f64,
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub pass: bool,
    pub margin: f64,
}

/// Result of a pointwise or sampled condition check.
#[derive(Debug, Clone, Default)]
pub struct ConditionReport {
    pub checks: Vec<CheckEntry>,
}

impl ConditionReport {
    pub fn push(
        &mut self,
        name: impl Into<String>,
        t: f64,
        x: &[f64],
        v: &[f64],
        pass: bool,
        margin: f64,
    ) {
        self.checks.push(CheckEntry {
            name: name.into(),
            time: t,
            point: x.to_vec(),
            direction: v.to_vec(),
            pass,
            margin,
        });
    }

    /// Conjunction of the individual passes.
    pub fn overall(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn merge(&mut self, other: ConditionReport) {
        self.checks.extend(other.checks);
    }
}

/// Angle between the lines spanned by `a` and `b`.
fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let na = euclid(a);
    let nb = euclid(b);
    if na == 0.0 || nb == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let c = (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    c.abs().acos()
}

/// Verifies the Lorentz-Finsler conditions at one `(t, x, v)`:
/// for interior `v`, the angular metric must be negative semi-definite
/// with radical spanned by `v`; for cone `v`, the rough Hilbert form must
/// be nonzero and `g_v` negative semi-definite on its kernel with radical
/// spanned by `v`. Failures are report entries, not errors.
pub fn check_lorentz_at(
    spec: &LorentzFinslerSpec,
    t: f64,
    x: &[f64],
    v: &[f64],
    tol: f64,
) -> Result<ConditionReport, SpacetimeError> {
    let mut report = ConditionReport::default();
    let d = spec.dim();
    let scale = euclid(v).powi(2);
    let l = match lorentz_eval(spec, t, x, v) {
        Ok(l) => l,
        Err(e) => {
            report.push(format!("evaluable ({e})"), t, x, v, false, 0.0);
            return Ok(report);
        }
    };
    let g = match lf_fundamental_tensor(spec, t, x, v) {
        Ok(g) => g,
        Err(e) => {
            report.push(format!("tensor-defined ({e})"), t, x, v, false, 0.0);
            return Ok(report);
        }
    };
    let gnorm = g.frobenius().max(f64::MIN_POSITIVE);
    if l > tol.max(1e-9) * scale {
        // Interior branch: angular metric.
        let h = angular_metric(&g, v, l).map_err(SpacetimeError::Norm)?;
        let eig = h.matrix.clone().symmetric_eigen();
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&i, &j| {
            eig.eigenvalues[i]
                .abs()
                .partial_cmp(&eig.eigenvalues[j].abs())
                .unwrap()
        });
        let zero_i = idx[0];
        let zero_ev = eig.eigenvalues[zero_i];
        report.push(
            "angular radical eigenvalue near zero",
            t,
            x,
            v,
            zero_ev.abs() <= tol.max(1e-9) * gnorm,
            zero_ev.abs(),
        );
        let rad: Vec<f64> = eig.eigenvectors.column(zero_i).iter().copied().collect();
        let ang = angle_between(&rad, v);
        report.push(
            "radical direction aligned with v",
            t,
            x,
            v,
            ang <= RADICAL_ANGLE_TOL,
            ang,
        );
        let mut worst = f64::NEG_INFINITY;
        for i in 0..d {
            if i == zero_i {
                continue;
            }
            worst = worst.max(eig.eigenvalues[i]);
        }
        report.push(
            "angular metric negative off the radical",
            t,
            x,
            v,
            worst < tol * gnorm,
            -worst,
        );
    } else if l.abs() <= tol.max(1e-9) * scale {
        // Cone branch.
        let omega_v = g.lower(v);
        let on = euclid(&omega_v);
        report.push("rough Hilbert form nonzero", t, x, v, on > tol * gnorm, on);
        if on > 0.0 {
            let kernel = null_space(&[omega_v.clone()], d);
            let mut gk = DMatrix::zeros(kernel.len(), kernel.len());
            for (i, ei) in kernel.iter().enumerate() {
                for (j, ej) in kernel.iter().enumerate() {
                    gk[(i, j)] = g.pair(ei, ej);
                }
            }
            let eig = gk.symmetric_eigen();
            let mut evs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            evs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let largest = *evs.last().unwrap();
            report.push(
                "g restricted to ker(omega_v) negative semi-definite",
                t,
                x,
                v,
                largest <= tol.max(1e-7) * gnorm,
                -largest,
            );
            // Radical inside the kernel must align with v.
            let mut idx: Vec<usize> = (0..kernel.len()).collect();
            idx.sort_by(|&i, &j| {
                eig.eigenvalues[i]
                    .abs()
                    .partial_cmp(&eig.eigenvalues[j].abs())
                    .unwrap()
            });
            let mut rad = vec![0.0; d];
            for (k, ek) in kernel.iter().enumerate() {
                let c = eig.eigenvectors[(k, idx[0])];
                for i in 0..d {
                    rad[i] += c * ek[i];
                }
            }
            let ang = angle_between(&rad, v);
            report.push(
                "cone radical aligned with v",
                t,
                x,
                v,
                ang <= RADICAL_ANGLE_TOL,
                ang,
            );
        }
    } else {
        report.push("vector is causal (L >= 0)", t, x, v, false, l);
    }
    Ok(report)
}

/// Orthonormal basis of the joint kernel of the given covectors.
fn null_space(constraints: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut fixed: Vec<DVector<f64>> = Vec::new();
    for c in constraints {
        let mut w = DVector::from_column_slice(c);
        for b in &fixed {
            let p = w.dot(b);
            w -= b * p;
        }
        let n = w.norm();
        if n > 1e-13 {
            fixed.push(w / n);
        }
    }
    let k = fixed.len();
    let mut out: Vec<DVector<f64>> = Vec::new();
    for i in 0..d {
        let mut w = DVector::zeros(d);
        w[i] = 1.0;
        for b in fixed.iter().chain(out.iter()) {
            let p = w.dot(b);
            w -= b * p;
        }
        let n = w.norm();
        if n > 1e-10 {
            out.push(w / n);
        }
        if out.len() == d - k {
            break;
        }
    }
    out.into_iter().map(|w| w.iter().copied().collect()).collect()
}

/// Samples the construction hypotheses of the difference-form variants.
///
/// `OmegaMinusF`: at sampled lightlike `v`, `ghat_v(v, .)` must not be
/// proportional to `omega` (transversality of the indicatrices).
/// `RiemannMinusF`: interior samples must satisfy the strict negativity on
/// `<v>^perp_gR`, cone samples the reduced negativity plus transversality.
pub fn check_construction_hypotheses(
    spec: &LorentzFinslerSpec,
    t: f64,
    x: &[f64],
    sample_count: usize,
) -> Result<ConditionReport, SpacetimeError> {
    match spec {
        LorentzFinslerSpec::OmegaMinusF { omega, fhat } => {
            let d = spec.dim();
            let omega_v = omega.eval(t, x)?;
            let time_part = |v: &[f64]| -> Result<f64, SpacetimeError> {
                Ok(omega_v.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
            };
            let f_part = |v: &[f64]| fhat_value(fhat, d, t, x, v);
            let mut report = ConditionReport::default();
            for v in sample_cone_points(&time_part, &f_part, d, sample_count)? {
                let ghat = fhat_tensor(fhat, d, t, x, &v)?;
                let a = mat_vec(&ghat, &v);
                let ang = angle_between(&a, &omega_v);
                report.push(
                    "indicatrix transverse to omega = 1",
                    t,
                    x,
                    &v,
                    ang > 1e-8,
                    ang,
                );
            }
            Ok(report)
        }
        LorentzFinslerSpec::RiemannMinusF { gr, fhat } => {
            let d = spec.dim();
            let grm = gr.eval(t, x)?;
            let mut report = ConditionReport::default();
            // Interior samples.
            let mut found_interior = 0usize;
            for u in crate::cones::unit_directions(d, 4 * sample_count) {
                if found_interior >= sample_count {
                    break;
                }
                let l = lorentz_eval(spec, t, x, &u)?;
                if l <= 1e-6 {
                    continue;
                }
                found_interior += 1;
                let ghat = fhat_tensor(fhat, d, t, x, &u)?;
                let av = mat_vec(&ghat, &u);
                let grv = mat_vec(&grm, &u);
                let basis = null_space(&[grv], d);
                let mut worst = f64::NEG_INFINITY;
                for w in &basis {
                    let q = quad(&grm, w) - quad(&ghat, w) - dot(&av, w).powi(2) / l;
                    worst = worst.max(q);
                }
                report.push(
                    "interior negativity on <v>^perp_gR",
                    t,
                    x,
                    &u,
                    worst < 0.0,
                    -worst,
                );
            }
            // Cone samples.
            let gr_q =
                |v: &[f64]| -> Result<f64, SpacetimeError> { Ok(quad(&grm, v).max(0.0).sqrt()) };
            let f_part = |v: &[f64]| -> Result<f64, SpacetimeError> { Ok(fhat.eval(t, x, v)?) };
            for v in sample_cone_points(&gr_q, &f_part, d, sample_count)? {
                let ghat = fhat_tensor(fhat, d, t, x, &v)?;
                let av = mat_vec(&ghat, &v);
                let grv = mat_vec(&grm, &v);
                let ang = angle_between(&av, &grv);
                report.push("indicatrices transverse at cone v", t, x, &v, ang > 1e-8, ang);
                if d >= 3 {
                    let basis = null_space(&[grv, av], d);
                    let mut worst = f64::NEG_INFINITY;
                    for w in &basis {
                        let q = quad(&grm, w) - quad(&ghat, w);
                        worst = worst.max(q);
                    }
                    report.push(
                        "cone negativity on the joint orthogonal",
                        t,
                        x,
                        &v,
                        worst < 0.0,
                        -worst,
                    );
                }
            }
            Ok(report)
        }
        _ => Err(SpacetimeError::VariantMismatch(
            "OmegaMinusF or RiemannMinusF".into(),
        )),
    }
}

/// Finds points on `{ a(v) = b(v) }` (both 1-homogeneous, `a` the "time"
/// part) by scanning unit directions and bisecting sign changes of
/// `a - b` along segments from an interior seed.
fn sample_cone_points(
    a: &dyn Fn(&[f64]) -> Result<f64, SpacetimeError>,
    b: &dyn Fn(&[f64]) -> Result<f64, SpacetimeError>,
    d: usize,
    count: usize,
) -> Result<Vec<Vec<f64>>, SpacetimeError> {
    let dirs = crate::cones::unit_directions(d, (4 * count).max(64));
    let phi = |v: &[f64]| -> Result<f64, SpacetimeError> { Ok(a(v)? - b(v)?) };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut seed: Option<Vec<f64>> = None;
    for u in &dirs {
        let p = phi(u)?;
        if p > 1e-9 {
            seed = Some(u.clone());
            break;
        }
        if best.as_ref().map_or(true, |(m, _)| p > *m) {
            best = Some((p, u.clone()));
        }
    }
    let seed = match seed {
        Some(s) => s,
        None => {
            let (m, arg) = best.unwrap();
            if m > -1e-6 {
                // Degenerate cone collapsing to (nearly) one ray.
                return Ok(vec![arg]);
            }
            return Err(SpacetimeError::EmptyCone(format!(
                "max of omega - Fhat over sampled directions is {m}"
            )));
        }
    };
    let mut out = Vec::new();
    for u in &dirs {
        if out.len() >= count {
            break;
        }
        let p1 = phi(u)?;
        if p1 >= 0.0 {
            continue;
        }
        // Bisect along the segment seed -> u.
        let mut lo = 0.0;
        let mut hi = 1.0;
        let at = |s: f64| -> Vec<f64> { (0..d).map(|i| (1.0 - s) * seed[i] + s * u[i]).collect() };
        let mut ok = true;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let vm = at(mid);
            if euclid(&vm) < 1e-9 {
                ok = false;
                break;
            }
            if phi(&vm)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if ok {
            out.push(at(0.5 * (lo + hi)));
        }
    }
    if out.is_empty() {
        return Err(SpacetimeError::EmptyCone(
            "no cone crossings found from the interior seed".into(),
        ));
    }
    Ok(out)
}

/// Anisotropic factor between two metrics with a common cone:
/// `L2/L1` at interior `v`, the tensor ratio `g2_v(v,w)/g1_v(v,w)` on the
/// cone, with `w` the first coordinate direction with `|g1_v(v,w)|` above
/// threshold.
pub fn anisotropic_factor(
    l1: &LorentzFinslerSpec,
    l2: &LorentzFinslerSpec,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<f64, SpacetimeError> {
    let a = lorentz_eval(l1, t, x, v)?;
    let scale = euclid(v).powi(2);
    if a > 1e-9 * scale {
        let b = lorentz_eval(l2, t, x, v)?;
        return Ok(b / a);
    }
    let g1 = lf_fundamental_tensor(l1, t, x, v)?;
    let g2 = lf_fundamental_tensor(l2, t, x, v)?;
    let a1 = g1.lower(v);
    let a2 = g2.lower(v);
    let thresh = 1e-9 * euclid(&a1).max(f64::MIN_POSITIVE);
    for i in 0..v.len() {
        if a1[i].abs() > thresh {
            return Ok(a2[i] / a1[i]);
        }
    }
    Err(SpacetimeError::NoProbeDirection)
}

/// Rough Hilbert form `omega^L_v = g_v(v, .)`; its kernel is the tangent
/// space of the cone at lightlike `v`.
pub fn rough_hilbert_form(
    spec: &LorentzFinslerSpec,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<Vec<f64>, SpacetimeError> {
    let g = lf_fundamental_tensor(spec, t, x, v)?;
    Ok(g.lower(v))
}

/// Smooth maximum `(a + b + sqrt((a-b)^2 + eps^2)) / 2`: at least
/// `max(a,b)`, at most `max(a,b) + eps/2`, smooth in both arguments.
pub fn smooth_max(a: f64, b: f64, eps: f64) -> f64 {
    0.5 * (a + b + ((a - b) * (a - b) + eps * eps).sqrt())
}

/// C^2 even spline equal to `|s|` for `|s| >= eps`; the indicatrix
/// smoothing needs the maximum to recover its arguments exactly away from
/// the crossover band, which the sqrt form cannot do.
fn smooth_abs_exact(s: f64, eps: f64) -> f64 {
    let a = s.abs();
    if a >= eps {
        a
    } else {
        let s2 = s * s;
        -s2 * s2 / (8.0 * eps * eps * eps) + 3.0 * s2 / (4.0 * eps) + 3.0 * eps / 8.0
    }
}

fn smooth_max_exact(a: f64, b: f64, eps: f64) -> f64 {
    0.5 * (a + b + smooth_abs_exact(a - b, eps))
}

/// Strongly convexified graph of a fiber indicatrix.
///
/// The original graph is `t0(y) = sqrt(1 + F(y)^2)`; the smoothing
/// replaces it near the apex by a comparison paraboloid through a smooth
/// maximum, exactly preserving `t0` outside half the modification disk.
pub struct SmoothedGraph {
    fiber: FinslerSpec,
    time: f64,
    point: Vec<f64>,
    /// Requested approximation budget.
    pub epsilon: f64,
    /// Parameter actually used in the smooth maximum.
    pub epsilon_tilde: f64,
    /// Radius of the modification disk.
    pub disk_radius: f64,
    /// Hessian lower bound used for the paraboloid.
    pub delta: f64,
    /// Subgradient of `t0` at the origin.
    pub xi: Vec<f64>,
    t0_at_zero: f64,
}

impl SmoothedGraph {
    /// `t0(y) = sqrt(1 + F(y)^2)`, extended by `t0(0) = 1`.
    pub fn eval_original(&self, y: &[f64]) -> Result<f64, SpacetimeError> {
        if euclid(y) == 0.0 {
            return Ok(1.0);
        }
        let f = self.fiber.eval(self.time, &self.point, y)?;
        Ok((1.0 + f * f).sqrt())
    }

    /// The smoothed graph.
    pub fn eval_smoothed(&self, y: &[f64]) -> Result<f64, SpacetimeError> {
        let t0 = self.eval_original(y)?;
        let r2: f64 = y.iter().map(|a| a * a).sum();
        let parab = self.t0_at_zero
            + dot(&self.xi, y)
            + self.delta / 4.0 * r2
            + self.disk_radius * self.disk_radius * self.delta / 32.0;
        Ok(smooth_max_exact(t0, parab, self.epsilon_tilde))
    }
}

fn hessian_min_eigenvalue<F>(f: F, y: &[f64], cfg: &DiffConfig) -> Result<f64, SpacetimeError>
where
    F: Fn(&[f64]) -> Result<f64, FieldError>,
{
    let h = numeric_hessian_full(&f, y, cfg)?;
    let eig = h.symmetric_eigen();
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Strongly convexifies the indicatrix graph of a fiber norm at `(t, x)`.
///
/// The Hessian lower bound `delta` is estimated over a 64-point annulus
/// sample between `D/4` and `D` (times a 0.9 safety factor); the
/// subgradient at 0 is the gradient of `t0` averaged over 8 directions at
/// radius `D/100`. Errors when the estimated `delta` is not positive.
pub fn smooth_indicatrix(
    fiber: &FinslerSpec,
    t: f64,
    x: &[f64],
    epsilon: f64,
    disk_radius: f64,
) -> Result<SmoothedGraph, SpacetimeError> {
    if epsilon <= 0.0 || disk_radius <= 0.0 {
        return Err(SpacetimeError::Domain(
            "epsilon and disk radius must be positive".into(),
        ));
    }
    let n = fiber.arity();
    let cfg = DiffConfig::default();
    let t0 = |y: &[f64]| -> Result<f64, FieldError> {
        if euclid(y) == 0.0 {
            return Ok(1.0);
        }
        let f = fiber
            .eval(t, x, y)
            .map_err(|e| FieldError::Domain(e.to_string()))?;
        Ok((1.0 + f * f).sqrt())
    };
    // Hessian lower bound over the annulus [D/4, D].
    let radii = 8;
    let per_ring = 8;
    let mut delta = f64::INFINITY;
    for ri in 0..radii {
        let r = disk_radius * (0.25 + 0.75 * (ri as f64 + 0.5) / radii as f64);
        for u in crate::cones::unit_directions(n, per_ring) {
            let y: Vec<f64> = u.iter().map(|c| c * r).collect();
            let ev = hessian_min_eigenvalue(&t0, &y, &cfg)?;
            delta = delta.min(ev);
        }
    }
    delta *= 0.9;
    if delta <= 0.0 {
        return Err(SpacetimeError::NotConvex(format!(
            "estimated Hessian lower bound {delta} <= 0"
        )));
    }
    // Subgradient at 0: average gradient over 8 directions at D/100.
    let probe_r = disk_radius / 100.0;
    let mut xi = vec![0.0; n];
    let probes = crate::cones::unit_directions(n, 8);
    for u in &probes {
        let y: Vec<f64> = u.iter().map(|c| c * probe_r).collect();
        let g = numeric_gradient(&t0, &y, &cfg)?;
        for i in 0..n {
            xi[i] += g[i] / probes.len() as f64;
        }
    }
    let epsilon_tilde = (epsilon / 2.0).min(disk_radius * disk_radius * delta / 64.0);
    Ok(SmoothedGraph {
        fiber: fiber.clone(),
        time: t,
        point: x.to_vec(),
        epsilon,
        epsilon_tilde,
        disk_radius,
        delta,
        xi,
        t0_at_zero: 1.0,
    })
}

/// Classification of the Kostelecky-family Lagrangian at one causal `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KosteleckyClass {
    /// Fundamental tensor has index `n - 1`.
    IndexNMinus1,
    /// `F(v) = 0`: the tensor degenerates.
    Degenerate,
    /// `g(v,v) = 0`: the Lagrangian is not smooth there.
    Undefined,
    Indefinite,
}

/// Classifies `F(v) = sqrt(-g(v,v)) + g(v,a) + eps sqrt(p_b(v,v))` with
/// `p_b(u,w) = g(u,b)g(w,b) - g(b,b)g(u,w)`, for a Lorentzian `g` of
/// signature `(-,+,..,+)` and `eps = +-1`.
pub fn kostelecky_classify(
    g_tilde: &MatrixField,
    a_field: &VectorField,
    b_field: &VectorField,
    eps_sign: f64,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<KosteleckyClass, SpacetimeError> {
    let g = g_tilde.eval(t, x)?;
    let av = a_field.eval(t, x)?;
    let bv = b_field.eval(t, x)?;
    let gvv = quad(&g, v);
    let scale = euclid(v).powi(2) * g.norm().max(1e-300);
    if gvv.abs() <= 1e-12 * scale {
        return Ok(KosteleckyClass::Undefined);
    }
    if gvv > 0.0 {
        return Err(SpacetimeError::Domain(format!(
            "v not g-causal: g(v,v) = {gvv} > 0"
        )));
    }
    let pair = |u: &[f64], w: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                acc += u[i] * g[(i, j)] * w[j];
            }
        }
        acc
    };
    let gbb = pair(&bv, &bv);
    let p_vv = (pair(v, &bv).powi(2) - gbb * gvv).max(0.0);
    let f = (-gvv).sqrt() + pair(v, &av) + eps_sign * p_vv.sqrt();
    if f.abs() <= 1e-12 * scale.sqrt() {
        return Ok(KosteleckyClass::Degenerate);
    }
    let kost = -gvv + eps_sign * p_vv > 0.0
        && (eps_sign * gbb >= 0.0 || p_vv + gvv * gbb * gbb > 0.0);
    let kost2 = eps_sign == -1.0
        && -gvv - p_vv < 0.0
        && gbb > 0.0
        && p_vv + gvv * gbb * gbb < 0.0;
    if f > 0.0 && (kost || kost2) {
        Ok(KosteleckyClass::IndexNMinus1)
    } else {
        Ok(KosteleckyClass::Indefinite)
    }
}

/// Pointwise static test on `R x R^n`: the tangent plane of the indicatrix
/// at the timelike field `T` must be parallel to the spatial slice, i.e.
/// `g_T(T, e_i) = 0` for every spatial basis vector.
pub fn static_check(
    spec: &LorentzFinslerSpec,
    t_field: &VectorField,
    t: f64,
    x: &[f64],
    tol: f64,
) -> Result<bool, SpacetimeError> {
    let d = spec.dim();
    let tv = t_field.eval(t, x)?;
    let l = lorentz_eval(spec, t, x, &tv)?;
    if l <= 0.0 {
        return Err(SpacetimeError::NotTimelike(format!("L(T) = {l} <= 0")));
    }
    let g = lf_fundamental_tensor(spec, t, x, &tv)?;
    let lowered = g.lower(&tv);
    let scale = g.frobenius() * euclid(&tv);
    for i in 1..d {
        if lowered[i].abs() > tol * scale {
            return Ok(false);
        }
    }
    Ok(true)
}
