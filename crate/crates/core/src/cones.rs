//! Cone triples and causal classification.
//!
//! A cone triple `(Omega, T, F)` is a non-vanishing one-form field, an
//! `Omega`-unit vector field and a fiber Finsler metric on `ker Omega`.
//! Kernel vectors are kept in ambient coordinates with `Omega(w) = 0`
//! maintained by projection; the fiber norm is evaluated on the spatial
//! representative (components `1..`) of the kernel vector.

use thiserror::Error;

use crate::fields::{CovectorField, FieldError, VectorField};
use crate::norms::{FinslerSpec, NormError};

#[derive(Debug, Clone, Error)]
pub enum ConeError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error("cone triple invariant violated: {0}")]
    Invariant(String),
    #[error("bracketing failed: {0}")]
    Bracketing(String),
}

/// Causal class of a nonzero tangent vector with respect to a cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalClass {
    Timelike,
    Lightlike,
    Noncausal,
}

/// Default classification tolerance; cone membership feeds root-finders
/// that themselves run at 1e-10.
pub const CLASSIFY_TOL: f64 = 1e-9;

/// Cone triple `(Omega, T, F)` on `R x R^n`.
///
/// `Omega` and `T` have `1 + n` components; the fiber metric `F` has arity
/// `n` and acts on the spatial representative of kernel vectors.
#[derive(Debug, Clone)]
pub struct ConeTriple {
    pub omega: CovectorField,
    pub t_field: VectorField,
    pub fiber: FinslerSpec,
}

impl ConeTriple {
    /// The standard navigation triple `(dt, d/dt, F)` on `R x R^n`.
    pub fn time_product(fiber: FinslerSpec) -> ConeTriple {
        let n = fiber.arity();
        let d = n + 1;
        let mut omega = vec![0.0; d];
        omega[0] = 1.0;
        ConeTriple {
            omega: CovectorField::constant(&omega, n),
            t_field: VectorField::constant(&omega, n),
            fiber,
        }
    }

    /// Total dimension `1 + n`.
    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn spatial_dim(&self) -> usize {
        self.fiber.arity()
    }

    /// Checks `|Omega(T) - 1| <= 1e-10` at `(t, x)`.
    pub fn validate_at(&self, t: f64, x: &[f64]) -> Result<(), ConeError> {
        let tv = self.t_field.eval(t, x)?;
        let ot = self.omega.apply(t, x, &tv)?;
        if (ot - 1.0).abs() > 1e-10 {
            return Err(ConeError::Invariant(format!(
                "Omega(T) = {ot} at t={t}, x={x:?}"
            )));
        }
        Ok(())
    }

    /// Fiber norm of a kernel vector, evaluated on its spatial part.
    /// Returns 0 for the zero vector.
    pub fn fiber_norm(&self, t: f64, x: &[f64], w: &[f64]) -> Result<f64, ConeError> {
        let spatial = &w[1..];
        if spatial.iter().map(|a| a * a).sum::<f64>().sqrt() == 0.0 {
            return Ok(0.0);
        }
        Ok(self.fiber.eval(t, x, spatial)?)
    }
}

/// Splits `v = Omega(v) T + w` with `Omega(w) = 0`.
pub fn decompose(
    triple: &ConeTriple,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<(f64, Vec<f64>), ConeError> {
    let tau = triple.omega.apply(t, x, v)?;
    let tv = triple.t_field.eval(t, x)?;
    let w: Vec<f64> = v.iter().zip(&tv).map(|(vi, ti)| vi - tau * ti).collect();
    Ok((tau, w))
}

/// Classifies `v` against the cone of the triple:
/// timelike iff `Omega(v) > F(w) + tol*scale`, lightlike iff
/// `|Omega(v) - F(w)| <= tol*scale` with `Omega(v) > 0`.
pub fn classify(
    triple: &ConeTriple,
    t: f64,
    x: &[f64],
    v: &[f64],
    tol: f64,
) -> Result<CausalClass, ConeError> {
    let (tau, w) = decompose(triple, t, x, v)?;
    let fw = triple.fiber_norm(t, x, &w)?;
    let scale = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if tau > fw + tol * scale {
        Ok(CausalClass::Timelike)
    } else if tau > 0.0 && (tau - fw).abs() <= tol * scale {
        Ok(CausalClass::Lightlike)
    } else {
        Ok(CausalClass::Noncausal)
    }
}

/// Root-finds the unique `s > 0` with `L(s T + w) = 0`, given the Lorentz
/// metric as an evaluation closure at fixed `(t, x)`.
///
/// The closure returns `None` where the metric is undefined; that counts as
/// "below the cone" for bracketing, like negative values. Errors when no
/// positive value is found below `1e3 * scale` — the usual cause is a
/// non-timelike `T` or a direction outside the representable fan.
pub fn extract_fiber_norm<L>(lorentz: L, t_vec: &[f64], w: &[f64]) -> Result<f64, ConeError>
where
    L: Fn(&[f64]) -> Option<f64>,
{
    let d = t_vec.len();
    let wnorm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
    if wnorm == 0.0 {
        return Err(ConeError::Invariant("fiber norm of zero vector".into()));
    }
    let at = |s: f64| -> Option<f64> {
        let v: Vec<f64> = (0..d).map(|i| s * t_vec[i] + w[i]).collect();
        lorentz(&v)
    };
    // Find an upper bound with L > 0.
    let mut hi = wnorm;
    let mut guard = 0;
    loop {
        match at(hi) {
            Some(l) if l > 0.0 => break,
            _ => {
                hi *= 2.0;
                guard += 1;
                if guard > 40 || hi > 1e3 * wnorm {
                    return Err(ConeError::Bracketing(format!(
                        "no positive L(sT + w) below s = {hi}"
                    )));
                }
            }
        }
    }
    // Walk the lower end down until L <= 0 or undefined.
    let mut lo = hi;
    guard = 0;
    loop {
        lo *= 0.5;
        match at(lo) {
            Some(l) if l > 0.0 => {
                hi = lo;
            }
            _ => break,
        }
        guard += 1;
        if guard > 200 {
            return Err(ConeError::Bracketing("lower bracket collapsed".into()));
        }
    }
    // Bisect on the predicate "defined and positive".
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        match at(mid) {
            Some(l) if l > 0.0 => hi = mid,
            _ => lo = mid,
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    // Newton polish where L is defined on both sides.
    let scale = {
        let tn = t_vec.iter().map(|a| a * a).sum::<f64>().sqrt();
        (hi * tn + wnorm).powi(2)
    };
    let mut s = hi;
    for _ in 0..8 {
        let l = match at(s) {
            Some(l) => l,
            None => break,
        };
        if l.abs() <= 1e-12 * scale {
            break;
        }
        let h = 1e-7 * s;
        let (lp, lm) = match (at(s + h), at(s - h)) {
            (Some(a), Some(b)) => (a, b),
            _ => break,
        };
        let dl = (lp - lm) / (2.0 * h);
        if dl.abs() < 1e-300 {
            break;
        }
        let next = s - l / dl;
        if next > 0.0 {
            s = next;
        } else {
            break;
        }
    }
    Ok(s)
}

/// Deterministic unit directions: equiangular on the circle for `n = 2`,
/// a Fibonacci sphere for `n = 3`, alternating signs for `n = 1`.
pub fn unit_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => (0..count)
            .map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }])
            .collect(),
        2 => (0..count)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        3 => {
            let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = 2.0 * std::f64::consts::PI * (k as f64 / golden % 1.0);
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => panic!("unsupported spatial dimension {n}"),
    }
}

/// Fan of lightlike vectors `F(w_k) T + w_k` over `count` unit kernel
/// directions; every output classifies as lightlike.
pub fn lightlike_directions(
    triple: &ConeTriple,
    t: f64,
    x: &[f64],
    count: usize,
) -> Result<Vec<Vec<f64>>, ConeError> {
    let n = triple.spatial_dim();
    let d = triple.dim();
    let tv = triple.t_field.eval(t, x)?;
    let omega = triple.omega.eval(t, x)?;
    let mut out = Vec::with_capacity(count);
    for w_sp in unit_directions(n, count) {
        // Lift the spatial direction into ker Omega by projecting along T.
        let mut u = vec![0.0; d];
        u[1..].copy_from_slice(&w_sp);
        let ou: f64 = omega.iter().zip(&u).map(|(a, b)| a * b).sum();
        let w: Vec<f64> = (0..d).map(|i| u[i] - ou * tv[i]).collect();
        let f = triple.fiber_norm(t, x, &w)?;
        let v: Vec<f64> = (0..d).map(|i| f * tv[i] + w[i]).collect();
        out.push(v);
    }
    Ok(out)
}
