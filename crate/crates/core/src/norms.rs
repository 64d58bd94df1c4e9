//! Finsler and Minkowski norm families.
//!
//! Each [`FinslerSpec`] evaluates a positively 1-homogeneous norm `F(t,x,v)`
//! and its fundamental tensor `g_v = 1/2 d^2/dr ds L(v + r u + s w)` for
//! `L = F^2`. Closed forms are used where the family admits one; the numeric
//! Hessian oracle discretizes the same definition and doubles as the
//! independent cross-check.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fields::{
    directional_derivative, CovectorField, DiffConfig, FieldError, MatrixField, VectorField,
};

#[derive(Debug, Clone, Error)]
pub enum NormError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("strong wind: g0(W,W) = {0} >= 1")]
    StrongWind(f64),
    #[error("degenerate tensor: min |eigenvalue| = {0}")]
    Degenerate(f64),
    #[error("root bracketing failed: {0}")]
    Bracketing(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

/// Symmetric bilinear form with provenance of the evaluation site.
#[derive(Debug, Clone)]
pub struct BilinearForm {
    pub matrix: DMatrix<f64>,
    /// `(t, x)` where the form was evaluated.
    pub base_time: f64,
    pub base_point: Vec<f64>,
    /// Direction `v` the form belongs to.
    pub base_direction: Vec<f64>,
}

impl BilinearForm {
    pub fn new(matrix: DMatrix<f64>, t: f64, x: &[f64], v: &[f64]) -> Self {
        BilinearForm {
            matrix,
            base_time: t,
            base_point: x.to_vec(),
            base_direction: v.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `g(u, w)`.
    pub fn pair(&self, u: &[f64], w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += u[i] * self.matrix[(i, j)] * w[j];
            }
        }
        acc
    }

    /// One-form `g(v, .)` as a coefficient vector.
    pub fn lower(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|j| (0..self.dim()).map(|i| v[i] * self.matrix[(i, j)]).sum())
            .collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.matrix.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn symmetrize(&mut self) {
        let m = &self.matrix;
        let s = (m + m.transpose()) * 0.5;
        self.matrix = s;
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

/// Eigenvalue signature of a symmetric form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_zero: usize,
}

/// Counts eigenvalues; `|lambda| <= tol` classifies as zero.
pub fn signature(g: &BilinearForm, tol: f64) -> Signature {
    let mut sig = Signature {
        n_pos: 0,
        n_neg: 0,
        n_zero: 0,
    };
    for ev in g.eigenvalues() {
        if ev.abs() <= tol {
            sig.n_zero += 1;
        } else if ev > 0.0 {
            sig.n_pos += 1;
        } else {
            sig.n_neg += 1;
        }
    }
    sig
}

/// Default eigenvalue tolerance, relative to the form's magnitude.
pub fn default_signature_tol(g: &BilinearForm) -> f64 {
    1e-8 * g.frobenius().max(f64::MIN_POSITIVE)
}

/// A Finsler metric family on spatial `R^n`, possibly time-dependent.
#[derive(Debug, Clone)]
pub enum FinslerSpec {
    /// `F = sqrt(v' G(t,x) v)` with `G` symmetric positive definite.
    RiemannQuad { g: MatrixField },
    /// Randers metric `F = sqrt(a(v,v)) + b(v)` with `|b|_a < 1`.
    Randers { a: MatrixField, b: CovectorField },
    /// `F = (sum_i w_i v_i^r)^(1/r)` for even `r >= 2`.
    PPower { r: u32, weights: Vec<f64> },
    /// Finsler-Kropina metric `F = F0(v)^2 / beta(v)` on `{beta(v) > 0}`.
    Kropina {
        f0: Box<FinslerSpec>,
        beta: CovectorField,
    },
    /// Zermelo metric of a background metric and a (time-dependent) wind:
    /// `F(v)` is the unique `s > 0` with `g0(v/s - W, v/s - W) = 1`.
    ZermeloData { g0: MatrixField, wind: VectorField },
}

/// Kropina conic-domain margin: evaluation requires `beta(v) > KROPINA_MARGIN * |v|`.
pub const KROPINA_MARGIN: f64 = 1e-9;

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl FinslerSpec {
    pub fn euclidean(n: usize) -> FinslerSpec {
        FinslerSpec::RiemannQuad {
            g: MatrixField::identity(n, n),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            FinslerSpec::RiemannQuad { g } => g.n,
            FinslerSpec::Randers { a, .. } => a.n,
            FinslerSpec::PPower { weights, .. } => weights.len(),
            FinslerSpec::Kropina { f0, .. } => f0.arity(),
            FinslerSpec::ZermeloData { g0, .. } => g0.n,
        }
    }

    /// Checks the structural constraints that do not depend on `(t, x)`.
    pub fn validate_shape(&self) -> Result<(), NormError> {
        match self {
            FinslerSpec::RiemannQuad { g } => {
                if g.entries.len() != g.n * g.n {
                    return Err(NormError::InvalidSpec("matrix entry count".into()));
                }
            }
            FinslerSpec::Randers { a, b } => {
                if b.dim() != a.n {
                    return Err(NormError::InvalidSpec("Randers b dimension".into()));
                }
            }
            FinslerSpec::PPower { r, weights } => {
                if *r < 2 || *r % 2 != 0 {
                    return Err(NormError::InvalidSpec(format!(
                        "PPower exponent {r} must be even and >= 2"
                    )));
                }
                if weights.iter().any(|w| *w <= 0.0) {
                    return Err(NormError::InvalidSpec("PPower weights must be > 0".into()));
                }
            }
            FinslerSpec::Kropina { f0, beta } => {
                f0.validate_shape()?;
                if beta.dim() != f0.arity() {
                    return Err(NormError::InvalidSpec("Kropina beta dimension".into()));
                }
            }
            FinslerSpec::ZermeloData { g0, wind } => {
                if wind.dim() != g0.n {
                    return Err(NormError::InvalidSpec("Zermelo wind dimension".into()));
                }
            }
        }
        Ok(())
    }

    /// Pointwise validity of the family invariants at `(t, x)`:
    /// positive-definite backgrounds, `|b|_a < 1`, mild wind.
    pub fn validate_at(&self, t: f64, x: &[f64]) -> Result<(), NormError> {
        match self {
            FinslerSpec::RiemannQuad { g } => {
                let m = g.eval(t, x)?;
                let ev = m.symmetric_eigen().eigenvalues;
                if ev.iter().any(|&l| l <= 0.0) {
                    return Err(NormError::Domain(format!(
                        "background metric not positive definite at t={t}, x={x:?}"
                    )));
                }
            }
            FinslerSpec::Randers { a, b } => {
                let am = a.eval(t, x)?;
                let bv = DVector::from_vec(b.eval(t, x)?);
                let inv = am.clone().try_inverse().ok_or_else(|| {
                    NormError::Domain("Randers background not invertible".into())
                })?;
                let bn2 = (bv.transpose() * inv * bv)[(0, 0)];
                if bn2 >= 1.0 {
                    return Err(NormError::Domain(format!(
                        "Randers |b|_a = {} >= 1",
                        bn2.sqrt()
                    )));
                }
            }
            FinslerSpec::PPower { .. } => {}
            FinslerSpec::Kropina { f0, .. } => f0.validate_at(t, x)?,
            FinslerSpec::ZermeloData { g0, wind } => {
                let gm = g0.eval(t, x)?;
                let w = DVector::from_vec(wind.eval(t, x)?);
                let n2 = (w.transpose() * gm * w)[(0, 0)];
                if n2 >= 1.0 {
                    return Err(NormError::StrongWind(n2));
                }
            }
        }
        Ok(())
    }

    /// 1-homogeneous norm value `F(v) > 0` on the conic domain.
    pub fn eval(&self, t: f64, x: &[f64], v: &[f64]) -> Result<f64, NormError> {
        if v.len() != self.arity() {
            return Err(NormError::Field(FieldError::Dimension {
                expected: self.arity(),
                got: v.len(),
            }));
        }
        if euclid(v) == 0.0 {
            return Err(NormError::Domain("norm of zero vector".into()));
        }
        match self {
            FinslerSpec::RiemannQuad { g } => {
                let m = g.eval(t, x)?;
                let q = quad(&m, v);
                if q <= 0.0 {
                    return Err(NormError::Domain(format!("non-positive quadratic {q}")));
                }
                Ok(q.sqrt())
            }
            FinslerSpec::Randers { a, b } => {
                let am = a.eval(t, x)?;
                let alpha = quad(&am, v);
                if alpha <= 0.0 {
                    return Err(NormError::Domain("Randers background degenerate".into()));
                }
                let bv = b.apply(t, x, v)?;
                let f = alpha.sqrt() + bv;
                if f <= 0.0 {
                    return Err(NormError::Domain(format!("Randers norm {f} <= 0")));
                }
                Ok(f)
            }
            FinslerSpec::PPower { r, weights } => {
                let mut acc = 0.0;
                for (w, vi) in weights.iter().zip(v) {
                    acc += w * vi.powi(*r as i32);
                }
                Ok(acc.powf(1.0 / *r as f64))
            }
            FinslerSpec::Kropina { f0, beta } => {
                let bv = beta.apply(t, x, v)?;
                if bv <= KROPINA_MARGIN * euclid(v) {
                    return Err(NormError::Domain(format!(
                        "Kropina outside conic domain: beta(v) = {bv}"
                    )));
                }
                let f = f0.eval(t, x, v)?;
                Ok(f * f / bv)
            }
            FinslerSpec::ZermeloData { g0, wind } => {
                let gm = g0.eval(t, x)?;
                let w = wind.eval(t, x)?;
                zermelo_root(&gm, &w, v)
            }
        }
    }

    /// `L = F^2` as a closure-friendly helper.
    pub fn lagrangian(&self, t: f64, x: &[f64], v: &[f64]) -> Result<f64, NormError> {
        let f = self.eval(t, x, v)?;
        Ok(f * f)
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

/// Solves `g0(v/s - W, v/s - W) = 1` for `s > 0` by bracketed bisection and
/// a Newton polish to `1e-12` relative tolerance.
fn zermelo_root(g0: &DMatrix<f64>, wind: &[f64], v: &[f64]) -> Result<f64, NormError> {
    let wn2 = quad(g0, wind);
    if wn2 >= 1.0 {
        return Err(NormError::StrongWind(wn2));
    }
    let n = v.len();
    let vnorm = quad(g0, v).sqrt();
    if vnorm <= 0.0 {
        return Err(NormError::Domain("Zermelo: zero direction".into()));
    }
    let q = |s: f64| -> f64 {
        let mut d = vec![0.0; n];
        for i in 0..n {
            d[i] = v[i] / s - wind[i];
        }
        quad(g0, &d) - 1.0
    };
    // q -> +inf as s -> 0+, q -> g0(W,W) - 1 < 0 as s -> inf.
    let mut lo = vnorm * 1e-6;
    let mut hi = vnorm / (1.0 - wn2.sqrt()) * 2.0;
    let mut guard = 0;
    while q(lo) <= 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 200 {
            return Err(NormError::Bracketing("Zermelo lower bracket".into()));
        }
    }
    guard = 0;
    while q(hi) >= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(NormError::Bracketing("Zermelo upper bracket".into()));
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if q(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * vnorm.max(1.0) {
            break;
        }
    }
    let mut s = 0.5 * (lo + hi);
    // Newton polish on q(s); derivative by central difference is accurate
    // enough at this scale.
    for _ in 0..4 {
        let h = 1e-7 * s;
        let dq = (q(s + h) - q(s - h)) / (2.0 * h);
        if dq.abs() < 1e-300 {
            break;
        }
        let next = s - q(s) / dq;
        if next > lo && next < hi {
            s = next;
        }
    }
    Ok(s)
}

/// Closed-form Randers data `(a, b)` equivalent to a Zermelo pair at a point.
///
/// Kept as the independent cross-check route against the root-finding
/// evaluation.
pub fn zermelo_randers_closed_form(
    g0: &DMatrix<f64>,
    wind: &[f64],
) -> Result<(DMatrix<f64>, DVector<f64>), NormError> {
    let wn2 = quad(g0, wind);
    if wn2 >= 1.0 {
        return Err(NormError::StrongWind(wn2));
    }
    let alpha = 1.0 - wn2;
    let n = g0.nrows();
    let wflat = DVector::from_iterator(n, (0..n).map(|j| {
        (0..n).map(|i| wind[i] * g0[(i, j)]).sum::<f64>()
    }));
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = (alpha * g0[(i, j)] + wflat[i] * wflat[j]) / (alpha * alpha);
        }
    }
    let b = -&wflat / alpha;
    Ok((a, b))
}

/// Constructs the Zermelo spec of a background metric and wind, with the
/// mild-wind guard deferred to evaluation points.
pub fn zermelo_from_data(g0: MatrixField, wind: VectorField) -> Result<FinslerSpec, NormError> {
    let spec = FinslerSpec::ZermeloData { g0, wind };
    spec.validate_shape()?;
    Ok(spec)
}

/// Numeric fundamental tensor: entries `1/2 * mixed second differences` of
/// `L` along coordinate directions.
pub fn numeric_hessian_oracle<F>(
    lagrangian: F,
    v: &[f64],
    cfg: &DiffConfig,
) -> Result<BilinearForm, NormError>
where
    F: Fn(&[f64]) -> Result<f64, FieldError>,
{
    let n = v.len();
    let mut m = DMatrix::zeros(n, n);
    let mut e_i = vec![0.0; n];
    let mut e_j = vec![0.0; n];
    for i in 0..n {
        e_i.iter_mut().for_each(|a| *a = 0.0);
        e_i[i] = 1.0;
        for j in i..n {
            e_j.iter_mut().for_each(|a| *a = 0.0);
            e_j[j] = 1.0;
            let d = directional_derivative(&lagrangian, v, &e_i, Some(&e_j), cfg)?;
            m[(i, j)] = 0.5 * d;
            m[(j, i)] = 0.5 * d;
        }
    }
    Ok(BilinearForm::new(m, 0.0, &[], v))
}

/// Fundamental tensor of the spec at `(t, x, v)`.
///
/// Riemannian, Randers and p-power families use their closed forms; Kropina
/// and Zermelo fall back to the numeric oracle on `L = F^2`.
pub fn fundamental_tensor(
    spec: &FinslerSpec,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<BilinearForm, NormError> {
    if euclid(v) == 0.0 {
        return Err(NormError::Domain("tensor at zero vector".into()));
    }
    let n = spec.arity();
    match spec {
        FinslerSpec::RiemannQuad { g } => {
            let m = g.eval(t, x)?;
            Ok(BilinearForm::new(m, t, x, v))
        }
        FinslerSpec::Randers { a, b } => {
            let am = a.eval(t, x)?;
            let bv = b.eval(t, x)?;
            let alpha2 = quad(&am, v);
            if alpha2 <= 0.0 {
                return Err(NormError::Domain("Randers background degenerate".into()));
            }
            let alpha = alpha2.sqrt();
            let av: Vec<f64> = (0..n)
                .map(|j| (0..n).map(|i| v[i] * am[(i, j)]).sum())
                .collect();
            let f = alpha + bv.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            if f <= 0.0 {
                return Err(NormError::Domain("Randers norm non-positive".into()));
            }
            // g = (F/alpha)(a - a_v (x) a_v / alpha^2) + l (x) l with
            // l = a_v/alpha + b.
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let l_i = av[i] / alpha + bv[i];
                    let l_j = av[j] / alpha + bv[j];
                    m[(i, j)] = f / alpha * (am[(i, j)] - av[i] * av[j] / alpha2) + l_i * l_j;
                }
            }
            Ok(BilinearForm::new(m, t, x, v))
        }
        FinslerSpec::PPower { r, weights } => {
            let rf = *r as f64;
            let phi: f64 = weights
                .iter()
                .zip(v)
                .map(|(w, vi)| w * vi.powi(*r as i32))
                .sum();
            if phi <= 0.0 {
                return Err(NormError::Domain("PPower at zero".into()));
            }
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let gi = weights[i] * v[i].powi(*r as i32 - 1);
                    let gj = weights[j] * v[j].powi(*r as i32 - 1);
                    let mut e = rf * (2.0 / rf - 1.0) * phi.powf(2.0 / rf - 2.0) * gi * gj;
                    if i == j {
                        e += (rf - 1.0)
                            * phi.powf(2.0 / rf - 1.0)
                            * weights[i]
                            * v[i].powi(*r as i32 - 2);
                    }
                    m[(i, j)] = e;
                }
            }
            Ok(BilinearForm::new(m, t, x, v))
        }
        FinslerSpec::Kropina { .. } | FinslerSpec::ZermeloData { .. } => {
            let cfg = DiffConfig::default();
            let lag = |u: &[f64]| {
                spec.lagrangian(t, x, u)
                    .map_err(|e| FieldError::Domain(e.to_string()))
            };
            let mut form = numeric_hessian_oracle(lag, v, &cfg)?;
            form.base_time = t;
            form.base_point = x.to_vec();
            Ok(form)
        }
    }
}

/// Angular metric `h_v(u,w) = g_v(u,w) - g_v(v,u) g_v(v,w) / L(v)`.
///
/// `v` lies in the radical by construction. Errors when `L(v) = 0` (the
/// angular metric is undefined on the cone).
pub fn angular_metric(g: &BilinearForm, v: &[f64], l_v: f64) -> Result<BilinearForm, NormError> {
    if l_v == 0.0 {
        return Err(NormError::Domain(
            "angular metric undefined at L(v) = 0".into(),
        ));
    }
    let n = g.dim();
    let gv = g.lower(v);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = g.matrix[(i, j)] - gv[i] * gv[j] / l_v;
        }
    }
    Ok(BilinearForm::new(
        m,
        g.base_time,
        &g.base_point,
        v,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_field;
    use rand::Rng;
    use rand::SeedableRng;

    fn randers_03(n: usize) -> FinslerSpec {
        let mut b = vec![0.0; n];
        b[0] = 0.3;
        FinslerSpec::Randers {
            a: MatrixField::identity(n, n),
            b: CovectorField::constant(&b, n),
        }
    }

    fn zermelo_05(n: usize) -> FinslerSpec {
        let mut w = vec![0.0; n];
        w[0] = 0.5;
        FinslerSpec::ZermeloData {
            g0: MatrixField::identity(n, n),
            wind: VectorField::constant(&w, n),
        }
    }

    #[test]
    fn finsler_eval_examples() {
        let euclid = FinslerSpec::euclidean(2);
        assert!((euclid.eval(0.0, &[0.0, 0.0], &[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-14);

        let randers = randers_03(2);
        assert!((randers.eval(0.0, &[0.0, 0.0], &[1.0, 0.0]).unwrap() - 1.3).abs() < 1e-14);

        let zermelo = zermelo_05(2);
        let z = zermelo.eval(0.0, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((z - 2.0 / 3.0).abs() < 1e-11, "z = {z}");
    }

    #[test]
    fn zermelo_examples_and_closed_form_cross_check() {
        let zermelo = zermelo_05(2);
        let z = zermelo.eval(0.0, &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((z - 2.0 / 3.0_f64.sqrt()).abs() < 1e-11, "z = {z}");

        // No wind reduces to the background norm.
        let nowind = FinslerSpec::ZermeloData {
            g0: MatrixField::identity(2, 2),
            wind: VectorField::constant(&[0.0, 0.0], 2),
        };
        assert!((nowind.eval(0.0, &[0.0, 0.0], &[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-11);

        // Root-find agrees with the closed Randers formula of the pair.
        let g0 = DMatrix::identity(2, 2);
        let (a, b) = zermelo_randers_closed_form(&g0, &[0.5, 0.0]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let v: [f64; 2] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            if v[0].abs() + v[1].abs() < 1e-3 {
                continue;
            }
            let via_root = zermelo.eval(0.0, &[0.0, 0.0], &v).unwrap();
            let alpha = (v[0] * (a[(0, 0)] * v[0] + a[(0, 1)] * v[1])
                + v[1] * (a[(1, 0)] * v[0] + a[(1, 1)] * v[1]))
                .sqrt();
            let closed = alpha + b[0] * v[0] + b[1] * v[1];
            assert!(
                (via_root - closed).abs() <= 1e-10 * closed.max(1.0),
                "root {via_root} vs closed {closed}"
            );
        }

        // Strong wind rejected.
        let strong = FinslerSpec::ZermeloData {
            g0: MatrixField::identity(2, 2),
            wind: VectorField::constant(&[1.2, 0.0], 2),
        };
        assert!(matches!(
            strong.eval(0.0, &[0.0, 0.0], &[1.0, 0.0]),
            Err(NormError::StrongWind(_))
        ));
    }

    #[test]
    fn hessian_oracle_examples() {
        let cfg = DiffConfig::default();
        let l2 = |v: &[f64]| Ok(v.iter().map(|a| a * a).sum());
        let g = numeric_hessian_oracle(l2, &[0.7, -0.3], &cfg).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g.matrix[(i, j)] - want).abs() <= 1e-6);
            }
        }

        let mink = |v: &[f64]| Ok(v[0] * v[0] - v[1] * v[1] - v[2] * v[2]);
        let g = numeric_hessian_oracle(mink, &[1.0, 0.2, 0.1], &cfg).unwrap();
        let want = [1.0, -1.0, -1.0];
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { want[i] } else { 0.0 };
                assert!((g.matrix[(i, j)] - w).abs() <= 1e-6);
            }
        }

        // L = (v1^4 + v2^4)^(1/2) at (1,0): the raw Hessian entry is 2, so
        // the tensor entry (with the 1/2 in the definition) is 1.
        let quart = |v: &[f64]| Ok((v[0].powi(4) + v[1].powi(4)).sqrt());
        let g = numeric_hessian_oracle(quart, &[1.0, 0.0], &cfg).unwrap();
        assert!((g.matrix[(0, 0)] - 1.0).abs() <= 1e-4, "g11 = {}", g.matrix[(0, 0)]);
    }

    #[test]
    fn fundamental_tensor_examples() {
        // Quadratic case returns the background matrix.
        let zero = crate::fields::FieldExpr::constant(0.0, 2);
        let g_expr = MatrixField {
            n: 2,
            entries: vec![
                parse_field("1 + x1^2", 2).unwrap(),
                zero.clone(),
                zero,
                parse_field("2", 2).unwrap(),
            ],
        };
        let spec = FinslerSpec::RiemannQuad { g: g_expr };
        let g = fundamental_tensor(&spec, 0.0, &[0.5, 0.0], &[1.0, 2.0]).unwrap();
        assert!((g.matrix[(0, 0)] - 1.25).abs() < 1e-14);
        assert!((g.matrix[(1, 1)] - 2.0).abs() < 1e-14);

        // Randers 2-homogeneity identity g_v(v,v) = F(v)^2.
        let randers = randers_03(2);
        let v = [1.0, 0.0];
        let g = fundamental_tensor(&randers, 0.0, &[0.0, 0.0], &v).unwrap();
        assert!((g.pair(&v, &v) - 1.69).abs() <= 1e-12);

        // PPower closed form vs numeric oracle.
        let pp = FinslerSpec::PPower {
            r: 4,
            weights: vec![1.0, 1.0],
        };
        let v = [1.0, 1.0];
        let closed = fundamental_tensor(&pp, 0.0, &[0.0, 0.0], &v).unwrap();
        let lag = |u: &[f64]| {
            pp.lagrangian(0.0, &[0.0, 0.0], u)
                .map_err(|e| FieldError::Domain(e.to_string()))
        };
        let oracle = numeric_hessian_oracle(lag, &v, &DiffConfig::default()).unwrap();
        let diff = (&closed.matrix - &oracle.matrix).norm() / oracle.matrix.norm();
        assert!(diff <= 1e-6, "relative Frobenius error {diff}");
    }

    #[test]
    fn angular_metric_examples() {
        // Minkowski diag(1,-1,-1) at v = (1,0,0), L(v) = 1.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, -1.0]));
        let g = BilinearForm::new(m, 0.0, &[], &[1.0, 0.0, 0.0]);
        let h = angular_metric(&g, &[1.0, 0.0, 0.0], 1.0).unwrap();
        let want = [0.0, -1.0, -1.0];
        for i in 0..3 {
            assert!((h.matrix[(i, i)] - want[i]).abs() < 1e-14);
        }

        // Euclidean identity at v = (1,0): projection orthogonal to v.
        let g = BilinearForm::new(DMatrix::identity(2, 2), 0.0, &[], &[1.0, 0.0]);
        let h = angular_metric(&g, &[1.0, 0.0], 1.0).unwrap();
        assert!((h.matrix[(0, 0)]).abs() < 1e-14);
        assert!((h.matrix[(1, 1)] - 1.0).abs() < 1e-14);

        // Radical property h_v(v,v) = 0 for arbitrary g.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut m = DMatrix::zeros(3, 3);
            for i in 0..3 {
                for j in i..3 {
                    let e = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = e;
                    m[(j, i)] = e;
                }
            }
            let v = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let g = BilinearForm::new(m, 0.0, &[], &v);
            let lv = g.pair(&v, &v);
            if lv.abs() < 1e-3 {
                continue;
            }
            let h = angular_metric(&g, &v, lv).unwrap();
            let hv = h.lower(&v);
            let scale = h.frobenius().max(1e-30);
            assert!(euclid(&hv) <= 1e-9 * scale);
        }
    }

    #[test]
    fn signature_examples() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, -1.0]));
        let g = BilinearForm::new(m, 0.0, &[], &[1.0, 0.0, 0.0]);
        assert_eq!(
            signature(&g, 1e-9),
            Signature {
                n_pos: 1,
                n_neg: 2,
                n_zero: 0
            }
        );

        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, -1.0]));
        let g = BilinearForm::new(m, 0.0, &[], &[1.0, 0.0, 0.0]);
        assert_eq!(
            signature(&g, 1e-9),
            Signature {
                n_pos: 1,
                n_neg: 1,
                n_zero: 1
            }
        );

        let g = BilinearForm::new(DMatrix::identity(2, 2), 0.0, &[], &[1.0, 0.0]);
        assert_eq!(
            signature(&g, 1e-9),
            Signature {
                n_pos: 2,
                n_neg: 0,
                n_zero: 0
            }
        );
    }

    #[test]
    fn homogeneity_property() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let specs: Vec<FinslerSpec> = vec![
            FinslerSpec::euclidean(2),
            randers_03(2),
            FinslerSpec::PPower {
                r: 4,
                weights: vec![1.0, 2.0],
            },
            zermelo_05(2),
            FinslerSpec::Kropina {
                f0: Box::new(FinslerSpec::euclidean(2)),
                beta: CovectorField::constant(&[1.0, 0.0], 2),
            },
        ];
        let lambdas = [0.5, 2.0, 10.0];
        let mut checked = 0usize;
        while checked < 1000 {
            let spec = &specs[rng.gen_range(0..specs.len())];
            let v = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            if euclid(&v) < 1e-3 {
                continue;
            }
            let f = match spec.eval(0.0, &[0.0, 0.0], &v) {
                Ok(f) => f,
                Err(_) => continue,
            };
            for lam in lambdas {
                let scaled = [lam * v[0], lam * v[1]];
                let fs = spec.eval(0.0, &[0.0, 0.0], &scaled).unwrap();
                assert!(
                    (fs - lam * f).abs() <= 1e-10 * (lam * f).abs().max(1e-30),
                    "homogeneity broke: {fs} vs {}",
                    lam * f
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn two_homogeneity_and_derivative_identities() {
        // g_v(v,v) = F(v)^2 and dL_v(w) = 2 g_v(v,w).
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let specs = [randers_03(2), zermelo_05(2)];
        let cfg = DiffConfig::default();
        for spec in &specs {
            for _ in 0..100 {
                let v = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                if euclid(&v) < 0.3 {
                    continue;
                }
                let f = match spec.eval(0.0, &[0.0, 0.0], &v) {
                    Ok(f) => f,
                    Err(_) => continue,
                };
                let g = fundamental_tensor(spec, 0.0, &[0.0, 0.0], &v).unwrap();
                let gvv = g.pair(&v, &v);
                assert!(
                    (gvv - f * f).abs() <= 1e-6 * (f * f).max(1e-30),
                    "g(v,v) = {gvv}, F^2 = {}",
                    f * f
                );
                let w = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let lag = |u: &[f64]| {
                    spec.lagrangian(0.0, &[0.0, 0.0], u)
                        .map_err(|e| FieldError::Domain(e.to_string()))
                };
                let dl = directional_derivative(lag, &v, &w, None, &cfg).unwrap();
                let gvw = 2.0 * g.pair(&v, &w);
                assert!(
                    (dl - gvw).abs() <= 1e-5 * gvw.abs().max(1.0),
                    "dL = {dl}, 2g(v,w) = {gvw}"
                );
            }
        }
    }

    #[test]
    fn closed_forms_match_oracle_per_family() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let cfg = DiffConfig::default();
        let families = [
            FinslerSpec::euclidean(2),
            randers_03(2),
            FinslerSpec::PPower {
                r: 4,
                weights: vec![1.0, 1.5],
            },
        ];
        for spec in &families {
            let mut done = 0usize;
            while done < 500 {
                let v = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                if euclid(&v) < 0.3 {
                    continue;
                }
                // Keep away from p-power axes where the quartic degenerates.
                if matches!(spec, FinslerSpec::PPower { .. })
                    && (v[0].abs() < 0.2 || v[1].abs() < 0.2)
                {
                    continue;
                }
                let closed = match fundamental_tensor(spec, 0.0, &[0.0, 0.0], &v) {
                    Ok(g) => g,
                    Err(_) => continue,
                };
                let lag = |u: &[f64]| {
                    spec.lagrangian(0.0, &[0.0, 0.0], u)
                        .map_err(|e| FieldError::Domain(e.to_string()))
                };
                let oracle = numeric_hessian_oracle(lag, &v, &cfg).unwrap();
                let rel = (&closed.matrix - &oracle.matrix).norm() / oracle.matrix.norm();
                assert!(rel <= 1e-6, "family mismatch {rel}");
                done += 1;
            }
        }
    }

    #[test]
    fn valid_specs_have_positive_definite_tensors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let specs = [FinslerSpec::euclidean(2), randers_03(2), zermelo_05(2)];
        for spec in &specs {
            let mut done = 0;
            while done < 300 {
                let v = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                if euclid(&v) < 0.3 {
                    continue;
                }
                let g = match fundamental_tensor(spec, 0.0, &[0.0, 0.0], &v) {
                    Ok(g) => g,
                    Err(_) => continue,
                };
                let sig = signature(&g, default_signature_tol(&g));
                assert_eq!(
                    sig,
                    Signature {
                        n_pos: 2,
                        n_neg: 0,
                        n_zero: 0
                    },
                    "non-definite tensor for v = {v:?}"
                );
                done += 1;
            }
        }
    }
}
