//! Time-dependent Zermelo navigation.
//!
//! A navigation problem is posed by a (possibly time-dependent) Finsler
//! metric `Z` on spatial `R^n` whose indicatrix is the set of attainable
//! velocities. Time-minimizing trajectories are lightlike cone geodesics of
//! the triple `(dt, d/dt, Z)`; the solver shoots a fan of lightlike
//! directions and refines brackets on the initial heading. A crude
//! dynamic-programming front propagation serves as the independent oracle.

use rayon::prelude::*;
use thiserror::Error;

use crate::cones::{classify, lightlike_directions, CausalClass, ConeError, ConeTriple};
use crate::fields::FieldError;
use crate::geodesics::{
    conjugate_scan, integrate_geodesic, ConjugateReport, GeodesicError, GeodesicSolution,
    IntegratorConfig, PhaseState,
};
use crate::norms::{FinslerSpec, NormError};
use crate::spacetimes::{ConditionReport, LorentzFinslerSpec, SpacetimeError};

#[derive(Debug, Clone, Error)]
pub enum ZermeloError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no fan member approaches the target within the capture radius by the horizon")]
    NoCandidate,
    #[error("target not reached by the oracle within the horizon")]
    NotReached,
    #[error("oracle CFL violated: dt = {dt} > dx / max speed = {bound}")]
    CflViolation { dt: f64, bound: f64 },
}

/// Navigation problem: wind spec, departure event, spatial target.
#[derive(Debug, Clone)]
pub struct ZermeloScenario {
    /// Attainable-velocity metric on spatial `R^n`, time-dependent allowed.
    pub z: FinslerSpec,
    pub t0: f64,
    pub x_start: Vec<f64>,
    pub target: Vec<f64>,
    /// Maximum search time (relative to `t0`).
    pub horizon: f64,
}

impl ZermeloScenario {
    pub fn dim(&self) -> usize {
        self.z.arity()
    }

    /// Shape checks plus sampled positivity of `Z` over the time horizon.
    pub fn validate(&self) -> Result<(), ZermeloError> {
        let n = self.dim();
        if self.x_start.len() != n || self.target.len() != n {
            return Err(ZermeloError::InvalidScenario(
                "start/target dimension mismatch".into(),
            ));
        }
        if self.horizon <= 0.0 {
            return Err(ZermeloError::InvalidScenario("horizon must be > 0".into()));
        }
        if self.x_start == self.target {
            return Err(ZermeloError::InvalidScenario(
                "target equals start".into(),
            ));
        }
        self.z.validate_shape()?;
        // Sampled invariants along the time horizon at start/target and
        // sampled directions.
        for k in 0..5 {
            let t = self.t0 + self.horizon * k as f64 / 4.0;
            for x in [&self.x_start, &self.target] {
                self.z.validate_at(t, x)?;
                for dir in crate::cones::unit_directions(n, 8) {
                    let z = self.z.eval(t, x, &dir)?;
                    if !(z > 0.0) {
                        return Err(ZermeloError::InvalidScenario(format!(
                            "Z not positive at t={t}, x={x:?}, v={dir:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The cone triple `(dt, d/dt, Z)` and its cone-triple metric.
    pub fn cone_spec(&self) -> (ConeTriple, LorentzFinslerSpec) {
        let triple = ConeTriple::time_product(self.z.clone());
        let spec = LorentzFinslerSpec::TripleG {
            triple: triple.clone(),
        };
        (triple, spec)
    }
}

/// Shooting-solver knobs.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub fan_size: usize,
    /// Terminal miss tolerance, relative to the start-target distance.
    pub tol: f64,
    pub max_iters: usize,
    /// RK4 steps per trajectory.
    pub steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            fan_size: 64,
            tol: 1e-8,
            max_iters: 60,
            steps: 2000,
        }
    }
}

/// One converged shooting candidate.
#[derive(Debug, Clone)]
pub struct Candidate {
    /// Initial unit spatial heading.
    pub heading: Vec<f64>,
    pub arrival_time: f64,
    pub miss: f64,
}

/// Sample of the winning trajectory, in CSV column order.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: Vec<f64>,
    /// Unit spatial heading at the sample.
    pub heading: Vec<f64>,
    pub z_value: f64,
    pub null_residual: f64,
}

/// Solution of a navigation problem.
#[derive(Debug, Clone)]
pub struct NavigationResult {
    pub arrival_time: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    pub terminal_miss: f64,
    pub conjugate: ConjugateReport,
    pub candidates: Vec<Candidate>,
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Arrival-time functional of a sampled spatial path: integrates
/// `dt/dsigma = Z(t, beta(sigma), beta'(sigma))` by RK4 over the path
/// parameter. Reparametrization-invariant by the 1-homogeneity of `Z`.
pub fn arrival_time(z: &FinslerSpec, path: &[Vec<f64>], t0: f64) -> Result<f64, ZermeloError> {
    Ok(lift_to_lightlike(z, path, t0)?
        .last()
        .map(|q| q[0] - t0)
        .unwrap_or(0.0))
}

/// Unique future-directed lightlike lift `(t(sigma), beta(sigma))` of a
/// spatial path; returns one spacetime sample per path node.
pub fn lift_to_lightlike(
    z: &FinslerSpec,
    path: &[Vec<f64>],
    t0: f64,
) -> Result<Vec<Vec<f64>>, ZermeloError> {
    if path.len() < 2 {
        return Err(ZermeloError::InvalidScenario(
            "path needs at least 2 samples".into(),
        ));
    }
    let n = z.arity();
    let mut t = t0;
    let mut out = Vec::with_capacity(path.len());
    let mut first = vec![t0];
    first.extend_from_slice(&path[0]);
    out.push(first);
    let substeps = 8;
    for seg in path.windows(2) {
        let delta: Vec<f64> = seg[1].iter().zip(&seg[0]).map(|(b, a)| b - a).collect();
        if euclid(&delta) == 0.0 {
            return Err(ZermeloError::InvalidScenario(
                "stationary path segment (beta' = 0)".into(),
            ));
        }
        let h = 1.0 / substeps as f64;
        for k in 0..substeps {
            let sigma0 = k as f64 * h;
            let at = |sigma: f64, tv: f64| -> Result<f64, ZermeloError> {
                let x: Vec<f64> = (0..n)
                    .map(|i| seg[0][i] + sigma * delta[i])
                    .collect();
                Ok(z.eval(tv, &x, &delta)?)
            };
            let k1 = at(sigma0, t)?;
            let k2 = at(sigma0 + 0.5 * h, t + 0.5 * h * k1)?;
            let k3 = at(sigma0 + 0.5 * h, t + 0.5 * h * k2)?;
            let k4 = at(sigma0 + h, t + h * k3)?;
            t += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let mut row = vec![t];
        row.extend_from_slice(&seg[1]);
        out.push(row);
    }
    Ok(out)
}

struct Approach {
    miss: f64,
    /// Signed transverse offset (2-D only; `miss` elsewhere).
    signed: f64,
    t_at: f64,
    s_at: f64,
    /// Index of the segment where the closest approach happens.
    seg: usize,
    frac: f64,
}

fn closest_approach(sol: &GeodesicSolution, target: &[f64]) -> Option<Approach> {
    let n = target.len();
    let mut best: Option<Approach> = None;
    for (k, w) in sol.samples.windows(2).enumerate() {
        let a = &w[0].q[1..];
        let b = &w[1].q[1..];
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            num += (target[i] - a[i]) * (b[i] - a[i]);
            den += (b[i] - a[i]) * (b[i] - a[i]);
        }
        if den == 0.0 {
            continue;
        }
        let frac = (num / den).clamp(0.0, 1.0);
        let mut d2 = 0.0;
        let mut near = vec![0.0; n];
        for i in 0..n {
            near[i] = a[i] + frac * (b[i] - a[i]);
            d2 += (near[i] - target[i]).powi(2);
        }
        let miss = d2.sqrt();
        if best.as_ref().map_or(true, |bst| miss < bst.miss) {
            let t_at = w[0].q[0] + frac * (w[1].q[0] - w[0].q[0]);
            let s_at = w[0].s + frac * (w[1].s - w[0].s);
            let signed = if n == 2 {
                let u = [w[0].p[1], w[0].p[2]];
                let r = [target[0] - near[0], target[1] - near[1]];
                u[0] * r[1] - u[1] * r[0]
            } else {
                miss
            };
            best = Some(Approach {
                miss,
                signed,
                t_at,
                s_at,
                seg: k,
                frac,
            });
        }
    }
    best
}

fn integrate_heading(
    spec: &LorentzFinslerSpec,
    triple: &ConeTriple,
    scenario: &ZermeloScenario,
    heading: &[f64],
    cfg: &SolverConfig,
) -> Result<GeodesicSolution, ZermeloError> {
    let n = scenario.dim();
    let d = n + 1;
    let f = scenario.z.eval(scenario.t0, &scenario.x_start, heading)?;
    let mut v0 = vec![0.0; d];
    v0[0] = f;
    v0[1..].copy_from_slice(heading);
    let _ = triple;
    let mut q0 = vec![scenario.t0];
    q0.extend_from_slice(&scenario.x_start);
    let icfg = IntegratorConfig {
        steps: cfg.steps,
        project_null: true,
        stop_time: Some(scenario.t0 + scenario.horizon),
        renormalize: true,
    };
    let s_max = 4.0 * scenario.horizon;
    Ok(integrate_geodesic(
        spec,
        &PhaseState {
            q: q0,
            p: v0,
            s: 0.0,
        },
        s_max,
        &icfg,
    )?)
}

fn heading_from_angle(theta: f64) -> Vec<f64> {
    vec![theta.cos(), theta.sin()]
}

/// Solves the navigation problem by cone-geodesic shooting.
///
/// A fan of lightlike launches brackets the target; brackets are refined by
/// a secant iteration on the initial heading angle (2-D; a damped
/// fixed-point sweep of the two spherical angles in 3-D). The minimal
/// converged arrival wins and is scanned for conjugate points.
pub fn solve_navigation(
    scenario: &ZermeloScenario,
    cfg: &SolverConfig,
) -> Result<NavigationResult, ZermeloError> {
    scenario.validate()?;
    let n = scenario.dim();
    let (triple, spec) = scenario.cone_spec();
    let scale = euclid(
        &scenario
            .target
            .iter()
            .zip(&scenario.x_start)
            .map(|(a, b)| a - b)
            .collect::<Vec<f64>>(),
    );
    let tol_abs = cfg.tol * scale;
    let fan = lightlike_directions(&triple, scenario.t0, &scenario.x_start, cfg.fan_size)?;
    let headings: Vec<Vec<f64>> = fan
        .iter()
        .map(|v| {
            let sp = &v[1..];
            let nm = euclid(sp);
            sp.iter().map(|c| c / nm).collect()
        })
        .collect();
    let shots: Vec<Option<Approach>> = headings
        .par_iter()
        .map(|h| {
            integrate_heading(&spec, &triple, scenario, h, cfg)
                .ok()
                .and_then(|sol| closest_approach(&sol, &scenario.target))
        })
        .collect();

    // Fan angular spacing and capture radius.
    let spacing = match n {
        1 => std::f64::consts::PI,
        2 => 2.0 * std::f64::consts::PI / cfg.fan_size as f64,
        _ => (4.0 * std::f64::consts::PI / cfg.fan_size as f64).sqrt(),
    };
    let capture = 2.0 * spacing * scenario.horizon;

    let mut candidates: Vec<Candidate> = Vec::new();
    match n {
        1 => {
            for (h, shot) in headings.iter().zip(&shots) {
                if let Some(ap) = shot {
                    if ap.miss <= capture.min(scale) {
                        candidates.push(Candidate {
                            heading: h.clone(),
                            arrival_time: ap.t_at - scenario.t0,
                            miss: ap.miss,
                        });
                    }
                }
            }
        }
        2 => {
            let k = cfg.fan_size;
            for i in 0..k {
                let j = (i + 1) % k;
                let (a, b) = match (&shots[i], &shots[j]) {
                    (Some(a), Some(b)) => (a, b),
                    _ => continue,
                };
                if a.miss.min(b.miss) > capture {
                    continue;
                }
                if a.signed.signum() == b.signed.signum() {
                    continue;
                }
                let th_a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                let th_b = th_a + spacing;
                if let Some(c) = refine_secant(scenario, &spec, &triple, cfg, th_a, a.signed, th_b, b.signed, tol_abs)? {
                    candidates.push(c);
                }
            }
        }
        _ => {
            // 3-D: start damped Newton sweeps from the best fan members.
            let mut order: Vec<usize> = (0..headings.len()).collect();
            order.sort_by(|&i, &j| {
                let mi = shots[i].as_ref().map_or(f64::INFINITY, |a| a.miss);
                let mj = shots[j].as_ref().map_or(f64::INFINITY, |a| a.miss);
                mi.partial_cmp(&mj).unwrap()
            });
            for &i in order.iter().take(4) {
                let ap = match &shots[i] {
                    Some(a) if a.miss <= capture => a,
                    _ => continue,
                };
                let _ = ap;
                if let Some(c) = refine_newton_3d(scenario, &spec, &triple, cfg, &headings[i], tol_abs)? {
                    candidates.push(c);
                }
            }
        }
    }
    candidates.retain(|c| c.miss <= tol_abs.max(1e-12 * scale));
    // Deduplicate near-identical headings.
    candidates.sort_by(|a, b| a.arrival_time.partial_cmp(&b.arrival_time).unwrap());
    let mut unique: Vec<Candidate> = Vec::new();
    for c in candidates {
        let dup = unique.iter().any(|u| {
            u.heading
                .iter()
                .zip(&c.heading)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                < 1e-6
        });
        if !dup {
            unique.push(c);
        }
    }
    let winner = unique.first().cloned().ok_or(ZermeloError::NoCandidate)?;

    // Re-integrate the winner and assemble the trajectory up to arrival.
    let sol = integrate_heading(&spec, &triple, scenario, &winner.heading, cfg)?;
    let ap = closest_approach(&sol, &scenario.target).ok_or(ZermeloError::NoCandidate)?;
    let mut trajectory = Vec::new();
    for st in sol.samples.iter().take(ap.seg + 2) {
        let sp = &st.p[1..];
        let nm = euclid(sp);
        let heading: Vec<f64> = sp.iter().map(|c| c / nm).collect();
        let z_value = scenario.z.eval(st.q[0], &st.q[1..], &heading)?;
        let l = crate::spacetimes::lorentz_eval(&spec, st.q[0], &st.q[1..], &st.p)?;
        trajectory.push(TrajectoryPoint {
            t: st.q[0],
            x: st.q[1..].to_vec(),
            heading,
            z_value,
            null_residual: l.abs(),
        });
    }
    // Replace the last node by the interpolated arrival point.
    if let Some(last) = trajectory.last_mut() {
        let w0 = &sol.samples[ap.seg];
        let w1 = &sol.samples[ap.seg + 1];
        last.t = ap.t_at;
        for i in 0..n {
            last.x[i] = w0.q[1 + i] + ap.frac * (w1.q[1 + i] - w0.q[1 + i]);
        }
    }
    // Conjugate scan along the winning geodesic up to arrival.
    let f = scenario
        .z
        .eval(scenario.t0, &scenario.x_start, &winner.heading)?;
    let mut v0 = vec![f];
    v0.extend_from_slice(&winner.heading);
    let mut q0 = vec![scenario.t0];
    q0.extend_from_slice(&scenario.x_start);
    let icfg = IntegratorConfig {
        steps: cfg.steps,
        project_null: true,
        stop_time: None,
        renormalize: false,
    };
    let conjugate = conjugate_scan(&spec, &q0, &v0, ap.s_at, &icfg)?;

    Ok(NavigationResult {
        arrival_time: ap.t_at - scenario.t0,
        trajectory,
        terminal_miss: ap.miss,
        conjugate,
        candidates: unique,
    })
}

#[allow(clippy::too_many_arguments)]
fn refine_secant(
    scenario: &ZermeloScenario,
    spec: &LorentzFinslerSpec,
    triple: &ConeTriple,
    cfg: &SolverConfig,
    mut th_a: f64,
    mut m_a: f64,
    mut th_b: f64,
    mut m_b: f64,
    tol_abs: f64,
) -> Result<Option<Candidate>, ZermeloError> {
    let eval = |theta: f64| -> Result<Option<Approach>, ZermeloError> {
        let h = heading_from_angle(theta);
        let sol = integrate_heading(spec, triple, scenario, &h, cfg)?;
        Ok(closest_approach(&sol, &scenario.target))
    };
    let mut best: Option<(f64, Approach)> = None;
    for _ in 0..cfg.max_iters {
        let denom = m_b - m_a;
        let theta = if denom.abs() < 1e-300 {
            0.5 * (th_a + th_b)
        } else {
            let t = th_b - m_b * (th_b - th_a) / denom;
            if (t - th_a).signum() != (th_b - t).signum() {
                0.5 * (th_a + th_b)
            } else {
                t
            }
        };
        let ap = match eval(theta)? {
            Some(a) => a,
            None => return Ok(None),
        };
        let better = best
            .as_ref()
            .map_or(true, |(_, b)| ap.miss < b.miss);
        if better {
            best = Some((theta, Approach { ..ap }));
        }
        let (theta_best, ref ap_best) = *best.as_ref().unwrap();
        if ap_best.miss <= tol_abs {
            return Ok(Some(Candidate {
                heading: heading_from_angle(theta_best),
                arrival_time: ap_best.t_at - scenario.t0,
                miss: ap_best.miss,
            }));
        }
        // Maintain the sign bracket.
        if ap.signed.signum() == m_a.signum() {
            th_a = theta;
            m_a = ap.signed;
        } else {
            th_b = theta;
            m_b = ap.signed;
        }
    }
    Ok(best.map(|(theta, ap)| Candidate {
        heading: heading_from_angle(theta),
        arrival_time: ap.t_at - scenario.t0,
        miss: ap.miss,
    }))
}

fn refine_newton_3d(
    scenario: &ZermeloScenario,
    spec: &LorentzFinslerSpec,
    triple: &ConeTriple,
    cfg: &SolverConfig,
    start: &[f64],
    tol_abs: f64,
) -> Result<Option<Candidate>, ZermeloError> {
    // Spherical angles of the heading.
    let mut phi = start[1].atan2(start[0]);
    let mut psi = start[2].asin().clamp(-1.4, 1.4);
    let heading = |phi: f64, psi: f64| -> Vec<f64> {
        vec![psi.cos() * phi.cos(), psi.cos() * phi.sin(), psi.sin()]
    };
    let miss_vec = |phi: f64, psi: f64| -> Result<Option<(Vec<f64>, Approach)>, ZermeloError> {
        let h = heading(phi, psi);
        let sol = integrate_heading(spec, triple, scenario, &h, cfg)?;
        let ap = match closest_approach(&sol, &scenario.target) {
            Some(a) => a,
            None => return Ok(None),
        };
        // Transverse components of target - x(s*) orthogonal to the flow.
        let w0 = &sol.samples[ap.seg];
        let u = &w0.p[1..];
        let un = euclid(u);
        let udir: Vec<f64> = u.iter().map(|c| c / un).collect();
        let near: Vec<f64> = (0..3)
            .map(|i| {
                w0.q[1 + i] + ap.frac * (sol.samples[ap.seg + 1].q[1 + i] - w0.q[1 + i])
            })
            .collect();
        let mut r: Vec<f64> = (0..3).map(|i| scenario.target[i] - near[i]).collect();
        let proj: f64 = r.iter().zip(&udir).map(|(a, b)| a * b).sum();
        for i in 0..3 {
            r[i] -= proj * udir[i];
        }
        Ok(Some((r, ap)))
    };
    let fd = 1e-6;
    let mut best: Option<(f64, f64, Approach)> = None;
    for _ in 0..cfg.max_iters {
        let (r0, ap) = match miss_vec(phi, psi)? {
            Some(v) => v,
            None => return Ok(None),
        };
        if best.as_ref().map_or(true, |(_, _, b)| ap.miss < b.miss) {
            best = Some((phi, psi, Approach { ..ap }));
        }
        if ap.miss <= tol_abs {
            let (bp, bs, ref bap) = *best.as_ref().unwrap();
            return Ok(Some(Candidate {
                heading: heading(bp, bs),
                arrival_time: bap.t_at - scenario.t0,
                miss: bap.miss,
            }));
        }
        // Two-angle finite-difference Jacobian of the 3-vector residual,
        // reduced to the two dominant transverse components.
        let (rp, _) = match miss_vec(phi + fd, psi)? {
            Some(v) => v,
            None => return Ok(None),
        };
        let (rq, _) = match miss_vec(phi, psi + fd)? {
            Some(v) => v,
            None => return Ok(None),
        };
        // Pick the two coordinates with the largest residual magnitude.
        let mut idx = [0usize, 1usize];
        let mut mags: Vec<(f64, usize)> =
            r0.iter().enumerate().map(|(i, c)| (c.abs(), i)).collect();
        mags.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        idx[0] = mags[0].1;
        idx[1] = mags[1].1;
        let j = nalgebra::Matrix2::new(
            (rp[idx[0]] - r0[idx[0]]) / fd,
            (rq[idx[0]] - r0[idx[0]]) / fd,
            (rp[idx[1]] - r0[idx[1]]) / fd,
            (rq[idx[1]] - r0[idx[1]]) / fd,
        );
        let rhs = nalgebra::Vector2::new(r0[idx[0]], r0[idx[1]]);
        let step = match j.lu().solve(&rhs) {
            Some(s) => s,
            None => return Ok(best.map(|(bp, bs, bap)| Candidate {
                heading: heading(bp, bs),
                arrival_time: bap.t_at - scenario.t0,
                miss: bap.miss,
            })),
        };
        // Damped update: residual decreases toward the target.
        let damp = 1.0_f64.min(0.5 * spreading_guard(step.norm()));
        phi += damp * step[0];
        psi = (psi + damp * step[1]).clamp(-1.5, 1.5);
    }
    Ok(best.map(|(bp, bs, bap)| Candidate {
        heading: heading(bp, bs),
        arrival_time: bap.t_at - scenario.t0,
        miss: bap.miss,
    }))
}

fn spreading_guard(step: f64) -> f64 {
    if step > 0.5 {
        0.5 / step
    } else {
        2.0
    }
}

/// Isochrone fronts: spatial positions of a `fan_size`-member lightlike fan
/// at each requested time.
pub fn isochrones(
    scenario: &ZermeloScenario,
    times: &[f64],
    fan_size: usize,
    steps: usize,
) -> Result<Vec<Vec<Vec<f64>>>, ZermeloError> {
    scenario.validate()?;
    if times.is_empty() {
        return Ok(vec![]);
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted[0] <= scenario.t0 || *sorted.last().unwrap() > scenario.t0 + scenario.horizon {
        return Err(ZermeloError::InvalidScenario(
            "isochrone times must lie in (t0, t0 + horizon]".into(),
        ));
    }
    let (triple, spec) = scenario.cone_spec();
    let fan = lightlike_directions(&triple, scenario.t0, &scenario.x_start, fan_size)?;
    let n = scenario.dim();
    let t_end = *sorted.last().unwrap();
    let mut q0 = vec![scenario.t0];
    q0.extend_from_slice(&scenario.x_start);
    let icfg = IntegratorConfig {
        steps,
        project_null: true,
        stop_time: Some(t_end + 1e-9),
        renormalize: true,
    };
    let s_max = 4.0 * (t_end - scenario.t0).max(scenario.horizon * 0.1);
    let trajectories: Vec<GeodesicSolution> = fan
        .par_iter()
        .map(|v0| {
            integrate_geodesic(
                &spec,
                &PhaseState {
                    q: q0.clone(),
                    p: v0.clone(),
                    s: 0.0,
                },
                s_max,
                &icfg,
            )
        })
        .collect::<Result<_, _>>()?;
    let mut fronts = Vec::with_capacity(times.len());
    for &tau in times {
        let mut front = Vec::with_capacity(fan.len());
        for sol in &trajectories {
            // t is strictly increasing along the lift.
            let mut hit = None;
            for w in sol.samples.windows(2) {
                if w[0].q[0] <= tau && tau <= w[1].q[0] {
                    let f = (tau - w[0].q[0]) / (w[1].q[0] - w[0].q[0]).max(1e-300);
                    let x: Vec<f64> = (0..n)
                        .map(|i| w[0].q[1 + i] + f * (w[1].q[1 + i] - w[0].q[1 + i]))
                        .collect();
                    hit = Some(x);
                    break;
                }
            }
            if let Some(x) = hit {
                front.push(x);
            }
        }
        fronts.push(front);
    }
    Ok(fronts)
}

/// Grid/heading configuration for the dynamic-programming oracle.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub dx: f64,
    pub dt: f64,
    /// Heading count `m`.
    pub headings: usize,
    pub bbox_lo: Vec<f64>,
    pub bbox_hi: Vec<f64>,
}

/// Independent brute-force first-arrival oracle.
///
/// Time-stepped reachable-set propagation on a cell grid: every `dt` the
/// cells with arrival label `T <= t` expand one hop per heading, with the
/// hop charged the true `Z`-time of the realized center-to-center
/// displacement. Returns the first multiple of `dt` at which the target
/// cell is reached. Error `O(dx + dt + 1/m)` plus the hop-direction
/// quantization of the cell graph.
pub fn dp_oracle(scenario: &ZermeloScenario, cfg: &OracleConfig) -> Result<f64, ZermeloError> {
    scenario.validate()?;
    let n = scenario.dim();
    if cfg.bbox_lo.len() != n || cfg.bbox_hi.len() != n {
        return Err(ZermeloError::InvalidScenario("bbox dimension".into()));
    }
    // Grid shape.
    let mut shape = vec![0usize; n];
    for i in 0..n {
        let span = cfg.bbox_hi[i] - cfg.bbox_lo[i];
        if span <= 0.0 {
            return Err(ZermeloError::InvalidScenario("empty bbox".into()));
        }
        shape[i] = (span / cfg.dx).round() as usize + 1;
    }
    let total: usize = shape.iter().product();
    let index_of = |cell: &[i64]| -> Option<usize> {
        let mut idx = 0usize;
        for i in 0..n {
            if cell[i] < 0 || cell[i] >= shape[i] as i64 {
                return None;
            }
            idx = idx * shape[i] + cell[i] as usize;
        }
        Some(idx)
    };
    let cell_of_point = |x: &[f64]| -> Option<Vec<i64>> {
        let mut cell = vec![0i64; n];
        for i in 0..n {
            cell[i] = ((x[i] - cfg.bbox_lo[i]) / cfg.dx).round() as i64;
            if cell[i] < 0 || cell[i] >= shape[i] as i64 {
                return None;
            }
        }
        Some(cell)
    };
    let center = |cell: &[i64]| -> Vec<f64> {
        (0..n)
            .map(|i| cfg.bbox_lo[i] + cell[i] as f64 * cfg.dx)
            .collect()
    };
    let start_cell = cell_of_point(&scenario.x_start)
        .ok_or_else(|| ZermeloError::InvalidScenario("start outside bbox".into()))?;
    let target_cell = cell_of_point(&scenario.target)
        .ok_or_else(|| ZermeloError::InvalidScenario("target outside bbox".into()))?;
    let target_idx = index_of(&target_cell).unwrap();

    let dirs = crate::cones::unit_directions(n, cfg.headings);
    // CFL check against sampled speeds.
    let mut max_speed: f64 = 0.0;
    for k in 0..3 {
        let t = scenario.t0 + scenario.horizon * k as f64 / 2.0;
        for x in [&scenario.x_start, &scenario.target] {
            for u in &dirs {
                let z = scenario.z.eval(t, x, u)?;
                max_speed = max_speed.max(1.0 / z);
            }
        }
    }
    let bound = cfg.dx / max_speed;
    if cfg.dt > bound * (1.0 + 1e-12) {
        return Err(ZermeloError::CflViolation { dt: cfg.dt, bound });
    }

    let mut label = vec![f64::INFINITY; total];
    let mut expanded = vec![false; total];
    let start_idx = index_of(&start_cell).unwrap();
    label[start_idx] = 0.0;

    let decode = |mut idx: usize| -> Vec<i64> {
        let mut cell = vec![0i64; n];
        for i in (0..n).rev() {
            cell[i] = (idx % shape[i]) as i64;
            idx /= shape[i];
        }
        cell
    };

    let mut t = 0.0;
    while t <= scenario.horizon + 1e-12 {
        for idx in 0..total {
            if expanded[idx] || label[idx] > t {
                continue;
            }
            expanded[idx] = true;
            let cell = decode(idx);
            let x = center(&cell);
            let t_abs = scenario.t0 + label[idx];
            for u in &dirs {
                let z = match scenario.z.eval(t_abs, &x, u) {
                    Ok(z) => z,
                    Err(_) => continue,
                };
                let speed = 1.0 / z;
                let offset: Vec<f64> = u.iter().map(|c| c * cfg.dt * speed).collect();
                let omax = offset.iter().map(|c| c.abs()).fold(0.0, f64::max);
                if omax == 0.0 {
                    continue;
                }
                let mut step = vec![0i64; n];
                for i in 0..n {
                    step[i] = if offset[i].abs() >= 0.5 * omax {
                        offset[i].signum() as i64
                    } else {
                        0
                    };
                }
                let nb: Vec<i64> = (0..n).map(|i| cell[i] + step[i]).collect();
                let nb_idx = match index_of(&nb) {
                    Some(i) => i,
                    None => continue,
                };
                let disp: Vec<f64> = step.iter().map(|&s| s as f64 * cfg.dx).collect();
                let cost = match scenario.z.eval(t_abs, &x, &disp) {
                    Ok(c) => c,
                    Err(_) => continue,
                };
                if label[idx] + cost < label[nb_idx] {
                    label[nb_idx] = label[idx] + cost;
                }
            }
        }
        if label[target_idx] <= t {
            return Ok(t);
        }
        t += cfg.dt;
    }
    Err(ZermeloError::NotReached)
}

/// Checks `Z_lower <= Z <= Z_upper` over a sampled `(t, x, unit v)` grid.
pub fn bounds_check(
    z: &FinslerSpec,
    z_lower: &FinslerSpec,
    z_upper: &FinslerSpec,
    times: &[f64],
    points: &[Vec<f64>],
    dir_count: usize,
) -> Result<ConditionReport, ZermeloError> {
    let n = z.arity();
    if z_lower.arity() != n || z_upper.arity() != n {
        return Err(ZermeloError::InvalidScenario(
            "bound specs must share the dimension".into(),
        ));
    }
    let mut report = ConditionReport::default();
    for &t in times {
        for x in points {
            let mut lower_margin = f64::INFINITY;
            let mut upper_margin = f64::INFINITY;
            let mut worst_dir = vec![0.0; n];
            for u in crate::cones::unit_directions(n, dir_count) {
                let zm = z.eval(t, x, &u)?;
                let zl = z_lower.eval(t, x, &u)?;
                let zu = z_upper.eval(t, x, &u)?;
                if zm - zl < lower_margin {
                    lower_margin = zm - zl;
                    worst_dir = u.clone();
                }
                upper_margin = upper_margin.min(zu - zm);
            }
            report.push(
                "Z_lower <= Z",
                t,
                x,
                &worst_dir,
                lower_margin >= 0.0,
                lower_margin,
            );
            report.push(
                "Z <= Z_upper",
                t,
                x,
                &worst_dir,
                upper_margin >= 0.0,
                upper_margin,
            );
        }
    }
    Ok(report)
}

/// Checks that every trajectory point lifts to a lightlike vector of the
/// navigation cone (used by tests and the CLI validation path).
pub fn trajectory_is_lightlike(
    scenario: &ZermeloScenario,
    result: &NavigationResult,
    tol: f64,
) -> Result<bool, ZermeloError> {
    let (triple, _) = scenario.cone_spec();
    for w in result.trajectory.windows(2) {
        let dt = w[1].t - w[0].t;
        if dt <= 0.0 {
            continue;
        }
        let n = scenario.dim();
        let mut v = vec![dt];
        for i in 0..n {
            v.push(w[1].x[i] - w[0].x[i]);
        }
        let class = classify(&triple, w[0].t, &w[0].x, &v, tol)?;
        if class != CausalClass::Lightlike {
            return Ok(false);
        }
    }
    Ok(true)
}
