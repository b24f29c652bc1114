//! Fixed-point construction of the soliton germ.
//!
//! In reversed time the germ is a solution of `v' = A·v + b(v)` decaying to
//! the origin like `e^{-2t̃}`. Such solutions are fixed points of
//!
//! ```text
//! T_u v(t̃) = u(t̃) - ∫_t̃^∞ Φ(t̃, σ) b(v(σ)) dσ
//! ```
//!
//! where `u = Φ(t̃, 0)u₀` is a decaying solution of the linear system. The
//! seed `u` fixes the limits of `Z̃/Ỹ` and `W/Ỹ`, and with them the family
//! member and the smooth closing. `T_u` is iterated in the weighted sup norm
//! `‖v‖ = sup e^{2t̃}|v(t̃)|∞` on a finite grid.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolitonError};
use crate::soliton::{
    b_bound_constants, nonlinearity_b, FirstIntegralContext, PhaseState, SolitonParams, Vec4,
};

pub const DEFAULT_NODES: usize = 400;
pub const DEFAULT_T_MAX: f64 = 12.0;
pub const DEFAULT_PICARD_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_EPS: f64 = 1e-3;
const MAX_HALVINGS: u32 = 6;
/// Distance in `t̃` between the two nodes of the limit extrapolation.
const LIMIT_SPAN: f64 = 1.0;

/// Seed of the iteration: the linear solution
/// `u(t̃) = eps·(A₂/2d, 1, gamma, beta)·e^{-2t̃}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    /// Limit of `Z̃/Ỹ`; `(Λ + A₂)/2` selects the member `Λ` of the family.
    pub gamma: f64,
    /// Limit of `W/Ỹ`; the metric closes smoothly only for `beta = 1`.
    pub beta: f64,
    pub eps: f64,
    /// Radius of the weighted-norm ball around `u` the iterates must stay in.
    pub ball_radius: f64,
}

impl SeedSpec {
    pub fn new(gamma: f64, eps: f64) -> Self {
        Self {
            gamma,
            beta: 1.0,
            eps,
            ball_radius: 2.0 * eps,
        }
    }

    pub fn for_context(ctx: &FirstIntegralContext, eps: f64) -> Self {
        Self::new(ctx.gamma, eps)
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(SolitonError::InvalidParams(format!(
                "seed amplitude eps = {} must be positive",
                self.eps
            )));
        }
        if !(self.eps < self.ball_radius) {
            return Err(SolitonError::InvalidParams(format!(
                "seed amplitude {} must be smaller than the ball radius {}",
                self.eps, self.ball_radius
            )));
        }
        Ok(())
    }

    fn halved(&self) -> Self {
        Self {
            eps: 0.5 * self.eps,
            ball_radius: 0.5 * self.ball_radius,
            ..*self
        }
    }
}

/// Nodes on `[0, t̃_max]` for the weighted norm `sup e^{2t̃}|v|`.
///
/// Near `t̃ = 0` the nodes are uniform in `e^{-2t̃}`,
/// `t̃_k = -½ ln(1 - k/(n+1))`. Once that spacing would exceed `20/n` the
/// grid continues uniformly in `t̃` up to `t̃_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGrid {
    t_max: f64,
    nodes: Vec<f64>,
}

impl WeightedGrid {
    pub fn graded(n: usize, t_max: f64) -> Result<Self> {
        if n < 8 {
            return Err(SolitonError::InvalidParams(format!(
                "grid needs at least 8 graded nodes, got {n}"
            )));
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(SolitonError::InvalidParams(format!(
                "truncation horizon {t_max} must be positive"
            )));
        }
        let h_cap = 20.0 / n as f64;
        let graded = |k: usize| -0.5 * (1.0 - k as f64 / (n as f64 + 1.0)).ln();
        let mut nodes = vec![0.0];
        for k in 1..=n {
            let next = graded(k);
            let last = *nodes.last().unwrap();
            if next - last > h_cap || next >= t_max {
                break;
            }
            nodes.push(next);
        }
        let start = *nodes.last().unwrap();
        let m = ((t_max - start) / h_cap).ceil().max(1.0) as usize;
        let h = (t_max - start) / m as f64;
        for j in 1..m {
            nodes.push(start + h * j as f64);
        }
        nodes.push(t_max);
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 4 || nodes[0] != 0.0 {
            return Err(SolitonError::InvalidParams(
                "grid must start at 0 and have at least 4 nodes".into(),
            ));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SolitonError::InvalidParams(
                "grid nodes must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            t_max: *nodes.last().unwrap(),
            nodes,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sup_k e^{2t̃_k}|v_k|∞`.
    pub fn weighted_norm(&self, v: &[Vec4]) -> f64 {
        self.nodes
            .iter()
            .zip(v)
            .map(|(t, x)| (2.0 * t).exp() * sup(x))
            .fold(0.0, f64::max)
    }

    pub fn weighted_distance(&self, a: &[Vec4], b: &[Vec4]) -> f64 {
        self.nodes
            .iter()
            .zip(a.iter().zip(b))
            .map(|(t, (x, y))| {
                let diff: Vec4 = std::array::from_fn(|i| x[i] - y[i]);
                (2.0 * t).exp() * sup(&diff)
            })
            .fold(0.0, f64::max)
    }
}

fn sup(v: &Vec4) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Samples the linear seed at the grid nodes.
pub fn build_seed(p: &SolitonParams, spec: &SeedSpec, grid: &WeightedGrid) -> Vec<Vec4> {
    let dir = [p.x_over_y2_limit(), 1.0, spec.gamma, spec.beta];
    grid.nodes
        .iter()
        .map(|t| {
            let e = spec.eps * (-2.0 * t).exp();
            std::array::from_fn(|i| dir[i] * e)
        })
        .collect()
}

/// `∫_0^1 τ^j e^{-xτ} dτ` for `j = 0..3`.
fn unit_moments(x: f64) -> [f64; 4] {
    if x < 4.0 {
        let mut out = [0.0; 4];
        for (j, m) in out.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut sum = 1.0 / (j + 1) as f64;
            for n in 1..80 {
                term *= -x / n as f64;
                let add = term / (n + j + 1) as f64;
                sum += add;
                if add.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            *m = sum;
        }
        out
    } else {
        let e = (-x).exp();
        let mut out = [-(-x).exp_m1() / x, 0.0, 0.0, 0.0];
        for j in 1..4 {
            out[j] = (j as f64 * out[j - 1] - e) / x;
        }
        out
    }
}

/// Quadrature weights for `∫_{s_k}^{s_{k+1}} e^{-μ(s - s_k)} P(s) ds`, where
/// `P` is the cubic through the four nodes starting at the returned index
/// (centred on the panel where possible).
fn panel_weights(nodes: &[f64], k: usize, mu: f64) -> (usize, [f64; 4]) {
    let m = k.saturating_sub(1).min(nodes.len() - 4);
    let h = nodes[k + 1] - nodes[k];
    let um = unit_moments(mu * h);
    let mom: [f64; 4] = std::array::from_fn(|j| um[j] * h.powi(j as i32 + 1));
    let sig: [f64; 4] = std::array::from_fn(|l| nodes[m + l] - nodes[k]);
    let mut w = [0.0; 4];
    for i in 0..4 {
        let others: Vec<f64> = (0..4).filter(|&l| l != i).map(|l| sig[l]).collect();
        let (a, b, c) = (others[0], others[1], others[2]);
        let den = (sig[i] - a) * (sig[i] - b) * (sig[i] - c);
        let e1 = a + b + c;
        let e2 = a * b + a * c + b * c;
        let e3 = a * b * c;
        w[i] = (mom[3] - e1 * mom[2] + e2 * mom[1] - e3 * mom[0]) / den;
    }
    (m, w)
}

/// Analytic bound on the tail `|∫_{t̃_max}^∞ Φ(t̃,σ) b(v(σ)) dσ|∞` for
/// `|v(σ)|∞ ≤ c0·e^{-2σ}`, using `|b(v)| ≤ K₁|v|² + K₂|v|³`.
pub fn tail_bound(p: &SolitonParams, c0: f64, t_max: f64, t: f64) -> f64 {
    let (k1, k2) = b_bound_constants(p);
    let k = p.x_over_y2_limit();
    let q = k1 * c0 * c0;
    let c = k2 * c0 * c0 * c0;
    let int_plain = q * (-4.0 * t_max).exp() / 4.0 + c * (-6.0 * t_max).exp() / 6.0;
    let int_weighted = q * (-2.0 * t_max).exp() / 2.0 + c * (-4.0 * t_max).exp() / 4.0;
    let rows = (-2.0 * t).exp() * int_weighted;
    let first = (1.0 + k) * int_plain + k * rows;
    rows.max(first)
}

/// One application of `T_u` with a caller-supplied nonlinearity.
///
/// `b(v(σ))·e^{4σ}` is interpolated by local cubics and integrated exactly
/// against the exponentials of `Φ`. Beyond `t̃_max` the weighted
/// nonlinearity is held at its last value.
pub fn apply_t_with<B>(
    p: &SolitonParams,
    u: &[Vec4],
    v: &[Vec4],
    grid: &WeightedGrid,
    b: B,
) -> Result<Vec<Vec4>>
where
    B: Fn(&SolitonParams, &Vec4) -> Vec4,
{
    let n = grid.len();
    if u.len() != n || v.len() != n {
        return Err(SolitonError::InvalidParams(format!(
            "expected {n} node values, got u: {}, v: {}",
            u.len(),
            v.len()
        )));
    }
    check_decay(grid, v)?;
    let t = grid.nodes();
    let weighted: Vec<Vec4> = t
        .iter()
        .zip(v)
        .map(|(s, vk)| {
            let bk = b(p, vk);
            let e = (4.0 * s).exp();
            std::array::from_fn(|i| bk[i] * e)
        })
        .collect();

    // Running tails J0(t̃_k) = ∫ b, J2(t̃_k) = ∫ e^{2σ} b over [t̃_k, ∞).
    let last = n - 1;
    let t_end = t[last];
    let mut j0: Vec4 = std::array::from_fn(|i| weighted[last][i] * (-4.0 * t_end).exp() / 4.0);
    let mut j2: Vec4 = std::array::from_fn(|i| weighted[last][i] * (-2.0 * t_end).exp() / 2.0);
    let k = p.x_over_y2_limit();
    let mut out = vec![[0.0; 4]; n];
    for idx in (0..n).rev() {
        if idx < last {
            let (m4, w4) = panel_weights(t, idx, 4.0);
            let (m2, w2) = panel_weights(t, idx, 2.0);
            let (e4, e2) = ((-4.0 * t[idx]).exp(), (-2.0 * t[idx]).exp());
            for i in 0..4 {
                j0[i] += e4 * (0..4).map(|l| w4[l] * weighted[m4 + l][i]).sum::<f64>();
                j2[i] += e2 * (0..4).map(|l| w2[l] * weighted[m2 + l][i]).sum::<f64>();
            }
        }
        let e = (-2.0 * t[idx]).exp();
        let uk = &u[idx];
        out[idx] = [
            uk[0] - (j0[0] + k * (e * j2[1] - j0[1])),
            uk[1] - e * j2[1],
            uk[2] - e * j2[2],
            uk[3] - e * j2[3],
        ];
    }
    Ok(out)
}

/// `T_u v` for the soliton nonlinearity.
pub fn apply_t(
    p: &SolitonParams,
    u: &[Vec4],
    v: &[Vec4],
    grid: &WeightedGrid,
) -> Result<Vec<Vec4>> {
    apply_t_with(p, u, v, grid, nonlinearity_b)
}

/// Rejects iterates whose weighted profile `e^{2t̃}|v|` grows along the grid,
/// i.e. that do not decay at the rate the tail estimate assumes.
fn check_decay(grid: &WeightedGrid, v: &[Vec4]) -> Result<()> {
    let c0 = grid.weighted_norm(v);
    if !c0.is_finite() {
        return Err(SolitonError::NotContracting("iterate is not finite".into()));
    }
    let head = sup(&v[0]);
    let tail = (2.0 * grid.t_max()).exp() * sup(v.last().unwrap());
    if tail > 10.0 * head.max(f64::MIN_POSITIVE) {
        return Err(SolitonError::NotContracting(format!(
            "iterate decays slower than e^(-2t): weighted value {tail:e} at the horizon vs {head:e} at 0"
        )));
    }
    Ok(())
}

/// Converged germ in reversed time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardResult {
    pub grid: WeightedGrid,
    /// Seed actually used (its `eps` may have been halved).
    pub seed: SeedSpec,
    pub v: Vec<Vec4>,
    pub iterations: usize,
    pub contraction_ratios: Vec<f64>,
    pub final_update: f64,
    /// Weighted distance `‖T_u u - u‖` of the first iterate from the seed.
    pub first_update: f64,
    pub limit_wy2: f64,
    pub limit_1mzy2: f64,
    pub limit_xy2: f64,
}

/// Aitken extrapolation of a sequence converging geometrically.
/// Falls back to the last term when the extrapolation would reach further
/// than ten steps.
pub(crate) fn aitken(r0: f64, r1: f64, r2: f64) -> f64 {
    let d1 = r1 - r0;
    let d2 = r2 - r1;
    let denom = d2 - d1;
    if denom.abs() <= 1e-300 || (d2 * d2 / denom).abs() > (d2.abs() * 10.0) {
        r2
    } else {
        r2 - d2 * d2 / denom
    }
}

/// `lim v[num]/v[1]` as `t̃ -> ∞`. The ratio approaches its limit like
/// `e^{-2t̃}`, so one Richardson step between the last node and the node
/// nearest one unit earlier removes the leading correction.
fn measured_limit(nodes: &[f64], v: &[Vec4], num: usize) -> f64 {
    let n = v.len();
    let r = |k: usize| v[k][num] / v[k][1];
    let t1 = nodes[n - 1];
    let k0 = nodes.partition_point(|t| *t <= t1 - LIMIT_SPAN).min(n - 2);
    let q = (-2.0 * (t1 - nodes[k0])).exp();
    (r(n - 1) - q * r(k0)) / (1.0 - q)
}

/// Iterates `T_u` from `v₀ = u` until the weighted update drops below
/// `picard_tol`. On a contraction ratio `≥ 1` the seed amplitude is halved
/// and the iteration restarted, up to six times.
pub fn iterate_to_fixed_point(
    p: &SolitonParams,
    spec: &SeedSpec,
    grid: &WeightedGrid,
    picard_tol: f64,
    max_iter: usize,
) -> Result<PicardResult> {
    spec.validate()?;
    let mut seed = *spec;
    let mut last_err = None;
    for _ in 0..=MAX_HALVINGS {
        match iterate_once(p, &seed, grid, picard_tol, max_iter) {
            Ok(res) => return Ok(res),
            Err(SolitonError::NotContracting(msg)) => {
                last_err = Some(msg);
                seed = seed.halved();
            }
            Err(e) => return Err(e),
        }
    }
    Err(SolitonError::NotContracting(format!(
        "no contraction after {MAX_HALVINGS} halvings of eps: {}",
        last_err.unwrap_or_default()
    )))
}

fn iterate_once(
    p: &SolitonParams,
    seed: &SeedSpec,
    grid: &WeightedGrid,
    picard_tol: f64,
    max_iter: usize,
) -> Result<PicardResult> {
    let u = build_seed(p, seed, grid);
    // Updates at this level are rounding noise, not contraction evidence.
    let noise = 64.0 * f64::EPSILON * grid.weighted_norm(&u);
    let mut v = u.clone();
    let mut prev_update: Option<f64> = None;
    let mut ratios = Vec::new();
    let mut first_update = 0.0;
    for it in 1..=max_iter {
        let next = apply_t(p, &u, &v, grid)?;
        let update = grid.weighted_distance(&next, &v);
        if it == 1 {
            first_update = update;
        }
        if grid.weighted_distance(&next, &u) > seed.ball_radius {
            return Err(SolitonError::NotContracting(format!(
                "iterate left the ball of radius {} around the seed",
                seed.ball_radius
            )));
        }
        if let Some(prev) = prev_update {
            if prev > noise {
                let ratio = update / prev;
                ratios.push(ratio);
                if ratio >= 1.0 && update > noise {
                    return Err(SolitonError::NotContracting(format!(
                        "contraction ratio {ratio} at iteration {it} (eps = {})",
                        seed.eps
                    )));
                }
            }
        }
        v = next;
        if update < picard_tol {
            if v.iter().any(|x| !(x[1] > 0.0)) {
                return Err(SolitonError::Domain(
                    "fixed point has Ỹ <= 0 at a node".into(),
                ));
            }
            return Ok(PicardResult {
                grid: grid.clone(),
                seed: *seed,
                limit_wy2: measured_limit(&grid.nodes, &v, 3),
                limit_1mzy2: measured_limit(&grid.nodes, &v, 2),
                limit_xy2: measured_limit(&grid.nodes, &v, 0),
                v,
                iterations: it,
                contraction_ratios: ratios,
                final_update: update,
                first_update,
            });
        }
        prev_update = Some(update);
    }
    Err(SolitonError::MaxIterations(max_iter))
}

/// `∫_{t̃_k}^∞ q(σ) dσ` at every node for `q` decaying like `e^{-μσ}`:
/// `e^{μσ}q` is interpolated by local cubics and held constant beyond the
/// last node.
fn tail_quadrature(nodes: &[f64], q: &[f64], mu: f64) -> Vec<f64> {
    let n = nodes.len();
    let weighted: Vec<f64> = nodes
        .iter()
        .zip(q)
        .map(|(t, v)| v * (mu * t).exp())
        .collect();
    let mut out = vec![0.0; n];
    let mut acc = weighted[n - 1] * (-mu * nodes[n - 1]).exp() / mu;
    out[n - 1] = acc;
    for k in (0..n - 1).rev() {
        let (m, w) = panel_weights(nodes, k, mu);
        acc += (-mu * nodes[k]).exp() * (0..4).map(|l| w[l] * weighted[m + l]).sum::<f64>();
        out[k] = acc;
    }
    out
}

/// The germ as forward-time phase states, ordered by increasing `t = -t̃`.
///
/// `ln g = ln λ + ∫_{-∞}^t X`, `s = ∫_{-∞}^t ℒ` and `f = ∫_{-∞}^t gZW/Y`
/// are accumulated from the far end of the grid, where `X ∝ e^{2t}` and
/// `ℒ, gZW/Y ∝ e^t`. The last element is the hand-off state at `t = 0`.
pub fn germ_samples(res: &PicardResult, ctx: &FirstIntegralContext) -> Result<Vec<PhaseState>> {
    let nodes = res.grid.nodes();
    if res.v.iter().any(|v| !(v[1] > 0.0)) {
        return Err(SolitonError::Domain("germ has Ỹ <= 0".into()));
    }
    let xs: Vec<f64> = res.v.iter().map(|v| v[0]).collect();
    let ys: Vec<f64> = res.v.iter().map(|v| v[1].sqrt()).collect();
    let int_x = tail_quadrature(nodes, &xs, 2.0);
    let lng: Vec<f64> = int_x.iter().map(|i| ctx.lambda.ln() + i).collect();
    let ls: Vec<f64> = lng.iter().zip(&ys).map(|(lg, y)| lg.exp() * y).collect();
    let fq: Vec<f64> = res
        .v
        .iter()
        .zip(&lng)
        .zip(&ys)
        .map(|((v, lg), y)| lg.exp() * (1.0 - v[2]) * v[3] / y)
        .collect();
    let s = tail_quadrature(nodes, &ls, 1.0);
    let f = tail_quadrature(nodes, &fq, 1.0);
    Ok((0..nodes.len())
        .rev()
        .map(|k| PhaseState {
            t: -nodes[k],
            x: res.v[k][0],
            y: ys[k],
            z: 1.0 - res.v[k][2],
            w: res.v[k][3],
            lng: lng[k],
            s: s[k],
            f: f[k],
            l: ls[k],
        })
        .collect())
}

/// Initial condition for the forward integration at `t = 0`.
pub fn handoff_state(res: &PicardResult, ctx: &FirstIntegralContext) -> Result<PhaseState> {
    Ok(*germ_samples(res, ctx)?.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{first_integral_residual, make_params};

    fn setup(big_lambda: f64) -> (SolitonParams, FirstIntegralContext, WeightedGrid) {
        let p = make_params(2, -1.0).unwrap();
        let ctx = FirstIntegralContext::new(&p, big_lambda, 1.0).unwrap();
        let grid = WeightedGrid::graded(DEFAULT_NODES, DEFAULT_T_MAX).unwrap();
        (p, ctx, grid)
    }

    #[test]
    fn grid_shape() {
        let g = WeightedGrid::graded(400, 12.0).unwrap();
        let n = g.nodes();
        assert_eq!(n[0], 0.0);
        assert_eq!(*n.last().unwrap(), 12.0);
        assert!(n.windows(2).all(|w| w[1] > w[0]));
        assert!((n[1] - (-0.5 * (1.0 - 1.0 / 401.0f64).ln())).abs() < 1e-15);
        assert!(n.windows(2).all(|w| w[1] - w[0] <= 0.05 + 1e-12));
        assert!(WeightedGrid::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
        assert!(WeightedGrid::from_nodes(vec![0.5, 1.0, 2.0]).is_err());
    }

    #[test]
    fn seed_examples() {
        let p = make_params(2, -1.0).unwrap();
        let grid = WeightedGrid::graded(50, 6.0).unwrap();
        let spec = SeedSpec::new(24.0, 0.01);
        let u = build_seed(&p, &spec, &grid);
        let u0 = u[0];
        let expect = [0.02, 0.01, 0.24, 0.01];
        for i in 0..4 {
            assert!((u0[i] - expect[i]).abs() < 1e-16);
        }
        for (t, uk) in grid.nodes().iter().zip(&u) {
            let e = (2.0 * t).exp();
            for i in 0..4 {
                assert!((uk[i] * e - u0[i]).abs() < 1e-15);
            }
            assert!((uk[2] / uk[1] - 24.0).abs() < 1e-12);
            assert!((uk[3] / uk[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_nonlinearity_returns_seed() {
        let (p, ctx, grid) = setup(40.0);
        let u = build_seed(&p, &SeedSpec::for_context(&ctx, 1e-3), &grid);
        let out = apply_t_with(&p, &u, &u, &grid, |_, _| [0.0; 4]).unwrap();
        assert_eq!(out, u);
    }

    #[test]
    fn panel_weights_exact_for_cubics() {
        let nodes = [0.0, 0.1, 0.25, 0.3, 0.7, 1.9];
        let poly = |s: f64| 0.7 - 0.3 * s + 1.1 * s * s - 0.4 * s * s * s;
        for mu in [1.0, 2.0, 4.0] {
            for k in 0..nodes.len() - 1 {
                let (m, w) = panel_weights(&nodes, k, mu);
                let got: f64 = (0..4).map(|l| w[l] * poly(nodes[m + l])).sum();
                // composite Simpson as an independent check
                let (a, h) = (nodes[k], nodes[k + 1] - nodes[k]);
                let f = |s: f64| (-mu * (s - a)).exp() * poly(s);
                let n = 4000;
                let dx = h / n as f64;
                let mut acc = f(a) + f(a + h);
                for i in 1..n {
                    acc += f(a + dx * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                let simpson = acc * dx / 3.0;
                assert!(
                    (got - simpson).abs() < 1e-12 * simpson.abs().max(1e-3),
                    "{mu} {k}"
                );
            }
        }
    }

    #[test]
    fn unit_moments_branches_agree() {
        for x in [3.9, 4.0, 4.1] {
            let a = unit_moments(x);
            let e = (-x).exp();
            let mut b = [-(-x).exp_m1() / x, 0.0, 0.0, 0.0];
            for j in 1..4 {
                b[j] = (j as f64 * b[j - 1] - e) / x;
            }
            for j in 0..4 {
                assert!((a[j] - b[j]).abs() < 1e-13, "{x} {j}");
            }
        }
    }

    #[test]
    fn horizon_value_within_tail_bound() {
        let (p, ctx, grid) = setup(40.0);
        let u = build_seed(&p, &SeedSpec::for_context(&ctx, 1e-3), &grid);
        let tu = apply_t(&p, &u, &u, &grid).unwrap();
        let last = grid.len() - 1;
        let diff = sup(&std::array::from_fn(|i| tu[last][i] - u[last][i]));
        let c0 = grid.weighted_norm(&u);
        let bound = tail_bound(&p, c0, grid.t_max(), grid.t_max());
        assert!(diff > 0.0 && diff <= bound, "{diff:e} vs {bound:e}");
    }

    #[test]
    fn slow_decay_is_rejected() {
        let (p, _, grid) = setup(40.0);
        let slow: Vec<Vec4> = grid
            .nodes()
            .iter()
            .map(|t| [0.0, 1e-3 * (-t).exp(), 0.0, 0.0])
            .collect();
        assert!(matches!(
            apply_t(&p, &slow, &slow, &grid),
            Err(SolitonError::NotContracting(_))
        ));
    }

    #[test]
    fn quadratic_smallness_of_first_update() {
        let (p, ctx, grid) = setup(40.0);
        let dist = |eps: f64| {
            let u = build_seed(&p, &SeedSpec::for_context(&ctx, eps), &grid);
            grid.weighted_distance(&apply_t(&p, &u, &u, &grid).unwrap(), &u)
        };
        let ratio = dist(1e-2) / dist(1e-3);
        assert!((ratio - 100.0).abs() < 20.0, "{ratio}");
    }

    #[test]
    fn fixed_point_limits() {
        let (p, ctx, grid) = setup(40.0);
        let res = iterate_to_fixed_point(&p, &SeedSpec::for_context(&ctx, 1e-3), &grid, 1e-12, 200)
            .unwrap();
        assert!(res.final_update < 1e-12);
        assert!((res.limit_wy2 - 1.0).abs() < 1e-6);
        assert!((res.limit_1mzy2 - ctx.gamma).abs() < 1e-6);
        assert!((res.limit_xy2 - 2.0).abs() < 1e-5);
        assert!(
            res.contraction_ratios.iter().all(|r| *r < 0.5),
            "{:?}",
            res.contraction_ratios
        );
        assert!(res.v.iter().all(|v| v[1] > 0.0));
    }

    #[test]
    fn handoff_examples() {
        let (p, ctx, grid) = setup(40.0);
        let res = iterate_to_fixed_point(&p, &SeedSpec::for_context(&ctx, 1e-3), &grid, 1e-12, 200)
            .unwrap();
        let h = handoff_state(&res, &ctx).unwrap();
        assert_eq!(h.t, 0.0);
        assert_eq!(h.y, res.v[0][1].sqrt());
        assert!(h.z > 0.0 && h.z < 1.0);
        let r = first_integral_residual(&p, &h, &ctx);
        assert!(r.abs() < 1e-7, "{r:e}");
        assert!((h.l - h.lng.exp() * h.y).abs() < 1e-15);
    }

    #[test]
    fn aitken_recovers_geometric_limit() {
        let seq = |k: f64| 3.0 + 0.5 * 0.3f64.powf(k);
        assert!((aitken(seq(1.0), seq(2.0), seq(3.0)) - 3.0).abs() < 1e-14);
        assert_eq!(aitken(2.0, 2.0, 2.0), 2.0);
    }
}
