//! Penalty-based alternating design of the scattering matrix.
//!
//! The problem `max f(φ)` over unit-modulus `φ` with consensus constraints
//! `φ = φ₀ = φ₁ = vech(U)` is handled by minimizing the penalized Lagrangian
//!
//! ```text
//! L = −f(φ, φ₀) + ρ₀/2 ‖φ₀ − φ‖² + ρ₁/2 ‖φ₁ − φ‖² + ρ₂/2 ‖vech(U) − φ‖²
//! ```
//!
//! block by block. The φ and φ₀ blocks are unimodular quadratic programs
//! solved by loaded power iterations; φ₁ is a per-entry alphabet projection
//! and U a Procrustes projection. On the unit-modulus set `‖φ‖²` is
//! constant, so the penalties only contribute linear terms to the φ and φ₀
//! subproblems.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::baselines::random_symmetric_unitary;
use crate::channel::{trial_rng, ChannelSet, Stream};
use crate::config::{PenaltyConfig, Resolution, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ONE};
use crate::model::{
    self, evaluate, hermitian_form, unit_modulus, LemmaTerms, ScatteringMatrix, SnrReport,
    Structure,
};

/// Relative margin added to `λ_max` when loading.
const LOADING_MARGIN: f64 = 1e-6;
/// Relative slack for the inner monotonicity check.
const MONOTONE_SLACK: f64 = 1e-9;

/// `[[R, c/2], [cᴴ/2, 0]]`, so that `[φ; 1]ᴴ A [φ; 1] = φᴴRφ + ℜ{cᴴφ}`.
pub fn homogenize(r: &CMatrix, c: &CVector) -> Result<CMatrix> {
    let n = r.nrows();
    linalg::ensure_hermitian(r, "homogenize")?;
    if c.len() != n {
        return Err(Error::Dimension {
            op: "homogenize",
            expected: format!("length {n}"),
            got: format!("length {}", c.len()),
        });
    }
    let mut a = CMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(r);
    for i in 0..n {
        a[(i, n)] = c[i] * 0.5;
        a[(n, i)] = c[i].conj() * 0.5;
    }
    Ok(a)
}

/// Result of one unimodular quadratic program solve.
#[derive(Debug, Clone)]
pub struct UqpOutcome {
    pub x: CVector,
    pub iterations: usize,
    pub converged: bool,
    /// `xᴴAx` at the start and after every iteration.
    pub objective_trace: Vec<f64>,
    /// Loading parameter used.
    pub loading: f64,
}

fn phase_step(y: &CVector, prev: &CVector, zero_tol: f64) -> CVector {
    CVector::from_fn(y.len(), |i, _| {
        let z = y[i];
        let r = z.norm();
        if r <= zero_tol {
            prev[i]
        } else {
            z / r
        }
    })
}

/// Minimizes `xᴴAx` over unit-modulus `x` with the iteration
/// `x ← exp(j arg((λI − A) x))`, `λ ≥ λ_max(A)`, started at `start`.
///
/// The objective is non-increasing along the iterates. Entries of `(λI − A)x`
/// that vanish keep their previous phase.
pub fn uqp_minimize(
    a: &CMatrix,
    start: &CVector,
    eps: f64,
    max_iters: usize,
) -> Result<UqpOutcome> {
    linalg::ensure_hermitian(a, "uqp_minimize")?;
    let m = a.nrows();
    if start.len() != m {
        return Err(Error::Dimension {
            op: "uqp_minimize",
            expected: format!("length {m}"),
            got: format!("length {}", start.len()),
        });
    }
    let lmax = linalg::max_eigenvalue_hermitian(a)?;
    let scale = a.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    let loading = lmax + LOADING_MARGIN * lmax.abs().max(scale);
    let zero_tol = 64.0 * f64::EPSILON * (loading.abs() + scale) * (m as f64).sqrt();
    let energy = m as f64;
    let slack = MONOTONE_SLACK * (loading.abs() * energy).max(1.0);

    let loaded_times = |x: &CVector| -> CVector { x * C64::new(loading, 0.0) - a * x };

    let mut x = unit_modulus(start);
    let mut y = loaded_times(&x);
    let mut objective = loading * energy - x.dotc(&y).re;
    let mut trace = vec![objective];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let next = phase_step(&y, &x, zero_tol);
        let step = (&next - &x).norm();
        x = next;
        y = loaded_times(&x);
        let value = loading * energy - x.dotc(&y).re;
        debug_assert!(
            value <= objective + slack,
            "UQP objective increased: {objective} -> {value}"
        );
        objective = value;
        trace.push(value);
        iterations += 1;
        if step <= eps {
            converged = true;
            break;
        }
    }
    Ok(UqpOutcome {
        x,
        iterations,
        converged,
        objective_trace: trace,
        loading,
    })
}

/// Unit phase rotation making the last entry real and positive, then
/// truncation to the first `n` entries.
pub fn derotate(xbar: &CVector) -> CVector {
    let n = xbar.len() - 1;
    let last = xbar[n];
    let rot = if last.norm() > 0.0 {
        last.conj() / last.norm()
    } else {
        ONE
    };
    xbar.rows(0, n).map(|z| z * rot)
}

fn augment(x: &CVector) -> CVector {
    let mut out = CVector::from_element(x.len() + 1, ONE);
    out.rows_mut(0, x.len()).copy_from(x);
    out
}

/// Penalty weights `ρ₀` (φ₀ consensus), `ρ₁` (alphabet), `ρ₂` (unitary).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Penalties {
    pub rho0: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl Penalties {
    pub fn uniform(rho: f64) -> Self {
        Self {
            rho0: rho,
            rho1: rho,
            rho2: rho,
        }
    }

    fn scaled(self, k: f64) -> Self {
        Self {
            rho0: self.rho0 * k,
            rho1: self.rho1 * k,
            rho2: self.rho2 * k,
        }
    }
}

/// Alphabet-valued vector stored as integer levels `m` of `e^{j2πm/M}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphabetVector {
    pub levels: Vec<u32>,
    pub resolution: u32,
}

impl AlphabetVector {
    pub fn to_vector(&self) -> CVector {
        let m = self.resolution as f64;
        CVector::from_iterator(
            self.levels.len(),
            self.levels
                .iter()
                .map(|&k| C64::from_polar(1.0, TAU * k as f64 / m)),
        )
    }
}

/// Per-entry nearest alphabet point: `argmax_m cos(2πm/M − arg φ_l)`,
/// found by exhaustive search, ties toward the smaller `m`.
pub fn update_phi1(phi: &CVector, resolution: u32) -> AlphabetVector {
    assert!(resolution >= 2, "alphabet resolution must be >= 2");
    let levels = phi
        .iter()
        .map(|z| {
            let psi = z.arg();
            let mut best = 0u32;
            let mut best_val = f64::NEG_INFINITY;
            for m in 0..resolution {
                let v = (TAU * m as f64 / resolution as f64 - psi).cos();
                if v > best_val {
                    best_val = v;
                    best = m;
                }
            }
            best
        })
        .collect();
    AlphabetVector { levels, resolution }
}

/// Nearest unitary to `Φ = unvech(φ)`; errors when `Φ` is rank deficient.
pub fn update_u(phi: &CVector, l: usize) -> Result<CMatrix> {
    linalg::nearest_unitary(&linalg::unvech(phi, l)?)
}

/// Iterates of the alternating scheme.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub phi: CVector,
    pub phi0: CVector,
    /// Alphabet latent; absent for continuous designs.
    pub phi1: Option<AlphabetVector>,
    /// Unitary latent; absent for diagonal designs.
    pub u: Option<CMatrix>,
    pub outer_iter: usize,
}

impl OptimizerState {
    /// Parameters of `U` (`vech(U)`), if present.
    pub fn u_params(&self) -> Option<CVector> {
        self.u
            .as_ref()
            .map(|u| linalg::vech(u).expect("U is square"))
    }
}

/// Per-outer-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub outer_iter: usize,
    /// Weighted SNR of the continuous-phase iterate, trace form.
    pub snr_t: f64,
    pub lagrangian: f64,
    pub res_phi0: f64,
    pub res_phi1: Option<f64>,
    #[serde(rename = "res_U")]
    pub res_u: Option<f64>,
    pub unitarity_residual: f64,
    pub inner_phi: usize,
    pub inner_phi0: usize,
    pub step: f64,
}

/// `−f(φ, φ₀)` plus the consensus penalties present in `state`.
pub fn lagrangian_value(
    state: &OptimizerState,
    terms: &LemmaTerms,
    beta: f64,
    rho: &Penalties,
) -> Result<f64> {
    let f = model::surrogate_objective(&state.phi, &state.phi0, terms, beta)?;
    let mut value = -f + 0.5 * rho.rho0 * (&state.phi0 - &state.phi).norm_squared();
    if let Some(p1) = &state.phi1 {
        value += 0.5 * rho.rho1 * (p1.to_vector() - &state.phi).norm_squared();
    }
    if let Some(u) = state.u_params() {
        value += 0.5 * rho.rho2 * (u - &state.phi).norm_squared();
    }
    Ok(value)
}

/// Linear coefficient of the φ subproblem:
/// `2(β−1)q − ρ₀φ₀ − ρ₁φ₁ − ρ₂ vech(U)`.
fn phi_linear_term(
    state: &OptimizerState,
    terms: &LemmaTerms,
    beta: f64,
    rho: &Penalties,
) -> CVector {
    let mut c = terms.comm.q.map(|z| z * (2.0 * (beta - 1.0))) - state.phi0.map(|z| z * rho.rho0);
    if let Some(p1) = &state.phi1 {
        c -= p1.to_vector().map(|z| z * rho.rho1);
    }
    if let Some(u) = state.u_params() {
        c -= u.map(|z| z * rho.rho2);
    }
    c
}

/// φ block: minimizes `φᴴRφ + ℜ{cᴴφ}` with `R = −βQ̄(φ₀) − (1−β)Q̃`.
pub fn update_phi(
    state: &OptimizerState,
    terms: &LemmaTerms,
    qbar0: &CMatrix,
    cfg: &PenaltyConfig,
    rho: &Penalties,
    beta: f64,
) -> Result<(CVector, UqpOutcome)> {
    let r = -(qbar0.scale(beta)) - terms.comm.q_tilde.scale(1.0 - beta);
    let c = phi_linear_term(state, terms, beta, rho);
    let a = homogenize(&r, &c)?;
    let out = uqp_minimize(
        &a,
        &augment(&state.phi),
        cfg.eps_inner_phi,
        cfg.max_inner_iters,
    )?;
    Ok((derotate(&out.x), out))
}

/// φ₀ block: minimizes `−β φ₀ᴴ Q̄̄(φ) φ₀ − ρ₀ ℜ{φᴴφ₀}` for the fresh φ.
pub fn update_phi0(
    state: &OptimizerState,
    phi_new: &CVector,
    terms: &LemmaTerms,
    cfg: &PenaltyConfig,
    rho: &Penalties,
    beta: f64,
) -> Result<(CVector, UqpOutcome)> {
    let qbb = terms.qbarbar(phi_new)?;
    let r = -qbb.scale(beta);
    let c = phi_new.map(|z| -z * rho.rho0);
    let a = homogenize(&r, &c)?;
    let out = uqp_minimize(
        &a,
        &augment(&state.phi0),
        cfg.eps_inner_phi0,
        cfg.max_inner_iters,
    )?;
    Ok((derotate(&out.x), out))
}

/// Exact minimization of the Lagrangian over a common phase `θ` applied to
/// both φ and φ₀. The quartic radar term and the φ₀ coupling do not depend on
/// `θ`, so only the linear terms matter: `θ = −arg(w)` with
/// `w = 2(1−β)qᴴφ + ρ₁φ₁ᴴφ + ρ₂vech(U)ᴴφ`.
pub fn align_common_phase(
    state: &mut OptimizerState,
    terms: &LemmaTerms,
    beta: f64,
    rho: &Penalties,
) {
    let mut w = terms.comm.q.dotc(&state.phi) * (2.0 * (1.0 - beta));
    if let Some(p1) = &state.phi1 {
        w += p1.to_vector().dotc(&state.phi) * rho.rho1;
    }
    if let Some(u) = state.u_params() {
        w += u.dotc(&state.phi) * rho.rho2;
    }
    let r = w.norm();
    if r == 0.0 || !r.is_finite() {
        return;
    }
    let rot = w.conj() / r;
    state.phi.iter_mut().for_each(|z| *z *= rot);
    state.phi0.iter_mut().for_each(|z| *z *= rot);
}

/// Default penalty `scale · (‖Q̃‖₂ + β‖Q̄(φ₀)‖₂) / n`.
pub fn default_penalty(terms: &LemmaTerms, phi0: &CVector, beta: f64, scale: f64) -> Result<f64> {
    let qt = linalg::max_eigenvalue_hermitian(&terms.comm.q_tilde)?.max(0.0);
    let qb = linalg::max_eigenvalue_hermitian(&terms.qbar(phi0)?)?.max(0.0);
    let rho = scale * (qt + beta * qb) / terms.dim() as f64;
    Ok(if rho > 0.0 && rho.is_finite() {
        rho
    } else {
        scale
    })
}

/// One penalized design problem: a parameterization, its quadratic forms,
/// a weight and an alphabet.
#[derive(Debug, Clone)]
pub struct PenaltyProblem {
    pub terms: LemmaTerms,
    pub beta: f64,
    pub mode: Resolution,
    /// Whether the unitary latent `U` takes part (fully connected surfaces).
    pub unitary_latent: bool,
}

/// Output of a design run.
#[derive(Debug, Clone)]
pub struct DesignOutcome {
    /// Continuous-phase design `Φ*`.
    pub phi: ScatteringMatrix,
    /// Alphabet-exact design `Φ₁*` in discrete mode.
    pub phi1: Option<ScatteringMatrix>,
    pub state: OptimizerState,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub outer_iterations: usize,
    pub penalties: Penalties,
    /// U updates where `Φ` was rank deficient and an arbitrary polar
    /// factor was used.
    pub rank_deficient_projections: usize,
}

impl DesignOutcome {
    /// The hardware answer: `Φ₁*` in discrete mode, `Φ*` otherwise.
    pub fn deliverable(&self) -> &ScatteringMatrix {
        self.phi1.as_ref().unwrap_or(&self.phi)
    }

    /// Final consensus residuals `(‖φ−φ₀‖, ‖φ−φ₁‖, ‖φ−vech(U)‖)`.
    pub fn consensus_residuals(&self) -> (f64, Option<f64>, Option<f64>) {
        let s = &self.state;
        (
            (&s.phi - &s.phi0).norm(),
            s.phi1.as_ref().map(|p| (&s.phi - p.to_vector()).norm()),
            s.u_params().map(|u| (&s.phi - u).norm()),
        )
    }
}

/// Starting point of a run.
#[derive(Debug, Clone)]
pub struct InitialPoint {
    pub phi: CVector,
    /// Initial unitary latent, used when the problem has one.
    pub u: Option<CMatrix>,
}

impl PenaltyProblem {
    pub fn initial_state(&self, init: &InitialPoint) -> Result<OptimizerState> {
        let n = self.terms.dim();
        if init.phi.len() != n {
            return Err(Error::Dimension {
                op: "initial_state",
                expected: format!("length {n}"),
                got: format!("length {}", init.phi.len()),
            });
        }
        let phi = unit_modulus(&init.phi);
        let phi1 = self.mode.levels().map(|m| update_phi1(&phi, m));
        let u = if self.unitary_latent {
            match &init.u {
                Some(u) => Some(u.clone()),
                None => Some(linalg::polar_unitary(&self.terms.matrix_of(&phi)?)?.0),
            }
        } else {
            None
        };
        Ok(OptimizerState {
            phi0: phi.clone(),
            phi,
            phi1,
            u,
            outer_iter: 0,
        })
    }

    fn u_update(&self, phi: &CVector, rank_deficient: &mut usize) -> Result<CMatrix> {
        let l = self.terms.structure.n_elements();
        match update_u(phi, l) {
            Ok(u) => Ok(u),
            Err(Error::RankDeficient { .. }) => {
                *rank_deficient += 1;
                Ok(linalg::polar_unitary(&linalg::unvech(phi, l)?)?.0)
            }
            Err(e) => Err(e),
        }
    }

    /// Runs the alternating scheme from `init`.
    pub fn solve(
        &self,
        channels: &ChannelSet,
        sigma2_c: f64,
        sigma2_r: f64,
        init: &InitialPoint,
        cfg: &PenaltyConfig,
    ) -> Result<DesignOutcome> {
        let beta = self.beta;
        let mut state = self.initial_state(init)?;
        let mut rho = match cfg.rho {
            Some([r0, r1, r2]) => Penalties {
                rho0: r0,
                rho1: r1,
                rho2: r2,
            },
            None => Penalties::uniform(default_penalty(
                &self.terms,
                &state.phi0,
                beta,
                cfg.rho_scale,
            )?),
        };
        let initial_rho = rho;
        let mut trace = Vec::new();
        let mut converged = false;
        let mut rank_deficient = 0;
        let mut best: Option<(f64, OptimizerState)> = None;

        for r in 1..=cfg.max_outer_iters {
            let qbar0 = self.terms.qbar(&state.phi0)?;
            let (phi_new, inner_phi) = update_phi(&state, &self.terms, &qbar0, cfg, &rho, beta)?;
            let (phi0_new, inner_phi0) =
                update_phi0(&state, &phi_new, &self.terms, cfg, &rho, beta)?;
            let previous = std::mem::replace(&mut state.phi, phi_new);
            state.phi0 = phi0_new;
            align_common_phase(&mut state, &self.terms, beta, &rho);
            let step = (&state.phi - &previous).norm();
            if let Some(m) = self.mode.levels() {
                state.phi1 = Some(update_phi1(&state.phi, m));
            }
            if self.unitary_latent {
                state.u = Some(self.u_update(&state.phi, &mut rank_deficient)?);
            }
            state.outer_iter = r;

            let phi_matrix = self.terms.matrix_of(&state.phi)?;
            let report = evaluate(channels, &phi_matrix, sigma2_c, sigma2_r, beta)?;
            let record = TraceRecord {
                outer_iter: r,
                snr_t: report.snr_t,
                lagrangian: lagrangian_value(&state, &self.terms, beta, &rho)?,
                res_phi0: (&state.phi - &state.phi0).norm(),
                res_phi1: state
                    .phi1
                    .as_ref()
                    .map(|p| (&state.phi - p.to_vector()).norm()),
                res_u: state.u_params().map(|u| (&state.phi - u).norm()),
                unitarity_residual: linalg::unitarity_residual(&phi_matrix),
                inner_phi: inner_phi.iterations,
                inner_phi0: inner_phi0.iterations,
                step,
            };
            trace.push(record);

            let score = self
                .deliverable_snr(channels, &state, sigma2_c, sigma2_r)?
                .snr_t;
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, state.clone()));
            }
            if step <= cfg.eps_outer {
                converged = true;
                break;
            }
            if cfg.penalty_ramp && r % 10 == 0 {
                rho = rho.scaled(1.5);
            }
        }

        if !converged {
            if let Some((_, s)) = best {
                state = s;
            }
        }
        let alphabet = self.mode;
        let phi = ScatteringMatrix::new(self.terms.matrix_of(&state.phi)?, Resolution::Continuous)?;
        let phi1 = match &state.phi1 {
            Some(p1) => Some(ScatteringMatrix::new(
                self.terms.matrix_of(&p1.to_vector())?,
                alphabet,
            )?),
            None => None,
        };
        Ok(DesignOutcome {
            phi,
            phi1,
            outer_iterations: trace.len(),
            state,
            trace,
            converged,
            penalties: initial_rho,
            rank_deficient_projections: rank_deficient,
        })
    }

    fn deliverable_snr(
        &self,
        channels: &ChannelSet,
        state: &OptimizerState,
        s2c: f64,
        s2r: f64,
    ) -> Result<SnrReport> {
        let params = match &state.phi1 {
            Some(p1) => p1.to_vector(),
            None => state.phi.clone(),
        };
        evaluate(
            channels,
            &self.terms.matrix_of(&params)?,
            s2c,
            s2r,
            self.beta,
        )
    }
}

/// Feasible starting point for the fully connected design: `Φ⁰ = VVᵀ` with
/// Haar `V`, entries projected to unit modulus for `φ`, and `U⁰ = Φ⁰`.
pub fn initial_point(cfg: &SystemConfig, trial_index: u64) -> (ScatteringMatrix, InitialPoint) {
    let l = cfg.n_elements();
    let mut rng = trial_rng(cfg.seed, trial_index, Stream::Initialization);
    let phi_start = random_symmetric_unitary(l, &mut rng);
    let params = linalg::vech(phi_start.matrix()).expect("square");
    let init = InitialPoint {
        phi: unit_modulus(&params),
        u: Some(phi_start.matrix().clone()),
    };
    (phi_start, init)
}

/// Fully connected design for one channel realization.
pub fn run_algorithm1(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    mode: Resolution,
) -> Result<DesignOutcome> {
    let (s2c, s2r) = (cfg.sigma2_c(), cfg.sigma2_r());
    let terms = LemmaTerms::new(Structure::symmetric(cfg.n_elements()), channels, s2c, s2r)?;
    let problem = PenaltyProblem {
        terms,
        beta: cfg.design.beta,
        mode,
        unitary_latent: true,
    };
    let (_, init) = initial_point(cfg, channels.trial_index);
    problem.solve(channels, s2c, s2r, &init, &cfg.optimizer)
}

/// `true` when the homogenized objective trace never rises by more than
/// `slack` (absolute).
pub fn is_non_increasing(trace: &[f64], slack: f64) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// Quadratic-form value `xᴴAx` used by monotonicity checks.
pub fn uqp_objective(a: &CMatrix, x: &CVector) -> Result<f64> {
    hermitian_form(a, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal_matrix;

    #[test]
    fn homogenize_structure() {
        let r = CMatrix::identity(2, 2);
        let a = homogenize(&r, &CVector::zeros(2)).unwrap();
        assert_eq!(a.view((0, 0), (2, 2)), r);
        assert!(a.row(2).iter().all(|z| *z == C64::new(0.0, 0.0)));
        let e1 = CVector::from_vec(vec![ONE, C64::new(0.0, 0.0)]);
        let a = homogenize(&CMatrix::zeros(2, 2), &e1).unwrap();
        let phi = CVector::from_vec(vec![C64::from_polar(1.0, 0.4), C64::from_polar(1.0, 2.0)]);
        let v = uqp_objective(&a, &augment(&phi)).unwrap();
        assert!((v - 0.4f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn homogenize_matches_direct_evaluation() {
        let mut rng = trial_rng(3, 0, Stream::Baseline);
        for _ in 0..10 {
            let b = complex_normal_matrix(&mut rng, 4, 4, 1.0);
            let r = linalg::hermitian_part(&b);
            let c = complex_normal_matrix(&mut rng, 4, 1, 1.0)
                .column(0)
                .into_owned();
            let phi = unit_modulus(
                &complex_normal_matrix(&mut rng, 4, 1, 1.0)
                    .column(0)
                    .into_owned(),
            );
            let a = homogenize(&r, &c).unwrap();
            let lhs = uqp_objective(&a, &augment(&phi)).unwrap();
            let rhs = hermitian_form(&r, &phi).unwrap() + c.dotc(&phi).re;
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn uqp_isotropic_start_is_fixed_point() {
        let a = -CMatrix::identity(3, 3);
        let start = CVector::from_vec(vec![
            C64::from_polar(1.0, 0.1),
            C64::from_polar(1.0, -2.0),
            ONE,
        ]);
        let out = uqp_minimize(&a, &start, 1e-9, 50).unwrap();
        assert!((out.x - start).norm() < 1e-9);
    }

    #[test]
    fn uqp_two_by_two_aligns_phases() {
        // xᴴAx = −2cos(Δ); grid search over Δ puts the minimum at Δ = 0
        let a =
            CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), -ONE, -ONE, C64::new(0.0, 0.0)]);
        let grid_best = (0..3600)
            .map(|k| k as f64 * TAU / 3600.0)
            .map(|d| (-2.0 * d.cos(), d))
            .fold(
                (f64::INFINITY, 0.0),
                |acc, v| if v.0 < acc.0 { v } else { acc },
            );
        let start = CVector::from_vec(vec![ONE, C64::from_polar(1.0, std::f64::consts::PI / 3.0)]);
        let out = uqp_minimize(&a, &start, 1e-12, 1000).unwrap();
        let delta = (out.x[1] / out.x[0]).arg();
        assert!(delta.abs() < 1e-5);
        assert!(*out.objective_trace.last().unwrap() <= grid_best.0 + 1e-9);
        assert!(out.converged);
    }

    #[test]
    fn uqp_rejects_non_hermitian() {
        let a = CMatrix::from_row_slice(2, 2, &[ONE, ONE, -ONE, ONE]);
        assert!(uqp_minimize(&a, &CVector::from_element(2, ONE), 1e-6, 10).is_err());
    }

    #[test]
    fn derotate_restores_last_entry() {
        let x = CVector::from_vec(vec![C64::from_polar(1.0, 0.5), C64::from_polar(1.0, 1.0)]);
        let d = derotate(&x);
        assert_eq!(d.len(), 1);
        assert!((d[0] - C64::from_polar(1.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn alphabet_projection_examples() {
        let phi = CVector::from_vec(vec![C64::from_polar(1.0, 0.3 * std::f64::consts::PI)]);
        assert_eq!(update_phi1(&phi, 4).levels, vec![1]);
        let on_point = CVector::from_vec(vec![C64::from_polar(1.0, TAU * 3.0 / 8.0)]);
        assert_eq!(update_phi1(&on_point, 8).levels, vec![3]);
        // exactly between levels 0 and 1 of M = 4: tie goes to 0
        let tie = CVector::from_vec(vec![C64::from_polar(1.0, TAU / 8.0)]);
        let lv = update_phi1(&tie, 4).levels[0];
        assert!(lv == 0 || lv == 1);
    }

    #[test]
    fn u_update_examples() {
        let v = linalg::dft_matrix(3);
        // symmetric unitary: DFT matrix
        let phi = linalg::vech(&v).unwrap();
        assert!((update_u(&phi, 3).unwrap() - &v).norm() < 1e-12);
        let phi2 = phi.map(|z| z * 2.0);
        assert!((update_u(&phi2, 3).unwrap() - &v).norm() < 1e-12);
        let ones = CVector::from_element(6, ONE);
        assert!(matches!(
            update_u(&ones, 3),
            Err(Error::RankDeficient { .. })
        ));
    }
}
