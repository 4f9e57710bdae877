//! Comparison points: diagonal RIS, no RIS and random feasible surfaces.

use rand::Rng;

use crate::channel::{complex_normal_matrix, ChannelSet};
use crate::config::{Resolution, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::model::{evaluate, unit_modulus, LemmaTerms, ScatteringMatrix, SnrReport, Structure};
use crate::optimizer::{initial_point, DesignOutcome, InitialPoint, PenaltyProblem};

/// Haar-distributed `n x n` unitary (QR of a complex Gaussian matrix with
/// the phases of `diag(R)` absorbed into `Q`).
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let z = complex_normal_matrix(rng, n, n, 1.0);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// `Φ = V Vᵀ` with Haar `V`: complex symmetric and unitary.
pub fn random_symmetric_unitary<R: Rng + ?Sized>(l: usize, rng: &mut R) -> ScatteringMatrix {
    assert!(l >= 1, "surface needs at least one element");
    let v = haar_unitary(l, rng);
    let mut phi = &v * v.transpose();
    // symmetrize the last few ulps so that Φ = Φᵀ holds exactly
    for j in 0..l {
        for i in (j + 1)..l {
            let s = (phi[(i, j)] + phi[(j, i)]) * 0.5;
            phi[(i, j)] = s;
            phi[(j, i)] = s;
        }
    }
    ScatteringMatrix::unconstrained(phi)
}

/// Symmetric matrix with i.i.d. uniform phases on and below the diagonal.
pub fn random_symmetric_unimodular<R: Rng + ?Sized>(l: usize, rng: &mut R) -> CMatrix {
    let params = random_phases(crate::linalg::vech_len(l), rng);
    crate::linalg::unvech(&params, l).expect("length matches")
}

pub fn random_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| {
        C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
    })
}

/// SNRs without a surface: only the direct link serves the users, and the
/// target (no line of sight to the base station) returns nothing.
pub fn no_ris_snr(cfg: &SystemConfig, channels: &ChannelSet) -> SnrReport {
    let snr_c = crate::model::snr_c_trace(&channels.f, &channels.precoder, cfg.sigma2_c());
    let beta = cfg.design.beta;
    SnrReport {
        snr_c,
        snr_r: 0.0,
        snr_t: (1.0 - beta) * snr_c,
    }
}

/// Unit-modulus diagonal of a diagonal surface design.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPhaseVector(CVector);

impl DiagonalPhaseVector {
    pub fn new(entries: CVector) -> Result<Self> {
        let err = entries
            .iter()
            .fold(0.0_f64, |a, z| a.max((z.norm() - 1.0).abs()));
        if err > 1e-9 {
            return Err(Error::Invalid(format!(
                "diagonal phases have modulus error {err:.3e}"
            )));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &CVector {
        &self.0
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.0)
    }
}

/// Diagonal surface design with the same penalty machinery: the selection
/// matrix replaces the duplication matrix, and there is no unitary latent.
/// Initialized from the diagonal of the fully connected starting point.
pub fn dris_optimize(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    mode: Resolution,
) -> Result<(DiagonalPhaseVector, DesignOutcome)> {
    let (s2c, s2r) = (cfg.sigma2_c(), cfg.sigma2_r());
    let l = cfg.n_elements();
    let terms = LemmaTerms::new(Structure::diagonal(l), channels, s2c, s2r)?;
    let problem = PenaltyProblem {
        terms,
        beta: cfg.design.beta,
        mode,
        unitary_latent: false,
    };
    let (start, _) = initial_point(cfg, channels.trial_index);
    let init = InitialPoint {
        phi: unit_modulus(&start.matrix().diagonal()),
        u: None,
    };
    let outcome = problem.solve(channels, s2c, s2r, &init, &cfg.optimizer)?;
    let diag = DiagonalPhaseVector::new(outcome.deliverable().matrix().diagonal())?;
    Ok((diag, outcome))
}

/// SNRs of the random feasible surface used to start the fully connected
/// design.
pub fn random_baseline_snr(
    cfg: &SystemConfig,
    channels: &ChannelSet,
) -> Result<(ScatteringMatrix, SnrReport)> {
    let (start, _) = initial_point(cfg, channels.trial_index);
    let report = evaluate(
        channels,
        start.matrix(),
        cfg.sigma2_c(),
        cfg.sigma2_r(),
        cfg.design.beta,
    )?;
    Ok((start, report))
}
