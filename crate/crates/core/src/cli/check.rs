//! Built-in self test: the model identities and optimizer building blocks on
//! small random instances drawn from a fixed seed.

use std::str::FromStr;

use rand::Rng;

use crate::baselines::{haar_unitary, random_phases, random_symmetric_unimodular};
use crate::channel::{complex_normal, complex_normal_matrix, trial_rng, ChannelSet, Stream};
use crate::linalg::{self, CMatrix, CVector, DuplicationMatrix};
use crate::model::{
    effective_channel, hermitian_form, radar_matrix, snr_c_quadratic, snr_c_trace, snr_r_quartic,
    snr_r_trace, LemmaTerms, Structure,
};
use crate::optimizer::{is_non_increasing, uqp_minimize};

const CHECK_SEED: u64 = 0x5EED_B0B5;

/// Deliberate corruptions used to confirm that each check can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    DuplicationOffset,
    QtildeSign,
    PrintedFactor,
    SwapArgument,
    UqpUnderloading,
    ProcrustesOrder,
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "duplication-offset" => Fault::DuplicationOffset,
            "qtilde-sign" => Fault::QtildeSign,
            "printed-factor" => Fault::PrintedFactor,
            "swap-argument" => Fault::SwapArgument,
            "uqp-underloading" => Fault::UqpUnderloading,
            "procrustes-order" => Fault::ProcrustesOrder,
            _ => return Err(format!("unknown fault {s:?}")),
        })
    }
}

/// Result of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn random_channels<R: Rng>(rng: &mut R, l: usize, n: usize, k: usize) -> ChannelSet {
    ChannelSet {
        trial_index: 0,
        f: complex_normal_matrix(rng, k, n, 1.0),
        h: complex_normal_matrix(rng, k, l, 1.0),
        g: complex_normal_matrix(rng, l, n, 1.0),
        theta_h: 0.0,
        theta_v: 0.0,
        steering: random_phases(l, rng),
        alpha_t: complex_normal(rng, 1.0),
        precoder: complex_normal_matrix(rng, n, k, 1.0),
    }
}

/// Small instances with `L ∈ {2,3,4}`, `N, K ∈ {2,3}`.
fn instances(count: usize) -> impl Iterator<Item = (ChannelSet, CMatrix, CMatrix)> {
    let mut rng = trial_rng(CHECK_SEED, 1, Stream::Baseline);
    (0..count).map(move |i| {
        let (l, n, k) = (2 + i % 3, 2 + (i / 3) % 2, 2 + (i / 6) % 2);
        let ch = random_channels(&mut rng, l, n, k);
        let phi = random_symmetric_unimodular(l, &mut rng);
        let phi0 = random_symmetric_unimodular(l, &mut rng);
        (ch, phi, phi0)
    })
}

fn duplication_identity(fault: Option<Fault>) -> crate::Result<f64> {
    let mut rng = trial_rng(CHECK_SEED, 0, Stream::Baseline);
    let mut worst = 0.0_f64;
    for l in 1..=6 {
        let x = random_symmetric_unimodular(l, &mut rng);
        let mut params = linalg::vech(&x)?;
        if fault == Some(Fault::DuplicationOffset) && params.len() > 1 {
            params = CVector::from_fn(params.len(), |i, _| params[(i + 1) % params.len()]);
        }
        let d = DuplicationMatrix::new(l);
        worst = worst.max((d.apply(&params) - linalg::vec(&x)).norm());
    }
    Ok(worst)
}

fn lemma1(fault: Option<Fault>) -> crate::Result<f64> {
    let mut worst = 0.0_f64;
    for (ch, phi, _) in instances(100) {
        let l = phi.nrows();
        let mut terms = LemmaTerms::new(Structure::symmetric(l), &ch, 1.0, 1.0)?;
        if fault == Some(Fault::QtildeSign) {
            terms.comm.q_tilde = -terms.comm.q_tilde;
        }
        let quad = snr_c_quadratic(&linalg::vech(&phi)?, &terms)?;
        let trace = snr_c_trace(
            &effective_channel(&ch.f, &ch.h, &ch.g, &phi)?,
            &ch.precoder,
            1.0,
        );
        worst = worst.max(rel(quad, trace));
    }
    Ok(worst)
}

fn lemma2(fault: Option<Fault>) -> crate::Result<f64> {
    let mut worst = 0.0_f64;
    for (ch, phi, _) in instances(100) {
        let l = phi.nrows();
        let mut model_ch = ch.clone();
        if fault == Some(Fault::PrintedFactor) {
            model_ch.g = ch.g.conjugate();
        }
        let terms = LemmaTerms::new(Structure::symmetric(l), &model_ch, 1.0, 1.0)?;
        let quartic = snr_r_quartic(&linalg::vech(&phi)?, &terms)?;
        let trace = snr_r_trace(
            &radar_matrix(&ch.g, &phi, &ch.steering, ch.alpha_t)?,
            &ch.precoder,
            1.0,
        );
        worst = worst.max(rel(quartic, trace));
    }
    Ok(worst)
}

fn swap_identity(fault: Option<Fault>) -> crate::Result<f64> {
    let mut worst = 0.0_f64;
    for (ch, phi, phi0) in instances(100) {
        let l = phi.nrows();
        let terms = LemmaTerms::new(Structure::symmetric(l), &ch, 1.0, 1.0)?;
        let (p, p0) = (linalg::vech(&phi)?, linalg::vech(&phi0)?);
        let lhs = hermitian_form(&terms.qbar(&p0)?, &p)?;
        let arg = if fault == Some(Fault::SwapArgument) {
            &p0
        } else {
            &p
        };
        let rhs = hermitian_form(&terms.qbarbar(arg)?, &p0)?;
        worst = worst.max(rel(rhs, lhs));
    }
    Ok(worst)
}

/// Largest single-step increase of the loaded iteration's objective.
fn uqp_monotonicity(fault: Option<Fault>) -> crate::Result<f64> {
    let mut rng = trial_rng(CHECK_SEED, 2, Stream::Baseline);
    let mut worst = 0.0_f64;
    for case in 0..50 {
        let m = 2 + case % 19;
        let a = linalg::hermitian_part(&complex_normal_matrix(&mut rng, m, m, 1.0));
        let start = random_phases(m, &mut rng);
        let trace = if fault == Some(Fault::UqpUnderloading) {
            // loading below the spectrum turns the descent into an ascent
            let lmin = -linalg::max_eigenvalue_hermitian(&(-&a))?;
            let mut x = start;
            let mut t = vec![hermitian_form(&a, &x)?];
            for _ in 0..50 {
                let y = &x * crate::linalg::C64::new(lmin, 0.0) - &a * &x;
                x = crate::model::unit_modulus(&y);
                t.push(hermitian_form(&a, &x)?);
            }
            t
        } else {
            uqp_minimize(&a, &start, 1e-12, 300)?.objective_trace
        };
        if !is_non_increasing(&trace, 0.0) {
            let rise = trace.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            worst = worst.max(rise);
        }
    }
    Ok(worst)
}

/// Optimality of the unitary projection: the stationarity residual of
/// `UᴴX` (Hermitian at the optimum) plus any loss against random unitaries.
fn procrustes(fault: Option<Fault>) -> crate::Result<f64> {
    let mut rng = trial_rng(CHECK_SEED, 3, Stream::Baseline);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let x = random_symmetric_unimodular(4, &mut rng);
        let u = if fault == Some(Fault::ProcrustesOrder) {
            let d = linalg::svd(&x)?;
            &d.right * d.left.adjoint()
        } else {
            linalg::nearest_unitary(&x)?
        };
        let d = (&x - &u).norm();
        let best_random = (0..200)
            .map(|_| (&x - haar_unitary(4, &mut rng)).norm())
            .fold(f64::INFINITY, f64::min);
        let m = u.adjoint() * &x;
        let stationarity = linalg::hermitian_residual(&m) / x.norm();
        worst = worst.max(stationarity).max(d - best_random);
    }
    Ok(worst)
}

type CheckFn = fn(Option<Fault>) -> crate::Result<f64>;

/// Runs every check; `fault` corrupts the matching one.
pub fn run_checks(fault: Option<Fault>) -> crate::Result<Vec<CheckOutcome>> {
    let table: [(&'static str, CheckFn, f64); 6] = [
        ("duplication-identity", duplication_identity, 1e-12),
        ("lemma1-equivalence", lemma1, 1e-9),
        ("lemma2-equivalence", lemma2, 1e-9),
        ("swap-identity", swap_identity, 1e-9),
        ("uqp-monotonicity", uqp_monotonicity, 1e-9),
        ("procrustes-optimality", procrustes, 1e-9),
    ];
    table
        .into_iter()
        .map(|(name, f, tolerance)| {
            Ok(CheckOutcome {
                name,
                residual: f(fault)?,
                tolerance,
            })
        })
        .collect()
}
