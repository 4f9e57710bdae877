//! Block updates and the outer loop checked against brute-force oracles.

use std::f64::consts::TAU;

use bdris::baselines::{haar_unitary, random_phases, random_symmetric_unimodular};
use bdris::channel::{complex_normal_matrix, sample_channels, trial_rng, ChannelSet, Stream};
use bdris::config::{Resolution, SystemConfig};
use bdris::linalg::{self, CMatrix, CVector, C64};
use bdris::model::{evaluate, surrogate_objective, unit_modulus, LemmaTerms, Structure};
use bdris::optimizer::{
    align_common_phase, homogenize, is_non_increasing, lagrangian_value, run_algorithm1,
    update_phi, update_phi0, update_phi1, update_u, uqp_minimize, OptimizerState, Penalties,
    PenaltyProblem,
};
use rand::Rng;

fn small_cfg(lx: usize, ly: usize, n: usize, k: usize, seed: u64) -> SystemConfig {
    let mut cfg = SystemConfig::reference();
    cfg.seed = seed;
    cfg.array.ris_x = lx;
    cfg.array.ris_y = ly;
    cfg.array.n_antennas = n;
    cfg.array.n_users = k;
    cfg
}

fn random_hermitian<R: Rng>(rng: &mut R, m: usize) -> CMatrix {
    linalg::hermitian_part(&complex_normal_matrix(rng, m, m, 1.0))
}

fn random_state<R: Rng>(rng: &mut R, l: usize, m: Option<u32>) -> OptimizerState {
    let n = linalg::vech_len(l);
    let phi = random_phases(n, rng);
    let phi1 = m.map(|m| update_phi1(&random_phases(n, rng), m));
    OptimizerState {
        phi0: random_phases(n, rng),
        phi,
        phi1,
        u: Some(haar_unitary(l, rng)),
        outer_iter: 0,
    }
}

#[test]
fn uqp_objective_never_increases() {
    let mut rng = trial_rng(11, 0, Stream::Baseline);
    for case in 0..50 {
        let m = 1 + case % 20;
        let a = random_hermitian(&mut rng, m);
        let start = random_phases(m, &mut rng);
        let out = uqp_minimize(&a, &start, 1e-12, 300).unwrap();
        assert!(is_non_increasing(&out.objective_trace, 1e-9), "case {case}");
        assert!(out.x.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }
}

#[test]
fn rank_one_comm_problem_reaches_phase_aligned_optimum() {
    // β = 0, negligible penalties, no direct link, L = 2: the φ block
    // maximizes φᴴQ̃φ with rank-one Q̃ = vvᴴ, whose optimum is |vᴴφ| = Σ|v_k|.
    let mut rng = trial_rng(12, 0, Stream::Baseline);
    for _ in 0..10 {
        let v = complex_normal_matrix(&mut rng, 3, 1, 1.0)
            .column(0)
            .into_owned();
        let r = -(&v * v.adjoint());
        let start = random_phases(3, &mut rng);
        let c = CVector::zeros(3);
        let a = homogenize(&r, &c).unwrap();
        let mut xbar = CVector::from_element(4, C64::new(1.0, 0.0));
        xbar.rows_mut(0, 3).copy_from(&start);
        let out = uqp_minimize(&a, &xbar, 1e-12, 5000).unwrap();
        let phi = out.x.rows(0, 3).into_owned();
        let bound: f64 = v.iter().map(|z| z.norm()).sum();
        assert!(v.dotc(&phi).norm() >= 0.999 * bound);
    }
}

fn terms_for(cfg: &SystemConfig, ch: &ChannelSet) -> LemmaTerms {
    LemmaTerms::new(
        Structure::symmetric(cfg.n_elements()),
        ch,
        cfg.sigma2_c(),
        cfg.sigma2_r(),
    )
    .unwrap()
}

#[test]
fn block_updates_do_not_increase_the_lagrangian() {
    let mut rng = trial_rng(13, 0, Stream::Baseline);
    for seed in 0..6 {
        let cfg = small_cfg(1 + seed as usize % 2, 2, 2, 2, seed);
        let ch = sample_channels(&cfg, 0).unwrap();
        let terms = terms_for(&cfg, &ch);
        let beta = [0.0, 0.3, 0.5, 1.0][seed as usize % 4];
        let rho = Penalties::uniform(10f64.powi(seed as i32 % 3 - 1) * terms.comm.q_tilde.norm());
        let mut state = random_state(&mut rng, cfg.n_elements(), Some(4));
        let mut opt = cfg.optimizer.clone();
        opt.max_inner_iters = 2000;

        let before = lagrangian_value(&state, &terms, beta, &rho).unwrap();
        let qbar0 = terms.qbar(&state.phi0).unwrap();
        let (phi, _) = update_phi(&state, &terms, &qbar0, &opt, &rho, beta).unwrap();
        state.phi = phi.clone();
        let mid = lagrangian_value(&state, &terms, beta, &rho).unwrap();
        let (phi0, _) = update_phi0(&state, &phi, &terms, &opt, &rho, beta).unwrap();
        state.phi0 = phi0;
        let after = lagrangian_value(&state, &terms, beta, &rho).unwrap();
        align_common_phase(&mut state, &terms, beta, &rho);
        let aligned = lagrangian_value(&state, &terms, beta, &rho).unwrap();

        let slack = 1e-9 * before.abs().max(1.0);
        assert!(mid <= before + slack, "phi step: {before} -> {mid}");
        assert!(after <= mid + slack, "phi0 step: {mid} -> {after}");
        assert!(
            aligned <= after + slack,
            "phase alignment: {after} -> {aligned}"
        );
    }
}

#[test]
fn phi0_step_without_radar_aligns_with_phi() {
    let mut rng = trial_rng(14, 0, Stream::Baseline);
    let cfg = small_cfg(2, 2, 2, 2, 5);
    let mut ch = sample_channels(&cfg, 0).unwrap();
    for alpha_zero in [false, true] {
        let beta = if alpha_zero {
            ch.alpha_t = C64::new(0.0, 0.0);
            0.7
        } else {
            0.0
        };
        let terms = terms_for(&cfg, &ch);
        let state = random_state(&mut rng, 4, None);
        let phi = random_phases(10, &mut rng);
        let mut opt = cfg.optimizer.clone();
        opt.eps_inner_phi0 = 1e-13;
        opt.max_inner_iters = 10_000;
        let (phi0, _) =
            update_phi0(&state, &phi, &terms, &opt, &Penalties::uniform(1.0), beta).unwrap();
        let err = (phi0 - &phi).norm();
        assert!(err < 1e-9, "{err}");
    }
}

#[test]
fn lagrangian_at_consensus_is_negative_objective() {
    let mut rng = trial_rng(15, 0, Stream::Baseline);
    let cfg = small_cfg(2, 2, 3, 2, 6);
    let ch = sample_channels(&cfg, 0).unwrap();
    let terms = terms_for(&cfg, &ch);
    let a = random_symmetric_unimodular(4, &mut rng);
    // a symmetric unitary keeps every penalty at zero
    let u = linalg::dft_matrix(4);
    for (phi, uu) in [
        (linalg::vech(&a).unwrap(), a.clone()),
        (linalg::vech(&u).unwrap(), u.clone()),
    ] {
        let state = OptimizerState {
            phi0: phi.clone(),
            phi1: None,
            u: Some(uu),
            phi: phi.clone(),
            outer_iter: 0,
        };
        let f = surrogate_objective(&phi, &phi, &terms, 0.4).unwrap();
        let lagr = lagrangian_value(&state, &terms, 0.4, &Penalties::uniform(0.0)).unwrap();
        assert!((lagr + f).abs() <= 1e-12 * f.abs());
    }
    let phi = linalg::vech(&u).unwrap();
    let state = OptimizerState {
        phi0: phi.clone(),
        phi1: None,
        u: Some(u),
        phi: phi.clone(),
        outer_iter: 0,
    };
    let f = surrogate_objective(&phi, &phi, &terms, 0.4).unwrap();
    let lagr = lagrangian_value(&state, &terms, 0.4, &Penalties::uniform(1e3)).unwrap();
    assert!((lagr + f).abs() <= 1e-9 * f.abs().max(1.0));
}

#[test]
fn alphabet_projection_matches_exhaustive_search() {
    let mut rng = trial_rng(16, 0, Stream::Baseline);
    for m in [2u32, 4, 8, 16] {
        let phi = random_phases(10_000, &mut rng);
        let got = update_phi1(&phi, m);
        for (z, &lv) in phi.iter().zip(&got.levels) {
            // nearest point on the circle by chordal distance
            let best = (0..m)
                .min_by(|&a, &b| {
                    let da = (z - C64::from_polar(1.0, TAU * a as f64 / m as f64)).norm();
                    let db = (z - C64::from_polar(1.0, TAU * b as f64 / m as f64)).norm();
                    da.total_cmp(&db)
                })
                .unwrap();
            assert_eq!(lv, best);
        }
        let v = got.to_vector();
        assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }
}

#[test]
fn procrustes_beats_random_unitaries() {
    let mut rng = trial_rng(17, 0, Stream::Baseline);
    for _ in 0..20 {
        let x = random_symmetric_unimodular(4, &mut rng);
        let u = update_u(&linalg::vech(&x).unwrap(), 4).unwrap();
        assert!(linalg::unitarity_residual(&u) < 1e-9);
        let d = (&x - &u).norm();
        for _ in 0..1000 {
            let v = haar_unitary(4, &mut rng);
            assert!(d <= (&x - v).norm() + 1e-12);
        }
    }
}

fn grid_search_l1(cfg: &SystemConfig, ch: &ChannelSet) -> f64 {
    (0..10_000)
        .map(|k| {
            let phi = CMatrix::from_element(1, 1, C64::from_polar(1.0, TAU * k as f64 / 10_000.0));
            evaluate(ch, &phi, cfg.sigma2_c(), cfg.sigma2_r(), cfg.design.beta)
                .unwrap()
                .snr_t
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn single_element_matches_grid_search() {
    for seed in 0..5 {
        let mut cfg = small_cfg(1, 1, 4, 2, seed);
        // pull the users close to the base station so the direct link matters
        cfg.geometry.users = vec![[3.0, 3.0, 0.0]];
        let ch = sample_channels(&cfg, 0).unwrap();
        let out = run_algorithm1(&cfg, &ch, Resolution::Continuous).unwrap();
        let got = evaluate(
            &ch,
            out.deliverable().matrix(),
            cfg.sigma2_c(),
            cfg.sigma2_r(),
            cfg.design.beta,
        )
        .unwrap()
        .snr_t;
        let best = grid_search_l1(&cfg, &ch);
        assert!(got >= 0.999 * best, "seed {seed}: {got} vs {best}");
    }
}

#[test]
fn single_element_comm_only_aligns_the_phase() {
    let mut cfg = small_cfg(1, 1, 2, 1, 3);
    cfg.design.beta = 0.0;
    cfg.geometry.users = vec![[3.0, 3.0, 0.0]];
    let ch = sample_channels(&cfg, 0).unwrap();
    let out = run_algorithm1(&cfg, &ch, Resolution::Continuous).unwrap();
    let got = evaluate(
        &ch,
        out.deliverable().matrix(),
        cfg.sigma2_c(),
        cfg.sigma2_r(),
        0.0,
    )
    .unwrap();
    assert!(got.snr_c >= 0.999 * grid_search_l1(&cfg, &ch));
}

#[test]
fn four_elements_beat_random_search() {
    for seed in 0..10 {
        let cfg = small_cfg(2, 2, 2, 2, 100 + seed);
        let ch = sample_channels(&cfg, 0).unwrap();
        let out = run_algorithm1(&cfg, &ch, Resolution::Continuous).unwrap();
        let got = evaluate(
            &ch,
            out.deliverable().matrix(),
            cfg.sigma2_c(),
            cfg.sigma2_r(),
            cfg.design.beta,
        )
        .unwrap()
        .snr_t;
        let mut rng = trial_rng(seed, 0, Stream::Baseline);
        for _ in 0..200 {
            let cand = random_symmetric_unimodular(4, &mut rng);
            let r = evaluate(&ch, &cand, cfg.sigma2_c(), cfg.sigma2_r(), cfg.design.beta).unwrap();
            assert!(got >= r.snr_t, "seed {seed}: {got} < {}", r.snr_t);
        }
    }
}

#[test]
fn outputs_are_feasible_and_deterministic() {
    let cfg = small_cfg(2, 3, 3, 2, 21);
    let ch = sample_channels(&cfg, 2).unwrap();
    for mode in [
        Resolution::Continuous,
        Resolution::Discrete(2),
        Resolution::Discrete(8),
    ] {
        let a = run_algorithm1(&cfg, &ch, mode).unwrap();
        let b = run_algorithm1(&cfg, &ch, mode).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.deliverable().matrix(), b.deliverable().matrix());

        let phi = a.phi.matrix();
        assert_eq!(phi, &phi.transpose());
        assert!(a.phi.max_modulus_error() <= 1e-9);
        if let Resolution::Discrete(m) = mode {
            let p1 = a.phi1.as_ref().unwrap();
            assert_eq!(p1.matrix(), &p1.matrix().transpose());
            let levels = &a.state.phi1.as_ref().unwrap().levels;
            assert!(levels.iter().all(|&k| k < m));
        }
        for rec in &a.trace {
            assert!(rec.unitarity_residual.is_finite());
            assert!(rec.res_phi0.is_finite());
        }
        let s = &a.state;
        assert!(s
            .phi
            .iter()
            .chain(s.phi0.iter())
            .all(|z| (z.norm() - 1.0).abs() <= 1e-9));
        assert!(linalg::unitarity_residual(s.u.as_ref().unwrap()) <= 1e-9);
    }
}

#[test]
fn zero_reflectivity_radar_only_terminates_feasibly() {
    let mut cfg = small_cfg(2, 2, 2, 2, 8);
    cfg.design.beta = 1.0;
    let mut ch = sample_channels(&cfg, 0).unwrap();
    ch.alpha_t = C64::new(0.0, 0.0);
    let out = run_algorithm1(&cfg, &ch, Resolution::Continuous).unwrap();
    let phi = out.deliverable();
    assert_eq!(phi.matrix(), &phi.matrix().transpose());
    assert!(phi.max_modulus_error() <= 1e-9);
    assert_eq!(
        evaluate(&ch, phi.matrix(), cfg.sigma2_c(), cfg.sigma2_r(), 1.0)
            .unwrap()
            .snr_t,
        0.0
    );
}

#[test]
fn diagonal_problem_at_one_element_matches_full_problem() {
    let mut cfg = small_cfg(1, 1, 3, 2, 9);
    cfg.geometry.users = vec![[3.0, 3.0, 0.0]];
    let ch = sample_channels(&cfg, 0).unwrap();
    let full = run_algorithm1(&cfg, &ch, Resolution::Continuous).unwrap();
    let (_, diag) = bdris::baselines::dris_optimize(&cfg, &ch, Resolution::Continuous).unwrap();
    let e = |m: &CMatrix| {
        evaluate(&ch, m, cfg.sigma2_c(), cfg.sigma2_r(), cfg.design.beta)
            .unwrap()
            .snr_t
    };
    let (a, b) = (
        e(full.deliverable().matrix()),
        e(diag.deliverable().matrix()),
    );
    assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
}

#[test]
fn problem_rejects_wrong_start_length() {
    let cfg = small_cfg(2, 2, 2, 2, 1);
    let ch = sample_channels(&cfg, 0).unwrap();
    let problem = PenaltyProblem {
        terms: terms_for(&cfg, &ch),
        beta: 0.5,
        mode: Resolution::Continuous,
        unitary_latent: true,
    };
    let init = bdris::optimizer::InitialPoint {
        phi: unit_modulus(&CVector::from_element(3, C64::new(1.0, 0.0))),
        u: None,
    };
    assert!(problem.initial_state(&init).is_err());
}
