//! Scenario synthesis: steering vectors, geometry, path loss and Rayleigh
//! channel draws.
//!
//! Every random quantity is drawn from a ChaCha stream keyed by
//! `(seed, trial_index, purpose)`, so a trial can be regenerated on its own
//! and trials can run in any order.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{PrecoderKind, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{dft_matrix, CMatrix, CVector, C64};

/// Independent random streams derived from one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Channels = 0,
    Precoder = 1,
    Initialization = 2,
    Baseline = 3,
}

/// The generator for `(seed, trial_index, stream)`.
pub fn trial_rng(seed: u64, trial_index: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index.wrapping_mul(16).wrapping_add(stream as u64));
    rng
}

/// One draw from `CN(0, variance)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Matrix with i.i.d. `CN(0, variance)` entries, filled column by column.
pub fn complex_normal_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for z in m.iter_mut() {
        *z = complex_normal(rng, variance);
    }
    m
}

/// UPA steering vector `a_x ⊗ a_y`, with per-axis phase step
/// `2π d/λ · cos θ_h · sin θ_v`.
pub fn steering_vector(
    theta_h: f64,
    theta_v: f64,
    lx: usize,
    ly: usize,
    wavelength: f64,
    spacing: f64,
) -> CVector {
    let step = 2.0 * PI * spacing / wavelength * theta_h.cos() * theta_v.sin();
    let axis = |len: usize| CVector::from_fn(len, |k, _| C64::from_polar(1.0, step * k as f64));
    let ax = axis(lx);
    let ay = axis(ly);
    CVector::from_fn(lx * ly, |k, _| ax[k / ly] * ay[k % ly])
}

/// Azimuth (from +x, in `[0, 2π)`) and polar elevation (from +z, in
/// `[0, π]`) of `target` as seen from `origin`.
pub fn doa_from_positions(origin: [f64; 3], target: [f64; 3]) -> Result<(f64, f64)> {
    let d = [
        target[0] - origin[0],
        target[1] - origin[1],
        target[2] - origin[2],
    ];
    let r = distance(origin, target);
    if r == 0.0 {
        return Err(Error::Invalid("target coincides with the surface".into()));
    }
    let mut azimuth = d[1].atan2(d[0]);
    if azimuth < 0.0 {
        azimuth += 2.0 * PI;
    }
    if azimuth >= 2.0 * PI {
        azimuth -= 2.0 * PI;
    }
    let elevation = (d[2] / r).clamp(-1.0, 1.0).acos();
    Ok((azimuth, elevation))
}

pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Large-scale gain `p0 · d^(-exponent)`.
pub fn path_loss(distance: f64, exponent: f64, p0: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Invalid(format!(
            "path loss needs a positive distance, got {distance}"
        )));
    }
    Ok(p0 * distance.powf(-exponent))
}

/// Channel state for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Trial the realization was drawn for; keys the optimizer's
    /// initialization stream.
    pub trial_index: u64,
    /// Direct base-station-to-users channel, `K x N`.
    pub f: CMatrix,
    /// Surface-to-users channel, `K x L`.
    pub h: CMatrix,
    /// Base-station-to-surface channel, `L x N`.
    pub g: CMatrix,
    pub theta_h: f64,
    pub theta_v: f64,
    /// Target steering vector at the surface.
    pub steering: CVector,
    /// Complex target reflectivity.
    pub alpha_t: C64,
    /// Precoder, `N x K`.
    pub precoder: CMatrix,
}

impl ChannelSet {
    pub fn n_elements(&self) -> usize {
        self.g.nrows()
    }
}

/// Draws the channels of trial `trial_index`; a pure function of its inputs.
pub fn sample_channels(cfg: &SystemConfig, trial_index: u64) -> Result<ChannelSet> {
    let n = cfg.n_antennas();
    let k = cfg.n_users();
    let l = cfg.n_elements();
    let p0 = cfg.p0();
    let pl = &cfg.path_loss;
    let geo = &cfg.geometry;

    let p_rd = path_loss(distance(geo.dfbs, geo.ris), pl.exp_rd, p0)?;
    let mut rng = trial_rng(cfg.seed, trial_index, Stream::Channels);

    let g = complex_normal_matrix(&mut rng, l, n, p_rd);

    let mut h = CMatrix::zeros(k, l);
    for u in 0..k {
        let p_ur = path_loss(distance(cfg.user_position(u), geo.ris), pl.exp_ur, p0)?;
        for j in 0..l {
            h[(u, j)] = complex_normal(&mut rng, p_ur);
        }
    }

    let mut f = CMatrix::zeros(k, n);
    for u in 0..k {
        let p_ud = path_loss(distance(cfg.user_position(u), geo.dfbs), pl.exp_ud, p0)?;
        for j in 0..n {
            f[(u, j)] = complex_normal(&mut rng, p_ud);
        }
    }

    let alpha_t = complex_normal(&mut rng, 1.0);
    let (theta_h, theta_v) = doa_from_positions(geo.ris, geo.target)?;
    let steering = steering_vector(
        theta_h,
        theta_v,
        cfg.array.ris_x,
        cfg.array.ris_y,
        cfg.wavelength(),
        cfg.spacing(),
    );

    let mut prng = trial_rng(cfg.seed, trial_index, Stream::Precoder);
    let precoder = make_precoder(cfg, &mut prng);

    Ok(ChannelSet {
        trial_index,
        f,
        h,
        g,
        theta_h,
        theta_v,
        steering,
        alpha_t,
        precoder,
    })
}

/// Fixed precoder with `Tr(P Pᴴ)` equal to the configured transmit power.
pub fn make_precoder<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> CMatrix {
    let n = cfg.n_antennas();
    let k = cfg.n_users();
    let raw = match cfg.design.precoder {
        PrecoderKind::Random => complex_normal_matrix(rng, n, k, 1.0),
        PrecoderKind::Dft => dft_matrix(n).columns(0, k.min(n)).into_owned(),
    };
    let power = raw.norm_squared();
    if power == 0.0 {
        return raw;
    }
    raw.scale((cfg.design.tx_power_w / power).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn steering_zero_gradient_is_all_ones() {
        let a = steering_vector(PI / 2.0, 0.7, 3, 4, 0.01, 0.005);
        assert_eq!(a.len(), 12);
        assert!(a.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-12));
        let a = steering_vector(0.3, 0.2, 1, 1, 1.0, 0.5);
        assert_eq!(a.as_slice(), &[C64::new(1.0, 0.0)]);
    }

    #[test]
    fn steering_half_wavelength_broadside() {
        // cos θ_h sin θ_v = 1 with d = λ/2 gives a phase step of π
        let a = steering_vector(0.0, PI / 2.0, 2, 1, 1.0, 0.5);
        assert!((a[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn doa_examples() {
        let o = [0.0; 3];
        let (h, v) = doa_from_positions(o, [1.0, 0.0, 0.0]).unwrap();
        assert!(close(h, 0.0, 1e-15) && close(v, PI / 2.0, 1e-15));
        let (h, v) = doa_from_positions(o, [0.0, 1.0, 0.0]).unwrap();
        assert!(close(h, PI / 2.0, 1e-15) && close(v, PI / 2.0, 1e-15));
        // |Δ| = 2, cos(elevation) = √2/2
        let (h, v) = doa_from_positions(o, [1.0, 1.0, 2f64.sqrt()]).unwrap();
        assert!(close(h, PI / 4.0, 1e-15) && close(v, PI / 4.0, 1e-15));
        let (h, _) = doa_from_positions(o, [-1.0, -1.0, 0.0]).unwrap();
        assert!(close(h, 1.25 * PI, 1e-15));
        assert!(doa_from_positions(o, o).is_err());
    }

    #[test]
    fn path_loss_examples() {
        assert_eq!(path_loss(1.0, 2.8, 1e-3).unwrap(), 1e-3);
        assert!(close(path_loss(10.0, 2.0, 1e-3).unwrap(), 1e-5, 1e-20));
        assert_eq!(path_loss(123.0, 0.0, 1e-3).unwrap(), 1e-3);
        assert!(path_loss(0.0, 2.0, 1e-3).is_err());
        assert!(path_loss(-1.0, 2.0, 1e-3).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = SystemConfig::reference();
        let a = sample_channels(&cfg, 3).unwrap();
        let b = sample_channels(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_channels(&cfg, 4).unwrap();
        assert_ne!(a.g, c.g);
    }

    #[test]
    fn zero_reference_gain_gives_zero_channels() {
        let mut cfg = SystemConfig::reference();
        cfg.path_loss.p0_db = f64::NEG_INFINITY;
        let ch = sample_channels(&cfg, 0).unwrap();
        assert!(ch
            .f
            .iter()
            .chain(ch.h.iter())
            .chain(ch.g.iter())
            .all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn precoder_power_is_normalized() {
        for kind in [PrecoderKind::Random, PrecoderKind::Dft] {
            let mut cfg = SystemConfig::reference();
            cfg.design.precoder = kind;
            cfg.design.tx_power_w = 2.5;
            let p = sample_channels(&cfg, 1).unwrap().precoder;
            assert_eq!(p.shape(), (8, 4));
            let tr = (&p * p.adjoint()).trace().re;
            assert!(((tr - 2.5) / 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn dft_precoder_square_is_scaled_identity_gram() {
        let mut cfg = SystemConfig::reference();
        cfg.array.n_antennas = 4;
        cfg.array.n_users = 4;
        cfg.design.precoder = PrecoderKind::Dft;
        let mut rng = trial_rng(0, 0, Stream::Precoder);
        let p = make_precoder(&cfg, &mut rng);
        let gram = &p * p.adjoint();
        let expect = CMatrix::identity(4, 4).scale(0.25);
        assert!((gram - expect).norm() < 1e-12);
    }

    #[test]
    fn random_precoder_reproducible() {
        let cfg = SystemConfig::reference();
        let p1 = make_precoder(&cfg, &mut trial_rng(9, 2, Stream::Precoder));
        let p2 = make_precoder(&cfg, &mut trial_rng(9, 2, Stream::Precoder));
        assert_eq!(p1, p2);
    }
}
