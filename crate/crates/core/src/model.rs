//! Communication and radar SNRs.
//!
//! Both SNRs are available in two forms: the trace form computed from the
//! effective channel and radar matrices, and a quadratic form in the
//! parameter vector of the scattering matrix (`vech(Φ)` for the fully
//! connected surface, `diag(Φ)` for the diagonal one). The two must agree;
//! the oracle tests and `bdris check` verify that they do.
//!
//! With `vec(A X B) = (Bᵀ ⊗ A) vec(X)`:
//!
//! * `vec(H Φ G) = (Gᵀ ⊗ H) D φ`
//! * `vec(Gᵀ Φ₀ a aᵀ Φ G) = (Gᵀ ⊗ Gᵀ Φ₀ a aᵀ) D φ`, quadratic in `φ` for fixed `Φ₀`
//! * the same matrix equals `(Gᵀ Φᵀ a aᵀ ⊗ Gᵀ) D φ₀` for fixed `Φ`, which gives
//!   the swapped form `φ₀ᴴ Q̄̄(Φ) φ₀`.

use crate::config::Resolution;
use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_part, kron, CMatrix, CVector, DuplicationMatrix, C64, ONE};

/// Imaginary residue tolerated (relative) when reading a Hermitian form as real.
const REAL_PART_TOL: f64 = 1e-9;

/// How the parameter vector maps onto the `L x L` scattering matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Structure {
    /// Complex symmetric `Φ`, parameterized by `vech(Φ)`.
    Symmetric(DuplicationMatrix),
    /// Diagonal `Φ`, parameterized by its diagonal.
    Diagonal(usize),
}

impl Structure {
    pub fn symmetric(l: usize) -> Self {
        Structure::Symmetric(DuplicationMatrix::new(l))
    }

    pub fn diagonal(l: usize) -> Self {
        Structure::Diagonal(l)
    }

    /// Surface size `L`.
    pub fn n_elements(&self) -> usize {
        match self {
            Structure::Symmetric(d) => d.n(),
            Structure::Diagonal(l) => *l,
        }
    }

    /// Length of the parameter vector.
    pub fn dim(&self) -> usize {
        match self {
            Structure::Symmetric(d) => d.cols(),
            Structure::Diagonal(l) => *l,
        }
    }

    /// `B M` where `M` is the lifting matrix (`D_L`, or the selection
    /// matrix `S` with `vec(diag x) = S x`).
    pub fn right_apply(&self, b: &CMatrix) -> CMatrix {
        match self {
            Structure::Symmetric(d) => d.right_apply(b),
            Structure::Diagonal(l) => {
                assert_eq!(b.ncols(), l * l);
                CMatrix::from_fn(b.nrows(), *l, |i, k| b[(i, k * l + k)])
            }
        }
    }

    /// The scattering matrix described by `params`.
    pub fn to_matrix(&self, params: &CVector) -> Result<CMatrix> {
        match self {
            Structure::Symmetric(d) => linalg::unvech(params, d.n()),
            Structure::Diagonal(l) => {
                if params.len() != *l {
                    return Err(Error::Dimension {
                        op: "Structure::to_matrix",
                        expected: format!("length {l}"),
                        got: format!("length {}", params.len()),
                    });
                }
                Ok(CMatrix::from_diagonal(params))
            }
        }
    }

    /// Parameters of a matrix (lower triangle or diagonal; other entries ignored).
    pub fn params_of(&self, m: &CMatrix) -> Result<CVector> {
        match self {
            Structure::Symmetric(_) => linalg::vech(m),
            Structure::Diagonal(_) => Ok(m.diagonal()),
        }
    }
}

/// A scattering matrix with the alphabet it was designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    matrix: CMatrix,
    alphabet: Resolution,
}

impl ScatteringMatrix {
    /// Builds `Φ` from `vech(Φ)`; symmetric by construction.
    pub fn from_vech(params: &CVector, l: usize, alphabet: Resolution) -> Result<Self> {
        let matrix = linalg::unvech(params, l)?;
        Self::new(matrix, alphabet)
    }

    /// Wraps a matrix, checking unit modulus when an alphabet is set.
    pub fn new(matrix: CMatrix, alphabet: Resolution) -> Result<Self> {
        linalg::check_finite(&matrix, "ScatteringMatrix")?;
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                op: "ScatteringMatrix",
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let s = Self { matrix, alphabet };
        if let Resolution::Discrete(_) = alphabet {
            let err = s.max_modulus_error();
            if err > 1e-9 {
                return Err(Error::Invalid(format!(
                    "alphabet-constrained scattering matrix has modulus error {err:.3e}"
                )));
            }
        }
        Ok(s)
    }

    /// Wraps an arbitrary matrix without alphabet checks.
    pub fn unconstrained(matrix: CMatrix) -> Self {
        Self {
            matrix,
            alphabet: Resolution::Continuous,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn alphabet(&self) -> Resolution {
        self.alphabet
    }

    pub fn n_elements(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |Φ_kl − Φ_lk|`.
    pub fn symmetry_residual(&self) -> f64 {
        let m = &self.matrix;
        (m - m.transpose()).iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    /// `max | |Φ_kl| − 1 |` over the nonzero pattern: the diagonal only
    /// when every off-diagonal entry is exactly zero, all entries otherwise.
    pub fn max_modulus_error(&self) -> f64 {
        let m = &self.matrix;
        let diagonal = m
            .iter()
            .enumerate()
            .all(|(i, z)| i % m.nrows() == i / m.nrows() || *z == C64::new(0.0, 0.0));
        let err = |a: f64, z: &C64| a.max((z.norm() - 1.0).abs());
        if diagonal {
            m.diagonal().iter().fold(0.0, err)
        } else {
            m.iter().fold(0.0, err)
        }
    }

    /// `‖ΦᴴΦ − I‖_F`.
    pub fn unitarity_residual(&self) -> f64 {
        linalg::unitarity_residual(&self.matrix)
    }
}

fn check_dims(
    op: &'static str,
    ok: bool,
    expected: impl Fn() -> String,
    got: impl Fn() -> String,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension {
            op,
            expected: expected(),
            got: got(),
        })
    }
}

/// `C = F + H Φ G`.
pub fn effective_channel(f: &CMatrix, h: &CMatrix, g: &CMatrix, phi: &CMatrix) -> Result<CMatrix> {
    let l = phi.nrows();
    check_dims(
        "effective_channel",
        phi.ncols() == l && h.ncols() == l && g.nrows() == l && f.shape() == (h.nrows(), g.ncols()),
        || format!("H: K x {l}, G: {l} x N, F: K x N"),
        || {
            format!(
                "F {:?}, H {:?}, Phi {:?}, G {:?}",
                f.shape(),
                h.shape(),
                phi.shape(),
                g.shape()
            )
        },
    )?;
    Ok(f + h * phi * g)
}

/// `R = α_T Gᵀ Φ a aᵀ Φ G`, at most rank one.
pub fn radar_matrix(g: &CMatrix, phi: &CMatrix, a: &CVector, alpha_t: C64) -> Result<CMatrix> {
    let l = phi.nrows();
    check_dims(
        "radar_matrix",
        phi.ncols() == l && g.nrows() == l && a.len() == l,
        || format!("G: {l} x N, a: {l}"),
        || format!("G {:?}, Phi {:?}, a {}", g.shape(), phi.shape(), a.len()),
    )?;
    let left = g.transpose() * (phi * a); // N
    let right = a.transpose() * phi * g; // 1 x N
    Ok((left * right) * alpha_t)
}

/// `Tr(C P Pᴴ Cᴴ) / σ² = ‖C P‖_F² / σ²`.
pub fn snr_c_trace(c: &CMatrix, p: &CMatrix, sigma2_c: f64) -> f64 {
    (c * p).norm_squared() / sigma2_c
}

/// `Tr(R P Pᴴ Rᴴ) / σ²`.
pub fn snr_r_trace(r: &CMatrix, p: &CMatrix, sigma2_r: f64) -> f64 {
    (r * p).norm_squared() / sigma2_r
}

/// Real value of `xᴴ A y`-type Hermitian forms with a residue check.
fn real_part_checked(z: C64, magnitude: f64) -> Result<f64> {
    if z.im.abs() > REAL_PART_TOL * magnitude.max(z.re.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::ComplexResidue {
            imag: z.im,
            magnitude,
        });
    }
    Ok(z.re)
}

/// `xᴴ A x` for Hermitian `A`, as a real number.
pub fn hermitian_form(a: &CMatrix, x: &CVector) -> Result<f64> {
    let z = x.dotc(&(a * x));
    real_part_checked(z, a.norm() * x.norm_squared())
}

/// `(Pᵀ ⊗ I_k)ᴴ (Pᵀ ⊗ I_k)`, the Gram factor that turns `vec(C)` into
/// `‖C P‖_F²`.
fn precoder_gram(p: &CMatrix, k: usize) -> CMatrix {
    let factor = kron(&p.transpose(), &CMatrix::identity(k, k));
    factor.adjoint() * factor
}

/// Communication-side ingredients of the quadratic SNR form.
#[derive(Debug, Clone, PartialEq)]
pub struct CommTerms {
    /// `(1/σ_c²)(Pᵀ ⊗ I_K)ᴴ(Pᵀ ⊗ I_K)`.
    pub p_hat: CMatrix,
    pub q_tilde: CMatrix,
    pub q: CVector,
    /// `vec(F)ᴴ P̂ vec(F)`.
    pub const_c: f64,
}

/// Builds `Q̃`, `q` and the constant with `SNR_c = φᴴQ̃φ + 2ℜ{qᴴφ} + const`.
pub fn build_lemma1_terms(
    structure: &Structure,
    f: &CMatrix,
    h: &CMatrix,
    g: &CMatrix,
    p: &CMatrix,
    sigma2_c: f64,
) -> Result<CommTerms> {
    let l = structure.n_elements();
    let k = f.nrows();
    check_dims(
        "build_lemma1_terms",
        h.shape() == (k, l) && g.nrows() == l && g.ncols() == f.ncols() && p.nrows() == f.ncols(),
        || format!("H: {k} x {l}, G: {l} x N, P: N x K"),
        || {
            format!(
                "F {:?}, H {:?}, G {:?}, P {:?}",
                f.shape(),
                h.shape(),
                g.shape(),
                p.shape()
            )
        },
    )?;
    let p_hat = precoder_gram(p, k).unscale(sigma2_c);
    let lifted = structure.right_apply(&kron(&g.transpose(), h)); // NK x dim
    let vec_f = linalg::vec(f);
    let weighted = &p_hat * &lifted;
    let q_tilde = hermitian_part(&(lifted.adjoint() * &weighted));
    let q = lifted.adjoint() * (&p_hat * &vec_f);
    let const_c = real_part_checked(
        vec_f.dotc(&(&p_hat * &vec_f)),
        p_hat.norm() * vec_f.norm_squared(),
    )?;
    Ok(CommTerms {
        p_hat,
        q_tilde,
        q,
        const_c,
    })
}

/// Radar-side ingredients; `Q̄` depends on the current latent iterate and is
/// rebuilt from these.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarTerms {
    /// `(|α_T|²/σ_r²)(Pᵀ ⊗ I_N)ᴴ(Pᵀ ⊗ I_N)`.
    pub p_bar: CMatrix,
    pub g: CMatrix,
    pub steering: CVector,
}

impl RadarTerms {
    pub fn new(g: &CMatrix, a: &CVector, p: &CMatrix, alpha_t: C64, sigma2_r: f64) -> Result<Self> {
        let l = g.nrows();
        let n = g.ncols();
        check_dims(
            "RadarTerms",
            a.len() == l && p.nrows() == n,
            || format!("a: {l}, P: {n} x K"),
            || format!("a {}, P {:?}", a.len(), p.shape()),
        )?;
        let p_bar = precoder_gram(p, n).scale(alpha_t.norm_sqr() / sigma2_r);
        Ok(Self {
            p_bar,
            g: g.clone(),
            steering: a.clone(),
        })
    }

    fn sandwich(&self, structure: &Structure, b: &CMatrix) -> CMatrix {
        let lifted = structure.right_apply(b);
        hermitian_part(&(lifted.adjoint() * (&self.p_bar * &lifted)))
    }

    /// `Q̄(Φ₀)` with `φᴴ Q̄(Φ₀) φ = SNR_r` when `Φ₀ = Φ`.
    pub fn qbar(&self, structure: &Structure, phi0: &CMatrix) -> CMatrix {
        let gt = self.g.transpose();
        let a = &self.steering;
        let x = (&gt * (phi0 * a)) * a.transpose(); // N x L
        self.sandwich(structure, &kron(&gt, &x))
    }

    /// `Q̄̄(Φ)` with `φ₀ᴴ Q̄̄(Φ) φ₀ = φᴴ Q̄(Φ₀) φ`.
    pub fn qbarbar(&self, structure: &Structure, phi: &CMatrix) -> CMatrix {
        let gt = self.g.transpose();
        let a = &self.steering;
        // (a aᵀ Φ G)ᵀ = Gᵀ Φᵀ a aᵀ
        let y_t = (&gt * (phi.transpose() * a)) * a.transpose(); // N x L
        self.sandwich(structure, &kron(&y_t, &gt))
    }
}

/// `Q̄(Φ₀)` from raw inputs.
pub fn build_qbar(
    structure: &Structure,
    phi0: &CMatrix,
    g: &CMatrix,
    a: &CVector,
    p: &CMatrix,
    alpha_t: C64,
    sigma2_r: f64,
) -> Result<CMatrix> {
    Ok(RadarTerms::new(g, a, p, alpha_t, sigma2_r)?.qbar(structure, phi0))
}

/// `Q̄̄(Φ)` from raw inputs.
pub fn build_qbarbar(
    structure: &Structure,
    phi: &CMatrix,
    g: &CMatrix,
    a: &CVector,
    p: &CMatrix,
    alpha_t: C64,
    sigma2_r: f64,
) -> Result<CMatrix> {
    Ok(RadarTerms::new(g, a, p, alpha_t, sigma2_r)?.qbarbar(structure, phi))
}

/// All quadratic-form ingredients for one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaTerms {
    pub structure: Structure,
    pub comm: CommTerms,
    pub radar: RadarTerms,
}

impl LemmaTerms {
    pub fn new(
        structure: Structure,
        channels: &crate::channel::ChannelSet,
        sigma2_c: f64,
        sigma2_r: f64,
    ) -> Result<Self> {
        let comm = build_lemma1_terms(
            &structure,
            &channels.f,
            &channels.h,
            &channels.g,
            &channels.precoder,
            sigma2_c,
        )?;
        let radar = RadarTerms::new(
            &channels.g,
            &channels.steering,
            &channels.precoder,
            channels.alpha_t,
            sigma2_r,
        )?;
        Ok(Self {
            structure,
            comm,
            radar,
        })
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    pub fn matrix_of(&self, params: &CVector) -> Result<CMatrix> {
        self.structure.to_matrix(params)
    }

    pub fn qbar(&self, phi0: &CVector) -> Result<CMatrix> {
        Ok(self.radar.qbar(&self.structure, &self.matrix_of(phi0)?))
    }

    pub fn qbarbar(&self, phi: &CVector) -> Result<CMatrix> {
        Ok(self.radar.qbarbar(&self.structure, &self.matrix_of(phi)?))
    }
}

/// `φᴴQ̃φ + 2ℜ{qᴴφ} + const`.
pub fn snr_c_quadratic(phi: &CVector, terms: &LemmaTerms) -> Result<f64> {
    let quad = hermitian_form(&terms.comm.q_tilde, phi)?;
    Ok(quad + 2.0 * terms.comm.q.dotc(phi).re + terms.comm.const_c)
}

/// `φᴴ Q̄(Φ) φ` evaluated at `Φ = Φ(φ)`.
pub fn snr_r_quartic(phi: &CVector, terms: &LemmaTerms) -> Result<f64> {
    hermitian_form(&terms.qbar(phi)?, phi)
}

/// `β φᴴQ̄φ + (1−β)(φᴴQ̃φ + 2ℜ{qᴴφ})`: the weighted SNR without the
/// φ-independent constant `(1−β)·const`.
pub fn objective(
    phi: &CVector,
    terms: &LemmaTerms,
    qbar_of_phi: &CMatrix,
    beta: f64,
) -> Result<f64> {
    let radar = hermitian_form(qbar_of_phi, phi)?;
    let comm = hermitian_form(&terms.comm.q_tilde, phi)? + 2.0 * terms.comm.q.dotc(phi).re;
    Ok(beta * radar + (1.0 - beta) * comm)
}

/// Full `SNR_T = β SNR_r + (1−β) SNR_c` including the constant.
pub fn full_objective(
    phi: &CVector,
    terms: &LemmaTerms,
    qbar_of_phi: &CMatrix,
    beta: f64,
) -> Result<f64> {
    Ok(objective(phi, terms, qbar_of_phi, beta)? + (1.0 - beta) * terms.comm.const_c)
}

/// `f(φ, φ₀) = β φᴴQ̄(Φ₀)φ + (1−β)φᴴQ̃φ + 2(1−β)ℜ{qᴴφ}`.
pub fn surrogate_objective(
    phi: &CVector,
    phi0: &CVector,
    terms: &LemmaTerms,
    beta: f64,
) -> Result<f64> {
    let qbar = terms.qbar(phi0)?;
    objective(phi, terms, &qbar, beta)
}

/// SNRs of one scattering matrix, computed in trace form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrReport {
    pub snr_c: f64,
    pub snr_r: f64,
    pub snr_t: f64,
}

pub fn evaluate(
    channels: &crate::channel::ChannelSet,
    phi: &CMatrix,
    sigma2_c: f64,
    sigma2_r: f64,
    beta: f64,
) -> Result<SnrReport> {
    let c = effective_channel(&channels.f, &channels.h, &channels.g, phi)?;
    let r = radar_matrix(&channels.g, phi, &channels.steering, channels.alpha_t)?;
    let snr_c = snr_c_trace(&c, &channels.precoder, sigma2_c);
    let snr_r = snr_r_trace(&r, &channels.precoder, sigma2_r);
    Ok(SnrReport {
        snr_c,
        snr_r,
        snr_t: beta * snr_r + (1.0 - beta) * snr_c,
    })
}

/// Entrywise unit-modulus projection; zero entries map to 1.
pub fn unit_modulus(v: &CVector) -> CVector {
    v.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            ONE
        }
    })
}
