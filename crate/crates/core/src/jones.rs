//! Pure polarization states.

use std::fmt;

use num_complex::Complex;
use rand::Rng;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JonesError {
    #[error("Jones vector is not normalized: |alpha|^2 + |beta|^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },
    #[error("Jones vector has a non-finite component")]
    NonFinite,
}

/// Normalized polarization state `alpha |H> + beta |V>`.
///
/// The constructor enforces `|alpha|^2 + |beta|^2 = 1` within
/// [`Real::INPUT_EPS`], so every value of this type is a physical state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector<T: Real> {
    alpha: Complex<T>,
    beta: Complex<T>,
}

impl<T: Real> JonesVector<T> {
    pub fn new(alpha: Complex<T>, beta: Complex<T>) -> Result<Self, JonesError> {
        let parts = [alpha.re, alpha.im, beta.re, beta.im];
        if parts.iter().any(|x| !x.is_finite()) {
            return Err(JonesError::NonFinite);
        }
        let norm_sq = alpha.norm_sqr() + beta.norm_sqr();
        if (norm_sq - T::one()).abs() > T::input_eps() {
            return Err(JonesError::NotNormalized {
                norm_sq: norm_sq.as_f64(),
            });
        }
        Ok(Self { alpha, beta })
    }

    /// Builds from the four reals `(Re alpha, Im alpha, Re beta, Im beta)`.
    pub fn from_parts(ar: T, ai: T, br: T, bi: T) -> Result<Self, JonesError> {
        Self::new(Complex::new(ar, ai), Complex::new(br, bi))
    }

    /// `cos(theta/2) |H> + e^{i phi} sin(theta/2) |V>`; normalized by construction.
    pub fn from_bloch(theta: T, phi: T) -> Self {
        let half = theta / T::of(2.0);
        Self {
            alpha: Complex::new(half.cos(), T::zero()),
            beta: Complex::from_polar(half.sin(), phi),
        }
    }

    /// Skips validation. Callers guarantee the norm (e.g. after an exact unitary).
    pub(crate) fn new_unchecked(alpha: Complex<T>, beta: Complex<T>) -> Self {
        Self { alpha, beta }
    }

    pub fn h() -> Self {
        Self::new_unchecked(
            Complex::new(T::one(), T::zero()),
            Complex::new(T::zero(), T::zero()),
        )
    }

    pub fn v() -> Self {
        Self::new_unchecked(
            Complex::new(T::zero(), T::zero()),
            Complex::new(T::one(), T::zero()),
        )
    }

    /// Haar-random state drawn from `rng` (uniform on the Bloch sphere).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let cos_theta = 1.0 - 2.0 * rng.gen::<f64>();
        let phi = std::f64::consts::TAU * rng.gen::<f64>();
        Self::from_bloch(T::of(cos_theta.clamp(-1.0, 1.0).acos()), T::of(phi))
    }

    pub fn alpha(&self) -> Complex<T> {
        self.alpha
    }

    pub fn beta(&self) -> Complex<T> {
        self.beta
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.alpha.conj() * other.alpha + self.beta.conj() * other.beta
    }

    /// Phase-insensitive overlap `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }

    /// The orthogonal state `-conj(beta) |H> + conj(alpha) |V>`.
    pub fn orthogonal(&self) -> Self {
        Self::new_unchecked(-self.beta.conj(), self.alpha.conj())
    }

    /// Converts to another precision without re-validating.
    pub fn cast<U: Real>(&self) -> JonesVector<U> {
        let c = |z: Complex<T>| Complex::new(U::of(z.re.as_f64()), U::of(z.im.as_f64()));
        JonesVector::new_unchecked(c(self.alpha), c(self.beta))
    }

    pub fn to_f64(&self) -> JonesVector<f64> {
        self.cast()
    }

    /// Accepts a literal whose squared norm is within `tol` of 1 and
    /// rescales it to unit norm.
    pub fn normalized_from_parts(ar: T, ai: T, br: T, bi: T, tol: T) -> Result<Self, JonesError> {
        let alpha = Complex::new(ar, ai);
        let beta = Complex::new(br, bi);
        if [ar, ai, br, bi].iter().any(|x| !x.is_finite()) {
            return Err(JonesError::NonFinite);
        }
        let norm_sq = alpha.norm_sqr() + beta.norm_sqr();
        if (norm_sq - T::one()).abs() > tol {
            return Err(JonesError::NotNormalized {
                norm_sq: norm_sq.as_f64(),
            });
        }
        let n = norm_sq.sqrt();
        Ok(Self::new_unchecked(alpha / n, beta / n))
    }
}

impl<T: Real> fmt::Display for JonesVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}{:+}i)|H> + ({}{:+}i)|V>",
            self.alpha.re, self.alpha.im, self.beta.re, self.beta.im
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_unnormalized() {
        let err = JonesVector::<f64>::from_parts(0.9, 0.0, 0.9, 0.0).unwrap_err();
        assert!(matches!(err, JonesError::NotNormalized { .. }));
        assert_eq!(
            JonesVector::<f64>::from_parts(f64::NAN, 0.0, 1.0, 0.0).unwrap_err(),
            JonesError::NonFinite
        );
        assert!(JonesVector::<f64>::from_parts(0.6, 0.0, 0.8, 0.0).is_ok());
    }

    #[test]
    fn bloch_poles() {
        let h = JonesVector::<f64>::from_bloch(0.0, 1.3);
        assert!((h.fidelity(&JonesVector::h()) - 1.0).abs() < 1e-15);
        let v = JonesVector::<f64>::from_bloch(std::f64::consts::PI, 0.0);
        assert!(v.fidelity(&JonesVector::h()) < 1e-30);
    }

    #[test]
    fn random_states_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let psi = JonesVector::<f64>::random(&mut rng);
            assert!((psi.alpha.norm_sqr() + psi.beta.norm_sqr() - 1.0).abs() < 1e-12);
            assert!(psi.fidelity(&psi.orthogonal()) < 1e-30);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let psi = JonesVector::<f32>::from_bloch(1.0, 0.5);
        assert!((psi.fidelity(&psi) - 1.0).abs() < 1e-6);
        assert!(JonesVector::<f32>::from_parts(0.6, 0.0, 0.8, 0.0).is_ok());
    }
}
