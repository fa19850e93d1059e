//! Sparse two-photon states over (spatial mode x polarization) per photon.
//!
//! A [`JointState`] is an ordered map from [`BasisKet`] to complex amplitude.
//! Ordering is lexicographic on `(mode1, pol1, mode2, pol2)`, so iteration is
//! deterministic. Amplitudes at or below [`Real::PRUNE_EPS`] are never stored.
//!
//! States are immutable values; every operation returns a new state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::elements::OnePhotonMap;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

/// Name of a spatial beam, e.g. `a`, `b'`, `3'`, `o`. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId(Arc<str>);

impl ModeId {
    pub fn new(name: &str) -> Result<Self, StateError> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(StateError::BadModeName(name.to_string()));
        }
        Ok(Self(Arc::from(name)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Shorthand for building a [`ModeId`] from a literal.
///
/// Panics on an empty or whitespace-containing name.
pub fn mode(name: &str) -> ModeId {
    ModeId::new(name).expect("valid mode name")
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Photon {
    One,
    Two,
}

impl Photon {
    pub fn other(self) -> Self {
        match self {
            Photon::One => Photon::Two,
            Photon::Two => Photon::One,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Photon::One => 1,
            Photon::Two => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Photon::One),
            2 => Some(Photon::Two),
            _ => None,
        }
    }
}

impl fmt::Display for Photon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Single-photon basis state `|mode, pol>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhotonKet {
    pub mode: ModeId,
    pub pol: Polarization,
}

impl PhotonKet {
    pub fn new(mode: ModeId, pol: Polarization) -> Self {
        Self { mode, pol }
    }
}

impl fmt::Display for PhotonKet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}>", self.mode, self.pol)
    }
}

/// Two-photon product basis state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisKet {
    pub mode1: ModeId,
    pub pol1: Polarization,
    pub mode2: ModeId,
    pub pol2: Polarization,
}

impl BasisKet {
    pub fn new(mode1: ModeId, pol1: Polarization, mode2: ModeId, pol2: Polarization) -> Self {
        Self {
            mode1,
            pol1,
            mode2,
            pol2,
        }
    }

    pub fn from_photons(p1: PhotonKet, p2: PhotonKet) -> Self {
        Self::new(p1.mode, p1.pol, p2.mode, p2.pol)
    }

    pub fn photon(&self, photon: Photon) -> PhotonKet {
        match photon {
            Photon::One => PhotonKet::new(self.mode1.clone(), self.pol1),
            Photon::Two => PhotonKet::new(self.mode2.clone(), self.pol2),
        }
    }

    fn photon_mode(&self, photon: Photon) -> &ModeId {
        match photon {
            Photon::One => &self.mode1,
            Photon::Two => &self.mode2,
        }
    }

    fn with_photon(&self, photon: Photon, ket: &PhotonKet) -> Self {
        let mut out = self.clone();
        match photon {
            Photon::One => {
                out.mode1 = ket.mode.clone();
                out.pol1 = ket.pol;
            }
            Photon::Two => {
                out.mode2 = ket.mode.clone();
                out.pol2 = ket.pol;
            }
        }
        out
    }
}

impl fmt::Display for BasisKet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|{},{}>_1|{},{}>_2",
            self.mode1, self.pol1, self.mode2, self.pol2
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("invalid mode name {0:?}")]
    BadModeName(String),
    #[error("mode {0} is used more than once")]
    DuplicateMode(ModeId),
    #[error("mode {mode} is not registered to photon {photon}")]
    UnregisteredMode { mode: ModeId, photon: Photon },
    #[error("mode {mode} already belongs to photon {owner}")]
    ModeOwnedByOtherPhoton { mode: ModeId, owner: Photon },
    #[error("{element} is not defined on {ket}, which carries amplitude")]
    UndefinedInput { element: String, ket: PhotonKet },
    #[error("{element} would send amplitude into {ket}, which is already populated")]
    Collision { element: String, ket: PhotonKet },
    #[error("states have different mode registries")]
    RegistryMismatch,
}

/// Per-photon set of known spatial modes. Append-only; a mode name belongs to
/// at most one photon.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModeRegistry {
    photon1: BTreeSet<ModeId>,
    photon2: BTreeSet<ModeId>,
}

impl ModeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    fn set(&self, photon: Photon) -> &BTreeSet<ModeId> {
        match photon {
            Photon::One => &self.photon1,
            Photon::Two => &self.photon2,
        }
    }

    /// Registers `mode` for `photon`. Re-declaring for the same photon is a no-op.
    pub fn declare(&mut self, photon: Photon, mode: ModeId) -> Result<(), StateError> {
        if self.set(photon.other()).contains(&mode) {
            return Err(StateError::ModeOwnedByOtherPhoton {
                mode,
                owner: photon.other(),
            });
        }
        match photon {
            Photon::One => self.photon1.insert(mode),
            Photon::Two => self.photon2.insert(mode),
        };
        Ok(())
    }

    pub fn with(mut self, photon: Photon, modes: &[&str]) -> Result<Self, StateError> {
        for m in modes {
            self.declare(photon, ModeId::new(m)?)?;
        }
        Ok(self)
    }

    pub fn contains(&self, photon: Photon, mode: &ModeId) -> bool {
        self.set(photon).contains(mode)
    }

    pub fn owner(&self, mode: &ModeId) -> Option<Photon> {
        if self.photon1.contains(mode) {
            Some(Photon::One)
        } else if self.photon2.contains(mode) {
            Some(Photon::Two)
        } else {
            None
        }
    }

    pub fn modes(&self, photon: Photon) -> impl Iterator<Item = &ModeId> {
        self.set(photon).iter()
    }

    fn require(&self, photon: Photon, mode: &ModeId) -> Result<(), StateError> {
        if self.contains(photon, mode) {
            Ok(())
        } else if let Some(owner) = self.owner(mode) {
            Err(StateError::ModeOwnedByOtherPhoton {
                mode: mode.clone(),
                owner,
            })
        } else {
            Err(StateError::UnregisteredMode {
                mode: mode.clone(),
                photon,
            })
        }
    }
}

/// Checks that `map` acts unitarily on the populated part of a photon's space.
fn check_domain<T: Real>(
    map: &OnePhotonMap<T>,
    populated: &BTreeSet<PhotonKet>,
) -> Result<(), StateError> {
    if let Some(ket) = map.undefined().iter().find(|k| populated.contains(*k)) {
        return Err(StateError::UndefinedInput {
            element: map.label().to_string(),
            ket: ket.clone(),
        });
    }
    // An output that is also a pass-through ket must not receive amplitude
    // while the pass-through ket is itself populated.
    for (row, out) in map.outputs().iter().enumerate() {
        if map.inputs().contains(out) || !populated.contains(out) {
            continue;
        }
        let fed = map
            .inputs()
            .iter()
            .enumerate()
            .any(|(col, input)| populated.contains(input) && !map.entry(row, col).is_zero());
        if fed {
            return Err(StateError::Collision {
                element: map.label().to_string(),
                ket: out.clone(),
            });
        }
    }
    Ok(())
}

fn accumulate<K: Ord, T: Real>(target: &mut BTreeMap<K, Complex<T>>, key: K, amp: Complex<T>) {
    *target.entry(key).or_insert_with(Complex::zero) += amp;
}

fn prune<K: Ord, T: Real>(amps: &mut BTreeMap<K, Complex<T>>) {
    let eps = T::prune_eps();
    amps.retain(|_, a| a.norm() > eps);
}

/// Pure two-photon state.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState<T: Real> {
    amplitudes: BTreeMap<BasisKet, Complex<T>>,
    registry: ModeRegistry,
}

impl<T: Real> JointState<T> {
    pub fn empty(registry: ModeRegistry) -> Self {
        Self {
            amplitudes: BTreeMap::new(),
            registry,
        }
    }

    /// Builds a state from explicit amplitudes; repeated kets are summed.
    pub fn from_amplitudes<I>(registry: ModeRegistry, amps: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = (BasisKet, Complex<T>)>,
    {
        let mut amplitudes = BTreeMap::new();
        for (ket, amp) in amps {
            registry.require(Photon::One, &ket.mode1)?;
            registry.require(Photon::Two, &ket.mode2)?;
            accumulate(&mut amplitudes, ket, amp);
        }
        prune(&mut amplitudes);
        Ok(Self {
            amplitudes,
            registry,
        })
    }

    /// Direction-entangled source `(|a1,H>|a2,H> + |b1,H>|b2,H>)/sqrt2`.
    ///
    /// `a1`, `b1` must be registered to photon 1 and `a2`, `b2` to photon 2.
    pub fn make_pair_state(
        registry: ModeRegistry,
        a1: &ModeId,
        b1: &ModeId,
        a2: &ModeId,
        b2: &ModeId,
    ) -> Result<Self, StateError> {
        let all = [a1, b1, a2, b2];
        for (i, m) in all.iter().enumerate() {
            if all[..i].contains(m) {
                return Err(StateError::DuplicateMode((*m).clone()));
            }
        }
        registry.require(Photon::One, a1)?;
        registry.require(Photon::One, b1)?;
        registry.require(Photon::Two, a2)?;
        registry.require(Photon::Two, b2)?;
        let amp = Complex::new(T::FRAC_1_SQRT_2(), T::zero());
        let h = Polarization::H;
        Self::from_amplitudes(
            registry,
            [
                (BasisKet::new(a1.clone(), h, a2.clone(), h), amp),
                (BasisKet::new(b1.clone(), h, b2.clone(), h), amp),
            ],
        )
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub fn amplitude(&self, ket: &BasisKet) -> Complex<T> {
        self.amplitudes
            .get(ket)
            .copied()
            .unwrap_or_else(Complex::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisKet, &Complex<T>)> {
        self.amplitudes.iter()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn squared_norm(&self) -> T {
        self.amplitudes
            .values()
            .fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// `<self|other>`; both states must share a registry.
    pub fn inner_product(&self, other: &Self) -> Result<Complex<T>, StateError> {
        if self.registry != other.registry {
            return Err(StateError::RegistryMismatch);
        }
        Ok(self.overlap(other))
    }

    fn overlap(&self, other: &Self) -> Complex<T> {
        self.amplitudes
            .iter()
            .filter_map(|(k, a)| other.amplitudes.get(k).map(|b| a.conj() * b))
            .fold(Complex::zero(), |acc, x| acc + x)
    }

    /// Equality up to global phase: equal norms and `|<s|t>|^2 = |s|^2 |t|^2`.
    /// Registries are ignored.
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: T) -> bool {
        let n1 = self.squared_norm();
        let n2 = other.squared_norm();
        (n1 - n2).abs() <= tol && (self.overlap(other).norm_sqr() - n1 * n2).abs() <= tol
    }

    /// Kets of `photon` that carry amplitude.
    pub fn populated(&self, photon: Photon) -> BTreeSet<PhotonKet> {
        self.amplitudes.keys().map(|k| k.photon(photon)).collect()
    }

    pub fn apply_one_photon_map(
        &self,
        photon: Photon,
        map: &OnePhotonMap<T>,
    ) -> Result<Self, StateError> {
        let mut registry = self.registry.clone();
        for input in map.inputs() {
            registry.require(photon, &input.mode)?;
        }
        for out in map.outputs() {
            registry.declare(photon, out.mode.clone())?;
        }
        check_domain(map, &self.populated(photon))?;

        let mut amplitudes = BTreeMap::new();
        for (ket, amp) in &self.amplitudes {
            match map.column_of(&ket.photon(photon)) {
                Some(col) => {
                    for (row, out) in map.outputs().iter().enumerate() {
                        let c = map.entry(row, col);
                        if !c.is_zero() {
                            accumulate(&mut amplitudes, ket.with_photon(photon, out), c * amp);
                        }
                    }
                }
                None => accumulate(&mut amplitudes, ket.clone(), *amp),
            }
        }
        prune(&mut amplitudes);
        Ok(Self {
            amplitudes,
            registry,
        })
    }

    /// Keeps only the kets in which `photon` occupies `mode` (unnormalized).
    pub fn project_mode(&self, photon: Photon, mode: &ModeId) -> Self {
        Self {
            amplitudes: self
                .amplitudes
                .iter()
                .filter(|(k, _)| k.photon_mode(photon) == mode)
                .map(|(k, a)| (k.clone(), *a))
                .collect(),
            registry: self.registry.clone(),
        }
    }

    /// State of the other photon given `photon` found in `ket` (unnormalized).
    pub fn conditional(&self, photon: Photon, ket: &PhotonKet) -> PhotonState<T> {
        let other = photon.other();
        let amplitudes = self
            .amplitudes
            .iter()
            .filter(|(k, _)| k.photon(photon) == *ket)
            .map(|(k, a)| (k.photon(other), *a))
            .collect();
        PhotonState {
            amplitudes,
            modes: self.registry.modes(other).cloned().collect(),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut amplitudes: BTreeMap<_, _> = self
            .amplitudes
            .iter()
            .map(|(k, a)| (k.clone(), a * factor))
            .collect();
        prune(&mut amplitudes);
        Self {
            amplitudes,
            registry: self.registry.clone(),
        }
    }
}

impl<T: Real> fmt::Display for JointState<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.amplitudes.is_empty() {
            return f.write_str("0");
        }
        for (i, (k, a)) in self.amplitudes.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({}{:+}i){}", a.re, a.im, k)?;
        }
        Ok(())
    }
}

/// Pure state of a single photon over (mode, polarization).
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonState<T: Real> {
    amplitudes: BTreeMap<PhotonKet, Complex<T>>,
    modes: BTreeSet<ModeId>,
}

impl<T: Real> PhotonState<T> {
    pub fn from_amplitudes<I>(modes: &[ModeId], amps: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = (PhotonKet, Complex<T>)>,
    {
        let modes: BTreeSet<ModeId> = modes.iter().cloned().collect();
        let mut amplitudes = BTreeMap::new();
        for (ket, amp) in amps {
            if !modes.contains(&ket.mode) {
                return Err(StateError::UnregisteredMode {
                    mode: ket.mode,
                    photon: Photon::Two,
                });
            }
            accumulate(&mut amplitudes, ket, amp);
        }
        prune(&mut amplitudes);
        Ok(Self { amplitudes, modes })
    }

    pub fn amplitude(&self, mode: &ModeId, pol: Polarization) -> Complex<T> {
        self.amplitudes
            .get(&PhotonKet::new(mode.clone(), pol))
            .copied()
            .unwrap_or_else(Complex::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PhotonKet, &Complex<T>)> {
        self.amplitudes.iter()
    }

    pub fn modes(&self) -> &BTreeSet<ModeId> {
        &self.modes
    }

    pub fn squared_norm(&self) -> T {
        self.amplitudes
            .values()
            .fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// `<self|other>`, registries ignored.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amplitudes
            .iter()
            .filter_map(|(k, a)| other.amplitudes.get(k).map(|b| a.conj() * b))
            .fold(Complex::zero(), |acc, x| acc + x)
    }

    /// Unit-norm copy, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.squared_norm().sqrt();
        if n <= T::prune_eps() {
            return None;
        }
        Some(Self {
            amplitudes: self
                .amplitudes
                .iter()
                .map(|(k, a)| (k.clone(), a / n))
                .collect(),
            modes: self.modes.clone(),
        })
    }

    pub fn populated(&self) -> BTreeSet<PhotonKet> {
        self.amplitudes.keys().cloned().collect()
    }

    pub fn apply(&self, map: &OnePhotonMap<T>) -> Result<Self, StateError> {
        for input in map.inputs() {
            if !self.modes.contains(&input.mode) {
                return Err(StateError::UnregisteredMode {
                    mode: input.mode.clone(),
                    photon: Photon::Two,
                });
            }
        }
        check_domain(map, &self.populated())?;
        let mut modes = self.modes.clone();
        modes.extend(map.outputs().iter().map(|k| k.mode.clone()));
        let mut amplitudes = BTreeMap::new();
        for (ket, amp) in &self.amplitudes {
            match map.column_of(ket) {
                Some(col) => {
                    for (row, out) in map.outputs().iter().enumerate() {
                        let c = map.entry(row, col);
                        if !c.is_zero() {
                            accumulate(&mut amplitudes, out.clone(), c * amp);
                        }
                    }
                }
                None => accumulate(&mut amplitudes, ket.clone(), *amp),
            }
        }
        prune(&mut amplitudes);
        Ok(Self { amplitudes, modes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn source() -> JointState<f64> {
        let reg = ModeRegistry::new()
            .with(Photon::One, &["a", "b"])
            .unwrap()
            .with(Photon::Two, &["a'", "b'"])
            .unwrap();
        JointState::make_pair_state(reg, &mode("a"), &mode("b"), &mode("a'"), &mode("b'")).unwrap()
    }

    fn ket(m1: &str, p1: Polarization, m2: &str, p2: Polarization) -> BasisKet {
        BasisKet::new(mode(m1), p1, mode(m2), p2)
    }

    use Polarization::{H, V};

    #[test]
    fn pair_state_amplitudes() {
        let s = source();
        assert_eq!(s.len(), 2);
        assert_eq!(
            s.amplitude(&ket("a", H, "a'", H)),
            Complex::new(FRAC_1_SQRT_2, 0.0)
        );
        assert_eq!(
            s.amplitude(&ket("b", H, "b'", H)),
            Complex::new(FRAC_1_SQRT_2, 0.0)
        );
        assert_eq!(s.amplitude(&ket("a", H, "b'", H)), Complex::zero());
        assert!((s.squared_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pair_state_errors() {
        let reg = ModeRegistry::new()
            .with(Photon::One, &["a", "b"])
            .unwrap()
            .with(Photon::Two, &["a'", "b'"])
            .unwrap();
        let dup = JointState::<f64>::make_pair_state(
            reg.clone(),
            &mode("a"),
            &mode("a"),
            &mode("a'"),
            &mode("b'"),
        );
        assert_eq!(dup.unwrap_err(), StateError::DuplicateMode(mode("a")));
        let wrong = JointState::<f64>::make_pair_state(
            reg,
            &mode("a'"),
            &mode("b"),
            &mode("a"),
            &mode("b'"),
        );
        assert!(matches!(
            wrong.unwrap_err(),
            StateError::ModeOwnedByOtherPhoton {
                owner: Photon::Two,
                ..
            }
        ));
    }

    #[test]
    fn registry_rejects_cross_photon_names() {
        let mut reg = ModeRegistry::new().with(Photon::One, &["a"]).unwrap();
        assert!(reg.declare(Photon::Two, mode("a")).is_err());
        assert!(reg.declare(Photon::One, mode("a")).is_ok());
        assert!(ModeId::new("").is_err());
        assert!(ModeId::new("a b").is_err());
    }

    #[test]
    fn norms_and_inner_products() {
        let s = source();
        assert!((s.inner_product(&s).unwrap().re - 1.0).abs() < 1e-15);
        let empty = JointState::<f64>::empty(s.registry().clone());
        assert_eq!(empty.squared_norm(), 0.0);
        let one = |m1, m2| {
            JointState::from_amplitudes(
                s.registry().clone(),
                [(ket(m1, H, m2, H), Complex::new(1.0, 0.0))],
            )
            .unwrap()
        };
        let aa = one("a", "a'");
        let bb = one("b", "b'");
        assert_eq!(aa.inner_product(&bb).unwrap(), Complex::zero());
        let c = s.inner_product(&aa).unwrap();
        assert!((c.re - FRAC_1_SQRT_2).abs() < 1e-15 && c.im == 0.0);

        let other_reg = ModeRegistry::new().with(Photon::One, &["a"]).unwrap();
        let mismatched = JointState::<f64>::empty(other_reg);
        assert_eq!(
            s.inner_product(&mismatched).unwrap_err(),
            StateError::RegistryMismatch
        );
    }

    #[test]
    fn from_amplitudes_prunes_and_validates() {
        let s = source();
        let st = JointState::from_amplitudes(
            s.registry().clone(),
            [
                (ket("a", H, "a'", H), Complex::new(1e-17, 0.0)),
                (ket("b", V, "b'", H), Complex::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(st.len(), 1);
        let bad = JointState::from_amplitudes(
            s.registry().clone(),
            [(ket("z", H, "a'", H), Complex::new(1.0, 0.0))],
        );
        assert!(matches!(
            bad.unwrap_err(),
            StateError::UnregisteredMode { .. }
        ));
    }

    #[test]
    fn pbs_map_on_superposition() {
        let reg = ModeRegistry::new()
            .with(Photon::One, &["a", "1", "2"])
            .unwrap()
            .with(Photon::Two, &["x"])
            .unwrap();
        let r = Complex::new(FRAC_1_SQRT_2, 0.0);
        let s =
            JointState::from_amplitudes(reg, [(ket("a", H, "x", H), r), (ket("a", V, "x", H), r)])
                .unwrap();
        let pbs = elements::pbs::<f64>(&mode("a"), &mode("1"), &mode("2")).unwrap();
        let out = s.apply_one_photon_map(Photon::One, &pbs).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.amplitude(&ket("2", H, "x", H)), r);
        assert_eq!(out.amplitude(&ket("1", V, "x", H)), r);
        assert!((out.squared_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apply_adds_outputs_to_registry_and_checks_inputs() {
        let s = source();
        let pbs = elements::pbs::<f64>(&mode("a"), &mode("1"), &mode("2")).unwrap();
        let out = s.apply_one_photon_map(Photon::One, &pbs).unwrap();
        assert!(out.registry().contains(Photon::One, &mode("1")));
        let err = s.apply_one_photon_map(Photon::Two, &pbs).unwrap_err();
        assert!(matches!(err, StateError::ModeOwnedByOtherPhoton { .. }));
        let stray = elements::pbs::<f64>(&mode("q"), &mode("1"), &mode("2")).unwrap();
        assert!(matches!(
            s.apply_one_photon_map(Photon::One, &stray).unwrap_err(),
            StateError::UnregisteredMode { .. }
        ));
    }

    #[test]
    fn identity_map_is_identity() {
        let s = source();
        let id = elements::identity::<f64>();
        assert_eq!(s.apply_one_photon_map(Photon::One, &id).unwrap(), s);
    }

    #[test]
    fn conditional_extracts_partner() {
        let s = source();
        let c = s.conditional(Photon::One, &PhotonKet::new(mode("b"), H));
        assert_eq!(
            c.amplitude(&mode("b'"), H),
            Complex::new(FRAC_1_SQRT_2, 0.0)
        );
        assert!((c.squared_norm() - 0.5).abs() < 1e-15);
        let n = c.normalized().unwrap();
        assert!((n.squared_norm() - 1.0).abs() < 1e-15);
        let proj = s.project_mode(Photon::Two, &mode("a'"));
        assert_eq!(proj.len(), 1);
    }
}
