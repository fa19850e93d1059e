//! Optical elements as single-photon maps.
//!
//! Every element is a [`OnePhotonMap`]: an explicit matrix from an ordered
//! input basis of `(mode, polarization)` kets to an ordered output basis.
//! Kets outside the input basis pass through unchanged. All built-in
//! constructors produce matrices with orthonormal columns.

use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::jones::{JonesError, JonesVector};
use crate::scalar::Real;
use crate::state::{ModeId, PhotonKet, Polarization};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElementError {
    #[error("mode {0} appears more than once in the element")]
    DuplicateMode(ModeId),
    #[error("basis entry {0} appears more than once")]
    DuplicateKet(PhotonKet),
    #[error("matrix has {len} entries, expected {rows}x{cols}")]
    Shape {
        len: usize,
        rows: usize,
        cols: usize,
    },
    #[error("{name} = {value} is outside {range}")]
    AngleOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("phase must be finite")]
    NonFinitePhase,
    #[error(transparent)]
    Jones(#[from] JonesError),
}

/// Linear map on one photon's `(mode, polarization)` space.
#[derive(Debug, Clone, PartialEq)]
pub struct OnePhotonMap<T: Real> {
    label: String,
    inputs: Vec<PhotonKet>,
    outputs: Vec<PhotonKet>,
    /// Row-major, `outputs.len() x inputs.len()`.
    matrix: Vec<Complex<T>>,
    /// Kets the element cannot accept; amplitude there is an error.
    undefined: Vec<PhotonKet>,
}

impl<T: Real> OnePhotonMap<T> {
    pub fn new(
        label: impl Into<String>,
        inputs: Vec<PhotonKet>,
        outputs: Vec<PhotonKet>,
        matrix: Vec<Complex<T>>,
        undefined: Vec<PhotonKet>,
    ) -> Result<Self, ElementError> {
        for list in [&inputs, &outputs] {
            for (i, k) in list.iter().enumerate() {
                if list[..i].contains(k) {
                    return Err(ElementError::DuplicateKet(k.clone()));
                }
            }
        }
        if matrix.len() != inputs.len() * outputs.len() {
            return Err(ElementError::Shape {
                len: matrix.len(),
                rows: outputs.len(),
                cols: inputs.len(),
            });
        }
        Ok(Self {
            label: label.into(),
            inputs,
            outputs,
            matrix,
            undefined,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn inputs(&self) -> &[PhotonKet] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[PhotonKet] {
        &self.outputs
    }

    pub fn undefined(&self) -> &[PhotonKet] {
        &self.undefined
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex<T> {
        self.matrix[row * self.inputs.len() + col]
    }

    pub fn column_of(&self, ket: &PhotonKet) -> Option<usize> {
        self.inputs.iter().position(|k| k == ket)
    }

    /// `max |(M^dagger M - I)_ij|`; zero for an exact isometry.
    pub fn unitarity_defect(&self) -> T {
        let n = self.inputs.len();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex::<T>::zero();
                for r in 0..self.outputs.len() {
                    acc += self.entry(r, i).conj() * self.entry(r, j);
                }
                if i == j {
                    acc -= Complex::one();
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    pub fn is_square(&self) -> bool {
        self.inputs.len() == self.outputs.len()
    }
}

fn distinct(modes: &[&ModeId]) -> Result<(), ElementError> {
    for (i, m) in modes.iter().enumerate() {
        if modes[..i].contains(m) {
            return Err(ElementError::DuplicateMode((*m).clone()));
        }
    }
    Ok(())
}

fn ket(mode: &ModeId, pol: Polarization) -> PhotonKet {
    PhotonKet::new(mode.clone(), pol)
}

fn c<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

fn eye<T: Real>(n: usize) -> Vec<Complex<T>> {
    (0..n * n)
        .map(|i| {
            if i % (n + 1) == 0 {
                Complex::one()
            } else {
                Complex::zero()
            }
        })
        .collect()
}

/// Map with an empty input basis: every ket passes through.
pub fn identity<T: Real>() -> OnePhotonMap<T> {
    OnePhotonMap {
        label: "identity".into(),
        inputs: Vec::new(),
        outputs: Vec::new(),
        matrix: Vec::new(),
        undefined: Vec::new(),
    }
}

/// Polarization unitary taking `|H>` to `psi` on each listed mode.
///
/// The V column is the SU(2) completion `(-conj(beta), conj(alpha))`.
pub fn jones_rotation<T: Real>(
    psi: &JonesVector<T>,
    modes: &[ModeId],
) -> Result<OnePhotonMap<T>, ElementError> {
    distinct(&modes.iter().collect::<Vec<_>>())?;
    let (a, b) = (psi.alpha(), psi.beta());
    let n = 2 * modes.len();
    let mut matrix = vec![Complex::zero(); n * n];
    let mut basis = Vec::with_capacity(n);
    for (i, m) in modes.iter().enumerate() {
        basis.push(ket(m, Polarization::H));
        basis.push(ket(m, Polarization::V));
        let (h, v) = (2 * i, 2 * i + 1);
        matrix[h * n + h] = a;
        matrix[v * n + h] = b;
        matrix[h * n + v] = -b.conj();
        matrix[v * n + v] = a.conj();
    }
    let names: Vec<_> = modes.iter().map(ModeId::as_str).collect();
    OnePhotonMap::new(
        format!("jones({}) on {}", psi, names.join(",")),
        basis.clone(),
        basis,
        matrix,
        Vec::new(),
    )
}

/// Polarizing beam splitter: `|in,V> -> |out_v,V>`, `|in,H> -> |out_h,H>`.
pub fn pbs<T: Real>(
    input: &ModeId,
    out_v: &ModeId,
    out_h: &ModeId,
) -> Result<OnePhotonMap<T>, ElementError> {
    distinct(&[input, out_v, out_h])?;
    OnePhotonMap::new(
        format!("pbs {input} -> V:{out_v} H:{out_h}"),
        vec![ket(input, Polarization::V), ket(input, Polarization::H)],
        vec![ket(out_v, Polarization::V), ket(out_h, Polarization::H)],
        eye(2),
        Vec::new(),
    )
}

/// Rotates V to H on a beam that carries only one polarization.
///
/// H passes through; if both polarizations are populated the map is rejected
/// at application time (it would not be unitary there).
pub fn pol_rotate_to_h<T: Real>(m: &ModeId) -> OnePhotonMap<T> {
    OnePhotonMap {
        label: format!("rot_to_h {m}"),
        inputs: vec![ket(m, Polarization::V)],
        outputs: vec![ket(m, Polarization::H)],
        matrix: eye(1),
        undefined: Vec::new(),
    }
}

/// Rotates H to V on a beam that carries only one polarization.
pub fn pol_rotate_h_to_v<T: Real>(m: &ModeId) -> OnePhotonMap<T> {
    OnePhotonMap {
        label: format!("rot_h_to_v {m}"),
        inputs: vec![ket(m, Polarization::H)],
        outputs: vec![ket(m, Polarization::V)],
        matrix: eye(1),
        undefined: Vec::new(),
    }
}

/// 50/50 beam splitter in the real Hadamard convention, polarization untouched:
/// `|in1> -> (|out1> + |out2>)/sqrt2`, `|in2> -> (|out1> - |out2>)/sqrt2`.
pub fn symmetric_bs<T: Real>(
    in1: &ModeId,
    in2: &ModeId,
    out1: &ModeId,
    out2: &ModeId,
) -> Result<OnePhotonMap<T>, ElementError> {
    distinct(&[in1, in2, out1, out2])?;
    let r = T::FRAC_1_SQRT_2();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for m in [in1, in2] {
        for p in Polarization::BOTH {
            inputs.push(ket(m, p));
        }
    }
    for m in [out1, out2] {
        for p in Polarization::BOTH {
            outputs.push(ket(m, p));
        }
    }
    let z = T::zero();
    // rows: out1H, out1V, out2H, out2V; cols: in1H, in1V, in2H, in2V
    #[rustfmt::skip]
    let matrix = vec![
        r, z, r, z,
        z, r, z, r,
        r, z, -r, z,
        z, r, z, -r,
    ];
    let matrix = matrix.into_iter().map(c).collect();
    OnePhotonMap::new(
        format!("bs {in1},{in2} -> {out1},{out2}"),
        inputs,
        outputs,
        matrix,
        Vec::new(),
    )
}

/// Polarization-independent phase `e^{i phi}` on one beam.
pub fn phase_shift<T: Real>(m: &ModeId, phi: T) -> Result<OnePhotonMap<T>, ElementError> {
    if !phi.is_finite() {
        return Err(ElementError::NonFinitePhase);
    }
    let z = Complex::from_polar(T::one(), phi);
    let basis = vec![ket(m, Polarization::H), ket(m, Polarization::V)];
    OnePhotonMap::new(
        format!("phase {m} {phi}"),
        basis.clone(),
        basis,
        vec![z, Complex::zero(), Complex::zero(), z],
        Vec::new(),
    )
}

/// Cell C1: `|V> -> |V>`, `|H> -> -|H>`.
pub fn pockels_c1<T: Real>(m: &ModeId) -> OnePhotonMap<T> {
    let basis = vec![ket(m, Polarization::H), ket(m, Polarization::V)];
    OnePhotonMap {
        label: format!("c1 {m}"),
        inputs: basis.clone(),
        outputs: basis,
        matrix: vec![
            -Complex::one(),
            Complex::zero(),
            Complex::zero(),
            Complex::one(),
        ],
        undefined: Vec::new(),
    }
}

/// Cell C2: `|V> <-> |H>`.
pub fn pockels_c2<T: Real>(m: &ModeId) -> OnePhotonMap<T> {
    let basis = vec![ket(m, Polarization::H), ket(m, Polarization::V)];
    OnePhotonMap {
        label: format!("c2 {m}"),
        inputs: basis.clone(),
        outputs: basis,
        matrix: vec![
            Complex::zero(),
            Complex::one(),
            Complex::one(),
            Complex::zero(),
        ],
        undefined: Vec::new(),
    }
}

/// PBS used as a combiner: `|in_v,V> -> |out,V>`, `|in_h,H> -> |out,H>`.
///
/// H on `in_v` or V on `in_h` would leave through the other port; such input
/// is rejected.
pub fn pbs_merge<T: Real>(
    in_v: &ModeId,
    in_h: &ModeId,
    out: &ModeId,
) -> Result<OnePhotonMap<T>, ElementError> {
    distinct(&[in_v, in_h, out])?;
    OnePhotonMap::new(
        format!("merge V:{in_v} H:{in_h} -> {out}"),
        vec![ket(in_v, Polarization::V), ket(in_h, Polarization::H)],
        vec![ket(out, Polarization::V), ket(out, Polarization::H)],
        eye(2),
        vec![ket(in_v, Polarization::H), ket(in_h, Polarization::V)],
    )
}

/// Renames a beam, keeping polarization.
pub fn relabel<T: Real>(from: &ModeId, to: &ModeId) -> Result<OnePhotonMap<T>, ElementError> {
    distinct(&[from, to])?;
    OnePhotonMap::new(
        format!("relabel {from} -> {to}"),
        vec![ket(from, Polarization::H), ket(from, Polarization::V)],
        vec![ket(to, Polarization::H), ket(to, Polarization::V)],
        eye(2),
        Vec::new(),
    )
}

/// Declarative description of an element; [`ElementSpec::build`] yields its map.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementSpec<T: Real> {
    JonesRotation {
        psi: JonesVector<T>,
        modes: Vec<ModeId>,
    },
    Pbs {
        input: ModeId,
        out_v: ModeId,
        out_h: ModeId,
    },
    PolRotateToH(ModeId),
    PolRotateHtoV(ModeId),
    SymmetricBs {
        in1: ModeId,
        in2: ModeId,
        out1: ModeId,
        out2: ModeId,
    },
    PhaseShift {
        mode: ModeId,
        phi: T,
    },
    PockelsC1(ModeId),
    PockelsC2(ModeId),
    Merge {
        in_v: ModeId,
        in_h: ModeId,
        out: ModeId,
    },
    Relabel {
        from: ModeId,
        to: ModeId,
    },
}

impl<T: Real> ElementSpec<T> {
    /// Jones rotation given by Bloch angles, `theta` in `[0, pi]`, `phi` in `[0, 2pi)`.
    pub fn jones_bloch(theta: T, phi: T, modes: Vec<ModeId>) -> Result<Self, ElementError> {
        if !(theta >= T::zero() && theta <= T::PI()) {
            return Err(ElementError::AngleOutOfRange {
                name: "theta",
                value: theta.as_f64(),
                range: "[0, pi]",
            });
        }
        if !(phi >= T::zero() && phi < T::TAU()) {
            return Err(ElementError::AngleOutOfRange {
                name: "phi",
                value: phi.as_f64(),
                range: "[0, 2pi)",
            });
        }
        Ok(ElementSpec::JonesRotation {
            psi: JonesVector::from_bloch(theta, phi),
            modes,
        })
    }

    pub fn build(&self) -> Result<OnePhotonMap<T>, ElementError> {
        match self {
            ElementSpec::JonesRotation { psi, modes } => jones_rotation(psi, modes),
            ElementSpec::Pbs {
                input,
                out_v,
                out_h,
            } => pbs(input, out_v, out_h),
            ElementSpec::PolRotateToH(m) => Ok(pol_rotate_to_h(m)),
            ElementSpec::PolRotateHtoV(m) => Ok(pol_rotate_h_to_v(m)),
            ElementSpec::SymmetricBs {
                in1,
                in2,
                out1,
                out2,
            } => symmetric_bs(in1, in2, out1, out2),
            ElementSpec::PhaseShift { mode, phi } => phase_shift(mode, *phi),
            ElementSpec::PockelsC1(m) => Ok(pockels_c1(m)),
            ElementSpec::PockelsC2(m) => Ok(pockels_c2(m)),
            ElementSpec::Merge { in_v, in_h, out } => pbs_merge(in_v, in_h, out),
            ElementSpec::Relabel { from, to } => relabel(from, to),
        }
    }

    /// Modes read by the element.
    pub fn input_modes(&self) -> Vec<&ModeId> {
        match self {
            ElementSpec::JonesRotation { modes, .. } => modes.iter().collect(),
            ElementSpec::Pbs { input, .. } => vec![input],
            ElementSpec::PolRotateToH(m)
            | ElementSpec::PolRotateHtoV(m)
            | ElementSpec::PockelsC1(m)
            | ElementSpec::PockelsC2(m) => vec![m],
            ElementSpec::PhaseShift { mode, .. } => vec![mode],
            ElementSpec::SymmetricBs { in1, in2, .. } => vec![in1, in2],
            ElementSpec::Merge { in_v, in_h, .. } => vec![in_v, in_h],
            ElementSpec::Relabel { from, .. } => vec![from],
        }
    }

    /// Modes written by the element (may overlap the inputs).
    pub fn output_modes(&self) -> Vec<&ModeId> {
        match self {
            ElementSpec::Pbs { out_v, out_h, .. } => vec![out_v, out_h],
            ElementSpec::SymmetricBs { out1, out2, .. } => vec![out1, out2],
            ElementSpec::Merge { out, .. } => vec![out],
            ElementSpec::Relabel { to, .. } => vec![to],
            other => other.input_modes(),
        }
    }

    /// Same element at another precision.
    pub fn cast<U: Real>(&self) -> ElementSpec<U> {
        match self {
            ElementSpec::JonesRotation { psi, modes } => ElementSpec::JonesRotation {
                psi: psi.cast(),
                modes: modes.clone(),
            },
            ElementSpec::Pbs {
                input,
                out_v,
                out_h,
            } => ElementSpec::Pbs {
                input: input.clone(),
                out_v: out_v.clone(),
                out_h: out_h.clone(),
            },
            ElementSpec::PolRotateToH(m) => ElementSpec::PolRotateToH(m.clone()),
            ElementSpec::PolRotateHtoV(m) => ElementSpec::PolRotateHtoV(m.clone()),
            ElementSpec::SymmetricBs {
                in1,
                in2,
                out1,
                out2,
            } => ElementSpec::SymmetricBs {
                in1: in1.clone(),
                in2: in2.clone(),
                out1: out1.clone(),
                out2: out2.clone(),
            },
            ElementSpec::PhaseShift { mode, phi } => ElementSpec::PhaseShift {
                mode: mode.clone(),
                phi: U::of(phi.as_f64()),
            },
            ElementSpec::PockelsC1(m) => ElementSpec::PockelsC1(m.clone()),
            ElementSpec::PockelsC2(m) => ElementSpec::PockelsC2(m.clone()),
            ElementSpec::Merge { in_v, in_h, out } => ElementSpec::Merge {
                in_v: in_v.clone(),
                in_h: in_h.clone(),
                out: out.clone(),
            },
            ElementSpec::Relabel { from, to } => ElementSpec::Relabel {
                from: from.clone(),
                to: to.clone(),
            },
        }
    }
}

impl<T: Real> fmt::Display for OnePhotonMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{mode, JointState, ModeRegistry, Photon, PhotonState};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;
    use Polarization::{H, V};

    fn one_photon(modes: &[&str], amps: &[(&str, Polarization, Complex<f64>)]) -> PhotonState<f64> {
        let ms: Vec<_> = modes.iter().map(|m| mode(m)).collect();
        PhotonState::from_amplitudes(
            &ms,
            amps.iter()
                .map(|(m, p, a)| (PhotonKet::new(mode(m), *p), *a)),
        )
        .unwrap()
    }

    fn cx(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn all_builtins() -> Vec<OnePhotonMap<f64>> {
        let psi = JonesVector::from_bloch(1.1, 0.4);
        let (a, b, x, y) = (mode("a"), mode("b"), mode("x"), mode("y"));
        vec![
            jones_rotation(&psi, &[a.clone(), b.clone()]).unwrap(),
            pbs(&a, &x, &y).unwrap(),
            pol_rotate_to_h(&a),
            pol_rotate_h_to_v(&a),
            symmetric_bs(&a, &b, &x, &y).unwrap(),
            phase_shift(&a, 0.3).unwrap(),
            pockels_c1(&a),
            pockels_c2(&a),
            pbs_merge(&a, &b, &x).unwrap(),
            relabel(&a, &x).unwrap(),
        ]
    }

    #[test]
    fn builtins_are_unitary() {
        for m in all_builtins() {
            assert!(m.unitarity_defect() < 1e-12, "{m}");
        }
    }

    #[test]
    fn jones_rotation_columns() {
        let id = jones_rotation::<f64>(&JonesVector::h(), &[mode("a")]).unwrap();
        assert_eq!(id.matrix, eye(2));
        let flip = jones_rotation::<f64>(&JonesVector::v(), &[mode("a")]).unwrap();
        let s = one_photon(&["a"], &[("a", H, cx(1.0, 0.0))]);
        let out = s.apply(&flip).unwrap();
        assert_eq!(out.amplitude(&mode("a"), V), cx(1.0, 0.0));
        assert_eq!(out.amplitude(&mode("a"), H), cx(0.0, 0.0));
        assert!(flip.unitarity_defect() < 1e-12);
        assert!(matches!(
            jones_rotation::<f64>(&JonesVector::h(), &[mode("a"), mode("a")]),
            Err(ElementError::DuplicateMode(_))
        ));
    }

    #[test]
    fn pbs_rows() {
        let m = pbs::<f64>(&mode("a"), &mode("1"), &mode("2")).unwrap();
        let s = one_photon(&["a"], &[("a", V, cx(1.0, 0.0))]);
        assert_eq!(s.apply(&m).unwrap().amplitude(&mode("1"), V), cx(1.0, 0.0));
        let s = one_photon(&["a"], &[("a", H, cx(1.0, 0.0))]);
        assert_eq!(s.apply(&m).unwrap().amplitude(&mode("2"), H), cx(1.0, 0.0));

        let r = cx(FRAC_1_SQRT_2, 0.0);
        let m = pbs::<f64>(&mode("b"), &mode("3"), &mode("4")).unwrap();
        let s = one_photon(&["b"], &[("b", H, r), ("b", V, r)]);
        let out = s.apply(&m).unwrap();
        assert_eq!(out.amplitude(&mode("4"), H), r);
        assert_eq!(out.amplitude(&mode("3"), V), r);
        assert!(pbs::<f64>(&mode("a"), &mode("a"), &mode("2")).is_err());
    }

    #[test]
    fn rotate_to_h_guard() {
        let m = pol_rotate_to_h::<f64>(&mode("1"));
        let s = one_photon(&["1"], &[("1", V, cx(1.0, 0.0))]);
        assert_eq!(s.apply(&m).unwrap().amplitude(&mode("1"), H), cx(1.0, 0.0));
        let s = one_photon(&["2"], &[("2", H, cx(1.0, 0.0))]);
        let m2 = pol_rotate_to_h::<f64>(&mode("2"));
        assert_eq!(s.apply(&m2).unwrap(), s);
        let r = cx(FRAC_1_SQRT_2, 0.0);
        let both = one_photon(&["1"], &[("1", V, r), ("1", H, r)]);
        assert!(matches!(
            both.apply(&m).unwrap_err(),
            crate::state::StateError::Collision { .. }
        ));
    }

    #[test]
    fn rotate_guard_sees_partner_correlations() {
        // H and V on the same beam in different branches of photon 2.
        let reg = ModeRegistry::new()
            .with(Photon::One, &["m"])
            .unwrap()
            .with(Photon::Two, &["x", "y"])
            .unwrap();
        let r = cx(FRAC_1_SQRT_2, 0.0);
        let s = JointState::from_amplitudes(
            reg,
            [
                (crate::state::BasisKet::new(mode("m"), H, mode("x"), H), r),
                (crate::state::BasisKet::new(mode("m"), V, mode("y"), H), r),
            ],
        )
        .unwrap();
        assert!(s
            .apply_one_photon_map(Photon::One, &pol_rotate_to_h(&mode("m")))
            .is_err());
    }

    #[test]
    fn beam_splitter_rows() {
        let r = cx(FRAC_1_SQRT_2, 0.0);
        let bs1 = symmetric_bs::<f64>(&mode("1"), &mode("4"), &mode("1'"), &mode("4'")).unwrap();
        let s = one_photon(&["1", "4"], &[("1", H, r), ("4", H, r)]);
        let out = s.apply(&bs1).unwrap();
        assert!((out.amplitude(&mode("1'"), H) - cx(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(out.iter().count(), 1);

        let bs2 = symmetric_bs::<f64>(&mode("2"), &mode("3"), &mode("2'"), &mode("3'")).unwrap();
        let s = one_photon(&["2", "3"], &[("2", H, r), ("3", H, -r)]);
        let out = s.apply(&bs2).unwrap();
        assert!((out.amplitude(&mode("3'"), H) - cx(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(out.iter().count(), 1);
        assert!(symmetric_bs::<f64>(&mode("1"), &mode("1"), &mode("x"), &mode("y")).is_err());
    }

    #[test]
    fn beam_splitter_is_real_hadamard() {
        let bs = symmetric_bs::<f64>(&mode("p"), &mode("q"), &mode("r"), &mode("s")).unwrap();
        for p in 0..2 {
            let (i1, i2, o1, o2) = (p, 2 + p, p, 2 + p);
            assert!((bs.entry(o1, i1).re - FRAC_1_SQRT_2).abs() < 1e-16);
            assert!((bs.entry(o2, i1).re - FRAC_1_SQRT_2).abs() < 1e-16);
            assert!((bs.entry(o1, i2).re - FRAC_1_SQRT_2).abs() < 1e-16);
            assert!((bs.entry(o2, i2).re + FRAC_1_SQRT_2).abs() < 1e-16);
            assert_eq!(bs.entry(o1, i1).im, 0.0);
        }
        assert!(bs.unitarity_defect() < 1e-12);
    }

    #[test]
    fn pockels_cells() {
        let (al, be) = (cx(0.6, 0.0), cx(0.0, 0.8));
        let s = one_photon(&["o"], &[("o", H, al), ("o", V, be)]);
        let o = mode("o");
        let c1 = s.apply(&pockels_c1(&o)).unwrap();
        assert_eq!(c1.amplitude(&o, H), -al);
        assert_eq!(c1.amplitude(&o, V), be);
        let c2 = s.apply(&pockels_c2(&o)).unwrap();
        assert_eq!(c2.amplitude(&o, H), be);
        assert_eq!(c2.amplitude(&o, V), al);
        assert_eq!(c1.apply(&pockels_c1(&o)).unwrap(), s);
        assert_eq!(c2.apply(&pockels_c2(&o)).unwrap(), s);
    }

    fn mat2(m: &OnePhotonMap<f64>) -> [[Complex<f64>; 2]; 2] {
        [
            [m.entry(0, 0), m.entry(0, 1)],
            [m.entry(1, 0), m.entry(1, 1)],
        ]
    }

    fn mul(a: [[Complex<f64>; 2]; 2], b: [[Complex<f64>; 2]; 2]) -> [[Complex<f64>; 2]; 2] {
        let mut out = [[cx(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    }

    #[test]
    fn pockels_cells_anticommute() {
        let o = mode("o");
        let c1 = mat2(&pockels_c1(&o));
        let c2 = mat2(&pockels_c2(&o));
        let lhs = mul(c1, c2);
        let rhs = mul(c2, c1);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(lhs[i][j], -rhs[i][j]);
            }
        }
    }

    #[test]
    fn merge_rows_and_guard() {
        let m = pbs_merge::<f64>(&mode("a'"), &mode("b'"), &mode("o")).unwrap();
        let s = one_photon(&["a'", "b'"], &[("a'", V, cx(1.0, 0.0))]);
        assert_eq!(s.apply(&m).unwrap().amplitude(&mode("o"), V), cx(1.0, 0.0));
        let s = one_photon(&["a'", "b'"], &[("b'", H, cx(1.0, 0.0))]);
        assert_eq!(s.apply(&m).unwrap().amplitude(&mode("o"), H), cx(1.0, 0.0));
        let s = one_photon(&["a'", "b'"], &[("a'", H, cx(1.0, 0.0))]);
        assert!(matches!(
            s.apply(&m).unwrap_err(),
            crate::state::StateError::UndefinedInput { .. }
        ));
    }

    #[test]
    fn bloch_spec_ranges() {
        assert!(ElementSpec::<f64>::jones_bloch(1.0, 0.5, vec![mode("a")]).is_ok());
        assert!(ElementSpec::<f64>::jones_bloch(-0.1, 0.5, vec![mode("a")]).is_err());
        assert!(ElementSpec::<f64>::jones_bloch(1.0, 7.0, vec![mode("a")]).is_err());
    }

    fn random_state() -> impl Strategy<Value = JointState<f64>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8).prop_filter_map("nonzero", |v| {
            let reg = ModeRegistry::new()
                .with(Photon::One, &["a", "b"])
                .unwrap()
                .with(Photon::Two, &["x", "y"])
                .unwrap();
            let kets: Vec<_> = ["a", "b"]
                .iter()
                .flat_map(|m| Polarization::BOTH.map(move |p| (*m, p)))
                .collect();
            let norm: f64 = v.iter().map(|(r, i)| r * r + i * i).sum::<f64>().sqrt();
            if norm < 1e-3 {
                return None;
            }
            let amps = v.iter().enumerate().map(|(i, (r, im))| {
                let (m1, p1) = kets[i % 4];
                let m2 = if i < 4 { "x" } else { "y" };
                (
                    crate::state::BasisKet::new(mode(m1), p1, mode(m2), H),
                    Complex::new(r / norm, im / norm),
                )
            });
            JointState::from_amplitudes(reg, amps).ok()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn square_builtins_preserve_norm(s in random_state(), theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU) {
            let psi = JonesVector::from_bloch(theta, phi);
            let (a, b, x, y) = (mode("a"), mode("b"), mode("p"), mode("q"));
            let maps = vec![
                jones_rotation(&psi, &[a.clone(), b.clone()]).unwrap(),
                pbs(&a, &x, &y).unwrap(),
                symmetric_bs(&a, &b, &x, &y).unwrap(),
                phase_shift(&b, phi).unwrap(),
                pockels_c1(&a),
                pockels_c2(&b),
                relabel(&a, &x).unwrap(),
            ];
            let n0 = s.squared_norm();
            for m in &maps {
                let out = s.apply_one_photon_map(Photon::One, m).unwrap();
                prop_assert!((out.squared_norm() - n0).abs() < 1e-12, "{}", m);
            }
        }

        #[test]
        fn inverse_wired_bs_recovers_input(s in random_state()) {
            let (a, b, x, y) = (mode("a"), mode("b"), mode("p"), mode("q"));
            let fwd = symmetric_bs(&a, &b, &x, &y).unwrap();
            let back = symmetric_bs(&x, &y, &a, &b).unwrap();
            let out = s
                .apply_one_photon_map(Photon::One, &fwd).unwrap()
                .apply_one_photon_map(Photon::One, &back).unwrap();
            for (k, amp) in s.iter() {
                prop_assert!((out.amplitude(k) - amp).norm() < 1e-12);
            }
            prop_assert!((out.squared_norm() - s.squared_norm()).abs() < 1e-12);
        }

        #[test]
        fn inner_product_is_hermitian(s in random_state(), t in random_state()) {
            let st = s.inner_product(&t).unwrap();
            let ts = t.inner_product(&s).unwrap();
            prop_assert!((st - ts.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn iteration_is_deterministic() {
        let reg = ModeRegistry::new()
            .with(Photon::One, &["a", "b"])
            .unwrap()
            .with(Photon::Two, &["a'", "b'"])
            .unwrap();
        let s = JointState::<f64>::make_pair_state(
            reg,
            &mode("a"),
            &mode("b"),
            &mode("a'"),
            &mode("b'"),
        )
        .unwrap();
        let psi = JonesVector::from_bloch(0.7, 2.0);
        let s = s
            .apply_one_photon_map(
                Photon::One,
                &jones_rotation(&psi, &[mode("a"), mode("b")]).unwrap(),
            )
            .unwrap();
        let first: Vec<_> = s
            .iter()
            .map(|(k, a)| (k.clone(), a.re.to_bits(), a.im.to_bits()))
            .collect();
        let second: Vec<_> = s
            .iter()
            .map(|(k, a)| (k.clone(), a.re.to_bits(), a.im.to_bits()))
            .collect();
        assert_eq!(first, second);
        assert!(first.windows(2).all(|w| w[0].0 < w[1].0));
    }
}
