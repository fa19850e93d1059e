//! Verification of teleportation by post-selected subensembles.
//!
//! Three variants: the full check (correction, then a polarizer parallel to
//! psi), the non-local check behind Bob's merge (polarizer set at random to one
//! of the four decoded states), and the direct check on Bob's beams `a'`/`b'`
//! (projection at random onto one of the four direction states).

use crate::jones::JonesVector;
use crate::measurement::{
    direct_pass_probability, nonlocal_pass_probability, run_trials, DetectorModel, EventRecord,
    McError, PsiSource, Station,
};
use crate::protocol::{OutcomeId, ProtocolError, TeleportRun};
use crate::scalar::Real;
use crate::state::PhotonState;

/// Trial and pass counts of one subensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cell {
    pub trials: u64,
    pub passes: u64,
}

impl Cell {
    /// `None` for an empty subensemble.
    pub fn rate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.passes as f64 / self.trials as f64)
    }

    fn add(&mut self, passed: bool) {
        self.trials += 1;
        self.passes += u64::from(passed);
    }
}

/// Counts by verifier setting and Alice's outcome. Lost trials only enter `lost`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubensembleReport {
    pub total: u64,
    pub lost: u64,
    /// By Alice's outcome, all settings.
    pub per_outcome: [Cell; 4],
    /// `table[k][j]`: verifier setting `k`, Alice's outcome `j`. Absent for the
    /// full check, which has a single fixed polarizer.
    pub table: Option<[[Cell; 4]; 4]>,
    /// Trials whose check was expected to pass with certainty.
    pub matched: Cell,
}

impl SubensembleReport {
    pub fn from_records(records: &[EventRecord]) -> Self {
        let mut report = SubensembleReport {
            total: records.len() as u64,
            ..Default::default()
        };
        let mut table = [[Cell::default(); 4]; 4];
        let mut has_settings = false;
        for r in records {
            let (Some(&j), Some(passed)) = (r.outcome.fired(), r.passed) else {
                if r.outcome.is_lost() {
                    report.lost += 1;
                }
                continue;
            };
            report.per_outcome[j.index()].add(passed);
            match r.verifier_setting {
                Some(k) => {
                    has_settings = true;
                    let k = usize::from(k - 1);
                    table[k][j.index()].add(passed);
                    if k == j.index() {
                        report.matched.add(passed);
                    }
                }
                None => report.matched.add(passed),
            }
        }
        if has_settings {
            report.table = Some(table);
        }
        report
    }

    pub fn matched_rate(&self) -> Option<f64> {
        self.matched.rate()
    }

    pub fn detected(&self) -> u64 {
        self.total - self.lost
    }

    pub fn cell(&self, setting: OutcomeId, outcome: OutcomeId) -> Option<Cell> {
        self.table.map(|t| t[setting.index()][outcome.index()])
    }
}

/// What a verifier position transmits with certainty.
#[derive(Debug, Clone, PartialEq)]
pub enum VerifierAxis<T: Real> {
    /// Polarization on `o` behind Bob's merge.
    Polarization(JonesVector<T>),
    /// Photon-2 state over `a'`/`b'`.
    Direction(PhotonState<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifierSetting<T: Real> {
    /// 1..=4
    pub index: u8,
    pub axis: VerifierAxis<T>,
}

/// The four verifier positions for `psi`, behind Bob's merge.
pub fn nonlocal_settings<T: Real>(
    psi: &JonesVector<T>,
) -> Result<Vec<VerifierSetting<T>>, ProtocolError> {
    let run = TeleportRun::new(psi)?;
    Ok(OutcomeId::ALL
        .iter()
        .map(|k| VerifierSetting {
            index: k.index() as u8 + 1,
            axis: VerifierAxis::Polarization(run.decoded[k.index()]),
        })
        .collect())
}

/// The four verifier positions for `psi` acting directly on `a'`/`b'`.
pub fn direct_settings<T: Real>(
    psi: &JonesVector<T>,
) -> Result<Vec<VerifierSetting<T>>, ProtocolError> {
    let run = TeleportRun::new(psi)?;
    OutcomeId::ALL
        .iter()
        .map(|&k| {
            Ok(VerifierSetting {
                index: k.index() as u8 + 1,
                axis: VerifierAxis::Direction(run.table.conditional(k)?.clone()),
            })
        })
        .collect()
}

/// `|<psi_k|psi_j>|^2` for the four decoded polarization states.
pub fn overlap_table<T: Real>(psi: &JonesVector<T>) -> Result<[[T; 4]; 4], ProtocolError> {
    let run = TeleportRun::new(psi)?;
    Ok(OutcomeId::ALL.map(|k| OutcomeId::ALL.map(|j| nonlocal_pass_probability(&run, k, j))))
}

/// `|<chi_k|chi_j>|^2` for the four photon-2 direction states.
pub fn direct_overlap_table<T: Real>(psi: &JonesVector<T>) -> Result<[[T; 4]; 4], ProtocolError> {
    let run = TeleportRun::new(psi)?;
    let mut out = [[T::zero(); 4]; 4];
    for k in OutcomeId::ALL {
        for j in OutcomeId::ALL {
            out[k.index()][j.index()] = direct_pass_probability(&run, k, j)?;
        }
    }
    Ok(out)
}

fn verify<T: Real>(
    psi: &JonesVector<T>,
    n: u64,
    eta: f64,
    seed: u64,
    station: Station<T>,
) -> Result<SubensembleReport, McError> {
    let det = DetectorModel::new(eta)?;
    let records = run_trials(&PsiSource::Fixed(*psi), n, &det, seed, &station)?;
    Ok(SubensembleReport::from_records(&records))
}

/// Correction, then a polarizer parallel to the Preparer's.
pub fn verify_full<T: Real>(
    psi: &JonesVector<T>,
    n: u64,
    eta: f64,
    seed: u64,
) -> Result<SubensembleReport, McError> {
    verify(psi, n, eta, seed, Station::Full { axis: None })
}

/// [`verify_full`] with the polarizer set along `axis` instead of `psi`.
pub fn verify_full_with_axis<T: Real>(
    psi: &JonesVector<T>,
    axis: &JonesVector<T>,
    n: u64,
    eta: f64,
    seed: u64,
) -> Result<SubensembleReport, McError> {
    verify(psi, n, eta, seed, Station::Full { axis: Some(*axis) })
}

/// Bob's merge, no correction, polarizer at a random one of the four positions.
pub fn verify_nonlocal<T: Real>(
    psi: &JonesVector<T>,
    n: u64,
    eta: f64,
    seed: u64,
) -> Result<SubensembleReport, McError> {
    verify(psi, n, eta, seed, Station::Nonlocal)
}

/// No Bob station; random projective check on `a'`/`b'`.
pub fn verify_direct<T: Real>(
    psi: &JonesVector<T>,
    n: u64,
    eta: f64,
    seed: u64,
) -> Result<SubensembleReport, McError> {
    verify(psi, n, eta, seed, Station::Direct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    /// The decoded states written out by hand, for substitution checks.
    fn decoded_by_hand(psi: &JonesVector<f64>) -> [JonesVector<f64>; 4] {
        let (a, b) = (psi.alpha(), psi.beta());
        // Jones vectors are (H, V) pairs.
        [
            JonesVector::new(a, b).unwrap(),
            JonesVector::new(b, a).unwrap(),
            JonesVector::new(-b, a).unwrap(),
            JonesVector::new(-a, b).unwrap(),
        ]
    }

    fn brute_force_table(psi: &JonesVector<f64>) -> [[f64; 4]; 4] {
        let s = decoded_by_hand(psi);
        s.map(|a| s.map(|b| a.fidelity(&b)))
    }

    #[test]
    fn overlap_table_for_h() {
        let t = overlap_table(&JonesVector::<f64>::h()).unwrap();
        let expected = [
            [1.0, 0.0, 0.0, 1.0],
            [0.0, 1.0, 1.0, 0.0],
            [0.0, 1.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 1.0],
        ];
        for k in 0..4 {
            for j in 0..4 {
                assert!((t[k][j] - expected[k][j]).abs() < 1e-15, "({k},{j})");
            }
        }
    }

    #[test]
    fn overlap_table_matches_substitution() {
        for (theta, phi) in [(1.0, 0.7), (0.3, 5.0), (2.9, 1.1)] {
            let psi = JonesVector::from_bloch(theta, phi);
            let t = overlap_table(&psi).unwrap();
            let o = brute_force_table(&psi);
            for k in 0..4 {
                for j in 0..4 {
                    assert!((t[k][j] - o[k][j]).abs() < 1e-12);
                    assert!((t[k][j] - t[j][k]).abs() < 1e-15);
                }
                assert!((t[k][k] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generic_psi_states_are_neither_orthogonal_nor_equal() {
        let t = overlap_table(&JonesVector::<f64>::from_bloch(1.0, 0.7)).unwrap();
        for k in 0..4 {
            for j in 0..4 {
                if k != j {
                    assert!(
                        t[k][j] > 1e-3 && t[k][j] < 1.0 - 1e-3,
                        "({k},{j}) = {}",
                        t[k][j]
                    );
                }
            }
        }
    }

    #[test]
    fn direct_and_nonlocal_tables_agree() {
        let psi = JonesVector::<f64>::from_bloch(2.2, 3.3);
        let a = overlap_table(&psi).unwrap();
        let b = direct_overlap_table(&psi).unwrap();
        for k in 0..4 {
            for j in 0..4 {
                assert!((a[k][j] - b[k][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_check_passes_with_certainty() {
        let r = verify_full(&JonesVector::<f64>::v(), 10_000, 1.0, 3).unwrap();
        assert_eq!(r.lost, 0);
        assert_eq!(r.matched.trials, 10_000);
        assert_eq!(r.matched_rate(), Some(1.0));
        assert!(r.table.is_none());
    }

    #[test]
    fn full_check_with_loss() {
        let psi = JonesVector::<f64>::from_bloch(0.8, 1.9);
        let r = verify_full(&psi, 10_000, 0.5, 4).unwrap();
        let frac = r.detected() as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 5.0 * (0.25f64 / 10_000.0).sqrt());
        assert_eq!(r.matched_rate(), Some(1.0));
    }

    #[test]
    fn full_check_with_orthogonal_polarizer_never_passes() {
        let h = JonesVector::<f64>::h();
        let r = verify_full_with_axis(&h, &JonesVector::v(), 2_000, 1.0, 5).unwrap();
        assert_eq!(r.matched_rate(), Some(0.0));
    }

    #[test]
    fn nonlocal_for_h_has_phase_insensitive_pairs() {
        let r = verify_nonlocal(&JonesVector::<f64>::h(), 10_000, 1.0, 6).unwrap();
        let cell = |k, j| r.cell(k, j).unwrap().rate().unwrap();
        use OutcomeId::*;
        assert_eq!(cell(D1, D4), 1.0);
        assert_eq!(cell(D1, D2), 0.0);
        assert_eq!(r.matched_rate(), Some(1.0));
    }

    #[test]
    fn nonlocal_diagonal_pair_at_equal_weights() {
        let r = 0.5f64.sqrt();
        let psi = JonesVector::new(Complex::new(r, 0.0), Complex::new(r, 0.0)).unwrap();
        let rep = verify_nonlocal(&psi, 10_000, 1.0, 7).unwrap();
        let c = rep.cell(OutcomeId::D1, OutcomeId::D2).unwrap();
        assert_eq!(c.rate(), Some(1.0));
    }

    #[test]
    fn empty_cells_have_no_rate() {
        let rep = verify_nonlocal(&JonesVector::<f64>::h(), 3, 1.0, 1).unwrap();
        let table = rep.table.unwrap();
        let empty = table.iter().flatten().filter(|c| c.trials == 0).count();
        assert!(empty >= 13);
        assert!(table
            .iter()
            .flatten()
            .filter(|c| c.trials == 0)
            .all(|c| c.rate().is_none()));
    }

    #[test]
    fn settings_transmit_their_own_outcome() {
        let psi = JonesVector::<f64>::from_bloch(1.2, 0.1);
        let run = TeleportRun::new(&psi).unwrap();
        for (k, s) in nonlocal_settings(&psi).unwrap().iter().enumerate() {
            let VerifierAxis::Polarization(axis) = &s.axis else {
                panic!()
            };
            assert!((axis.fidelity(&run.decoded[k]) - 1.0).abs() < 1e-12);
        }
        assert_eq!(direct_settings(&psi).unwrap().len(), 4);
    }

    #[test]
    fn rejects_bad_efficiency() {
        assert!(matches!(
            verify_full(&JonesVector::<f64>::h(), 10, 1.5, 0),
            Err(McError::InvalidEfficiency(_))
        ));
    }
}
