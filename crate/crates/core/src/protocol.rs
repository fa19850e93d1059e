//! The teleportation pipeline: source, Preparer, Alice's analyzer, outcome
//! branches, Bob's decoder and the Pockels-cell correction.
//!
//! Beam names follow the optical table: photon 1 travels in `a`/`b`, is split
//! into `1`..`4` and detected on `1'`..`4'`; photon 2 travels in `a'`/`b'` and
//! is merged into `o`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::{self, ElementError};
use crate::jones::JonesVector;
use crate::scalar::Real;
use crate::state::{
    mode, JointState, ModeId, ModeRegistry, Photon, PhotonKet, PhotonState, Polarization,
    StateError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error("photon {photon} has amplitude in unexpected mode {mode}")]
    UnexpectedSupport { photon: Photon, mode: ModeId },
    #[error("photon {photon} has unexpected {pol} amplitude in mode {mode}")]
    UnexpectedPolarization {
        photon: Photon,
        mode: ModeId,
        pol: Polarization,
    },
    #[error("outcome {0} has zero probability")]
    EmptyBranch(OutcomeId),
}

/// Beam names of the standard optical table.
#[derive(Debug, Clone)]
pub struct Layout {
    pub a: ModeId,
    pub b: ModeId,
    pub a_bob: ModeId,
    pub b_bob: ModeId,
    /// Alice's split beams `1`..`4`.
    pub arms: [ModeId; 4],
    /// Detector beams `1'`..`4'`.
    pub detectors: [ModeId; 4],
    pub o: ModeId,
}

/// The standard layout, built once.
pub fn layout() -> &'static Layout {
    static LAYOUT: OnceLock<Layout> = OnceLock::new();
    LAYOUT.get_or_init(|| Layout {
        a: mode("a"),
        b: mode("b"),
        a_bob: mode("a'"),
        b_bob: mode("b'"),
        arms: [mode("1"), mode("2"), mode("3"), mode("4")],
        detectors: [mode("1'"), mode("2'"), mode("3'"), mode("4'")],
        o: mode("o"),
    })
}

/// Which of Alice's detectors fired; `Dk` sits on beam `k'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeId {
    D1,
    D2,
    D3,
    D4,
}

impl OutcomeId {
    pub const ALL: [OutcomeId; 4] = [OutcomeId::D1, OutcomeId::D2, OutcomeId::D3, OutcomeId::D4];

    /// Zero-based index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn detector_mode(self) -> &'static ModeId {
        &layout().detectors[self.index()]
    }
}

impl fmt::Display for OutcomeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D{}", self.index() + 1)
    }
}

impl FromStr for OutcomeId {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "D1" => Ok(OutcomeId::D1),
            "D2" => Ok(OutcomeId::D2),
            "D3" => Ok(OutcomeId::D3),
            "D4" => Ok(OutcomeId::D4),
            _ => Err(()),
        }
    }
}

/// Which Pockels cells fire; C1 acts before C2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CorrectionPlan {
    pub fire_c1: bool,
    pub fire_c2: bool,
}

impl CorrectionPlan {
    pub const ALL: [CorrectionPlan; 4] = [
        CorrectionPlan::new(false, false),
        CorrectionPlan::new(false, true),
        CorrectionPlan::new(true, false),
        CorrectionPlan::new(true, true),
    ];

    pub const fn new(fire_c1: bool, fire_c2: bool) -> Self {
        Self { fire_c1, fire_c2 }
    }

    /// Applies the plan to a photon on `beam`.
    pub fn apply<T: Real>(
        &self,
        state: &PhotonState<T>,
        beam: &ModeId,
    ) -> Result<PhotonState<T>, StateError> {
        let mut out = state.clone();
        if self.fire_c1 {
            out = out.apply(&elements::pockels_c1(beam))?;
        }
        if self.fire_c2 {
            out = out.apply(&elements::pockels_c2(beam))?;
        }
        Ok(out)
    }
}

impl fmt::Display for CorrectionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.fire_c1, self.fire_c2) {
            (false, false) => f.write_str("none"),
            (true, false) => f.write_str("C1"),
            (false, true) => f.write_str("C2"),
            (true, true) => f.write_str("C1+C2"),
        }
    }
}

/// Cells Bob fires for each of Alice's outcomes.
pub fn correction_plan(k: OutcomeId) -> CorrectionPlan {
    match k {
        OutcomeId::D1 => CorrectionPlan::new(false, false),
        OutcomeId::D2 => CorrectionPlan::new(false, true),
        OutcomeId::D3 => CorrectionPlan::new(true, true),
        OutcomeId::D4 => CorrectionPlan::new(true, false),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T: Real> {
    pub probability: T,
    /// Normalized state of photon 2; `None` when the branch is empty.
    pub conditional: Option<PhotonState<T>>,
}

/// Outcome probabilities and photon-2 conditional states, indexed by outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTable<T: Real> {
    branches: [Branch<T>; 4],
}

impl<T: Real> BranchTable<T> {
    pub fn get(&self, k: OutcomeId) -> &Branch<T> {
        &self.branches[k.index()]
    }

    pub fn probabilities(&self) -> [T; 4] {
        [0, 1, 2, 3].map(|i| self.branches[i].probability)
    }

    pub fn conditional(&self, k: OutcomeId) -> Result<&PhotonState<T>, ProtocolError> {
        self.get(k)
            .conditional
            .as_ref()
            .ok_or(ProtocolError::EmptyBranch(k))
    }
}

fn require_support<T: Real>(
    s: &JointState<T>,
    photon: Photon,
    allowed: &[&ModeId],
) -> Result<(), ProtocolError> {
    match s
        .populated(photon)
        .into_iter()
        .find(|k| !allowed.contains(&&k.mode))
    {
        Some(k) => Err(ProtocolError::UnexpectedSupport {
            photon,
            mode: k.mode,
        }),
        None => Ok(()),
    }
}

/// The direction-entangled source state on `a,b | a',b'`, both photons H.
pub fn source_state<T: Real>() -> JointState<T> {
    let l = layout();
    let registry = ModeRegistry::new();
    let registry = [
        (&l.a, Photon::One),
        (&l.b, Photon::One),
        (&l.a_bob, Photon::Two),
        (&l.b_bob, Photon::Two),
    ]
    .into_iter()
    .fold(registry, |mut r, (m, p)| {
        r.declare(p, m.clone()).expect("distinct layout names");
        r
    });
    JointState::make_pair_state(registry, &l.a, &l.b, &l.a_bob, &l.b_bob)
        .expect("standard layout is valid")
}

/// The Preparer writes `psi` into photon 1's polarization on both beams.
pub fn preparer_encode<T: Real>(
    s: &JointState<T>,
    psi: &JonesVector<T>,
) -> Result<JointState<T>, ProtocolError> {
    let l = layout();
    require_support(s, Photon::One, &[&l.a, &l.b])?;
    let map = elements::jones_rotation(psi, &[l.a.clone(), l.b.clone()])?;
    Ok(s.apply_one_photon_map(Photon::One, &map)?)
}

/// Alice's analyzer up to (not including) detection: two PBSs, V->H rotations
/// on beams 1 and 3, and the symmetric beam splitters S1 (1,4) and S2 (2,3).
pub fn alice_transform<T: Real>(s: &JointState<T>) -> Result<JointState<T>, ProtocolError> {
    let l = layout();
    require_support(s, Photon::One, &[&l.a, &l.b])?;
    let [m1, m2, m3, m4] = &l.arms;
    let [d1, d2, d3, d4] = &l.detectors;
    let steps = [
        elements::pbs(&l.a, m1, m2)?,
        elements::pbs(&l.b, m3, m4)?,
        elements::pol_rotate_to_h(m1),
        elements::pol_rotate_to_h(m3),
        elements::symmetric_bs(m1, m4, d1, d4)?,
        elements::symmetric_bs(m2, m3, d2, d3)?,
    ];
    let mut out = s.clone();
    for step in &steps {
        out = out.apply_one_photon_map(Photon::One, step)?;
    }
    Ok(out)
}

/// Splits an analyzer output by which detector beam photon 1 occupies.
pub fn branch_table<T: Real>(s: &JointState<T>) -> Result<BranchTable<T>, ProtocolError> {
    let l = layout();
    let allowed: Vec<&ModeId> = l.detectors.iter().collect();
    require_support(s, Photon::One, &allowed)?;
    if let Some(k) = s
        .populated(Photon::One)
        .into_iter()
        .find(|k| k.pol == Polarization::V)
    {
        return Err(ProtocolError::UnexpectedPolarization {
            photon: Photon::One,
            mode: k.mode,
            pol: k.pol,
        });
    }
    let branches = OutcomeId::ALL.map(|k| {
        let ket = PhotonKet::new(k.detector_mode().clone(), Polarization::H);
        let partner = s.conditional(Photon::One, &ket);
        Branch {
            probability: partner.squared_norm(),
            conditional: partner.normalized(),
        }
    });
    Ok(BranchTable { branches })
}

/// Bob's decoder: V rotation on `a'` then PBS merge of `a'` (V) and `b'` (H) into `o`.
pub fn bob_decode<T: Real>(conditional: &PhotonState<T>) -> Result<PhotonState<T>, ProtocolError> {
    let l = layout();
    for (k, _) in conditional.iter() {
        if k.mode != l.a_bob && k.mode != l.b_bob {
            return Err(ProtocolError::UnexpectedSupport {
                photon: Photon::Two,
                mode: k.mode.clone(),
            });
        }
        if k.pol == Polarization::V {
            return Err(ProtocolError::UnexpectedPolarization {
                photon: Photon::Two,
                mode: k.mode.clone(),
                pol: k.pol,
            });
        }
    }
    let rotated = conditional.apply(&elements::pol_rotate_h_to_v(&l.a_bob))?;
    Ok(rotated.apply(&elements::pbs_merge(&l.a_bob, &l.b_bob, &l.o)?)?)
}

/// Reads a unit-norm photon on `beam` as a Jones vector.
pub fn polarization_on<T: Real>(
    state: &PhotonState<T>,
    beam: &ModeId,
) -> Result<JonesVector<T>, ProtocolError> {
    if let Some((k, _)) = state.iter().find(|(k, _)| &k.mode != beam) {
        return Err(ProtocolError::UnexpectedSupport {
            photon: Photon::Two,
            mode: k.mode.clone(),
        });
    }
    Ok(JonesVector::new_unchecked(
        state.amplitude(beam, Polarization::H),
        state.amplitude(beam, Polarization::V),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeleportOutcome<T: Real> {
    pub outcome: OutcomeId,
    pub probability: T,
    pub plan: CorrectionPlan,
    /// Photon 2's polarization on `o` after the correction.
    pub final_state: JonesVector<T>,
    pub fidelity: T,
}

/// Every intermediate of one exact run, computed once and reused.
#[derive(Debug, Clone)]
pub struct TeleportRun<T: Real> {
    pub psi: JonesVector<T>,
    pub encoded: JointState<T>,
    pub analyzed: JointState<T>,
    pub table: BranchTable<T>,
    /// Photon 2 on `o` after Bob's decoder, before correction, per outcome.
    pub decoded: [JonesVector<T>; 4],
    pub outcomes: [TeleportOutcome<T>; 4],
}

impl<T: Real> TeleportRun<T> {
    pub fn new(psi: &JonesVector<T>) -> Result<Self, ProtocolError> {
        let l = layout();
        let encoded = preparer_encode(&source_state(), psi)?;
        let analyzed = alice_transform(&encoded)?;
        let table = branch_table(&analyzed)?;
        let mut decoded = Vec::with_capacity(4);
        let mut outcomes = Vec::with_capacity(4);
        for k in OutcomeId::ALL {
            let merged = bob_decode(table.conditional(k)?)?;
            decoded.push(polarization_on(&merged, &l.o)?);
            let plan = correction_plan(k);
            let corrected = plan.apply(&merged, &l.o)?;
            let final_state = polarization_on(&corrected, &l.o)?;
            outcomes.push(TeleportOutcome {
                outcome: k,
                probability: table.get(k).probability,
                plan,
                fidelity: psi.fidelity(&final_state),
                final_state,
            });
        }
        Ok(Self {
            psi: *psi,
            encoded,
            analyzed,
            table,
            decoded: decoded.try_into().expect("four outcomes"),
            outcomes: outcomes.try_into().expect("four outcomes"),
        })
    }

    pub fn outcome(&self, k: OutcomeId) -> &TeleportOutcome<T> {
        &self.outcomes[k.index()]
    }
}

/// End-to-end exact teleportation of `psi`, one entry per outcome.
pub fn teleport_exact<T: Real>(
    psi: &JonesVector<T>,
) -> Result<[TeleportOutcome<T>; 4], ProtocolError> {
    Ok(TeleportRun::new(psi)?.outcomes)
}
