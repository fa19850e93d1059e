use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use super::parser::{element_spec, literal_vector};
use super::{CircuitProgram, Statement};
use crate::jones::JonesVector;
use crate::measurement::{
    pass_draw, sample_index, Detection, DetectorModel, EventRecord, McError, RandomStream,
};
use crate::protocol::{correction_plan, CorrectionPlan, OutcomeId};
use crate::scalar::Real;
use crate::state::{
    JointState, ModeId, ModeRegistry, Photon, PhotonKet, PhotonState, Polarization,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    /// A state guard tripped while executing the statement on `line`.
    #[error("line {line}: {message}")]
    Guard { line: usize, message: String },
    #[error(transparent)]
    Mc(#[from] McError),
}

/// One detector's branch after `detect`.
#[derive(Debug, Clone, PartialEq)]
pub struct DslBranch {
    pub label: String,
    pub mode: ModeId,
    pub probability: f64,
    /// Normalized state of the undetected photon at the end of the program.
    pub state: Option<PhotonState<f64>>,
    /// Feed-forward cells fired in this branch, when the program has any.
    pub correction: Option<CorrectionPlan>,
    /// Polarizer pass probability in this branch.
    pub pass_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DslExact {
    /// No `detect`: the final two-photon state.
    Final {
        state: JointState<f64>,
        pass_probability: Option<f64>,
    },
    Branched {
        /// Two-photon state right before the detectors.
        pre_detection: JointState<f64>,
        detected: Photon,
        branches: Vec<DslBranch>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DslRun {
    pub exact: DslExact,
    /// Sampled trials; empty without a `detect` or with zero trials.
    pub events: Vec<EventRecord<String>>,
}

impl DslRun {
    /// The last two-photon state: before the detectors, or at the end.
    pub fn joint_state(&self) -> &JointState<f64> {
        match &self.exact {
            DslExact::Final { state, .. } => state,
            DslExact::Branched { pre_detection, .. } => pre_detection,
        }
    }

    pub fn branches(&self) -> &[DslBranch] {
        match &self.exact {
            DslExact::Final { .. } => &[],
            DslExact::Branched { branches, .. } => branches,
        }
    }

    pub fn branch(&self, label: &str) -> Option<&DslBranch> {
        self.branches().iter().find(|b| b.label == label)
    }
}

enum Stage {
    Empty,
    Joint(JointState<f64>),
    Branched {
        pre_detection: JointState<f64>,
        detected: Photon,
        branches: Vec<DslBranch>,
    },
}

fn guard(line: usize, e: impl std::fmt::Display) -> RunError {
    RunError::Guard {
        line,
        message: e.to_string(),
    }
}

/// `|<axis|photon on mode>|^2`, summed over the partner's basis.
fn joint_pass_probability(
    s: &JointState<f64>,
    photon: Photon,
    mode: &ModeId,
    axis: &JonesVector<f64>,
) -> f64 {
    let mut partner: BTreeMap<PhotonKet, Complex<f64>> = BTreeMap::new();
    for (ket, amp) in s.iter() {
        let own = ket.photon(photon);
        if &own.mode != mode {
            continue;
        }
        let weight = match own.pol {
            Polarization::H => axis.alpha().conj(),
            Polarization::V => axis.beta().conj(),
        };
        *partner.entry(ket.photon(photon.other())).or_default() += weight * amp;
    }
    partner.values().map(|a| a.norm_sqr()).sum()
}

fn photon_pass_probability(s: &PhotonState<f64>, mode: &ModeId, axis: &JonesVector<f64>) -> f64 {
    (axis.alpha().conj() * s.amplitude(mode, Polarization::H)
        + axis.beta().conj() * s.amplitude(mode, Polarization::V))
    .norm_sqr()
}

fn detect(
    line: usize,
    s: &JointState<f64>,
    photon: Photon,
    entries: &[(ModeId, String)],
    feed_forward: bool,
) -> Result<Vec<DslBranch>, RunError> {
    if let Some(k) = s
        .populated(photon)
        .into_iter()
        .find(|k| !entries.iter().any(|(m, _)| *m == k.mode))
    {
        return Err(guard(
            line,
            format_args!(
                "photon {} reaches mode {}, which has no detector",
                photon.number(),
                k.mode
            ),
        ));
    }
    entries
        .iter()
        .map(|(mode, label)| {
            let parts = Polarization::BOTH
                .map(|pol| s.conditional(photon, &PhotonKet::new(mode.clone(), pol)));
            let norms = parts.each_ref().map(|p| p.squared_norm());
            if norms.iter().all(|&n| n > f64::prune_eps()) {
                return Err(guard(
                    line,
                    format_args!(
                        "detector {label} sees both polarizations; its branch would be mixed"
                    ),
                ));
            }
            let part = if norms[0] >= norms[1] {
                &parts[0]
            } else {
                &parts[1]
            };
            let correction = feed_forward.then(|| {
                correction_plan(
                    label
                        .parse::<OutcomeId>()
                        .expect("parser admits feed-forward only with D1..D4"),
                )
            });
            Ok(DslBranch {
                label: label.clone(),
                mode: mode.clone(),
                probability: norms[0] + norms[1],
                state: part.normalized(),
                correction,
                pass_probability: None,
            })
        })
        .collect()
}

/// Executes a checked program exactly, then samples `trials` events when it
/// contains a `detect`.
///
/// Per trial, on substream `(seed, trial)`: Born draw over the detectors in
/// declaration order, loss coin with efficiency `eta`, then the polarizer
/// draw for detected trials. This is the draw order of the built-in protocol,
/// so the standard table written as a program and the built-in full station
/// emit identical events.
pub fn compile_and_run(
    program: &CircuitProgram,
    trials: u64,
    seed: u64,
    eta: f64,
) -> Result<DslRun, RunError> {
    let det = DetectorModel::new(eta)?;
    let mut registry = ModeRegistry::new();
    for s in program.statements() {
        if let Statement::Modes { photon, names } = s {
            for m in names {
                registry
                    .declare(*photon, m.clone())
                    .expect("parser rejects duplicate declarations");
            }
        }
    }
    let feed_forward = program
        .statements()
        .skip_while(|s| !matches!(s, Statement::Detect { .. }))
        .any(|s| matches!(s, Statement::C1 { .. } | Statement::C2 { .. }));

    let mut stage = Stage::Empty;
    let mut pass: Option<f64> = None;
    for (line, s) in program.lines() {
        let line = *line;
        if let Some(spec) = element_spec(s) {
            let map = spec
                .map_err(|e| guard(line, e))?
                .build()
                .map_err(|e| guard(line, e))?;
            let photon = s.photon().expect("elements act on a photon");
            match &mut stage {
                Stage::Empty => unreachable!("parser puts pair first"),
                Stage::Joint(st) => {
                    *st = st
                        .apply_one_photon_map(photon, &map)
                        .map_err(|e| guard(line, e))?
                }
                Stage::Branched { branches, .. } => {
                    for b in branches.iter_mut() {
                        let fire = match (s, b.correction) {
                            (Statement::C1 { .. }, Some(plan)) => plan.fire_c1,
                            (Statement::C2 { .. }, Some(plan)) => plan.fire_c2,
                            _ => true,
                        };
                        if let (true, Some(st)) = (fire, &b.state) {
                            b.state = Some(st.apply(&map).map_err(|e| guard(line, e))?);
                        }
                    }
                }
            }
            continue;
        }
        match s {
            Statement::Modes { .. } => {}
            Statement::Pair { a1, a2, b1, b2 } => {
                let st = JointState::make_pair_state(registry.clone(), a1, b1, a2, b2)
                    .map_err(|e| guard(line, e))?;
                stage = Stage::Joint(st);
            }
            Statement::Detect { photon, entries } => {
                let Stage::Joint(st) = &stage else {
                    unreachable!("parser allows one detect, after pair")
                };
                let branches = detect(line, st, *photon, entries, feed_forward)?;
                stage = Stage::Branched {
                    pre_detection: st.clone(),
                    detected: *photon,
                    branches,
                };
            }
            Statement::Polarizer {
                photon,
                mode,
                literal,
            } => {
                let axis = literal_vector(literal).map_err(|e| guard(line, e))?;
                match &mut stage {
                    Stage::Empty => unreachable!("parser puts pair first"),
                    Stage::Joint(st) => {
                        pass = Some(joint_pass_probability(st, *photon, mode, &axis))
                    }
                    Stage::Branched { branches, .. } => {
                        for b in branches.iter_mut() {
                            b.pass_probability = Some(
                                b.state
                                    .as_ref()
                                    .map_or(0.0, |st| photon_pass_probability(st, mode, &axis)),
                            );
                        }
                    }
                }
            }
            _ => unreachable!("elements handled above"),
        }
    }

    let exact = match stage {
        Stage::Empty => unreachable!("parser requires pair"),
        Stage::Joint(state) => DslExact::Final {
            state,
            pass_probability: pass,
        },
        Stage::Branched {
            pre_detection,
            detected,
            branches,
        } => DslExact::Branched {
            pre_detection,
            detected,
            branches,
        },
    };
    let events = match &exact {
        DslExact::Branched { branches, .. } if trials > 0 => sample(branches, trials, seed, &det)?,
        _ => Vec::new(),
    };
    Ok(DslRun { exact, events })
}

fn sample(
    branches: &[DslBranch],
    trials: u64,
    seed: u64,
    det: &DetectorModel,
) -> Result<Vec<EventRecord<String>>, RunError> {
    let probs: Vec<f64> = branches.iter().map(|b| b.probability).collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > f64::CHECK_EPS {
        return Err(McError::ProbabilitySum(total).into());
    }
    Ok((0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = RandomStream::new(seed, trial);
            let k = sample_index(&probs, rng.uniform());
            let detected = det.detects(&mut rng);
            let mut record = EventRecord {
                trial,
                psi: None,
                outcome: Detection::Lost,
                correction: None,
                verifier_setting: None,
                passed: None,
            };
            if let (Some(k), true) = (k, detected) {
                let b = &branches[k];
                record.outcome = Detection::Fired(b.label.clone());
                record.correction = b.correction;
                record.passed = b
                    .pass_probability
                    .map(|p| pass_draw(p, f64::CHECK_EPS, &mut rng));
            }
            record
        })
        .collect())
}
