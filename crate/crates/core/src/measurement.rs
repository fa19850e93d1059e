//! Born-rule sampling, detector loss and trial harness.
//!
//! Every trial draws from its own ChaCha8 substream keyed by `(seed, trial)`,
//! so results do not depend on execution order and trials run in parallel.
//! Draw order inside a trial: random psi (2 draws, if requested), outcome,
//! loss coin, verifier setting (if the station has one), pass draw (only for
//! detected photons).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::jones::JonesVector;
use crate::protocol::{
    correction_plan, BranchTable, CorrectionPlan, OutcomeId, ProtocolError, TeleportRun,
};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("detector efficiency {0} is outside [0, 1]")]
    InvalidEfficiency(f64),
    #[error("outcome probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Uniform detection efficiency for Alice's detectors. No dark counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    efficiency: f64,
}

impl DetectorModel {
    pub fn new(efficiency: f64) -> Result<Self, McError> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(McError::InvalidEfficiency(efficiency));
        }
        Ok(Self { efficiency })
    }

    pub fn ideal() -> Self {
        Self { efficiency: 1.0 }
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    /// True when the photon is registered.
    pub fn detects(&self, rng: &mut RandomStream) -> bool {
        rng.uniform() < self.efficiency
    }
}

/// Deterministic substream `index` of the generator seeded by `seed`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    index: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { seed, index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detection<O> {
    Fired(O),
    Lost,
}

impl<O> Detection<O> {
    pub fn fired(&self) -> Option<&O> {
        match self {
            Detection::Fired(o) => Some(o),
            Detection::Lost => None,
        }
    }

    pub fn is_lost(&self) -> bool {
        matches!(self, Detection::Lost)
    }
}

/// Inverse-CDF pick of an index for draw `u`.
///
/// Returns `None` only when `u` falls in the missing mass `1 - sum(probs)`
/// beyond rounding; a draw that overshoots a complete distribution by
/// rounding goes to the last nonzero entry.
pub fn sample_index(probs: &[f64], u: f64) -> Option<usize> {
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return Some(i);
        }
    }
    if cum >= 1.0 - f64::CHECK_EPS {
        probs.iter().rposition(|&p| p > 0.0)
    } else {
        None
    }
}

/// Bernoulli draw; probabilities within `tol` of 0 or 1 are certain.
pub fn pass_draw(p: f64, tol: f64, rng: &mut RandomStream) -> bool {
    let u = rng.uniform();
    if p >= 1.0 - tol {
        true
    } else if p <= tol {
        false
    } else {
        u < p
    }
}

/// Samples Alice's detector: Born rule over the branches, then the loss coin.
pub fn sample_outcome<T: Real>(
    table: &BranchTable<T>,
    det: &DetectorModel,
    rng: &mut RandomStream,
) -> Result<Detection<OutcomeId>, McError> {
    let probs = table.probabilities().map(|p| p.as_f64());
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > T::CHECK_EPS {
        return Err(McError::ProbabilitySum(total));
    }
    let u = rng.uniform();
    let k = sample_index(&probs, u).and_then(OutcomeId::from_index);
    let detected = det.detects(rng);
    Ok(match k {
        Some(k) if detected => Detection::Fired(k),
        _ => Detection::Lost,
    })
}

/// Polarizer along `axis`: passes with probability `|<axis|state>|^2`.
pub fn polarizer_pass<T: Real>(
    state: &JonesVector<T>,
    axis: &JonesVector<T>,
    rng: &mut RandomStream,
) -> bool {
    pass_draw(axis.fidelity(state).as_f64(), T::CHECK_EPS, rng)
}

/// One trial's result.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord<O = OutcomeId> {
    pub trial: u64,
    pub psi: Option<JonesVector<f64>>,
    pub outcome: Detection<O>,
    pub correction: Option<CorrectionPlan>,
    /// Verifier position 1..=4, when the station has one.
    pub verifier_setting: Option<u8>,
    pub passed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsiSource<T: Real> {
    Fixed(JonesVector<T>),
    /// Haar-random state per trial, drawn from the trial's substream.
    Random,
}

/// What Bob's side does with photon 2.
#[derive(Debug, Clone, PartialEq)]
pub enum Station<T: Real> {
    /// Record Alice's outcome and the correction Bob would fire.
    Detect,
    /// Correction cells, then a polarizer parallel to psi (or `axis`, a test hook).
    Full { axis: Option<JonesVector<T>> },
    /// Bob's merge without correction; polarizer set at random to one of the
    /// four decoded states.
    Nonlocal,
    /// No Bob station; projective check at random onto one of the four
    /// photon-2 direction states.
    Direct,
}

/// Pass probability for setting `k` given outcome `j`, with Bob's merge.
pub fn nonlocal_pass_probability<T: Real>(run: &TeleportRun<T>, k: OutcomeId, j: OutcomeId) -> T {
    run.decoded[k.index()].fidelity(&run.decoded[j.index()])
}

/// Pass probability for setting `k` given outcome `j`, direction states directly.
pub fn direct_pass_probability<T: Real>(
    run: &TeleportRun<T>,
    k: OutcomeId,
    j: OutcomeId,
) -> Result<T, ProtocolError> {
    let a = run.table.conditional(k)?;
    let b = run.table.conditional(j)?;
    Ok(a.inner(b).norm_sqr())
}

fn run_one<T: Real>(
    trial: u64,
    fixed: Option<&TeleportRun<T>>,
    det: &DetectorModel,
    seed: u64,
    station: &Station<T>,
) -> Result<EventRecord, McError> {
    let mut rng = RandomStream::new(seed, trial);
    let owned;
    let run = match fixed {
        Some(run) => run,
        None => {
            let psi = JonesVector::<T>::random(rng.rng());
            owned = TeleportRun::new(&psi)?;
            &owned
        }
    };
    let outcome = sample_outcome(&run.table, det, &mut rng)?;
    let setting = match station {
        Station::Nonlocal | Station::Direct => {
            let idx = ((rng.uniform() * 4.0) as usize).min(3);
            Some(OutcomeId::from_index(idx).expect("index below 4"))
        }
        _ => None,
    };
    let mut record = EventRecord {
        trial,
        psi: Some(run.psi.to_f64()),
        outcome,
        correction: None,
        verifier_setting: setting.map(|k| k.index() as u8 + 1),
        passed: None,
    };
    let Detection::Fired(j) = outcome else {
        return Ok(record);
    };
    match station {
        Station::Detect => {
            record.correction = Some(correction_plan(j));
        }
        Station::Full { axis } => {
            let out = run.outcome(j);
            record.correction = Some(out.plan);
            let axis = axis.unwrap_or(run.psi);
            record.passed = Some(polarizer_pass(&out.final_state, &axis, &mut rng));
        }
        Station::Nonlocal => {
            let k = setting.expect("nonlocal station draws a setting");
            let p = nonlocal_pass_probability(run, k, j).as_f64();
            record.passed = Some(pass_draw(p, T::CHECK_EPS, &mut rng));
        }
        Station::Direct => {
            let k = setting.expect("direct station draws a setting");
            let p = direct_pass_probability(run, k, j)?.as_f64();
            record.passed = Some(pass_draw(p, T::CHECK_EPS, &mut rng));
        }
    }
    Ok(record)
}

/// Runs `n` independent trials. Output is in trial order and identical for
/// identical arguments.
pub fn run_trials<T: Real>(
    psi: &PsiSource<T>,
    n: u64,
    det: &DetectorModel,
    seed: u64,
    station: &Station<T>,
) -> Result<Vec<EventRecord>, McError> {
    if n == 0 {
        return Err(McError::NoTrials);
    }
    let fixed = match psi {
        PsiSource::Fixed(psi) => Some(TeleportRun::new(psi)?),
        PsiSource::Random => None,
    };
    (0..n)
        .into_par_iter()
        .map(|trial| run_one(trial, fixed.as_ref(), det, seed, station))
        .collect()
}

/// Counts per outcome `D1..D4` followed by the lost count.
pub fn outcome_counts(records: &[EventRecord]) -> [u64; 5] {
    let mut counts = [0u64; 5];
    for r in records {
        match r.outcome {
            Detection::Fired(k) => counts[k.index()] += 1,
            Detection::Lost => counts[4] += 1,
        }
    }
    counts
}

/// Pearson statistic and degrees of freedom. Categories with zero expected
/// probability are left out; any count in one makes the statistic infinite.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> (f64, usize) {
    let n: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if c > 0 {
                return (f64::INFINITY, 0);
            }
            continue;
        }
        let expected = p * n as f64;
        stat += (c as f64 - expected).powi(2) / expected;
        cells += 1;
    }
    (stat, cells.saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> BranchTable<f64> {
        TeleportRun::new(&JonesVector::from_bloch(1.0, 0.5))
            .unwrap()
            .table
    }

    /// 5 sigma of a binomial frequency.
    fn five_sigma(p: f64, n: usize) -> f64 {
        5.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn efficiency_validation() {
        assert!(DetectorModel::new(1.5).is_err());
        assert!(DetectorModel::new(-0.1).is_err());
        assert!(DetectorModel::new(f64::NAN).is_err());
        assert!(DetectorModel::new(0.0).is_ok());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..5)
            .map(|_| 0.0)
            .scan(RandomStream::new(42, 3), |r, _| Some(r.uniform()))
            .collect();
        let b: Vec<f64> = (0..5)
            .map(|_| 0.0)
            .scan(RandomStream::new(42, 3), |r, _| Some(r.uniform()))
            .collect();
        let c: Vec<f64> = (0..5)
            .map(|_| 0.0)
            .scan(RandomStream::new(42, 4), |r, _| Some(r.uniform()))
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ideal_detector_frequencies() {
        let t = table();
        let det = DetectorModel::ideal();
        let n = 100_000;
        let mut counts = [0usize; 5];
        for i in 0..n {
            match sample_outcome(&t, &det, &mut RandomStream::new(9, i as u64)).unwrap() {
                Detection::Fired(k) => counts[k.index()] += 1,
                Detection::Lost => counts[4] += 1,
            }
        }
        assert_eq!(counts[4], 0);
        for c in &counts[..4] {
            let f = *c as f64 / n as f64;
            assert!((f - 0.25).abs() < five_sigma(0.25, n), "{f}");
        }
    }

    #[test]
    fn blind_and_half_detectors() {
        let t = table();
        let blind = DetectorModel::new(0.0).unwrap();
        for i in 0..1000 {
            assert!(sample_outcome(&t, &blind, &mut RandomStream::new(1, i))
                .unwrap()
                .is_lost());
        }
        let half = DetectorModel::new(0.5).unwrap();
        let n = 100_000;
        let lost = (0..n)
            .filter(|&i| {
                sample_outcome(&t, &half, &mut RandomStream::new(2, i))
                    .unwrap()
                    .is_lost()
            })
            .count();
        assert!((lost as f64 / n as f64 - 0.5).abs() < five_sigma(0.5, n as usize));
    }

    #[test]
    fn polarizer_statistics() {
        let h = JonesVector::<f64>::h();
        let v = JonesVector::<f64>::v();
        let d = JonesVector::<f64>::from_bloch(std::f64::consts::FRAC_PI_2, 0.0);
        let psi = JonesVector::<f64>::from_bloch(1.3, 2.9);
        let n = 100_000u64;
        let mut passes = 0;
        for i in 0..n {
            let mut rng = RandomStream::new(5, i);
            assert!(polarizer_pass(&psi, &psi, &mut rng));
            assert!(!polarizer_pass(&h, &v, &mut rng));
            if polarizer_pass(&h, &d, &mut rng) {
                passes += 1;
            }
        }
        let f = passes as f64 / n as f64;
        assert!((f - 0.5).abs() < five_sigma(0.5, n as usize), "{f}");
    }

    #[test]
    fn sample_index_edges() {
        assert_eq!(sample_index(&[0.25; 4], 0.0), Some(0));
        assert_eq!(sample_index(&[0.25; 4], 0.999_999_999), Some(3));
        assert_eq!(sample_index(&[0.5, 0.5, 0.0], 1.0), Some(1));
        assert_eq!(sample_index(&[0.2, 0.3], 0.7), None);
    }

    #[test]
    fn run_trials_contract() {
        let psi = PsiSource::Fixed(JonesVector::from_bloch(1.0, 0.5));
        let det = DetectorModel::ideal();
        let st = Station::Full { axis: None };
        let a = run_trials(&psi, 10, &det, 42, &st).unwrap();
        let b = run_trials(&psi, 10, &det, 42, &st).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, r)| r.trial == i as u64));
        assert!(a.iter().all(|r| r.passed == Some(true)));
        assert_eq!(
            run_trials(&psi, 0, &det, 42, &st).unwrap_err(),
            McError::NoTrials
        );
    }

    #[test]
    fn lost_records_carry_no_correction() {
        let det = DetectorModel::new(0.5).unwrap();
        let recs = run_trials::<f64>(
            &PsiSource::Random,
            2000,
            &det,
            8,
            &Station::Full { axis: None },
        )
        .unwrap();
        for r in &recs {
            if r.outcome.is_lost() {
                assert!(r.correction.is_none() && r.passed.is_none());
            } else {
                assert_eq!(r.passed, Some(true));
            }
        }
    }

    #[test]
    fn d3_frequency() {
        let recs = run_trials(
            &PsiSource::Fixed(JonesVector::<f64>::from_bloch(0.3, 4.0)),
            100_000,
            &DetectorModel::ideal(),
            17,
            &Station::Detect,
        )
        .unwrap();
        let counts = outcome_counts(&recs);
        let f = counts[2] as f64 / 1e5;
        assert!((f - 0.25).abs() < five_sigma(0.25, 100_000));
    }

    #[test]
    fn chi_square_basics() {
        let (stat, dof) = chi_square(&[25, 25, 25, 25, 0], &[0.25, 0.25, 0.25, 0.25, 0.0]);
        assert_eq!((stat, dof), (0.0, 3));
        let (stat, _) = chi_square(&[10, 0], &[1.0, 0.0]);
        assert_eq!(stat, 0.0);
        let (stat, _) = chi_square(&[9, 1], &[1.0, 0.0]);
        assert!(stat.is_infinite());
    }
}
