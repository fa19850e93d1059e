//! Generalized Bell mode.
//!
//! Alice picks an encoding before her four-outcome analysis, which then acts
//! as a POVM on the direction qubit she shares with Bob. Bob projects his
//! photon on a basis of `span{|a'>, |b'>}`. Correlations are computed from the
//! exact two-photon state and sampled with the per-trial streams of
//! [`crate::measurement`]. Lost trials are discarded before any correlator is
//! formed (fair sampling) and counted separately.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::jones::JonesVector;
use crate::measurement::{sample_index, DetectorModel, McError, RandomStream};
use crate::protocol::{layout, OutcomeId, ProtocolError, TeleportRun};
use crate::scalar::Real;
use crate::state::{Photon, PhotonKet, PhotonState, Polarization};

/// Row-major 2x2 complex matrix over the basis `(a, b)` / `(a', b')`.
pub type Mat2<T> = [[Complex<T>; 2]; 2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BellError {
    #[error("{name} = {value} is outside {range}")]
    AngleOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("binning must map every outcome to +1 or -1, got {0}")]
    InvalidSign(i8),
    #[error("binning assigns the same sign to all four outcomes")]
    DegenerateBinning,
    #[error("cannot parse binning {0:?}; expected four of '+'/'-'")]
    BadBinningSyntax(String),
    #[error("strategy has no encodings")]
    EmptyStrategy,
    #[error("strategy weights must be non-negative and sum to 1, got sum {0}")]
    BadWeights(f64),
    #[error("no Bob settings given")]
    NoSettings,
    #[error("efficiency grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Alice's measurement-choice set: encodings with selection weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AliceStrategy<T: Real> {
    encodings: Vec<JonesVector<T>>,
    weights: Vec<T>,
}

impl<T: Real> AliceStrategy<T> {
    pub fn new(choices: Vec<(JonesVector<T>, T)>) -> Result<Self, BellError> {
        if choices.is_empty() {
            return Err(BellError::EmptyStrategy);
        }
        let (encodings, weights): (Vec<_>, Vec<_>) = choices.into_iter().unzip();
        let sum = weights.iter().fold(T::zero(), |a, &w| a + w);
        if weights.iter().any(|w| w.is_nan() || *w < T::zero())
            || (sum - T::one()).abs() > T::input_eps()
        {
            return Err(BellError::BadWeights(sum.as_f64()));
        }
        Ok(Self { encodings, weights })
    }

    pub fn uniform(encodings: Vec<JonesVector<T>>) -> Result<Self, BellError> {
        let w = T::one() / T::of(encodings.len().max(1) as f64);
        Self::new(encodings.into_iter().map(|e| (e, w)).collect())
    }

    pub fn encodings(&self) -> &[JonesVector<T>] {
        &self.encodings
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

/// Bob's projective basis: `|+> = cos(t/2)|a'> + e^{ip} sin(t/2)|b'>` and its
/// orthogonal complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BobSetting<T: Real> {
    theta: T,
    phi: T,
}

impl<T: Real> BobSetting<T> {
    /// `theta` in `[0, pi]`, `phi` in `[0, 2pi)`.
    pub fn new(theta: T, phi: T) -> Result<Self, BellError> {
        if !(theta >= T::zero() && theta <= T::PI()) {
            return Err(BellError::AngleOutOfRange {
                name: "theta",
                value: theta.as_f64(),
                range: "[0, pi]",
            });
        }
        if !(phi >= T::zero() && phi < T::TAU()) {
            return Err(BellError::AngleOutOfRange {
                name: "phi",
                value: phi.as_f64(),
                range: "[0, 2pi)",
            });
        }
        Ok(Self { theta, phi })
    }

    /// Setting whose observable `|+><+| - |-><-|` is `n . sigma`. `n` need not be unit.
    pub fn from_bloch_vector(n: [T; 3]) -> Self {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if norm <= T::prune_eps() {
            return Self {
                theta: T::zero(),
                phi: T::zero(),
            };
        }
        let z = (n[2] / norm).max(-T::one()).min(T::one());
        let mut phi = n[1].atan2(n[0]);
        if phi < T::zero() {
            phi += T::TAU();
        }
        if phi >= T::TAU() {
            phi = T::zero();
        }
        Self {
            theta: z.acos(),
            phi,
        }
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    /// Coefficients over `(a', b')` of `|+>` (row 0) and `|->` (row 1).
    pub fn basis(&self) -> Mat2<T> {
        let half = self.theta / T::of(2.0);
        let (c, s) = (half.cos(), half.sin());
        let e = Complex::from_polar(T::one(), self.phi);
        [
            [Complex::new(c, T::zero()), e * s],
            [-e.conj() * s, Complex::new(c, T::zero())],
        ]
    }

    /// `|+>` for `sign = 0`, `|->` for `sign = 1`, as a photon-2 state.
    pub fn state(&self, sign: usize) -> PhotonState<T> {
        let l = layout();
        let row = self.basis()[sign];
        PhotonState::from_amplitudes(
            &[l.a_bob.clone(), l.b_bob.clone()],
            [
                (PhotonKet::new(l.a_bob.clone(), Polarization::H), row[0]),
                (PhotonKet::new(l.b_bob.clone(), Polarization::H), row[1]),
            ],
        )
        .expect("Bob's modes are declared")
    }
}

/// Map from Alice's outcomes to `+1` / `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Binning([i8; 4]);

impl Binning {
    pub fn new(signs: [i8; 4]) -> Result<Self, BellError> {
        if let Some(&s) = signs.iter().find(|s| s.abs() != 1) {
            return Err(BellError::InvalidSign(s));
        }
        if signs.iter().all(|&s| s == signs[0]) {
            return Err(BellError::DegenerateBinning);
        }
        Ok(Self(signs))
    }

    pub fn sign(&self, k: OutcomeId) -> i8 {
        self.0[k.index()]
    }

    pub fn signs(&self) -> [i8; 4] {
        self.0
    }

    /// The 14 non-degenerate binnings.
    pub fn all() -> Vec<Self> {
        (0u8..16)
            .filter_map(|m| {
                Self::new([0, 1, 2, 3].map(|i| if m >> i & 1 == 1 { -1 } else { 1 })).ok()
            })
            .collect()
    }
}

/// `{D1, D2} -> +1`, `{D3, D4} -> -1`.
impl Default for Binning {
    fn default() -> Self {
        Self([1, 1, -1, -1])
    }
}

impl fmt::Display for Binning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for Binning {
    type Err = BellError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let signs: Vec<i8> = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                _ => Err(BellError::BadBinningSyntax(s.to_string())),
            })
            .collect::<Result<_, _>>()?;
        let signs: [i8; 4] = signs
            .try_into()
            .map_err(|_| BellError::BadBinningSyntax(s.to_string()))?;
        Self::new(signs)
    }
}

/// Alice's POVM for encoding `psi` on the direction qubit `(a, b)`.
///
/// `E_k = |c_k*><c_k*| / 2` with `c_k` the normalized photon-2 state left by
/// outcome `k`.
pub fn povm_elements<T: Real>(psi: &JonesVector<T>) -> Result<[Mat2<T>; 4], ProtocolError> {
    let run = TeleportRun::new(psi)?;
    povm_from_run(&run)
}

fn povm_from_run<T: Real>(run: &TeleportRun<T>) -> Result<[Mat2<T>; 4], ProtocolError> {
    let l = layout();
    let half = T::of(0.5);
    let mut out = [[[Complex::new(T::zero(), T::zero()); 2]; 2]; 4];
    for k in OutcomeId::ALL {
        let cond = run.table.conditional(k)?;
        let c = [
            cond.amplitude(&l.a_bob, Polarization::H).conj(),
            cond.amplitude(&l.b_bob, Polarization::H).conj(),
        ];
        for i in 0..2 {
            for j in 0..2 {
                out[k.index()][i][j] = c[i] * c[j].conj() * half;
            }
        }
    }
    Ok(out)
}

/// `trace(E rho)`.
pub fn trace_product<T: Real>(e: &Mat2<T>, rho: &Mat2<T>) -> Complex<T> {
    let mut t = Complex::new(T::zero(), T::zero());
    for i in 0..2 {
        for j in 0..2 {
            t += e[i][j] * rho[j][i];
        }
    }
    t
}

/// `P(k, s)` for one encoding and setting, `s = 0` for `+`. Read off the exact
/// two-photon state after Alice's analyzer.
fn joint_from_run<T: Real>(run: &TeleportRun<T>, setting: &BobSetting<T>) -> [[T; 2]; 4] {
    let bob = [setting.state(0), setting.state(1)];
    OutcomeId::ALL.map(|k| {
        let ket = PhotonKet::new(k.detector_mode().clone(), Polarization::H);
        let partner = run.analyzed.conditional(Photon::One, &ket);
        [0, 1].map(|s| bob[s].inner(&partner).norm_sqr())
    })
}

/// Exact and sampled statistics of one (encoding, setting) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCell<T: Real> {
    /// `probability[k][s]`, `s = 0` for Bob's `+`.
    pub probability: [[T; 2]; 4],
    /// Detected trials, same indexing.
    pub counts: [[u64; 2]; 4],
}

impl<T: Real> CorrelationCell<T> {
    pub fn alice_marginal(&self) -> [T; 4] {
        self.probability.map(|p| p[0] + p[1])
    }

    pub fn bob_marginal(&self) -> [T; 2] {
        let mut m = [T::zero(); 2];
        for p in &self.probability {
            m[0] += p[0];
            m[1] += p[1];
        }
        m
    }

    pub fn total_probability(&self) -> T {
        let [p, m] = self.bob_marginal();
        p + m
    }

    pub fn correlator(&self, binning: &Binning) -> T {
        let mut e = T::zero();
        for k in OutcomeId::ALL {
            let a = T::of(f64::from(binning.sign(k)));
            e += a * (self.probability[k.index()][0] - self.probability[k.index()][1]);
        }
        e
    }

    pub fn detected(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Post-selected correlator and its standard error; `None` without data.
    pub fn empirical_correlator(&self, binning: &Binning) -> Option<(f64, f64)> {
        let n = self.detected();
        if n == 0 {
            return None;
        }
        let mut sum = 0i64;
        for k in OutcomeId::ALL {
            let a = i64::from(binning.sign(k));
            let [p, m] = self.counts[k.index()];
            sum += a * (p as i64 - m as i64);
        }
        let e = sum as f64 / n as f64;
        Some((e, ((1.0 - e * e).max(0.0) / n as f64).sqrt()))
    }
}

/// Cells indexed by `(encoding, setting)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable<T: Real> {
    pub encodings: Vec<JonesVector<T>>,
    pub settings: Vec<BobSetting<T>>,
    cells: Vec<CorrelationCell<T>>,
    pub trials: u64,
    pub lost: u64,
}

impl<T: Real> CorrelationTable<T> {
    pub fn cell(&self, encoding: usize, setting: usize) -> &CorrelationCell<T> {
        &self.cells[encoding * self.settings.len() + setting]
    }

    pub fn detected(&self) -> u64 {
        self.trials - self.lost
    }

    /// Detected fraction; 1 when no trials were sampled.
    pub fn coincidence_rate(&self) -> f64 {
        if self.trials == 0 {
            1.0
        } else {
            self.detected() as f64 / self.trials as f64
        }
    }
}

/// Exact table over every encoding of `strategy` and every setting.
pub fn correlation_table<T: Real>(
    strategy: &AliceStrategy<T>,
    settings: &[BobSetting<T>],
) -> Result<CorrelationTable<T>, BellError> {
    if settings.is_empty() {
        return Err(BellError::NoSettings);
    }
    let mut cells = Vec::with_capacity(strategy.encodings.len() * settings.len());
    for psi in &strategy.encodings {
        let run = TeleportRun::new(psi)?;
        for s in settings {
            cells.push(CorrelationCell {
                probability: joint_from_run(&run, s),
                counts: [[0; 2]; 4],
            });
        }
    }
    Ok(CorrelationTable {
        encodings: strategy.encodings.clone(),
        settings: settings.to_vec(),
        cells,
        trials: 0,
        lost: 0,
    })
}

/// Exact joint distribution for a single Bob setting.
pub fn joint_distribution<T: Real>(
    strategy: &AliceStrategy<T>,
    setting: &BobSetting<T>,
) -> Result<CorrelationTable<T>, BellError> {
    correlation_table(strategy, std::slice::from_ref(setting))
}

/// Exact table plus `n` sampled trials. Per trial: encoding draw (by weight),
/// setting draw (uniform), joint Born draw, loss coin on Alice's detectors.
/// The loss coin is the last draw, so runs sharing a seed detect nested sets
/// of trials as `eta` grows.
pub fn sample_correlations<T: Real>(
    strategy: &AliceStrategy<T>,
    settings: &[BobSetting<T>],
    det: &DetectorModel,
    n: u64,
    seed: u64,
) -> Result<CorrelationTable<T>, BellError> {
    if n == 0 {
        return Err(McError::NoTrials.into());
    }
    let mut table = correlation_table(strategy, settings)?;
    let weights: Vec<f64> = strategy.weights.iter().map(|w| w.as_f64()).collect();
    let ns = settings.len();
    let flat: Vec<Vec<f64>> = table
        .cells
        .iter()
        .map(|c| c.probability.iter().flatten().map(|p| p.as_f64()).collect())
        .collect();
    for f in &flat {
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > T::CHECK_EPS {
            return Err(McError::ProbabilitySum(sum).into());
        }
    }
    let events: Vec<Option<(usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|trial| {
            let mut rng = RandomStream::new(seed, trial);
            let e = sample_index(&weights, rng.uniform()).unwrap_or(weights.len() - 1);
            let s = ((rng.uniform() * ns as f64) as usize).min(ns - 1);
            let cell = e * ns + s;
            let outcome = sample_index(&flat[cell], rng.uniform());
            let detected = det.detects(&mut rng);
            outcome.filter(|_| detected).map(|o| (cell, o))
        })
        .collect();
    table.trials = n;
    for ev in events {
        match ev {
            Some((cell, o)) => table.cells[cell].counts[o / 2][o % 2] += 1,
            None => table.lost += 1,
        }
    }
    Ok(table)
}

/// Two encodings, each with its own binning, against two Bob settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshConfig<T: Real> {
    pub encodings: [JonesVector<T>; 2],
    pub settings: [BobSetting<T>; 2],
    pub binnings: [Binning; 2],
}

impl<T: Real> ChshConfig<T> {
    /// Both encodings read out with the same binning.
    pub fn shared(
        encodings: [JonesVector<T>; 2],
        settings: [BobSetting<T>; 2],
        binning: Binning,
    ) -> Self {
        Self {
            encodings,
            settings,
            binnings: [binning; 2],
        }
    }
}

/// `S = E(0,0) + E(0,1) + E(1,0) - E(1,1)` over (encoding, setting).
fn chsh_combination<X: Copy + std::ops::Add<Output = X> + std::ops::Sub<Output = X>>(
    e: [[X; 2]; 2],
) -> X {
    e[0][0] + e[0][1] + e[1][0] - e[1][1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshResult<T: Real> {
    pub exact_correlators: [[T; 2]; 2],
    pub exact_s: T,
    /// Post-selected estimates; `None` for a cell without detected trials.
    pub empirical_correlators: [[Option<f64>; 2]; 2],
    pub empirical_s: Option<f64>,
    pub sigma: Option<f64>,
    pub trials: u64,
    pub lost: u64,
}

impl<T: Real> ChshResult<T> {
    pub fn lost_fraction(&self) -> f64 {
        self.lost as f64 / self.trials as f64
    }

    pub fn coincidence_rate(&self) -> f64 {
        1.0 - self.lost_fraction()
    }
}

/// Exact S of a configuration.
pub fn exact_chsh<T: Real>(config: &ChshConfig<T>) -> Result<T, BellError> {
    let strategy = AliceStrategy::uniform(config.encodings.to_vec())?;
    let table = correlation_table(&strategy, &config.settings)?;
    Ok(chsh_combination([0, 1].map(|e| {
        [0, 1].map(|s| table.cell(e, s).correlator(&config.binnings[e]))
    })))
}

/// Exact S and a sampled, post-selected estimate at efficiency `eta`.
pub fn chsh_scan<T: Real>(
    config: &ChshConfig<T>,
    eta: f64,
    n: u64,
    seed: u64,
) -> Result<ChshResult<T>, BellError> {
    let det = DetectorModel::new(eta)?;
    let strategy = AliceStrategy::uniform(config.encodings.to_vec())?;
    let table = sample_correlations(&strategy, &config.settings, &det, n, seed)?;
    let exact = [0, 1].map(|e| [0, 1].map(|s| table.cell(e, s).correlator(&config.binnings[e])));
    let empirical =
        [0, 1].map(|e| [0, 1].map(|s| table.cell(e, s).empirical_correlator(&config.binnings[e])));
    let all: Option<Vec<(f64, f64)>> = empirical.iter().flatten().copied().collect();
    let (empirical_s, sigma) = match all {
        Some(v) => (
            Some(chsh_combination([[v[0].0, v[1].0], [v[2].0, v[3].0]])),
            Some(v.iter().map(|(_, s)| s * s).sum::<f64>().sqrt()),
        ),
        None => (None, None),
    };
    Ok(ChshResult {
        exact_correlators: exact,
        exact_s: chsh_combination(exact),
        empirical_correlators: empirical.map(|r| r.map(|c| c.map(|(e, _)| e))),
        empirical_s,
        sigma,
        trials: table.trials,
        lost: table.lost,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyRow {
    pub eta: f64,
    pub exact_s: f64,
    pub empirical_s: Option<f64>,
    pub sigma: Option<f64>,
    pub coincidence_rate: f64,
    pub trials: u64,
    pub detected: u64,
}

/// One [`chsh_scan`] per efficiency, all with the same seed.
pub fn efficiency_report<T: Real>(
    config: &ChshConfig<T>,
    etas: &[f64],
    n: u64,
    seed: u64,
) -> Result<Vec<EfficiencyRow>, BellError> {
    if etas.is_empty() {
        return Err(BellError::EmptyGrid);
    }
    etas.iter()
        .map(|&eta| {
            let r = chsh_scan(config, eta, n, seed)?;
            Ok(EfficiencyRow {
                eta,
                exact_s: r.exact_s.as_f64(),
                empirical_s: r.empirical_s,
                sigma: r.sigma,
                coincidence_rate: r.coincidence_rate(),
                trials: r.trials,
                detected: r.trials - r.lost,
            })
        })
        .collect()
}

/// Alice's effective observable for an (encoding, binning) choice, as a Bloch
/// vector `a` with `E(n) = a . n` for Bob's observable `n . sigma`.
fn alice_vector<T: Real>(run: &TeleportRun<T>, binning: &Binning) -> [T; 3] {
    let half_pi = T::FRAC_PI_2();
    let axes = [
        BobSetting {
            theta: half_pi,
            phi: T::zero(),
        },
        BobSetting {
            theta: half_pi,
            phi: half_pi,
        },
        BobSetting {
            theta: T::zero(),
            phi: T::zero(),
        },
    ];
    axes.map(|s| {
        CorrelationCell {
            probability: joint_from_run(run, &s),
            counts: [[0; 2]; 4],
        }
        .correlator(binning)
    })
}

fn norm3<T: Real>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult<T: Real> {
    pub config: ChshConfig<T>,
    /// Exact S recomputed from the joint state at `config`.
    pub exact_s: T,
}

/// Best CHSH configuration over a grid of encodings (`steps` polar angles in
/// `[0, pi]` times `steps` azimuths in `[0, 2pi)`) and binnings. For each pair
/// of Alice choices the optimal Bob settings are closed-form. With `shared`,
/// both encodings must use the same binning.
pub fn grid_search<T: Real>(steps: usize, shared: bool) -> Result<GridSearchResult<T>, BellError> {
    let steps = steps.max(2);
    let binnings = Binning::all();
    let mut choices = Vec::new();
    for i in 0..steps {
        let theta = T::PI() * T::of(i as f64 / (steps - 1) as f64);
        for j in 0..steps {
            let phi = T::TAU() * T::of(j as f64 / steps as f64);
            let psi = JonesVector::from_bloch(theta, phi);
            let run = TeleportRun::new(&psi)?;
            for b in &binnings {
                choices.push((psi, *b, alice_vector(&run, b)));
            }
        }
    }
    let mut best: Option<(T, usize, usize)> = None;
    for (i, c1) in choices.iter().enumerate() {
        for (j, c2) in choices.iter().enumerate() {
            if shared && c1.1 != c2.1 {
                continue;
            }
            let sum = [0, 1, 2].map(|x| c1.2[x] + c2.2[x]);
            let diff = [0, 1, 2].map(|x| c1.2[x] - c2.2[x]);
            let s = norm3(sum) + norm3(diff);
            if best.is_none_or(|(b, _, _)| s > b) {
                best = Some((s, i, j));
            }
        }
    }
    let (_, i, j) = best.expect("grid is non-empty");
    let (c1, c2) = (&choices[i], &choices[j]);
    let config = ChshConfig {
        encodings: [c1.0, c2.0],
        settings: [
            BobSetting::from_bloch_vector([0, 1, 2].map(|x| c1.2[x] + c2.2[x])),
            BobSetting::from_bloch_vector([0, 1, 2].map(|x| c1.2[x] - c2.2[x])),
        ],
        binnings: [c1.1, c2.1],
    };
    Ok(GridSearchResult {
        exact_s: exact_chsh(&config)?,
        config,
    })
}
