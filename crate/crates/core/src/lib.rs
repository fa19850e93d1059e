//! Linear-optics simulator for teleporting a polarization qubit through a
//! direction-entangled photon pair.
//!
//! Exact state algebra is generic over [`scalar::Real`] (`f64` or `f32`);
//! the aliases below fix the scalar. Sampling, serialization and the circuit
//! language work in `f64`.

pub mod bell;
pub mod dsl;
pub mod elements;
pub mod jones;
pub mod measurement;
pub mod output;
pub mod protocol;
pub mod scalar;
pub mod state;
pub mod verification;

pub use scalar::Real;

pub type JonesVectorF64 = jones::JonesVector<f64>;
pub type JonesVectorF32 = jones::JonesVector<f32>;
pub type JointStateF64 = state::JointState<f64>;
pub type JointStateF32 = state::JointState<f32>;
pub type PhotonStateF64 = state::PhotonState<f64>;
pub type PhotonStateF32 = state::PhotonState<f32>;
pub type OnePhotonMapF64 = elements::OnePhotonMap<f64>;
pub type OnePhotonMapF32 = elements::OnePhotonMap<f32>;
pub type ElementSpecF64 = elements::ElementSpec<f64>;
pub type ElementSpecF32 = elements::ElementSpec<f32>;
pub type BranchTableF64 = protocol::BranchTable<f64>;
pub type BranchTableF32 = protocol::BranchTable<f32>;
pub type TeleportRunF64 = protocol::TeleportRun<f64>;
pub type TeleportRunF32 = protocol::TeleportRun<f32>;
pub type BobSettingF64 = bell::BobSetting<f64>;
pub type AliceStrategyF64 = bell::AliceStrategy<f64>;
pub type ChshConfigF64 = bell::ChshConfig<f64>;
pub type CorrelationTableF64 = bell::CorrelationTable<f64>;
