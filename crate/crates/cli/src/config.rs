//! JSON run configuration.

use std::path::PathBuf;

use dampkg::radial::RadialGridSpec;
use dampkg::real::Precision;
use dampkg::ModelParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Constants,
    Interactions,
    Simulate,
    Reduced,
    Shoot,
    Lipschitz,
    SameSign,
    LogLaw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default = "ModelParams::cubic_1d")]
    pub params: ModelParams,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn new(scenario: Scenario, params: ModelParams) -> Self {
        RunConfig { scenario, params, numerics: Numerics::default(), output_dir: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub ground_state: GroundStateNumerics,
    pub interactions: InteractionsNumerics,
    pub simulate: SimulateNumerics,
    pub reduced: ReducedNumerics,
    pub shoot: ShootNumerics,
    pub lipschitz: LipschitzNumerics,
    pub same_sign: SameSignNumerics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateNumerics {
    /// Radial grid; the dimension default when absent.
    pub grid: Option<RadialGridSpec>,
    pub shoot_tol: f64,
    /// Also write `profile.csv` and `eigenfunction.csv`.
    pub dump_profiles: bool,
}

impl Default for GroundStateNumerics {
    fn default() -> Self {
        GroundStateNumerics { grid: None, shoot_tol: dampkg::soliton::DEFAULT_SHOOT_TOL, dump_profiles: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionsNumerics {
    pub r_min: f64,
    pub r_max: f64,
    pub r_step: f64,
    /// Line spacing for the pair integrals.
    pub h: f64,
}

impl Default for InteractionsNumerics {
    fn default() -> Self {
        InteractionsNumerics { r_min: 8.0, r_max: 16.0, r_step: 2.0, h: 0.02 }
    }
}

/// Initial data of a `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    PlainPair { sigma: [f64; 2], z: [f64; 2], #[serde(default)] ell: [f64; 2] },
    ShootingPair { l: f64, #[serde(default)] h: [f64; 2] },
    Manifold {
        sigma: [f64; 2],
        z: [f64; 2],
        #[serde(default)]
        ell: [f64; 2],
        #[serde(default)]
        a_plus: [f64; 2],
    },
    Single { #[serde(default = "one")] sigma: f64, #[serde(default)] z: f64, #[serde(default)] ell: f64 },
}

fn one() -> f64 {
    1.0
}

/// Random smooth perturbation drawn from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    /// Energy norm of the perturbation.
    pub size: f64,
    #[serde(default = "default_bumps")]
    pub bumps: usize,
}

fn default_bumps() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateNumerics {
    pub half_width: f64,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Output interval of `timeseries.csv`.
    pub cadence: f64,
    pub initial: InitialData,
    pub perturbation: Option<PerturbationConfig>,
    /// Append modulation columns.
    pub modulation: bool,
    /// Times of `state_<t>.csv` snapshots.
    pub snapshots: Vec<f64>,
}

impl Default for SimulateNumerics {
    fn default() -> Self {
        SimulateNumerics {
            half_width: 30.0,
            h: 0.02,
            dt: 0.01,
            t_end: 10.0,
            cadence: 0.05,
            initial: InitialData::Single { sigma: 1.0, z: 0.0, ell: 0.0 },
            perturbation: None,
            modulation: false,
            snapshots: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GModeConfig {
    Asymptotic,
    Tabulated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReducedNumerics {
    pub sigma: f64,
    /// Initial positions; `±r0/2` on the first axis when absent.
    pub z1: Option<Vec<f64>>,
    pub z2: Option<Vec<f64>>,
    pub r0: f64,
    pub ell1: Option<Vec<f64>>,
    pub ell2: Option<Vec<f64>>,
    pub a_plus: [f64; 2],
    pub a_minus: [f64; 2],
    pub t_end: f64,
    pub rtol: f64,
    pub g_mode: GModeConfig,
    pub samples_per_decade: usize,
}

impl Default for ReducedNumerics {
    fn default() -> Self {
        ReducedNumerics {
            sigma: -1.0,
            z1: None,
            z2: None,
            r0: 10.0,
            ell1: None,
            ell2: None,
            a_plus: [0.0; 2],
            a_minus: [0.0; 2],
            t_end: 1e6,
            rtol: 1e-10,
            g_mode: GModeConfig::Asymptotic,
            samples_per_decade: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootNumerics {
    pub l: f64,
    pub delta: f64,
    pub precision: Precision,
    pub t_accept: Option<f64>,
    pub tol: Option<f64>,
    pub search_radius: Option<f64>,
    pub b_exit: Option<f64>,
    pub separation_gate: f64,
    pub half_width: f64,
    pub h: f64,
    pub dt: f64,
    pub perturbation: Option<PerturbationConfig>,
    /// Also classify the offsets `H ± (offset, 0)` and `H ± (0, offset)`.
    pub offset_check: Option<f64>,
}

impl Default for ShootNumerics {
    fn default() -> Self {
        ShootNumerics {
            l: 12.0,
            delta: 1e-2,
            precision: Precision::DoubleDouble,
            t_accept: None,
            tol: None,
            search_radius: None,
            b_exit: None,
            separation_gate: 8.0,
            half_width: 26.0,
            h: 0.025,
            dt: 0.0125,
            perturbation: None,
            offset_check: Some(1e-3),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LipschitzNumerics {
    pub l: f64,
    pub deltas: Vec<f64>,
    pub random_directions: usize,
    pub t_accept: f64,
    pub tol: f64,
    /// Wider than the shooting default so that the shifted `L` keeps the
    /// boundary padding.
    pub half_width: f64,
}

impl Default for LipschitzNumerics {
    fn default() -> Self {
        LipschitzNumerics {
            l: 12.0,
            deltas: vec![1e-2, 1e-3],
            random_directions: 3,
            t_accept: 20.0,
            tol: 1e-12,
            half_width: 27.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SameSignNumerics {
    /// Reduced-flow initial distances.
    pub r0: Vec<f64>,
    pub t_end: f64,
    pub rtol: f64,
    /// Initial distance of the PDE run.
    pub l: f64,
    pub half_width: f64,
    pub h: f64,
    pub dt: f64,
    pub t_max: f64,
    pub cadence: f64,
}

impl Default for SameSignNumerics {
    fn default() -> Self {
        SameSignNumerics {
            r0: vec![8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0],
            t_end: 1e8,
            rtol: 1e-10,
            l: 10.0,
            half_width: 30.0,
            h: 0.02,
            dt: 0.01,
            t_max: 200.0,
            cadence: 0.05,
        }
    }
}

/// A batch of runs for `sweep`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub runs: Vec<RunConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}
