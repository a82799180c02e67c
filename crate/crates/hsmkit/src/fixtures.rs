//! Bundled data sets and model specifications.
//!
//! * `artificial`: eight 2×2 tables over binary variables A, H, I, U, with
//!   counts equal to the published relative frequencies times 100.
//! * `psa_pooled`: twelve 2×2 tables (six attribute pairs × two stimulus
//!   conditions, `death` and `harm`) over Persuasive, Believable, Informative
//!   and Likable, pooled over presentation order, with counts equal to the
//!   published relative frequencies times 2944.
//!
//! Counts are `frequency × N` exactly, so some are fractional and some tables
//! total 99.9 or 100.1 (2941.056 or 2946.944) instead of the nominal size.

use crate::error::Result;
use crate::linalg::Complex;
use crate::model::{HsmModel, ModelSpec};
use crate::quantum::StateVector;
use crate::tables::TableCollection;

pub const ARTIFICIAL_TABLES: &str = include_str!("../data/artificial.json");
pub const PSA_POOLED_TABLES: &str = include_str!("../data/psa_pooled.json");
pub const ARTIFICIAL_MODEL: &str = include_str!("../data/artificial_model.json");
pub const PSA_CONSTRAINED_MODEL: &str = include_str!("../data/psa_constrained_model.json");

/// Nominal observations per table in [`artificial_tables`].
pub const ARTIFICIAL_TABLE_SIZE: f64 = 100.0;
/// Nominal observations per table in [`psa_pooled_tables`].
pub const PSA_TABLE_SIZE: f64 = 2944.0;

fn parse_tables(text: &str) -> TableCollection {
    let c: TableCollection = serde_json::from_str(text).expect("bundled tables parse");
    c.validate().expect("bundled tables are valid");
    c
}

fn parse_model(text: &str) -> HsmModel {
    let spec: ModelSpec = serde_json::from_str(text).expect("bundled model parses");
    HsmModel::new(spec).expect("bundled model is valid")
}

pub fn artificial_tables() -> TableCollection {
    parse_tables(ARTIFICIAL_TABLES)
}

pub fn psa_pooled_tables() -> TableCollection {
    parse_tables(PSA_POOLED_TABLES)
}

/// Two slots (A with H rotated from it, I with U rotated from it), complex
/// state, 12 parameters.
pub fn artificial_model() -> HsmModel {
    parse_model(ARTIFICIAL_MODEL)
}

/// Two slots (B with P rotated from it, I with L rotated from it), real state
/// per condition, shared planar rotations, 8 parameters.
pub fn psa_constrained_model() -> HsmModel {
    parse_model(PSA_CONSTRAINED_MODEL)
}

/// The published parameters for [`artificial_model`]: state magnitudes
/// (.5203, .4189, .2904, .6852) with phases (0, 2.2920, 0.9383, 0.0400), and
/// Hermitian blocks `(−.5911, −.5037, .8862)` and `(−1.2405, −.4334, 1.2976)`.
pub fn artificial_published_params() -> Result<Vec<f64>> {
    let model = artificial_model();
    let psi = published_state()?;
    let state = model.pack_state(&psi)?;
    model.assemble(&[state], &[vec![-0.5911, -0.5037, 0.8862, -1.2405, -0.4334, 1.2976]])
}

fn published_state() -> Result<StateVector> {
    let mags = [0.5203, 0.4189, 0.2904, 0.6852];
    let phases = [0.0, 2.2920, 0.9383, 0.0400];
    let coords: Vec<Complex> = mags.iter().zip(phases).map(|(&r, t)| Complex::from_polar(r, t)).collect();
    StateVector::normalized(coords)
}
