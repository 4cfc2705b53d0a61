//! Experimental design generation: definitive screening, Box-Behnken and
//! central composite designs, plus feed-batch allocation.

mod batches;
mod compare;
mod conference;
mod csv;
mod verify;

pub use batches::allocate_batches;
pub use compare::equivalent_designs;
pub use conference::{conference_matrix, ConferenceMatrix};
pub use verify::{verify_dsd, Check, VerificationReport};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{FactorSpec, ProcessParams, N_PARAMS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DoeError {
    #[error("no conference matrix of order {0} (supported: even orders 2..=16)")]
    UnsupportedOrder(usize),
    #[error("{design} supports {min}..={max} factors, got {got}")]
    UnsupportedFactorCount {
        design: &'static str,
        min: usize,
        max: usize,
        got: usize,
    },
    #[error("design already has batch assignments")]
    AlreadyAllocated,
    #[error("at least one batch is required")]
    NoBatches,
    #[error("design CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowRole {
    Foldover,
    Center,
    Edge,
    Factorial,
    Axial,
}

impl RowRole {
    pub fn as_str(self) -> &'static str {
        match self {
            RowRole::Foldover => "foldover",
            RowRole::Center => "center",
            RowRole::Edge => "edge",
            RowRole::Factorial => "factorial",
            RowRole::Axial => "axial",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "foldover" => RowRole::Foldover,
            "center" => RowRole::Center,
            "edge" => RowRole::Edge,
            "factorial" => RowRole::Factorial,
            "axial" => RowRole::Axial,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    Rotatable,
    FaceCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Dsd,
    BoxBehnken,
    CentralComposite { alpha: f64 },
    Imported,
}

/// One run of a design table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    /// Natural-unit settings, one per factor.
    pub values: Vec<f64>,
    /// Coded settings of the visible factors.
    pub coded: Vec<f64>,
    /// Coded settings of dropped dummy columns (empty when unknown).
    pub dummy_coded: Vec<f64>,
    pub role: RowRole,
    pub batch_id: Option<String>,
    /// Set when a decoded value lies outside its factor range (rotatable CCD axial runs).
    pub out_of_bounds: bool,
}

impl DesignRow {
    /// The row as process parameters, when the design has exactly six factors.
    pub fn params(&self) -> Option<ProcessParams> {
        let x: [f64; N_PARAMS] = self.values.as_slice().try_into().ok()?;
        Some(ProcessParams::from_array(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTable {
    pub factors: Vec<FactorSpec>,
    pub rows: Vec<DesignRow>,
    pub dummy_count: usize,
    pub seed: u64,
    pub kind: DesignKind,
}

impl DesignTable {
    fn from_coded(
        factors: &[FactorSpec],
        coded: Vec<(Vec<f64>, Vec<f64>, RowRole)>,
        dummy_count: usize,
        seed: u64,
        kind: DesignKind,
    ) -> Self {
        let rows = coded
            .into_iter()
            .map(|(c, dummy, role)| {
                let values: Vec<f64> = factors.iter().zip(&c).map(|(f, &v)| f.decode(v)).collect();
                let out_of_bounds = factors.iter().zip(&values).any(|(f, &v)| !f.contains(v));
                DesignRow {
                    values,
                    coded: c,
                    dummy_coded: dummy,
                    role,
                    batch_id: None,
                    out_of_bounds,
                }
            })
            .collect();
        Self {
            factors: factors.to_vec(),
            rows,
            dummy_count,
            seed,
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_allocated(&self) -> bool {
        self.rows.iter().any(|r| r.batch_id.is_some())
    }

    /// Returns a copy with the run order permuted by a seeded shuffle.
    ///
    /// Shuffled tables no longer keep fold-over pairs adjacent.
    pub fn shuffled(&self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        out.rows.shuffle(&mut rng);
        out
    }

    /// Builds a table from natural-unit rows, e.g. a design entered by hand.
    pub fn from_natural(
        factors: &[FactorSpec],
        rows: Vec<(Vec<f64>, RowRole, Option<String>)>,
        dummy_count: usize,
    ) -> Self {
        let rows = rows
            .into_iter()
            .map(|(values, role, batch_id)| {
                let coded = factors.iter().zip(&values).map(|(f, &v)| f.encode(v)).collect();
                let out_of_bounds = factors.iter().zip(&values).any(|(f, &v)| !f.contains(v));
                DesignRow {
                    values,
                    coded,
                    dummy_coded: Vec::new(),
                    role,
                    batch_id,
                    out_of_bounds,
                }
            })
            .collect();
        Self {
            factors: factors.to_vec(),
            rows,
            dummy_count,
            seed: 0,
            kind: DesignKind::Imported,
        }
    }
}

/// Definitive screening design with `n_dummy` virtual factors.
///
/// Rows are the fold-over pairs `(c_i, −c_i)` of the conference matrix of
/// order `factors.len() + n_dummy`, with the dummy (last) columns dropped,
/// followed by `1 + n_extra_center` center runs.
pub fn generate_dsd(
    factors: &[FactorSpec],
    n_dummy: usize,
    n_extra_center: usize,
    seed: u64,
) -> Result<DesignTable, DoeError> {
    let k = factors.len();
    let conference = conference_matrix(k + n_dummy)?;
    let mut coded = Vec::with_capacity(2 * conference.order() + 1 + n_extra_center);
    for row in conference.rows() {
        for sign in [1.0, -1.0] {
            let full: Vec<f64> = row.iter().map(|&v| sign * f64::from(v)).collect();
            let (visible, dummy) = full.split_at(k);
            coded.push((visible.to_vec(), dummy.to_vec(), RowRole::Foldover));
        }
    }
    for _ in 0..=n_extra_center {
        coded.push((vec![0.0; k], vec![0.0; n_dummy], RowRole::Center));
    }
    Ok(DesignTable::from_coded(factors, coded, n_dummy, seed, DesignKind::Dsd))
}

/// Box-Behnken blocks: factor subsets whose members take a full ±1 factorial
/// while the others sit at the center.
fn bbd_blocks(k: usize) -> Vec<Vec<usize>> {
    match k {
        6 => vec![
            vec![0, 1, 3],
            vec![1, 2, 4],
            vec![2, 3, 5],
            vec![0, 3, 4],
            vec![1, 4, 5],
            vec![0, 2, 5],
        ],
        7 => vec![
            vec![3, 4, 5],
            vec![0, 5, 6],
            vec![1, 4, 6],
            vec![0, 1, 3],
            vec![2, 3, 6],
            vec![0, 2, 4],
            vec![1, 2, 5],
        ],
        _ => (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| vec![i, j]))
            .collect(),
    }
}

/// Two-level full factorial in standard order (first factor alternates slowest).
fn factorial_signs(k: usize) -> Vec<Vec<f64>> {
    (0..1usize << k)
        .map(|m| {
            (0..k)
                .map(|i| if m >> (k - 1 - i) & 1 == 1 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

pub fn generate_bbd(factors: &[FactorSpec], n_center: usize) -> Result<DesignTable, DoeError> {
    let k = factors.len();
    if !(3..=7).contains(&k) {
        return Err(DoeError::UnsupportedFactorCount {
            design: "Box-Behnken",
            min: 3,
            max: 7,
            got: k,
        });
    }
    let mut coded = Vec::new();
    for block in bbd_blocks(k) {
        for signs in factorial_signs(block.len()) {
            let mut row = vec![0.0; k];
            for (&i, s) in block.iter().zip(signs) {
                row[i] = s;
            }
            coded.push((row, Vec::new(), RowRole::Edge));
        }
    }
    for _ in 0..n_center {
        coded.push((vec![0.0; k], Vec::new(), RowRole::Center));
    }
    Ok(DesignTable::from_coded(factors, coded, 0, 0, DesignKind::BoxBehnken))
}

/// Axial distance for a `k`-factor central composite design.
pub fn ccd_alpha(k: usize, mode: AlphaMode) -> f64 {
    match mode {
        AlphaMode::Rotatable => ((1u64 << k) as f64).powf(0.25),
        AlphaMode::FaceCentered => 1.0,
    }
}

pub fn generate_ccd(
    factors: &[FactorSpec],
    alpha_mode: AlphaMode,
    n_center: usize,
) -> Result<DesignTable, DoeError> {
    let k = factors.len();
    if !(2..=6).contains(&k) {
        return Err(DoeError::UnsupportedFactorCount {
            design: "central composite",
            min: 2,
            max: 6,
            got: k,
        });
    }
    let alpha = ccd_alpha(k, alpha_mode);
    let mut coded: Vec<_> = factorial_signs(k)
        .into_iter()
        .map(|r| (r, Vec::new(), RowRole::Factorial))
        .collect();
    for i in 0..k {
        for s in [-alpha, alpha] {
            let mut row = vec![0.0; k];
            row[i] = s;
            coded.push((row, Vec::new(), RowRole::Axial));
        }
    }
    for _ in 0..n_center {
        coded.push((vec![0.0; k], Vec::new(), RowRole::Center));
    }
    Ok(DesignTable::from_coded(
        factors,
        coded,
        0,
        0,
        DesignKind::CentralComposite { alpha },
    ))
}
