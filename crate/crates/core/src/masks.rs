//! Mask matrices and their two complexity metrics.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io;
use crate::matrix::{one_to_two_norm, spectral_norm, SymMatrix};

/// Slack allowed around `[0, 1]` before a custom mask entry is flagged.
const RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Banded,
    AllOnes,
    Tapered,
    Custom,
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MaskKind::Banded => "banded",
            MaskKind::AllOnes => "all_ones",
            MaskKind::Tapered => "tapered",
            MaskKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    matrix: SymMatrix,
    kind: MaskKind,
    bandwidth: Option<usize>,
}

/// `col_norm_sq = ‖M‖₁→₂²` (local complexity) and `spec_norm = ‖M‖` (global).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaskComplexity {
    pub col_norm_sq: f64,
    pub spec_norm: f64,
}

/// A custom-mask entry outside `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeWarning {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl fmt::Display for RangeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mask entry ({}, {}) = {} lies outside [0, 1]",
            self.row, self.col, self.value
        )
    }
}

fn check_bandwidth(p: usize, bandwidth: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::invalid("mask dimension must be positive"));
    }
    if bandwidth.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "bandwidth must be odd, got {bandwidth}"
        )));
    }
    if bandwidth > 2 * p - 1 {
        return Err(Error::invalid(format!(
            "bandwidth {bandwidth} exceeds 2p-1 = {} for p = {p}",
            2 * p - 1
        )));
    }
    Ok(())
}

impl Mask {
    /// 0–1 mask with `mᵢⱼ = 1` iff `|i − j| ≤ (B − 1)/2`.
    pub fn banded(p: usize, bandwidth: usize) -> Result<Self> {
        check_bandwidth(p, bandwidth)?;
        let half = (bandwidth - 1) / 2;
        let matrix = SymMatrix::from_fn(p, |i, j| if i.abs_diff(j) <= half { 1.0 } else { 0.0 })?;
        Ok(Self {
            matrix,
            kind: MaskKind::Banded,
            bandwidth: Some(bandwidth),
        })
    }

    pub fn all_ones(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("mask dimension must be positive"));
        }
        Ok(Self {
            matrix: SymMatrix::ones(p),
            kind: MaskKind::AllOnes,
            bandwidth: None,
        })
    }

    /// Linear taper `mᵢⱼ = max(0, 1 − |i−j| / ((B+1)/2))`. Illustrative only;
    /// the taper shape is a free choice.
    pub fn tapered(p: usize, bandwidth: usize) -> Result<Self> {
        check_bandwidth(p, bandwidth)?;
        let width = bandwidth.div_ceil(2) as f64;
        let matrix = SymMatrix::from_fn(p, |i, j| (1.0 - i.abs_diff(j) as f64 / width).max(0.0))?;
        Ok(Self {
            matrix,
            kind: MaskKind::Tapered,
            bandwidth: Some(bandwidth),
        })
    }

    /// Wraps an arbitrary symmetric matrix. Entries outside `[0, 1]` are
    /// permitted and logged; see [`Mask::range_warnings`].
    pub fn custom(matrix: SymMatrix) -> Self {
        let mask = Self {
            matrix,
            kind: MaskKind::Custom,
            bandwidth: None,
        };
        for w in mask.range_warnings() {
            log::warn!("{w}");
        }
        mask
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn bandwidth(&self) -> Option<usize> {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn range_warnings(&self) -> Vec<RangeWarning> {
        let p = self.dim();
        let mut out = Vec::new();
        for i in 0..p {
            for j in i..p {
                let v = self.matrix.get(i, j);
                if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
                    out.push(RangeWarning {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        out
    }

    /// The same construction at another dimension; custom masks cannot be
    /// regenerated.
    pub fn regenerate(&self, p: usize) -> Result<Self> {
        match (self.kind, self.bandwidth) {
            (MaskKind::Banded, Some(b)) => Self::banded(p, b),
            (MaskKind::Tapered, Some(b)) => Self::tapered(p, b),
            (MaskKind::AllOnes, _) => Self::all_ones(p),
            _ => Err(Error::invalid(format!(
                "a {} mask cannot be regenerated at another dimension",
                self.kind
            ))),
        }
    }

    /// The same kind at another bandwidth (banded and tapered only).
    pub fn with_bandwidth(&self, bandwidth: usize) -> Result<Self> {
        match self.kind {
            MaskKind::Banded => Self::banded(self.dim(), bandwidth),
            MaskKind::Tapered => Self::tapered(self.dim(), bandwidth),
            _ => Err(Error::invalid(format!(
                "a {} mask has no bandwidth",
                self.kind
            ))),
        }
    }
}

pub fn banded_mask(p: usize, bandwidth: usize) -> Result<Mask> {
    Mask::banded(p, bandwidth)
}

pub fn all_ones_mask(p: usize) -> Result<Mask> {
    Mask::all_ones(p)
}

pub fn tapered_mask(p: usize, bandwidth: usize) -> Result<Mask> {
    Mask::tapered(p, bandwidth)
}

pub fn mask_complexity(mask: &Mask) -> Result<MaskComplexity> {
    let col = one_to_two_norm(mask.matrix());
    Ok(MaskComplexity {
        col_norm_sq: col * col,
        spec_norm: spectral_norm(mask.matrix())?,
    })
}

#[derive(Debug, Clone)]
pub struct LoadedMask {
    pub mask: Mask,
    pub warnings: Vec<RangeWarning>,
}

/// Reads a mask in the dense matrix text format, tagged `custom`.
pub fn load_mask(path: impl AsRef<Path>) -> Result<LoadedMask> {
    let matrix = io::read_dense_matrix(path)?;
    let mask = Mask::custom(matrix);
    let warnings = mask.range_warnings();
    Ok(LoadedMask { mask, warnings })
}
