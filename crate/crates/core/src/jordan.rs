//! Jordan's lemma for two projectors: a simultaneous decomposition into
//! mutually orthogonal 1-D and 2-D invariant blocks.
//!
//! The pairing is read off the spectrum of `Π₁Π₂Π₁` restricted to
//! `range(Π₁)`: each eigenvector `v` with eigenvalue `c = cos²θ` is paired
//! with `w = Π₂v / ‖Π₂v‖`, so `⟨v|w⟩ = √c ≥ 0` and every angle lies in
//! `[0, π/2]`. Directions of `range(Π₂)` left over after pairing form the
//! `OnlySecond` blocks.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Result};
use crate::operator::{DensityOperator, HermitianOperator, Matrix, Projector, Vector, C64};

/// `‖Π₂v‖` below this means `v` has no partner in `range(Π₂)`.
pub const PAIRING_CUTOFF: f64 = 1e-8;
/// A pair whose sine is below this is treated as a shared direction.
pub const COLLINEAR_CUTOFF: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    Paired2D,
    Paired1D,
    OnlyFirst,
    OnlySecond,
}

#[derive(Clone, Debug)]
pub struct JordanBlock {
    pub kind: BlockKind,
    /// Direction of `Π₁` in the block.
    pub v: Option<Vector>,
    /// Direction of `Π₂` in the block.
    pub w: Option<Vector>,
    /// `cos²θ`; 1 for `Paired1D`, 0 when either vector is absent.
    pub overlap: f64,
}

impl JordanBlock {
    /// `sinθ` of the pair.
    pub fn sine(&self) -> f64 {
        (1.0 - self.overlap).max(0.0).sqrt()
    }

    /// Orthonormal basis of the block subspace.
    pub fn basis(&self) -> Vec<Vector> {
        match self.kind {
            BlockKind::Paired2D => {
                let v = self.v.clone().expect("paired block has v");
                let w = self.w.as_ref().expect("paired block has w");
                // Component of w orthogonal to v.
                let mut u = w - &v * v.dotc(w);
                let norm = u.norm();
                u /= C64::new(norm, 0.0);
                vec![v, u]
            }
            BlockKind::Paired1D | BlockKind::OnlyFirst => vec![self.v.clone().expect("has v")],
            BlockKind::OnlySecond => vec![self.w.clone().expect("has w")],
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            BlockKind::Paired2D => 2,
            _ => 1,
        }
    }

    /// `Tr[Π_α ρ]`.
    pub fn weight(&self, rho: &DensityOperator) -> f64 {
        self.basis().iter().map(|b| rho.op().expectation(b)).sum()
    }
}

#[derive(Clone, Debug)]
pub struct JordanDecomposition {
    pub dim: usize,
    pub blocks: Vec<JordanBlock>,
    /// Dimension of the complement of `range(Π₁) + range(Π₂)`.
    pub residual_dim: usize,
}

impl JordanDecomposition {
    /// Block indices carrying a `Π₁` direction.
    pub fn first_blocks(&self) -> impl Iterator<Item = (usize, &JordanBlock)> {
        self.blocks.iter().enumerate().filter(|(_, b)| b.v.is_some())
    }

    /// `Σ_{α∈labels} |v_α⟩⟨v_α|`.
    pub fn v_projector(&self, labels: &[usize]) -> Projector {
        let cols: Vec<Vector> = labels.iter().filter_map(|&i| self.blocks[i].v.clone()).collect();
        projector_from_vectors(&cols, self.dim)
    }
}

pub(crate) fn projector_from_vectors(cols: &[Vector], dim: usize) -> Projector {
    if cols.is_empty() {
        return Projector::zero(dim);
    }
    Projector::from_orthonormal_columns(&Matrix::from_columns(cols), dim)
}

pub fn jordan_decompose(p1: &Projector, p2: &Projector) -> Result<JordanDecomposition> {
    check_dims(p1.dim(), p2.dim())?;
    let dim = p1.dim();
    let b = p1.range_basis()?;
    let mut blocks = Vec::new();
    let mut w_cols: Vec<Vector> = Vec::new();

    if b.ncols() > 0 {
        let m = HermitianOperator::from_matrix_unchecked(b.adjoint() * p2.matrix() * &b);
        let eig = m.eig()?;
        let vs = &b * &eig.vectors;
        for j in 0..vs.ncols() {
            let v = vs.column(j).into_owned();
            let v = &v / C64::new(v.norm(), 0.0);
            let pv = p2.matrix() * &v;
            let norm = pv.norm();
            if norm <= PAIRING_CUTOFF {
                blocks.push(JordanBlock {
                    kind: BlockKind::OnlyFirst,
                    v: Some(v),
                    w: None,
                    overlap: 0.0,
                });
                continue;
            }
            let w = pv / C64::new(norm, 0.0);
            let sine = (&w - &v * v.dotc(&w)).norm();
            w_cols.push(w.clone());
            if sine <= COLLINEAR_CUTOFF {
                blocks.push(JordanBlock {
                    kind: BlockKind::Paired1D,
                    v: Some(v),
                    w: Some(w),
                    overlap: 1.0,
                });
            } else {
                blocks.push(JordanBlock {
                    kind: BlockKind::Paired2D,
                    v: Some(v),
                    w: Some(w),
                    overlap: (norm * norm).clamp(0.0, 1.0),
                });
            }
        }
    }

    let paired = projector_from_vectors(&w_cols, dim);
    let rest = HermitianOperator::from_matrix_unchecked(p2.matrix() - paired.matrix());
    let rest_basis = rest.eig()?.columns_where(|l| l > 0.5);
    for j in 0..rest_basis.ncols() {
        blocks.push(JordanBlock {
            kind: BlockKind::OnlySecond,
            v: None,
            w: Some(rest_basis.column(j).into_owned()),
            overlap: 0.0,
        });
    }

    let used: usize = blocks.iter().map(|b| b.dim()).sum();
    Ok(JordanDecomposition {
        dim,
        blocks,
        residual_dim: dim.saturating_sub(used),
    })
}

/// `(Σ|v_α⟩⟨v_α|, Σ|w_α⟩⟨w_α|)`.
pub fn reconstruct(dec: &JordanDecomposition) -> (Projector, Projector) {
    let vs: Vec<Vector> = dec.blocks.iter().filter_map(|b| b.v.clone()).collect();
    let ws: Vec<Vector> = dec.blocks.iter().filter_map(|b| b.w.clone()).collect();
    (
        projector_from_vectors(&vs, dec.dim),
        projector_from_vectors(&ws, dec.dim),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockWeight {
    pub kind: BlockKind,
    pub overlap: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapHistogram {
    pub blocks: Vec<BlockWeight>,
    /// `Tr[(I − Σ_α Π_α) ρ]`.
    pub residual_weight: f64,
}

impl OverlapHistogram {
    pub fn total_weight(&self) -> f64 {
        self.blocks.iter().map(|b| b.weight).sum::<f64>() + self.residual_weight
    }

    /// `E[cos²θ]` under `Tr[ρ_α]`, the residual counting as overlap 0.
    pub fn mean_overlap(&self) -> f64 {
        self.blocks.iter().map(|b| b.overlap * b.weight).sum()
    }
}

pub fn overlaps_histogram(dec: &JordanDecomposition, rho: &DensityOperator) -> Result<OverlapHistogram> {
    check_dims(dec.dim, rho.dim())?;
    let blocks: Vec<BlockWeight> = dec
        .blocks
        .iter()
        .map(|b| BlockWeight {
            kind: b.kind,
            overlap: b.overlap,
            weight: b.weight(rho),
        })
        .collect();
    let covered: f64 = blocks.iter().map(|b| b.weight).sum();
    Ok(OverlapHistogram {
        blocks,
        residual_weight: (rho.op().trace() - covered).max(0.0),
    })
}
