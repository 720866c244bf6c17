//! Block single-measurement-vector representation of the MMV fault model.
//!
//! The MMV model `Y = Φ X + V` (with `Y` of size M×L and `X` of size N×L)
//! is rewritten as `y = D x + v` where `y = Vec(Yᵀ)`, `x = Vec(Xᵀ)` and
//! `D = Φ ⊗ I_L`. Row `i` of `X` becomes the contiguous block
//! `x[(i-1)L .. iL]`. `D` is never materialized: every product with it goes
//! through the identity `(Φ ⊗ I_L) Vec(Xᵀ) = Vec((Φ X)ᵀ)`.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Contiguous block layout of a length `N·L` vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    num_blocks: usize,
    block_len: usize,
}

impl BlockLayout {
    pub fn new(num_blocks: usize, block_len: usize) -> Result<Self> {
        if num_blocks == 0 || block_len == 0 {
            return Err(Error::InvalidProblem(format!(
                "block layout needs N >= 1 and L >= 1, got N = {num_blocks}, L = {block_len}"
            )));
        }
        Ok(Self {
            num_blocks,
            block_len,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Length `N·L` of a vector laid out with this layout.
    pub fn total_len(&self) -> usize {
        self.num_blocks * self.block_len
    }

    /// Zero-based index range of block `block` (zero-based).
    pub fn range(&self, block: usize) -> std::ops::Range<usize> {
        let start = block * self.block_len;
        start..start + self.block_len
    }

    fn check_len(&self, context: &'static str, len: usize) -> Result<()> {
        if len != self.total_len() {
            return Err(Error::Dimension {
                context,
                expected: self.total_len(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// One recovery instance: fault-pattern matrix `Φ` and stacked measurements `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseProblem {
    phi: DMatrix<f64>,
    y_stacked: DVector<f64>,
    num_samples: usize,
}

impl BlockSparseProblem {
    pub fn new(phi: DMatrix<f64>, y_stacked: DVector<f64>, num_samples: usize) -> Result<Self> {
        let (m, n) = phi.shape();
        if m == 0 || n == 0 || num_samples == 0 {
            return Err(Error::InvalidProblem(format!(
                "M, N and L must be >= 1, got M = {m}, N = {n}, L = {num_samples}"
            )));
        }
        if y_stacked.len() != m * num_samples {
            return Err(Error::Dimension {
                context: "stacked measurements (M·L)",
                expected: m * num_samples,
                actual: y_stacked.len(),
            });
        }
        if let Some(col) = phi.column_iter().position(|c| c.iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidProblem(format!(
                "fault pattern matrix column {} is all zero",
                col + 1
            )));
        }
        if phi.iter().chain(y_stacked.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite entry in Φ or y".into()));
        }
        Ok(Self {
            phi,
            y_stacked,
            num_samples,
        })
    }

    /// Builds a problem from the M×L measurement matrix `Y`.
    pub fn from_measurements(phi: DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if y.nrows() != phi.nrows() {
            return Err(Error::Dimension {
                context: "measurement rows vs Φ rows",
                expected: phi.nrows(),
                actual: y.nrows(),
            });
        }
        let l = y.ncols();
        Self::new(phi, stack_measurements(y), l)
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn y_stacked(&self) -> &DVector<f64> {
        &self.y_stacked
    }

    pub fn num_sensors(&self) -> usize {
        self.phi.nrows()
    }

    pub fn num_errors(&self) -> usize {
        self.phi.ncols()
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout {
            num_blocks: self.num_errors(),
            block_len: self.num_samples,
        }
    }

    /// The measurements as an M×L matrix.
    pub fn measurements(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            self.num_sensors(),
            self.num_samples,
            self.y_stacked.as_slice(),
        )
    }
}

/// Set `P` of blocks suspected to be faulty. Stored zero-based, displayed one-based.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PriorKnowledgeSet {
    indices: BTreeSet<usize>,
}

impl PriorKnowledgeSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a set from one-based block indices, rejecting duplicates and
    /// indices outside `1..=num_blocks`.
    pub fn from_one_based(indices: &[usize], num_blocks: usize) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &i in indices {
            if i == 0 || i > num_blocks {
                return Err(Error::BlockIndex {
                    index: i,
                    max: num_blocks,
                });
            }
            if !set.insert(i - 1) {
                return Err(Error::InvalidProblem(format!(
                    "duplicate prior-knowledge index {i}"
                )));
            }
        }
        Ok(Self { indices: set })
    }

    pub(crate) fn from_zero_based(indices: impl IntoIterator<Item = usize>) -> Self {
        Self {
            indices: indices.into_iter().collect(),
        }
    }

    pub fn contains_zero_based(&self, block: usize) -> bool {
        self.indices.contains(&block)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter_zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    /// Checks every index against the number of blocks of a problem.
    pub fn check_range(&self, num_blocks: usize) -> Result<()> {
        match self.indices.iter().next_back() {
            Some(&max) if max >= num_blocks => Err(Error::BlockIndex {
                index: max + 1,
                max: num_blocks,
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PriorKnowledgeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// `Vec(Yᵀ)`: row `i` of `Y` becomes block `i` of the output.
pub fn stack_measurements(y: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(y.transpose().as_slice())
}

/// Stacks `Y` after checking it against a declared `M×L` shape.
pub fn stack_measurements_checked(y: &DMatrix<f64>, m: usize, l: usize) -> Result<DVector<f64>> {
    if y.nrows() != m {
        return Err(Error::Dimension {
            context: "measurement rows (M)",
            expected: m,
            actual: y.nrows(),
        });
    }
    if y.ncols() != l {
        return Err(Error::Dimension {
            context: "measurement columns (L)",
            expected: l,
            actual: y.ncols(),
        });
    }
    Ok(stack_measurements(y))
}

/// Inverse of [`stack_measurements`].
pub fn unstack(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::Dimension {
            context: "unstack",
            expected: rows * cols,
            actual: v.len(),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, v.as_slice()))
}

fn check_phi(phi: &DMatrix<f64>, layout: &BlockLayout) -> Result<()> {
    if phi.ncols() != layout.num_blocks() {
        return Err(Error::Dimension {
            context: "Φ columns vs number of blocks",
            expected: layout.num_blocks(),
            actual: phi.ncols(),
        });
    }
    Ok(())
}

/// `D x` with `D = Φ ⊗ I_L`, computed as `Vec((Φ X)ᵀ)`.
pub fn apply_design(
    phi: &DMatrix<f64>,
    x: &DVector<f64>,
    layout: &BlockLayout,
) -> Result<DVector<f64>> {
    check_phi(phi, layout)?;
    layout.check_len("apply_design input (N·L)", x.len())?;
    let x_mat = unstack(x, layout.num_blocks(), layout.block_len())?;
    Ok(stack_measurements(&(phi * x_mat)))
}

/// `Dᵀ r` with `D = Φ ⊗ I_L`, computed as `Vec((Φᵀ R)ᵀ)`.
pub fn apply_design_transpose(
    phi: &DMatrix<f64>,
    r: &DVector<f64>,
    layout: &BlockLayout,
) -> Result<DVector<f64>> {
    check_phi(phi, layout)?;
    let expected = phi.nrows() * layout.block_len();
    if r.len() != expected {
        return Err(Error::Dimension {
            context: "apply_design_transpose input (M·L)",
            expected,
            actual: r.len(),
        });
    }
    let r_mat = unstack(r, phi.nrows(), layout.block_len())?;
    Ok(stack_measurements(&phi.tr_mul(&r_mat)))
}

/// Block `block` (one-based) of `v`.
pub fn extract_block(v: &DVector<f64>, block: usize, layout: &BlockLayout) -> Result<DVector<f64>> {
    layout.check_len("extract_block input (N·L)", v.len())?;
    if block == 0 || block > layout.num_blocks() {
        return Err(Error::BlockIndex {
            index: block,
            max: layout.num_blocks(),
        });
    }
    Ok(v.rows_range(layout.range(block - 1)).into_owned())
}

/// Per-block arithmetic mean: the mean-deviation estimate of each process error.
pub fn row_means(mu_x: &DVector<f64>, layout: &BlockLayout) -> Result<DVector<f64>> {
    layout.check_len("row_means input (N·L)", mu_x.len())?;
    let l = layout.block_len() as f64;
    Ok(DVector::from_iterator(
        layout.num_blocks(),
        (0..layout.num_blocks()).map(|i| mu_x.rows_range(layout.range(i)).sum() / l),
    ))
}

/// Largest absolute normalized inner product between two distinct columns.
///
/// Returns 0 for a single-column matrix.
pub fn mutual_coherence(phi: &DMatrix<f64>) -> f64 {
    let norms: Vec<f64> = phi.column_iter().map(|c| c.norm()).collect();
    let mut best: f64 = 0.0;
    for i in 0..phi.ncols() {
        for j in (i + 1)..phi.ncols() {
            let denom = norms[i] * norms[j];
            if denom > 0.0 {
                best = best.max((phi.column(i).dot(&phi.column(j)) / denom).abs());
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout(n: usize, l: usize) -> BlockLayout {
        BlockLayout::new(n, l).unwrap()
    }

    #[test]
    fn stacking_is_row_major() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(stack_measurements(&y).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let z = DMatrix::<f64>::zeros(3, 5);
        assert_eq!(stack_measurements(&z), DVector::zeros(15));
        assert!(stack_measurements_checked(&z, 3, 4).is_err());
        assert!(stack_measurements_checked(&z, 2, 5).is_err());
    }

    #[test]
    fn design_on_hand_examples() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let x = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5, 7.0, 9.0]);
        assert_eq!(apply_design(&eye, &x, &layout(2, 3)).unwrap(), x);
        assert_eq!(apply_design_transpose(&eye, &x, &layout(2, 3)).unwrap(), x);

        let phi = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            apply_design(&phi, &x, &layout(2, 2)).unwrap().as_slice(),
            &[4.0, 6.0]
        );
    }

    #[test]
    fn design_rejects_bad_shapes() {
        let phi = DMatrix::<f64>::zeros(3, 4);
        assert!(apply_design(&phi, &DVector::zeros(7), &layout(4, 2)).is_err());
        assert!(apply_design(&phi, &DVector::zeros(8), &layout(3, 2)).is_err());
        assert!(apply_design_transpose(&phi, &DVector::zeros(5), &layout(4, 2)).is_err());
    }

    #[test]
    fn extract_block_examples() {
        let v = DVector::from_iterator(6, (1..=6).map(f64::from));
        assert_eq!(
            extract_block(&v, 2, &layout(3, 2)).unwrap().as_slice(),
            &[3.0, 4.0]
        );
        assert_eq!(
            extract_block(&v, 1, &layout(2, 3)).unwrap().as_slice(),
            &[1.0, 2.0, 3.0]
        );
        assert!(matches!(
            extract_block(&v, 4, &layout(3, 2)),
            Err(Error::BlockIndex { index: 4, max: 3 })
        ));
        assert!(extract_block(&v, 0, &layout(3, 2)).is_err());
    }

    #[test]
    fn row_means_examples() {
        let mu = DVector::from_vec(vec![2.0, 4.0, 0.0, 0.0]);
        assert_eq!(
            row_means(&mu, &layout(2, 2)).unwrap().as_slice(),
            &[3.0, 0.0]
        );
        assert_eq!(
            row_means(&DVector::zeros(6), &layout(3, 2)).unwrap(),
            DVector::zeros(3)
        );
    }

    #[test]
    fn problem_validation() {
        let phi = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let err = BlockSparseProblem::new(phi, DVector::zeros(2), 1).unwrap_err();
        assert!(err.to_string().contains("column 2"));

        let phi = DMatrix::<f64>::identity(2, 3);
        assert!(BlockSparseProblem::new(phi.clone(), DVector::zeros(5), 2).is_err());
        assert!(BlockSparseProblem::new(phi, DVector::zeros(4), 0).is_err());
    }

    #[test]
    fn prior_set_bounds() {
        assert!(PriorKnowledgeSet::from_one_based(&[1, 3], 3).is_ok());
        assert!(PriorKnowledgeSet::from_one_based(&[0], 3).is_err());
        assert!(PriorKnowledgeSet::from_one_based(&[4], 3).is_err());
        assert!(PriorKnowledgeSet::from_one_based(&[2, 2], 3).is_err());
        let p = PriorKnowledgeSet::from_one_based(&[3, 1], 5).unwrap();
        assert_eq!(p.to_string(), "{1, 3}");
        assert!(p.check_range(2).is_err());
    }

    #[test]
    fn coherence_of_repeated_columns_is_one() {
        let phi = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 1.0, 2.0, 1.0]);
        assert!((mutual_coherence(&phi) - 1.0).abs() < 1e-12);
        assert_eq!(mutual_coherence(&DMatrix::<f64>::identity(3, 3)), 0.0);
    }

    proptest! {
        #[test]
        fn stack_unstack_round_trip(
            (m, l, data) in (1usize..8, 1usize..8)
                .prop_flat_map(|(m, l)| (Just(m), Just(l), prop::collection::vec(-1e3f64..1e3, m * l)))
        ) {
            let y = DMatrix::from_vec(m, l, data);
            let back = unstack(&stack_measurements(&y), m, l).unwrap();
            prop_assert_eq!(back, y);
        }

        #[test]
        fn blocks_partition_the_vector(n in 1usize..10, l in 1usize..6) {
            let lay = layout(n, l);
            let v = DVector::from_iterator(n * l, (0..n * l).map(|i| i as f64));
            let joined: Vec<f64> = (1..=n)
                .flat_map(|i| extract_block(&v, i, &lay).unwrap().iter().copied().collect::<Vec<_>>())
                .collect();
            prop_assert_eq!(joined.as_slice(), v.as_slice());
        }
    }
}
