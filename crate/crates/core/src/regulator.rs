//! Phoneme length regulator, duration expansion and their adjoints.
//!
//! With phoneme lengths `L` and cumulative sums `c_0 = 0`,
//! `c_t = L_1 + ... + L_t`, aggregation sums the IPA rows of each segment:
//! `Y_i = X_{c_{i-1}+1} + ... + X_{c_i}`. Expansion repeats row `i` of a
//! phoneme-level matrix `d_i` times. Both maps are linear, so their backward
//! passes are the transposes: aggregation back-propagates by broadcasting,
//! expansion by segment sums. Stop-gradient and gradient reversal are the
//! identity going forward; backward they are zero and `-lambda` times the
//! upstream gradient.

use alloc::vec::Vec;

use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegulatorError {
    #[error("length mismatch: expected {expected} rows, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dim mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("phoneme length at index {index} is zero")]
    ZeroLength { index: usize },
    #[error("gradient reversal scale must be a positive finite number, got {0}")]
    BadLambda(f64),
}

impl RegulatorError {
    pub fn code(&self) -> &'static str {
        match self {
            RegulatorError::LengthMismatch { .. } | RegulatorError::DimMismatch { .. } => {
                "LengthMismatch"
            }
            RegulatorError::ZeroLength { .. } => "ZeroLength",
            RegulatorError::BadLambda(_) => "BadLambda",
        }
    }
}

/// Number of IPA symbols per language-dependent phoneme. Every entry is at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct LengthSequence(Vec<usize>);

impl LengthSequence {
    pub fn new(lengths: Vec<usize>) -> Result<Self, RegulatorError> {
        if let Some(index) = lengths.iter().position(|&l| l == 0) {
            return Err(RegulatorError::ZeroLength { index });
        }
        Ok(Self(lengths))
    }

    pub fn ones(n: usize) -> Self {
        Self(alloc::vec![1; n])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Frames per phoneme. Zero is allowed: an aligner may give a phoneme no frames.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct DurationSequence(Vec<usize>);

impl DurationSequence {
    pub fn new(durations: Vec<usize>) -> Self {
        Self(durations)
    }

    pub fn ones(n: usize) -> Self {
        Self(alloc::vec![1; n])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl From<Vec<usize>> for DurationSequence {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// `c[0] = 0`, `c[t] = L_1 + ... + L_t`; `T_L + 1` entries.
pub fn cumulative_lengths(lengths: &LengthSequence) -> Vec<usize> {
    let mut c = Vec::with_capacity(lengths.len() + 1);
    c.push(0);
    let mut acc = 0;
    for &l in lengths.as_slice() {
        acc += l;
        c.push(acc);
    }
    c
}

fn segment_sums(x: &Matrix, bounds: &[usize]) -> Matrix {
    let mut y = Matrix::zeros(bounds.len() - 1, x.dim());
    for (i, w) in bounds.windows(2).enumerate() {
        let dst = y.row_mut(i);
        for k in w[0]..w[1] {
            for (d, v) in dst.iter_mut().zip(x.row(k)) {
                *d += v;
            }
        }
    }
    y
}

fn repeat_rows(y: &Matrix, counts: &[usize]) -> Matrix {
    let total: usize = counts.iter().sum();
    let mut values = Vec::with_capacity(total * y.dim());
    for (i, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            values.extend_from_slice(y.row(i));
        }
    }
    Matrix::from_raw(total, y.dim(), values)
}

/// Sums the IPA embeddings of each language-dependent phoneme.
///
/// `x` has one row per IPA symbol; the result has one row per phoneme.
pub fn aggregate(x: &Matrix, lengths: &LengthSequence) -> Result<Matrix, RegulatorError> {
    let total = lengths.total();
    if x.rows() != total {
        return Err(RegulatorError::LengthMismatch {
            expected: total,
            got: x.rows(),
        });
    }
    Ok(segment_sums(x, &cumulative_lengths(lengths)))
}

/// Repeats row `i` of `y` `d_i` times.
pub fn expand(y: &Matrix, durations: &DurationSequence) -> Result<Matrix, RegulatorError> {
    if y.rows() != durations.len() {
        return Err(RegulatorError::LengthMismatch {
            expected: durations.len(),
            got: y.rows(),
        });
    }
    Ok(repeat_rows(y, durations.as_slice()))
}

/// The four linear edges whose backward passes are exposed.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearOpTag {
    Aggregate(LengthSequence),
    Expand(DurationSequence),
    StopGrad,
    GradReversal { lambda: f64 },
}

impl LinearOpTag {
    pub fn grad_reversal(lambda: f64) -> Result<Self, RegulatorError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(RegulatorError::BadLambda(lambda));
        }
        Ok(LinearOpTag::GradReversal { lambda })
    }

    /// Rows the forward input must have, if the op constrains it.
    fn input_rows(&self) -> Option<usize> {
        match self {
            LinearOpTag::Aggregate(l) => Some(l.total()),
            LinearOpTag::Expand(d) => Some(d.len()),
            _ => None,
        }
    }

    /// Rows of the forward output for a given input row count.
    fn output_rows(&self, input_rows: usize) -> usize {
        match self {
            LinearOpTag::Aggregate(l) => l.len(),
            LinearOpTag::Expand(d) => d.total(),
            _ => input_rows,
        }
    }
}

/// Forward pass of a tagged op. Stop-gradient and gradient reversal are the identity.
pub fn linear_forward(tag: &LinearOpTag, x: &Matrix) -> Result<Matrix, RegulatorError> {
    match tag {
        LinearOpTag::Aggregate(l) => aggregate(x, l),
        LinearOpTag::Expand(d) => expand(x, d),
        LinearOpTag::StopGrad => Ok(x.clone()),
        LinearOpTag::GradReversal { lambda } => {
            if !(lambda.is_finite() && *lambda > 0.0) {
                return Err(RegulatorError::BadLambda(*lambda));
            }
            Ok(x.clone())
        }
    }
}

/// Gradient with respect to the forward input, given the gradient `upstream`
/// with respect to the forward output.
pub fn linear_backward(tag: &LinearOpTag, upstream: &Matrix) -> Result<Matrix, RegulatorError> {
    let in_rows = tag.input_rows();
    let expected_up = in_rows.map(|r| tag.output_rows(r));
    if let Some(expected) = expected_up {
        if upstream.rows() != expected {
            return Err(RegulatorError::LengthMismatch {
                expected,
                got: upstream.rows(),
            });
        }
    }
    match tag {
        LinearOpTag::Aggregate(l) => Ok(repeat_rows(upstream, l.as_slice())),
        LinearOpTag::Expand(d) => {
            let mut bounds = Vec::with_capacity(d.len() + 1);
            bounds.push(0);
            let mut acc = 0;
            for &n in d.as_slice() {
                acc += n;
                bounds.push(acc);
            }
            Ok(segment_sums(upstream, &bounds))
        }
        LinearOpTag::StopGrad => Ok(Matrix::zeros(upstream.rows(), upstream.dim())),
        LinearOpTag::GradReversal { lambda } => {
            if !(lambda.is_finite() && *lambda > 0.0) {
                return Err(RegulatorError::BadLambda(*lambda));
            }
            Ok(upstream.scaled(-lambda))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lens(v: &[usize]) -> LengthSequence {
        LengthSequence::new(v.to_vec()).unwrap()
    }

    fn m(rows: usize, dim: usize, v: &[f64]) -> Matrix {
        Matrix::new(rows, dim, v.to_vec()).unwrap()
    }

    #[test]
    fn cumulative_lengths_examples() {
        assert_eq!(cumulative_lengths(&lens(&[])), vec![0]);
        assert_eq!(cumulative_lengths(&lens(&[2, 1, 3])), vec![0, 2, 3, 6]);
        assert_eq!(cumulative_lengths(&LengthSequence::ones(4)), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_length_rejected() {
        assert_eq!(
            LengthSequence::new(vec![1, 0, 2]),
            Err(RegulatorError::ZeroLength { index: 1 })
        );
    }

    #[test]
    fn aggregate_basis_rows() {
        let x = Matrix::from_fn(6, 6, |r, c| if r == c { 1.0 } else { 0.0 });
        let y = aggregate(&x, &lens(&[2, 1, 3])).unwrap();
        assert_eq!(y.shape(), (3, 6));
        assert_eq!(y.row(0), &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(y.row(1), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(y.row(2), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn aggregate_ones_is_identity() {
        let x = Matrix::from_fn(5, 3, |r, c| (r * 3 + c) as f64 * 0.37 - 1.0);
        assert_eq!(aggregate(&x, &LengthSequence::ones(5)).unwrap(), x);
    }

    #[test]
    fn aggregate_length_mismatch() {
        let x = Matrix::zeros(4, 2);
        assert_eq!(
            aggregate(&x, &lens(&[2, 1])),
            Err(RegulatorError::LengthMismatch { expected: 3, got: 4 })
        );
    }

    #[test]
    fn expand_examples() {
        let y = m(3, 2, &[1.0, 1.5, 2.0, 2.5, 3.0, 3.5]);
        let f = expand(&y, &DurationSequence::new(vec![2, 0, 3])).unwrap();
        assert_eq!(f.shape(), (5, 2));
        assert_eq!(
            f.as_slice(),
            &[1.0, 1.5, 1.0, 1.5, 3.0, 3.5, 3.0, 3.5, 3.0, 3.5]
        );
        assert_eq!(expand(&y, &DurationSequence::ones(3)).unwrap(), y);
        assert_eq!(expand(&y, &DurationSequence::new(vec![0, 0, 0])).unwrap().rows(), 0);
        assert!(matches!(
            expand(&y, &DurationSequence::ones(2)),
            Err(RegulatorError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn stop_grad_and_reversal() {
        let g = m(2, 2, &[1.0, -2.0, 0.25, 4.0]);
        let z = linear_backward(&LinearOpTag::StopGrad, &g).unwrap();
        assert_eq!(z, Matrix::zeros(2, 2));
        let r = linear_backward(&LinearOpTag::grad_reversal(0.5).unwrap(), &g).unwrap();
        assert_eq!(r.as_slice(), &[-0.5, 1.0, -0.125, -2.0]);
        assert_eq!(linear_forward(&LinearOpTag::StopGrad, &g).unwrap(), g);
        assert_eq!(
            linear_forward(&LinearOpTag::grad_reversal(2.0).unwrap(), &g).unwrap(),
            g
        );
        assert_eq!(LinearOpTag::grad_reversal(0.0), Err(RegulatorError::BadLambda(0.0)));
        assert!(LinearOpTag::grad_reversal(f64::NAN).is_err());
    }

    #[test]
    fn aggregate_backward_broadcasts() {
        let up = m(2, 1, &[3.0, 5.0]);
        let g = linear_backward(&LinearOpTag::Aggregate(lens(&[2, 1])), &up).unwrap();
        assert_eq!(g.as_slice(), &[3.0, 3.0, 5.0]);
    }

    #[test]
    fn expand_backward_sums_segments() {
        let up = m(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let tag = LinearOpTag::Expand(DurationSequence::new(vec![2, 0, 3]));
        let g = linear_backward(&tag, &up).unwrap();
        assert_eq!(g.as_slice(), &[3.0, 0.0, 12.0]);
    }

    #[test]
    fn backward_shape_mismatch() {
        let up = m(3, 1, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            linear_backward(&LinearOpTag::Aggregate(lens(&[2, 1])), &up),
            Err(RegulatorError::LengthMismatch { expected: 2, got: 3 })
        ));
        assert!(matches!(
            linear_backward(&LinearOpTag::Expand(DurationSequence::new(vec![1, 1])), &up),
            Err(RegulatorError::LengthMismatch { expected: 2, got: 3 })
        ));
    }
}
