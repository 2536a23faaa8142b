use proptest::prelude::*;
use xling_core::regulator::{
    aggregate, cumulative_lengths, expand, linear_backward, linear_forward, LinearOpTag,
};
use xling_core::{DurationSequence, LengthSequence, Matrix};

/// Segment sums computed one output cell at a time.
fn aggregate_oracle(x: &[Vec<f64>], lengths: &[usize]) -> Vec<Vec<f64>> {
    let dim = x.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    let mut start = 0;
    for &l in lengths {
        let mut row = vec![0.0; dim];
        for (c, cell) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for row in &x[start..start + l] {
                s += row[c];
            }
            *cell = s;
        }
        out.push(row);
        start += l;
    }
    out
}

/// Dense 0/1 matrix `A` with `A[i][j] = 1` when output row i reads input row j.
fn aggregate_dense(lengths: &[usize]) -> Vec<Vec<f64>> {
    let total: usize = lengths.iter().sum();
    let mut a = vec![vec![0.0; total]; lengths.len()];
    let mut j = 0;
    for (i, &l) in lengths.iter().enumerate() {
        for _ in 0..l {
            a[i][j] = 1.0;
            j += 1;
        }
    }
    a
}

fn transpose(a: &[Vec<f64>], cols: usize) -> Vec<Vec<f64>> {
    (0..cols).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn apply(a: &[Vec<f64>], x: &Matrix) -> Vec<f64> {
    let mut out = Vec::new();
    for row in a {
        for c in 0..x.dim() {
            out.push(row.iter().enumerate().map(|(j, w)| w * x.get(j, c)).sum());
        }
    }
    out
}

fn lengths_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=4, 0..=16).prop_filter("T_X <= 64", |l| l.iter().sum::<usize>() <= 64)
}

fn matrix(rows: usize, dim: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0f64..10.0, rows * dim)
        .prop_map(move |v| Matrix::new(rows, dim, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn aggregate_matches_segment_sum_oracle(
        (lengths, x) in (lengths_strategy(), 1usize..=16)
            .prop_flat_map(|(l, d)| { let n = l.iter().sum(); (Just(l), matrix(n, d)) })
    ) {
        let ls = LengthSequence::new(lengths.clone()).unwrap();
        let got = aggregate(&x, &ls).unwrap();
        let rows: Vec<Vec<f64>> = (0..x.rows()).map(|r| x.row(r).to_vec()).collect();
        let want = aggregate_oracle(&rows, &lengths);
        prop_assert_eq!(got.rows(), want.len());
        for (r, w) in want.iter().enumerate() {
            prop_assert_eq!(got.row(r), w.as_slice());
        }
    }

    #[test]
    fn cumulative_lengths_are_boundaries(lengths in lengths_strategy()) {
        let c = cumulative_lengths(&LengthSequence::new(lengths.clone()).unwrap());
        prop_assert_eq!(c.len(), lengths.len() + 1);
        prop_assert_eq!(c[0], 0);
        for i in 0..lengths.len() {
            prop_assert_eq!(c[i + 1] - c[i], lengths[i]);
        }
        prop_assert_eq!(*c.last().unwrap(), lengths.iter().sum::<usize>());
    }

    #[test]
    fn expand_length_law(
        (durations, y) in (prop::collection::vec(0usize..=6, 0..=12), 1usize..=8)
            .prop_flat_map(|(d, dim)| { let n = d.len(); (Just(d), matrix(n, dim)) })
    ) {
        let ds = DurationSequence::new(durations.clone());
        let out = expand(&y, &ds).unwrap();
        prop_assert_eq!(out.rows(), durations.iter().sum::<usize>());
        let mut r = 0;
        for (i, &d) in durations.iter().enumerate() {
            for _ in 0..d {
                prop_assert_eq!(out.row(r), y.row(i));
                r += 1;
            }
        }
    }

    #[test]
    fn aggregate_adjoint_matches_dense_transpose(
        (lengths, x, up) in (lengths_strategy(), 1usize..=8)
            .prop_flat_map(|(l, d)| {
                let n: usize = l.iter().sum();
                let k = l.len();
                (Just(l), matrix(n, d), matrix(k, d))
            })
    ) {
        let ls = LengthSequence::new(lengths.clone()).unwrap();
        let tag = LinearOpTag::Aggregate(ls);
        let a = aggregate_dense(&lengths);
        let fwd = linear_forward(&tag, &x).unwrap();
        prop_assert_eq!(fwd.as_slice().to_vec(), apply(&a, &x));
        let at = transpose(&a, x.rows());
        let back = linear_backward(&tag, &up).unwrap();
        prop_assert_eq!(back.as_slice().to_vec(), apply(&at, &up));
        let lhs = linear_forward(&tag, &x).unwrap().dot(&up);
        let rhs = x.dot(&back);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn expand_adjoint(
        (durations, y, up) in (prop::collection::vec(0usize..=5, 0..=12), 1usize..=8)
            .prop_flat_map(|(d, dim)| {
                let n = d.len();
                let t: usize = d.iter().sum();
                (Just(d), matrix(n, dim), matrix(t, dim))
            })
    ) {
        let tag = LinearOpTag::Expand(DurationSequence::new(durations));
        let lhs = linear_forward(&tag, &y).unwrap().dot(&up);
        let rhs = y.dot(&linear_backward(&tag, &up).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn stop_grad_and_reversal(up in matrix(5, 3), lambda in 1e-3f64..10.0) {
        let zero = linear_backward(&LinearOpTag::StopGrad, &up).unwrap();
        prop_assert!(zero.as_slice().iter().all(|&v| v == 0.0));
        let grl = LinearOpTag::grad_reversal(lambda).unwrap();
        prop_assert_eq!(linear_forward(&grl, &up).unwrap(), up.clone());
        let back = linear_backward(&grl, &up).unwrap();
        for (b, u) in back.as_slice().iter().zip(up.as_slice()) {
            prop_assert_eq!(*b, -lambda * u);
        }
    }
}

#[test]
fn grad_reversal_rejects_non_positive_lambda() {
    assert!(LinearOpTag::grad_reversal(0.0).is_err());
    assert!(LinearOpTag::grad_reversal(-1.0).is_err());
    assert!(LinearOpTag::grad_reversal(f64::NAN).is_err());
}
