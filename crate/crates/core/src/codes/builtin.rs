use super::ParityCheckMatrix;

/// Hamming(7,4) in systematic form `[P | I_3]`.
pub fn hamming74() -> ParityCheckMatrix {
    ParityCheckMatrix::from_rows(vec![
        vec![1, 1, 0, 1, 1, 0, 0],
        vec![1, 0, 1, 1, 0, 1, 0],
        vec![0, 1, 1, 1, 0, 0, 1],
    ])
    .expect("valid matrix")
}

/// Length-2 repetition code, `H = [1 1]`.
pub fn repetition2() -> ParityCheckMatrix {
    ParityCheckMatrix::from_rows(vec![vec![1, 1]]).expect("valid matrix")
}
