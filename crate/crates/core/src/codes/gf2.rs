//! Dense GF(2) elimination helpers.

/// Rank over GF(2).
pub fn gf2_rank(rows: &[Vec<u8>]) -> usize {
    let mut a: Vec<Vec<u8>> = rows.to_vec();
    let n = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..a.len()).find(|&r| a[r][col] == 1) else {
            continue;
        };
        a.swap(rank, p);
        let pivot = a[rank].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != rank && row[col] == 1 {
                xor_into(row, &pivot);
            }
        }
        rank += 1;
        if rank == a.len() {
            break;
        }
    }
    rank
}

fn xor_into(dst: &mut [u8], src: &[u8]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// Reduces a full-rank `m x n` matrix to `[P | I_m]` by row operations and
/// column swaps, preferring to keep columns in place.
///
/// Returns the reduced matrix in permuted coordinates and `perm`, where
/// `perm[p]` is the original column now at position `p`. `None` if the matrix
/// is rank deficient.
pub(crate) fn systematize(rows: &[Vec<u8>], k: usize) -> Option<(Vec<Vec<u8>>, Vec<usize>)> {
    let mut a: Vec<Vec<u8>> = rows.to_vec();
    let m = a.len();
    let n = a.first()?.len();
    let mut perm: Vec<usize> = (0..n).collect();

    for r in 0..m {
        let target = k + r;
        let has_pivot = |a: &[Vec<u8>], c: usize| (r..m).find(|&row| a[row][c] == 1);

        let mut pivot_row = has_pivot(&a, target);
        if pivot_row.is_none() {
            // Non-target columns are scanned right to left, then future targets.
            let candidate = (0..k)
                .rev()
                .chain(target + 1..n)
                .find(|&c| has_pivot(&a, c).is_some())?;
            for row in a.iter_mut() {
                row.swap(target, candidate);
            }
            perm.swap(target, candidate);
            pivot_row = has_pivot(&a, target);
        }
        let p = pivot_row?;
        a.swap(r, p);
        let pivot = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && row[target] == 1 {
                xor_into(row, &pivot);
            }
        }
    }
    Some((a, perm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_identity_and_duplicates() {
        assert_eq!(gf2_rank(&[vec![1, 0], vec![0, 1]]), 2);
        assert_eq!(gf2_rank(&[vec![1, 1], vec![1, 1]]), 1);
        assert_eq!(gf2_rank(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]), 2);
    }

    #[test]
    fn systematize_produces_identity_tail() {
        let rows = vec![vec![1, 1, 0, 1], vec![0, 1, 1, 1]];
        let (a, perm) = systematize(&rows, 2).unwrap();
        assert_eq!(a[0][2..], [1, 0]);
        assert_eq!(a[1][2..], [0, 1]);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }
}
