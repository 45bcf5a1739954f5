/// Sum of `confusion[i][perm[i]]`.
pub fn assignment_score(confusion: &[Vec<u64>], perm: &[usize]) -> u64 {
    perm.iter().enumerate().map(|(i, &j)| confusion[i][j]).sum()
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials). Returns `col_of_row` and the optimal cost.
fn min_cost_assignment(cost: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0);
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; p[j] is the row matched to column j
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        col_of_row[p[j] - 1] = j - 1;
    }
    let total = col_of_row.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (col_of_row, total)
}

fn best_score(confusion: &[Vec<u64>], rows: &[usize], cols: &[usize]) -> u64 {
    let cost: Vec<Vec<i64>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| -(confusion[i][j] as i64)).collect())
        .collect();
    (-min_cost_assignment(&cost).1) as u64
}

/// Permutation maximizing the matched diagonal sum of a square confusion
/// matrix; `perm[i]` is the column matched to row `i`.
///
/// Among optimal permutations the lexicographically smallest is returned.
pub fn hungarian_match(confusion: &[Vec<u64>]) -> Vec<usize> {
    let k = confusion.len();
    assert!(confusion.iter().all(|r| r.len() == k), "confusion matrix must be square");
    if k == 0 {
        return Vec::new();
    }
    let optimum = best_score(confusion, &(0..k).collect::<Vec<_>>(), &(0..k).collect::<Vec<_>>());
    // fix rows in order to the smallest column that keeps the optimum reachable
    let mut perm = Vec::with_capacity(k);
    let mut free: Vec<usize> = (0..k).collect();
    let mut fixed_score = 0u64;
    for row in 0..k {
        let rest_rows: Vec<usize> = (row + 1..k).collect();
        let pick = free
            .iter()
            .position(|&col| {
                let rest_cols: Vec<usize> = free.iter().copied().filter(|&c| c != col).collect();
                fixed_score + confusion[row][col] + best_score(confusion, &rest_rows, &rest_cols)
                    == optimum
            })
            .expect("some column preserves the optimum");
        let col = free.remove(pick);
        fixed_score += confusion[row][col];
        perm.push(col);
    }
    perm
}
