//! Linear conservation laws: integer vectors `v` with `v · γ_r = 0` for every
//! reaction, found as the left null space of the stoichiometric matrix by
//! fraction-free elimination.

use crate::network::ReactionNetwork;

/// A basis of the conservation laws of `network`, one vector per free species
/// column of the reduced row echelon form. Each vector is scaled to coprime
/// integers with a positive leading entry.
pub fn detect_conservation_laws(network: &ReactionNetwork) -> Vec<Vec<i64>> {
    let m = network.n_species();
    // Rows of the transposed stoichiometric matrix: one per reaction.
    let mut rows: Vec<Vec<i128>> = network
        .reactions()
        .iter()
        .map(|r| r.jump().iter().map(|&d| i128::from(d)).collect())
        .collect();
    let null = integer_null_space(&mut rows, m);
    null.into_iter()
        .map(|v| v.into_iter().map(|x| x as i64).collect())
        .collect()
}

/// Null space `{v : A v = 0}` of an integer matrix with `cols` columns.
/// `rows` is reduced in place.
pub fn integer_null_space(rows: &mut [Vec<i128>], cols: usize) -> Vec<Vec<i128>> {
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| rows[i][c] != 0) else {
            continue;
        };
        rows.swap(r, p);
        if rows[r][c] < 0 {
            rows[r].iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..rows.len() {
            if i == r || rows[i][c] == 0 {
                continue;
            }
            let (a, b) = (rows[r][c], rows[i][c]);
            let (pivot_row, row) = if i < r {
                let (lo, hi) = rows.split_at_mut(r);
                (&hi[0], &mut lo[i])
            } else {
                let (lo, hi) = rows.split_at_mut(i);
                (&lo[r], &mut hi[0])
            };
            for (x, &y) in row.iter_mut().zip(pivot_row.iter()) {
                *x = a * *x - b * y;
            }
            normalize(row);
        }
        pivots.push((r, c));
        r += 1;
    }

    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivot_cols.contains(c)) {
        let scale = pivots
            .iter()
            .fold(1i128, |acc, &(row, c)| lcm(acc, rows[row][c]));
        let mut v = vec![0i128; cols];
        v[free] = scale;
        for &(row, c) in &pivots {
            v[c] = -rows[row][free] * (scale / rows[row][c]);
        }
        normalize(&mut v);
        if let Some(&lead) = v.iter().find(|&&x| x != 0) {
            if lead < 0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        basis.push(v);
    }
    basis
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: i128, b: i128) -> i128 {
    if a == 0 || b == 0 {
        return 0;
    }
    (a / gcd(a, b) * b).abs()
}

fn normalize(v: &mut [i128]) {
    let g = v.iter().fold(0, |g, &x| gcd(g, x));
    if g > 1 {
        v.iter_mut().for_each(|x| *x /= g);
    }
}
