//! Independent reference implementations used by the acceptance suite.

#![allow(dead_code)]

/// Solves `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. `None` when (numerically) singular.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// ‖x − Σ c_j D_j‖² + λ‖c‖₁ with `rows` the codewords.
pub fn lasso_value(x: &[f64], c: &[f64], rows: &[Vec<f64>], lambda: f64) -> f64 {
    let mut r = x.to_vec();
    for (cj, row) in c.iter().zip(rows) {
        for (ri, &dij) in r.iter_mut().zip(row) {
            *ri -= cj * dij;
        }
    }
    r.iter().map(|v| v * v).sum::<f64>() + lambda * c.iter().map(|v| v.abs()).sum::<f64>()
}

/// Exact lasso minimum by enumerating every support and sign pattern.
///
/// For support S with signs s the stationarity condition is
/// G_SS c_S = b_S − (λ/2) s. Every solution is a feasible point, and the
/// optimum is one of them, so the smallest objective among them is optimal.
pub fn lasso_oracle(x: &[f64], rows: &[Vec<f64>], lambda: f64) -> f64 {
    let l = rows.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut best = lasso_value(x, &vec![0.0; l], rows, lambda);
    for mask in 1u32..(1 << l) {
        let support: Vec<usize> = (0..l).filter(|j| mask & (1 << j) != 0).collect();
        let k = support.len();
        for signs in 0u32..(1 << k) {
            let g: Vec<Vec<f64>> = support
                .iter()
                .map(|&i| support.iter().map(|&j| dot(&rows[i], &rows[j])).collect())
                .collect();
            let rhs: Vec<f64> = support
                .iter()
                .enumerate()
                .map(|(t, &i)| {
                    let s = if signs & (1 << t) != 0 { 1.0 } else { -1.0 };
                    dot(&rows[i], x) - lambda / 2.0 * s
                })
                .collect();
            if let Some(cs) = solve(g, rhs) {
                let mut c = vec![0.0; l];
                for (t, &i) in support.iter().enumerate() {
                    c[i] = cs[t];
                }
                best = best.min(lasso_value(x, &c, rows, lambda));
            }
        }
    }
    best
}

/// RQA measures by scanning every segment of every direction. Returns
/// (recurrence, determinism, laminarity, crom) in percent.
pub fn rqa_oracle(points: &[(f64, f64)], radius: f64, min_line: usize) -> [f64; 4] {
    let n = points.len();
    let rec = |i: usize, j: usize| {
        i != j && {
            let (a, b) = (points[i], points[j]);
            (a.0 - b.0).hypot(a.1 - b.1) <= radius
        }
    };
    let upper: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| rec(i, j))
        .collect();
    let r = upper.len();
    if r == 0 {
        return [0.0; 4];
    }
    // a cell lies on a line >= L if some all-true segment of length >= L
    // along (di, dj) contains it
    let on_line = |i: usize, j: usize, di: isize, dj: isize| {
        for start in 0..n as isize {
            for len in min_line..=n {
                let cells: Vec<(isize, isize)> = (0..len as isize)
                    .map(|t| {
                        let s = start + t;
                        (
                            if di == 0 { i as isize } else { s },
                            if dj == 0 { j as isize } else if di == 0 { s } else { s + (j as isize - i as isize) },
                        )
                    })
                    .collect();
                let inside = cells
                    .iter()
                    .all(|&(a, b)| a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n);
                if inside
                    && cells.contains(&(i as isize, j as isize))
                    && cells.iter().all(|&(a, b)| rec(a as usize, b as usize))
                {
                    return true;
                }
            }
        }
        false
    };
    let diag = upper.iter().filter(|&&(i, j)| on_line(i, j, 1, 1)).count();
    let horiz = upper.iter().filter(|&&(i, j)| on_line(i, j, 0, 1)).count();
    let vert = upper.iter().filter(|&&(i, j)| on_line(i, j, 1, 0)).count();
    let lag: usize = upper.iter().map(|&(i, j)| j - i).sum();
    [
        100.0 * (2 * r) as f64 / (n * (n - 1)) as f64,
        100.0 * diag as f64 / r as f64,
        100.0 * (horiz + vert) as f64 / (2.0 * r as f64),
        100.0 * lag as f64 / ((n - 1) as f64 * r as f64),
    ]
}
