//! Tiny least-squares helpers shared by the fitting diagnostics.

/// Slope and intercept of the least-squares line through (xs, ys).
pub fn line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - xm) * (x - xm);
        sxy += (x - xm) * (y - ym);
    }
    let slope = sxy / sxx;
    (slope, ym - slope * xm)
}

/// Solves the linear least-squares problem min ||B c - y|| where `basis[j]`
/// is the j-th basis function sampled at all points. Normal equations with
/// partial-pivot elimination; fine for the 2- and 3-parameter fits used here.
pub fn solve(basis: &[&[f64]], y: &[f64]) -> Vec<f64> {
    let p = basis.len();
    let n = y.len();
    assert!(basis.iter().all(|b| b.len() == n));
    let mut a = vec![vec![0.0f64; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = basis[i].iter().zip(basis[j]).map(|(u, v)| u * v).sum();
        }
        a[i][p] = basis[i].iter().zip(y).map(|(u, v)| u * v).sum();
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        for row in 0..p {
            if row != col {
                let fac = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= fac * a[col][k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}
