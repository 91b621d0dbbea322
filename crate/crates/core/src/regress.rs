//! Linear fitting primitives: ordinary least squares via normal equations
//! (Cholesky), coordinate-descent lasso on standardized features, and
//! closed-form ridge. All solvers work on dense column slices; rows with
//! missing values are excluded by the caller.

/// Solve `A x = b` for a symmetric positive-definite `A` (n×n, row-major)
/// by Cholesky decomposition. Returns `None` when `A` is not PD.
fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}

/// Ordinary least squares with an intercept. `xs[j]` is the j-th feature
/// column; all columns and `y` have equal length ≥ 1. Solves the normal
/// equations with escalating ridge jitter if the Gram matrix is singular.
/// Returns `(coefficients, intercept)`.
pub fn ols(xs: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p = xs.len();
    let m = y.len();
    if m == 0 {
        return None;
    }
    if p == 0 {
        return Some((vec![], mean(y)));
    }
    // Center everything; intercept recovered afterwards.
    let xm: Vec<f64> = xs.iter().map(|c| mean(c)).collect();
    let ym = mean(y);
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for i in 0..p {
        for j in i..p {
            let mut s = 0.0;
            for r in 0..m {
                s += (xs[i][r] - xm[i]) * (xs[j][r] - xm[j]);
            }
            gram[i * p + j] = s;
            gram[j * p + i] = s;
        }
        let mut s = 0.0;
        for r in 0..m {
            s += (xs[i][r] - xm[i]) * (y[r] - ym);
        }
        rhs[i] = s;
    }
    let scale = (0..p).map(|i| gram[i * p + i]).fold(0.0f64, f64::max).max(1.0);
    let mut jitter = 0.0;
    for _ in 0..6 {
        let mut g = gram.clone();
        if jitter > 0.0 {
            for i in 0..p {
                g[i * p + i] += jitter * scale;
            }
        }
        if let Some(coefs) = cholesky_solve(&g, &rhs, p) {
            if coefs.iter().all(|c| c.is_finite()) {
                let intercept = ym - coefs.iter().zip(&xm).map(|(c, m)| c * m).sum::<f64>();
                return Some((coefs, intercept));
            }
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 100.0 };
    }
    None
}

/// Closed-form ridge regression on standardized features with an intercept.
/// Coefficients are mapped back to the original feature scale.
pub fn ridge(xs: &[Vec<f64>], y: &[f64], lambda: f64) -> Option<(Vec<f64>, f64)> {
    let p = xs.len();
    let m = y.len();
    if m == 0 {
        return None;
    }
    if p == 0 {
        return Some((vec![], mean(y)));
    }
    let std = Standardized::new(xs, y)?;
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for i in 0..p {
        for j in i..p {
            let s: f64 = (0..m).map(|r| std.x[i][r] * std.x[j][r]).sum();
            gram[i * p + j] = s;
            gram[j * p + i] = s;
        }
        gram[i * p + i] += lambda * m as f64;
        rhs[i] = (0..m).map(|r| std.x[i][r] * std.yc[r]).sum();
    }
    let coefs = cholesky_solve(&gram, &rhs, p)?;
    Some(std.unstandardize(&coefs))
}

/// Coordinate-descent lasso on standardized features. `lambda` applies to
/// the standardized problem (unit-variance features, centered y). Returns
/// coefficients on the original scale plus the intercept.
pub fn lasso(xs: &[Vec<f64>], y: &[f64], lambda: f64, max_iter: usize) -> Option<(Vec<f64>, f64)> {
    let p = xs.len();
    let m = y.len();
    if m == 0 {
        return None;
    }
    if p == 0 {
        return Some((vec![], mean(y)));
    }
    let std = Standardized::new(xs, y)?;
    let mf = m as f64;
    let mut w = vec![0.0; p];
    let mut resid = std.yc.clone();
    for _ in 0..max_iter {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            let xj = &std.x[j];
            let mut rho = 0.0;
            for r in 0..m {
                rho += xj[r] * resid[r];
            }
            rho = rho / mf + w[j]; // unit-variance columns
            let new_w = soft_threshold(rho, lambda);
            let delta = new_w - w[j];
            if delta != 0.0 {
                for r in 0..m {
                    resid[r] -= delta * xj[r];
                }
                w[j] = new_w;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < 1e-10 {
            break;
        }
    }
    Some(std.unstandardize(&w))
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Feature columns scaled to unit variance (population) with centered y.
struct Standardized {
    x: Vec<Vec<f64>>,
    yc: Vec<f64>,
    xm: Vec<f64>,
    xs: Vec<f64>,
    ym: f64,
}

impl Standardized {
    fn new(xs: &[Vec<f64>], y: &[f64]) -> Option<Standardized> {
        let mf = y.len() as f64;
        let mut cols = Vec::with_capacity(xs.len());
        let mut xm = Vec::with_capacity(xs.len());
        let mut xsd = Vec::with_capacity(xs.len());
        for c in xs {
            let mu = mean(c);
            let var = c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / mf;
            let sd = var.sqrt();
            if sd <= 0.0 || !sd.is_finite() {
                return None; // constant or degenerate column; caller filters
            }
            cols.push(c.iter().map(|v| (v - mu) / sd).collect());
            xm.push(mu);
            xsd.push(sd);
        }
        let ym = mean(y);
        Some(Standardized { x: cols, yc: y.iter().map(|v| v - ym).collect(), xm, xs: xsd, ym })
    }

    /// Map standardized-scale coefficients back to the raw feature scale.
    fn unstandardize(&self, w: &[f64]) -> (Vec<f64>, f64) {
        let coefs: Vec<f64> = w.iter().zip(&self.xs).map(|(w, s)| w / s).collect();
        let intercept = self.ym - coefs.iter().zip(&self.xm).map(|(c, m)| c * m).sum::<f64>();
        (coefs, intercept)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_affine_law_exactly() {
        let x: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let (coefs, b) = ols(&[x], &y).unwrap();
        assert!((coefs[0] - 2.0).abs() < 1e-9);
        assert!((b - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ols_with_no_features_returns_mean() {
        let (coefs, b) = ols(&[], &[5.0, 5.0, 5.0]).unwrap();
        assert!(coefs.is_empty());
        assert_eq!(b, 5.0);
    }

    #[test]
    fn ols_survives_collinear_columns() {
        let x1: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let y: Vec<f64> = x1.iter().map(|v| 3.0 * v).collect();
        let (coefs, b) = ols(&[x1, x2], &y).unwrap();
        // Any solution on the collinear ridge reproduces y.
        let pred0 = coefs[0] * 1.0 + coefs[1] * 2.0 + b;
        assert!((pred0 - 3.0).abs() < 1e-6);
    }

    #[test]
    fn lasso_selects_the_informative_feature() {
        let x1: Vec<f64> = (0..40).map(|i| (i as f64).sin() * 3.0 + i as f64 * 0.1).collect();
        let noise: Vec<f64> = (0..40).map(|i| ((i * 7919 % 97) as f64) / 97.0).collect();
        let y: Vec<f64> = x1.iter().map(|v| 4.0 * v).collect();
        let (coefs, _) = lasso(&[x1, noise], &y, 1e-3, 500).unwrap();
        assert!(coefs[0].abs() > 1.0, "informative coefficient survived");
        assert!(coefs[1].abs() < 0.5, "noise coefficient shrunk: {}", coefs[1]);
    }

    #[test]
    fn ridge_close_to_ols_for_tiny_lambda() {
        let x: Vec<f64> = (1..=15).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| -0.5 * v + 7.0).collect();
        let (coefs, b) = ridge(&[x], &y, 1e-6).unwrap();
        assert!((coefs[0] + 0.5).abs() < 1e-3);
        assert!((b - 7.0).abs() < 1e-2);
    }
}
