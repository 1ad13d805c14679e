use crate::error::{Error, Result};

/// Solves the square system `a · x = b` in place by Gaussian elimination
/// with partial pivoting. `a` is row-major `n × n`.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap_or(col);
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row * n + k] * x[k];
        }
        x[row] = s / a[row * n + row];
    }
    x
}

/// Least-squares smoothing weights. `weights[s][j]` is the weight of window
/// sample `j` when evaluating the local polynomial at window position `s`.
pub fn savgol_weights(window: usize, order: usize) -> Result<Vec<Vec<f64>>> {
    if window.is_multiple_of(2) || window == 0 {
        return Err(Error::InvalidInput(format!("window {window} must be odd")));
    }
    if order >= window {
        return Err(Error::InvalidInput(format!("order {order} must be below window {window}")));
    }
    let half = (window / 2) as f64;
    let p = order + 1;
    let offsets: Vec<f64> = (0..window).map(|j| j as f64 - half).collect();
    // Normal matrix GᵀG of the Vandermonde design over the offsets.
    let mut gram = vec![0.0; p * p];
    for r in 0..p {
        for c in 0..p {
            gram[r * p + c] = offsets.iter().map(|t| t.powi((r + c) as i32)).sum();
        }
    }
    let weights = offsets
        .iter()
        .map(|&s| {
            let rhs: Vec<f64> = (0..p).map(|i| s.powi(i as i32)).collect();
            let z = solve(gram.clone(), rhs);
            offsets
                .iter()
                .map(|&t| (0..p).map(|i| z[i] * t.powi(i as i32)).sum())
                .collect()
        })
        .collect();
    Ok(weights)
}

/// Savitzky-Golay smoothing. Edges evaluate the fit of the nearest full
/// window at the edge sample's offset, so the output keeps the input length.
pub fn savitzky_golay(x: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    let weights = savgol_weights(window, order)?;
    if x.len() < window {
        return Err(Error::InvalidInput(format!(
            "sequence of length {} is shorter than window {window}",
            x.len()
        )));
    }
    let half = window / 2;
    let n = x.len();
    let dot = |start: usize, w: &[f64]| -> f64 { x[start..start + window].iter().zip(w).map(|(a, b)| a * b).sum() };
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let v = if t < half {
            dot(0, &weights[t])
        } else if t + half >= n {
            dot(n - window, &weights[t + window - n])
        } else {
            dot(t - half, &weights[half])
        };
        out.push(v);
    }
    Ok(out)
}
