//! Minimal Nelder–Mead simplex minimizer for 1-D and 2-D refinement.

/// Minimize `f` over `dim`-dimensional points starting from a simplex around
/// `start` with edge `scale`. Returns (argmin, min).
pub(crate) fn minimize<F>(
    f: F,
    start: &[f64],
    scale: f64,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let dim = start.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    pts.push(start.to_vec());
    for i in 0..dim {
        let mut p = start.to_vec();
        p[i] += scale;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();

    for _ in 0..max_iter {
        // Order ascending by value.
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| pts[i].clone()).collect();
        let ovals: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
        pts = ordered;
        vals = ovals;

        let spread = pts
            .iter()
            .skip(1)
            .map(|p| {
                p.iter()
                    .zip(&pts[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread < tol && (vals[dim] - vals[0]).abs() < tol {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| pts[..dim].iter().map(|p| p[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = pts[dim].clone();
        let reflect: Vec<f64> = (0..dim)
            .map(|j| centroid[j] + (centroid[j] - worst[j]))
            .collect();
        let fr = f(&reflect);

        if fr < vals[0] {
            let expand: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - worst[j]))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                pts[dim] = expand;
                vals[dim] = fe;
            } else {
                pts[dim] = reflect;
                vals[dim] = fr;
            }
        } else if fr < vals[dim - 1] {
            pts[dim] = reflect;
            vals[dim] = fr;
        } else {
            let contract: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + 0.5 * (worst[j] - centroid[j]))
                .collect();
            let fc = f(&contract);
            if fc < vals[dim] {
                pts[dim] = contract;
                vals[dim] = fc;
            } else {
                // Shrink toward the best vertex.
                for i in 1..=dim {
                    for j in 0..dim {
                        pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                    }
                    vals[i] = f(&pts[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..pts.len() {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    (pts[best].clone(), vals[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let f = |p: &[f64]| (p[0] - 1.5).powi(2) + (p[1] + 0.5).powi(2);
        let (x, v) = minimize(f, &[0.0, 0.0], 0.5, 500, 1e-12);
        assert!((x[0] - 1.5).abs() < 1e-6);
        assert!((x[1] + 0.5).abs() < 1e-6);
        assert!(v < 1e-10);
    }

    #[test]
    fn handles_kinked_minimum() {
        let f = |p: &[f64]| (p[0] - 0.3).abs() + 1.0;
        let (x, v) = minimize(f, &[0.0], 0.2, 500, 1e-13);
        assert!((x[0] - 0.3).abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-9);
    }
}
