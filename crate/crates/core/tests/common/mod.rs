#![allow(dead_code)]

use std::path::PathBuf;

/// Central finite differences of `f` at `x`, step scaled to each coordinate.
pub fn fd_check(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, with an absolute floor for near-zero gradients.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt())
        .max(1e-3);
    diff / scale
}

/// MovieLens-100K location: `SIFREC_ML100K`, else `data/ml-100k/u.data`
/// under the workspace root.
pub fn ml100k_path() -> Option<PathBuf> {
    if let Ok(p) = std::env::var("SIFREC_ML100K") {
        let p = PathBuf::from(p);
        return p.exists().then_some(p);
    }
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k/u.data");
    p.exists().then_some(p)
}
