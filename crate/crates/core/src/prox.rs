//! Closed-form proximal steps for the architecture constraint sets.
//!
//! * `C1`: exactly one nonzero entry.
//! * `C2`: every entry in `[0, 1]`.
//! * `Ck`: at most `k` nonzero entries.
//! * the Euclidean unit ball.
//!
//! Ties in magnitude are broken towards the lowest index.

/// Index of the largest `|z_i|`, lowest index on ties.
pub fn argmax_abs(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in z.iter().enumerate().skip(1) {
        if v.abs() > z[best].abs() {
            best = i;
        }
    }
    best
}

/// Projection onto one-hot-support vectors: keeps `z_i` at `i = argmax |z_i|`.
pub fn prox_c1(z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    if !z.is_empty() {
        let i = argmax_abs(z);
        out[i] = z[i];
    }
    out
}

/// Clips every entry to `[0, 1]`.
pub fn prox_c2(z: &[f64]) -> Vec<f64> {
    z.iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Indices of the `k` largest-magnitude entries, in ascending index order.
pub fn top_k_support(z: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    // stable sort keeps lower indices first among equal magnitudes
    idx.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Keeps the `k` largest-magnitude entries and zeroes the rest.
///
/// # Panics
/// If `k == 0` or `k > z.len()`.
pub fn prox_ck(z: &[f64], k: usize) -> Vec<f64> {
    assert!(k >= 1 && k <= z.len(), "prox_ck needs 1 <= k <= d");
    let mut out = vec![0.0; z.len()];
    for i in top_k_support(z, k) {
        out[i] = z[i];
    }
    out
}

/// Tolerance on the unit-ball radius: a rescaled vector can land a few ulps
/// outside, and projecting it again must be a no-op.
const BALL_SLACK: f64 = 1e-12;

/// Euclidean projection onto `{x : ||x||_2 <= 1}`.
pub fn project_unit_ball(mut z: Vec<f64>) -> Vec<f64> {
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1.0 + BALL_SLACK {
        for x in z.iter_mut() {
            *x /= norm;
        }
    }
    z
}

pub fn in_c1(x: &[f64]) -> bool {
    x.iter().filter(|v| **v != 0.0).count() <= 1
}

pub fn in_c2(x: &[f64]) -> bool {
    x.iter().all(|v| (0.0..=1.0).contains(v))
}

pub fn in_ck(x: &[f64], k: usize) -> bool {
    x.iter().filter(|v| **v != 0.0).count() <= k
}

pub fn in_unit_ball(x: &[f64]) -> bool {
    x.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.0 + BALL_SLACK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c1_examples() {
        assert_eq!(prox_c1(&[0.3, -0.5, 0.2]), vec![0.0, -0.5, 0.0]);
        assert_eq!(prox_c1(&[0.4, 0.4]), vec![0.4, 0.0]);
        assert_eq!(prox_c1(&[7.0]), vec![7.0]);
    }

    #[test]
    fn c2_examples() {
        assert_eq!(prox_c2(&[-0.2, 0.5, 1.3]), vec![0.0, 0.5, 1.0]);
        assert_eq!(prox_c2(&[0.0, 0.25, 1.0]), vec![0.0, 0.25, 1.0]);
    }

    #[test]
    fn ck_examples() {
        assert_eq!(prox_ck(&[3.0, 1.0, 2.0], 2), vec![3.0, 0.0, 2.0]);
        let z = [0.1, -0.9, 0.9, 0.2];
        assert_eq!(prox_ck(&z, 1), prox_c1(&z));
        assert_eq!(prox_ck(&[1.0, 1.0, 1.0], 2), vec![1.0, 1.0, 0.0]);
        assert_eq!(prox_ck(&z, 4), z.to_vec());
    }

    #[test]
    #[should_panic]
    fn ck_rejects_zero() {
        prox_ck(&[1.0], 0);
    }

    #[test]
    fn ball_examples() {
        let p = project_unit_ball(vec![3.0, 4.0]);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_unit_ball(vec![0.1, 0.1]), vec![0.1, 0.1]);
        assert_eq!(project_unit_ball(vec![0.0, 0.0]), vec![0.0, 0.0]);
    }
}
