//! Euclidean projection onto the ℓ1 ball by sort-and-threshold.

use alloc::vec::Vec;

/// Soft-threshold level `τ ≥ 0` with `Σ max(|vᵢ| − τ, 0) = radius`, or `0`
/// when `v` already lies in the ball.
pub fn l1_threshold(v: &[f64], radius: f64) -> f64 {
    let total: f64 = v.iter().map(|a| a.abs()).sum();
    if total <= radius {
        return 0.0;
    }
    if radius <= 0.0 {
        return v.iter().fold(0.0, |m, a| m.max(a.abs()));
    }
    let mut mags: Vec<f64> = v.iter().map(|a| a.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (k + 1) as f64;
        if u > t {
            tau = t;
        } else {
            break;
        }
    }
    tau.max(0.0)
}

/// Writes `argmin_{‖w‖₁ ≤ radius} ‖w − v‖₂` into `out`. A radius of zero (or
/// below) yields the zero vector.
pub fn project_l1_ball_into(v: &[f64], radius: f64, out: &mut [f64]) {
    if radius <= 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let tau = l1_threshold(v, radius);
    if tau == 0.0 {
        out.copy_from_slice(v);
        return;
    }
    for (o, &a) in out.iter_mut().zip(v) {
        *o = soft(a, tau);
    }
}

pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    project_l1_ball_into(v, radius, &mut out);
    out
}

/// Scalar soft-thresholding `sign(a) max(|a| − t, 0)`.
#[inline]
pub fn soft(a: f64, t: f64) -> f64 {
    if a > t {
        a - t
    } else if a < -t {
        a + t
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn feasible_vector_is_unchanged() {
        let v = [0.5, -0.25, 0.1];
        assert_eq!(project_l1_ball(&v, 1.0), v.to_vec());
    }

    #[test]
    fn zero_radius_gives_zero() {
        assert_eq!(project_l1_ball(&[3.0, -1.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn three_element_example() {
        // |3|-τ + max(1-τ,0) + max(0.5-τ,0) = 2 → τ = 1 (only the first survives)
        let w = project_l1_ball(&[3.0, -1.0, 0.5], 2.0);
        assert!((w[0] - 2.0).abs() < 1e-15);
        assert_eq!(&w[1..], &[0.0, 0.0]);
    }

    #[test]
    fn projection_is_idempotent() {
        let v = [1.0, -2.0, 0.3, 4.0, -0.7];
        let p = project_l1_ball(&v, 2.5);
        let pp = project_l1_ball(&p, 2.5);
        for (a, b) in p.iter().zip(&pp) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(p.iter().map(|a| a.abs()).sum::<f64>() <= 2.5 + 1e-12);
    }
}
