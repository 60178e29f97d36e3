//! Local tempo estimation from aligned (clock time, score time) pairs.
//!
//! The tempo at cluster k is modeled as a Gaussian random walk observed
//! through the ratio y_k = Δt_k / Δτ_k (seconds per whole note) with
//! observation variance σ_obs²/Δτ_k: longer score intervals average out more
//! timing noise. A forward Kalman filter plus Rauch-Tung-Striebel backward
//! pass under a flat initial prior gives the exact posterior mean, which is
//! also the solution of the corresponding batch least-squares problem.

use crate::error::{Error, Result};
use crate::rational::ScoreTime;

/// Output clamp bounds, seconds per whole note.
const V_MIN: f64 = 0.1;
const V_MAX: f64 = 20.0;

/// Smoothed local tempi, one entry per input cluster, in s per whole note.
#[derive(Clone, Debug, PartialEq)]
pub struct TempoTrack {
    pub v: Vec<f64>,
}

impl TempoTrack {
    /// Expands cluster tempi to notes via the note → cluster map.
    pub fn per_note(&self, cluster_of: &[usize]) -> Vec<f64> {
        cluster_of.iter().map(|&c| self.v[c]).collect()
    }
}

/// Full smoother state, exposed for validation; `smooth_tempi` is the
/// public wrapper.
pub(crate) struct SmootherOutput {
    /// Posterior means per transition (length = clusters − 1), unclamped.
    pub means: Vec<f64>,
    /// Filtered variances per transition. Only the tests read these, but the
    /// smoothed-never-exceeds-filtered invariant is worth keeping checkable.
    #[allow(dead_code)]
    pub filtered_var: Vec<f64>,
    /// Smoothed variances per transition.
    #[allow(dead_code)]
    pub smoothed_var: Vec<f64>,
}

pub(crate) fn run_smoother(
    t: &[f64],
    tau: &[ScoreTime],
    sigma_v: f64,
    sigma_obs: f64,
) -> Result<SmootherOutput> {
    if t.len() != tau.len() {
        return Err(Error::InvalidInput(format!(
            "tempo smoothing needs matched inputs, got {} times and {} score times",
            t.len(),
            tau.len()
        )));
    }
    if t.len() < 2 {
        return Err(Error::InvalidInput("tempo unobservable from fewer than 2 clusters".into()));
    }
    if !(sigma_v > 0.0 && sigma_obs > 0.0) {
        return Err(Error::InvalidInput("tempo smoothing variances must be positive".into()));
    }
    let m = t.len() - 1;
    let mut y = Vec::with_capacity(m);
    let mut r = Vec::with_capacity(m);
    let q = sigma_v * sigma_v;
    for k in 0..m {
        let dtau = (tau[k + 1] - tau[k]).to_f64();
        if dtau <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "score times must strictly increase across clusters (cluster {})",
                k + 1
            )));
        }
        y.push((t[k + 1] - t[k]) / dtau);
        r.push(sigma_obs * sigma_obs / dtau);
    }

    // Forward filter. A flat prior on the first state makes the first update
    // exact: mean y_1, variance r_1.
    let mut mean_f = vec![0.0; m];
    let mut var_f = vec![0.0; m];
    mean_f[0] = y[0];
    var_f[0] = r[0];
    for k in 1..m {
        let pred_var = var_f[k - 1] + q;
        let gain = pred_var / (pred_var + r[k]);
        mean_f[k] = mean_f[k - 1] + gain * (y[k] - mean_f[k - 1]);
        var_f[k] = (1.0 - gain) * pred_var;
    }

    // Backward (RTS) pass.
    let mut mean_s = mean_f.clone();
    let mut var_s = var_f.clone();
    for k in (0..m - 1).rev() {
        let pred_var = var_f[k] + q;
        let gain = var_f[k] / pred_var;
        mean_s[k] = mean_f[k] + gain * (mean_s[k + 1] - mean_f[k]);
        var_s[k] = var_f[k] + gain * gain * (var_s[k + 1] - pred_var);
    }
    Ok(SmootherOutput { means: mean_s, filtered_var: var_f, smoothed_var: var_s })
}

/// Smooths per-cluster tempi from cluster onset seconds `t` and cluster
/// score times `tau` (strictly increasing). The k-th output is the smoothed
/// tempo of the transition leaving cluster k; the final cluster inherits the
/// last smoothed value. Outputs are clamped to [0.1, 20.0] s per whole note.
pub fn smooth_tempi(t: &[f64], tau: &[ScoreTime], sigma_v: f64, sigma_obs: f64) -> Result<TempoTrack> {
    let out = run_smoother(t, tau, sigma_v, sigma_obs)?;
    let mut v: Vec<f64> = out.means.iter().map(|&x| x.clamp(V_MIN, V_MAX)).collect();
    let last = *v.last().expect("at least one transition");
    v.push(last);
    Ok(TempoTrack { v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn st(num: i64, den: i64) -> ScoreTime {
        ScoreTime::new(num, den)
    }

    /// Batch oracle: the posterior mean minimizes
    /// Σ (y_k − x_k)²/r_k + Σ (x_{k+1} − x_k)²/q,
    /// a tridiagonal normal-equation system solved densely here.
    fn batch_solve(y: &[f64], r: &[f64], q: f64) -> Vec<f64> {
        let m = y.len();
        let mut a = vec![vec![0.0; m]; m];
        let mut b = vec![0.0; m];
        for k in 0..m {
            a[k][k] += 1.0 / r[k];
            b[k] += y[k] / r[k];
        }
        for k in 0..m - 1 {
            a[k][k] += 1.0 / q;
            a[k + 1][k + 1] += 1.0 / q;
            a[k][k + 1] -= 1.0 / q;
            a[k + 1][k] -= 1.0 / q;
        }
        // Gaussian elimination with partial pivoting.
        let mut aug: Vec<Vec<f64>> = a
            .into_iter()
            .zip(b)
            .map(|(row, rhs)| {
                let mut r = row;
                r.push(rhs);
                r
            })
            .collect();
        for col in 0..m {
            let pivot = (col..m).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs())).unwrap();
            aug.swap(col, pivot);
            let p = aug[col][col];
            for row in col + 1..m {
                let f = aug[row][col] / p;
                for c in col..=m {
                    aug[row][c] -= f * aug[col][c];
                }
            }
        }
        let mut x = vec![0.0; m];
        for row in (0..m).rev() {
            let mut acc = aug[row][m];
            for c in row + 1..m {
                acc -= aug[row][c] * x[c];
            }
            x[row] = acc / aug[row][row];
        }
        x
    }

    #[test]
    fn metronomic_performance_recovers_constant_tempo() {
        let tau: Vec<ScoreTime> = (0..20).map(|i| st(i, 4)).collect();
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let track = smooth_tempi(&t, &tau, 0.05, 0.1).unwrap();
        assert_eq!(track.v.len(), 20);
        for &v in &track.v {
            assert!((v - 2.0).abs() < 1e-9, "v = {v}");
        }
    }

    #[test]
    fn single_observation_propagates_everywhere() {
        let t = [0.0, 1.0];
        let tau = [st(0, 1), st(1, 2)];
        let track = smooth_tempi(&t, &tau, 0.05, 0.1).unwrap();
        assert_eq!(track.v, vec![2.0, 2.0]);
    }

    #[test]
    fn single_cluster_is_an_error() {
        let err = smooth_tempi(&[1.0], &[st(0, 1)], 0.05, 0.1).unwrap_err();
        assert!(err.to_string().contains("unobservable"), "{err}");
    }

    #[test]
    fn non_increasing_score_times_rejected() {
        let err = smooth_tempi(&[0.0, 1.0, 2.0], &[st(0, 1), st(1, 4), st(1, 4)], 0.05, 0.1)
            .unwrap_err();
        assert!(err.to_string().contains("strictly increase"), "{err}");
    }

    fn random_walk_case(seed: u64, n: usize) -> (Vec<f64>, Vec<ScoreTime>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tau = vec![st(0, 1)];
        let mut t = vec![0.0];
        let mut v = 2.0_f64;
        for i in 1..n {
            let dtau = st(1 + (rng.gen::<u32>() % 4) as i64, 8);
            v = (v + rng.gen_range(-0.05..0.05)).max(0.5);
            tau.push(tau[i - 1] + dtau);
            t.push(t[i - 1] + dtau.to_f64() * v + rng.gen_range(-0.01..0.01));
        }
        (t, tau)
    }

    #[test]
    fn matches_batch_least_squares_oracle() {
        for seed in [1, 2, 3] {
            let (t, tau) = random_walk_case(seed, 50);
            let (sigma_v, sigma_obs) = (0.05, 0.1);
            let out = run_smoother(&t, &tau, sigma_v, sigma_obs).unwrap();
            let m = t.len() - 1;
            let mut y = Vec::new();
            let mut r = Vec::new();
            for k in 0..m {
                let dtau = (tau[k + 1] - tau[k]).to_f64();
                y.push((t[k + 1] - t[k]) / dtau);
                r.push(sigma_obs * sigma_obs / dtau);
            }
            let oracle = batch_solve(&y, &r, sigma_v * sigma_v);
            for k in 0..m {
                assert!(
                    (out.means[k] - oracle[k]).abs() < 1e-6,
                    "seed {seed}, k {k}: rts {} vs batch {}",
                    out.means[k],
                    oracle[k]
                );
            }
        }
    }

    #[test]
    fn smoothing_never_inflates_variance() {
        let (t, tau) = random_walk_case(9, 50);
        let out = run_smoother(&t, &tau, 0.05, 0.1).unwrap();
        for (s, f) in out.smoothed_var.iter().zip(&out.filtered_var) {
            assert!(s <= &(f + 1e-12), "smoothed {s} > filtered {f}");
        }
    }

    #[test]
    fn invariant_under_time_translation() {
        let (t, tau) = random_walk_case(5, 30);
        let shifted: Vec<f64> = t.iter().map(|x| x + 17.25).collect();
        let a = smooth_tempi(&t, &tau, 0.05, 0.1).unwrap();
        let b = smooth_tempi(&shifted, &tau, 0.05, 0.1).unwrap();
        for (x, y) in a.v.iter().zip(&b.v) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn scales_linearly_with_time() {
        let (t, tau) = random_walk_case(6, 30);
        let scaled: Vec<f64> = t.iter().map(|x| x * 1.75).collect();
        let a = smooth_tempi(&t, &tau, 0.05, 0.1).unwrap();
        let b = smooth_tempi(&scaled, &tau, 0.05, 0.1).unwrap();
        for (x, y) in a.v.iter().zip(&b.v) {
            // Holds away from the [0.1, 20] clamp, which these cases are.
            assert!((x * 1.75 - y).abs() < 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn output_respects_clamp() {
        let t = [0.0, 100.0, 200.0];
        let tau = [st(0, 1), st(1, 4), st(1, 2)];
        let track = smooth_tempi(&t, &tau, 0.05, 0.1).unwrap();
        for &v in &track.v {
            assert!((0.1..=20.0).contains(&v));
        }
        assert_eq!(track.v, vec![20.0, 20.0, 20.0]);
    }

    #[test]
    fn per_note_expansion_follows_cluster_map() {
        let track = TempoTrack { v: vec![2.0, 2.5, 3.0] };
        assert_eq!(track.per_note(&[0, 0, 1, 2, 2]), vec![2.0, 2.0, 2.5, 3.0, 3.0]);
    }
}
