use ndarray::ArrayView2;

use super::Trajectory;
use crate::error::{Error, Result};
use crate::Scalar;

/// Accumulated L2 cost of the optimal boundary-anchored alignment under the
/// symmetric match/insert/delete step pattern. Not normalized by path length.
pub fn dtw_error<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>) -> Result<T> {
    let (n, m) = (a.nrows(), b.nrows());
    if n == 0 || m == 0 {
        return Err(Error::Empty("dtw sequence"));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::dim("dtw coordinates", a.ncols(), b.ncols()));
    }
    let inf = T::infinity();
    let mut prev = vec![inf; m + 1];
    let mut cur = vec![inf; m + 1];
    prev[0] = T::zero();
    for i in 0..n {
        cur[0] = inf;
        let ai = a.row(i);
        for j in 0..m {
            let cost = ai.iter().zip(b.row(j)).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>().sqrt();
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = cost + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Mean DTW error over every (policy, expert) pair.
pub fn avg_dtw_pose_error<T: Scalar>(policy: &[Trajectory<T>], expert: &[Trajectory<T>]) -> Result<T> {
    if policy.is_empty() || expert.is_empty() {
        return Err(Error::Empty("dtw trajectory set"));
    }
    let mut total = T::zero();
    for p in policy {
        for e in expert {
            total += dtw_error(p.samples(), e.samples())?;
        }
    }
    Ok(total / T::of((policy.len() * expert.len()) as f64))
}

/// Indices of the `k` largest returns, highest first; ties keep input order.
pub fn top_k_by_return(returns: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut idx: Vec<usize> = (0..returns.len()).collect();
    idx.sort_by(|&i, &j| returns[j].total_cmp(&returns[i]));
    idx.truncate(k);
    Ok(idx)
}
