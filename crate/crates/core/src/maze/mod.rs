//! Two-dimensional L-shaped maze with a scripted expert.

mod expert;
mod io;
#[cfg(test)]
mod tests;
mod world;

pub use expert::{expert_episode, generate_expert, trajectories_from_transitions, ExpertConfig, ExpertDemos};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use world::{dist, DoneReason, EpisodeState, MazeWorld, Point, Rect};

/// Transition feature `(s, s')`.
pub fn features(s: Point, s_next: Point) -> [f64; 4] {
    [s[0], s[1], s_next[0], s_next[1]]
}

/// One cell of a histogram over next-state positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityCell {
    /// Cell centre.
    pub x: f64,
    pub y: f64,
    pub count: usize,
}

/// Counts of `s'` positions on a `bins x bins` grid over `area`, row-major
/// over `y` then `x`. Points outside `area` are dropped; the upper edges
/// are inclusive.
pub fn density_histogram(data: &crate::energy::ExpertDataset<f64>, area: Rect, bins: usize) -> crate::Result<Vec<DensityCell>> {
    if bins == 0 {
        return Err(crate::Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    if data.dim() != 4 {
        return Err(crate::Error::Dimension { context: "maze transition", expected: 4, actual: data.dim() });
    }
    let width = [(area.x[1] - area.x[0]) / bins as f64, (area.y[1] - area.y[0]) / bins as f64];
    let mut counts = vec![0usize; bins * bins];
    for r in data.features().rows() {
        let p = [r[2], r[3]];
        if !area.contains(p) {
            continue;
        }
        let bin = |d: usize, lo: f64| (((p[d] - lo) / width[d]) as usize).min(bins - 1);
        counts[bin(1, area.y[0]) * bins + bin(0, area.x[0])] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| DensityCell {
            x: area.x[0] + width[0] * ((k % bins) as f64 + 0.5),
            y: area.y[0] + width[1] * ((k / bins) as f64 + 0.5),
            count,
        })
        .collect())
}
