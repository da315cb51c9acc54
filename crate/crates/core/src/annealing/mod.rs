//! Noise-level scheduler driven by energy progress on policy samples.

use std::io::Write;

use ndarray::{Array2, ArrayView2};

use crate::energy::{EnergyModel, NoiseScale, Weights};
use crate::error::{Error, Result};
use crate::Scalar;


/// Mean conditional energy of a batch of transition features.
pub trait BatchEnergy {
    fn mean_energy(&self, features: ArrayView2<f64>, sigma: f64) -> Result<f64>;
}

impl<T: Scalar> BatchEnergy for EnergyModel<T> {
    fn mean_energy(&self, features: ArrayView2<f64>, sigma: f64) -> Result<f64> {
        let x = features.mapv(T::of);
        let e = self.conditional_energy_batch(x.view(), sigma, Weights::Ema)?;
        Ok(e.iter().map(|v| v.f64()).sum::<f64>() / e.len() as f64)
    }
}

impl<F: Fn(ArrayView2<f64>, f64) -> f64> BatchEnergy for F {
    fn mean_energy(&self, features: ArrayView2<f64>, sigma: f64) -> Result<f64> {
        Ok(self(features, sigma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Switch {
    Up,
    Down,
    Stay,
}

/// Result of closing one policy-update cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cycle {
    /// First cycle at a level: its mean energy became the baseline.
    Armed { baseline: f64 },
    Decided { progress: f64, switch: Switch, old_sigma: f64, new_sigma: f64 },
}

/// Baselines closer to zero than this are treated as this magnitude.
pub const MIN_BASELINE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealingController {
    scale: NoiseScale,
    level: usize,
    baseline: Option<f64>,
    alpha: f64,
    buffer: Vec<[f64; 4]>,
}

impl AnnealingController {
    pub fn new(scale: NoiseScale, alpha: f64) -> Result<Self> {
        AnnealingController::starting_at(scale, alpha, 0)
    }

    pub fn starting_at(scale: NoiseScale, alpha: f64, level: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("annealing threshold must be positive, got {alpha}")));
        }
        if level >= scale.len() {
            return Err(Error::InvalidArgument(format!("start level {level} out of range")));
        }
        Ok(AnnealingController {
            scale,
            level,
            baseline: None,
            alpha,
            buffer: Vec::new(),
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn current_sigma(&self) -> f64 {
        self.scale.sigma(self.level)
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn buffer(&self) -> &[[f64; 4]] {
        &self.buffer
    }

    pub fn record(&mut self, transitions: &[[f64; 4]]) {
        self.buffer.extend_from_slice(transitions);
    }

    pub fn record_features(&mut self, features: ArrayView2<f64>) -> Result<()> {
        if features.ncols() != 4 {
            return Err(Error::dim("annealing transition", 4, features.ncols()));
        }
        self.buffer.extend(features.rows().into_iter().map(|r| [r[0], r[1], r[2], r[3]]));
        Ok(())
    }

    fn mean_energy(&self, energy: &dyn BatchEnergy) -> Result<f64> {
        if self.buffer.is_empty() {
            return Err(Error::Empty("annealing buffer"));
        }
        let x = Array2::from_shape_fn((self.buffer.len(), 4), |(i, j)| self.buffer[i][j]);
        let m = energy.mean_energy(x.view(), self.current_sigma())?;
        if !m.is_finite() {
            return Err(Error::NonFinite("annealing energy".into()));
        }
        Ok(m)
    }

    /// Relative change of the buffer's mean energy against the baseline.
    /// Dividing by the baseline's magnitude keeps the sign meaningful when
    /// energies are negative; for positive baselines this is `mean / b - 1`.
    pub fn progress(&self, energy: &dyn BatchEnergy) -> Result<f64> {
        let baseline = self
            .baseline
            .ok_or_else(|| Error::InvalidArgument("annealing baseline is not armed".into()))?;
        Ok(relative_progress(self.mean_energy(energy)?, baseline))
    }

    /// Moves one level on `|progress| > alpha` (clamped at both ends),
    /// disarming the baseline on a move. The buffer is always cleared.
    pub fn maybe_switch(&mut self, progress: f64) -> Switch {
        self.buffer.clear();
        let last = self.scale.len() - 1;
        let switch = if progress > self.alpha && self.level < last {
            self.level += 1;
            Switch::Up
        } else if progress < -self.alpha && self.level > 0 {
            self.level -= 1;
            Switch::Down
        } else {
            Switch::Stay
        };
        if switch != Switch::Stay {
            self.baseline = None;
        }
        switch
    }

    /// End of a policy-update cycle: arms the baseline on the first cycle at
    /// a level, otherwise measures progress and possibly switches.
    pub fn end_cycle(&mut self, energy: &dyn BatchEnergy) -> Result<Cycle> {
        if self.baseline.is_none() {
            let baseline = self.mean_energy(energy)?;
            self.baseline = Some(baseline);
            self.buffer.clear();
            return Ok(Cycle::Armed { baseline });
        }
        let progress = self.progress(energy)?;
        let old_sigma = self.current_sigma();
        let switch = self.maybe_switch(progress);
        Ok(Cycle::Decided {
            progress,
            switch,
            old_sigma,
            new_sigma: self.current_sigma(),
        })
    }
}

pub fn relative_progress(mean: f64, baseline: f64) -> f64 {
    (mean - baseline) / baseline.abs().max(MIN_BASELINE)
}

/// A level change to append to the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub iter: usize,
    pub up: bool,
    pub old_sigma: f64,
    pub new_sigma: f64,
    pub progress: f64,
}

impl SwitchEvent {
    pub fn from_cycle(iter: usize, cycle: &Cycle) -> Option<Self> {
        match *cycle {
            Cycle::Decided { progress, switch, old_sigma, new_sigma } if switch != Switch::Stay => Some(SwitchEvent {
                iter,
                up: switch == Switch::Up,
                old_sigma,
                new_sigma,
                progress,
            }),
            _ => None,
        }
    }

    pub fn event(&self) -> &'static str {
        if self.up {
            "switch_up"
        } else {
            "switch_down"
        }
    }
}

pub fn write_events_csv(events: &[SwitchEvent], mut out: impl Write) -> Result<()> {
    writeln!(out, "iter,event,old_sigma,new_sigma,progress")?;
    for e in events {
        writeln!(out, "{},{},{},{},{}", e.iter, e.event(), e.old_sigma, e.new_sigma, e.progress)?;
    }
    Ok(())
}
