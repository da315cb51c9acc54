use crate::error::{Error, Result};

/// Geometric sequence of perturbation standard deviations, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseScale {
    sigmas: Vec<f64>,
}

impl NoiseScale {
    /// `sigmas[k] = sigma_max * r^k` with `r = (sigma_min / sigma_max)^(1/(L-1))`.
    pub fn geometric(sigma_max: f64, sigma_min: f64, levels: usize) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_max > sigma_min && sigma_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise scale needs sigma_max > sigma_min > 0, got {sigma_max} and {sigma_min}"
            )));
        }
        if levels < 2 {
            return Err(Error::InvalidArgument(format!("noise scale needs at least 2 levels, got {levels}")));
        }
        let ratio = (sigma_min / sigma_max).powf(1.0 / (levels - 1) as f64);
        let mut sigmas: Vec<f64> = (0..levels).map(|k| sigma_max * ratio.powi(k as i32)).collect();
        // Pin the endpoints exactly.
        sigmas[0] = sigma_max;
        sigmas[levels - 1] = sigma_min;
        Ok(NoiseScale { sigmas })
    }

    /// Rebuilds a scale from stored values, checking the geometric invariant.
    pub fn from_sigmas(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.len() < 2 {
            return Err(Error::InvalidArgument("noise scale needs at least 2 levels".into()));
        }
        let rebuilt = NoiseScale::geometric(sigmas[0], sigmas[sigmas.len() - 1], sigmas.len())?;
        let consistent = rebuilt
            .sigmas
            .iter()
            .zip(&sigmas)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
        if !consistent {
            return Err(Error::InvalidArgument("stored sigmas are not geometric".into()));
        }
        Ok(NoiseScale { sigmas })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sigma(&self, level: usize) -> f64 {
        self.sigmas[level]
    }

    pub fn max(&self) -> f64 {
        self.sigmas[0]
    }

    pub fn min(&self) -> f64 {
        self.sigmas[self.sigmas.len() - 1]
    }

    /// Index of the level whose sigma is closest to `sigma` in log space.
    pub fn nearest_level(&self, sigma: f64) -> usize {
        let target = sigma.ln();
        (0..self.len())
            .min_by(|&a, &b| {
                let da = (self.sigmas[a].ln() - target).abs();
                let db = (self.sigmas[b].ln() - target).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_scale_endpoints_and_offset_five() {
        let s = NoiseScale::geometric(20.0, 0.01, 50).unwrap();
        assert_eq!(s.sigma(0), 20.0);
        assert_eq!(s.sigma(49), 0.01);
        assert!((s.sigma(5) - 9.2088).abs() < 1e-3, "{}", s.sigma(5));
        assert!((s.sigma(1) - 17.126).abs() < 1e-3, "{}", s.sigma(1));
    }

    #[test]
    fn two_levels_are_the_endpoints() {
        let s = NoiseScale::geometric(3.5, 0.7, 2).unwrap();
        assert_eq!(s.sigmas(), &[3.5, 0.7]);
    }

    #[test]
    fn invalid_orderings_error() {
        assert!(NoiseScale::geometric(0.01, 20.0, 50).is_err());
        assert!(NoiseScale::geometric(1.0, 1.0, 5).is_err());
        assert!(NoiseScale::geometric(1.0, 0.0, 5).is_err());
        assert!(NoiseScale::geometric(1.0, 0.5, 1).is_err());
    }

    #[test]
    fn stored_sigmas_are_validated() {
        let s = NoiseScale::geometric(20.0, 0.01, 50).unwrap();
        assert_eq!(NoiseScale::from_sigmas(s.sigmas().to_vec()).unwrap(), s);
        assert!(NoiseScale::from_sigmas(vec![3.0, 2.0, 0.1]).is_err());
    }

    #[test]
    fn nearest_level_lookup() {
        let s = NoiseScale::geometric(20.0, 0.01, 50).unwrap();
        assert_eq!(s.nearest_level(20.0), 0);
        assert_eq!(s.nearest_level(9.2), 5);
        assert_eq!(s.nearest_level(1e-5), 49);
    }

    proptest! {
        #[test]
        fn ratio_is_constant(max in 0.5f64..100.0, frac in 1e-4f64..0.9, levels in 2usize..80) {
            let s = NoiseScale::geometric(max, max * frac, levels).unwrap();
            let r0 = s.sigma(1) / s.sigma(0);
            for k in 0..levels - 1 {
                prop_assert!((s.sigma(k + 1) / s.sigma(k) - r0).abs() < 1e-12);
                prop_assert!(s.sigma(k + 1) < s.sigma(k));
            }
        }
    }
}
