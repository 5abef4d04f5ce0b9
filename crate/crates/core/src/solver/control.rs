use serde::Serialize;

use crate::deck::SolverConfig;

/// Time-step size state, in days.
#[derive(Debug, Clone, Serialize)]
pub struct TimeControl {
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dp_target: f64,
    pub ds_target: f64,
    pub growth: f64,
    pub cut_factor: f64,
    pub consecutive_cuts: usize,
}

impl TimeControl {
    pub fn new(cfg: &SolverConfig) -> TimeControl {
        TimeControl {
            dt: cfg.dt_init.clamp(cfg.dt_min, cfg.dt_max),
            dt_min: cfg.dt_min,
            dt_max: cfg.dt_max,
            dp_target: cfg.dp_target,
            ds_target: cfg.ds_target,
            growth: cfg.dt_growth,
            cut_factor: cfg.cut_factor,
            consecutive_cuts: 0,
        }
    }

    /// Step size for a step starting at `t` with the next schedule boundary
    /// at `boundary`.
    pub fn step_size(&self, t: f64, boundary: f64) -> f64 {
        self.dt.min(boundary - t)
    }

    /// Next step size from the changes of an accepted step of length `dt`.
    pub fn predict(&self, dt: f64, max_dp: f64, max_ds: f64) -> f64 {
        let mut f = self.growth;
        if max_dp > 0.0 {
            f = f.min(self.dp_target / max_dp);
        }
        if max_ds > 0.0 {
            f = f.min(self.ds_target / max_ds);
        }
        (dt * f).clamp(self.dt_min, self.dt_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tc() -> TimeControl {
        TimeControl::new(&SolverConfig::default())
    }

    #[test]
    fn tiny_changes_double() {
        assert_eq!(tc().predict(1.0, 1.0, 1e-6), 2.0);
    }

    #[test]
    fn saturation_limited() {
        let t = tc();
        assert_eq!(t.predict(1.0, 0.0, 2.0 * t.ds_target), 0.5);
    }

    #[test]
    fn boundary_caps_step() {
        let t = TimeControl { dt: 5.0, ..tc() };
        assert_eq!(t.step_size(8.0, 10.0), 2.0);
    }

    #[test]
    fn clamped_to_bounds() {
        let t = tc();
        assert_eq!(t.predict(t.dt_max, 0.0, 0.0), t.dt_max);
        assert_eq!(t.predict(t.dt_min, 1e12, 0.0), t.dt_min);
    }
}
