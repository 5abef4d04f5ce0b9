use crate::deck::RockSpec;

/// Linear rock compaction around a reference pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rock {
    pub p_ref: f64,
    pub compressibility: f64,
}

/// Porosity and pore volume of one cell with `∂V_p/∂P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RockState {
    pub phi: f64,
    pub vp: f64,
    pub dvp_dp: f64,
}

impl Rock {
    pub fn new(spec: &RockSpec) -> Rock {
        Rock {
            p_ref: spec.p_ref,
            compressibility: spec.compressibility,
        }
    }

    /// `None` when the compacted porosity is not positive.
    pub fn update(&self, p: f64, phi0: f64, bulk_volume: f64) -> Option<RockState> {
        let phi = phi0 * (1.0 + self.compressibility * (p - self.p_ref));
        if !(phi > 0.0) {
            return None;
        }
        Some(RockState {
            phi,
            vp: bulk_volume * phi,
            dvp_dp: bulk_volume * phi0 * self.compressibility,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incompressible_rock() {
        let r = Rock { p_ref: 1e7, compressibility: 0.0 };
        assert_eq!(r.update(3e7, 0.2, 10.0).unwrap().phi, 0.2);
        assert_eq!(r.update(3e7, 0.2, 10.0).unwrap().dvp_dp, 0.0);
    }

    #[test]
    fn compaction_hand_value() {
        let r = Rock { p_ref: 1e7, compressibility: 1e-9 };
        let s = r.update(2e7, 0.2, 1000.0).unwrap();
        approx::assert_relative_eq!(s.phi, 0.202, max_relative = 1e-14);
        approx::assert_relative_eq!(s.dvp_dp, 1000.0 * 0.2 * 1e-9, max_relative = 1e-14);
    }

    #[test]
    fn non_physical_porosity() {
        let r = Rock { p_ref: 1e7, compressibility: 1e-6 };
        assert!(r.update(1e3, 0.2, 1.0).is_none());
    }
}
