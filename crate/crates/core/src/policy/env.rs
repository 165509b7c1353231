use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simworld::{AttemptRecord, Outcome, PlacementAction, MAX_ATTEMPTS};

/// Upper bound of each scaled action coordinate.
pub const ACTION_MAX: f64 = 1000.0;
/// Scaled coordinate that maps to the destination centre.
pub const ACTION_CENTER: f64 = 500.0;
/// Keeps mapped placements strictly inside the open interval (-1, 1).
pub const PLACEMENT_SHRINK: f64 = 0.999;

/// Reward for an attempt: -1 miss, 9 touch without stacking, and
/// `1000 - 100 (k - 1)` for stacking on attempt `k`.
///
/// Panics if `attempt_idx` is outside `1..=10`.
pub fn reward(outcome: Outcome, attempt_idx: u32) -> f64 {
    assert!(
        (1..=MAX_ATTEMPTS as u32).contains(&attempt_idx),
        "attempt index {attempt_idx} outside 1..={MAX_ATTEMPTS}"
    );
    match outcome {
        Outcome::Miss => -1.0,
        Outcome::Touch => 9.0,
        Outcome::Stacked => 1000.0 - 100.0 * f64::from(attempt_idx - 1),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlState {
    pub stack_count: u8,
    /// Stack centre of gravity relative to the destination centre, in
    /// destination half-extent units.
    pub cog_xz: [f64; 2],
}

impl RlState {
    pub const START: RlState = RlState { stack_count: 1, cog_xz: [0.0, 0.0] };

    /// State after `rec`; a stacked theme shifts the CoG to the midpoint of
    /// the two block centres.
    pub fn after(rec: &AttemptRecord) -> Self {
        if rec.supported {
            let p = rec.rel_pos_settled;
            RlState { stack_count: 2, cog_xz: [p[0] / 2.0, p[2] / 2.0] }
        } else {
            RlState::START
        }
    }

    pub fn to_vec(self) -> [f64; 3] {
        [f64::from(self.stack_count), self.cog_xz[0], self.cog_xz[1]]
    }

    pub fn validate(self) -> Result<()> {
        if !(1..=2).contains(&self.stack_count) || !self.cog_xz.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid RL state {self:?}")));
        }
        Ok(())
    }
}

/// Scaled action in `[0, 1000]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlAction(pub [f64; 2]);

impl RlAction {
    /// Clamps raw scaled coordinates into bounds; NaN maps to the centre.
    pub fn clamped(a: [f64; 2]) -> Self {
        RlAction(a.map(|v| if v.is_nan() { ACTION_CENTER } else { v.clamp(0.0, ACTION_MAX) }))
    }

    /// From the network's normalised output, where 0 is the centre and
    /// +-1 the bounds.
    pub fn from_normalized(u: [f64; 2]) -> Self {
        RlAction::clamped(u.map(|v| ACTION_CENTER + v * ACTION_CENTER))
    }

    pub fn normalized(self) -> [f64; 2] {
        self.0.map(|v| (v - ACTION_CENTER) / ACTION_CENTER)
    }

    pub fn to_placement(self) -> PlacementAction {
        let [x, z] = self.normalized().map(|v| v * PLACEMENT_SHRINK);
        PlacementAction::new(x, z).expect("clamped actions map inside (-1, 1)")
    }
}
