//! Titles as bandit arms, the catalog they live in, and the run clock.
//!
//! A [`Catalog`] is an immutable snapshot: registering or retiring an arm
//! returns a new catalog. Exited arms stay in the snapshot so that their
//! history remains auditable, but they are never scored or trained on.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmState {
    Active,
    Exited,
}

/// A catalog title acting as one arm of the bandit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitleArm {
    pub title_id: String,
    /// Absolute hours.
    pub launch_time: f64,
    pub marketing_class: String,
    pub content_category: String,
    pub state: ArmState,
}

impl TitleArm {
    pub fn new(
        title_id: impl Into<String>,
        launch_time: f64,
        marketing_class: impl Into<String>,
        content_category: impl Into<String>,
    ) -> Self {
        Self {
            title_id: title_id.into(),
            launch_time,
            marketing_class: marketing_class.into(),
            content_category: content_category.into(),
            state: ArmState::Active,
        }
    }

    pub fn is_active(&self) -> bool {
        self.state == ArmState::Active
    }

    /// Hours elapsed between launch and `now`; errors if `now` precedes launch.
    pub fn hours_since_launch(&self, now: f64) -> Result<f64> {
        let h = now - self.launch_time;
        if h < 0.0 {
            return Err(Error::EventBeforeLaunch {
                event: now,
                launch: self.launch_time,
            });
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub arms: Vec<TitleArm>,
    /// Absolute hours of the snapshot.
    pub as_of: f64,
}

impl Catalog {
    pub fn new(as_of: f64) -> Self {
        Self {
            arms: Vec::new(),
            as_of,
        }
    }

    pub fn get(&self, title_id: &str) -> Option<&TitleArm> {
        self.arms.iter().find(|a| a.title_id == title_id)
    }

    /// Active arms in catalog order.
    pub fn active(&self) -> impl Iterator<Item = &TitleArm> {
        self.arms.iter().filter(|a| a.is_active())
    }

    pub fn active_ids(&self) -> Vec<String> {
        self.active().map(|a| a.title_id.clone()).collect()
    }

    pub fn len_active(&self) -> usize {
        self.active().count()
    }

    /// Adds `arm` as active. A previously exited title with the same id is
    /// replaced by the new record.
    pub fn register_arm(&self, mut arm: TitleArm) -> Result<Catalog> {
        arm.state = ArmState::Active;
        let mut next = self.clone();
        match next.arms.iter_mut().find(|a| a.title_id == arm.title_id) {
            Some(existing) if existing.is_active() => {
                return Err(Error::DuplicateArm(arm.title_id));
            }
            Some(existing) => *existing = arm,
            None => next.arms.push(arm),
        }
        Ok(next)
    }

    pub fn retire_arm(&self, title_id: &str) -> Result<Catalog> {
        let mut next = self.clone();
        match next.arms.iter_mut().find(|a| a.title_id == title_id) {
            Some(a) if a.is_active() => a.state = ArmState::Exited,
            Some(_) => return Err(Error::InactiveArm(title_id.to_string())),
            None => return Err(Error::UnknownArm(title_id.to_string())),
        }
        Ok(next)
    }

    pub fn with_as_of(&self, as_of: f64) -> Catalog {
        Catalog {
            arms: self.arms.clone(),
            as_of,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Catalog> {
        let catalog: Catalog = serde_json::from_str(s)?;
        let mut seen = std::collections::BTreeSet::new();
        for a in &catalog.arms {
            if !seen.insert(a.title_id.as_str()) {
                return Err(Error::DuplicateArm(a.title_id.clone()));
            }
        }
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Catalog> {
        Catalog::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Incremental training cadence: run `k` happens at `start + k * period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunClock {
    pub run_index: u32,
    pub run_hour: f64,
    pub period: f64,
}

impl RunClock {
    pub fn new(start: f64, period: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "training period must be positive, got {period}"
            )));
        }
        Ok(Self {
            run_index: 0,
            run_hour: start,
            period,
        })
    }

    /// Clock of run `k` given run 0 at `start`.
    pub fn at(start: f64, period: f64, k: u32) -> Result<Self> {
        let mut c = Self::new(start, period)?;
        c.run_index = k;
        c.run_hour = start + f64::from(k) * period;
        Ok(c)
    }

    pub fn next(&self) -> Self {
        Self {
            run_index: self.run_index + 1,
            run_hour: self.run_hour + self.period,
            period: self.period,
        }
    }

    /// The data window `(run_hour - period, run_hour]` that this run trains on.
    pub fn window(&self) -> (f64, f64) {
        (self.run_hour - self.period, self.run_hour)
    }
}
