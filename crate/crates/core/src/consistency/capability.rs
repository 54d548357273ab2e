use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CapabilityError {
    #[error("cannot read capability table: {0}")]
    Io(#[from] std::io::Error),
    #[error("capability table is malformed: {0}")]
    Format(#[from] serde_json::Error),
    #[error("capability entry {make} {model}: {message}")]
    Invalid { make: String, model: String, message: String },
}

/// What one camera body can physically record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityEntry {
    pub make: String,
    pub model: String,
    pub focal_length_range: [f64; 2],
    pub aperture_range: [f64; 2],
    pub iso_range: [u32; 2],
    pub max_resolution: (u32, u32),
}

impl CapabilityEntry {
    fn check(&self) -> Result<(), String> {
        let [f0, f1] = self.focal_length_range;
        let [a0, a1] = self.aperture_range;
        if !(f0 > 0.0 && f0 <= f1) {
            return Err("focal_length_range must satisfy 0 < min <= max".into());
        }
        if !(a0 > 0.0 && a0 <= a1) {
            return Err("aperture_range must satisfy 0 < min <= max".into());
        }
        if !(self.iso_range[0] > 0 && self.iso_range[0] <= self.iso_range[1]) {
            return Err("iso_range must satisfy 0 < min <= max".into());
        }
        if self.max_resolution.0 == 0 || self.max_resolution.1 == 0 {
            return Err("max_resolution must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CapabilityDb {
    pub cameras: Vec<CapabilityEntry>,
}

const BUNDLED: &str = include_str!("../../data/capabilities.json");

impl CapabilityDb {
    /// The table shipped with the library.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled capability table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, CapabilityError> {
        let db: CapabilityDb = serde_json::from_str(text)?;
        for e in &db.cameras {
            e.check().map_err(|message| CapabilityError::Invalid {
                make: e.make.clone(),
                model: e.model.clone(),
                message,
            })?;
        }
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<Self, CapabilityError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Case- and whitespace-insensitive match on both make and model.
    pub fn lookup(&self, make: &str, model: &str) -> Option<&CapabilityEntry> {
        let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let (make, model) = (norm(make), norm(model));
        self.cameras.iter().find(|e| norm(&e.make) == make && norm(&e.model) == model)
    }
}
