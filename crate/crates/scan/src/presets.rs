//! Figure presets shipped with the binary.

use crate::config::ScanConfig;
use crate::error::ScanError;

pub const PRESETS: [(&str, &str); 7] = [
    ("fig1b", include_str!("../../../presets/fig1b.json")),
    ("fig1c", include_str!("../../../presets/fig1c.json")),
    ("fig2", include_str!("../../../presets/fig2.json")),
    ("fig3", include_str!("../../../presets/fig3.json")),
    ("fig4a", include_str!("../../../presets/fig4a.json")),
    ("fig4b", include_str!("../../../presets/fig4b.json")),
    ("fig4c", include_str!("../../../presets/fig4c.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

pub fn preset(name: &str) -> Result<ScanConfig, ScanError> {
    let text = PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1)
        .ok_or_else(|| {
            ScanError::Config(format!(
                "unknown preset {name:?}; available: {}",
                names().collect::<Vec<_>>().join(", ")
            ))
        })?;
    ScanConfig::from_json(text)
}
