//! Configurations shipped in the repository's `presets/` directory, embedded
//! at compile time.

use crate::error::Error;
use crate::model::Config;

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// Names of every shipped preset.
        pub const NAMES: &[&str] = &[$($name),*];

        /// JSON text of a preset.
        pub fn source(name: &str) -> Option<&'static str> {
            match name {
                $($name => Some(include_str!(concat!("../../../presets/", $name, ".json"))),)*
                _ => None,
            }
        }
    };
}

presets!(
    "slowlight_m4",
    "matching_m4",
    "storage_m4",
    "stationary_m4",
    "stationary_m5",
    "fig2_profiles",
    "adiabatic_m4",
);

pub fn load(name: &str) -> Result<Config, Error> {
    let text = source(name)
        .ok_or_else(|| Error::Experiment(format!("unknown preset '{name}'; available: {}", NAMES.join(", "))))?;
    Ok(Config::from_json(text)?)
}
