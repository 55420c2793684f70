//! Configs shipped with the binary.

pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

impl Preset {
    /// First comment line of the file.
    pub fn description(&self) -> &'static str {
        self.text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .map(str::trim)
            .unwrap_or("")
    }
}

macro_rules! preset {
    ($name:literal) => {
        Preset {
            name: $name,
            text: include_str!(concat!("../presets/", $name, ".toml")),
        }
    };
    (sweep $name:literal) => {
        Preset {
            name: $name,
            text: include_str!(concat!("../presets/sweeps/", $name, ".toml")),
        }
    };
}

pub const RUN_PRESETS: &[Preset] = &[
    preset!("sfplus-quadratic"),
    preset!("sfplus-1000tpp"),
    preset!("sfplus-polyak-valley"),
    preset!("sfplus-c-warmup"),
    preset!("sfplus-valley-fit"),
    preset!("sf-quadratic"),
    preset!("adamw-linear-decay"),
    preset!("adamw-wsd"),
    preset!("adamc-full-mlp"),
];

pub const SWEEP_PRESETS: &[Preset] = &[preset!(sweep "polyak-vs-grid"), preset!(sweep "momentum-lr")];

pub fn get(name: &str) -> Option<&'static str> {
    RUN_PRESETS.iter().find(|p| p.name == name).map(|p| p.text)
}

pub fn get_sweep(name: &str) -> Option<&'static str> {
    SWEEP_PRESETS.iter().find(|p| p.name == name).map(|p| p.text)
}
