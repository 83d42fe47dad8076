//! Built-in scenario presets: the same files live under `presets/` in
//! the repository and are compiled into the binary, so every published
//! table and curve can be regenerated with `--preset <name>` alone.

/// A named, baked-in configuration.
pub struct Preset {
    pub name: &'static str,
    pub ini: &'static str,
}

/// All built-in presets, in publication order.
pub const PRESETS: &[Preset] = &[
    Preset { name: "fig1b", ini: include_str!("../presets/fig1b.ini") },
    Preset { name: "fig2a", ini: include_str!("../presets/fig2a.ini") },
    Preset { name: "fig2b", ini: include_str!("../presets/fig2b.ini") },
    Preset { name: "fig3", ini: include_str!("../presets/fig3.ini") },
    Preset { name: "fig4a", ini: include_str!("../presets/fig4a.ini") },
    Preset { name: "fig4b", ini: include_str!("../presets/fig4b.ini") },
    Preset { name: "fig5a", ini: include_str!("../presets/fig5a.ini") },
    Preset { name: "fig5c", ini: include_str!("../presets/fig5c.ini") },
    Preset { name: "fig6a", ini: include_str!("../presets/fig6a.ini") },
    Preset { name: "fig6b", ini: include_str!("../presets/fig6b.ini") },
    Preset { name: "fig7", ini: include_str!("../presets/fig7.ini") },
    Preset { name: "fig9", ini: include_str!("../presets/fig9.ini") },
    Preset { name: "table1", ini: include_str!("../presets/table1.ini") },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn names() -> String {
    PRESETS.iter().map(|p| p.name).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn every_preset_parses_and_validates() {
        for p in PRESETS {
            let cfg = parse_config(p.ini, None)
                .unwrap_or_else(|e| panic!("preset {}: {e}", p.name));
            assert!(!cfg.curves.is_empty(), "preset {} has no curves", p.name);
        }
    }

    #[test]
    fn preset_names_are_unique() {
        for (i, a) in PRESETS.iter().enumerate() {
            for b in &PRESETS[i + 1..] {
                assert_ne!(a.name, b.name);
            }
        }
    }
}
