//! Scenario files shipped with the binary.

pub const BUNDLED: &[(&str, &str)] = &[
    ("fig5", include_str!("../scenarios/fig5.ini")),
    ("fig8", include_str!("../scenarios/fig8.ini")),
    ("fig10", include_str!("../scenarios/fig10.ini")),
    ("fig11", include_str!("../scenarios/fig11.ini")),
    ("fig12", include_str!("../scenarios/fig12.ini")),
    ("fig13", include_str!("../scenarios/fig13.ini")),
    ("machine-demo", include_str!("../scenarios/machine-demo.ini")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// First comment line of a bundled scenario.
pub fn description(text: &str) -> &str {
    text.lines().next().and_then(|l| l.strip_prefix('#')).map(str::trim).unwrap_or("")
}
