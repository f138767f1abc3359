//! Scenarios shipped with the binary.

const BUNDLED: &[(&str, &str)] = &[
    ("bohm_trajectories", include_str!("../scenarios/bohm_trajectories.scn")),
    ("gaussian_kg", include_str!("../scenarios/gaussian_kg.scn")),
    ("kinematics", include_str!("../scenarios/kinematics.scn")),
    ("lowspeed_compare", include_str!("../scenarios/lowspeed_compare.scn")),
    ("plane_wave", include_str!("../scenarios/plane_wave.scn")),
    ("schrodinger_fluid", include_str!("../scenarios/schrodinger_fluid.scn")),
    ("superposition", include_str!("../scenarios/superposition.scn")),
    ("uniform_field", include_str!("../scenarios/uniform_field.scn")),
];

/// Bundled scenario names in sorted order.
pub fn list() -> Vec<&'static str> {
    let mut names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
    names.sort_unstable();
    names
}

/// Source text of a bundled scenario.
pub fn get(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Scenario;

    #[test]
    fn every_bundled_scenario_parses_under_its_own_name() {
        for name in list() {
            let sc = Scenario::parse(get(name).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(sc.name, name);
        }
    }

    #[test]
    fn unknown_name_is_none() {
        assert!(get("no_such_scenario").is_none());
    }
}
