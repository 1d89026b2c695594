//! Batch driver for `dcap-core`: scenario files in, JSON reports out.

pub mod error;
pub mod run;
pub mod scenario;

use std::fmt::Write;

use dcap_core::homalg::Covering;

pub use error::{CliError, CliResult};
pub use run::{run_scenario, RunReport};
pub use scenario::{validate, Diagnostic, FieldConfig, Overrides, Scenario, OPERATIONS};

/// Example scenarios shipped with the binary, by name.
pub const BUILTIN_SCENARIOS: &[(&str, &str)] = &[
    ("cech_two_cover", include_str!("../scenarios/cech_two_cover.json")),
    ("closed_pushforward", include_str!("../scenarios/closed_pushforward.json")),
    ("connection_tower", include_str!("../scenarios/connection_tower.json")),
    ("cyclic_tower", include_str!("../scenarios/cyclic_tower.json")),
    ("disk_derham", include_str!("../scenarios/disk_derham.json")),
    ("disk_strictness", include_str!("../scenarios/disk_strictness.json")),
    ("division_identity", include_str!("../scenarios/division_identity.json")),
    ("exp_kernel_p", include_str!("../scenarios/exp_kernel_p.json")),
    ("exp_kernel_unit", include_str!("../scenarios/exp_kernel_unit.json")),
    ("kashiwara_restrict", include_str!("../scenarios/kashiwara_restrict.json")),
    ("kashiwara_roundtrip", include_str!("../scenarios/kashiwara_roundtrip.json")),
    ("limit_cokernel", include_str!("../scenarios/limit_cokernel.json")),
    ("perturbed_tower", include_str!("../scenarios/perturbed_tower.json")),
    ("point_pullback", include_str!("../scenarios/point_pullback.json")),
    ("prenuclear_violation", include_str!("../scenarios/prenuclear_violation.json")),
    ("rank1_biduality", include_str!("../scenarios/rank1_biduality.json")),
    ("roos_kx_tower", include_str!("../scenarios/roos_kx_tower.json")),
    ("side_change", include_str!("../scenarios/side_change.json")),
    ("spencer_bidisk", include_str!("../scenarios/spencer_bidisk.json")),
    ("spencer_disk", include_str!("../scenarios/spencer_disk.json")),
    ("tensor_leibniz", include_str!("../scenarios/tensor_leibniz.json")),
];

pub fn builtin_scenario(name: &str) -> Option<&'static str> {
    BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Operations, coverings and example scenarios, in a fixed order.
pub fn list_builtins() -> String {
    let mut out = String::from("operations:\n");
    for op in OPERATIONS {
        writeln!(out, "  {:<16}{}", op.name, op.summary).unwrap();
    }
    out.push_str("coverings:\n");
    for c in Covering::ALL {
        writeln!(out, "  {}", c.id()).unwrap();
    }
    out.push_str("scenarios:\n");
    for (name, _) in BUILTIN_SCENARIOS {
        writeln!(out, "  {name}").unwrap();
    }
    out
}
