//! Canned planner replies, one plain-text file per task, exactly as a
//! language model would print them: a bracketed list of ("region",
//! "condition") pairs, quirks and all (mixed quote styles, an occasional
//! trailing parenthesis). Lookup is by normalized task name.

/// (normalized key, reply text). Keys are the task names lowercased with all
/// non-alphanumerics removed; see [`normalize_key`].
const FIXTURES: &[(&str, &str)] = &[
    // Tabletop tasks registered in the simulator.
    ("lift", include_str!("../../fixtures/plans/lift.txt")),
    ("pickplacecan", include_str!("../../fixtures/plans/pick-place-can.txt")),
    ("nutround", include_str!("../../fixtures/plans/nut-round.txt")),
    ("canbread", include_str!("../../fixtures/plans/can-bread.txt")),
    ("push", include_str!("../../fixtures/plans/push.txt")),
    ("dialturn", include_str!("../../fixtures/plans/dial-turn.txt")),
    ("draweropen", include_str!("../../fixtures/plans/drawer-open.txt")),
    ("ms3", include_str!("../../fixtures/plans/ms-3.txt")),
    // The two-object nut-and-peg task, gold nut first.
    ("nutassembly", include_str!("../../fixtures/plans/nut-assembly.txt")),
    // Robosuite-style task suite.
    ("rspickplacecan", include_str!("../../fixtures/plans/rs-pick-place-can.txt")),
    ("rspickplacecereal", include_str!("../../fixtures/plans/rs-pick-place-cereal.txt")),
    ("rspickplacemilk", include_str!("../../fixtures/plans/rs-pick-place-milk.txt")),
    ("rspickplacebread", include_str!("../../fixtures/plans/rs-pick-place-bread.txt")),
    ("rspickplacecanbread", include_str!("../../fixtures/plans/rs-pick-place-can-bread.txt")),
    ("rspickplacecerealmilk", include_str!("../../fixtures/plans/rs-pick-place-cereal-milk.txt")),
    ("rsnutassembly", include_str!("../../fixtures/plans/rs-nut-assembly.txt")),
    ("rsnutassemblysquare", include_str!("../../fixtures/plans/rs-nut-assembly-square.txt")),
    ("rsnutassemblyround", include_str!("../../fixtures/plans/rs-nut-assembly-round.txt")),
    ("rslift", include_str!("../../fixtures/plans/rs-lift.txt")),
    ("rsdoor", include_str!("../../fixtures/plans/rs-door.txt")),
    // Meta-World-style task suite.
    ("mwassembly", include_str!("../../fixtures/plans/mw-assembly.txt")),
    ("mwdisassemble", include_str!("../../fixtures/plans/mw-disassemble.txt")),
    ("mwhammer", include_str!("../../fixtures/plans/mw-hammer.txt")),
    ("mwbinpicking", include_str!("../../fixtures/plans/mw-bin-picking.txt")),
    // Kitchen-style task suite.
    ("kmicrowave", include_str!("../../fixtures/plans/k-microwave.txt")),
    ("kslide", include_str!("../../fixtures/plans/k-slide.txt")),
    ("klight", include_str!("../../fixtures/plans/k-light.txt")),
    ("kburner", include_str!("../../fixtures/plans/k-burner.txt")),
    ("kkettle", include_str!("../../fixtures/plans/k-kettle.txt")),
    // Obstructed-workspace task suite.
    ("oslift", include_str!("../../fixtures/plans/os-lift.txt")),
    ("osassembly", include_str!("../../fixtures/plans/os-assembly.txt")),
    ("ospush", include_str!("../../fixtures/plans/os-push.txt")),
];

/// Lowercase and drop every non-alphanumeric character, then collapse the
/// long "kitchen" prefix to its "k" short form so both spellings resolve.
fn normalize_key(task: &str) -> String {
    let key: String = task
        .chars()
        .filter(char::is_ascii_alphanumeric)
        .collect::<String>()
        .to_lowercase();
    match key.strip_prefix("kitchen") {
        Some(rest) if !rest.is_empty() => format!("k{rest}"),
        _ => key,
    }
}

/// The canned reply for a task, if one is registered.
pub(crate) fn scripted_reply(task: &str) -> Option<&'static str> {
    let key = normalize_key(task);
    FIXTURES.iter().find(|(k, _)| *k == key).map(|(_, text)| *text)
}

/// All (key, reply) fixtures, for exhaustive tests.
#[cfg(test)]
pub(crate) fn all_fixtures() -> &'static [(&'static str, &'static str)] {
    FIXTURES
}
