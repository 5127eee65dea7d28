//! Inputs shared by the pipeline benchmarks.

use sable_core::library::{Fixture, Library};
use sable_core::sable::SableProgram;

/// Every library fixture paired with the program of its entry.
pub fn corpus() -> Vec<(Fixture, SableProgram)> {
    let lib = Library::embedded().expect("embedded library");
    lib.fixtures
        .iter()
        .map(|f| {
            (
                f.clone(),
                lib.entry(&f.entry).expect("entry").program.clone(),
            )
        })
        .collect()
}
