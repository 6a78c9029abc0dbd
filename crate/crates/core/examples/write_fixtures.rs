//! Writes the sample documents used by the docs and the Python smoke test.
//!
//! cargo run -p calcaudit-core --features fixtures --example write_fixtures -- fixtures

use std::path::PathBuf;

use calcaudit::fixtures;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    let files: [(&str, Vec<u8>); 5] = [
        ("cashflow.ods", fixtures::cashflow_ods()),
        ("cashflow.sxc", fixtures::cashflow_sxc()),
        ("nohistory.ods", fixtures::no_history_ods()),
        ("constant.ods", fixtures::constant_equation_ods()),
        ("holiday.ods", fixtures::multi_author_ods(7)),
    ];
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes)?;
        println!("{}", path.display());
    }
    Ok(())
}
