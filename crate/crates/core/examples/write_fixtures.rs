//! Regenerate the spec files under scenarios/specs from the built-in fixtures.

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "scenarios/specs".into());
    std::fs::create_dir_all(&dir)?;
    for (name, spec) in ccid_core::fixtures::named() {
        std::fs::write(format!("{dir}/{name}.json"), spec.to_json() + "\n")?;
    }
    Ok(())
}
