use std::path::Path;

use anyhow::{bail, Result};
use rankreason::docsite::{check_docs, write_docs, DOCS_SEED};

pub fn run(out: &Path, check: bool) -> Result<()> {
    if check {
        let drift = check_docs(out, DOCS_SEED)?;
        if !drift.is_empty() {
            bail!("stale pages in {}: {}", out.display(), drift.join(", "));
        }
        eprintln!("{} is up to date", out.display());
    } else {
        write_docs(out, DOCS_SEED)?;
        eprintln!("wrote reference pages to {}", out.display());
    }
    Ok(())
}
