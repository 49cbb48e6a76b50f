//! CSV writers and the small file formats the CLI reads.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

pub type Sink = csv::Writer<Box<dyn Write>>;

/// CSV writer to `path`, or stdout when no path is given.
pub fn sink(path: Option<&Path>) -> Result<Sink> {
    let inner: Box<dyn Write> = match path {
        Some(p) => Box::new(io::BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(inner))
}

pub fn write_weights(path: &Path, w: &[f64]) -> Result<()> {
    let mut out = sink(Some(path))?;
    out.write_record(["link", "weight"])?;
    for (i, v) in w.iter().enumerate() {
        out.write_record([i.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a `link,weight` table; links must be listed as 0..K in order.
pub fn read_weights(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("reading weights {}", path.display()))?;
    let mut w = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let link: usize = rec.get(0).context("missing link column")?.trim().parse()?;
        if link != i {
            bail!(
                "weights file {}: expected link {i}, found {link}",
                path.display()
            );
        }
        w.push(
            rec.get(1)
                .context("missing weight column")?
                .trim()
                .parse()?,
        );
    }
    Ok(w)
}

/// Header `prefix_1, ..., prefix_k`.
pub fn indexed(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn floats(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|x| x.to_string())
}
