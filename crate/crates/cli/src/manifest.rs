use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub const MANIFEST: &str = "manifest.csv";
const HEADER: [&str; 7] = [
    "path", "split", "mobility", "bounded", "graph", "observer", "period",
];

/// One generated data file, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub path: PathBuf,
    pub split: String,
    pub mobility: String,
    pub bounded: bool,
    pub graph: usize,
    pub observer: usize,
    pub period: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<Entry>,
}

impl Manifest {
    pub fn split<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.split == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER)?;
        for e in &self.entries {
            w.write_record([
                e.path.display().to_string(),
                e.split.clone(),
                e.mobility.clone(),
                e.bounded.to_string(),
                e.graph.to_string(),
                e.observer.to_string(),
                e.period.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            bail!(
                "no dataset in {}: {} is missing (run `chanpred gen` first)",
                dir.display(),
                MANIFEST
            );
        }
        let mut r =
            csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
        if r.headers()?.iter().ne(HEADER) {
            bail!("{} has an unexpected header", path.display());
        }
        let mut entries = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.with_context(|| format!("reading {}", path.display()))?;
            let field = |k: usize| rec.get(k).unwrap_or_default();
            let parse_err = || format!("{} line {}: bad field", path.display(), i + 2);
            entries.push(Entry {
                path: PathBuf::from(field(0)),
                split: field(1).to_string(),
                mobility: field(2).to_string(),
                bounded: field(3).parse().with_context(parse_err)?,
                graph: field(4).parse().with_context(parse_err)?,
                observer: field(5).parse().with_context(parse_err)?,
                period: field(6).parse().with_context(parse_err)?,
            });
        }
        Ok(Manifest { entries })
    }
}
