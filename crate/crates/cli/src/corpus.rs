//! Corpus directories: `manifest.tsv` listing `source_id<TAB>file` rows, with
//! one VDNA file per sequence next to it.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use videodna_core::VideoDna;

use crate::error::{CliError, CliResult, WithPath};

pub const MANIFEST: &str = "manifest.tsv";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub source_id: String,
    pub file: PathBuf,
}

pub fn is_corpus(path: &Path) -> bool {
    path.join(MANIFEST).is_file()
}

pub fn read_manifest(dir: &Path) -> CliResult<Vec<Entry>> {
    let path = dir.join(MANIFEST);
    let reader = BufReader::new(File::open(&path).at(&path)?);
    let mut entries = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.at(&path)?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, file] = fields[..] else {
            return Err(parse_error(&path, k + 1, "expected source_id<TAB>file"));
        };
        if id.is_empty() || file.is_empty() {
            return Err(parse_error(&path, k + 1, "empty field"));
        }
        entries.push(Entry {
            source_id: id.to_string(),
            file: dir.join(file),
        });
    }
    if entries.is_empty() {
        return Err(parse_error(&path, 0, "manifest lists no sequences"));
    }
    Ok(entries)
}

fn parse_error(path: &Path, line: usize, message: &str) -> CliError {
    CliError::Data {
        path: path.to_path_buf(),
        source: videodna_core::Error::Parse {
            line,
            message: message.into(),
        },
    }
}

pub fn read_dna(path: &Path, source_id: &str) -> CliResult<VideoDna> {
    let reader = BufReader::new(File::open(path).at(path)?);
    VideoDna::read_from(reader, source_id).at(path)
}

/// Reads a single VDNA file, naming it after the file stem.
pub fn read_dna_file(path: &Path) -> CliResult<VideoDna> {
    let id = path
        .file_stem()
        .map_or("query".into(), |s| s.to_string_lossy().into_owned());
    read_dna(path, &id)
}

pub fn write_dna(path: &Path, dna: &VideoDna) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path).at(path)?);
    dna.write_to(&mut w).at(path)?;
    w.flush().at(path)
}

pub fn load(dir: &Path) -> CliResult<Vec<VideoDna>> {
    read_manifest(dir)?
        .iter()
        .map(|e| read_dna(&e.file, &e.source_id))
        .collect()
}

/// Writes `sequences` into `dir` (created if needed), one file per source id.
pub fn save(dir: &Path, sequences: &[VideoDna]) -> CliResult<()> {
    std::fs::create_dir_all(dir).at(dir)?;
    let mut ids = HashSet::new();
    let mut names = HashSet::new();
    let mut rows = Vec::with_capacity(sequences.len());
    for (k, s) in sequences.iter().enumerate() {
        let id = s.source_id();
        if id.is_empty() || id.contains(['\t', '\n', '\r']) {
            return Err(CliError::usage(format!(
                "source id {id:?} cannot be stored in a manifest"
            )));
        }
        if !ids.insert(id) {
            return Err(CliError::usage(format!("duplicate source id {id}")));
        }
        let stem: String = id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "._-".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let mut name = format!("{stem}.vdna");
        if !names.insert(name.clone()) {
            name = format!("{stem}_{k}.vdna");
            names.insert(name.clone());
        }
        write_dna(&dir.join(&name), s)?;
        rows.push((id, name));
    }
    let path = dir.join(MANIFEST);
    let mut w = BufWriter::new(File::create(&path).at(&path)?);
    writeln!(w, "# source_id\tfile").at(&path)?;
    for (id, name) in rows {
        writeln!(w, "{id}\t{name}").at(&path)?;
    }
    w.flush().at(&path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_awkward_ids() {
        let dir = tempfile::tempdir().unwrap();
        let seqs = vec![
            VideoDna::with_rows("a b", vec![vec![1.0, 2.0]]).unwrap(),
            VideoDna::with_rows("a_b", vec![vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap(),
        ];
        save(dir.path(), &seqs).unwrap();
        let back = load(dir.path()).unwrap();
        assert_eq!(back, seqs);
    }

    #[test]
    fn manifest_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join(MANIFEST),
            "# source_id\tfile\nonly-one-field\n",
        )
        .unwrap();
        let e = load(dir.path()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
