use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// A CSV table written to a file or to stdout.
pub struct Table {
    writer: csv::Writer<Box<dyn Write>>,
    path: PathBuf,
}

impl Table {
    pub fn create(path: Option<&Path>, header: &[&str]) -> Result<Self, CliError> {
        let (sink, path): (Box<dyn Write>, PathBuf) = match path {
            Some(p) => {
                let file = File::create(p).map_err(|source| CliError::Io { path: p.into(), source })?;
                (Box::new(std::io::BufWriter::new(file)), p.into())
            }
            None => (Box::new(std::io::stdout().lock()), PathBuf::from("<stdout>")),
        };
        let mut table = Table { writer: csv::WriterBuilder::new().has_headers(false).from_writer(sink), path };
        table.writer.write_record(header).map_err(|e| table.csv_error(e))?;
        Ok(table)
    }

    fn csv_error(&self, source: csv::Error) -> CliError {
        CliError::Csv { path: self.path.clone(), source }
    }

    pub fn row(&mut self, values: &[f64]) -> Result<(), CliError> {
        self.writer.serialize(values).map_err(|e| self.csv_error(e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|source| CliError::Io { path: self.path.clone(), source })
    }
}

/// `out/run.csv` → `out/run_<suffix>.csv`.
pub fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}
