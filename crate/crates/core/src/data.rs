//! Design matrix plus responses, with a train/validation/test role per row.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        }
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Role::Train),
            "validation" | "valid" | "val" => Ok(Role::Validation),
            "test" => Ok(Role::Test),
            other => Err(Error::Data(format!("unknown role `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub roles: Vec<Role>,
    pub standardized: bool,
    /// Where the data came from (a path, or a generator description).
    pub source: String,
}

impl Dataset {
    /// Validates shapes and finiteness; every row gets the train role.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = x.nrows();
        Self::with_roles(x, y, vec![Role::Train; n])
    }

    pub fn with_roles(x: DMatrix<f64>, y: DVector<f64>, roles: Vec<Role>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::Data(format!("need n >= 1 and p >= 1, got {n} x {p}")));
        }
        if y.len() != n {
            return Err(Error::Dimension(format!("X has {n} rows but y has {} entries", y.len())));
        }
        if roles.len() != n {
            return Err(Error::Dimension(format!("X has {n} rows but {} roles were given", roles.len())));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite design entry at row {}, column {}", i % n, i / n)));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite response at row {i}")));
        }
        Ok(Dataset { x, y, roles, standardized: false, source: String::new() })
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn count(&self, role: Role) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }

    /// Rows carrying `role`, all marked with that role.
    pub fn subset(&self, role: Role) -> Result<Dataset> {
        let idx: Vec<usize> = (0..self.n()).filter(|&i| self.roles[i] == role).collect();
        if idx.is_empty() {
            return Err(Error::Data(format!("no rows with role `{}`", role.name())));
        }
        Ok(self.rows(&idx))
    }

    /// The given rows, in order.
    pub fn rows(&self, idx: &[usize]) -> Dataset {
        let x = self.x.select_rows(idx);
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        let roles = idx.iter().map(|&i| self.roles[i]).collect();
        Dataset { x, y, roles, standardized: self.standardized, source: self.source.clone() }
    }

    /// Centers each column and scales it to unit sample standard deviation.
    /// Returns the column means and standard deviations used; constant
    /// columns are centered only.
    pub fn standardize(&mut self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n() as f64;
        let mut means = Vec::with_capacity(self.p());
        let mut sds = Vec::with_capacity(self.p());
        for mut col in self.x.column_iter_mut() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
            let sd = var.sqrt();
            let scale = if sd > 0.0 { sd } else { 1.0 };
            col.iter_mut().for_each(|v| *v = (*v - mean) / scale);
            means.push(mean);
            sds.push(sd);
        }
        self.standardized = true;
        (means, sds)
    }

    /// Errors unless every response is exactly 0 or 1.
    pub fn require_binary(&self) -> Result<()> {
        match self.y.iter().position(|&v| v != 0.0 && v != 1.0) {
            None => Ok(()),
            Some(i) => Err(Error::Data(format!("logistic fitting needs labels in {{0, 1}}; row {i} has {}", self.y[i]))),
        }
    }

    /// Reads CSV with a header row. The last column other than an optional
    /// `role` column is the response.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let role_col = headers.iter().position(|h| h.eq_ignore_ascii_case("role"));
        let value_cols: Vec<usize> = (0..headers.len()).filter(|&i| Some(i) != role_col).collect();
        if value_cols.len() < 2 {
            return Err(Error::Data("CSV needs at least one feature column and a response column".into()));
        }
        let p = value_cols.len() - 1;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut roles = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Data(format!("row {} is short", line + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Data(format!("row {}, column `{}`: {e}", line + 1, &headers[i])))
            };
            for &c in &value_cols[..p] {
                xs.push(field(c)?);
            }
            ys.push(field(value_cols[p])?);
            roles.push(match role_col {
                Some(c) => rec.get(c).unwrap_or("train").parse()?,
                None => Role::Train,
            });
        }
        let n = ys.len();
        if n == 0 {
            return Err(Error::Data("CSV has no data rows".into()));
        }
        let x = DMatrix::from_row_slice(n, p, &xs);
        Self::with_roles(x, DVector::from_vec(ys), roles)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Ok(Self::from_csv_reader(std::io::BufReader::new(file))?.with_source(path.display().to_string()))
    }

    /// Writes `x1..xp,y,role`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.p()).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        header.push("role".into());
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.y[i].to_string());
            rec.push(self.roles[i].name().into());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
