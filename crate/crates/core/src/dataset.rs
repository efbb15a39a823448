//! Schema, integer-coded tables, CSV ingestion and role labelling.
//!
//! Every column is coded independently: distinct cell values receive
//! consecutive integer codes in order of first appearance. Empty cells are
//! missing values and share one extra code appended after all observed
//! values of that column.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Protected,
    Admissible,
    Outcome,
    #[default]
    Unlabeled,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Protected => "protected",
            Role::Admissible => "admissible",
            Role::Outcome => "outcome",
            Role::Unlabeled => "unlabeled",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub domain_size: usize,
    pub role: Role,
    /// Cell text for each code. Empty for tables that were never loaded from
    /// text; codes are then written back as numbers.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

impl AttributeSpec {
    pub fn new(name: impl Into<String>, domain_size: usize, role: Role) -> Self {
        AttributeSpec {
            name: name.into(),
            domain_size,
            role,
            labels: Vec::new(),
        }
    }

    pub fn label(&self, code: u32) -> String {
        self.labels
            .get(code as usize)
            .cloned()
            .unwrap_or_else(|| code.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    attributes: Vec<AttributeSpec>,
    #[serde(default)]
    saturated: bool,
}

impl Schema {
    /// Validates name uniqueness and domain sizes. A domain of size zero is
    /// accepted only so that empty tables can be represented.
    pub fn new(attributes: Vec<AttributeSpec>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, a) in attributes.iter().enumerate() {
            if let Some(prev) = seen.insert(a.name.as_str(), i) {
                return Err(Error::Schema(format!(
                    "duplicate attribute name `{}` at columns {prev} and {i}",
                    a.name
                )));
            }
            if !a.labels.is_empty() && a.labels.len() != a.domain_size {
                return Err(Error::Schema(format!(
                    "attribute `{}` has {} labels for domain size {}",
                    a.name,
                    a.labels.len(),
                    a.domain_size
                )));
            }
        }
        Ok(Schema {
            attributes,
            saturated: false,
        })
    }

    /// Shorthand for tests and generators: unnamed-label attributes.
    pub fn from_parts(parts: &[(&str, usize, Role)]) -> Result<Self> {
        Schema::new(
            parts
                .iter()
                .map(|(n, d, r)| AttributeSpec::new(*n, *d, *r))
                .collect(),
        )
    }

    /// Marks the schema saturated; fails if any attribute is unlabeled.
    pub fn with_saturated(mut self, saturated: bool) -> Result<Self> {
        if saturated {
            if let Some(a) = self.attributes.iter().find(|a| a.role == Role::Unlabeled) {
                return Err(Error::Config(format!(
                    "run declared saturated but attribute `{}` has no role",
                    a.name
                )));
            }
        }
        self.saturated = saturated;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attributes
    }

    pub fn attribute(&self, i: usize) -> Result<&AttributeSpec> {
        self.attributes.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.attributes.len(),
        })
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        self.attributes.iter().map(|a| a.domain_size).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }

    pub fn roles(&self) -> Vec<Role> {
        self.attributes.iter().map(|a| a.role).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn with_role(&self, role: Role) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    /// Same attributes, domains and roles. Labels are not compared.
    pub fn compatible_with(&self, other: &Schema) -> bool {
        self.len() == other.len()
            && self
                .attributes
                .iter()
                .zip(&other.attributes)
                .all(|(a, b)| a.name == b.name && a.domain_size == b.domain_size && a.role == b.role)
    }
}

/// The JSON sidecar naming protected, admissible and outcome attributes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleConfig {
    pub protected: Vec<String>,
    pub admissible: Vec<String>,
    pub outcome: Vec<String>,
    pub saturated: bool,
}

impl RoleConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Resolves the named roles against a header.
    pub fn resolve(&self, header: &[String]) -> Result<Vec<Role>> {
        let mut roles = vec![Role::Unlabeled; header.len()];
        let mut assigned = vec![false; header.len()];
        for (names, role) in [
            (&self.protected, Role::Protected),
            (&self.admissible, Role::Admissible),
            (&self.outcome, Role::Outcome),
        ] {
            for name in names {
                let i = header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::UnknownAttribute(name.clone()))?;
                if assigned[i] {
                    return Err(Error::OverlappingRoles(name.clone()));
                }
                assigned[i] = true;
                roles[i] = role;
            }
        }
        Ok(roles)
    }
}

/// Immutable integer-coded table, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteTable {
    schema: Schema,
    cells: Vec<u32>,
    n_rows: usize,
}

impl DiscreteTable {
    pub fn new(schema: Schema, rows: Vec<Vec<u32>>) -> Result<Self> {
        let d = schema.len();
        let mut cells = Vec::with_capacity(rows.len() * d);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::RaggedRow {
                    row: r,
                    expected: d,
                    found: row.len(),
                });
            }
            cells.extend_from_slice(row);
        }
        DiscreteTable::from_cells(schema, cells)
    }

    /// Builds from a flat row-major buffer.
    pub fn from_cells(schema: Schema, cells: Vec<u32>) -> Result<Self> {
        let d = schema.len();
        if d == 0 {
            if !cells.is_empty() {
                return Err(Error::Schema("cells given for a schema with no attributes".into()));
            }
            return Ok(DiscreteTable {
                schema,
                cells,
                n_rows: 0,
            });
        }
        if !cells.len().is_multiple_of(d) {
            return Err(Error::ShapeMismatch(format!(
                "{} cells is not a multiple of {d} attributes",
                cells.len()
            )));
        }
        let sizes = schema.domain_sizes();
        for (k, &v) in cells.iter().enumerate() {
            let col = k % d;
            if v as usize >= sizes[col] {
                return Err(Error::Schema(format!(
                    "row {} value {v} outside domain of `{}` (size {})",
                    k / d,
                    schema.attributes[col].name,
                    sizes[col]
                )));
            }
        }
        let n_rows = cells.len() / d;
        Ok(DiscreteTable {
            schema,
            cells,
            n_rows,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_attributes(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, r: usize) -> &[u32] {
        let d = self.schema.len();
        &self.cells[r * d..(r + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        let d = self.schema.len().max(1);
        self.cells.chunks_exact(d).take(self.n_rows)
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn column(&self, i: usize) -> Result<Vec<u32>> {
        self.schema.attribute(i)?;
        Ok(self.rows().map(|r| r[i]).collect())
    }

    /// Same rows under a different (compatible) schema, e.g. with roles changed.
    pub fn with_schema(&self, schema: Schema) -> Result<Self> {
        if schema.domain_sizes() != self.schema.domain_sizes() {
            return Err(Error::ShapeMismatch("replacement schema changes domains".into()));
        }
        Ok(DiscreteTable {
            schema,
            cells: self.cells.clone(),
            n_rows: self.n_rows,
        })
    }

    /// Writes the table as CSV, decoding codes through the schema labels.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.schema.attributes.iter().map(|a| a.name.as_str()))?;
        for row in self.rows() {
            let rec: Vec<String> = row
                .iter()
                .zip(&self.schema.attributes)
                .map(|(&v, a)| a.label(v))
                .collect();
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

/// Result of [`load_csv`]: the table plus non-fatal warnings.
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub table: DiscreteTable,
    pub warnings: Vec<String>,
}

pub fn load_csv(path: impl AsRef<Path>, roles: &RoleConfig) -> Result<CsvLoad> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from(file, roles)
}

/// Reads RFC-4180 CSV from any reader; see [`load_csv`].
pub fn load_csv_from<R: std::io::Read>(input: R, roles: &RoleConfig) -> Result<CsvLoad> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let d = header.len();
    let role_vec = roles.resolve(&header)?;

    let mut coders: Vec<ColumnCoder> = (0..d).map(|_| ColumnCoder::default()).collect();
    let mut raw: Vec<Option<u32>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != d {
            return Err(Error::RaggedRow {
                row: r,
                expected: d,
                found: rec.len(),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            raw.push(coders[c].code(field));
        }
    }

    let n_rows = raw.len().checked_div(d).unwrap_or(0);
    let mut warnings = Vec::new();
    if n_rows == 0 {
        warnings.push("csv has a header but no data rows".to_string());
    }

    let attributes: Vec<AttributeSpec> = header
        .iter()
        .zip(&coders)
        .zip(&role_vec)
        .map(|((name, coder), &role)| AttributeSpec {
            name: name.clone(),
            domain_size: coder.domain_size(),
            role,
            labels: coder.labels(),
        })
        .collect();
    let cells: Vec<u32> = raw
        .iter()
        .enumerate()
        .map(|(k, v)| v.unwrap_or_else(|| coders[k % d].missing_code()))
        .collect();
    for (a, coder) in attributes.iter().zip(&coders) {
        if coder.saw_missing {
            warnings.push(format!("attribute `{}` has missing values", a.name));
        }
    }

    let schema = Schema::new(attributes)?.with_saturated(roles.saturated)?;
    let table = DiscreteTable::from_cells(schema, cells)?;
    Ok(CsvLoad { table, warnings })
}

/// Reads a CSV using the coding of an existing schema, as for synthetic
/// output compared against its source. Columns must match the schema by
/// name and order, and every value must be one of its labels.
pub fn load_csv_with_schema(path: impl AsRef<Path>, schema: &Schema) -> Result<DiscreteTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_with_schema_from(file, schema)
}

pub fn load_csv_with_schema_from<R: std::io::Read>(input: R, schema: &Schema) -> Result<DiscreteTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != schema.names() {
        return Err(Error::Schema(format!("header {header:?} does not match {:?}", schema.names())));
    }
    let lookup: Vec<HashMap<String, u32>> = schema
        .attributes
        .iter()
        .map(|a| {
            if a.labels.is_empty() {
                (0..a.domain_size as u32).map(|c| (c.to_string(), c)).collect()
            } else {
                a.labels.iter().enumerate().map(|(c, l)| (l.clone(), c as u32)).collect()
            }
        })
        .collect();
    let mut cells = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, field) in rec.iter().enumerate() {
            let code = lookup[c].get(field).ok_or_else(|| {
                Error::Schema(format!(
                    "row {r}: value {field:?} is outside the domain of `{}`",
                    schema.attributes[c].name
                ))
            })?;
            cells.push(*code);
        }
    }
    DiscreteTable::from_cells(schema.clone(), cells)
}

#[derive(Default)]
struct ColumnCoder {
    codes: HashMap<String, u32>,
    values: Vec<String>,
    saw_missing: bool,
}

impl ColumnCoder {
    fn code(&mut self, field: &str) -> Option<u32> {
        if field.is_empty() {
            self.saw_missing = true;
            return None;
        }
        if let Some(&c) = self.codes.get(field) {
            return Some(c);
        }
        let c = self.values.len() as u32;
        self.codes.insert(field.to_string(), c);
        self.values.push(field.to_string());
        Some(c)
    }

    fn missing_code(&self) -> u32 {
        self.values.len() as u32
    }

    fn domain_size(&self) -> usize {
        self.values.len() + usize::from(self.saw_missing)
    }

    fn labels(&self) -> Vec<String> {
        let mut l = self.values.clone();
        if self.saw_missing {
            l.push(String::new());
        }
        l
    }
}

/// Single-value bucketing: every distinct value is its own bucket.
///
/// Under first-appearance integer coding this is the identity; it exists as a
/// named pass so other bucketing strategies can replace it.
pub fn discretize_single_value(table: &DiscreteTable) -> DiscreteTable {
    table.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reload_with_source_coding() {
        let src = load_csv_from("a,b\nx,1\ny,2\n".as_bytes(), &RoleConfig::default()).unwrap().table;
        let t = load_csv_with_schema_from("a,b\ny,2\ny,1\n".as_bytes(), src.schema()).unwrap();
        assert_eq!(t.cells(), &[1, 1, 1, 0]);
        assert!(load_csv_with_schema_from("a,b\nz,1\n".as_bytes(), src.schema()).is_err());
        assert!(load_csv_with_schema_from("b,a\n1,x\n".as_bytes(), src.schema()).is_err());
    }

    fn load(text: &str, roles: &RoleConfig) -> Result<CsvLoad> {
        load_csv_from(text.as_bytes(), roles)
    }

    #[test]
    fn first_appearance_coding() {
        let l = load("sex\nM\nF\nM\n", &RoleConfig::default()).unwrap();
        assert_eq!(l.table.schema().attribute(0).unwrap().domain_size, 2);
        assert_eq!(l.table.column(0).unwrap(), vec![0, 1, 0]);
        assert!(l.warnings.is_empty());
    }

    #[test]
    fn empty_body_loads_with_warning() {
        let l = load("a,b,c\n", &RoleConfig::default()).unwrap();
        assert_eq!(l.table.n_rows(), 0);
        assert_eq!(l.table.schema().domain_sizes(), vec![0, 0, 0]);
        assert_eq!(l.warnings.len(), 1);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = load("a,b\n1,2\n3\n", &RoleConfig::default()).unwrap_err();
        assert!(matches!(err, Error::RaggedRow { row: 1, expected: 2, found: 1 }));
    }

    #[test]
    fn role_errors() {
        let unknown = RoleConfig {
            protected: vec!["nope".into()],
            ..Default::default()
        };
        assert!(matches!(
            load("a,b\n1,2\n", &unknown),
            Err(Error::UnknownAttribute(_))
        ));
        let overlap = RoleConfig {
            protected: vec!["a".into()],
            outcome: vec!["a".into()],
            ..Default::default()
        };
        assert!(matches!(
            load("a,b\n1,2\n", &overlap),
            Err(Error::OverlappingRoles(_))
        ));
    }

    #[test]
    fn saturated_requires_full_labelling() {
        let cfg = RoleConfig {
            protected: vec!["a".into()],
            outcome: vec!["b".into()],
            saturated: true,
            ..Default::default()
        };
        assert!(matches!(load("a,b,c\n1,2,3\n", &cfg), Err(Error::Config(_))));
        let ok = load("a,b\n1,2\n", &cfg).unwrap();
        assert!(ok.table.schema().is_saturated());
    }

    #[test]
    fn adult_style_roles() {
        let header = "age,workclass,education,marital,occupation,relationship,race,sex,capital-gain,capital-loss,hours-per-week,native-country,fnlwgt,income";
        let row = "39,State-gov,Bachelors,Never-married,Adm-clerical,Not-in-family,White,Male,2174,0,40,United-States,77516,<=50K";
        let cfg = RoleConfig {
            protected: vec!["sex".into(), "race".into(), "native-country".into()],
            admissible: vec![
                "workclass".into(),
                "education".into(),
                "occupation".into(),
                "capital-gain".into(),
                "capital-loss".into(),
                "hours-per-week".into(),
            ],
            outcome: vec!["income".into()],
            saturated: false,
        };
        let l = load(&format!("{header}\n{row}\n"), &cfg).unwrap();
        let s = l.table.schema();
        assert_eq!(s.len(), 14);
        assert_eq!(s.with_role(Role::Protected).len(), 3);
        assert_eq!(s.with_role(Role::Outcome).len(), 1);
        assert_eq!(s.with_role(Role::Admissible).len(), 6);
    }

    #[test]
    fn missing_values_get_trailing_code() {
        let l =load("a,b\nx,1\n,1\ny,2\n", &RoleConfig::default()).unwrap();
        let a = l.table.schema().attribute(0).unwrap();
        assert_eq!(a.domain_size, 3);
        assert_eq!(a.labels, vec!["x", "y", ""]);
        assert_eq!(l.table.column(0).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn discretize_is_identity_and_counts_distinct_values() {
        let mut text = String::from("v,k\n");
        for i in 0..101 {
            text.push_str(&format!("{},{}\n", i as f64 * 0.5, 7));
        }
        let t = load(&text, &RoleConfig::default()).unwrap().table;
        let d = discretize_single_value(&t);
        assert_eq!(d, t);
        assert_eq!(d.schema().domain_sizes(), vec![101, 1]);
    }

    #[test]
    fn write_then_load_preserves_cells_and_codes() {
        let text = "a,b\n\"x, y\",1\nz,2\n\"x, y\",\n";
        let t = load(text, &RoleConfig::default()).unwrap().table;
        let mut buf = Vec::new();
        t.write_csv_to(&mut buf).unwrap();
        let again = load_csv_from(buf.as_slice(), &RoleConfig::default())
            .unwrap()
            .table;
        assert_eq!(again, t);
    }

    #[test]
    fn table_rejects_out_of_domain() {
        let s = Schema::from_parts(&[("a", 2, Role::Unlabeled)]).unwrap();
        assert!(DiscreteTable::new(s.clone(), vec![vec![2]]).is_err());
        assert!(DiscreteTable::new(s, vec![vec![0, 1]]).is_err());
    }
}
