//! Delimiter-separated ingestion driven by a JSON schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ndarray::Array2;

use crate::error::{Error, Result};

use super::{Dataset, GroupLabels, Target};

fn default_delimiter() -> char {
    ','
}

fn default_missing() -> Vec<String> {
    vec![String::new(), "?".into(), "NA".into()]
}

/// Declarative description of how to read one tabular file.
///
/// `positive_class` present means the target is a binary classification
/// label; absent means the target column holds regression reals.
/// Columns listed in `categorical` are one-hot expanded; columns in
/// `ignore` are read past; everything else must parse as a number.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    /// Name of the target column.
    pub target: String,
    /// Target value mapped to label 1 (classification only).
    #[serde(default)]
    pub positive_class: Option<String>,
    /// Name of the protected-attribute column.
    pub protected: String,
    /// Columns to one-hot encode (one indicator per observed category).
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Drop rows containing missing cells instead of erroring.
    #[serde(default)]
    pub drop_missing: bool,
    /// Field delimiter.
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Columns to skip entirely.
    #[serde(default)]
    pub ignore: Vec<String>,
    /// Cell values treated as missing.
    #[serde(default = "default_missing")]
    pub missing_values: Vec<String>,
    /// Keep the protected column in the feature matrix (one-hot encoded)
    /// in addition to using it for group labels.
    #[serde(default)]
    pub keep_protected: bool,
}

impl SchemaConfig {
    /// Parse a schema from its JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Document {
            kind: "schema",
            reason: e.to_string(),
        })
    }

    /// Read and parse a schema file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn is_missing(&self, cell: &str) -> bool {
        self.missing_values.iter().any(|m| m == cell)
    }
}

/// Result of loading a table: the dataset plus ingestion bookkeeping.
#[derive(Debug)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    /// Rows discarded because of missing cells (`drop_missing` only).
    pub dropped_rows: usize,
    /// Human-readable ingestion warnings.
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Target,
    Protected,
    Categorical,
    Numeric,
    Ignored,
}

/// Load a delimiter-separated file with a header row.
///
/// Categorical columns expand in place to one indicator column per
/// observed category (first-appearance order, named `column_category`);
/// numeric columns pass through; the target and protected columns leave
/// the feature matrix (unless `keep_protected`), and the protected column
/// maps to group labels 1..G in first-appearance order.
pub fn load_table(path: &Path, schema: &SchemaConfig) -> Result<LoadOutcome> {
    let mut delimiter_buf = [0u8; 4];
    let delimiter_str = schema.delimiter.encode_utf8(&mut delimiter_buf);
    if delimiter_str.len() != 1 {
        return Err(Error::Document {
            kind: "schema",
            reason: format!("delimiter {:?} is not a single byte", schema.delimiter),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_str.as_bytes()[0])
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.display().to_string(),
                source,
            },
            other => Error::Document {
                kind: "table",
                reason: format!("{other:?}"),
            },
        })?;

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Document {
            kind: "table",
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();

    let find = |name: &String, role: &'static str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.clone(),
                role,
            })
    };

    let target_col = find(&schema.target, "target")?;
    let protected_col = find(&schema.protected, "protected")?;
    for c in &schema.categorical {
        find(c, "categorical")?;
    }
    for c in &schema.ignore {
        find(c, "ignore")?;
    }

    let mut roles = vec![Role::Numeric; header.len()];
    for (i, name) in header.iter().enumerate() {
        if schema.ignore.contains(name) {
            roles[i] = Role::Ignored;
        }
        if schema.categorical.contains(name) {
            roles[i] = Role::Categorical;
        }
        if i == protected_col {
            roles[i] = Role::Protected;
        }
        if i == target_col {
            roles[i] = Role::Target;
        }
    }

    // First pass: keep complete rows as raw strings.
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut dropped = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Document {
            kind: "table",
            reason: format!("row {}: {e}", row_idx + 2),
        })?;
        let cells: Vec<String> = record.iter().map(str::to_string).collect();
        let missing = cells
            .iter()
            .zip(&roles)
            .any(|(cell, role)| *role != Role::Ignored && schema.is_missing(cell));
        if missing {
            dropped += 1;
            continue;
        }
        rows.push(cells);
    }
    if dropped > 0 && !schema.drop_missing {
        return Err(Error::MissingValues { count: dropped });
    }
    if rows.len() < 2 {
        return Err(Error::Document {
            kind: "table",
            reason: format!("only {} usable row(s) after ingestion", rows.len()),
        });
    }

    // Observed categories per categorical column, first-appearance order.
    let mut categories: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for row in &rows {
        for (c, cell) in row.iter().enumerate() {
            let treat_categorical = roles[c] == Role::Categorical
                || (roles[c] == Role::Protected && schema.keep_protected);
            if treat_categorical && !categories[c].iter().any(|v| v == cell) {
                categories[c].push(cell.clone());
            }
        }
    }

    // Output column layout.
    let mut feature_names: Vec<String> = Vec::new();
    let mut layout: Vec<(usize, Role)> = Vec::new(); // (source col, role) per source col kept
    for (c, name) in header.iter().enumerate() {
        match roles[c] {
            Role::Numeric => {
                feature_names.push(name.clone());
                layout.push((c, Role::Numeric));
            }
            Role::Categorical => {
                for cat in &categories[c] {
                    feature_names.push(format!("{name}_{cat}"));
                }
                layout.push((c, Role::Categorical));
            }
            Role::Protected if schema.keep_protected => {
                for cat in &categories[c] {
                    feature_names.push(format!("{name}_{cat}"));
                }
                layout.push((c, Role::Categorical));
            }
            _ => {}
        }
    }

    let n = rows.len();
    let m = feature_names.len();
    let mut features = Array2::zeros((n, m));
    let mut target_raw: Vec<String> = Vec::with_capacity(n);
    let mut protected_raw: Vec<String> = Vec::with_capacity(n);

    for (i, row) in rows.iter().enumerate() {
        let mut out_col = 0usize;
        for &(c, role) in &layout {
            match role {
                Role::Numeric => {
                    let parsed: f64 = row[c].parse().map_err(|_| Error::BadCell {
                        row: i + 2,
                        column: header[c].clone(),
                        reason: format!("expected a number, got {:?}", row[c]),
                    })?;
                    if !parsed.is_finite() {
                        return Err(Error::BadCell {
                            row: i + 2,
                            column: header[c].clone(),
                            reason: "non-finite value".into(),
                        });
                    }
                    features[[i, out_col]] = parsed;
                    out_col += 1;
                }
                Role::Categorical => {
                    let pos = categories[c].iter().position(|v| v == &row[c]).unwrap();
                    features[[i, out_col + pos]] = 1.0;
                    out_col += categories[c].len();
                }
                _ => unreachable!("layout only holds numeric/categorical"),
            }
        }
        target_raw.push(row[target_col].clone());
        protected_raw.push(row[protected_col].clone());
    }

    let target = match &schema.positive_class {
        Some(positive) => {
            let labels = target_raw
                .iter()
                .map(|v| f64::from(u8::from(v == positive)))
                .collect();
            Target::classification(labels)?
        }
        None => {
            let mut values = Vec::with_capacity(n);
            for (i, v) in target_raw.iter().enumerate() {
                let parsed: f64 = v.parse().map_err(|_| Error::BadCell {
                    row: i + 2,
                    column: schema.target.clone(),
                    reason: format!("expected a numeric target, got {v:?}"),
                })?;
                values.push(parsed);
            }
            Target::regression(values)?
        }
    };

    let (groups, group_names) = GroupLabels::from_raw(&protected_raw)?;

    let mut warnings = Vec::new();
    if dropped > 0 {
        warnings.push(format!("dropped {dropped} row(s) with missing values"));
    }
    warnings.push(format!(
        "groups from {:?} in first-appearance order: {}",
        schema.protected,
        group_names
            .iter()
            .enumerate()
            .map(|(i, g)| format!("{}={g}", i + 1))
            .collect::<Vec<_>>()
            .join(", ")
    ));

    let dataset = Dataset::new(
        features,
        feature_names,
        target,
        groups,
        path.display().to_string(),
    )?;
    Ok(LoadOutcome {
        dataset,
        dropped_rows: dropped,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    fn basic_schema() -> SchemaConfig {
        SchemaConfig::from_json(
            r#"{
                "target": "y",
                "positive_class": "yes",
                "protected": "sex",
                "categorical": ["color"]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn one_hot_expansion_partitions_unity() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "t.csv",
            "age,color,sex,y\n30,a,m,yes\n40,b,f,no\n50,a,m,yes\n",
        );
        let out = load_table(&path, &basic_schema()).unwrap();
        let ds = &out.dataset;
        assert_eq!(
            ds.feature_names(),
            &["age".to_string(), "color_a".into(), "color_b".into()]
        );
        for i in 0..3 {
            let sum = ds.features()[[i, 1]] + ds.features()[[i, 2]];
            assert_eq!(sum, 1.0);
        }
        assert_eq!(ds.target().values(), &[1.0, 0.0, 1.0]);
        assert_eq!(ds.groups().values(), &[1, 2, 1]);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "t.csv", "a,b\n1,2\n");
        let err = load_table(&path, &basic_schema()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { .. }));
    }

    #[test]
    fn missing_cells_hard_error_without_drop() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "t.csv",
            "age,color,sex,y\n30,a,m,yes\n?,b,f,no\n50,a,f,no\n",
        );
        let err = load_table(&path, &basic_schema()).unwrap_err();
        assert!(matches!(err, Error::MissingValues { count: 1 }));
    }

    #[test]
    fn missing_cells_dropped_and_counted_when_enabled() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "t.csv",
            "age,color,sex,y\n30,a,m,yes\n?,b,f,no\n50,a,f,no\n40,b,f,yes\n",
        );
        let mut schema = basic_schema();
        schema.drop_missing = true;
        let out = load_table(&path, &schema).unwrap();
        assert_eq!(out.dropped_rows, 1);
        assert_eq!(out.dataset.n_samples(), 3);
        assert!(out.warnings.iter().any(|w| w.contains("dropped 1")));
    }

    #[test]
    fn missing_cell_in_ignored_column_is_fine() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "t.csv",
            "junk,age,color,sex,y\n?,30,a,m,yes\n1,40,b,f,no\n",
        );
        let mut schema = basic_schema();
        schema.ignore = vec!["junk".into()];
        let out = load_table(&path, &schema).unwrap();
        assert_eq!(out.dataset.n_samples(), 2);
        assert_eq!(out.dataset.n_features(), 3); // age + color_a + color_b
    }

    #[test]
    fn single_group_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "t.csv", "age,color,sex,y\n30,a,m,yes\n40,b,m,no\n");
        let err = load_table(&path, &basic_schema()).unwrap_err();
        assert!(matches!(err, Error::GroupCount { present: 1 }));
    }

    #[test]
    fn regression_schema_parses_numeric_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "t.csv", "age,sex,y\n30,m,1.5\n40,f,-2.25\n");
        let schema = SchemaConfig::from_json(
            r#"{"target": "y", "protected": "sex", "categorical": []}"#,
        )
        .unwrap();
        let out = load_table(&path, &schema).unwrap();
        assert_eq!(out.dataset.task(), crate::dataset::TaskKind::Regression);
        assert_eq!(out.dataset.target().values(), &[1.5, -2.25]);
    }

    #[test]
    fn keep_protected_one_hots_the_protected_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "t.csv", "age,sex,y\n30,m,yes\n40,f,no\n");
        let mut schema = SchemaConfig::from_json(
            r#"{"target": "y", "positive_class": "yes", "protected": "sex", "categorical": []}"#,
        )
        .unwrap();
        schema.keep_protected = true;
        let out = load_table(&path, &schema).unwrap();
        assert_eq!(
            out.dataset.feature_names(),
            &["age".to_string(), "sex_m".into(), "sex_f".into()]
        );
        assert_eq!(out.dataset.groups().values(), &[1, 2]);
    }

    #[test]
    fn whitespace_around_cells_is_trimmed() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "t.csv", "age, color, sex, y\n30, a , m, yes\n40, b, f, no\n");
        let out = load_table(&path, &basic_schema()).unwrap();
        assert_eq!(out.dataset.feature_names()[1], "color_a");
    }

    #[test]
    fn custom_delimiter() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "t.tsv", "age;color;sex;y\n30;a;m;yes\n40;b;f;no\n");
        let mut schema = basic_schema();
        schema.delimiter = ';';
        let out = load_table(&path, &schema).unwrap();
        assert_eq!(out.dataset.n_samples(), 2);
    }
}
