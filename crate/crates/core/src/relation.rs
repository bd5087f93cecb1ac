//! Tables, padded tables with validity semantics, and final result sets.
//!
//! Every value is a 64-bit signed integer; the supported queries need
//! equality predicates and additive aggregates only. A [`PaddedTable`] is
//! the unit of exchange between oblivious operators: `N` rows of which only
//! `T` (marked by the validity column) are genuine output, the rest being
//! indistinguishable fillers. `N` is public; the validity column and `T`
//! are secret and never reach the leakage ledger.

use crate::error::{Error, Result};
use crate::ledger::OpId;
use std::collections::HashMap;
use std::sync::Arc;

pub type Value = i64;
pub type Row = Vec<Value>;
pub type SchemaRef = Arc<Schema>;

/// Ordered, uniquely named integer columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<String>,
}

impl Schema {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Result<Schema> {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        if columns.is_empty() {
            return Err(Error::EmptySchema);
        }
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if !seen.insert(c.clone()) {
                return Err(Error::DuplicateColumn(c.clone()));
            }
        }
        Ok(Schema { columns })
    }

    pub fn shared<S: Into<String>>(columns: Vec<S>) -> Result<SchemaRef> {
        Ok(Arc::new(Self::new(columns)?))
    }

    /// Tuple width `M`.
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Schema of a join output: left columns followed by right columns.
    /// Right-hand names that collide get a `#k` suffix.
    pub fn concat(&self, right: &Schema) -> Schema {
        let mut columns = self.columns.clone();
        for name in &right.columns {
            columns.push(unique_name(&columns, name));
        }
        Schema { columns }
    }

    /// Schema with one appended column (for group-by aggregates), suffixed
    /// on collision.
    pub fn with_appended(&self, name: &str) -> Schema {
        let mut columns = self.columns.clone();
        columns.push(unique_name(&columns, name));
        Schema { columns }
    }
}

fn unique_name(existing: &[String], name: &str) -> String {
    if !existing.iter().any(|c| c == name) {
        return name.to_string();
    }
    let mut k = 2;
    loop {
        let candidate = format!("{name}#{k}");
        if !existing.iter().any(|c| c == &candidate) {
            return candidate;
        }
        k += 1;
    }
}

/// A plaintext relation owned by a data owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    schema: SchemaRef,
    rows: Vec<Row>,
}

impl Table {
    pub fn new(schema: SchemaRef, rows: Vec<Row>) -> Result<Table> {
        for row in &rows {
            if row.len() != schema.width() {
                return Err(Error::RowArity {
                    expected: schema.width(),
                    got: row.len(),
                });
            }
        }
        Ok(Table { schema, rows })
    }

    pub fn schema(&self) -> &SchemaRef {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// An oblivious operator output: `N` rows, a secret validity flag per row.
///
/// Invariants: one flag per row; the true count `T` is the number of set
/// flags, `0 <= T <= N`. The flags are secret — they are carried through
/// resize/shuffle but never disclosed.
///
/// Rows live in one flat row-major buffer (stride = schema width): the
/// resizer permutes and compacts fixed-size chunks of it without touching
/// the allocator per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedTable {
    schema: SchemaRef,
    data: Vec<Value>,
    valid: Vec<bool>,
    origin: OpId,
}

impl PaddedTable {
    pub fn new(schema: SchemaRef, rows: Vec<Row>, valid: Vec<bool>, origin: OpId) -> Result<Self> {
        if rows.len() != valid.len() {
            return Err(Error::KeepLength {
                keep: valid.len(),
                rows: rows.len(),
            });
        }
        let width = schema.width();
        let mut data = Vec::with_capacity(rows.len() * width);
        for row in &rows {
            if row.len() != width {
                return Err(Error::RowArity {
                    expected: width,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(PaddedTable {
            schema,
            data,
            valid,
            origin,
        })
    }

    /// Construct from an already-flat row-major buffer.
    pub fn from_flat(
        schema: SchemaRef,
        data: Vec<Value>,
        valid: Vec<bool>,
        origin: OpId,
    ) -> Result<Self> {
        if data.len() != valid.len() * schema.width() {
            return Err(Error::RowArity {
                expected: valid.len() * schema.width(),
                got: data.len(),
            });
        }
        Ok(PaddedTable {
            schema,
            data,
            valid,
            origin,
        })
    }

    pub fn schema(&self) -> &SchemaRef {
        &self.schema
    }

    pub fn width(&self) -> usize {
        self.schema.width()
    }

    pub fn row(&self, index: usize) -> &[Value] {
        let w = self.width();
        &self.data[index * w..(index + 1) * w]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[Value]> {
        self.data.chunks_exact(self.width())
    }

    /// Materialized row vectors (test and display convenience).
    pub fn rows_vec(&self) -> Vec<Row> {
        self.iter_rows().map(<[Value]>::to_vec).collect()
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn origin(&self) -> OpId {
        self.origin
    }

    /// Public size `N`.
    pub fn public_size(&self) -> usize {
        self.valid.len()
    }

    /// True count `T` (secret; for simulator-internal use and tests only).
    pub fn true_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// The result this padded table stands for: exactly the valid rows.
    /// Pure projection; disclosure happens in `operators::to_result`.
    pub fn induced_result(&self) -> ResultSet {
        let rows = self
            .iter_rows()
            .zip(&self.valid)
            .filter(|(_, v)| **v)
            .map(|(r, _)| r.to_vec())
            .collect();
        ResultSet {
            schema: Arc::clone(&self.schema),
            rows,
        }
    }

    pub(crate) fn into_parts(self) -> (SchemaRef, Vec<Value>, Vec<bool>, OpId) {
        (self.schema, self.data, self.valid, self.origin)
    }
}

/// Final query output with fillers removed. Row order is not significant;
/// comparisons are multiset comparisons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    schema: SchemaRef,
    rows: Vec<Row>,
}

impl ResultSet {
    pub fn new(schema: SchemaRef, rows: Vec<Row>) -> ResultSet {
        ResultSet { schema, rows }
    }

    pub fn schema(&self) -> &SchemaRef {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows sorted lexicographically, for stable file output.
    pub fn sorted_rows(&self) -> Vec<Row> {
        let mut rows = self.rows.clone();
        rows.sort_unstable();
        rows
    }
}

/// Order-insensitive multiset equality over two result sets.
pub fn multiset_equal(a: &ResultSet, b: &ResultSet) -> Result<bool> {
    if a.schema.columns() != b.schema.columns() {
        return Err(Error::SchemaMismatch(format!(
            "{:?} vs {:?}",
            a.schema.columns(),
            b.schema.columns()
        )));
    }
    if a.rows.len() != b.rows.len() {
        return Ok(false);
    }
    let mut counts: HashMap<&Row, i64> = HashMap::new();
    for row in &a.rows {
        *counts.entry(row).or_insert(0) += 1;
    }
    for row in &b.rows {
        match counts.get_mut(row) {
            Some(c) => *c -= 1,
            None => return Ok(false),
        }
    }
    Ok(counts.values().all(|c| *c == 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema2() -> SchemaRef {
        Schema::shared(vec!["a", "b"]).unwrap()
    }

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        assert!(matches!(
            Schema::new(vec!["x", "x"]),
            Err(Error::DuplicateColumn(_))
        ));
        assert!(matches!(
            Schema::new(Vec::<String>::new()),
            Err(Error::EmptySchema)
        ));
    }

    #[test]
    fn concat_renames_collisions() {
        let left = Schema::new(vec!["k", "v"]).unwrap();
        let right = Schema::new(vec!["k", "w"]).unwrap();
        let joined = left.concat(&right);
        assert_eq!(joined.columns(), ["k", "v", "k#2", "w"]);
    }

    #[test]
    fn table_checks_arity() {
        let err = Table::new(schema2(), vec![vec![1, 2, 3]]);
        assert!(matches!(err, Err(Error::RowArity { .. })));
    }

    #[test]
    fn multiset_identical_and_permuted() {
        let s = schema2();
        let a = ResultSet::new(Arc::clone(&s), vec![vec![1, 2], vec![3, 4]]);
        let b = ResultSet::new(Arc::clone(&s), vec![vec![3, 4], vec![1, 2]]);
        assert!(multiset_equal(&a, &a).unwrap());
        assert!(multiset_equal(&a, &b).unwrap());
    }

    #[test]
    fn multiset_counts_duplicates() {
        let s = schema2();
        let a = ResultSet::new(
            Arc::clone(&s),
            vec![vec![1, 2], vec![1, 2], vec![3, 4]],
        );
        let b = ResultSet::new(
            Arc::clone(&s),
            vec![vec![1, 2], vec![3, 4], vec![3, 4]],
        );
        assert!(!multiset_equal(&a, &b).unwrap());
    }

    #[test]
    fn multiset_schema_mismatch_is_error() {
        let a = ResultSet::new(schema2(), vec![]);
        let b = ResultSet::new(Schema::shared(vec!["x", "y"]).unwrap(), vec![]);
        assert!(multiset_equal(&a, &b).is_err());
    }

    #[test]
    fn induced_result_ignores_filler_payloads() {
        // Dropping fillers and re-padding with arbitrary rows must leave the
        // induced result unchanged.
        let s = schema2();
        let t = PaddedTable::new(
            Arc::clone(&s),
            vec![vec![1, 1], vec![9, 9], vec![2, 2]],
            vec![true, false, true],
            OpId(0),
        )
        .unwrap();
        let base = t.induced_result();

        let repadded = PaddedTable::new(
            Arc::clone(&s),
            vec![vec![1, 1], vec![2, 2], vec![77, -3], vec![0, 0]],
            vec![true, true, false, false],
            OpId(0),
        )
        .unwrap();
        assert!(multiset_equal(&base, &repadded.induced_result()).unwrap());
        assert_eq!(t.true_count(), 2);
        assert_eq!(t.public_size(), 3);
    }
}
