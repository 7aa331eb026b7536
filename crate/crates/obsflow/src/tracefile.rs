//! Delimited-text trace, catalog and user files.
//!
//! ```text
//! ts,user_id,object_id,range_start,range_end
//! 3600,u1,objA,0,3600
//! ```
//!
//! Catalog files hold `object_id,instrument_type_id,location_id,data_rate`;
//! user files hold `user_id,kind,region`. Objects are referenced by name and
//! users are interned in order of first appearance.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use obsflow_core::trace::{sort_records, AccessRecord, Catalog, UserKind, UserProfile};
use obsflow_core::{Interval, UserId};

use crate::Error;

pub const TRACE_HEADER: [&str; 5] = ["ts", "user_id", "object_id", "range_start", "range_end"];
pub const CATALOG_HEADER: [&str; 4] = ["object_id", "instrument_type_id", "location_id", "data_rate"];
pub const USERS_HEADER: [&str; 3] = ["user_id", "kind", "region"];

/// Bidirectional user-name table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserTable {
    names: Vec<String>,
    index: BTreeMap<String, UserId>,
}

impl UserTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> UserId {
        if let Some(id) = self.index.get(name) {
            return *id;
        }
        let id = UserId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<UserId> {
        self.index.get(name).copied()
    }

    /// Name of `id`, or its display form for users the table never saw.
    pub fn name(&self, id: UserId) -> String {
        self.names.get(id.index()).cloned().unwrap_or_else(|| id.to_string())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl FromIterator<String> for UserTable {
    fn from_iter<T: IntoIterator<Item = String>>(iter: T) -> Self {
        let mut t = UserTable::new();
        for name in iter {
            t.intern(&name);
        }
        t
    }
}

/// A trace with everything needed to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFiles {
    pub catalog: Catalog,
    pub users: UserTable,
    /// Access region per user, where known.
    pub regions: BTreeMap<UserId, u32>,
    pub records: Vec<AccessRecord>,
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(r)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// Reads rows after checking the header; yields `(line, fields)`.
fn rows<R: Read>(r: R, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, Error> {
    let mut rdr = reader(r);
    let mut out = Vec::new();
    let mut seen_header = false;
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), msg: e.to_string() })?;
        let line = line_of(&row);
        if row.iter().all(str::is_empty) {
            continue;
        }
        if !seen_header {
            if !row.iter().eq(header.iter().copied()) {
                return Err(Error::Parse { line, msg: format!("expected header {}", header.join(",")) });
            }
            seen_header = true;
            continue;
        }
        if row.len() != header.len() {
            return Err(Error::Parse { line, msg: format!("expected {} fields, got {}", header.len(), row.len()) });
        }
        out.push((line, row));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, line: u64, name: &str) -> Result<T, Error> {
    row[i].parse().map_err(|_| Error::Parse { line, msg: format!("bad {name} {:?}", &row[i]) })
}

/// Parses a trace against `catalog`, interning users into `users`.
/// The result is sorted; unknown objects and empty ranges are errors.
pub fn parse_trace<R: Read>(r: R, catalog: &Catalog, users: &mut UserTable) -> Result<Vec<AccessRecord>, Error> {
    let names = catalog.name_index();
    let mut out = Vec::new();
    for (line, row) in rows(r, &TRACE_HEADER)? {
        let ts: f64 = field(&row, 0, line, "timestamp")?;
        if !(ts.is_finite() && ts >= 0.0) {
            return Err(Error::Parse { line, msg: format!("timestamp must be finite and non-negative, got {ts}") });
        }
        let object = *names
            .get(&row[2])
            .ok_or_else(|| Error::Parse { line, msg: format!("unknown object {:?}", &row[2]) })?;
        let start: i64 = field(&row, 3, line, "range_start")?;
        let end: i64 = field(&row, 4, line, "range_end")?;
        let range = Interval::new(start, end)
            .ok_or_else(|| Error::Parse { line, msg: format!("empty range [{start},{end})") })?;
        if row[1].is_empty() {
            return Err(Error::Parse { line, msg: "empty user id".into() });
        }
        let user = users.intern(&row[1]);
        out.push(AccessRecord::new(ts, user, object, range));
    }
    sort_records(&mut out);
    Ok(out)
}

pub fn write_trace<W: Write>(w: W, records: &[AccessRecord], catalog: &Catalog, users: &UserTable) -> Result<(), Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TRACE_HEADER)?;
    for r in records {
        let object = catalog.get(r.object).ok_or(obsflow_core::Error::UnknownObject(r.object))?;
        wtr.write_record([
            r.ts.to_string(),
            users.name(r.user),
            object.name.clone(),
            r.range.start.to_string(),
            r.range.end.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_catalog<R: Read>(r: R) -> Result<Catalog, Error> {
    let mut objects = Vec::new();
    for (line, row) in rows(r, &CATALOG_HEADER)? {
        let rate: f64 = field(&row, 3, line, "data_rate")?;
        objects.push((row[0].to_string(), field(&row, 1, line, "instrument_type_id")?, field(&row, 2, line, "location_id")?, rate));
    }
    Ok(Catalog::from_rows(objects)?)
}

pub fn write_catalog<W: Write>(w: W, catalog: &Catalog) -> Result<(), Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CATALOG_HEADER)?;
    for o in catalog.objects() {
        wtr.write_record([
            o.name.clone(),
            o.instrument_type.to_string(),
            o.location.to_string(),
            o.data_rate.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn kind_name(kind: UserKind) -> &'static str {
    match kind {
        UserKind::Human => "human",
        UserKind::Regular => "regular",
        UserKind::RealTime => "real-time",
        UserKind::Overlapping => "overlapping",
    }
}

/// Parses a user file, interning names into `users`; returns regions.
pub fn parse_users<R: Read>(r: R, users: &mut UserTable) -> Result<BTreeMap<UserId, u32>, Error> {
    let mut regions = BTreeMap::new();
    for (line, row) in rows(r, &USERS_HEADER)? {
        let region: u32 = field(&row, 2, line, "region")?;
        regions.insert(users.intern(&row[0]), region);
    }
    Ok(regions)
}

/// Writes the generator's user table; `kind` is informational.
pub fn write_users<W: Write>(w: W, profiles: &[UserProfile]) -> Result<(), Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(USERS_HEADER)?;
    for u in profiles {
        wtr.write_record([u.name.as_str(), kind_name(u.kind), &u.region.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Path(path.to_path_buf(), e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Path(path.to_path_buf(), e))
}

/// Loads a catalog, an optional user file and a trace. Users listed in the
/// user file keep their file order; users only seen in the trace follow.
pub fn load(trace: &Path, catalog: &Path, users: Option<&Path>) -> Result<TraceFiles, Error> {
    let catalog = parse_catalog(open(catalog)?).map_err(|e| e.in_file(catalog))?;
    let mut table = UserTable::new();
    let regions = match users {
        Some(p) => parse_users(open(p)?, &mut table).map_err(|e| e.in_file(p))?,
        None => BTreeMap::new(),
    };
    let records = parse_trace(open(trace)?, &catalog, &mut table).map_err(|e| e.in_file(trace))?;
    Ok(TraceFiles { catalog, users: table, regions, records })
}

/// Writes `trace.csv`, `catalog.csv` and `users.csv` into `dir`.
pub fn save(dir: &Path, records: &[AccessRecord], catalog: &Catalog, profiles: &[UserProfile]) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Path(dir.to_path_buf(), e))?;
    let users: UserTable = profiles.iter().map(|u| u.name.clone()).collect();
    let mut w = create(&dir.join("catalog.csv"))?;
    write_catalog(&mut w, catalog)?;
    w.flush()?;
    let mut w = create(&dir.join("users.csv"))?;
    write_users(&mut w, profiles)?;
    w.flush()?;
    let mut w = create(&dir.join("trace.csv"))?;
    write_trace(&mut w, records, catalog, &users)?;
    w.flush().map_err(|e: io::Error| Error::Path(dir.join("trace.csv"), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use obsflow_core::ObjectId;

    fn catalog() -> Catalog {
        Catalog::from_rows([("objA".to_string(), 0, 0, 10.0), ("objB".to_string(), 1, 0, 2.5)]).unwrap()
    }

    #[test]
    fn maps_fields_directly() {
        let text = "ts,user_id,object_id,range_start,range_end\n3600,u1,objA,0,3600\n";
        let mut users = UserTable::new();
        let recs = parse_trace(text.as_bytes(), &catalog(), &mut users).unwrap();
        let want = AccessRecord::new(3600.0, UserId(0), ObjectId(0), Interval::new(0, 3600).unwrap());
        assert_eq!(recs, vec![want]);
        assert_eq!(users.name(UserId(0)), "u1");
    }

    #[test]
    fn empty_file_is_empty_trace() {
        let mut users = UserTable::new();
        assert!(parse_trace("".as_bytes(), &catalog(), &mut users).unwrap().is_empty());
    }

    #[test]
    fn errors_name_the_line() {
        let text = "ts,user_id,object_id,range_start,range_end\n1,u1,objA,0,10\n2,u1,objA,10,10\n";
        let err = parse_trace(text.as_bytes(), &catalog(), &mut UserTable::new()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let text = "ts,user_id,object_id,range_start,range_end\n1,u1,objZ,0,10\n";
        let err = parse_trace(text.as_bytes(), &catalog(), &mut UserTable::new()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(err.to_string().contains("objZ"));
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let text = "ts,user_id,object_id,range_start,range_end\n20,u1,objB,0,10\n10,u2,objA,0,10\n";
        let recs = parse_trace(text.as_bytes(), &catalog(), &mut UserTable::new()).unwrap();
        assert_eq!(recs.iter().map(|r| r.ts).collect::<Vec<_>>(), vec![10.0, 20.0]);
    }

    #[test]
    fn header_is_required() {
        let text = "1,u1,objA,0,10\n";
        assert!(parse_trace(text.as_bytes(), &catalog(), &mut UserTable::new()).is_err());
    }

    #[test]
    fn catalog_round_trip() {
        let mut buf = Vec::new();
        write_catalog(&mut buf, &catalog()).unwrap();
        assert_eq!(parse_catalog(buf.as_slice()).unwrap(), catalog());
    }
}
