//! Enrollment database: subjects, templates, access-code hashes and a
//! short-lived raw image area, persisted in one append-only journal file.
//!
//! File layout: magic `IRIS`, format version `u16`, then records of
//! `tag: u8, length: u32, payload`. All integers are little-endian.
//!
//! | tag | record                  |
//! |-----|-------------------------|
//! | 1   | subject (with templates)|
//! | 2   | raw image entry         |
//! | 3   | raw image removal       |
//!
//! Raw images live beside the journal as `<store>.raw/<sha256>.ppm`.
//! A trailing partial record (torn write) is dropped on open.

mod codec;
mod enroll;
mod pin;

pub use enroll::{enroll, EnrollRequest, MIN_ENROLL_IMAGES};
pub use pin::{validate_pin, PinHash};

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::imaging::{ppm, RgbImage};
use crate::matching::GeomParams;
use crate::time::Timestamp;
use crate::transform::IrisCode;
use codec::{Reader, Writer};

pub const MAGIC: &[u8; 4] = b"IRIS";
pub const FORMAT_VERSION: u16 = 1;
/// Default lifetime of a raw capture: 24 hours.
pub const DEFAULT_RETENTION_MS: i64 = 24 * 3600 * 1000;

const TAG_SUBJECT: u8 = 1;
const TAG_RAW_PUT: u8 = 2;
const TAG_RAW_REMOVE: u8 = 3;
const HEADER_LEN: u64 = 6;
const COMPACT_MIN_DEAD: usize = 256;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("store file corrupt: {0}")]
    Corrupt(String),
    #[error("subject {0:?} already enrolled")]
    DuplicateSubject(String),
    #[error("subject {0:?} not found")]
    NotFound(String),
    #[error("only {passed} of {required} enrollment images passed the pipeline")]
    InsufficientEnrollment { passed: usize, required: usize },
    #[error("invalid access code: {0}")]
    PinFormat(String),
    #[error("invalid record: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrisTemplate {
    pub code: IrisCode,
    pub geom: GeomParams,
    pub selector_version: String,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub display_name: String,
    pub pin_hash: PinHash,
    pub templates: Vec<IrisTemplate>,
    pub enrolled_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImageEntry {
    pub image_ref: String,
    pub subject_id: Option<String>,
    pub captured_at: Timestamp,
    pub expires_at: Timestamp,
}

pub fn validate_subject_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::Invalid(format!(
            "subject id {id:?} must be 1-64 characters of [A-Za-z0-9_.-]"
        )))
    }
}

pub struct Store {
    path: PathBuf,
    file: File,
    subjects: BTreeMap<String, SubjectRecord>,
    raw: BTreeMap<String, RawImageEntry>,
    dead_records: usize,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("path", &self.path)
            .field("subjects", &self.subjects.len())
            .field("raw", &self.raw.len())
            .finish()
    }
}

impl Store {
    /// Opens the journal at `path`, creating it when absent.
    pub fn open(path: impl AsRef<Path>) -> Result<Store, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        if bytes.is_empty() {
            file.write_all(MAGIC)?;
            file.write_all(&FORMAT_VERSION.to_le_bytes())?;
            file.sync_all()?;
            bytes = file_header();
        }
        let mut store = Store {
            path,
            file,
            subjects: BTreeMap::new(),
            raw: BTreeMap::new(),
            dead_records: 0,
        };
        let good = store.replay(&bytes)?;
        if good < bytes.len() as u64 {
            store.file.set_len(good)?;
            store.file.sync_all()?;
        }
        store.file.seek(SeekFrom::End(0))?;
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn raw_dir(&self) -> PathBuf {
        let mut name = self.path.file_name().unwrap_or_default().to_os_string();
        name.push(".raw");
        self.path.with_file_name(name)
    }

    fn replay(&mut self, bytes: &[u8]) -> Result<u64, StoreError> {
        if bytes.len() < HEADER_LEN as usize || &bytes[..4] != MAGIC {
            return Err(StoreError::Corrupt("missing IRIS header".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(StoreError::Corrupt(format!("unsupported format version {version}")));
        }
        let mut pos = HEADER_LEN as usize;
        while pos < bytes.len() {
            if bytes.len() - pos < 5 {
                break;
            }
            let tag = bytes[pos];
            let len = u32::from_le_bytes(bytes[pos + 1..pos + 5].try_into().expect("4 bytes")) as usize;
            if bytes.len() - pos - 5 < len {
                break;
            }
            self.apply(tag, &bytes[pos + 5..pos + 5 + len])?;
            pos += 5 + len;
        }
        Ok(pos as u64)
    }

    fn apply(&mut self, tag: u8, payload: &[u8]) -> Result<(), StoreError> {
        let mut r = Reader::new(payload);
        match tag {
            TAG_SUBJECT => {
                let rec = decode_subject(&mut r)?;
                if self.subjects.insert(rec.subject_id.clone(), rec).is_some() {
                    self.dead_records += 1;
                }
            }
            TAG_RAW_PUT => {
                let entry = decode_raw(&mut r)?;
                if self.raw.insert(entry.image_ref.clone(), entry).is_some() {
                    self.dead_records += 1;
                }
            }
            TAG_RAW_REMOVE => {
                let image_ref = r.str()?;
                self.raw.remove(&image_ref);
                self.dead_records += 2;
            }
            other => return Err(StoreError::Corrupt(format!("unknown record tag {other}"))),
        }
        if !r.is_done() {
            return Err(StoreError::Corrupt(format!("trailing bytes in record tag {tag}")));
        }
        Ok(())
    }

    fn append(&mut self, tag: u8, payload: &[u8]) -> Result<(), StoreError> {
        let mut rec = Vec::with_capacity(payload.len() + 5);
        rec.push(tag);
        rec.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        rec.extend_from_slice(payload);
        self.file.write_all(&rec)?;
        self.file.sync_data()?;
        Ok(())
    }

    /// Stores a fully built subject record.
    pub fn insert_subject(&mut self, record: SubjectRecord) -> Result<(), StoreError> {
        validate_subject_id(&record.subject_id)?;
        if self.subjects.contains_key(&record.subject_id) {
            return Err(StoreError::DuplicateSubject(record.subject_id));
        }
        if record.templates.is_empty() {
            return Err(StoreError::Invalid("a subject needs at least one template".into()));
        }
        let mut w = Writer::default();
        encode_subject(&mut w, &record);
        self.append(TAG_SUBJECT, &w.buf)?;
        self.subjects.insert(record.subject_id.clone(), record);
        Ok(())
    }

    pub fn contains(&self, subject_id: &str) -> bool {
        self.subjects.contains_key(subject_id)
    }

    pub fn lookup(&self, subject_id: &str) -> Result<&SubjectRecord, StoreError> {
        self.subjects
            .get(subject_id)
            .ok_or_else(|| StoreError::NotFound(subject_id.to_string()))
    }

    /// Salted-hash comparison of a typed code.
    pub fn check_pin(&self, subject_id: &str, pin: &str) -> Result<bool, StoreError> {
        Ok(self.lookup(subject_id)?.pin_hash.verify(pin))
    }

    /// Subjects ordered by id.
    pub fn subjects(&self) -> impl Iterator<Item = &SubjectRecord> {
        self.subjects.values()
    }

    pub fn subject_count(&self) -> usize {
        self.subjects.len()
    }

    /// Every template once, ordered by `(subject_id, created_at)`.
    pub fn all_templates(&self) -> impl Iterator<Item = (&str, &IrisTemplate)> {
        self.subjects.values().flat_map(|s| {
            let mut ts: Vec<&IrisTemplate> = s.templates.iter().collect();
            ts.sort_by_key(|t| t.created_at);
            ts.into_iter().map(move |t| (s.subject_id.as_str(), t))
        })
    }

    /// Writes the capture to the raw area and records an expiring entry.
    pub fn put_raw_image(
        &mut self,
        img: &RgbImage,
        subject_id: Option<&str>,
        captured_at: Timestamp,
        retention_ms: i64,
    ) -> Result<RawImageEntry, StoreError> {
        if retention_ms <= 0 {
            return Err(StoreError::Invalid("retention must be positive".into()));
        }
        let bytes = ppm::encode_ppm(img);
        let image_ref = hex::encode(Sha256::digest(&bytes));
        let dir = self.raw_dir();
        fs::create_dir_all(&dir)?;
        let file = dir.join(format!("{image_ref}.ppm"));
        if !file.exists() {
            let tmp = dir.join(format!("{image_ref}.ppm.tmp"));
            fs::write(&tmp, &bytes)?;
            fs::rename(&tmp, &file)?;
        }
        let entry = RawImageEntry {
            image_ref,
            subject_id: subject_id.map(str::to_string),
            captured_at,
            expires_at: captured_at.plus_millis(retention_ms),
        };
        let mut w = Writer::default();
        encode_raw(&mut w, &entry);
        self.append(TAG_RAW_PUT, &w.buf)?;
        if self.raw.insert(entry.image_ref.clone(), entry.clone()).is_some() {
            self.dead_records += 1;
        }
        Ok(entry)
    }

    pub fn raw_images(&self) -> impl Iterator<Item = &RawImageEntry> {
        self.raw.values()
    }

    pub fn raw_image_path(&self, image_ref: &str) -> PathBuf {
        self.raw_dir().join(format!("{image_ref}.ppm"))
    }

    /// Drops raw entries with `expires_at <= now` and their files.
    /// Templates are never touched.
    pub fn purge_expired(&mut self, now: Timestamp) -> Result<usize, StoreError> {
        let expired: Vec<String> = self
            .raw
            .values()
            .filter(|e| e.expires_at <= now)
            .map(|e| e.image_ref.clone())
            .collect();
        for image_ref in &expired {
            let mut w = Writer::default();
            w.str(image_ref);
            self.append(TAG_RAW_REMOVE, &w.buf)?;
            self.raw.remove(image_ref);
            self.dead_records += 2;
            match fs::remove_file(self.raw_image_path(image_ref)) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            }
        }
        if self.dead_records >= COMPACT_MIN_DEAD && self.dead_records > self.subjects.len() + self.raw.len() {
            self.compact()?;
        }
        Ok(expired.len())
    }

    /// Rewrites the journal with live records only.
    pub fn compact(&mut self) -> Result<(), StoreError> {
        let mut bytes = file_header();
        let mut push = |tag: u8, payload: &[u8]| {
            bytes.push(tag);
            bytes.extend_from_slice(&(payload.len() as u32).to_le_bytes());
            bytes.extend_from_slice(payload);
        };
        for rec in self.subjects.values() {
            let mut w = Writer::default();
            encode_subject(&mut w, rec);
            push(TAG_SUBJECT, &w.buf);
        }
        for entry in self.raw.values() {
            let mut w = Writer::default();
            encode_raw(&mut w, entry);
            push(TAG_RAW_PUT, &w.buf);
        }
        let mut tmp_name = self.path.file_name().unwrap_or_default().to_os_string();
        tmp_name.push(".compact");
        let tmp = self.path.with_file_name(tmp_name);
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        self.file = OpenOptions::new().read(true).write(true).open(&self.path)?;
        self.file.seek(SeekFrom::End(0))?;
        self.dead_records = 0;
        Ok(())
    }
}

fn file_header() -> Vec<u8> {
    let mut h = MAGIC.to_vec();
    h.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    h
}

fn encode_subject(w: &mut Writer, rec: &SubjectRecord) {
    w.str(&rec.subject_id);
    w.str(&rec.display_name);
    w.bytes(&rec.pin_hash.salt);
    w.bytes(&rec.pin_hash.digest);
    w.i64(rec.enrolled_at.millis());
    w.u32(rec.templates.len() as u32);
    for t in &rec.templates {
        w.bits(&t.code.bits);
        w.bits(&t.code.mask);
        for v in t.geom.as_array() {
            w.f64(v);
        }
        w.str(&t.selector_version);
        w.i64(t.created_at.millis());
    }
}

fn decode_subject(r: &mut Reader) -> Result<SubjectRecord, StoreError> {
    let subject_id = r.str()?;
    let display_name = r.str()?;
    let salt = r.array::<16>()?;
    let digest = r.array::<32>()?;
    let enrolled_at = Timestamp(r.i64()?);
    let count = r.u32()? as usize;
    let mut templates = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let bits = r.bits()?;
        let mask = r.bits()?;
        if bits.len() != mask.len() {
            return Err(StoreError::Corrupt("template bits and mask differ in length".into()));
        }
        let g: [f64; 5] = [r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?];
        let selector_version = r.str()?;
        let created_at = Timestamp(r.i64()?);
        templates.push(IrisTemplate {
            code: IrisCode { bits, mask },
            geom: GeomParams {
                radius_ratio: g[0],
                concentricity_norm: g[1],
                sclera_redness: g[2],
                mean_intensity: g[3],
                profile_curvature: g[4],
            },
            selector_version,
            created_at,
        });
    }
    Ok(SubjectRecord {
        subject_id,
        display_name,
        pin_hash: PinHash { salt, digest },
        templates,
        enrolled_at,
    })
}

fn encode_raw(w: &mut Writer, e: &RawImageEntry) {
    w.str(&e.image_ref);
    w.opt_str(e.subject_id.as_deref());
    w.i64(e.captured_at.millis());
    w.i64(e.expires_at.millis());
}

fn decode_raw(r: &mut Reader) -> Result<RawImageEntry, StoreError> {
    Ok(RawImageEntry {
        image_ref: r.str()?,
        subject_id: r.opt_str()?,
        captured_at: Timestamp(r.i64()?),
        expires_at: Timestamp(r.i64()?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(seed: u8, at: i64) -> IrisTemplate {
        IrisTemplate {
            code: IrisCode {
                bits: (0..256).map(|i| (i as u8).wrapping_mul(seed) % 3 == 0).collect(),
                mask: (0..256).map(|i| i % 17 != 0).collect(),
            },
            geom: GeomParams {
                radius_ratio: 0.3 + seed as f64 * 1e-3,
                concentricity_norm: 0.01,
                sclera_redness: 1.0 / 3.0,
                mean_intensity: 0.61,
                profile_curvature: 0.004,
            },
            selector_version: "sel-test".into(),
            created_at: Timestamp(at),
        }
    }

    fn subject(id: &str, pin: &str) -> SubjectRecord {
        SubjectRecord {
            subject_id: id.into(),
            display_name: format!("Person {id}"),
            pin_hash: PinHash::new(pin).unwrap(),
            templates: vec![template(3, 30), template(1, 10), template(2, 20)],
            enrolled_at: Timestamp(1_000),
        }
    }

    #[test]
    fn lookup_pin_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path().join("s.iris")).unwrap();
        store.insert_subject(subject("alice", "12345")).unwrap();
        assert!(matches!(
            store.insert_subject(subject("alice", "11111")),
            Err(StoreError::DuplicateSubject(_))
        ));
        assert!(store.check_pin("alice", "12345").unwrap());
        assert!(!store.check_pin("alice", "12346").unwrap());
        assert!(matches!(store.lookup("bob"), Err(StoreError::NotFound(_))));
        assert!(matches!(store.check_pin("bob", "12345"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn template_order_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.iris");
        {
            let mut store = Store::open(&path).unwrap();
            assert_eq!(store.all_templates().count(), 0);
            store.insert_subject(subject("bob", "22222")).unwrap();
            store.insert_subject(subject("alice", "12345")).unwrap();
        }
        let store = Store::open(&path).unwrap();
        let order: Vec<(String, i64)> = store
            .all_templates()
            .map(|(id, t)| (id.to_string(), t.created_at.millis()))
            .collect();
        assert_eq!(
            order,
            vec![
                ("alice".into(), 10),
                ("alice".into(), 20),
                ("alice".into(), 30),
                ("bob".into(), 10),
                ("bob".into(), 20),
                ("bob".into(), 30),
            ]
        );
        assert_eq!(store.lookup("alice").unwrap().templates[0], template(3, 30));
    }

    #[test]
    fn purge_boundaries() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path().join("s.iris")).unwrap();
        store.insert_subject(subject("alice", "12345")).unwrap();
        let a = RgbImage::filled(64, 64, [1, 2, 3]).unwrap();
        let b = RgbImage::filled(64, 64, [4, 5, 6]).unwrap();
        let t0 = Timestamp(1_000_000);
        let ea = store.put_raw_image(&a, Some("alice"), t0, 1000).unwrap();
        store.put_raw_image(&b, None, t0, DEFAULT_RETENTION_MS).unwrap();
        assert!(store.raw_image_path(&ea.image_ref).exists());
        assert_eq!(store.purge_expired(t0).unwrap(), 0);
        // expiring exactly at `now` is removed
        assert_eq!(store.purge_expired(ea.expires_at).unwrap(), 1);
        assert!(!store.raw_image_path(&ea.image_ref).exists());
        assert_eq!(store.purge_expired(t0.plus_millis(DEFAULT_RETENTION_MS)).unwrap(), 1);
        assert_eq!(store.raw_images().count(), 0);
        assert_eq!(store.all_templates().count(), 3);
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.iris");
        {
            let mut store = Store::open(&path).unwrap();
            store.insert_subject(subject("alice", "12345")).unwrap();
        }
        let good_len = fs::metadata(&path).unwrap().len();
        {
            let mut f = OpenOptions::new().append(true).open(&path).unwrap();
            f.write_all(&[TAG_SUBJECT, 200, 0, 0, 0, 1, 2, 3]).unwrap();
        }
        let store = Store::open(&path).unwrap();
        assert!(store.contains("alice"));
        assert_eq!(fs::metadata(&path).unwrap().len(), good_len);
    }

    #[test]
    fn bad_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.iris");
        fs::write(&path, b"NOPE\x01\x00").unwrap();
        assert!(matches!(Store::open(&path), Err(StoreError::Corrupt(_))));
        fs::write(&path, b"IRIS\x09\x00").unwrap();
        assert!(matches!(Store::open(&path), Err(StoreError::Corrupt(_))));
    }

    #[test]
    fn compaction_preserves_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.iris");
        let mut store = Store::open(&path).unwrap();
        store.insert_subject(subject("alice", "12345")).unwrap();
        let t0 = Timestamp(5_000);
        for i in 0..300u32 {
            let mut img = RgbImage::filled(64, 64, [0, 0, 0]).unwrap();
            img.put(0, 0, [(i % 256) as u8, (i / 256) as u8, 7]);
            store.put_raw_image(&img, None, t0, 10).unwrap();
        }
        let before = fs::metadata(&path).unwrap().len();
        assert_eq!(store.purge_expired(t0.plus_millis(10)).unwrap(), 300);
        assert!(fs::metadata(&path).unwrap().len() < before);
        drop(store);
        let store = Store::open(&path).unwrap();
        assert!(store.contains("alice"));
        assert_eq!(store.raw_images().count(), 0);
    }
}
