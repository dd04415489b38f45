//! Append-only line journal.
//!
//! ```text
//! corpusforge-journal v1
//! <seq> <first 16 hex digits of sha256(json)> <json record>
//! ```

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::event::Event;
use super::state::State;
use crate::error::{Error, Result};

pub const JOURNAL_HEADER: &str = "corpusforge-journal v1";

// Externally tagged: internal tagging buffers the body, which cannot
// deserialize the integer-keyed maps inside a snapshot.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Record<'a> {
    Event { event: std::borrow::Cow<'a, Event> },
    Snapshot { state: std::borrow::Cow<'a, State> },
}

pub(super) struct Journal {
    path: PathBuf,
    file: File,
    seq: u64,
    sync: bool,
}

fn checksum(json: &str) -> String {
    hex::encode(&Sha256::digest(json.as_bytes())[..8])
}

fn encode_line(seq: u64, record: &Record<'_>) -> Result<String> {
    let json = serde_json::to_string(record).map_err(|e| Error::Integrity(e.to_string()))?;
    Ok(format!("{seq} {} {json}\n", checksum(&json)))
}

fn parse_line(line: &str, expected_seq: u64) -> std::result::Result<Record<'static>, String> {
    let mut parts = line.splitn(3, ' ');
    let (Some(seq), Some(sum), Some(json)) = (parts.next(), parts.next(), parts.next()) else {
        return Err("malformed line".into());
    };
    let seq: u64 = seq.parse().map_err(|_| "bad sequence number".to_string())?;
    if seq != expected_seq {
        return Err(format!("expected sequence {expected_seq}, found {seq}"));
    }
    if checksum(json) != sum {
        return Err("checksum mismatch".into());
    }
    serde_json::from_str(json).map_err(|e| e.to_string())
}

impl Journal {
    pub(super) fn open(path: &Path, sync: bool) -> Result<(Journal, State, u64)> {
        if !path.exists() || std::fs::metadata(path)?.len() == 0 {
            let mut file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
            file.write_all(format!("{JOURNAL_HEADER}\n").as_bytes())?;
            file.sync_all()?;
            let j = Journal { path: path.to_path_buf(), file, seq: 0, sync };
            return Ok((j, State::default(), 0));
        }

        let mut reader = BufReader::new(File::open(path)?);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        if header.trim_end_matches('\n') != JOURNAL_HEADER {
            return Err(Error::Integrity(format!("{}: not a journal file", path.display())));
        }
        let mut valid_len = header.len() as u64;
        let mut state = State::default();
        let mut seq = 0u64;
        let mut events = 0u64;
        let mut torn = false;
        let mut buf = Vec::new();
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf)?;
            if n == 0 {
                break;
            }
            let complete = buf.last() == Some(&b'\n');
            let parsed = std::str::from_utf8(&buf)
                .map_err(|e| e.to_string())
                .and_then(|s| parse_line(s.trim_end_matches('\n'), seq + 1));
            match parsed {
                Ok(record) if complete => {
                    match record {
                        Record::Event { event } => {
                            state.apply(&event)?;
                            events += 1;
                        }
                        Record::Snapshot { state: snap } => {
                            state = snap.into_owned();
                            state.reindex();
                        }
                    }
                    seq += 1;
                    valid_len += n as u64;
                }
                Ok(_) | Err(_) => {
                    // Only the final line may be damaged: that is a write that
                    // was cut short.
                    let mut rest = Vec::new();
                    reader.read_to_end(&mut rest)?;
                    if rest.iter().any(|b| !b.is_ascii_whitespace()) {
                        let why = parsed.err().unwrap_or_else(|| "unterminated line".into());
                        return Err(Error::Integrity(format!(
                            "{}: record {} is corrupt ({why})",
                            path.display(),
                            seq + 1
                        )));
                    }
                    torn = true;
                    break;
                }
            }
        }
        state.check_invariants()?;

        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        if torn {
            file.set_len(valid_len)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok((Journal { path: path.to_path_buf(), file, seq, sync }, state, events))
    }

    pub(super) fn create_with_snapshot(path: &Path, state: &State, sync: bool) -> Result<Journal> {
        let mut j = Journal {
            path: path.to_path_buf(),
            file: File::create(path)?,
            seq: 0,
            sync,
        };
        j.file.write_all(format!("{JOURNAL_HEADER}\n").as_bytes())?;
        j.file.sync_all()?;
        j.compact(state)?;
        Ok(j)
    }

    pub(super) fn append(&mut self, events: &[Event]) -> Result<()> {
        let mut out = String::new();
        let mut seq = self.seq;
        for e in events {
            seq += 1;
            out.push_str(&encode_line(seq, &Record::Event { event: std::borrow::Cow::Borrowed(e) })?);
        }
        self.file.write_all(out.as_bytes())?;
        if self.sync {
            self.file.sync_data()?;
        }
        self.seq = seq;
        Ok(())
    }

    /// Replaces the journal with a header plus one snapshot record, via a
    /// temporary file and rename.
    pub(super) fn compact(&mut self, state: &State) -> Result<()> {
        let tmp = self.path.with_extension("compact.tmp");
        let line = encode_line(1, &Record::Snapshot { state: std::borrow::Cow::Borrowed(state) })?;
        {
            let mut f = File::create(&tmp)?;
            f.write_all(format!("{JOURNAL_HEADER}\n").as_bytes())?;
            f.write_all(line.as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, &self.path)?;
        let mut file = OpenOptions::new().read(true).write(true).open(&self.path)?;
        file.seek(SeekFrom::End(0))?;
        self.file = file;
        self.seq = 1;
        Ok(())
    }
}
