//! Identifiers, language codes, directions and time.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicI64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                s.parse::<u64>()
                    .map($name)
                    .map_err(|_| Error::input(format!("invalid {}: {s:?}", stringify!($name))))
            }
        }
    };
}

id_type!(SourceId);
id_type!(TaskId);
id_type!(TranslationId);
id_type!(AssignmentId);
id_type!(WorkerId);

/// A language code such as `che` or `eng`. Lowercase ASCII letters, 2 to 8 long.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Lang(String);

impl Lang {
    pub const UNDETERMINED: &'static str = "und";

    pub fn new(code: &str) -> Result<Self> {
        let ok = (2..=8).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
        if ok {
            Ok(Lang(code.to_string()))
        } else {
            Err(Error::input(format!("invalid language code {code:?}")))
        }
    }

    pub fn undetermined() -> Self {
        Lang(Self::UNDETERMINED.to_string())
    }

    pub fn is_undetermined(&self) -> bool {
        self.0 == Self::UNDETERMINED
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// English display name used in task instructions; unknown codes render as-is.
    pub fn display_name(&self) -> &str {
        match self.0.as_str() {
            "che" => "Chechen",
            "rus" => "Russian",
            "fuv" => "Fula",
            "eng" => "English",
            "deu" => "German",
            "fin" => "Finnish",
            "tur" => "Turkish",
            "yor" => "Yoruba",
            "swa" => "Swahili",
            other => other,
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Lang::new(s)
    }
}

impl TryFrom<String> for Lang {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Lang::new(&s)
    }
}

impl From<Lang> for String {
    fn from(lang: Lang) -> Self {
        lang.0
    }
}

/// An ordered source → target language pair, written `src-tgt`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Direction {
    pub src: Lang,
    pub tgt: Lang,
}

impl Direction {
    pub fn new(src: Lang, tgt: Lang) -> Result<Self> {
        if src == tgt {
            return Err(Error::input(format!("direction {src}-{tgt} has identical languages")));
        }
        Ok(Direction { src, tgt })
    }

    /// The four directions collected in the original crowd experiment, in the
    /// column order of its funnel table.
    pub fn collected() -> [Direction; 4] {
        ["fuv-eng", "eng-fuv", "che-rus", "rus-che"].map(|s| s.parse().expect("static direction"))
    }

    /// `Translate the sentence from {SRC} to {TGT}`.
    pub fn instruction(&self) -> String {
        format!(
            "Translate the sentence from {} to {}",
            self.src.display_name(),
            self.tgt.display_name()
        )
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.tgt)
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (src, tgt) = s
            .split_once(['-', '>'])
            .ok_or_else(|| Error::input(format!("invalid direction {s:?}, expected src-tgt")))?;
        Direction::new(src.parse()?, tgt.trim_start_matches('>').parse()?)
    }
}

impl TryFrom<String> for Direction {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Direction> for String {
    fn from(d: Direction) -> Self {
        d.to_string()
    }
}

/// Milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn plus_ms(self, ms: u64) -> Timestamp {
        Timestamp(self.0.saturating_add(ms as i64))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        let ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or_default();
        Timestamp(ms)
    }
}

/// Hand-driven clock for tests and deterministic replays.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        ManualClock(AtomicI64::new(start.0))
    }

    pub fn advance_ms(&self, ms: u64) {
        self.0.fetch_add(ms as i64, Ordering::SeqCst);
    }

    pub fn set(&self, at: Timestamp) {
        self.0.store(at.0, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.0.load(Ordering::SeqCst))
    }
}
