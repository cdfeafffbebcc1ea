//! UTC time at second granularity.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, SecondsFormat, TimeZone, Utc};

/// A UTC instant truncated to whole seconds.
pub type Timestamp = DateTime<Utc>;

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        from_unix(Utc::now().timestamp())
    }
}

/// A clock that only moves when told to. Shared between clones.
#[derive(Debug, Clone)]
pub struct ManualClock {
    secs: Arc<AtomicI64>,
}

impl ManualClock {
    pub fn new(start: Timestamp) -> Self {
        ManualClock {
            secs: Arc::new(AtomicI64::new(start.timestamp())),
        }
    }

    pub fn advance(&self, secs: i64) {
        self.secs.fetch_add(secs, Ordering::SeqCst);
    }

    pub fn set(&self, t: Timestamp) {
        self.secs.store(t.timestamp(), Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        from_unix(self.secs.load(Ordering::SeqCst))
    }
}

pub fn from_unix(secs: i64) -> Timestamp {
    Utc.timestamp_opt(secs, 0).single().expect("timestamp in range")
}

/// `YYYY-MM-DDThh:mm:ssZ`
pub fn format_utc(t: &Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Parses exactly `YYYY-MM-DDThh:mm:ssZ`; anything else is rejected.
pub fn parse_utc(s: &str) -> Option<Timestamp> {
    let b = s.as_bytes();
    if b.len() != 20 || b[10] != b'T' || b[19] != b'Z' {
        return None;
    }
    let naive = chrono::NaiveDateTime::parse_from_str(&s[..19], "%Y-%m-%dT%H:%M:%S").ok()?;
    Some(Utc.from_utc_datetime(&naive))
}

/// Parses a `YYYY-MM-DD` day.
pub fn parse_day(s: &str) -> Option<NaiveDate> {
    if s.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// Serde adapter writing [`Timestamp`]s as `YYYY-MM-DDThh:mm:ssZ`.
pub mod serde_utc {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{format_utc, parse_utc, Timestamp};

    pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_utc(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let s = String::deserialize(d)?;
        parse_utc(&s).ok_or_else(|| serde::de::Error::custom(format!("bad datetime {s:?}")))
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        use super::super::{format_utc, parse_utc, Timestamp};

        pub fn serialize<S: Serializer>(t: &Option<Timestamp>, s: S) -> Result<S::Ok, S::Error> {
            match t {
                Some(t) => s.serialize_some(&format_utc(t)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Timestamp>, D::Error> {
            match Option::<String>::deserialize(d)? {
                None => Ok(None),
                Some(s) => parse_utc(&s)
                    .map(Some)
                    .ok_or_else(|| serde::de::Error::custom(format!("bad datetime {s:?}"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utc_round_trip() {
        let t = parse_utc("2008-05-02T10:00:00Z").unwrap();
        assert_eq!(format_utc(&t), "2008-05-02T10:00:00Z");
        assert!(parse_utc("2008-05-02T10:00:00+00:00").is_none());
        assert!(parse_utc("2008-05-02 10:00:00Z").is_none());
        assert!(parse_utc("2008-05-02T10:00:00.5Z").is_none());
        assert!(parse_utc("2008-02-30T10:00:00Z").is_none());
    }

    #[test]
    fn manual_clock_is_shared() {
        let c = ManualClock::new(parse_utc("2008-01-01T00:00:00Z").unwrap());
        let c2 = c.clone();
        c.advance(61);
        assert_eq!(format_utc(&c2.now()), "2008-01-01T00:01:01Z");
    }
}
