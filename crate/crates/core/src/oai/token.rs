//! Stateless resumption tokens: the cursor and filter as JSON, base64url.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::repo::Pid;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    #[serde(rename = "m")]
    pub prefix: String,
    #[serde(rename = "f", default, skip_serializing_if = "Option::is_none", with = "crate::clock::serde_utc::option")]
    pub from: Option<Timestamp>,
    #[serde(rename = "u", default, skip_serializing_if = "Option::is_none", with = "crate::clock::serde_utc::option")]
    pub until: Option<Timestamp>,
    #[serde(rename = "s", default, skip_serializing_if = "Option::is_none")]
    pub set: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumptionToken {
    /// Last delivered `(datestamp, pid)`.
    #[serde(rename = "c", with = "cursor")]
    pub cursor: (Timestamp, Pid),
    #[serde(rename = "q")]
    pub filter: Filter,
    #[serde(rename = "i", with = "crate::clock::serde_utc")]
    pub issued_at: Timestamp,
    /// Size of the complete list when the first page was served.
    #[serde(rename = "n")]
    pub complete_list_size: u64,
    /// Records delivered before the next page.
    #[serde(rename = "o")]
    pub offset: u64,
}

impl ResumptionToken {
    pub fn encode(&self) -> String {
        URL_SAFE_NO_PAD.encode(serde_json::to_vec(self).expect("token serializes"))
    }

    pub fn decode(s: &str) -> Option<ResumptionToken> {
        let bytes = URL_SAFE_NO_PAD.decode(s).ok()?;
        serde_json::from_slice(&bytes).ok()
    }
}

mod cursor {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::clock::{from_unix, Timestamp};
    use crate::repo::Pid;

    pub fn serialize<S: Serializer>(c: &(Timestamp, Pid), s: S) -> Result<S::Ok, S::Error> {
        (c.0.timestamp(), c.1 .0).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(Timestamp, Pid), D::Error> {
        let (secs, n) = <(i64, u64)>::deserialize(d)?;
        if n == 0 || !(0..=253_402_300_799).contains(&secs) {
            return Err(serde::de::Error::custom("cursor out of range"));
        }
        Ok((from_unix(secs), Pid(n)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::from_unix;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(secs in 0i64..4_000_000_000, n in 1u64..u64::MAX,
                      from in proptest::option::of(0i64..4_000_000_000),
                      set in proptest::option::of("[a-z]{1,5}(:[a-z]{1,5}){0,2}"),
                      size in any::<u64>(), offset in any::<u64>()) {
            let t = ResumptionToken {
                cursor: (from_unix(secs), Pid(n)),
                filter: Filter { prefix: "oai_dc".into(), from: from.map(from_unix), until: None, set },
                issued_at: from_unix(secs),
                complete_list_size: size,
                offset,
            };
            let s = t.encode();
            prop_assert!(s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_'));
            prop_assert_eq!(ResumptionToken::decode(&s), Some(t));
        }
    }

    #[test]
    fn garbage_is_rejected() {
        for bad in ["", "!!", "e30", "eyJjIjpbMCwwXX0"] {
            assert_eq!(ResumptionToken::decode(bad), None, "{bad}");
        }
    }
}
