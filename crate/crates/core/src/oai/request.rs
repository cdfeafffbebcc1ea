//! Protocol requests and their argument legality.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{NaiveTime, TimeZone, Utc};

use crate::clock::{parse_day, parse_utc, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Identify,
    ListMetadataFormats,
    ListSets,
    ListIdentifiers,
    ListRecords,
    GetRecord,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Identify => "Identify",
            Verb::ListMetadataFormats => "ListMetadataFormats",
            Verb::ListSets => "ListSets",
            Verb::ListIdentifiers => "ListIdentifiers",
            Verb::ListRecords => "ListRecords",
            Verb::GetRecord => "GetRecord",
        }
    }

    fn parse(s: &str) -> Option<Verb> {
        Some(match s {
            "Identify" => Verb::Identify,
            "ListMetadataFormats" => Verb::ListMetadataFormats,
            "ListSets" => Verb::ListSets,
            "ListIdentifiers" => Verb::ListIdentifiers,
            "ListRecords" => Verb::ListRecords,
            "GetRecord" => Verb::GetRecord,
            _ => return None,
        })
    }

    /// (required, optional, exclusive) argument names.
    fn arguments(self) -> (&'static [&'static str], &'static [&'static str], Option<&'static str>) {
        match self {
            Verb::Identify => (&[], &[], None),
            Verb::ListMetadataFormats => (&[], &["identifier"], None),
            Verb::ListSets => (&[], &[], Some("resumptionToken")),
            Verb::ListIdentifiers | Verb::ListRecords => {
                (&["metadataPrefix"], &["from", "until", "set"], Some("resumptionToken"))
            }
            Verb::GetRecord => (&["identifier", "metadataPrefix"], &[], None),
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The protocol's error conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OaiErrorCode {
    BadArgument,
    BadResumptionToken,
    BadVerb,
    CannotDisseminateFormat,
    IdDoesNotExist,
    NoRecordsMatch,
    NoMetadataFormats,
    NoSetHierarchy,
}

impl OaiErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            OaiErrorCode::BadArgument => "badArgument",
            OaiErrorCode::BadResumptionToken => "badResumptionToken",
            OaiErrorCode::BadVerb => "badVerb",
            OaiErrorCode::CannotDisseminateFormat => "cannotDisseminateFormat",
            OaiErrorCode::IdDoesNotExist => "idDoesNotExist",
            OaiErrorCode::NoRecordsMatch => "noRecordsMatch",
            OaiErrorCode::NoMetadataFormats => "noMetadataFormats",
            OaiErrorCode::NoSetHierarchy => "noSetHierarchy",
        }
    }

    pub fn parse(s: &str) -> Option<OaiErrorCode> {
        [
            OaiErrorCode::BadArgument,
            OaiErrorCode::BadResumptionToken,
            OaiErrorCode::BadVerb,
            OaiErrorCode::CannotDisseminateFormat,
            OaiErrorCode::IdDoesNotExist,
            OaiErrorCode::NoRecordsMatch,
            OaiErrorCode::NoMetadataFormats,
            OaiErrorCode::NoSetHierarchy,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OaiError {
    pub code: OaiErrorCode,
    pub message: String,
}

impl OaiError {
    pub fn new(code: OaiErrorCode, message: impl Into<String>) -> Self {
        OaiError { code, message: message.into() }
    }
}

/// A request whose arguments are legal for its verb.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OaiRequest {
    pub verb: Verb,
    pub args: BTreeMap<String, String>,
}

impl OaiRequest {
    /// Checks raw `key=value` pairs as received over HTTP.
    pub fn parse(pairs: &[(String, String)]) -> Result<OaiRequest, OaiError> {
        let verbs: Vec<&str> = pairs.iter().filter(|(k, _)| k == "verb").map(|(_, v)| v.as_str()).collect();
        let verb = match verbs.as_slice() {
            [] => return Err(OaiError::new(OaiErrorCode::BadVerb, "missing verb argument")),
            [v] => Verb::parse(v).ok_or_else(|| OaiError::new(OaiErrorCode::BadVerb, format!("illegal verb {v:?}")))?,
            _ => return Err(OaiError::new(OaiErrorCode::BadVerb, "verb argument repeated")),
        };
        let bad = |m: String| Err(OaiError::new(OaiErrorCode::BadArgument, m));
        let mut args = BTreeMap::new();
        for (k, v) in pairs.iter().filter(|(k, _)| k != "verb") {
            if args.insert(k.clone(), v.clone()).is_some() {
                return bad(format!("argument {k} repeated"));
            }
        }
        let (required, optional, exclusive) = verb.arguments();
        for k in args.keys() {
            let known = required.contains(&k.as_str()) || optional.contains(&k.as_str()) || exclusive == Some(k);
            if !known {
                return bad(format!("illegal argument {k} for {verb}"));
            }
        }
        match exclusive {
            Some(x) if args.contains_key(x) => {
                if args.len() > 1 {
                    return bad(format!("{x} is an exclusive argument"));
                }
            }
            _ => {
                for r in required {
                    if !args.contains_key(*r) {
                        return bad(format!("missing required argument {r}"));
                    }
                }
            }
        }
        let req = OaiRequest { verb, args };
        // Validate the datestamp window up front.
        req.window()?;
        Ok(req)
    }

    pub fn arg(&self, k: &str) -> Option<&str> {
        self.args.get(k).map(String::as_str)
    }

    /// `from`/`until` as an inclusive window. Day-granularity bounds cover
    /// the whole day.
    pub fn window(&self) -> Result<(Option<Timestamp>, Option<Timestamp>), OaiError> {
        let from = self.arg("from").map(|s| bound(s, false)).transpose()?;
        let until = self.arg("until").map(|s| bound(s, true)).transpose()?;
        if let (Some((f, fg)), Some((u, ug))) = (from, until) {
            if fg != ug {
                return Err(OaiError::new(OaiErrorCode::BadArgument, "from and until differ in granularity"));
            }
            if f > u {
                return Err(OaiError::new(OaiErrorCode::BadArgument, "from is later than until"));
            }
        }
        Ok((from.map(|x| x.0), until.map(|x| x.0)))
    }
}

/// A bound and whether it was given at day granularity.
fn bound(s: &str, end_of_day: bool) -> Result<(Timestamp, bool), OaiError> {
    if let Some(t) = parse_utc(s) {
        return Ok((t, false));
    }
    if let Some(day) = parse_day(s) {
        let time = if end_of_day {
            NaiveTime::from_hms_opt(23, 59, 59).expect("valid time")
        } else {
            NaiveTime::MIN
        };
        return Ok((Utc.from_utc_datetime(&day.and_time(time)), true));
    }
    Err(OaiError::new(OaiErrorCode::BadArgument, format!("bad datestamp {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(q: &str) -> Result<OaiRequest, OaiErrorCode> {
        let pairs: Vec<(String, String)> = q
            .split('&')
            .filter(|s| !s.is_empty())
            .map(|kv| {
                let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
                (k.to_string(), v.to_string())
            })
            .collect();
        OaiRequest::parse(&pairs).map_err(|e| e.code)
    }

    #[test]
    fn legality() {
        use OaiErrorCode::*;
        let cases: &[(&str, Option<OaiErrorCode>)] = &[
            ("verb=Identify", None),
            ("verb=Identify&set=x", Some(BadArgument)),
            ("", Some(BadVerb)),
            ("verb=Frobnicate", Some(BadVerb)),
            ("verb=Identify&verb=Identify", Some(BadVerb)),
            ("verb=ListRecords", Some(BadArgument)),
            ("verb=ListRecords&metadataPrefix=oai_dc", None),
            ("verb=ListRecords&metadataPrefix=oai_dc&metadataPrefix=lago", Some(BadArgument)),
            ("verb=ListRecords&resumptionToken=abc", None),
            ("verb=ListRecords&resumptionToken=abc&metadataPrefix=oai_dc", Some(BadArgument)),
            ("verb=ListIdentifiers&metadataPrefix=oai_dc&identifier=x", Some(BadArgument)),
            ("verb=ListIdentifiers&metadataPrefix=oai_dc&from=2008-01-01&until=2008-01-02", None),
            ("verb=ListIdentifiers&metadataPrefix=oai_dc&from=2008-01-01&until=2008-01-02T00:00:00Z", Some(BadArgument)),
            ("verb=ListIdentifiers&metadataPrefix=oai_dc&from=2008-02-01&until=2008-01-02", Some(BadArgument)),
            ("verb=ListIdentifiers&metadataPrefix=oai_dc&from=2008-01-01T00:00", Some(BadArgument)),
            ("verb=GetRecord&identifier=x", Some(BadArgument)),
            ("verb=GetRecord&identifier=x&metadataPrefix=oai_dc", None),
            ("verb=ListSets&resumptionToken=x", None),
            ("verb=ListSets&set=x", Some(BadArgument)),
            ("verb=ListMetadataFormats&identifier=x", None),
        ];
        for (q, want) in cases {
            assert_eq!(req(q).err(), *want, "{q}");
        }
    }

    #[test]
    fn day_bounds_cover_whole_days() {
        let r = req("verb=ListRecords&metadataPrefix=oai_dc&from=2008-01-01&until=2008-01-01").unwrap();
        let (f, u) = r.window().unwrap();
        assert_eq!(crate::clock::format_utc(&f.unwrap()), "2008-01-01T00:00:00Z");
        assert_eq!(crate::clock::format_utc(&u.unwrap()), "2008-01-01T23:59:59Z");
    }
}
