//! OAI-PMH 2.0 endpoint over the repository.

mod request;
mod token;

pub use request::{OaiError, OaiErrorCode, OaiRequest, Verb};
pub use token::{Filter, ResumptionToken};

use std::io;

use chrono::Duration;

use crate::clock::{format_utc, Timestamp};
use crate::metadata::xml::{write_lago, write_oai_dc, LAGO_NS, OAI_DC_NS, OAI_DC_SCHEMA};
use crate::metadata::{crosswalk_to_dc, DcRecord, MetadataRecord, Schema};
use crate::repo::{Item, ItemQuery, Pid, Repository, SetSpec};
use crate::xmlutil::XmlOut;
use crate::Error;

pub const OAI_NS: &str = "http://www.openarchives.org/OAI/2.0/";
pub const OAI_SCHEMA: &str = "http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd";
pub const DEFAULT_PAGE_SIZE: usize = 100;
pub const DEFAULT_TOKEN_TTL_HOURS: i64 = 24;

#[derive(Debug, Clone)]
pub struct OaiConfig {
    pub repository_name: String,
    /// Domain part of `oai:<repo-id>:<pid>`.
    pub repo_id: String,
    /// Portal base URL; the endpoint lives at `<base_url>/oai`.
    pub base_url: String,
    pub admin_email: String,
    pub page_size: usize,
    pub token_ttl: Duration,
}

impl Default for OaiConfig {
    fn default() -> Self {
        OaiConfig {
            repository_name: "LAGO Data Repository".into(),
            repo_id: "lago.example.org".into(),
            base_url: "http://localhost:8080".into(),
            admin_email: "admin@lago.example.org".into(),
            page_size: DEFAULT_PAGE_SIZE,
            token_ttl: Duration::hours(DEFAULT_TOKEN_TTL_HOURS),
        }
    }
}

impl OaiConfig {
    pub fn endpoint(&self) -> String {
        format!("{}/oai", self.base_url.trim_end_matches('/'))
    }

    pub fn oai_identifier(&self, pid: Pid) -> String {
        format!("oai:{}:{pid}", self.repo_id)
    }

    pub fn pid_of(&self, identifier: &str) -> Option<Pid> {
        let rest = identifier.strip_prefix("oai:")?.strip_prefix(self.repo_id.as_str())?.strip_prefix(':')?;
        rest.parse().ok()
    }

    fn formats(&self) -> [(&'static str, String, &'static str); 2] {
        [
            ("oai_dc", OAI_DC_SCHEMA.to_string(), OAI_DC_NS),
            ("lago", format!("{}/schemas/lago.xsd", self.base_url.trim_end_matches('/')), LAGO_NS),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    OaiDc,
    Lago,
}

fn format(prefix: &str) -> Result<Format, OaiError> {
    match prefix {
        "oai_dc" => Ok(Format::OaiDc),
        "lago" => Ok(Format::Lago),
        _ => Err(OaiError::new(
            OaiErrorCode::CannotDisseminateFormat,
            format!("metadata format {prefix:?} is not supported"),
        )),
    }
}

/// Answers one request with a complete response document. Every problem,
/// including storage failures, is reported in-band.
pub fn handle(repo: &Repository, cfg: &OaiConfig, pairs: &[(String, String)]) -> String {
    let now = repo.now();
    match OaiRequest::parse(pairs) {
        Err(e) => document(cfg, now, None, |out| write_error(out, &e)),
        Ok(req) => {
            let body = match answer(repo, cfg, &req, now) {
                Ok(b) => b,
                Err(e) => Body::Error(e),
            };
            document(cfg, now, Some(&req), |out| match &body {
                Body::Error(e) => write_error(out, e),
                Body::Ok(f) => f(out),
            })
        }
    }
}

type Writer<'a> = XmlOut<&'a mut Vec<u8>>;
type Render = Box<dyn Fn(&mut Writer<'_>) -> io::Result<()>>;

enum Body {
    Ok(Render),
    Error(OaiError),
}

fn document(
    cfg: &OaiConfig,
    now: Timestamp,
    req: Option<&OaiRequest>,
    body: impl FnOnce(&mut Writer<'_>) -> io::Result<()>,
) -> String {
    let mut buf = Vec::new();
    let mut out = XmlOut::new(&mut buf);
    let location = format!("{OAI_NS} {OAI_SCHEMA}");
    (|| -> io::Result<()> {
        out.decl()?;
        out.start(
            "OAI-PMH",
            &[
                ("xmlns", OAI_NS),
                ("xmlns:xsi", "http://www.w3.org/2001/XMLSchema-instance"),
                ("xsi:schemaLocation", &location),
            ],
        )?;
        out.leaf("responseDate", &[], &format_utc(&now))?;
        let mut attrs: Vec<(&str, &str)> = Vec::new();
        if let Some(r) = req {
            attrs.push(("verb", r.verb.as_str()));
            attrs.extend(r.args.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        }
        out.leaf("request", &attrs, &cfg.endpoint())?;
        body(&mut out)?;
        out.end("OAI-PMH")
    })()
    .expect("writing to memory");
    drop(out);
    String::from_utf8(buf).expect("utf-8 output")
}

fn write_error(out: &mut Writer<'_>, e: &OaiError) -> io::Result<()> {
    out.leaf("error", &[("code", e.code.as_str())], &e.message)
}

fn internal(e: Error) -> OaiError {
    // The protocol has no server-error code; the closest in-band answer.
    tracing::error!(error = %e, "oai request failed");
    OaiError::new(OaiErrorCode::BadArgument, format!("request could not be served: {}", e.code()))
}

fn answer(repo: &Repository, cfg: &OaiConfig, req: &OaiRequest, now: Timestamp) -> Result<Body, OaiError> {
    match req.verb {
        Verb::Identify => identify(repo, cfg, now),
        Verb::ListMetadataFormats => list_metadata_formats(repo, cfg, req.arg("identifier")),
        Verb::ListSets => list_sets(repo, req.arg("resumptionToken")),
        Verb::GetRecord => get_record(
            repo,
            cfg,
            req.arg("identifier").expect("checked"),
            req.arg("metadataPrefix").expect("checked"),
        ),
        Verb::ListIdentifiers | Verb::ListRecords => list(repo, cfg, req, now),
    }
}

fn identify(repo: &Repository, cfg: &OaiConfig, now: Timestamp) -> Result<Body, OaiError> {
    let earliest = repo.earliest_datestamp().map_err(internal)?.unwrap_or(now);
    let cfg = cfg.clone();
    Ok(Body::Ok(Box::new(move |out| {
        out.start("Identify", &[])?;
        out.leaf("repositoryName", &[], &cfg.repository_name)?;
        out.leaf("baseURL", &[], &cfg.endpoint())?;
        out.leaf("protocolVersion", &[], "2.0")?;
        out.leaf("adminEmail", &[], &cfg.admin_email)?;
        out.leaf("earliestDatestamp", &[], &format_utc(&earliest))?;
        out.leaf("deletedRecord", &[], "persistent")?;
        out.leaf("granularity", &[], "YYYY-MM-DDThh:mm:ssZ")?;
        out.end("Identify")
    })))
}

fn find_item(repo: &Repository, cfg: &OaiConfig, identifier: &str) -> Result<Item, OaiError> {
    let missing = || OaiError::new(OaiErrorCode::IdDoesNotExist, format!("no item {identifier:?}"));
    let pid = cfg.pid_of(identifier).ok_or_else(missing)?;
    match repo.item(pid) {
        Ok(item) => Ok(item),
        Err(Error::UnknownPid(_)) => Err(missing()),
        Err(e) => Err(internal(e)),
    }
}

fn list_metadata_formats(repo: &Repository, cfg: &OaiConfig, identifier: Option<&str>) -> Result<Body, OaiError> {
    if let Some(id) = identifier {
        find_item(repo, cfg, id)?;
    }
    let formats = cfg.formats();
    Ok(Body::Ok(Box::new(move |out| {
        out.start("ListMetadataFormats", &[])?;
        for (prefix, schema, ns) in &formats {
            out.start("metadataFormat", &[])?;
            out.leaf("metadataPrefix", &[], prefix)?;
            out.leaf("schema", &[], schema)?;
            out.leaf("metadataNamespace", &[], ns)?;
            out.end("metadataFormat")?;
        }
        out.end("ListMetadataFormats")
    })))
}

fn list_sets(repo: &Repository, token: Option<&str>) -> Result<Body, OaiError> {
    if let Some(t) = token {
        // Set lists are never split, so no token was ever issued.
        return Err(OaiError::new(OaiErrorCode::BadResumptionToken, format!("unknown token {t:?}")));
    }
    let nodes = repo.nodes().map_err(internal)?;
    if nodes.is_empty() {
        return Err(OaiError::new(OaiErrorCode::NoSetHierarchy, "the repository has no hierarchy yet"));
    }
    Ok(Body::Ok(Box::new(move |out| {
        out.start("ListSets", &[])?;
        for n in &nodes {
            out.start("set", &[])?;
            out.leaf("setSpec", &[], n.set_spec.as_str())?;
            out.leaf("setName", &[], &n.name)?;
            out.end("set")?;
        }
        out.end("ListSets")
    })))
}

fn get_record(repo: &Repository, cfg: &OaiConfig, identifier: &str, prefix: &str) -> Result<Body, OaiError> {
    let item = find_item(repo, cfg, identifier)?;
    let fmt = format(prefix)?;
    let cfg = cfg.clone();
    Ok(Body::Ok(Box::new(move |out| {
        out.start("GetRecord", &[])?;
        write_record(out, &cfg, &item, fmt)?;
        out.end("GetRecord")
    })))
}

fn write_header(out: &mut Writer<'_>, cfg: &OaiConfig, item: &Item) -> io::Result<()> {
    if item.withdrawn {
        out.start("header", &[("status", "deleted")])?;
    } else {
        out.start("header", &[])?;
    }
    out.leaf("identifier", &[], &cfg.oai_identifier(item.pid))?;
    out.leaf("datestamp", &[], &format_utc(&item.datestamp))?;
    for spec in item.set_spec.chain() {
        out.leaf("setSpec", &[], &spec)?;
    }
    out.end("header")
}

fn write_record(out: &mut Writer<'_>, cfg: &OaiConfig, item: &Item, fmt: Format) -> io::Result<()> {
    out.start("record", &[])?;
    write_header(out, cfg, item)?;
    if !item.withdrawn {
        out.start("metadata", &[])?;
        match fmt {
            Format::OaiDc => write_oai_dc(out, &dc_of(&item.record))?,
            Format::Lago => write_lago(out, &item.record)?,
        }
        out.end("metadata")?;
    }
    out.end("record")
}

/// Stored records always validate; should one not, its dc fields still go out.
fn dc_of(record: &MetadataRecord) -> DcRecord {
    crosswalk_to_dc(record).unwrap_or_else(|_| {
        let dc: MetadataRecord = record.fields.iter().filter(|f| f.schema == Schema::Dc).cloned().collect();
        DcRecord::try_from(dc).expect("dc fields only")
    })
}

fn list(repo: &Repository, cfg: &OaiConfig, req: &OaiRequest, now: Timestamp) -> Result<Body, OaiError> {
    let (filter, after, offset, size) = match req.arg("resumptionToken") {
        Some(t) => {
            let bad = |m: &str| OaiError::new(OaiErrorCode::BadResumptionToken, m);
            let token = ResumptionToken::decode(t).ok_or_else(|| bad("malformed resumption token"))?;
            if now - token.issued_at > cfg.token_ttl || token.issued_at > now {
                return Err(bad("resumption token has expired"));
            }
            format(&token.filter.prefix).map_err(|_| bad("resumption token names an unknown format"))?;
            (token.filter, Some(token.cursor), token.offset, Some(token.complete_list_size))
        }
        None => {
            let (from, until) = req.window()?;
            let filter = Filter {
                prefix: req.arg("metadataPrefix").expect("checked").to_string(),
                from,
                until,
                set: req.arg("set").map(str::to_string),
            };
            format(&filter.prefix)?;
            (filter, None, 0, None)
        }
    };
    let fmt = format(&filter.prefix)?;
    let no_match = || OaiError::new(OaiErrorCode::NoRecordsMatch, "no records match the request");
    if let Some(set) = &filter.set {
        if SetSpec::parse(set).is_none() {
            return Err(no_match());
        }
    }
    let query = ItemQuery {
        set: filter.set.clone(),
        from: filter.from,
        until: filter.until,
        include_withdrawn: true,
        ..Default::default()
    };
    let page_size = cfg.page_size.max(1);
    let mut items = repo
        .list_items(&ItemQuery { after, limit: Some(page_size + 1), ..query.clone() })
        .map_err(internal)?;
    if items.is_empty() {
        return Err(no_match());
    }
    let more = items.len() > page_size;
    items.truncate(page_size);
    let delivered = offset + items.len() as u64;

    let token = if more || after.is_some() {
        let size = match size {
            Some(n) => n,
            None => repo.count_items(&query).map_err(internal)? as u64,
        };
        let last = items.last().expect("non-empty page");
        let next = more.then(|| {
            ResumptionToken {
                cursor: (last.datestamp, last.pid),
                filter: filter.clone(),
                issued_at: now,
                complete_list_size: size,
                offset: delivered,
            }
            .encode()
        });
        // The list may have grown since the first page.
        Some((next, size.max(delivered), offset))
    } else {
        None
    };

    let cfg = cfg.clone();
    let verb = req.verb;
    Ok(Body::Ok(Box::new(move |out| {
        out.start(verb.as_str(), &[])?;
        for item in &items {
            match verb {
                Verb::ListIdentifiers => write_header(out, &cfg, item)?,
                _ => write_record(out, &cfg, item, fmt)?,
            }
        }
        if let Some((next, size, cursor)) = &token {
            let (size, cursor) = (size.to_string(), cursor.to_string());
            let attrs = [("completeListSize", size.as_str()), ("cursor", cursor.as_str())];
            match next {
                Some(t) => out.leaf("resumptionToken", &attrs, t)?,
                None => out.empty("resumptionToken", &attrs)?,
            }
        }
        out.end(verb.as_str())
    })))
}
