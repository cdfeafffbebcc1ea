#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lago_dr::api::{router, AppState};
use lago_dr::config::ApiConfig;
use lago_dr_core::clock::{parse_utc, ManualClock};
use lago_dr_core::ingest;
use lago_dr_core::metadata::{manifest, DataType, MetadataRecord};
use lago_dr_core::repo::{RepoOptions, Repository};
use sha2::{Digest, Sha256};
use tower::ServiceExt;

pub fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/lago.tsv")
}

pub const ANA: &str = "tok-ana";
pub const BOB: &str = "tok-bob";
pub const ADMIN: &str = "tok-admin";

pub struct App {
    pub dir: tempfile::TempDir,
    pub clock: ManualClock,
    pub repo: Arc<Repository>,
    pub config: ApiConfig,
    router: Router,
    rt: tokio::runtime::Runtime,
}

pub struct Resp {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Resp {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }

    /// The `error` code of a JSON error body.
    pub fn code(&self) -> String {
        self.json()["error"].as_str().expect("error code").to_string()
    }

    pub fn content_type(&self) -> &str {
        self.headers.get(header::CONTENT_TYPE).map_or("", |v| v.to_str().unwrap())
    }
}

/// The fixture hierarchy, and members: ana may deposit in Venezuela, bob
/// in Bolivia; admin holds no grants.
pub fn app() -> App {
    app_with(|_| {})
}

pub fn app_with(tweak: impl FnOnce(&mut ApiConfig)) -> App {
    let app = app_on(tempfile::tempdir().unwrap(), tweak);
    lago_dr::hierarchy::seed_file(&app.repo, &fixture_path()).unwrap();
    ingest::add_member(&app.repo, "Ana Pérez", "ana@ula.ve", ANA, &["ve"], false).unwrap();
    ingest::add_member(&app.repo, "Bob Quispe", "bob@umsa.bo", BOB, &["bo"], false).unwrap();
    ingest::add_member(&app.repo, "Operator", "ops@lago.example.org", ADMIN, &[], true).unwrap();
    app
}

/// Serves whatever repository `dir` holds.
pub fn app_on(dir: tempfile::TempDir, tweak: impl FnOnce(&mut ApiConfig)) -> App {
    let clock = ManualClock::new(parse_utc("2008-05-01T00:00:00Z").unwrap());
    let options = RepoOptions {
        no_sync: true,
        ..Default::default()
    };
    let repo = Arc::new(Repository::open(dir.path(), Arc::new(clock.clone()), options).unwrap());
    let mut config = ApiConfig {
        data_dir: dir.path().to_path_buf(),
        base_url: "http://portal.test".into(),
        repo_id: "lago.test".into(),
        ..Default::default()
    };
    tweak(&mut config);
    let router = router(AppState::new(repo.clone(), config.clone()));
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
    App {
        dir,
        clock,
        repo,
        config,
        router,
        rt,
    }
}

impl App {
    pub fn send(&self, req: Request<Body>) -> Resp {
        let router = self.router.clone();
        self.rt.block_on(async move {
            let resp = router.oneshot(req).await.unwrap();
            let status = resp.status();
            let headers = resp.headers().clone();
            let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
            Resp { status, headers, body }
        })
    }

    pub fn get(&self, uri: &str) -> Resp {
        self.send(Request::get(uri).body(Body::empty()).unwrap())
    }

    pub fn post_json(&self, uri: &str, token: Option<&str>, body: serde_json::Value) -> Resp {
        let mut req = Request::builder()
            .method(Method::POST)
            .uri(uri)
            .header(header::CONTENT_TYPE, "application/json");
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        self.send(req.body(Body::from(body.to_string())).unwrap())
    }

    pub fn post_form(&self, uri: &str, form: &str) -> Resp {
        let req = Request::post(uri)
            .header(header::CONTENT_TYPE, "application/x-www-form-urlencoded")
            .body(Body::from(form.to_string()))
            .unwrap();
        self.send(req)
    }

    /// A multipart deposit with a `manifest` part and one part per file.
    pub fn deposit(&self, collection: i64, token: Option<&str>, manifest_text: &str, files: &[(&str, &[u8])]) -> Resp {
        let (content_type, body) = multipart(manifest_text, files);
        let mut req = Request::post(format!("/api/collections/{collection}/items")).header(header::CONTENT_TYPE, content_type);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        self.send(req.body(Body::from(body)).unwrap())
    }

    pub fn node_id(&self, spec: &str) -> i64 {
        self.repo.node_by_set(spec).unwrap().id.0
    }

    pub fn oai(&self, query: &str) -> String {
        let r = self.get(&format!("/oai?{query}"));
        assert_eq!(r.status, StatusCode::OK);
        r.text()
    }
}

pub const BOUNDARY: &str = "lago-test-boundary-7f3a";

pub fn multipart(manifest_text: &str, files: &[(&str, &[u8])]) -> (String, Vec<u8>) {
    let mut body = Vec::new();
    body.extend_from_slice(
        format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"manifest\"\r\n\r\n{manifest_text}\r\n").as_bytes(),
    );
    for (name, bytes) in files {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{name}\"\r\nContent-Type: application/octet-stream\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={BOUNDARY}"), body)
}

/// A valid record for `dt`.
pub fn record(dt: DataType, title: &str) -> MetadataRecord {
    let mut r = MetadataRecord::new().with("dc.title", title).with("lago.datatype", dt.as_str());
    if dt != DataType::Document {
        r.push("lago.responsible", "Ana Pérez");
        r.push("lago.contact", "ana@example.org");
    }
    if dt == DataType::WcdRaw {
        r.push("lago.capture.start", "2008-05-01T10:00:00Z");
        r.push("lago.capture.end", "2008-05-01T11:00:00Z");
    }
    r
}

/// Every deposit-form field for a WCD run.
pub fn full_wcd_record(title: &str) -> MetadataRecord {
    MetadataRecord::new()
        .with("dc.title", title)
        .with("dc.description", "Background run, detector 2")
        .with("dc.subject", "cosmic rays")
        .with("dc.language", "es")
        .with("lago.datatype", "wcd-raw")
        .with("lago.responsible", "Ana Pérez")
        .with("lago.contact", "ana@ula.ve")
        .with("lago.capture.start", "2008-05-01T10:00:00Z")
        .with("lago.capture.end", "2008-05-01T11:30:00Z")
        .with("lago.calibration.ref", "lago/3")
        .with("lago.resources", "WCD-2, 9\" PMT, Nexys2 board")
        .with("lago.problems", "power cut at 10:47 & restart")
        .with("lago.pmt.temperature", "21.5")
        .with("lago.pmt.voltage", "1450")
        .with("lago.site", "Pico Espejo")
}

pub fn manifest_of(record: &MetadataRecord) -> String {
    manifest::format(record)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes an item-export directory holding `record` and `files` as data files.
pub fn write_export_dir(dir: &Path, record: &MetadataRecord, files: &[(&str, &[u8])]) {
    fs::create_dir_all(dir).unwrap();
    let mut text = manifest::format(record);
    for (seq, (name, bytes)) in files.iter().enumerate() {
        fs::write(dir.join(name), bytes).unwrap();
        let value = format!(
            "{seq},{name},data,application/octet-stream,{},{},",
            bytes.len(),
            sha256_hex(bytes)
        );
        text.push_str(&format!("bitstream = {}\n", manifest::escape(&value)));
    }
    fs::write(dir.join("manifest"), text).unwrap();
}

/// Percent-encodes the slash of a pid for use in a path.
pub fn pid_path(pid: &str) -> String {
    pid.replace('/', "%2F")
}
