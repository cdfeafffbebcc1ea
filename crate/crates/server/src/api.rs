//! HTTP routes. Reads are anonymous; writes take `Authorization: Bearer`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::multipart::Multipart;
use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::{FormRejection, JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Form, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Duration;
use lago_dr_core::clock::parse_utc;
use lago_dr_core::discovery::{self, Criterion, EventKind, SearchQuery, StatEvent};
use lago_dr_core::harvester::{self, AggregateQuery};
use lago_dr_core::ingest::{self, Member};
use lago_dr_core::metadata::{manifest, xml::LAGO_XSD, DataType};
use lago_dr_core::oai::{self, OaiConfig};
use lago_dr_core::repo::{HierarchyNode, ItemQuery, License, NewFile, NodeId, NodeKind, Pid, Repository, Role};
use lago_dr_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::ApiConfig;
use crate::error::ApiError;

pub struct AppState {
    pub repo: Arc<Repository>,
    pub config: ApiConfig,
    pub oai: OaiConfig,
}

impl AppState {
    pub fn new(repo: Arc<Repository>, config: ApiConfig) -> Arc<Self> {
        let oai = config.oai();
        Arc::new(AppState { repo, config, oai })
    }
}

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/communities", get(communities))
        .route("/api/nodes", post(create_node))
        .route("/api/nodes/{id}", get(node))
        .route(
            "/api/collections/{id}/items",
            get(collection_items).post(deposit).layer(DefaultBodyLimit::disable()),
        )
        .route("/api/items/{pid}", get(item))
        .route("/api/items/{pid}/bitstreams/{seq}", get(bitstream))
        .route("/api/items/{pid}/withdraw", post(withdraw))
        .route("/api/items/{pid}/recommend", post(recommend))
        .route("/api/browse", get(browse))
        .route("/api/search", get(search))
        .route("/api/aggregate/search", get(aggregate_search))
        .route("/api/subscriptions", post(subscribe))
        .route("/api/members", post(add_member))
        .route("/api/stats", get(stats))
        .route("/feeds/{file}", get(feed))
        .route("/oai", get(oai_get).post(oai_post))
        .route("/schemas/lago.xsd", get(lago_xsd))
        .fallback(|| async {
            (
                StatusCode::NOT_FOUND,
                Json(serde_json::json!({ "error": "NotFound", "message": "no such endpoint" })),
            )
        })
        .with_state(state)
}

/// Runs blocking repository work off the async executor.
async fn blocking<T, F>(state: &Arc<AppState>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> lago_dr_core::Result<T> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(ApiError::from)
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim().to_string())
}

fn member_of(repo: &Repository, token: Option<&str>) -> lago_dr_core::Result<Member> {
    ingest::authenticate(repo, token.unwrap_or(""))
}

fn visit(repo: &Repository, kind: EventKind, subject: &str) {
    if let Err(e) = discovery::record_event(repo, &StatEvent::now(repo, kind, subject)) {
        tracing::warn!(error = %e, "could not record event");
    }
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(t)| t).map_err(|e| ApiError::BadParameter(e.body_text()))
}

fn json<T>(j: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    j.map(|Json(t)| t).map_err(|e| ApiError::BadParameter(e.body_text()))
}

fn node_id(raw: &str) -> ApiResult<NodeId> {
    raw.parse().map(NodeId).map_err(|_| ApiError::Core(Error::UnknownNode(raw.to_string())))
}

#[derive(Serialize)]
struct TreeNode {
    #[serde(flatten)]
    node: HierarchyNode,
    children: Vec<TreeNode>,
}

fn build_tree(nodes: &[HierarchyNode], parent: Option<NodeId>) -> Vec<TreeNode> {
    nodes
        .iter()
        .filter(|n| n.parent == parent)
        .map(|n| TreeNode {
            node: n.clone(),
            children: build_tree(nodes, Some(n.id)),
        })
        .collect()
}

async fn communities(State(st): Shared) -> ApiResult<Json<Vec<TreeNode>>> {
    let nodes = blocking(&st, |s| {
        visit(&s.repo, EventKind::Visit, "site");
        s.repo.nodes()
    })
    .await?;
    Ok(Json(build_tree(&nodes, None)))
}

#[derive(Serialize)]
struct NodeView {
    node: HierarchyNode,
    /// From the community down to the node itself.
    ancestry: Vec<HierarchyNode>,
    children: Vec<HierarchyNode>,
    item_count: usize,
}

async fn node(State(st): Shared, Path(id): Path<String>) -> ApiResult<Json<NodeView>> {
    let id = node_id(&id)?;
    let view = blocking(&st, move |s| {
        let node = s.repo.node(id)?;
        visit(&s.repo, EventKind::Visit, &id.to_string());
        Ok(NodeView {
            ancestry: s.repo.ancestry(id)?,
            children: s.repo.children(Some(id))?,
            item_count: s.repo.count_items(&ItemQuery {
                set: Some(node.set_spec.as_str().to_string()),
                ..Default::default()
            })?,
            node,
        })
    })
    .await?;
    Ok(Json(view))
}

#[derive(Deserialize)]
struct NewNode {
    kind: NodeKind,
    name: String,
    slug: String,
    #[serde(default)]
    parent: Option<NodeId>,
    #[serde(default)]
    datatype: Option<DataType>,
}

async fn create_node(
    State(st): Shared,
    headers: HeaderMap,
    body: Result<Json<NewNode>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<HierarchyNode>)> {
    let token = bearer(&headers);
    let admin = blocking(&st, move |s| member_of(&s.repo, token.as_deref())).await?;
    if !admin.admin {
        return Err(Error::Forbidden(format!("{} is not an administrator", admin.name)).into());
    }
    let n = json(body)?;
    let node = blocking(&st, move |s| s.repo.create_node(n.kind, &n.name, &n.slug, n.parent, n.datatype)).await?;
    Ok((StatusCode::CREATED, Json(node)))
}

#[derive(Deserialize)]
struct NewMember {
    name: String,
    email: String,
    token: String,
    #[serde(default)]
    communities: Vec<String>,
    #[serde(default)]
    admin: bool,
}

async fn add_member(
    State(st): Shared,
    headers: HeaderMap,
    body: Result<Json<NewMember>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Member>)> {
    let token = bearer(&headers);
    let admin = blocking(&st, move |s| member_of(&s.repo, token.as_deref())).await?;
    if !admin.admin {
        return Err(Error::Forbidden(format!("{} is not an administrator", admin.name)).into());
    }
    let m = json(body)?;
    let member = blocking(&st, move |s| {
        let slugs: Vec<&str> = m.communities.iter().map(String::as_str).collect();
        ingest::add_member(&s.repo, &m.name, &m.email, &m.token, &slugs, m.admin)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(member)))
}

#[derive(Deserialize, Default)]
struct Page {
    limit: Option<usize>,
    #[serde(default)]
    offset: usize,
}

#[derive(Serialize)]
struct ItemPage {
    set_spec: String,
    total: usize,
    offset: usize,
    items: Vec<lago_dr_core::repo::Item>,
}

async fn collection_items(
    State(st): Shared,
    Path(id): Path<String>,
    q: Result<Query<Page>, QueryRejection>,
) -> ApiResult<Json<ItemPage>> {
    let id = node_id(&id)?;
    let page = query(q)?;
    let out = blocking(&st, move |s| {
        let node = s.repo.node(id)?;
        let set = node.set_spec.as_str().to_string();
        let total = s.repo.count_items(&ItemQuery {
            set: Some(set.clone()),
            ..Default::default()
        })?;
        let items = s.repo.list_items(&ItemQuery {
            set: Some(set.clone()),
            newest_first: true,
            limit: page.limit.map(|l| l + page.offset),
            ..Default::default()
        })?;
        Ok(ItemPage {
            set_spec: set,
            total,
            offset: page.offset,
            items: items.into_iter().skip(page.offset).collect(),
        })
    })
    .await?;
    Ok(Json(out))
}

/// Multipart deposit: a `manifest` part holding the metadata manifest and
/// one part per file. Manifest lines `file = <filename>,<role>[,<license>]`
/// set a file's role (default `data`) and license.
async fn deposit(
    State(st): Shared,
    Path(id): Path<String>,
    headers: HeaderMap,
    form: Result<Multipart, MultipartRejection>,
) -> ApiResult<Response> {
    let id = node_id(&id)?;
    let token = bearer(&headers);
    let member = blocking(&st, move |s| {
        let m = member_of(&s.repo, token.as_deref())?;
        if !ingest::may_deposit(&s.repo, &m, id)? {
            let node = s.repo.node(id)?;
            return Err(Error::Forbidden(format!("{} may not deposit into {}", m.name, node.set_spec.as_str())));
        }
        Ok(m)
    })
    .await?;

    let mut form = form.map_err(|e| ApiError::BadParameter(e.body_text()))?;
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::BadParameter(e.body_text());
    let mut manifest_text = None;
    let mut uploads: Vec<(String, Bytes)> = Vec::new();
    while let Some(field) = form.next_field().await.map_err(bad)? {
        let name = field.name().unwrap_or("").to_string();
        if name == "manifest" && field.file_name().is_none() {
            manifest_text = Some(field.text().await.map_err(bad)?);
        } else if let Some(filename) = field.file_name().map(str::to_string) {
            uploads.push((filename, field.bytes().await.map_err(bad)?));
        } else if name == "manifest" {
            let bytes = field.bytes().await.map_err(bad)?;
            manifest_text =
                Some(String::from_utf8(bytes.to_vec()).map_err(|_| Error::BadManifest("manifest is not UTF-8".into()))?);
        }
    }
    let text = manifest_text.ok_or_else(|| Error::BadManifest("missing `manifest` part".into()))?;
    let parsed = manifest::parse(&text).map_err(|e| Error::BadManifest(e.to_string()))?;

    let mut roles: HashMap<String, (Role, Option<License>)> = HashMap::new();
    for (line, key, value) in &parsed.extra {
        if key != "file" {
            return Err(Error::BadManifest(format!("manifest line {line}: unknown key {key:?}")).into());
        }
        let parts: Vec<&str> = value.rsplitn(3, ',').map(str::trim).collect();
        let (filename, role, license) = match parts.as_slice() {
            [role, filename] => (*filename, *role, None),
            [license, role, filename] => match role.parse::<Role>() {
                Ok(_) => (*filename, *role, Some(*license)),
                // A comma inside the file name, no license.
                Err(_) => (value.rsplit_once(',').map_or("", |(f, _)| f), *license, None),
            },
            _ => return Err(Error::BadManifest(format!("manifest line {line}: expected `file = <name>,<role>[,<license>]`")).into()),
        };
        let role: Role = role.parse()?;
        let license = license.map(str::parse::<License>).transpose()?;
        roles.insert(filename.trim().to_string(), (role, license));
    }
    for name in roles.keys() {
        if !uploads.iter().any(|(f, _)| f == name) {
            return Err(Error::BadManifest(format!("manifest names file {name:?} but no such part was uploaded")).into());
        }
    }
    let files: Vec<NewFile> = uploads
        .into_iter()
        .map(|(filename, bytes)| {
            let (role, license) = roles.get(&filename).copied().unwrap_or((Role::Data, None));
            let mut f = NewFile::bytes(&filename, role, bytes.to_vec());
            f.license = license;
            f
        })
        .collect();
    let record = parsed.record;
    let item = blocking(&st, move |s| ingest::deposit(&s.repo, &member, id, record, files)).await?;
    let location = format!("/api/items/{}", item.pid.to_string().replace('/', "%2F"));
    let mut resp = (StatusCode::CREATED, Json(item)).into_response();
    if let Ok(v) = HeaderValue::from_str(&location) {
        resp.headers_mut().insert(header::LOCATION, v);
    }
    Ok(resp)
}

fn pid(raw: &str) -> ApiResult<Pid> {
    Ok(raw.parse::<Pid>()?)
}

async fn item(State(st): Shared, Path(raw): Path<String>) -> ApiResult<Json<lago_dr_core::repo::Item>> {
    let pid = pid(&raw)?;
    let item = blocking(&st, move |s| {
        let item = s.repo.item(pid)?;
        if !item.withdrawn {
            visit(&s.repo, EventKind::ItemView, &pid.to_string());
        }
        Ok(item)
    })
    .await?;
    Ok(Json(item))
}

async fn bitstream(State(st): Shared, Path((raw, seq)): Path<(String, String)>) -> ApiResult<Response> {
    let pid = pid(&raw)?;
    let seq: u32 = seq.parse().map_err(|_| Error::UnknownBitstream(u32::MAX))?;
    let (b, bytes) = blocking(&st, move |s| {
        let out = s.repo.open_bitstream(pid, seq)?;
        let mut ev = StatEvent::now(&s.repo, EventKind::Download, pid.to_string());
        ev.bitstream = Some(seq);
        discovery::record_event(&s.repo, &ev)?;
        Ok(out)
    })
    .await?;
    let disposition = format!("attachment; filename=\"{}\"", b.filename.replace(['"', '\\'], "_"));
    let mut resp = bytes.into_response();
    let h = resp.headers_mut();
    h.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_str(&b.media_type).unwrap_or(HeaderValue::from_static("application/octet-stream")),
    );
    if let Ok(v) = HeaderValue::from_str(&disposition) {
        h.insert(header::CONTENT_DISPOSITION, v);
    }
    if let Ok(v) = HeaderValue::from_str(&format!("sha-256={}", b.checksum)) {
        h.insert("x-checksum", v);
    }
    Ok(resp)
}

async fn withdraw(State(st): Shared, Path(raw): Path<String>, headers: HeaderMap) -> ApiResult<Json<lago_dr_core::repo::Item>> {
    let pid = pid(&raw)?;
    let token = bearer(&headers);
    let item = blocking(&st, move |s| {
        let m = member_of(&s.repo, token.as_deref())?;
        let item = s.repo.item(pid)?;
        if !m.admin && !ingest::may_deposit(&s.repo, &m, item.collection)? {
            return Err(Error::Forbidden(format!("{} may not withdraw {pid}", m.name)));
        }
        s.repo.withdraw_item(pid)
    })
    .await?;
    Ok(Json(item))
}

#[derive(Deserialize)]
struct Recommendation {
    to: String,
    #[serde(default)]
    from_name: Option<String>,
}

async fn recommend(
    State(st): Shared,
    Path(raw): Path<String>,
    body: Result<Json<Recommendation>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<discovery::OutboxMessage>)> {
    let pid = pid(&raw)?;
    let r = json(body)?;
    let msg = blocking(&st, move |s| discovery::recommend(&s.repo, pid, &r.to, r.from_name.as_deref())).await?;
    Ok((StatusCode::ACCEPTED, Json(msg)))
}

#[derive(Deserialize)]
struct BrowseParams {
    #[serde(default)]
    criterion: String,
    key: Option<String>,
}

async fn browse(State(st): Shared, q: Result<Query<BrowseParams>, QueryRejection>) -> ApiResult<Json<Vec<discovery::BrowseGroup>>> {
    let p = query(q)?;
    let criterion: Criterion = p.criterion.parse()?;
    let groups = blocking(&st, move |s| {
        visit(&s.repo, EventKind::Visit, "site");
        discovery::browse(&s.repo, criterion, p.key.as_deref())
    })
    .await?;
    Ok(Json(groups))
}

async fn search(State(st): Shared, q: Result<Query<SearchQuery>, QueryRejection>) -> ApiResult<Json<Vec<lago_dr_core::repo::Item>>> {
    let sq = query(q)?;
    let items = blocking(&st, move |s| {
        visit(&s.repo, EventKind::Visit, "site");
        discovery::search(&s.repo, &sq)
    })
    .await?;
    Ok(Json(items))
}

async fn aggregate_search(
    State(st): Shared,
    q: Result<Query<AggregateQuery>, QueryRejection>,
) -> ApiResult<Json<Vec<harvester::AggregateEntry>>> {
    let aq = query(q)?;
    Ok(Json(blocking(&st, move |s| harvester::aggregate_search(&s.repo, &aq)).await?))
}

#[derive(Deserialize)]
struct Subscription {
    collection: NodeId,
}

async fn subscribe(
    State(st): Shared,
    headers: HeaderMap,
    body: Result<Json<Subscription>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let token = bearer(&headers);
    let m = blocking(&st, move |s| member_of(&s.repo, token.as_deref())).await?;
    let sub = json(body)?;
    let email = m.email.clone();
    blocking(&st, move |s| discovery::subscribe(&s.repo, &m, sub.collection)).await?;
    Ok((
        StatusCode::CREATED,
        Json(serde_json::json!({ "collection": sub.collection, "email": email })),
    ))
}

#[derive(Deserialize)]
struct StatsParams {
    from: Option<String>,
    until: Option<String>,
    k: Option<usize>,
}

pub const DEFAULT_TOP_K: usize = 10;

async fn stats(State(st): Shared, q: Result<Query<StatsParams>, QueryRejection>) -> ApiResult<Json<discovery::StatsReport>> {
    let p = query(q)?;
    let instant = |v: &Option<String>, what: &str| -> ApiResult<Option<_>> {
        v.as_deref()
            .map(|s| parse_utc(s).ok_or_else(|| ApiError::BadParameter(format!("{what}: expected YYYY-MM-DDThh:mm:ssZ"))))
            .transpose()
    };
    let (from, until) = (instant(&p.from, "from")?, instant(&p.until, "until")?);
    let report = blocking(&st, move |s| stats_window(&s.repo, from, until, p.k.unwrap_or(DEFAULT_TOP_K))).await?;
    Ok(Json(report))
}

/// Stats over `[from, until)`; open ends default to the span of the log.
pub fn stats_window(
    repo: &Repository,
    from: Option<lago_dr_core::clock::Timestamp>,
    until: Option<lago_dr_core::clock::Timestamp>,
    k: usize,
) -> lago_dr_core::Result<discovery::StatsReport> {
    let span = discovery::event_span(repo)?;
    let now = repo.now();
    let from = from.or(span.map(|(a, _)| a)).unwrap_or(now);
    let until = until.unwrap_or_else(|| span.map_or(now, |(_, b)| b + Duration::seconds(1)).max(from));
    discovery::stats_report(repo, from, until, k)
}

#[derive(Deserialize)]
struct FeedParams {
    k: Option<usize>,
}

async fn feed(State(st): Shared, Path(file): Path<String>, q: Result<Query<FeedParams>, QueryRejection>) -> ApiResult<Response> {
    let spec = file
        .strip_suffix(".rss")
        .ok_or_else(|| Error::UnknownSet(file.clone()))?
        .to_string();
    let k = query(q)?.k.unwrap_or(st.config.feed_k);
    let xml = blocking(&st, move |s| discovery::rss_feed(&s.repo, &spec, k, &s.config.base_url)).await?;
    Ok(([(header::CONTENT_TYPE, "application/rss+xml; charset=utf-8")], xml).into_response())
}

async fn run_oai(st: Arc<AppState>, pairs: Vec<(String, String)>) -> ApiResult<Response> {
    let xml = blocking(&st, move |s| Ok(oai::handle(&s.repo, &s.oai, &pairs))).await?;
    Ok(([(header::CONTENT_TYPE, "text/xml; charset=utf-8")], xml).into_response())
}

async fn oai_get(State(st): Shared, q: Result<Query<Vec<(String, String)>>, QueryRejection>) -> ApiResult<Response> {
    run_oai(st, query(q)?).await
}

async fn oai_post(State(st): Shared, f: Result<Form<Vec<(String, String)>>, FormRejection>) -> ApiResult<Response> {
    let Form(pairs) = f.map_err(|e| ApiError::BadParameter(e.body_text()))?;
    run_oai(st, pairs).await
}

async fn lago_xsd() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/xml; charset=utf-8")], LAGO_XSD)
}
