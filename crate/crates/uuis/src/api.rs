//! HTTP surface under `/api`. Every handler opens at most one transaction
//! and leaves authorization to the core operations.

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::net::{IpAddr, SocketAddr};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, FromRequestParts, Path, RawQuery, State as Ctx};
use axum::http::header::{ACCEPT, AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use uuis_core::audit::AuditFilter;
use uuis_core::inventory::{LocationChanges, NewAsset, NewLocation, ReturnCondition};
use uuis_core::org::UnitChanges;
use uuis_core::search::{Page, ReportKind, ReportSpec, SearchMode, SearchQuery, SearchTarget, Sort};
use uuis_core::users::{NewUser, UserChanges};
use uuis_core::workflow::NewRequest;
use uuis_core::{
    AssetKind, Error, Id, Level, PermissionAction, RequestLine, ScopedPermission, Timestamp, UnitKind, User,
};

use crate::app::App;
use crate::csvio;
use crate::failure::Failure;
use crate::session::LoginError;

#[derive(Debug)]
pub enum ApiError {
    Core(Error),
    Login(LoginError),
    Unauthenticated,
    BadBody(String),
    NoRoute,
    MethodNotAllowed,
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

impl From<Failure> for ApiError {
    fn from(f: Failure) -> Self {
        match f {
            Failure::Domain(e) => ApiError::Core(e),
            io @ Failure::Io { .. } => ApiError::Internal(io.to_string()),
        }
    }
}

impl From<LoginError> for ApiError {
    fn from(e: LoginError) -> Self {
        ApiError::Login(e)
    }
}

/// HTTP status of a domain error.
pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::PermissionDenied | Error::ExceedsGrantorAuthority => StatusCode::FORBIDDEN,
        Error::NotFound { .. } => StatusCode::NOT_FOUND,
        Error::QueryTimeout => StatusCode::REQUEST_TIMEOUT,
        Error::InvalidState(_)
        | Error::InactiveUser
        | Error::AssetUnavailable(_)
        | Error::UnitNotEmpty
        | Error::LocationOccupied
        | Error::AlreadyGrouped(_)
        | Error::DuplicateName(_)
        | Error::DuplicateSerial(_)
        | Error::DuplicateRoom(_)
        | Error::ConstraintViolation(_)
        | Error::NonEmptyStore => StatusCode::CONFLICT,
        Error::TransportFailure(_) => StatusCode::BAD_GATEWAY,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn detail_of(e: &Error) -> String {
    match e {
        Error::ValidationFailed(rows) => rows.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; "),
        other => other.to_string(),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, detail) = match &self {
            ApiError::Core(e) => (status_of(e), e.code(), detail_of(e)),
            ApiError::Login(LoginError::AuthenticationFailed) => {
                (StatusCode::UNAUTHORIZED, "authentication_failed", LoginError::AuthenticationFailed.to_string())
            }
            ApiError::Login(e) => (StatusCode::FORBIDDEN, e.code(), e.to_string()),
            ApiError::Unauthenticated => {
                (StatusCode::UNAUTHORIZED, "unauthenticated", "a valid session token is required".into())
            }
            ApiError::BadBody(d) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", d.clone()),
            ApiError::NoRoute => (StatusCode::NOT_FOUND, "not_found", "no such endpoint".into()),
            ApiError::MethodNotAllowed => {
                (StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed here".into())
            }
            ApiError::Internal(d) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", d.clone()),
        };
        (status, Json(json!({ "error": code, "detail": detail }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok<T: Serialize>(value: &T) -> ApiResult {
    Ok(Json(value).into_response())
}

fn created<T: Serialize>(value: &T) -> ApiResult {
    Ok((StatusCode::CREATED, Json(value)).into_response())
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadBody(e.to_string()))
}

/// Like [`parse`], but an empty body means the default.
fn parse_or_default<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        parse(body)
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    let value = headers.get(AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim()).filter(|t| !t.is_empty())
}

/// The authenticated user of a request.
pub struct Actor {
    pub id: Id,
}

impl FromRequestParts<Arc<App>> for Actor {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, app: &Arc<App>) -> Result<Self, ApiError> {
        let token = bearer(&parts.headers).ok_or(ApiError::Unauthenticated)?;
        let session = app.sessions.authenticate(token, app.clock.now()).ok_or(ApiError::Unauthenticated)?;
        let active = app.read(|s| s.users().get(&session.user_id).is_some_and(|u| u.active));
        if !active {
            app.sessions.logout(token);
            return Err(ApiError::Unauthenticated);
        }
        Ok(Actor { id: session.user_id })
    }
}

/// Peer address when the server was started with connect info.
pub struct ClientIp(pub Option<IpAddr>);

impl<S: Send + Sync> FromRequestParts<S> for ClientIp {
    type Rejection = Infallible;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Infallible> {
        Ok(ClientIp(parts.extensions.get::<ConnectInfo<SocketAddr>>().map(|c| c.0.ip())))
    }
}

fn query_pairs(raw: Option<String>) -> Result<Vec<(String, String)>, ApiError> {
    serde_urlencoded::from_str(raw.as_deref().unwrap_or("")).map_err(|e| ApiError::BadBody(e.to_string()))
}

fn number<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ApiError> {
    value.parse().map_err(|_| ApiError::BadBody(format!("{name} must be a non-negative integer")))
}

#[derive(Serialize)]
pub struct UserView {
    pub id: Id,
    pub username: String,
    pub level: Level,
    pub home_unit_id: Id,
    pub active: bool,
}

impl From<&User> for UserView {
    fn from(u: &User) -> Self {
        UserView {
            id: u.id.clone(),
            username: u.username.clone(),
            level: u.level,
            home_unit_id: u.home_unit_id.clone(),
            active: u.active,
        }
    }
}

pub fn router(app: Arc<App>) -> Router {
    let api = Router::new()
        .route("/sessions", post(login).delete(logout))
        .route("/org-units", get(list_units).post(create_unit))
        .route("/org-units/{id}", patch(edit_unit).delete(delete_unit))
        .route("/users", get(list_users).post(create_user))
        .route("/users/{id}", patch(edit_user))
        .route("/users/{id}/permissions", get(user_permissions))
        .route("/grants", post(create_grant))
        .route("/grants/{id}", delete(revoke_grant))
        .route("/permission-groups", get(list_permission_groups).post(create_permission_group))
        .route("/assets", get(list_assets).post(create_asset))
        .route("/assets/bulk", post(bulk_import))
        .route("/assets/{id}", get(show_asset).patch(edit_asset))
        .route("/assets/{id}/transfer-direct", post(transfer_direct))
        .route("/assets/{id}/return", post(return_asset))
        .route("/asset-types", get(list_asset_types).post(create_asset_type))
        .route("/locations", get(list_locations).post(create_location))
        .route("/locations/{id}", patch(edit_location).delete(delete_location))
        .route("/asset-groups", get(list_asset_groups).post(create_asset_group))
        .route("/asset-groups/{id}", delete(ungroup))
        .route("/requests", get(list_requests).post(create_request))
        .route("/requests/pending", get(pending_requests))
        .route("/requests/{id}", get(show_request).patch(edit_request))
        .route("/requests/{id}/{decision}", post(decide))
        .route("/search", get(search))
        .route("/reports/{kind}", get(report))
        .route("/audit", get(list_audit))
        .route("/audit/{seq}", get(show_audit))
        .fallback(|| async { ApiError::NoRoute })
        .method_not_allowed_fallback(|| async { ApiError::MethodNotAllowed })
        .with_state(app.clone());
    let root = Router::new().nest("/api", api);
    match &app.config.web_root {
        Some(dir) => root.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => root.fallback(|| async { ApiError::NoRoute }),
    }
}

/// Serves until Ctrl-C.
pub async fn serve(app: Arc<App>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(app.config.http_addr).await?;
    axum::serve(listener, router(app).into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

// sessions

#[derive(Deserialize)]
struct Credentials {
    username: String,
    password: String,
}

async fn login(Ctx(app): Ctx<Arc<App>>, ClientIp(ip): ClientIp, body: Bytes) -> ApiResult {
    let creds: Credentials = parse(&body)?;
    let worker = app.clone();
    let session = tokio::task::spawn_blocking(move || {
        let now = worker.clock.now();
        worker.read(|s| worker.sessions.login(s, &worker.login_policy(), &creds.username, &creds.password, ip, now))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    let user = app.read(|s| s.user(&session.user_id).map(UserView::from))?;
    created(&json!({ "token": session.token, "expires_at": session.expires_at, "user": user }))
}

async fn logout(Ctx(app): Ctx<Arc<App>>, headers: HeaderMap) -> ApiResult {
    if let Some(token) = bearer(&headers) {
        app.sessions.logout(token);
    }
    ok(&json!({ "ok": true }))
}

// organisational units

#[derive(Deserialize)]
struct NewUnitBody {
    name: String,
    kind: UnitKind,
    #[serde(default)]
    parent_id: Option<Id>,
}

async fn list_units(Ctx(app): Ctx<Arc<App>>, actor: Actor) -> ApiResult {
    ok(&app.read(|s| uuis_core::org::list_org_units(s, &actor.id))?)
}

async fn create_unit(Ctx(app): Ctx<Arc<App>>, actor: Actor, body: Bytes) -> ApiResult {
    let b: NewUnitBody = parse(&body)?;
    created(&app.mutate(|t| t.create_org_unit(&actor.id, &b.name, b.kind, b.parent_id.as_ref()))?)
}

async fn edit_unit(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>, body: Bytes) -> ApiResult {
    let changes: UnitChanges = parse(&body)?;
    ok(&app.mutate(|t| t.edit_org_unit(&actor.id, &id, changes))?)
}

async fn delete_unit(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>) -> ApiResult {
    app.mutate(|t| t.delete_org_unit(&actor.id, &id))?;
    ok(&json!({ "deleted": id }))
}

// users and permissions

#[derive(Deserialize)]
struct NewUserBody {
    username: String,
    password: String,
    level: Level,
    home_unit_id: Id,
}

#[derive(Deserialize)]
struct UserPatch {
    level: Option<Level>,
    home_unit_id: Option<Id>,
    active: Option<bool>,
    password: Option<String>,
}

fn check_password(password: &str) -> Result<(), ApiError> {
    if password.is_empty() {
        return Err(Error::InvalidInput("password is empty".into()).into());
    }
    Ok(())
}

async fn list_users(Ctx(app): Ctx<Arc<App>>, actor: Actor) -> ApiResult {
    let users = app.read(|s| uuis_core::users::visible_users(s, &actor.id))?;
    ok(&users.iter().map(UserView::from).collect::<Vec<_>>())
}

async fn create_user(Ctx(app): Ctx<Arc<App>>, actor: Actor, body: Bytes) -> ApiResult {
    let b: NewUserBody = parse(&body)?;
    check_password(&b.password)?;
    let new = NewUser {
        username: b.username,
        password_digest: app.hasher.hash(&b.password),
        level: b.level,
        home_unit_id: b.home_unit_id,
    };
    created(&UserView::from(&app.mutate(|t| t.create_user(&actor.id, new))?))
}

async fn edit_user(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>, body: Bytes) -> ApiResult {
    let b: UserPatch = parse(&body)?;
    let password_digest = match &b.password {
        Some(p) => {
            check_password(p)?;
            Some(app.hasher.hash(p))
        }
        None => None,
    };
    let changes = UserChanges { level: b.level, home_unit_id: b.home_unit_id, active: b.active, password_digest };
    ok(&UserView::from(&app.mutate(|t| t.update_user(&actor.id, &id, changes))?))
}

async fn user_permissions(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>) -> ApiResult {
    let (user, permissions) = app.read(|s| {
        let user = uuis_core::users::show_user(s, &actor.id, &id)?;
        let permissions = match uuis_core::authz::effective_permissions(s, &id) {
            Err(Error::InactiveUser) => Default::default(),
            other => other?,
        };
        Ok::<_, Error>((user, permissions))
    })?;
    ok(&json!({ "user": UserView::from(&user), "permissions": permissions }))
}

#[derive(Deserialize)]
struct GrantBody {
    grantee_id: Id,
    #[serde(default)]
    permissions: Option<std::collections::BTreeSet<ScopedPermission>>,
    #[serde(default)]
    group_id: Option<Id>,
    #[serde(default)]
    scope_unit_id: Option<Id>,
}

async fn create_grant(Ctx(app): Ctx<Arc<App>>, actor: Actor, body: Bytes) -> ApiResult {
    let b: GrantBody = parse(&body)?;
    let grant = match (b.permissions, b.group_id, b.scope_unit_id) {
        (Some(p), None, None) => app.mutate(|t| t.delegate(&actor.id, &b.grantee_id, p))?,
        (None, Some(g), Some(scope)) => app.mutate(|t| t.grant_group(&actor.id, &b.grantee_id, &g, &scope))?,
        _ => return Err(ApiError::BadBody("give either permissions, or group_id with scope_unit_id".into())),
    };
    created(&grant)
}

async fn revoke_grant(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>) -> ApiResult {
    ok(&app.mutate(|t| t.revoke(&actor.id, &id))?)
}

#[derive(Deserialize)]
struct NewPermissionGroup {
    name: String,
    actions: std::collections::BTreeSet<PermissionAction>,
}

async fn list_permission_groups(Ctx(app): Ctx<Arc<App>>, _actor: Actor) -> ApiResult {
    ok(&app.read(|s| s.permission_groups().values().cloned().collect::<Vec<_>>()))
}

async fn create_permission_group(Ctx(app): Ctx<Arc<App>>, actor: Actor, body: Bytes) -> ApiResult {
    let b: NewPermissionGroup = parse(&body)?;
    created(&app.mutate(|t| t.create_permission_group(&actor.id, &b.name, b.actions))?)
}

// inventory

async fn list_assets(Ctx(app): Ctx<Arc<App>>, actor: Actor) -> ApiResult {
    ok(&app.read(|s| uuis_core::inventory::list_assets(s, &actor.id))?)
}

async fn create_asset(Ctx(app): Ctx<Arc<App>>, actor: Actor, body: Bytes) -> ApiResult {
    let spec: NewAsset = parse(&body)?;
    created(&app.mutate(|t| t.add_asset(&actor.id, spec))?)
}

async fn show_asset(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>) -> ApiResult {
    ok(&app.read(|s| uuis_core::inventory::show_asset(s, &actor.id, &id))?)
}

async fn edit_asset(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>, body: Bytes) -> ApiResult {
    let changes: BTreeMap<String, String> = parse(&body)?;
    ok(&app.mutate(|t| t.modify_asset(&actor.id, &id, changes))?)
}

#[derive(Deserialize)]
struct TransferBody {
    location_id: Id,
    #[serde(default)]
    holder_user_id: Option<Id>,
}

async fn transfer_direct(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>, body: Bytes) -> ApiResult {
    let b: TransferBody = parse(&body)?;
    ok(&app.mutate(|t| t.transfer_direct(&actor.id, &id, &b.location_id, b.holder_user_id.as_ref()))?)
}

#[derive(Deserialize)]
struct ReturnBody {
    condition: ReturnCondition,
}

async fn return_asset(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>, body: Bytes) -> ApiResult {
    let b: ReturnBody = parse(&body)?;
    ok(&app.mutate(|t| t.return_asset(&actor.id, &id, b.condition))?)
}

async fn bulk_import(Ctx(app): Ctx<Arc<App>>, actor: Actor, body: Bytes) -> ApiResult {
    let file = csvio::parse_bulk(&body)?;
    created(&app.mutate(|t| t.bulk_import(&actor.id, &file))?)
}

#[derive(Deserialize)]
struct NewAssetType {
    name: String,
    kind: AssetKind,
    #[serde(default)]
    common_properties: Vec<String>,
}

async fn list_asset_types(Ctx(app): Ctx<Arc<App>>, _actor: Actor) -> ApiResult {
    ok(&app.read(|s| s.asset_types().values().cloned().collect::<Vec<_>>()))
}

async fn create_asset_type(Ctx(app): Ctx<Arc<App>>, actor: Actor, body: Bytes) -> ApiResult {
    let b: NewAssetType = parse(&body)?;
    created(&app.mutate(|t| t.define_asset_type(&actor.id, &b.name, b.kind, b.common_properties))?)
}

async fn list_locations(Ctx(app): Ctx<Arc<App>>, actor: Actor) -> ApiResult {
    ok(&app.read(|s| uuis_core::inventory::list_locations(s, &actor.id))?)
}

async fn create_location(Ctx(app): Ctx<Arc<App>>, actor: Actor, body: Bytes) -> ApiResult {
    let spec: NewLocation = parse(&body)?;
    created(&app.mutate(|t| t.create_location(&actor.id, spec))?)
}

async fn edit_location(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>, body: Bytes) -> ApiResult {
    let changes: LocationChanges = parse(&body)?;
    ok(&app.mutate(|t| t.edit_location(&actor.id, &id, changes))?)
}

async fn delete_location(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>) -> ApiResult {
    app.mutate(|t| t.delete_location(&actor.id, &id))?;
    ok(&json!({ "deleted": id }))
}

#[derive(Deserialize)]
struct NewGroupBody {
    name: String,
    asset_ids: Vec<Id>,
}

async fn list_asset_groups(Ctx(app): Ctx<Arc<App>>, actor: Actor) -> ApiResult {
    ok(&app.read(|s| uuis_core::inventory::list_asset_groups(s, &actor.id))?)
}

async fn create_asset_group(Ctx(app): Ctx<Arc<App>>, actor: Actor, body: Bytes) -> ApiResult {
    let b: NewGroupBody = parse(&body)?;
    created(&app.mutate(|t| t.group_assets(&actor.id, &b.name, &b.asset_ids))?)
}

async fn ungroup(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>) -> ApiResult {
    app.mutate(|t| t.ungroup(&actor.id, &id))?;
    ok(&json!({ "deleted": id }))
}

// requests

async fn list_requests(Ctx(app): Ctx<Arc<App>>, actor: Actor) -> ApiResult {
    ok(&app.read(|s| uuis_core::workflow::list_requests(s, &actor.id))?)
}

async fn pending_requests(Ctx(app): Ctx<Arc<App>>, actor: Actor) -> ApiResult {
    ok(&app.read(|s| uuis_core::workflow::list_pending(s, &actor.id))?)
}

async fn create_request(Ctx(app): Ctx<Arc<App>>, actor: Actor, body: Bytes) -> ApiResult {
    let new: NewRequest = parse(&body)?;
    created(&app.mutate(|t| t.create_request(&actor.id, new))?)
}

async fn show_request(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>) -> ApiResult {
    ok(&app.read(|s| uuis_core::workflow::show_request(s, &actor.id, &id))?)
}

#[derive(Deserialize)]
struct RequestPatch {
    #[serde(default)]
    text: String,
    #[serde(default)]
    lines: Vec<RequestLine>,
}

async fn edit_request(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(id): Path<Id>, body: Bytes) -> ApiResult {
    let b: RequestPatch = parse(&body)?;
    ok(&app.mutate(|t| t.edit_request(&actor.id, &id, b.text, b.lines))?)
}

#[derive(Deserialize, Default)]
struct DecisionBody {
    #[serde(default)]
    note: String,
}

async fn decide(
    Ctx(app): Ctx<Arc<App>>,
    actor: Actor,
    Path((id, decision)): Path<(Id, String)>,
    body: Bytes,
) -> ApiResult {
    let b: DecisionBody = parse_or_default(&body)?;
    let request = match decision.as_str() {
        "approve" => app.mutate(|t| t.approve(&actor.id, &id, &b.note))?,
        "reject" => app.mutate(|t| t.reject(&actor.id, &id, &b.note))?,
        "cancel" => app.mutate(|t| t.cancel(&actor.id, &id))?,
        "execute" => app.mutate(|t| t.mark_executed(&actor.id, &id))?,
        _ => return Err(ApiError::NoRoute),
    };
    ok(&request)
}

// search, reports, audit

fn sort_and_page(params: &mut BTreeMap<String, String>) -> Result<(Option<Sort>, Page), ApiError> {
    let descending = match params.remove("order").as_deref() {
        None | Some("asc") => false,
        Some("desc") => true,
        Some(other) => return Err(ApiError::BadBody(format!("order must be asc or desc, not {other}"))),
    };
    let sort = params.remove("sort").map(|field| Sort { field, ascending: !descending });
    let mut page = Page::default();
    if let Some(v) = params.remove("offset") {
        page.offset = number("offset", &v)?;
    }
    if let Some(v) = params.remove("limit") {
        page.limit = number("limit", &v)?;
    }
    Ok((sort, page))
}

/// `q` selects simple mode; otherwise every other parameter is a filter.
pub fn search_query(pairs: Vec<(String, String)>) -> Result<SearchQuery, ApiError> {
    let mut params: BTreeMap<String, String> = pairs.into_iter().collect();
    let (sort, page) = sort_and_page(&mut params)?;
    let target = match params.remove("target").as_deref() {
        None | Some("assets") => SearchTarget::Assets,
        Some("locations") => SearchTarget::Locations,
        Some("requests") => SearchTarget::Requests,
        Some(other) => return Err(ApiError::BadBody(format!("unknown search target {other}"))),
    };
    let text = params.remove("q");
    let mode = match params.remove("mode").as_deref() {
        Some("simple") => SearchMode::Simple,
        Some("advanced") => SearchMode::Advanced,
        None if text.is_some() => SearchMode::Simple,
        None => SearchMode::Advanced,
        Some(other) => return Err(ApiError::BadBody(format!("unknown search mode {other}"))),
    };
    Ok(SearchQuery { mode, target, text, filters: params, sort, page })
}

async fn search(Ctx(app): Ctx<Arc<App>>, actor: Actor, RawQuery(raw): RawQuery) -> ApiResult {
    let query = search_query(query_pairs(raw)?)?;
    let mut deadline = app.deadline();
    let worker = app.clone();
    let results = tokio::task::spawn_blocking(move || {
        worker.read(|s| uuis_core::search::search(s, &actor.id, &query, &mut deadline))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    ok(&results)
}

async fn report(
    Ctx(app): Ctx<Arc<App>>,
    actor: Actor,
    Path(kind): Path<String>,
    headers: HeaderMap,
    RawQuery(raw): RawQuery,
) -> ApiResult {
    let kind = ReportKind::parse(&kind).map_err(|_| Error::NotFound { kind: "report", id: Id::new(kind) })?;
    let mut params: BTreeMap<String, String> = query_pairs(raw)?.into_iter().collect();
    let (sort, _) = sort_and_page(&mut params)?;
    let spec = ReportSpec { kind, filters: params, sort };
    let mut deadline = app.deadline();
    let worker = app.clone();
    let table = tokio::task::spawn_blocking(move || {
        worker.read(|s| uuis_core::search::report(s, &actor.id, &spec, &mut deadline))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    let wants_csv = headers
        .get(ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|m| m.trim().starts_with("text/csv")));
    if wants_csv {
        Ok(([(CONTENT_TYPE, "text/csv; charset=utf-8")], csvio::report_csv(&table)).into_response())
    } else {
        ok(&table)
    }
}

async fn list_audit(Ctx(app): Ctx<Arc<App>>, actor: Actor, RawQuery(raw): RawQuery) -> ApiResult {
    let mut filter = AuditFilter::default();
    let (mut offset, mut limit) = (0usize, 100usize);
    for (k, v) in query_pairs(raw)? {
        match k.as_str() {
            "actor_id" => filter.actor_id = Some(Id::new(v)),
            "entity_kind" => filter.entity_kind = Some(v),
            "from" => filter.from = Some(Timestamp(number("from", &v)?)),
            "until" => filter.until = Some(Timestamp(number("until", &v)?)),
            "offset" => offset = number("offset", &v)?,
            "limit" => limit = number::<usize>("limit", &v)?.clamp(1, 1000),
            other => return Err(ApiError::BadBody(format!("unknown audit filter {other}"))),
        }
    }
    ok(&app.read(|s| uuis_core::audit::list_audit(s, &actor.id, &filter, offset, limit))?)
}

async fn show_audit(Ctx(app): Ctx<Arc<App>>, actor: Actor, Path(seq): Path<String>) -> ApiResult {
    let n: u64 = seq.parse().unwrap_or(0);
    ok(&app.read(|s| uuis_core::audit::show_audit(s, &actor.id, n)).map_err(|e| match e {
        Error::NotFound { kind, .. } => Error::NotFound { kind, id: Id::new(seq) },
        other => other,
    })?)
}
