//! Operator tool. Works on the store file directly; exit status 0 on
//! success, 1 on a rejected operation or bad arguments, 2 on I/O failure.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use uuis_core::search::{NoDeadline, ReportKind, ReportSpec, Sort};
use uuis_core::users::{NewUser, UserChanges};
use uuis_core::{
    Error, Id, Level, PermissionAction, Result as CoreResult, ScopedPermission, State, Store, Transport, Txn,
};

use crate::api::UserView;
use crate::app::App;
use crate::clock::Clock;
use crate::config::Config;
use crate::csvio;
use crate::failure::{Failure, Outcome};
use crate::outbox::{FileTransport, NullTransport};
use crate::password::Hasher;
use crate::persist::{self, FileStore};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "uuis", version, about = "University inventory service")]
pub struct Cli {
    /// Store file; defaults to UUIS_STORE_PATH.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Username to act as; defaults to the first active level 4 account.
    #[arg(long = "as", global = true)]
    pub actor: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the HTTP server.
    Serve,
    /// Create the University and the first IT account.
    Init {
        #[arg(long)]
        admin_user: String,
        #[arg(long)]
        admin_pass: String,
        #[arg(long, default_value = "University")]
        university: String,
        /// Wipe a non-empty store first.
        #[arg(long)]
        force: bool,
    },
    #[command(subcommand)]
    User(UserCommand),
    #[command(subcommand)]
    Grant(GrantCommand),
    /// Bulk entry of assets from a CSV file.
    Import { csv: PathBuf },
    /// Write a snapshot of the store.
    Backup { path: PathBuf },
    /// Replace the store with a snapshot.
    Restore {
        path: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Print a report.
    Report {
        kind: String,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        sort: Option<String>,
        #[arg(long)]
        desc: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum UserCommand {
    Add(UserAdd),
    Deactivate { username: String },
    SetLevel { username: String, level: u8 },
}

#[derive(Args, Debug)]
pub struct UserAdd {
    #[arg(long)]
    pub username: String,
    #[arg(long)]
    pub password: String,
    #[arg(long)]
    pub level: u8,
    /// Home unit id or name.
    #[arg(long)]
    pub home: String,
}

#[derive(Subcommand, Debug)]
pub enum GrantCommand {
    /// Delegate `action@unit` permissions, or a permission group at a scope.
    Add {
        #[arg(long)]
        to: String,
        #[arg(long = "permission")]
        permissions: Vec<String>,
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        scope: Option<String>,
    },
    Revoke { grant_id: String },
}

/// What a run needs from its host besides arguments.
pub struct Context {
    pub config: Config,
    pub clock: Arc<dyn Clock>,
    pub hasher: Hasher,
}

pub fn run<I, T>(args: I, ctx: &Context, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli, ctx, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Domain(Error::ValidationFailed(rows)) => {
                    let _ = writeln!(err, "error: bulk entry rejected, nothing was stored");
                    for r in rows {
                        let _ = writeln!(err, "  {r}");
                    }
                }
                other => {
                    let _ = writeln!(err, "error: {other}");
                }
            }
            match f {
                Failure::Domain(_) => EXIT_INVALID,
                Failure::Io { .. } => EXIT_IO,
            }
        }
    }
}

fn print<T: Serialize>(out: &mut dyn Write, value: &T) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::io("stdout", e.into()))?;
    writeln!(out, "{text}").map_err(|e| Failure::io("stdout", e))
}

fn execute(cli: Cli, ctx: &Context, out: &mut dyn Write) -> Outcome<()> {
    let path = cli.store.clone().unwrap_or_else(|| ctx.config.store_path.clone());
    let clock = ctx.clock.as_ref();
    if let Command::Serve = cli.command {
        let store = FileStore::open(&path)?;
        let mut config = ctx.config.clone();
        config.store_path = path;
        let app = Arc::new(App::new(store, config).with_clock(ctx.clock.clone()).with_hasher(ctx.hasher));
        let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::io("runtime", e))?;
        return rt.block_on(crate::api::serve(app)).map_err(|e| Failure::io("serve", e));
    }
    let mut store = FileStore::open(&path)?;
    match cli.command {
        Command::Serve => unreachable!("handled above"),
        Command::Init { admin_user, admin_pass, university, force } => {
            if !store.state().is_empty() {
                if !force {
                    return Err(Error::NonEmptyStore.into());
                }
                store.restore(&Store::new().export(), true)?;
            }
            if admin_pass.is_empty() {
                return Err(Error::InvalidInput("password is empty".into()).into());
            }
            let digest = ctx.hasher.hash(&admin_pass);
            let (root, admin) = commit(&mut store, clock, |t| t.bootstrap(&university, &admin_user, digest))?;
            print(out, &serde_json::json!({ "university": root, "admin": UserView::from(&admin) }))
        }
        Command::User(cmd) => {
            let actor = actor_id(store.state(), cli.actor.as_deref())?;
            let user = match cmd {
                UserCommand::Add(a) => {
                    if a.password.is_empty() {
                        return Err(Error::InvalidInput("password is empty".into()).into());
                    }
                    let new = NewUser {
                        username: a.username,
                        password_digest: ctx.hasher.hash(&a.password),
                        level: Level::new(a.level)?,
                        home_unit_id: unit_id(store.state(), &a.home)?,
                    };
                    commit(&mut store, clock, |t| t.create_user(&actor, new))?
                }
                UserCommand::Deactivate { username } => {
                    let id = user_id(store.state(), &username)?;
                    let changes = UserChanges { active: Some(false), ..Default::default() };
                    commit(&mut store, clock, |t| t.update_user(&actor, &id, changes))?
                }
                UserCommand::SetLevel { username, level } => {
                    let id = user_id(store.state(), &username)?;
                    let changes = UserChanges { level: Some(Level::new(level)?), ..Default::default() };
                    commit(&mut store, clock, |t| t.update_user(&actor, &id, changes))?
                }
            };
            print(out, &UserView::from(&user))
        }
        Command::Grant(cmd) => {
            let actor = actor_id(store.state(), cli.actor.as_deref())?;
            let grant = match cmd {
                GrantCommand::Add { to, permissions, group, scope } => {
                    let grantee = user_id(store.state(), &to)?;
                    match (group, scope) {
                        (Some(g), Some(s)) if permissions.is_empty() => {
                            let group = group_id(store.state(), &g)?;
                            let scope = unit_id(store.state(), &s)?;
                            commit(&mut store, clock, |t| t.grant_group(&actor, &grantee, &group, &scope))?
                        }
                        (None, None) => {
                            let set = permissions
                                .iter()
                                .map(|p| scoped(store.state(), p))
                                .collect::<Result<BTreeSet<_>, _>>()?;
                            commit(&mut store, clock, |t| t.delegate(&actor, &grantee, set))?
                        }
                        _ => {
                            return Err(Error::InvalidInput(
                                "give --permission entries, or --group with --scope".into(),
                            )
                            .into())
                        }
                    }
                }
                GrantCommand::Revoke { grant_id } => commit(&mut store, clock, |t| t.revoke(&actor, &Id::new(grant_id)))?,
            };
            print(out, &grant)
        }
        Command::Import { csv } => {
            let actor = actor_id(store.state(), cli.actor.as_deref())?;
            let bytes = std::fs::read(&csv).map_err(|e| Failure::at(&csv, e))?;
            let file = csvio::parse_bulk(&bytes)?;
            let summary = commit(&mut store, clock, |t| t.bulk_import(&actor, &file))?;
            print(out, &summary)
        }
        Command::Backup { path: target } => {
            persist::write_atomic(&target, store.export().as_bytes())?;
            print(out, &serde_json::json!({ "path": target, "bytes": store.export().len() }))
        }
        Command::Restore { path: source, force } => {
            let doc = std::fs::read_to_string(&source).map_err(|e| Failure::at(&source, e))?;
            store.restore(&doc, force)?;
            print(out, &serde_json::json!({ "restored": source }))
        }
        Command::Report { kind, format, sort, desc } => {
            let actor = actor_id(store.state(), cli.actor.as_deref())?;
            let mut spec = ReportSpec::new(ReportKind::parse(&kind)?);
            spec.sort = sort.map(|field| Sort { field, ascending: !desc });
            let table = uuis_core::search::report(store.state(), &actor, &spec, &mut NoDeadline)?;
            match format {
                Format::Csv => write!(out, "{}", csvio::report_csv(&table)).map_err(|e| Failure::io("stdout", e)),
                Format::Json => print(out, &table),
            }
        }
    }
}

/// One transaction followed by an outbox drain, as the server does it.
fn commit<T>(store: &mut FileStore, clock: &dyn Clock, work: impl FnOnce(&mut Txn<'_>) -> CoreResult<T>) -> Outcome<T> {
    let mut transport: Box<dyn Transport> = match store.path() {
        Some(p) => Box::new(FileTransport::beside(p)),
        None => Box::new(NullTransport),
    };
    store.transact(clock, |t| {
        let out = work(t)?;
        t.drain_outbox(transport.as_mut())?;
        Ok(out)
    })
}

fn actor_id(state: &State, username: Option<&str>) -> Result<Id, Error> {
    match username {
        Some(name) => user_id(state, name),
        None => state
            .users()
            .values()
            .find(|u| u.active && u.level == Level::IT)
            .map(|u| u.id.clone())
            .ok_or_else(|| Error::InvalidInput("no active level 4 account; run init first".into())),
    }
}

fn user_id(state: &State, username: &str) -> Result<Id, Error> {
    state
        .user_by_username(username)
        .map(|u| u.id.clone())
        .ok_or_else(|| Error::NotFound { kind: "user", id: Id::new(username) })
}

/// Unit by id, else by unique name.
fn unit_id(state: &State, key: &str) -> Result<Id, Error> {
    let id = Id::new(key);
    if state.org_units().contains_key(&id) {
        return Ok(id);
    }
    let mut named = state.org_units().values().filter(|u| u.name == key);
    match (named.next(), named.next()) {
        (Some(u), None) => Ok(u.id.clone()),
        (Some(_), Some(_)) => Err(Error::InvalidInput(format!("unit name {key} is ambiguous; use its id"))),
        _ => Err(Error::NotFound { kind: "org_unit", id }),
    }
}

fn group_id(state: &State, key: &str) -> Result<Id, Error> {
    state
        .permission_groups()
        .values()
        .find(|g| g.id.as_str() == key || g.name == key)
        .map(|g| g.id.clone())
        .ok_or_else(|| Error::NotFound { kind: "permission_group", id: Id::new(key) })
}

/// `action@unit`, the unit by id or name.
fn scoped(state: &State, text: &str) -> Result<ScopedPermission, Error> {
    let (action, unit) = text
        .split_once('@')
        .ok_or_else(|| Error::InvalidInput(format!("{text}: expected action@unit")))?;
    Ok(ScopedPermission::new(action.parse::<PermissionAction>()?, unit_id(state, unit)?))
}
