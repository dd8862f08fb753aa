//! `webtestkit` command line.
//!
//! Exit codes: 0 success, 1 operation failure, 2 invalid input (arguments,
//! configuration, plan or scenario). `run` exits with the number of failed
//! tests, capped at 125.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use webtestkit::config::{env_name, keys, registered_keys, ConfigStore};
use webtestkit::docker::{
    ContainerHandle, DockerBrowserSpec, DockerFarm, FarmSettings, HttpEngine, ImageFamily, ImageRef,
    RegistryTags, Screen, VersionSelector, MANAGED_LABEL,
};
use webtestkit::driver::{
    cache_path, detect_browser_version, ensure_driver, load_metadata, resolve_entry, CommandProbe, MetadataSource,
};
use webtestkit::exec::Execution;
use webtestkit::harness::{summary_table, Harness, HarnessSettings, PlanFile};
use webtestkit::http::{DefaultTransport, HttpTransport};
use webtestkit::rtc::{self, AnalysisSettings, DumpFormat, RtcError};
use webtestkit::scenario::BrowserScenario;
use webtestkit::{BrowserKind, Platform, VersionString};

#[derive(Parser)]
#[command(name = "webtestkit", version, about = "Browser test automation: drivers, containers, plans and WebRTC metrics")]
struct Cli {
    /// Set a configuration property, `key=value` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Properties file with `key=value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output folder (overrides `sel.jup.output.folder`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List configuration keys with defaults and environment names.
    Keys,
    /// Resolve (and cache) the driver matching an installed browser.
    ResolveDriver(ResolveArgs),
    /// Run a test plan.
    Run(RunArgs),
    /// Start or stop containerized browsers.
    #[command(subcommand)]
    Browser(BrowserCommand),
    /// Compute WebRTC quality metrics from a stats dump.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct ResolveArgs {
    #[arg(long)]
    browser: BrowserKind,
    /// Browser version; detected from the installed browser when omitted.
    #[arg(long)]
    browser_version: Option<String>,
    /// Metadata file or URL; defaults to `sel.jup.driver.metadata.url`.
    #[arg(long)]
    metadata: Option<String>,
    #[arg(long)]
    platform: Option<Platform>,
    /// Report the resolution without downloading.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Browser scenario for template tests.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BrowserCommand {
    /// Start a fleet and write `<out>/fleet.json`.
    Start(StartArgs),
    /// Stop the fleet listed in `<out>/fleet.json`.
    Stop(StopArgs),
}

#[derive(Args)]
struct StartArgs {
    #[arg(long)]
    kind: BrowserKind,
    #[arg(long, default_value = "latest")]
    version: VersionSelector,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    vnc: bool,
    #[arg(long)]
    record: bool,
    #[arg(long)]
    screen: Option<Screen>,
}

#[derive(Args)]
struct StopArgs {
    /// Also remove every container carrying the managed label.
    #[arg(long)]
    all: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    dump: PathBuf,
    #[arg(long, default_value = "native")]
    format: DumpFormat,
    /// QoE jitter threshold in ms (default: `sel.jup.jitter.threshold.ms`).
    #[arg(long)]
    threshold_ms: Option<f64>,
    /// Minimum inter-frame gap counted as a freeze, in ms.
    #[arg(long)]
    freeze_threshold_ms: Option<f64>,
    /// Write CSV series (default when no format flag is given).
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    svg: bool,
    /// Analyze connections one at a time.
    #[arg(long)]
    sequential: bool,
}

/// An error carrying its exit code.
#[derive(Debug)]
struct Exit(u8, anyhow::Error);

fn usage(e: impl Into<anyhow::Error>) -> Exit {
    Exit(2, e.into())
}

fn failure(e: impl Into<anyhow::Error>) -> Exit {
    Exit(1, e.into())
}

fn build_config(cli: &Cli) -> Result<ConfigStore> {
    let mut builder = ConfigStore::builder().process_env();
    if let Some(path) = &cli.config {
        builder = builder.properties_file(path)?;
    }
    for assignment in &cli.set {
        builder = builder.assignment(assignment)?;
    }
    if let Some(out) = &cli.out {
        builder = builder.property(keys::OUTPUT_FOLDER, out.display().to_string())?;
    }
    Ok(builder.build())
}

fn transport(config: &ConfigStore) -> Result<Arc<dyn HttpTransport>> {
    let connect = config.duration(keys::CONNECT_TIMEOUT)?;
    let timeout = config.duration(keys::SESSION_TIMEOUT)?.max(connect);
    Ok(Arc::new(DefaultTransport::new(connect, timeout)))
}

fn farm(config: &ConfigStore, transport: Arc<dyn HttpTransport>) -> Result<DockerFarm> {
    let engine = HttpEngine::new(transport.clone(), &config.string(keys::DOCKER_HOST)?)?;
    let tags = RegistryTags::new(transport.clone(), &config.string(keys::DOCKER_REGISTRY_URL)?);
    Ok(DockerFarm::new(Arc::new(engine), Arc::new(tags), transport, FarmSettings::from_config(config)?))
}

fn metadata_source(arg: Option<&str>, config: &ConfigStore) -> Result<MetadataSource> {
    Ok(match arg {
        Some(s) if s.starts_with("http://") || s.starts_with("https://") => MetadataSource::Url(s.to_string()),
        Some(s) => MetadataSource::File(PathBuf::from(s)),
        None => MetadataSource::Url(config.string(keys::DRIVER_METADATA_URL)?),
    })
}

fn print_line(value: &impl Serialize) {
    println!("{}", serde_json::to_string(value).expect("serializable"));
}

fn cmd_keys() -> Result<(), Exit> {
    let mut out = std::io::stdout().lock();
    for info in registered_keys() {
        let env = env_name(info.key.label).map_err(failure)?;
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", info.key.label, info.key.value_type, info.default, env, info.doc);
    }
    Ok(())
}

#[derive(Serialize)]
struct Resolution {
    browser: BrowserKind,
    browser_version: String,
    driver_version: String,
    platform: Platform,
    cache_path: PathBuf,
    cached: bool,
    downloaded: bool,
}

fn cmd_resolve(args: &ResolveArgs, config: &ConfigStore) -> Result<(), Exit> {
    let platform = args.platform.or_else(Platform::current).ok_or_else(|| usage(anyhow!("unsupported host platform; pass --platform")))?;
    let browser_version = match &args.browser_version {
        Some(v) => VersionString::parse(v).map_err(usage)?,
        None => detect_browser_version(args.browser, &CommandProbe::new(platform))
            .map_err(failure)?
            .ok_or_else(|| failure(anyhow!("{} is not installed", args.browser)))?,
    };
    let cache_root = config.path(keys::DRIVER_CACHE_PATH).map_err(usage)?;
    let transport = transport(config).map_err(usage)?;
    let ttl = config.duration(keys::DRIVER_METADATA_TTL).map_err(usage)?;

    if args.browser.driver_is_system_provided() {
        let artifact = ensure_driver(
            args.browser,
            &browser_version,
            &webtestkit::driver::ResolutionMetadata::empty("system"),
            &cache_root,
            platform,
            transport.as_ref(),
        )
        .map_err(failure)?;
        print_line(&artifact);
        return Ok(());
    }

    let source = metadata_source(args.metadata.as_deref(), config).map_err(usage)?;
    let meta = load_metadata(&source, transport.as_ref(), &cache_root, ttl).map_err(failure)?;
    let entry = resolve_entry(args.browser, &browser_version, &meta).map_err(failure)?;
    let target = cache_path(&cache_root, args.browser, platform, &entry.driver_version);
    let cached = target.is_file();
    if !args.dry_run {
        ensure_driver(args.browser, &browser_version, &meta, &cache_root, platform, transport.as_ref()).map_err(failure)?;
    }
    print_line(&Resolution {
        browser: args.browser,
        browser_version: browser_version.to_string(),
        driver_version: entry.driver_version.to_string(),
        platform,
        cache_path: target,
        cached,
        downloaded: !args.dry_run && !cached,
    });
    Ok(())
}

fn cmd_run(args: &RunArgs, config: &ConfigStore) -> Result<u8, Exit> {
    let plan_file = PlanFile::load(&args.plan).map_err(usage)?;
    let scenario = match &args.scenario {
        Some(path) => Some(BrowserScenario::load(path).map_err(usage)?),
        None => None,
    };
    let plan = plan_file.into_plan(scenario.as_ref()).map_err(usage)?;
    let settings = HarnessSettings::from_config(config).map_err(usage)?;
    let out_dir = settings.out_dir.clone();
    let transport = transport(config).map_err(usage)?;
    let harness = Harness::builder(settings)
        .transport(transport.clone())
        .farm(farm(config, transport).map_err(usage)?)
        .build();
    let report = harness.run_plan(&plan);

    std::fs::create_dir_all(&out_dir).map_err(failure)?;
    let mut lines = String::new();
    for outcome in &report.outcomes {
        let line = outcome.to_json_line();
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
    }
    std::fs::write(out_dir.join("outcomes.jsonl"), lines).map_err(failure)?;
    eprint!("{}", summary_table(&report.outcomes));
    Ok(report.failed().min(125) as u8)
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    container_id: String,
    image: String,
    driver_url: String,
    vnc_url: Option<String>,
    recording_path: Option<PathBuf>,
}

fn manifest_path(config: &ConfigStore) -> Result<PathBuf> {
    Ok(config.path(keys::OUTPUT_FOLDER)?.join("fleet.json"))
}

fn cmd_browser_start(args: &StartArgs, config: &ConfigStore) -> Result<(), Exit> {
    let mut spec = DockerBrowserSpec::new(args.kind, args.version.clone());
    spec.vnc = args.vnc || config.bool(keys::VNC).map_err(usage)?;
    spec.recording = args.record;
    spec.screen = match &args.screen {
        Some(s) => *s,
        None => config.string(keys::VNC_SCREEN_RESOLUTION).map_err(usage)?.parse().map_err(usage)?,
    };
    spec.validate().map_err(usage)?;
    let transport = transport(config).map_err(usage)?;
    let farm = farm(config, transport).map_err(usage)?;
    let fleet = farm.start_fleet(&spec, args.count).map_err(failure)?;
    let entries: Vec<ManifestEntry> = fleet
        .iter()
        .map(|h| ManifestEntry {
            container_id: h.container_id.clone(),
            image: h.image.name(),
            driver_url: h.driver_url().unwrap_or_default().to_string(),
            vnc_url: h.vnc_url.clone(),
            recording_path: h.recording_path(),
        })
        .collect();
    let path = manifest_path(config).map_err(usage)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(failure)?;
    }
    std::fs::write(&path, serde_json::to_string_pretty(&entries).expect("serializable")).map_err(failure)?;
    for e in &entries {
        print_line(e);
    }
    eprintln!("fleet manifest written to {}", path.display());
    Ok(())
}

fn image_ref(name: &str) -> ImageRef {
    let (repository, tag) = name.rsplit_once(':').unwrap_or((name, "latest"));
    ImageRef { repository: repository.into(), tag: tag.into(), family: ImageFamily::Stable }
}

fn cmd_browser_stop(args: &StopArgs, config: &ConfigStore) -> Result<(), Exit> {
    let transport = transport(config).map_err(usage)?;
    let farm = farm(config, transport).map_err(usage)?;
    let path = manifest_path(config).map_err(usage)?;
    let mut errors = Vec::new();
    if path.is_file() {
        let text = std::fs::read_to_string(&path).map_err(failure)?;
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(&text).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
        for e in entries {
            let handle = ContainerHandle::attach(e.container_id.clone(), image_ref(&e.image), e.driver_url, e.vnc_url, e.recording_path);
            match farm.stop_and_remove(&handle) {
                Ok(()) => eprintln!("removed {}", e.container_id),
                Err(err) => errors.push(format!("{}: {err}", e.container_id)),
            }
        }
        std::fs::remove_file(&path).map_err(failure)?;
    } else if !args.all {
        return Err(failure(anyhow!("no fleet manifest at {}", path.display())));
    }
    if args.all {
        let engine = farm.engine();
        for id in engine.list_labeled(MANAGED_LABEL).map_err(failure)? {
            // a container that is already stopped refuses the stop; removal still applies
            let _ = engine.stop(&id);
            match engine.remove(&id) {
                Ok(()) => eprintln!("removed {id}"),
                Err(err) => errors.push(format!("{id}: {err}")),
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(failure(anyhow!("{}", errors.join("; "))))
    }
}

fn cmd_analyze(args: &AnalyzeArgs, config: &ConfigStore) -> Result<(), Exit> {
    let timelines = rtc::import_dump(&args.dump, args.format).map_err(|e| match e {
        RtcError::Io(_) | RtcError::EmptyDump | RtcError::DataIntegrity { .. } => failure(e),
        other => usage(other),
    })?;
    let settings = AnalysisSettings {
        freeze_threshold_ms: match args.freeze_threshold_ms {
            Some(v) => v,
            None => config.integer(keys::FREEZE_THRESHOLD_MS).map_err(usage)? as f64,
        },
        jitter_threshold_ms: match args.threshold_ms {
            Some(v) => v,
            None => config.integer(keys::JITTER_THRESHOLD_MS).map_err(usage)? as f64,
        },
    };
    let execution = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    // analyze everything before writing anything
    let analyses = rtc::analyze_all(&timelines, &settings, execution)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(failure)?;

    let out_dir = config.path(keys::OUTPUT_FOLDER).map_err(usage)?;
    let csv = args.csv || !args.svg;
    for analysis in &analyses {
        if csv {
            rtc::write_csv(&out_dir, analysis).map_err(failure)?;
        }
        if args.svg {
            rtc::write_svg(&out_dir, analysis).map_err(failure)?;
        }
    }
    let report = rtc::qoe_flags(&analyses, settings.jitter_threshold_ms);
    std::fs::write(out_dir.join("qoe_flags.json"), serde_json::to_string_pretty(&report).expect("serializable"))
        .map_err(failure)?;

    let first = rtc::select_first_joined(&timelines).map(|t| t.connection_id.clone());
    for analysis in &analyses {
        let last = |s: &webtestkit::rtc::MetricSeries| s.last_value().unwrap_or(f64::NAN);
        print_line(&serde_json::json!({
            "connection": analysis.connection_id,
            "first_joined": first.as_deref() == Some(analysis.connection_id.as_str()),
            "bit_rate_kbps": last(&analysis.bit_rate),
            "jitter_delay_ms": last(&analysis.jitter_delay),
            "freeze_count": last(&analysis.freeze_count),
            "packet_loss": last(&analysis.packet_loss),
            "qoe_flagged": report.entries.iter().any(|f| f.connection_id == analysis.connection_id && f.flagged),
        }));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<u8, Exit> {
    if let Command::Keys = cli.command {
        cmd_keys()?;
        return Ok(0);
    }
    let config = build_config(cli).map_err(usage)?;
    match &cli.command {
        Command::Keys => unreachable!(),
        Command::ResolveDriver(args) => cmd_resolve(args, &config).map(|_| 0),
        Command::Run(args) => cmd_run(args, &config),
        Command::Browser(BrowserCommand::Start(args)) => cmd_browser_start(args, &config).map(|_| 0),
        Command::Browser(BrowserCommand::Stop(args)) => cmd_browser_stop(args, &config).map(|_| 0),
        Command::Analyze(args) => cmd_analyze(args, &config).map(|_| 0),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
