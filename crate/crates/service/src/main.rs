use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::{Local, NaiveDate};
use clap::{Parser, Subcommand};
use pvtwin_core::market::{resolve_operation_date, Operation, DEFAULT_MARGIN};
use pvtwin_gateway::pi::{PiClient, PiConfig};
use pvtwin_gateway::reuniwatt::{Cast, ReuniwattClient, ReuniwattConfig};
use pvtwin_gateway::{ingest_model_runs, FileFormat, HttpTransport};
use pvtwin_service::api::{self, AppState};
use pvtwin_service::{ops, Engine, ErrorClass, ServiceError};

#[derive(Parser)]
#[command(name = "pvtwin", version, about = "PV plant digital twin and intraday market operations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quality-control a measurement file (impute holes, clip to bounds).
    Ingest {
        #[arg(long)]
        path_data: PathBuf,
        #[arg(long, default_value_t = ops::DEFAULT_QC_SEED)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulate plant production from a weather file.
    Simulate {
        #[arg(long)]
        path_json: PathBuf,
        #[arg(long)]
        path_weather: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write per-inverter energy here.
        #[arg(long)]
        summary_output: Option<PathBuf>,
    },
    /// Build a day-ahead offer or pre-offer from a GFS forecast.
    Offer {
        #[arg(long, default_value = "offer")]
        operation: String,
        /// Defaults to tomorrow (offer) or the day after (pre_offer).
        #[arg(long)]
        date_of_interest: Option<NaiveDate>,
        /// Reference day for the date default; today if absent.
        #[arg(long)]
        today: Option<NaiveDate>,
        #[arg(long)]
        availability: f64,
        #[arg(long)]
        path_gfs: PathBuf,
        #[arg(long)]
        path_json: PathBuf,
        #[arg(long)]
        path_historical: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the offer for a day against the intraday casts.
    Redispatch {
        /// Defaults to today.
        #[arg(long)]
        date_of_interest: Option<NaiveDate>,
        #[arg(long)]
        today: Option<NaiveDate>,
        #[arg(long)]
        availability: f64,
        #[arg(long)]
        path_gfs: PathBuf,
        #[arg(long)]
        path_json: PathBuf,
        #[arg(long)]
        path_historical: PathBuf,
        /// A cast file, or `None` when the cast is unavailable.
        #[arg(long, default_value = "None")]
        path_daycast: String,
        #[arg(long, default_value = "None")]
        path_hourcast: String,
        #[arg(long, default_value = "None")]
        path_instacast: String,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Best-model heatmap: option 1 = MAE, 2 = RMSE, 3 = MAPE.
    Heatmap {
        #[arg(long)]
        option: String,
        /// Folder holding runs.csv and horizons.csv.
        #[arg(long)]
        path_models: PathBuf,
        #[arg(long)]
        path_observations: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        legend_output: Option<PathBuf>,
    },
    /// Smart-persistence GHI forecast from the last six hours.
    Baseline {
        #[arg(long)]
        issue_time: String,
        #[arg(long)]
        path_json: PathBuf,
        #[arg(long)]
        path_data: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Download measurements from the PI historian (PI_BASE_URL, PI_USER, PI_PASS).
    FetchPi {
        #[arg(long)]
        start_date: String,
        #[arg(long)]
        end_date: String,
        #[arg(long, default_value = "minute")]
        freq: String,
        #[arg(long)]
        secondary_database: PathBuf,
    },
    /// Download Reuniwatt casts and images (REUNIWATT_TOKEN).
    FetchReuniwatt {
        /// YYYYMMDD
        #[arg(long)]
        date_start: String,
        /// YYYYMMDD
        #[arg(long)]
        date_stop: String,
        #[arg(long)]
        downloads: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Require this bearer token on every request.
        #[arg(long, env = "PVTWIN_TOKEN")]
        token: Option<String>,
    },
}

fn emit(output: Option<&Path>, content: &str) -> Result<(), ServiceError> {
    match output {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| ServiceError::new(ErrorClass::Internal, "Io", format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn today(given: Option<NaiveDate>) -> NaiveDate {
    given.unwrap_or_else(|| Local::now().date_naive())
}

fn cast_input(cast: Cast, path: &str) -> Result<Option<(Cast, pvtwin_core::weather::WeatherSeries)>, ServiceError> {
    if path == "None" || path.is_empty() {
        return Ok(None);
    }
    Ok(Some((cast, ops::load_ghi_forecast(Path::new(path))?)))
}

fn transport() -> Result<HttpTransport, ServiceError> {
    HttpTransport::new().map_err(|e| ServiceError::new(ErrorClass::Upstream, "Transport", e.to_string()))
}

fn run(command: Command) -> Result<(), ServiceError> {
    match command {
        Command::Ingest { path_data, seed, output } => {
            let format = FileFormat::from_path(&path_data).unwrap_or(FileFormat::Csv);
            let artifact = ops::ingest(&ops::read_bytes(&path_data)?, format, seed)?;
            for c in &artifact.columns {
                log::info!(
                    "{}: {:.2}% missing, {} imputed, {} clipped",
                    c.label,
                    c.missing_percent,
                    c.imputed,
                    c.clipped
                );
            }
            emit(output.as_deref(), &artifact.csv)
        }
        Command::Simulate {
            path_json,
            path_weather,
            output,
            summary_output,
        } => {
            let system = ops::load_plant(&path_json)?;
            let artifact = ops::simulate(&system, &ops::load_measurements(&path_weather)?)?;
            if let Some(path) = summary_output {
                emit(Some(&path), &artifact.summary_csv)?;
            }
            emit(output.as_deref(), &artifact.csv)
        }
        Command::Offer {
            operation,
            date_of_interest,
            today: reference,
            availability,
            path_gfs,
            path_json,
            path_historical,
            output,
        } => {
            let operation = Operation::parse(&operation)?;
            let date = resolve_operation_date(today(reference), operation, date_of_interest);
            let artifact = ops::offer(
                &ops::load_plant(&path_json)?,
                &ops::load_ghi_forecast(&path_gfs)?,
                &ops::load_measurements(&path_historical)?,
                operation,
                date,
                availability,
            )?;
            emit(output.as_deref(), &artifact.csv)
        }
        Command::Redispatch {
            date_of_interest,
            today: reference,
            availability,
            path_gfs,
            path_json,
            path_historical,
            path_daycast,
            path_hourcast,
            path_instacast,
            margin,
            output,
        } => {
            let date = resolve_operation_date(today(reference), Operation::Redispatch, date_of_interest);
            let system = ops::load_plant(&path_json)?;
            let history = ops::load_measurements(&path_historical)?;
            let committed = ops::offer(
                &system,
                &ops::load_ghi_forecast(&path_gfs)?,
                &history,
                Operation::Offer,
                date,
                availability,
            )?;
            let casts: Vec<_> = [
                cast_input(Cast::Daycast, &path_daycast)?,
                cast_input(Cast::Hourcast, &path_hourcast)?,
                cast_input(Cast::Instacast, &path_instacast)?,
            ]
            .into_iter()
            .flatten()
            .collect();
            let artifact = ops::redispatch(&system, &committed.offer, availability, &casts, &history, margin)?;
            if artifact.decision.redispatch_required {
                log::warn!("redispatch required in periods {:?}", artifact.decision.breached_periods());
            }
            emit(output.as_deref(), &artifact.csv)
        }
        Command::Heatmap {
            option,
            path_models,
            path_observations,
            output,
            legend_output,
        } => {
            let runs = ingest_model_runs(
                &ops::read_bytes(&path_models.join("runs.csv"))?,
                &ops::read_bytes(&path_models.join("horizons.csv"))?,
            )?;
            let artifact = ops::heatmap(runs, &ops::load_measurements(&path_observations)?, &option)?;
            if let Some(path) = legend_output {
                emit(Some(&path), &artifact.legend_csv)?;
            }
            emit(output.as_deref(), &artifact.csv)
        }
        Command::Baseline {
            issue_time,
            path_json,
            path_data,
            output,
        } => {
            let system = ops::load_plant(&path_json)?;
            let artifact = ops::baseline(
                &ops::load_measurements(&path_data)?,
                &ops::plant_location(&system)?,
                ops::parse_issue_time(&issue_time)?,
            )?;
            emit(output.as_deref(), &artifact.csv)
        }
        Command::FetchPi {
            start_date,
            end_date,
            freq,
            secondary_database,
        } => {
            let client = PiClient::new(PiConfig::from_env()?, transport()?);
            let series = client.fetch_pi(&start_date, &end_date, &freq, &secondary_database)?;
            log::info!("stored {} rows in {}", series.len(), secondary_database.display());
            Ok(())
        }
        Command::FetchReuniwatt {
            date_start,
            date_stop,
            downloads,
        } => {
            let client = ReuniwattClient::new(ReuniwattConfig::from_env()?, transport()?);
            let fetch = client.fetch_reuniwatt(&date_start, &date_stop, &downloads)?;
            for path in ops::export_casts(&fetch, &downloads.join("reuniwatt"))? {
                log::info!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Serve { data_dir, addr, token } => {
            let engine = Arc::new(Engine::open(data_dir)?);
            let runtime = tokio::runtime::Runtime::new()
                .map_err(|e| ServiceError::new(ErrorClass::Internal, "Runtime", e.to_string()))?;
            runtime
                .block_on(api::serve(AppState { engine, token }, &addr))
                .map_err(|e| ServiceError::new(ErrorClass::Internal, "Io", e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
