use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use lungseg::fc::{segment_auto, segment_lungs, AffinityParams, DEFAULT_MEAN_HU, DEFAULT_SIGMA_HU, DEFAULT_THETA};
use lungseg::metrics::{self, volume_ml};
use lungseg::phantom::{generate_thorax_phantom, PhantomSpec};
use lungseg::seeds::{auto_seeds, validate_manual_seeds, Provenance, SeedSet};
use lungseg::{io, Adjacency, Error, Side, Voxel};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "lungseg", version, about = "Lung field segmentation and evaluation for CT volumes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment both lungs and write the mask
    Segment {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// JSON file {"left": [[x,y,z],…], "right": […]}; automatic seeds when absent
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Left-lung seed voxel x,y,z (repeatable)
        #[arg(long = "left", value_parser = parse_voxel)]
        left: Vec<Voxel>,
        /// Right-lung seed voxel x,y,z (repeatable)
        #[arg(long = "right", value_parser = parse_voxel)]
        right: Vec<Voxel>,
        #[arg(long, default_value_t = DEFAULT_MEAN_HU, allow_negative_numbers = true)]
        mean: f64,
        #[arg(long, default_value_t = DEFAULT_SIGMA_HU)]
        sigma: f64,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f64,
        #[arg(long, default_value_t = 6, value_parser = parse_adjacency)]
        adjacency: u32,
        /// Write labels 1 (right) and 2 (left) instead of a binary mask
        #[arg(long)]
        per_side: bool,
    },
    /// Print the automatically selected seeds
    Seeds {
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Overlap and Dice of two masks
    Eval {
        reference: PathBuf,
        predicted: PathBuf,
        /// Compare only voxels with this label value
        #[arg(long)]
        label: Option<f32>,
    },
    /// Per-object overlap summary over a manifest
    /// (case_id,reference_path,predicted_path[,object,label])
    EvalBatch {
        manifest: PathBuf,
        /// Also print one line per case
        #[arg(long)]
        cases: bool,
    },
    /// Volume correlation matrix from case_id,method,volume_ml rows
    Corr { volumes: PathBuf },
    /// Write a synthetic thorax phantom
    Phantom {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 50.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
        /// Also write the ground truth, labels 1 (right) and 2 (left)
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run the annotation service
    Serve {
        #[arg(long, env = "LUNGSEG_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Write idle sessions here instead of dropping them
        #[arg(long)]
        spill_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        idle_minutes: u64,
        #[arg(long, default_value_t = 120)]
        timeout_secs: u64,
        /// Allowed CORS origin (default any)
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

fn parse_adjacency(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(n) if Adjacency::from_count(n).is_some() => Ok(n),
        _ => Err(format!("adjacency must be 6 or 26, got {s:?}")),
    }
}

fn parse_voxel(s: &str) -> Result<Voxel, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = [0usize; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p.trim().parse().map_err(|_| format!("bad coordinate {p:?}"))?;
    }
    Ok(v)
}

#[derive(Deserialize)]
struct SeedFile {
    #[serde(default)]
    left: Vec<Voxel>,
    #[serde(default)]
    right: Vec<Voxel>,
}

/// Operational failure: a library error, or a message with a code.
enum Failure {
    Lib(Error),
    Other(&'static str, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {}: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
        Err(Failure::Other(code, msg)) => {
            eprintln!("error: {code}: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Segment {
            input,
            output,
            seeds,
            left,
            right,
            mean,
            sigma,
            theta,
            adjacency,
            per_side,
        } => {
            let volume = io::load_volume(&input)?;
            let params = AffinityParams {
                mean_hu: mean,
                sigma_hu: sigma,
                adjacency: Adjacency::from_count(adjacency).expect("validated by clap"),
            };
            let manual = match seeds {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        Failure::Other("seed_file", format!("{}: {e}", path.display()))
                    })?;
                    let f: SeedFile = serde_json::from_str(&text).map_err(|e| {
                        Failure::Other("seed_file", format!("{}: {e}", path.display()))
                    })?;
                    let mut s = SeedSet::new(f.left, f.right, Provenance::ManualClick);
                    s.left.extend(&left);
                    s.right.extend(&right);
                    Some(s)
                }
                None if !left.is_empty() || !right.is_empty() => {
                    Some(SeedSet::new(left, right, Provenance::ManualClick))
                }
                None => None,
            };
            let result = match manual {
                Some(s) => {
                    let s = validate_manual_seeds(&volume, s)?;
                    for w in &s.warnings {
                        eprintln!("warning: {w}");
                    }
                    segment_lungs(&volume, &s, &params, theta)?
                }
                None => segment_auto(&volume, &params, theta)?,
            };
            if per_side {
                io::save_labels(volume.geometry(), &result.side_labels(), &output)?;
            } else {
                io::save_mask(&result.combined_mask, &output)?;
            }
            println!("left      {:.1} mL", volume_ml(&result.left_mask));
            println!("right     {:.1} mL", volume_ml(&result.right_mask));
            println!("combined  {:.1} mL", volume_ml(&result.combined_mask));
        }
        Command::Seeds { input, json } => {
            let volume = io::load_volume(&input)?;
            let (seeds, _) = auto_seeds(&volume)?;
            if json {
                println!("{}", serde_json::to_string(&seeds).expect("serializable"));
            } else {
                for side in [Side::Left, Side::Right] {
                    for v in seeds.side(side) {
                        println!("{side:<5}  {:>4} {:>4} {:>4}  {:.1} HU", v[0], v[1], v[2], volume.at(*v));
                    }
                }
            }
        }
        Command::Eval {
            reference,
            predicted,
            label,
        } => {
            let a = io::load_mask(&reference, label)?;
            let b = io::load_mask(&predicted, label)?;
            println!("overlap  {:.3}", metrics::overlap_coefficient(&a, &b)?);
            println!("dice     {:.3}", metrics::dice_coefficient(&a, &b)?);
        }
        Command::EvalBatch { manifest, cases } => {
            let file = std::fs::File::open(&manifest).map_err(|_| Error::FileNotFound(manifest.clone()))?;
            let rows = metrics::read_manifest(file)?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            let results = metrics::evaluate_manifest(&rows, base)?;
            if cases {
                for r in &results {
                    println!("{}\t{}\t{:.4}\t{:.4}", r.case_id, r.object, r.overlap, r.dice);
                }
                println!();
            }
            let summaries = metrics::summarize_by_object(&results)?;
            print!("{}", metrics::format_overlap_table(&summaries));
        }
        Command::Corr { volumes } => {
            let file = std::fs::File::open(&volumes).map_err(|_| Error::FileNotFound(volumes.clone()))?;
            let table = metrics::read_volume_table(file)?;
            let m = metrics::pearson_correlation_matrix(&table)?;
            print!("{}", metrics::format_correlation_table(&m));
        }
        Command::Phantom {
            output,
            size,
            noise,
            rng_seed,
            truth,
        } => {
            let spec = PhantomSpec::cube(size, noise, rng_seed);
            let p = generate_thorax_phantom(&spec)?;
            io::save_volume(&p.volume, &output)?;
            if let Some(path) = truth {
                let labels: Vec<u8> = p
                    .truth_right
                    .bits()
                    .iter()
                    .zip(p.truth_left.bits())
                    .map(|(&r, &l)| if l != 0 { 2 } else { r })
                    .collect();
                io::save_labels(p.volume.geometry(), &labels, &path)?;
            }
            println!("left      {:.1} mL", volume_ml(&p.truth_left));
            println!("right     {:.1} mL", volume_ml(&p.truth_right));
        }
        Command::Serve {
            port,
            host,
            spill_dir,
            idle_minutes,
            timeout_secs,
            cors_origin,
        } => {
            env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
            let config = lungseg_server::ServiceConfig {
                session_ttl: Duration::from_secs(idle_minutes * 60),
                spill_dir,
                segment_timeout: Duration::from_secs(timeout_secs),
                cors_origin,
                ..Default::default()
            };
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| Failure::Other("runtime", e.to_string()))?;
            rt.block_on(lungseg_server::serve(SocketAddr::new(host, port), config))
                .map_err(|e| Failure::Other("serve", e.to_string()))?;
        }
    }
    Ok(())
}
