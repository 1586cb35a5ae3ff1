use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use hybridheat::bench::{bench, write_bench};
use hybridheat::compare::{CompareReport, compare_dirs};
use hybridheat::config::{Mode, Preset, load};
use hybridheat::exit;
use hybridheat::run::{execute, write_artifacts};

#[derive(Parser)]
#[command(name = "hybridheat", version, about = "Fine, upscaled and hybrid heat transfer in battery packs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration and write its artifacts.
    Run {
        config: PathBuf,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        /// Desk-scale fine mesh for the preset.
        #[arg(long)]
        coarsen: bool,
        /// `section.key=value`; repeatable.
        #[arg(long = "override", value_name = "K=V")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Compare run B against reference run A, snapshot by snapshot.
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// Error bound; defaults to ε of run A.
        #[arg(long)]
        tol: Option<f64>,
        /// Where to write the error CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Speedup of hybrid over fine-only runs across fine fractions.
    Bench {
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        fractions: Vec<f64>,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        #[arg(long)]
        coarsen: bool,
        #[arg(long = "override", value_name = "K=V")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PresetArg {
    PaperAccuracy,
    PaperEfficiency,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::PaperAccuracy => Preset::PaperAccuracy,
            PresetArg::PaperEfficiency => Preset::PaperEfficiency,
        }
    }
}

fn print_report(r: &CompareReport) {
    println!("tolerance {}", r.tol);
    for s in &r.snapshots {
        let region = s.failing_x.map(|(a, b)| format!(" fails for x in [{a:.4}, {b:.4}]")).unwrap_or_default();
        println!(
            "{}: max err Tp {:.3e} Tc {:.3e}, centerline Tp {:.3e} Tc {:.3e} {}{}",
            s.label,
            s.max_tp,
            s.max_tc,
            s.centerline_tp,
            s.centerline_tc,
            if s.pass { "PASS" } else { "FAIL" },
            region
        );
    }
}

fn progress(quiet: bool) -> Box<dyn FnMut(&str)> {
    if quiet { Box::new(|_| {}) } else { Box::new(|m| eprintln!("{m}")) }
}

fn run(config: &Path, preset: Option<Preset>, coarsen: bool, overrides: &[String], out: Option<PathBuf>, quiet: bool) -> Result<bool> {
    let cfg = load(config, preset, coarsen, overrides)?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let mut say = progress(quiet);
    if cfg.mode == Mode::Bench {
        let r = bench(&cfg, &cfg.bench.fractions.clone(), Some(&mut *say))?;
        write_bench(&r, &dir)?;
        return Ok(r.pass());
    }
    let result = execute(&cfg, Some(&mut *say))?;
    write_artifacts(&result, &dir)?;
    let mut pass = true;
    if let Some(rep) = &result.closure {
        println!("closure invariants {}", if rep.pass { "PASS" } else { "FAIL" });
        pass &= rep.pass;
    }
    if let Some(reference) = &cfg.output.reference {
        let r = compare_dirs(Path::new(reference), &dir, cfg.output.tolerance, Some(&dir.join("compare")))
            .with_context(|| format!("comparing against {reference}"))?;
        print_report(&r);
        pass &= r.pass;
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run { config, preset, coarsen, overrides, out, quiet } => run(&config, preset.map(Into::into), coarsen, &overrides, out, quiet),
        Cmd::Compare { dir_a, dir_b, tol, out } => compare_dirs(&dir_a, &dir_b, tol, out.as_deref()).map(|r| {
            print_report(&r);
            r.pass
        }),
        Cmd::Bench { config, fractions, preset, coarsen, overrides, out, quiet } => (|| {
            let mut cfg = load(&config, preset.map(Into::into), coarsen, &overrides)?;
            cfg.mode = Mode::Bench;
            cfg.validate()?;
            let fr = if fractions.is_empty() { cfg.bench.fractions.clone() } else { fractions };
            let mut say = progress(quiet);
            let r = bench(&cfg, &fr, Some(&mut *say))?;
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            write_bench(&r, &dir)?;
            for row in &r.rows {
                println!("{:?} fraction {} speedup {:.3}", row.scheme, row.fraction, row.speedup);
            }
            for t in &r.trends {
                println!("{:?} breakeven {:?} non-increasing {} first > 1 {}", t.scheme, t.breakeven, t.non_increasing, t.first_above_one);
            }
            Ok(r.pass())
        })(),
    };
    match outcome {
        Ok(true) => ExitCode::from(exit::PASS as u8),
        Ok(false) => ExitCode::from(exit::FAIL as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::ERROR as u8)
        }
    }
}
