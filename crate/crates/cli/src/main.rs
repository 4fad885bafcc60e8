//! `percolab`: sample configurations, measure distances, estimate the time
//! constant and run the experiment plans.

mod args;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use percolab::chemdist::{chemical_distance, distance_field, modified_distance};
use percolab::clusters::label_clusters;
use percolab::experiments::{self, ExperimentKind, ExperimentPlan, Status};
use percolab::lattice::{EdgeConfiguration, LatticeBox, RenormScheme};
use percolab::renorm::renorm_distance;
use percolab::subadd::{estimate_h_ball, estimate_mu, gap_check_with_ci, BoxPolicy, HTable, MuEstimate, NormEstimate};
use percolab::Error;

use args::{Cli, Command, DistArgs, ExperimentArgs, GapArgs, MuArgs, SampleArgs};
use output::{write_atomic, Failure};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers;
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Sample(a) => sample(a),
        Command::Dist(a) => dist(a),
        Command::Mu(a) => mu(a),
        Command::Gap(a) => gap(a),
        Command::Experiment(a) => experiment(a, workers),
        Command::Inspect { config } => inspect(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// The resolved invocation goes to stderr so stdout stays machine-readable.
fn announce(what: &str, resolved: &serde_json::Value) {
    eprintln!("{what}: {}", serde_json::to_string_pretty(resolved).expect("json"));
}

fn read_config(path: &Path) -> Result<EdgeConfiguration, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Ok(EdgeConfiguration::from_bytes(&bytes)?)
}

fn read_json(path: &Path) -> Result<serde_json::Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn sample(a: SampleArgs) -> Result<(), Failure> {
    announce("sample", &json!({"dim": a.dim, "size": a.size, "p": a.p, "seed": a.seed, "out": a.out}));
    let g = LatticeBox::centered(a.dim, a.size)?;
    let config = EdgeConfiguration::sample(g, a.p, a.seed)?;
    write_atomic(&a.out, &config.to_bytes())?;
    eprintln!("version {} seed {} digest {}", env!("CARGO_PKG_VERSION"), a.seed, config.digest());
    println!("{}", config.digest());
    Ok(())
}

fn dist(a: DistArgs) -> Result<(), Failure> {
    let config = read_config(&a.config)?;
    announce(
        "dist",
        &json!({"config": a.config, "from": a.from.0, "to": a.to.as_ref().map(|t| &t.0), "star": a.star,
                "renorm": a.renorm.map(|(t, k)| json!({"t": t, "k": k, "rho": a.rho})), "field_csv": a.field_csv}),
    );
    eprintln!("config digest {}", config.digest());
    if let Some(path) = &a.field_csv {
        let mut buf = Vec::new();
        distance_field(&config, &a.from.0)?.write_csv(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    let Some(to) = &a.to else {
        return if a.field_csv.is_some() {
            Ok(())
        } else {
            Err(Failure::usage("--to is required without --field-csv"))
        };
    };
    if let Some((t, k)) = a.renorm {
        let scheme = RenormScheme::new(t, k, a.rho)?;
        println!("{}", renorm_distance(&config, &scheme, &a.from.0, &to.0)?.value());
    } else if a.star {
        let lab = label_clusters(&config);
        if !lab.is_valid() {
            return Err(Error::DataQuality("no crossing cluster; D* is undefined".into()).into());
        }
        println!("{}", modified_distance(&config, &lab, &a.from.0, &to.0)?);
    } else {
        println!("{}", chemical_distance(&config, &a.from.0, &to.0)?);
    }
    Ok(())
}

fn mu(a: MuArgs) -> Result<(), Failure> {
    announce(
        "mu",
        &json!({"directions": a.direction.iter().map(|d| &d.0).collect::<Vec<_>>(), "ns": a.ns.0, "p": a.p, "replicates": a.replicates, "seed": a.seed,
                "lattice_symmetric": !a.no_symmetry, "out": a.out}),
    );
    let ns: Vec<u64> = a.ns.0.iter().map(|&n| n as u64).collect();
    let fits: Vec<MuEstimate<f64>> = a
        .direction
        .iter()
        .enumerate()
        .map(|(i, y)| {
            estimate_mu(&y.0, &ns, a.p, a.replicates, percolab::lattice::rng::derive_seed(a.seed, 0x4E, i as u64))
        })
        .collect::<Result<_, Error>>()?;
    for f in &fits {
        if let Some(w) = &f.warning {
            eprintln!("warning: {:?}: {w}", f.direction);
        }
        println!("{:?}\t{}\t[{}, {}]", f.direction, f.mu, f.ci.0, f.ci.1);
    }
    if let Some(out) = &a.out {
        let est: Vec<_> = fits.iter().map(MuEstimate::direction_estimate).collect();
        let norm = NormEstimate::build(&est, !a.no_symmetry)?;
        let mut doc = norm.to_json();
        doc["fits"] = serde_json::to_value(&fits).expect("json");
        write_atomic(out, serde_json::to_string_pretty(&doc).expect("json").as_bytes())?;
    }
    Ok(())
}

fn gap(a: GapArgs) -> Result<(), Failure> {
    announce(
        "gap",
        &json!({"norm": a.norm, "table": a.table, "radius": a.radius, "p": a.p, "replicates": a.replicates,
                "seed": a.seed, "threshold": a.threshold, "constant": a.constant, "resamples": a.resamples,
                "table_out": a.table_out}),
    );
    let norm = NormEstimate::<f64>::from_json(&read_json(&a.norm)?)?;
    let table: HTable<f64> = match (&a.table, a.radius, a.p) {
        (Some(path), _, _) => HTable::from_json(&read_json(path)?)?,
        (None, Some(r), Some(p)) => estimate_h_ball(norm.dim(), r, p, a.replicates, a.seed, BoxPolicy::default())?,
        _ => return Err(Failure::usage("give --table, or --radius with --p to sample one")),
    };
    if let Some(path) = &a.table_out {
        write_atomic(path, serde_json::to_string_pretty(&table.to_json()).expect("json").as_bytes())?;
    }
    let report =
        gap_check_with_ci(&norm, &table, a.threshold, a.constant, a.resamples, percolab::lattice::rng::mix64(a.seed))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    Ok(())
}

fn experiment(a: ExperimentArgs, workers: Option<usize>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.plan).map_err(|e| Failure::usage(format!("{}: {e}", a.plan.display())))?;
    let mut plan = ExperimentPlan::from_json(&text)?;
    let kind = ExperimentKind::parse(&a.kind).ok_or_else(|| {
        let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        Failure::usage(format!("unknown experiment '{}'; expected one of {}", a.kind, names.join(", ")))
    })?;
    if kind != plan.kind {
        return Err(Failure::usage(format!("plan is for '{}', not '{}'", plan.kind.name(), kind.name())));
    }
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    plan.output = Some(a.out.display().to_string());
    plan.csv_dir = a.csv.as_ref().map(|p| p.display().to_string());
    plan.workers = Some(workers.unwrap_or_else(rayon::current_num_threads));
    let plan = plan.resolved();
    announce("plan", &serde_json::to_value(&plan).expect("json"));
    plan.validate()?;
    let report = experiments::run(&plan)?;
    let doc = serde_json::to_string_pretty(&report).expect("json");
    write_atomic(&a.out, doc.as_bytes())?;
    if let Some(dir) = &a.csv {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        for t in &report.tables {
            write_atomic(&dir.join(format!("{}.csv", t.name)), t.to_csv().as_bytes())?;
        }
    }
    eprintln!(
        "version {} seed {} runtime {:.1}s digests {:?}",
        report.provenance.version, report.provenance.seed, report.provenance.runtime_seconds, report.digests
    );
    for v in &report.verdicts {
        let tag = match v.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
            Status::Degenerate => "DEGENERATE",
        };
        println!("{tag} {}: {} (tolerance: {}; n = {})", v.criterion, v.detail, v.tolerance, v.samples);
    }
    Ok(())
}

fn inspect(path: &Path) -> Result<(), Failure> {
    let config = read_config(path)?;
    let g = config.geometry();
    let lab = label_clusters(&config);
    let summary = json!({
        "format": "PERCCFG1",
        "dim": g.dim(),
        "sides": g.sides(),
        "origin": g.origin(),
        "p": config.p(),
        "seed": config.seed(),
        "edges": g.edge_count(),
        "open_edges": config.open_edge_count(),
        "giant_size": lab.giant_size(),
        "crossing_cluster": lab.is_valid(),
        "digest": config.digest(),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    Ok(())
}
