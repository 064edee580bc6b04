use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use finfield::energy::{
    delta_from_field, delta_from_system, hamiltonian_from_delta, hamiltonian_from_field, system_from_delta,
    system_from_hamiltonian_with, Convention, Gauge,
};
use finfield::io::{
    adjacency_from_json, adjacency_to_json, configuration_from_json, sample_to_json, write_document,
    Document, HamiltonianDoc, Interchange,
};
use finfield::markov::{is_markov, minimal_neighborhoods};
use finfield::models;
use finfield::onepoint::DEFAULT_TOL;
use finfield::potential::{extract_potential_mobius, field_from_global, gibbs_system};
use finfield::reconstruct::{reconstruct_alternate, reconstruct_positive, reconstruct_weak, verify_invariance};
use finfield::{ConfigSpace, OnePointSystem, Potential, RandomField, Reconstruction, TransitionEnergyField};

/// Exact calculus for finite random fields.
///
/// Exit codes: 0 success, 1 negative verdict, 2 usage or data error.
#[derive(Parser)]
#[command(name = "finfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the consistency of a one-point conditional system.
    Check {
        #[arg(long)]
        system: PathBuf,
        /// Check the weakly positive form with positivity points from --theta.
        #[arg(long, requires = "theta")]
        weak: bool,
        /// Configuration file, or inline `site=state,...`.
        #[arg(long)]
        theta: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Reconstruct the field compatible with a consistent system.
    Reconstruct {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, requires = "theta")]
        weak: bool,
        #[arg(long)]
        theta: Option<String>,
        /// Site enumeration, as comma-separated site names.
        #[arg(long)]
        order: Option<String>,
        /// Base configuration: a file or inline `site=state,...`.
        #[arg(long)]
        base: Option<String>,
        /// Use the dual product formula.
        #[arg(long, conflicts_with = "weak")]
        alternate: bool,
        /// Also reconstruct under other enumerations and bases and require agreement.
        #[arg(long)]
        verify_invariance: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// One-point conditional system of a field.
    Conditionals {
        #[arg(long)]
        field: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Transition energy field of a positive system or field.
    ToDelta {
        #[arg(long, conflicts_with = "field", required_unless_present = "field")]
        system: Option<PathBuf>,
        #[arg(long)]
        field: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// One-point system from a transition energy field, Hamiltonian or potential.
    ToSystem {
        #[command(flatten)]
        source: SystemSource,
        #[command(flatten)]
        out: Output,
    },
    /// One-point Hamiltonian of a field (at --theta) or of a transition energy field.
    ToHamiltonian {
        #[arg(long, conflicts_with = "delta", required_unless_present = "delta", requires = "theta")]
        field: Option<PathBuf>,
        #[arg(long)]
        delta: Option<PathBuf>,
        #[arg(long)]
        theta: Option<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Gibbs field of a potential.
    ToField {
        #[arg(long)]
        potential: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Vacuum potential of a positive field by Möbius inversion.
    ExtractPotential {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        theta: String,
        #[command(flatten)]
        out: Output,
    },
    /// Check the Markov property against an adjacency, or print the minimal one.
    Markov {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, required_unless_present = "minimal")]
        adjacency: Option<PathBuf>,
        /// Print the minimal neighborhood system instead of checking one.
        #[arg(long, conflicts_with = "adjacency")]
        minimal: bool,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Generate model instances.
    Models {
        #[command(subcommand)]
        model: Model,
    },
    /// Heat-bath Gibbs sampling of a positive system.
    Sample {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        sweeps: u64,
        #[arg(long, default_value_t = 0)]
        burn_in: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SystemSource {
    #[arg(long)]
    delta: Option<PathBuf>,
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    #[arg(long)]
    potential: Option<PathBuf>,
}

#[derive(Args)]
struct Output {
    /// Output file; standard output when absent.
    #[arg(short = 'o', long = "output")]
    path: Option<PathBuf>,
}

#[derive(Args)]
struct SpaceArgs {
    /// Comma-separated site names.
    #[arg(long)]
    sites: String,
    /// Comma-separated state counts, one per site.
    #[arg(long)]
    cards: String,
}

#[derive(Subcommand)]
enum Model {
    /// Ising model on a grid; writes the potential and optionally more.
    Ising {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        #[arg(long)]
        adjacency: Option<PathBuf>,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        system: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Product field from per-site marginals `p,p;p,p,p;...`.
    Product {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        marginals: String,
        #[command(flatten)]
        out: Output,
    },
    /// Seeded strictly positive field.
    RandomField {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Seeded field vanishing off the configurations touching --theta.
    VacuumField {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        theta: String,
        #[command(flatten)]
        out: Output,
    },
    /// Seeded potential with terms up to --order sites.
    RandomPotential {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        order: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Multiply one conditional probability and renormalize its table.
    Perturb {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        site: String,
        /// Boundary index in the canonical order of the other sites.
        #[arg(long)]
        boundary: usize,
        #[arg(long, default_value_t = 0)]
        state: usize,
        #[arg(long)]
        factor: f64,
        #[command(flatten)]
        out: Output,
    },
}

type Failure = Box<dyn std::error::Error>;

enum Verdict {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()).into())
}

fn load<T: Interchange>(path: &Path) -> Result<T, Failure> {
    T::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn emit(out: &Output, text: &str) -> Result<(), Failure> {
    match &out.path {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_to(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()).into())
}

/// A full configuration given inline as `site=state,...` or as a file.
fn full_configuration(space: &ConfigSpace, spec: &str) -> Result<Vec<usize>, Failure> {
    let x = if spec.contains('=') {
        let pairs = spec
            .split(',')
            .map(|kv| {
                let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected site=state, got `{kv}`"))?;
                let v: usize = v.trim().parse().map_err(|_| format!("invalid state `{v}`"))?;
                Ok((k.trim().to_string(), v))
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        space.assign(&pairs)?
    } else {
        configuration_from_json(space, &read(Path::new(spec))?)?
    };
    if x.domain() != space.all() {
        return Err(format!("configuration must assign every site of {:?}", space.sites()).into());
    }
    Ok(x.values().to_vec())
}

fn site_order(space: &ConfigSpace, spec: &str) -> Result<Vec<usize>, Failure> {
    Ok(spec
        .split(',')
        .map(|s| space.site_index(s.trim()))
        .collect::<finfield::Result<_>>()?)
}

fn parse_space(args: &SpaceArgs) -> Result<ConfigSpace, Failure> {
    let sites: Vec<&str> = args.sites.split(',').map(str::trim).collect();
    let cards = args
        .cards
        .split(',')
        .map(|c| c.trim().parse::<usize>().map_err(|_| format!("invalid cardinality `{c}`")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConfigSpace::new(sites, cards)?)
}

fn print_report(json: bool, document: Document, text: String) {
    if json {
        print!("{}", write_document(&document));
    } else {
        print!("{text}");
    }
}

fn run(command: Command) -> Result<Verdict, Failure> {
    match command {
        Command::Check {
            system,
            weak,
            theta,
            tol,
            json,
        } => {
            let q: OnePointSystem = load(&system)?;
            let report = match (weak, theta) {
                (true, Some(theta)) => {
                    let theta = full_configuration(q.space(), &theta)?;
                    q.check_consistency_weak(&theta, tol)?
                }
                _ => q.check_consistency_positive(tol)?,
            };
            let verdict = if report.consistent { Verdict::Pass } else { Verdict::Fail };
            print_report(json, Document::ConsistencyReport(report.clone()), report.to_string());
            Ok(verdict)
        }
        Command::Reconstruct {
            system,
            weak,
            theta,
            order,
            base,
            alternate,
            verify_invariance: invariance,
            seed,
            out,
        } => {
            let q: OnePointSystem = load(&system)?;
            let space = q.space().clone();
            let mut opts = Reconstruction::default();
            if let Some(order) = order {
                opts = opts.with_order(site_order(&space, &order)?);
            }
            if let Some(base) = base {
                opts = opts.with_base(full_configuration(&space, &base)?);
            }
            let result = match (weak, theta) {
                (true, Some(theta)) => reconstruct_weak(&q, &full_configuration(&space, &theta)?, &opts),
                _ if alternate => reconstruct_alternate(&q, &opts),
                _ => reconstruct_positive(&q, &opts),
            };
            let p = match result {
                Ok(p) => p,
                Err(finfield::Error::Inconsistent(report)) => {
                    eprintln!("system is inconsistent\n{report}");
                    return Ok(Verdict::Fail);
                }
                Err(e) => return Err(e.into()),
            };
            if invariance {
                match verify_invariance(&q, 5, seed) {
                    Ok(report) => eprintln!(
                        "invariance verified over {} reconstructions (max deviation {:e})",
                        report.reconstructions, report.max_deviation
                    ),
                    Err(e @ finfield::Error::InvarianceFailure { .. }) => {
                        eprintln!("{e}");
                        return Ok(Verdict::Fail);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            emit(&out, &p.to_json())?;
            Ok(Verdict::Pass)
        }
        Command::Conditionals { field, out } => {
            let p: RandomField = load(&field)?;
            emit(&out, &p.one_point_system()?.to_json())?;
            Ok(Verdict::Pass)
        }
        Command::ToDelta { system, field, out } => {
            let delta = match (system, field) {
                (Some(system), _) => delta_from_system(&load(&system)?)?,
                (_, Some(field)) => delta_from_field(&load(&field)?)?,
                _ => unreachable!("clap requires one source"),
            };
            emit(&out, &delta.to_json())?;
            Ok(Verdict::Pass)
        }
        Command::ToSystem { source, out } => {
            let q = if let Some(path) = source.delta {
                let delta: TransitionEnergyField = load(&path)?;
                system_from_delta(&delta)
            } else if let Some(path) = source.hamiltonian {
                let doc: HamiltonianDoc = load(&path)?;
                system_from_hamiltonian_with(&doc.hamiltonian, doc.convention)
            } else {
                let phi: Potential = load(source.potential.as_deref().expect("clap requires one source"))?;
                Ok(gibbs_system(&phi))
            };
            match q {
                Ok(q) => {
                    emit(&out, &q.to_json())?;
                    Ok(Verdict::Pass)
                }
                Err(finfield::Error::Inconsistent(report)) => {
                    eprintln!("input is inconsistent\n{report}");
                    Ok(Verdict::Fail)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::ToHamiltonian {
            field,
            delta,
            theta,
            out,
        } => {
            let doc = match (field, delta) {
                (Some(field), _) => {
                    let p: RandomField = load(&field)?;
                    let theta = full_configuration(p.space(), theta.as_deref().unwrap_or_default())?;
                    HamiltonianDoc {
                        hamiltonian: hamiltonian_from_field(&p, &theta)?,
                        convention: Convention::LogProbability,
                    }
                }
                (_, Some(delta)) => HamiltonianDoc {
                    hamiltonian: hamiltonian_from_delta(&load(&delta)?, &Gauge::Zero)?,
                    convention: Convention::Energy,
                },
                _ => unreachable!("clap requires one source"),
            };
            emit(&out, &doc.to_json())?;
            Ok(Verdict::Pass)
        }
        Command::ToField { potential, out } => {
            let phi: Potential = load(&potential)?;
            emit(&out, &field_from_global(&phi)?.to_json())?;
            Ok(Verdict::Pass)
        }
        Command::ExtractPotential { field, theta, out } => {
            let p: RandomField = load(&field)?;
            let theta = full_configuration(p.space(), &theta)?;
            emit(&out, &extract_potential_mobius(&p, &theta)?.to_json())?;
            Ok(Verdict::Pass)
        }
        Command::Markov {
            field,
            adjacency,
            minimal,
            tol,
            json,
        } => {
            let p: RandomField = load(&field)?;
            if minimal {
                let ns = minimal_neighborhoods(&p, tol)?;
                print!("{}", adjacency_to_json(p.space(), &ns));
                return Ok(Verdict::Pass);
            }
            let path = adjacency.expect("clap requires an adjacency");
            let ns = adjacency_from_json(p.space(), &read(&path)?)?;
            let report = is_markov(&p, &ns, tol)?;
            let verdict = if report.markov { Verdict::Pass } else { Verdict::Fail };
            print_report(json, Document::MarkovReport(report.clone()), report.to_string());
            Ok(verdict)
        }
        Command::Models { model } => run_model(model),
        Command::Sample {
            system,
            sweeps,
            burn_in,
            seed,
            out,
        } => {
            let q: OnePointSystem = load(&system)?;
            let result = models::gibbs_sample(&q, sweeps, burn_in, seed)?;
            emit(&out, &sample_to_json(q.space(), &result))?;
            Ok(Verdict::Pass)
        }
    }
}

fn run_model(model: Model) -> Result<Verdict, Failure> {
    match model {
        Model::Ising {
            rows,
            cols,
            beta,
            h,
            adjacency,
            field,
            system,
            out,
        } => {
            let (phi, ns) = models::ising_potential(rows, cols, beta, h)?;
            if let Some(path) = adjacency {
                write_to(&path, &adjacency_to_json(phi.space(), &ns))?;
            }
            if let Some(path) = field {
                write_to(&path, &field_from_global(&phi)?.to_json())?;
            }
            if let Some(path) = system {
                write_to(&path, &gibbs_system(&phi).to_json())?;
            }
            emit(&out, &phi.to_json())?;
        }
        Model::Product { space, marginals, out } => {
            let space = parse_space(&space)?;
            let marginals = marginals
                .split(';')
                .map(|m| {
                    m.split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("invalid probability `{v}`")))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            emit(&out, &models::product_field(space, &marginals)?.to_json())?;
        }
        Model::RandomField { space, seed, out } => {
            let space = parse_space(&space)?;
            emit(&out, &models::random_positive_field(&space, seed).to_json())?;
        }
        Model::VacuumField {
            space,
            seed,
            theta,
            out,
        } => {
            let space = parse_space(&space)?;
            let theta = full_configuration(&space, &theta)?;
            emit(&out, &models::vacuum_field(&space, seed, &theta)?.to_json())?;
        }
        Model::RandomPotential {
            space,
            order,
            seed,
            out,
        } => {
            let space = parse_space(&space)?;
            emit(&out, &models::random_potential(&space, order, seed)?.to_json())?;
        }
        Model::Perturb {
            system,
            site,
            boundary,
            state,
            factor,
            out,
        } => {
            let q: OnePointSystem = load(&system)?;
            let t = q.space().site_index(&site)?;
            emit(&out, &models::perturb_entry(&q, t, boundary, state, factor)?.to_json())?;
        }
    }
    Ok(Verdict::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_valid() {
        Cli::command().debug_assert();
    }

    #[test]
    fn inline_configurations() {
        let space = ConfigSpace::new(["a", "b"], [2, 3]).unwrap();
        assert_eq!(full_configuration(&space, "b=2,a=1").unwrap(), vec![1, 2]);
        assert!(full_configuration(&space, "a=1").is_err());
        assert!(full_configuration(&space, "a=1,b=3").is_err());
        assert!(full_configuration(&space, "a=1,c=0").is_err());
        assert_eq!(site_order(&space, "b,a").unwrap(), vec![1, 0]);
    }
}
