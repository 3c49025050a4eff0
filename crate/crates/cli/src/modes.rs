use log::info;
use rayon::prelude::*;
use serde::Serialize;

use frustra_core::container::Container;
use frustra_core::counting::{first_frustrated_length, solution_count_sequence, CountReport};
use frustra_core::dense_oracle::{build_dense_hamiltonian, kernel_dimension, DEFAULT_DENSE_CAP, DEFAULT_KERNEL_TOL};
use frustra_core::exact_solver::{appendix_construction_check, product_state_energy, product_state_solve};
use frustra_core::mps::{ground_search, SearchOutcome};
use frustra_core::{classify_regime, propagate_solutions, ChainSpec, ProjectorChain, Regime, SolverOptions};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::output::{csv_document, fmt_f64, fmt_opt, write_artifact};
use crate::{HarnessError, RunReport};


fn chain_tag(spec: &ChainSpec) -> String {
    format!("d{}_r{}_n{}", spec.local_dim, spec.rank, spec.n_sites)
}

fn count_strings(d: usize, r: usize, n: usize) -> Result<Vec<String>, HarnessError> {
    Ok(solution_count_sequence(d, r, n)?.iter().map(|v| v.to_string()).collect())
}

pub fn count(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let spec = cfg.chain();
    let report = CountReport::new(spec.local_dim, spec.rank, spec.n_sites)?;
    let tag = format!("d{}_r{}_n{}", spec.local_dim, spec.rank, spec.n_sites);
    let mut out = RunReport::default();
    out.artifacts.push(write_artifact(&cfg.out_dir, &format!("count_{tag}.json"), report.to_json()?.as_bytes())?);
    if cfg.format == OutputFormat::Csv {
        let rows = report.d_sequence.iter().enumerate().map(|(n, v)| vec![n.to_string(), v.to_string()]);
        let doc = csv_document(&["n", "D_n"], rows)?;
        out.artifacts.push(write_artifact(&cfg.out_dir, &format!("count_{tag}.csv"), doc.as_bytes())?);
    }
    let last = report.d_sequence.last().expect("sequence includes D_0");
    out.lines.push(format!("regime {}; D_{} = {last}", report.regime, spec.n_sites));
    if let Some(n) = report.first_frustrated_length {
        out.lines.push(format!("first frustrated length {n}"));
    }
    Ok(out)
}

/// One cell of the `(d, r)` plane.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhaseRow {
    pub d: usize,
    pub r: usize,
    pub regime: Regime,
    /// `"<"`, `"="` or `">"`: how `4r` compares with `d²`.
    pub relation: &'static str,
    pub first_frustrated_length: Option<usize>,
}

pub fn phase_diagram_rows(d_max: usize) -> Vec<PhaseRow> {
    let mut rows = Vec::new();
    for d in 2..=d_max {
        for r in 1..=d * d {
            let relation = match (4 * r).cmp(&(d * d)) {
                std::cmp::Ordering::Less => "<",
                std::cmp::Ordering::Equal => "=",
                std::cmp::Ordering::Greater => ">",
            };
            rows.push(PhaseRow {
                d,
                r,
                regime: classify_regime(d, r).expect("valid pair"),
                relation,
                first_frustrated_length: first_frustrated_length(d, r).expect("valid pair"),
            });
        }
    }
    rows
}

/// Phase diagram for `2 ≤ d ≤ d_max`, `1 ≤ r ≤ d²` as a CSV document.
pub fn emit_phase_diagram(d_max: usize) -> Result<String, HarnessError> {
    let rows = phase_diagram_rows(d_max).into_iter().map(|row| {
        vec![
            row.d.to_string(),
            row.r.to_string(),
            row.regime.to_string(),
            format!("4r{}d^2", row.relation),
            fmt_opt(row.first_frustrated_length),
        ]
    });
    csv_document(&["d", "r", "regime", "relation", "first_frustrated_length"], rows)
}

pub fn phase_diagram(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let mut out = RunReport::default();
    let (name, body) = match cfg.format {
        OutputFormat::Csv => (format!("phase_diagram_d{}.csv", cfg.d_max), emit_phase_diagram(cfg.d_max)?),
        OutputFormat::Json => (
            format!("phase_diagram_d{}.json", cfg.d_max),
            serde_json::to_string_pretty(&phase_diagram_rows(cfg.d_max))?,
        ),
    };
    out.artifacts.push(write_artifact(&cfg.out_dir, &name, body.as_bytes())?);
    out.lines.push(format!("{} cells", phase_diagram_rows(cfg.d_max).len()));
    Ok(out)
}

fn write_container(cfg: &ExperimentConfig, stem: &str, c: &Container) -> Result<std::path::PathBuf, HarnessError> {
    match cfg.format {
        OutputFormat::Csv => write_artifact(&cfg.out_dir, &format!("{stem}.bin"), &c.to_binary()?),
        OutputFormat::Json => write_artifact(&cfg.out_dir, &format!("{stem}.json"), c.to_json()?.as_bytes()),
    }
}

pub fn solve_exact(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let base = cfg.chain();
    let expected = count_strings(base.local_dim, base.rank, base.n_sites)?;
    let mut out = RunReport::default();
    for &seed in &cfg.seeds {
        let spec = cfg.chain_with_seed(seed);
        let chain = ProjectorChain::random(spec, cfg.field)?;
        let stack = propagate_solutions(&chain, SolverOptions { rank_tol: cfg.rank_tol, keep: None })?;
        let stem = format!("solve_{}_seed{seed}", chain_tag(&spec));
        out.artifacts.push(write_container(cfg, &stem, &Container::from_solution_stack(&stack, &spec, cfg.field))?);
        let rows = (1..=spec.n_sites).map(|n| {
            let step = stack.steps.iter().find(|s| s.n == n);
            vec![
                n.to_string(),
                stack.s_sequence.get(n).copied().unwrap_or(0).to_string(),
                expected[n].clone(),
                fmt_opt(step.map(|s| s.rank_c)),
                fmt_opt(step.and_then(|s| s.sigma_gap).map(fmt_f64)),
            ]
        });
        let doc = csv_document(&["n", "s_n", "D_n", "rank_C", "sigma_gap"], rows)?;
        out.artifacts.push(write_artifact(&cfg.out_dir, &format!("{stem}.csv"), doc.as_bytes())?);
        out.lines.push(format!("seed {seed}: s_N = {} (D_N = {})", stack.count(), expected[spec.n_sites]));
    }
    Ok(out)
}

#[derive(Serialize)]
struct ProductRecord {
    seed: u64,
    residual_energy: f64,
    /// Per site, `[re, im]` pairs.
    sites: Vec<Vec<[f64; 2]>>,
}

pub fn product(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let base = cfg.chain();
    if base.rank >= base.local_dim {
        return Err(HarnessError::Config(format!(
            "product mode needs r < d, got d={} r={}",
            base.local_dim, base.rank
        )));
    }
    let records = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let chain = ProjectorChain::random(cfg.chain_with_seed(seed), cfg.field)?;
            let sites = product_state_solve(&chain)?;
            Ok(ProductRecord {
                seed,
                residual_energy: product_state_energy(&sites, &chain.bonds),
                sites: sites.iter().map(|v| v.iter().map(|z| [z.re, z.im]).collect()).collect(),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let tag = chain_tag(&base);
    let mut out = RunReport::default();
    match cfg.format {
        OutputFormat::Json => {
            let body = serde_json::to_string_pretty(&records)?;
            out.artifacts.push(write_artifact(&cfg.out_dir, &format!("product_{tag}.json"), body.as_bytes())?);
        }
        OutputFormat::Csv => {
            let summary = records.iter().map(|r| vec![r.seed.to_string(), fmt_f64(r.residual_energy)]);
            let doc = csv_document(&["seed", "residual_energy"], summary)?;
            out.artifacts.push(write_artifact(&cfg.out_dir, &format!("product_{tag}_summary.csv"), doc.as_bytes())?);
            let vectors = records.iter().flat_map(|r| {
                r.sites.iter().enumerate().flat_map(move |(k, v)| {
                    v.iter().enumerate().map(move |(i, z)| {
                        vec![r.seed.to_string(), (k + 1).to_string(), i.to_string(), fmt_f64(z[0]), fmt_f64(z[1])]
                    })
                })
            });
            let doc = csv_document(&["seed", "site", "component", "re", "im"], vectors)?;
            out.artifacts.push(write_artifact(&cfg.out_dir, &format!("product_{tag}_vectors.csv"), doc.as_bytes())?);
        }
    }
    for r in &records {
        out.lines.push(format!("seed {}: residual energy {}", r.seed, fmt_f64(r.residual_energy)));
    }
    Ok(out)
}

/// Final numbers of one `(χ, seed)` ground-state search.
#[derive(Debug, Clone, Serialize)]
pub struct TebdCell {
    pub chi: usize,
    pub seed: u64,
    pub final_energy: f64,
    pub sweeps: usize,
    pub stop: String,
}

pub fn tebd_trace_csv(outcome: &SearchOutcome) -> Result<String, HarnessError> {
    let rows = outcome.trace.iter().map(|row| {
        vec![
            row.sweep.to_string(),
            fmt_f64(row.tau),
            fmt_f64(row.energy),
            fmt_f64(row.max_truncation_error),
            fmt_f64(row.min_bond_entropy),
            fmt_f64(row.max_bond_entropy),
        ]
    });
    csv_document(&["sweep", "tau", "energy", "trunc_err", "S_min", "S_max"], rows)
}

pub fn tebd(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let base = cfg.chain();
    let cells: Vec<(usize, u64)> =
        cfg.chi_list.iter().flat_map(|&chi| cfg.seeds.iter().map(move |&seed| (chi, seed))).collect();
    let outcomes = cells
        .par_iter()
        .map(|&(chi, seed)| {
            let spec = cfg.chain_with_seed(seed);
            let chain = ProjectorChain::random(spec, cfg.field)?;
            info!("tebd {} chi={chi} seed={seed}", chain_tag(&spec));
            Ok(ground_search(&spec, &chain.bonds, &cfg.schedule, chi, cfg.stop, cfg.trotter)?)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let tag = chain_tag(&base);
    let mut out = RunReport::default();
    let mut summary = Vec::new();
    for (&(chi, seed), outcome) in cells.iter().zip(&outcomes) {
        let stem = format!("tebd_{tag}_chi{chi}_seed{seed}");
        out.artifacts.push(write_artifact(&cfg.out_dir, &format!("{stem}.csv"), tebd_trace_csv(outcome)?.as_bytes())?);
        let spec = cfg.chain_with_seed(seed);
        out.artifacts.push(write_container(cfg, &format!("{stem}_state"), &Container::from_mps(&outcome.state, &spec, cfg.field))?);
        let cell = TebdCell {
            chi,
            seed,
            final_energy: outcome.final_energy(),
            sweeps: outcome.trace.len(),
            stop: format!("{:?}", outcome.stop),
        };
        out.lines.push(format!("chi {chi} seed {seed}: E = {} after {} sweeps ({})", fmt_f64(cell.final_energy), cell.sweeps, cell.stop));
        summary.push(cell);
    }
    let rows = summary.iter().map(|c| {
        vec![c.chi.to_string(), c.seed.to_string(), fmt_f64(c.final_energy), c.sweeps.to_string(), c.stop.clone()]
    });
    let doc = csv_document(&["chi", "seed", "final_energy", "sweeps", "stop"], rows)?;
    out.artifacts.push(write_artifact(&cfg.out_dir, &format!("tebd_{tag}_summary.csv"), doc.as_bytes())?);
    Ok(out)
}

/// Propagation count against the dense kernel for one seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleRow {
    pub seed: u64,
    pub expected: String,
    pub propagated: usize,
    pub dense_kernel: usize,
    pub ambiguous_eigenvalues: usize,
    pub matches: bool,
}

pub fn oracle_rows(cfg: &ExperimentConfig) -> Result<Vec<OracleRow>, HarnessError> {
    let base = cfg.chain();
    let d_n = solution_count_sequence(base.local_dim, base.rank, base.n_sites)?.pop().expect("nonempty");
    let expected = match d_n.to_string() {
        s if s.starts_with('-') => "0".to_string(),
        s => s,
    };
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let chain = ProjectorChain::random(cfg.chain_with_seed(seed), cfg.field)?;
            let stack = propagate_solutions(&chain, SolverOptions { rank_tol: cfg.rank_tol, keep: None })?;
            let h = build_dense_hamiltonian(&chain, DEFAULT_DENSE_CAP)?;
            let kernel = kernel_dimension(&h, DEFAULT_KERNEL_TOL)?;
            let propagated = stack.count();
            Ok(OracleRow {
                seed,
                matches: propagated.to_string() == expected && kernel.dim.to_string() == expected,
                expected: expected.clone(),
                propagated,
                dense_kernel: kernel.dim,
                ambiguous_eigenvalues: kernel.ambiguous,
            })
        })
        .collect()
}

pub fn oracle_check(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let rows = oracle_rows(cfg)?;
    let mut out = RunReport::default();
    let doc = csv_document(
        &["seed", "D_N", "s_N", "dense_kernel", "ambiguous", "match"],
        rows.iter().map(|r| {
            vec![
                r.seed.to_string(),
                r.expected.clone(),
                r.propagated.to_string(),
                r.dense_kernel.to_string(),
                r.ambiguous_eigenvalues.to_string(),
                r.matches.to_string(),
            ]
        }),
    )?;
    let tag = chain_tag(&cfg.chain());
    out.artifacts.push(write_artifact(&cfg.out_dir, &format!("oracle_{tag}.csv"), doc.as_bytes())?);
    let passed = rows.iter().filter(|r| r.matches).count();
    out.lines.push(format!("{passed}/{} matches", rows.len()));
    out.failed = passed != rows.len();
    Ok(out)
}

pub fn appendix_verify(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let spec = cfg.chain();
    let report = appendix_construction_check(spec.local_dim, spec.rank, spec.n_sites).map_err(|e| match e {
        frustra_core::Error::InvalidChain(msg) => HarnessError::Config(msg),
        other => other.into(),
    })?;
    let rows = report.steps.iter().map(|s| {
        vec![
            s.n.to_string(),
            s.s_n.to_string(),
            s.expected_s.to_string(),
            s.rank_c.to_string(),
            s.expected_rank.to_string(),
            s.explicit_in_kernel.to_string(),
            s.passed().to_string(),
        ]
    });
    let doc = csv_document(&["n", "s_n", "D_n", "rank_C", "expected_rank", "explicit_in_kernel", "passed"], rows)?;
    let mut out = RunReport::default();
    out.artifacts.push(write_artifact(&cfg.out_dir, &format!("appendix_{}.csv", chain_tag(&spec)), doc.as_bytes())?);
    out.lines.push(format!("{} steps, {}", report.steps.len(), if report.passed { "all passed" } else { "FAILED" }));
    out.failed = !report.passed;
    Ok(out)
}
