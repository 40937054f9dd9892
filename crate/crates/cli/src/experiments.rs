//! The energy tables: `table1`, `trotter-scan`, `thermo` and `run`.

use anyhow::{ensure, Result};
use dmetvqe_core::dmet::{self, DmetConfig};
use dmetvqe_core::lattice::{self, Ring};
use dmetvqe_core::optimize::BfgsOptions;
use dmetvqe_core::{Boundary, Solver};

use crate::cells::{self, Cell, Outcome};
use crate::config::{Defaults, MethodKind, Settings, SolverKind};
use crate::table::{energy, sig, Table};

const TABLE_U: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];
const THERMO_SITES: usize = 100;

pub fn table1_defaults() -> Defaults {
    Defaults {
        sites: 4,
        interactions: TABLE_U.to_vec(),
    }
}

pub fn trotter_defaults() -> Defaults {
    Defaults {
        sites: 4,
        interactions: vec![2.0],
    }
}

pub fn thermo_defaults() -> Defaults {
    Defaults {
        sites: THERMO_SITES,
        interactions: TABLE_U.to_vec(),
    }
}

pub fn run_defaults() -> Defaults {
    Defaults {
        sites: 4,
        interactions: TABLE_U.to_vec(),
    }
}

/// A finished table plus one entry per cell that did not converge.
pub struct Report {
    pub table: Table,
    pub problems: Vec<String>,
}

impl Report {
    fn new(table: Table, outcomes: &[(String, Outcome)]) -> Self {
        let problems = outcomes
            .iter()
            .filter(|(_, o)| !o.converged)
            .map(|(label, o)| format!("{label}: {}", o.note.as_deref().unwrap_or("did not converge")))
            .collect();
        Report { table, problems }
    }
}

fn ring(s: &Settings, u: f64) -> Ring {
    Ring {
        sites: s.sites,
        hopping: s.hopping,
        interaction: u,
        boundary: s.boundary,
    }
}

fn u_label(u: f64) -> String {
    format!("U={u}")
}

fn exact_cell(r: Ring) -> Outcome {
    match lattice::exact_energy_per_site(&r) {
        Ok(e) => Outcome::exact(e),
        Err(e) => Outcome::failed(e.to_string()),
    }
}

fn uccsd_cell(r: Ring, order: u32, steps: usize, opts: BfgsOptions) -> Outcome {
    match lattice::uccsd(&r, order, steps, &opts) {
        Ok(v) => Outcome::iterative(
            v.energy / r.sites as f64,
            v.converged,
            format!("optimizer stopped after {} iterations", v.iterations),
        ),
        Err(e) => Outcome::failed(e.to_string()),
    }
}

fn dmet_cell(cfg: DmetConfig) -> Outcome {
    match dmet::run(&cfg) {
        Ok(r) => {
            let note = if !r.converged {
                format!("embedding loop not converged after {} macro-iterations", r.history.len())
            } else {
                "embedded-problem optimizer did not converge".to_string()
            };
            Outcome::iterative(r.energy_per_site, r.converged && r.solver_converged, note)
        }
        Err(e) => Outcome::failed(e.to_string()),
    }
}

fn dmet_name(fragment_size: usize, solver: Solver) -> String {
    let tag = match solver {
        Solver::Ed => "ED",
        Solver::Uccsd { .. } => "UCCSD",
    };
    format!("DMET({fragment_size})-{tag}")
}

/// Energies per site of the 4-site ring: exact, whole-ring UCCSD and DMET
/// with one- and two-site fragments, one column per U.
pub fn table1(s: &Settings, noninteracting: bool) -> Result<Report> {
    ensure!(
        s.sites == 4 && s.boundary == Boundary::AntiPeriodic,
        "table1 is defined for the 4-site anti-periodic ring (got {} sites, {:?})",
        s.sites,
        s.boundary
    );
    let mut us = s.interactions.clone();
    if noninteracting && !us.contains(&0.0) {
        us.insert(0, 0.0);
    }
    let uccsd = s.uccsd_solver();
    let rows: [(&str, Option<(usize, Solver)>); 5] = [
        ("Exact", None),
        ("UCCSD", None),
        ("DMET(1)-ED", Some((1, Solver::Ed))),
        ("DMET(2)-ED", Some((2, Solver::Ed))),
        ("DMET(1)-UCCSD", Some((1, uccsd))),
    ];
    let mut cells = Vec::new();
    for (name, dmet) in rows {
        for &u in &us {
            let label = format!("{name} {}", u_label(u));
            let r = ring(s, u);
            let cell = match (name, dmet) {
                ("Exact", _) => Cell::new(label, move || exact_cell(r)),
                (_, None) => {
                    let (order, steps, opts) = (s.trotter_order, s.trotter_steps, s.bfgs);
                    Cell::new(label, move || uccsd_cell(r, order, steps, opts))
                }
                (_, Some((nf, solver))) => {
                    let cfg = s.dmet(u, nf, solver);
                    Cell::new(label, move || dmet_cell(cfg))
                }
            };
            cells.push(cell);
        }
    }
    let out = cells::run(cells, s.threads, s.timeout)?;
    let mut table = Table::new(std::iter::once("method".to_string()).chain(us.iter().map(|&u| u_label(u))));
    for (k, (name, _)) in rows.iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend(out[k * us.len()..(k + 1) * us.len()].iter().map(|(_, o)| energy(o.value)));
        table.push(row);
    }
    Ok(Report::new(table, &out))
}

/// Whole-ring UCCSD for Trotter orders {1, 2} and 1 to 4 steps, plus the
/// exact reference, at each configured U.
pub fn trotter_scan(s: &Settings) -> Result<Report> {
    ensure!(s.sites == 4, "trotter-scan is defined for the 4-site ring (got {} sites)", s.sites);
    let mut cells = Vec::new();
    let mut keys = Vec::new();
    for &u in &s.interactions {
        let r = ring(s, u);
        for order in [1u32, 2] {
            for steps in 1..=4usize {
                let opts = s.bfgs;
                keys.push((u, "UCCSD", Some((order, steps))));
                cells.push(Cell::new(format!("UCCSD order {order} steps {steps} {}", u_label(u)), move || {
                    uccsd_cell(r, order, steps, opts)
                }));
            }
        }
        keys.push((u, "FCI", None));
        cells.push(Cell::new(format!("FCI {}", u_label(u)), move || exact_cell(r)));
    }
    let out = cells::run(cells, s.threads, s.timeout)?;
    let mut table = Table::new(["U", "method", "order", "steps", "energy_per_site", "converged"]);
    for ((u, method, trotter), (_, o)) in keys.into_iter().zip(&out) {
        let (order, steps) = trotter.map_or((String::new(), String::new()), |(o, n)| (o.to_string(), n.to_string()));
        table.push(vec![
            u.to_string(),
            method.to_string(),
            order,
            steps,
            energy(o.value),
            o.converged.to_string(),
        ]);
    }
    Ok(Report::new(table, &out))
}

/// DMET on a long ring with 1-, 2- and 4-site fragments and the absolute
/// differences between successive fragment sizes.
pub fn thermo(s: &Settings) -> Result<Report> {
    ensure!(s.sites.is_multiple_of(4), "thermo needs a ring divisible by 4 sites (got {})", s.sites);
    if s.sites != THERMO_SITES {
        log::warn!("thermo normally runs on {THERMO_SITES} sites; using {}", s.sites);
    }
    let columns = [(1, Solver::Ed), (1, s.uccsd_solver()), (2, Solver::Ed), (4, Solver::Ed)];
    let mut cells = Vec::new();
    for &u in &s.interactions {
        for (nf, solver) in columns {
            let cfg = s.dmet(u, nf, solver);
            cells.push(Cell::new(format!("{} {}", dmet_name(nf, solver), u_label(u)), move || {
                dmet_cell(cfg)
            }));
        }
    }
    let out = cells::run(cells, s.threads, s.timeout)?;
    let mut table = Table::new([
        "U",
        "DMET(1)-ED",
        "DMET(1)-UCCSD",
        "DMET(2)-ED",
        "DMET(4)-ED",
        "|DMET(1)-UCCSD - DMET(1)-ED|",
        "|DMET(2)-ED - DMET(1)-ED|",
        "|DMET(4)-ED - DMET(2)-ED|",
    ]);
    for (k, &u) in s.interactions.iter().enumerate() {
        let v: Vec<Option<f64>> = out[4 * k..4 * k + 4].iter().map(|(_, o)| o.value).collect();
        let diff = |a: usize, b: usize| match (v[a], v[b]) {
            (Some(x), Some(y)) => sig((x - y).abs(), 8),
            _ => String::new(),
        };
        let mut row = vec![u.to_string()];
        row.extend(v.iter().map(|&x| energy(x)));
        row.extend([diff(1, 0), diff(2, 0), diff(3, 2)]);
        table.push(row);
    }
    Ok(Report::new(table, &out))
}

/// One method over the configured U list.
pub fn run(s: &Settings) -> Result<Report> {
    let name = match s.method {
        MethodKind::Exact => "Exact".to_string(),
        MethodKind::Uccsd => "UCCSD".to_string(),
        MethodKind::Dmet => dmet_name(s.fragment_size, solver(s)),
    };
    let cells = s
        .interactions
        .iter()
        .map(|&u| {
            let r = ring(s, u);
            let label = format!("{name} {}", u_label(u));
            match s.method {
                MethodKind::Exact => Cell::new(label, move || exact_cell(r)),
                MethodKind::Uccsd => {
                    let (order, steps, opts) = (s.trotter_order, s.trotter_steps, s.bfgs);
                    Cell::new(label, move || uccsd_cell(r, order, steps, opts))
                }
                MethodKind::Dmet => {
                    let cfg = s.dmet(u, s.fragment_size, solver(s));
                    Cell::new(label, move || dmet_cell(cfg))
                }
            }
        })
        .collect();
    let out = cells::run(cells, s.threads, s.timeout)?;
    let mut table = Table::new(["method", "sites", "U", "energy_per_site", "converged"]);
    for (&u, (_, o)) in s.interactions.iter().zip(&out) {
        table.push(vec![
            name.clone(),
            s.sites.to_string(),
            u.to_string(),
            energy(o.value),
            o.converged.to_string(),
        ]);
    }
    Ok(Report::new(table, &out))
}

fn solver(s: &Settings) -> Solver {
    match s.solver {
        SolverKind::Ed => Solver::Ed,
        SolverKind::Uccsd => s.uccsd_solver(),
    }
}
