//! End-to-end acceptance gate. Every criterion runs at its stated tolerance
//! and prints one PASS/FAIL line; the test fails if any criterion does.

mod common;

use std::time::{Duration, Instant};

use dmetvqe_core::circuit::{exponentiate_sum, gate_stats, parallelize, parse_program, trotterize};
use dmetvqe_core::dmet::{self, DmetConfig, DmetResult, Solver};
use dmetvqe_core::lattice::{self, Ring};
use dmetvqe_core::optimize::BfgsOptions;
use dmetvqe_core::pauli::PauliSum;
use dmetvqe_core::vqe::{ansatz_program, mp2_guess, UccsdAnsatz};
use dmetvqe_core::fermion::{hubbard_tensors, momentum_transform, Boundary};

const U_VALUES: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];

// Reference energies per site of the 4-site half-filled ring.
const EXACT_ROW: [f64; 5] = [-0.9809782, -0.68014156, -0.49157349, -0.37607898, -0.30214434];
const UCCSD_ROW: [f64; 5] = [-0.9808687, -0.67928156, -0.48543800, -0.33051713, -0.02603051];
const DMET1_ED_ROW: [f64; 5] = [-0.9951259, -0.71791138, -0.54055767, -0.42535625, -0.34751768];
const DMET2_ED_ROW: [f64; 5] = [-0.9808783, -0.68014156, -0.49157349, -0.37607898, -0.30214434];
const DMET2_UCCSD: [(f64, f64); 2] = [(2.0, -0.9809165), (8.0, -0.35446392)];

type Suite = fn() -> common::Check;

const UCCSD: Solver = Solver::Uccsd {
    trotter_order: 1,
    trotter_steps: 1,
};

struct Gate {
    results: Vec<(usize, bool)>,
    /// Smallest VQE − ED gap over every embedded problem solved so far.
    variational_gap: f64,
    embedded_problems: usize,
}

impl Gate {
    fn criterion<F>(&mut self, id: usize, title: &str, budget: Option<Duration>, body: F)
    where
        F: FnOnce(&mut Self, &mut Vec<String>) -> bool,
    {
        let mut notes = Vec::new();
        let start = Instant::now();
        let mut ok = body(self, &mut notes);
        let elapsed = start.elapsed();
        for n in &notes {
            println!("    {n}");
        }
        if let Some(b) = budget {
            if elapsed > b {
                println!("    runtime {elapsed:.2?} exceeds the {b:?} budget");
                ok = false;
            }
        }
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {title} ({elapsed:.2?})");
        self.results.push((id, ok));
    }

    fn dmet(&mut self, cfg: &DmetConfig) -> Result<DmetResult, String> {
        let r = dmet::run(cfg).map_err(|e| e.to_string())?;
        if let Some(g) = r.variational_gap {
            self.variational_gap = self.variational_gap.min(g);
            self.embedded_problems += 1;
        }
        Ok(r)
    }
}

fn cell(notes: &mut Vec<String>, label: &str, got: f64, want: f64, tol: f64) -> bool {
    let ok = (got - want).abs() <= tol;
    notes.push(format!(
        "{} {label}: {got:.8} vs {want:.8} (|diff| {:.2e}, tol {tol:.0e})",
        if ok { "ok  " } else { "MISS" },
        (got - want).abs()
    ));
    ok
}

fn exact(u: f64) -> f64 {
    lattice::exact_energy_per_site(&Ring::half_filled(4, u)).expect("4-site ED")
}

fn validated(cfg: DmetConfig) -> DmetConfig {
    DmetConfig {
        check_variational: true,
        ..cfg
    }
}

#[test]
fn acceptance() {
    let mut gate = Gate {
        results: Vec::new(),
        variational_gap: f64::INFINITY,
        embedded_problems: 0,
    };

    gate.criterion(1, "exact row of the 4-site ring", Some(Duration::from_secs(5)), |_, notes| {
        let mut ok = true;
        for (k, &u) in U_VALUES.iter().enumerate() {
            ok &= cell(notes, &format!("U={u}"), exact(u), EXACT_ROW[k], 1e-6);
        }
        ok
    });

    gate.criterion(2, "DMET(1)-ED row", Some(Duration::from_secs(30)), |g, notes| {
        let mut ok = true;
        for (k, &u) in U_VALUES.iter().enumerate() {
            match g.dmet(&DmetConfig::new(4, u, 1, Solver::Ed)) {
                Ok(r) => ok &= r.converged & cell(notes, &format!("U={u}"), r.energy_per_site, DMET1_ED_ROW[k], 1e-5),
                Err(e) => {
                    notes.push(format!("U={u}: {e}"));
                    ok = false;
                }
            }
        }
        ok
    });

    gate.criterion(3, "DMET(2)-ED row, equal to exact for U >= 4", None, |g, notes| {
        let mut ok = true;
        for (k, &u) in U_VALUES.iter().enumerate() {
            match g.dmet(&DmetConfig::new(4, u, 2, Solver::Ed)) {
                Ok(r) => {
                    ok &= r.converged & cell(notes, &format!("U={u}"), r.energy_per_site, DMET2_ED_ROW[k], 1e-5);
                    if u >= 4.0 {
                        ok &= cell(notes, &format!("U={u} vs exact"), r.energy_per_site, exact(u), 1e-6);
                    }
                }
                Err(e) => {
                    notes.push(format!("U={u}: {e}"));
                    ok = false;
                }
            }
        }
        ok
    });

    gate.criterion(4, "UCCSD row of the 4-site ring", None, |_, notes| {
        let mut ok = true;
        for (k, &u) in U_VALUES.iter().enumerate() {
            let ring = Ring::half_filled(4, u);
            let r = match lattice::uccsd(&ring, 1, 1, &BfgsOptions::default()) {
                Ok(r) => r,
                Err(e) => {
                    notes.push(format!("U={u}: {e}"));
                    ok = false;
                    continue;
                }
            };
            let e = r.energy / 4.0;
            if u <= 6.0 {
                let tol = if u == 2.0 { 1e-4 } else { 1e-3 };
                ok &= cell(notes, &format!("U={u}"), e, UCCSD_ROW[k], tol);
            } else {
                let fci = exact(u);
                let mf = lattice::reference_energy_per_site(&ring).expect("reference energy");
                let bounded = e >= fci - 1e-9 && e <= mf + 1e-9 && r.converged;
                notes.push(format!(
                    "{} U={u}: {e:.8} within [{fci:.8}, {mf:.8}], converged {} (reference value {:.8})",
                    if bounded { "ok  " } else { "MISS" },
                    r.converged,
                    UCCSD_ROW[k]
                ));
                ok &= bounded;
            }
        }
        ok
    });

    gate.criterion(5, "two-site DMET-UCCSD", None, |g, notes| {
        let mut ok = true;
        for (u, want) in DMET2_UCCSD {
            match g.dmet(&validated(DmetConfig::new(4, u, 2, UCCSD))) {
                Ok(r) => {
                    if !r.converged {
                        notes.push(format!("U={u}: not converged"));
                    }
                    ok &= r.converged & cell(notes, &format!("U={u}"), r.energy_per_site, want, 1e-3);
                    notes.push(format!("     U={u} exact {:.8}", exact(u)));
                }
                Err(e) => {
                    notes.push(format!("U={u}: {e}"));
                    ok = false;
                }
            }
        }
        ok
    });

    gate.criterion(6, "Trotter robustness at U=2", None, |_, notes| {
        let fci = exact(2.0);
        let ring = Ring::half_filled(4, 2.0);
        let mut energies = Vec::new();
        let mut ok = true;
        for order in [1, 2] {
            for steps in 1..=4 {
                match lattice::uccsd(&ring, order, steps, &BfgsOptions::default()) {
                    Ok(r) => {
                        let e = r.energy / 4.0;
                        notes.push(format!("order {order} steps {steps}: {e:.10}"));
                        ok &= e >= fci - 1e-12;
                        energies.push(e);
                    }
                    Err(err) => {
                        notes.push(format!("order {order} steps {steps}: {err}"));
                        ok = false;
                    }
                }
            }
        }
        let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
        notes.push(format!("spread {:.2e} (tol 1e-4), FCI {fci:.10}", hi - lo));
        ok && hi - lo < 1e-4
    });

    gate.criterion(7, "golden circuit listings", Some(Duration::from_secs(1)), |_, notes| {
        let a: PauliSum = "2.0*X0*X1".parse().expect("valid sum");
        let b: PauliSum = "-0.5*X0*Z2".parse().expect("valid sum");
        let mut ok = true;
        let mut compare = |name: &str, got: String, want: &str| {
            let same = got.trim_end() == want.trim_end();
            notes.push(format!("{} {name}", if same { "ok  " } else { "MISS" }));
            if !same {
                notes.push(format!("got:\n{got}"));
            }
            ok &= same;
        };
        let exp = exponentiate_sum(&a).map(|p| p.to_string()).unwrap_or_else(|e| e.to_string());
        compare("exponentiate", exp, include_str!("golden/exponentiate_a.txt"));
        let trot = trotterize(&a, &b, 1, 1).map(|p| p.to_string()).unwrap_or_else(|e| e.to_string());
        compare("trotterize", trot, include_str!("golden/trotterize_ab.txt"));
        let sample = parse_program(include_str!("golden/sample_program.txt")).expect("sample parses");
        let sliced = parallelize(&sample);
        compare("parallelize", sliced.to_string(), include_str!("golden/sample_sliced.txt"));
        let stats = gate_stats(&sliced);
        let stats_ok = stats.slices == 10
            && (stats.one_qubit_per_slice - 0.9).abs() < 1e-12
            && (stats.two_qubit_per_slice - 0.7).abs() < 1e-12;
        notes.push(format!("{} stats {stats}", if stats_ok { "ok  " } else { "MISS" }));
        ok && stats_ok
    });

    // Reported only: the slice count depends on term ordering and register layout.
    {
        let ts = hubbard_tensors(4, 1.0, 2.0, Boundary::AntiPeriodic).expect("lattice");
        let (mo, _) = momentum_transform(&ts).expect("momentum basis");
        let ansatz = UccsdAnsatz::new(4, 4, 1, 1).expect("ansatz");
        let eps: Vec<f64> = (0..4).map(|k| mo.h1[(k, k)]).collect();
        let prog = ansatz_program(&mp2_guess(&mo, &eps, &ansatz), &ansatz).expect("ansatz circuit");
        let stats = gate_stats(&parallelize(&prog));
        println!(
            "INFO 4-site UCCSD circuit: {} instructions, {stats} (comparison: 1422 slices, 0.8692 and 0.8101 per slice)",
            prog.len()
        );
    }

    gate.criterion(8, "100-site study", Some(Duration::from_secs(15 * 60)), |g, notes| {
        let mut ok = true;
        let mut dmet1_ed_u4 = None;
        for &u in &U_VALUES {
            let ed = g.dmet(&DmetConfig::new(100, u, 1, Solver::Ed));
            let vqe = g.dmet(&validated(DmetConfig::new(100, u, 1, UCCSD)));
            match (ed, vqe) {
                (Ok(ed), Ok(vqe)) => {
                    ok &= ed.converged & vqe.converged;
                    ok &= cell(notes, &format!("DMET(1) U={u} UCCSD vs ED"), vqe.energy_per_site, ed.energy_per_site, 1e-5);
                    if u == 4.0 {
                        dmet1_ed_u4 = Some(ed.energy_per_site);
                    }
                }
                (a, b) => {
                    notes.push(format!("U={u}: {:?} / {:?}", a.err(), b.err()));
                    ok = false;
                }
            }
        }
        let d2 = g.dmet(&DmetConfig::new(100, 4.0, 2, Solver::Ed));
        let d4 = g.dmet(&DmetConfig::new(100, 4.0, 4, Solver::Ed));
        match (dmet1_ed_u4, d2, d4) {
            (Some(d1), Ok(d2), Ok(d4)) => {
                let (e2, e4) = (d2.energy_per_site, d4.energy_per_site);
                let (far, near) = ((e2 - d1).abs(), (e4 - e2).abs());
                let shrinking = near < far;
                notes.push(format!(
                    "{} U=4: DMET(1) {d1:.8}, DMET(2) {e2:.8}, DMET(4) {e4:.8}; |D4-D2| {near:.2e} vs |D2-D1| {far:.2e}",
                    if shrinking { "ok  " } else { "MISS" }
                ));
                ok &= shrinking && d2.converged && d4.converged;
            }
            _ => {
                notes.push("fragment-size series at U=4 failed".into());
                ok = false;
            }
        }
        ok
    });

    let gap = gate.variational_gap;
    let checked = gate.embedded_problems;
    gate.criterion(9, "property suites", Some(Duration::from_secs(120)), |_, notes| {
        let suites: [(&str, Suite); 5] = [
            ("JW anticommutation", common::anticommutation_suite),
            ("parallelizer on 200 programs", common::parallelizer_suite),
            ("RDM identities on ED and VQE", common::rdm_suite),
            ("variational bound", common::variational_suite),
            ("ED vs qubit space, L <= 3", common::qubit_space_suite),
        ];
        let mut ok = true;
        for (name, suite) in suites {
            match suite() {
                Ok(()) => notes.push(format!("ok   {name}")),
                Err(e) => {
                    notes.push(format!("MISS {name}: {e}"));
                    ok = false;
                }
            }
        }
        let bounded = checked > 0 && gap >= -1e-9;
        notes.push(format!(
            "{} VQE - ED over the DMET-UCCSD runs above: min {gap:.2e} across {checked} runs",
            if bounded { "ok  " } else { "MISS" }
        ));
        ok && bounded
    });

    let failed: Vec<usize> = gate.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!(
        "SUMMARY {} of {} criteria passed",
        gate.results.len() - failed.len(),
        gate.results.len()
    );
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
