//! Concurrent execution of independent configs with a single collector.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use crate::config::ExperimentConfig;
use crate::execute::{assertions, run_command, Artifact, AssertCheck, Command, Outcome};
use crate::output::{fmt_f64, fmt_opt, quote, Table};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub index: usize,
    pub name: Option<String>,
    pub result: Result<Outcome, CliError>,
    pub checks: Vec<AssertCheck>,
}

fn one(index: usize, cfg: &ExperimentConfig) -> SweepRow {
    let cmd = if cfg.simulation.is_some() {
        Command::Simulate
    } else {
        Command::Speeds
    };
    let result = run_command(cfg, cmd);
    let checks = match &result {
        Ok(o) => assertions(cfg, &o.facts),
        Err(_) => Vec::new(),
    };
    SweepRow {
        index,
        name: cfg.name.clone(),
        result,
        checks,
    }
}

/// Runs every config on up to `jobs` worker threads. Rows come back in
/// config order whatever the completion order.
pub fn run_sweep(configs: &[ExperimentConfig], jobs: usize) -> Vec<SweepRow> {
    let jobs = jobs.clamp(1, configs.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut slots: Vec<Option<SweepRow>> = vec![None; configs.len()];
    thread::scope(|s| {
        for _ in 0..jobs {
            let tx = tx.clone();
            let next = &next;
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                if tx.send(one(i, cfg)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for row in rx {
            let i = row.index;
            slots[i] = Some(row);
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every config produces a row"))
        .collect()
}

/// `sweep.csv` (one row per config) and `sweep_fronts.csv` (one row per fitted front).
pub fn sweep_tables(rows: &[SweepRow]) -> Vec<Artifact> {
    let mut main = Table::new(&[
        "index", "name", "status", "c_u_star", "c_v_star", "c_u_2star", "c_v_2star", "c_mu_star",
        "pulling_holds", "pulling_lhs", "pulling_rhs", "checks_passed", "checks_total", "message",
    ]);
    let mut fronts = Table::new(&[
        "index", "component", "direction", "threshold", "fitted_speed", "stderr", "r_squared",
        "samples", "message",
    ]);
    for r in rows {
        let name = quote(r.name.as_deref().unwrap_or(""));
        let passed = r.checks.iter().filter(|c| c.pass).count().to_string();
        let total = r.checks.len().to_string();
        match &r.result {
            Ok(o) => {
                let s = o.facts.speeds;
                let p = o.facts.pulling;
                main.row(&[
                    r.index.to_string(),
                    name,
                    "ok".into(),
                    fmt_opt(s.map(|s| s.c_u_star)),
                    fmt_opt(s.map(|s| s.c_v_star)),
                    fmt_opt(s.map(|s| s.c_u_2star)),
                    fmt_opt(s.map(|s| s.c_v_2star)),
                    fmt_opt(s.and_then(|s| s.c_mu_star)),
                    p.map(|p| p.holds.to_string()).unwrap_or_default(),
                    fmt_opt(p.and_then(|p| p.lhs)),
                    fmt_opt(p.map(|p| p.rhs)),
                    passed,
                    total,
                    String::new(),
                ]);
                for f in &o.facts.fits {
                    let rep = f.report;
                    fronts.row(&[
                        r.index.to_string(),
                        f.component.name().into(),
                        f.direction.name().into(),
                        fmt_f64(f.threshold),
                        fmt_opt(rep.map(|x| x.fitted_speed)),
                        fmt_opt(rep.map(|x| x.stderr)),
                        fmt_opt(rep.map(|x| x.r_squared)),
                        rep.map(|x| x.samples.to_string()).unwrap_or_default(),
                        quote(f.error.as_deref().unwrap_or("")),
                    ]);
                }
            }
            Err(e) => {
                let mut cells = vec![r.index.to_string(), name, "error".into()];
                cells.extend(std::iter::repeat_n(String::new(), 8));
                cells.extend([passed, total, quote(&e.to_string())]);
                main.row(&cells);
            }
        }
    }
    vec![
        Artifact {
            name: "sweep.csv".into(),
            contents: main.finish(),
        },
        Artifact {
            name: "sweep_fronts.csv".into(),
            contents: fronts.finish(),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use spreadlab::ModelParams;

    fn cfg(d1: f64, name: &str) -> ExperimentConfig {
        ExperimentConfig {
            name: Some(name.into()),
            params: ModelParams {
                d1,
                mu: 0.1,
                ..ModelParams::default()
            },
            simulation: None,
            eigen: None,
            pulling: None,
            lyapunov: None,
            output: Default::default(),
            expect: None,
        }
    }

    #[test]
    fn rows_are_ordered_and_independent_of_jobs() {
        let cfgs: Vec<_> = (0..12).map(|i| cfg(0.5 + 0.1 * i as f64, &format!("c{i}"))).collect();
        let serial = sweep_tables(&run_sweep(&cfgs, 1));
        let parallel = sweep_tables(&run_sweep(&cfgs, 5));
        assert_eq!(serial, parallel);
        let text = &serial[0].contents;
        assert_eq!(text.lines().count(), 13);
        assert!(text.lines().nth(1).unwrap().starts_with("0,c0,ok,"));
    }

    #[test]
    fn failures_get_a_row() {
        let mut bad = cfg(1.0, "bad,name");
        bad.params.a = 0.5;
        let rows = run_sweep(&[cfg(1.0, "good"), bad], 2);
        let t = sweep_tables(&rows);
        let line = t[0].contents.lines().nth(2).unwrap().to_string();
        assert!(line.starts_with("1,\"bad,name\",error,"), "{line}");
        assert!(rows[1].result.is_err());
    }
}
