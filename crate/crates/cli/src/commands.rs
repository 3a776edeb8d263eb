use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use qpurify::error_analysis::refinement_check;
use qpurify::format::{self, sci, Manifest};
use qpurify::sim::{compare_strategies, paired_difference, run_ensemble};
use qpurify::solver::{backward_solve, feedback_onset};
use qpurify::{ControlTable, SolveConfig, Strategy};

use crate::args::{
    parse_etas, CompareArgs, ErrorArgs, SimulateArgs, SolveArgs, StrategyArg, ValidateArgs,
};
use crate::Failure;

type CmdResult = Result<(), Failure>;

fn sink(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Accepts either the table file itself or the prefix given to `solve`.
fn resolve_table(path: &Path) -> PathBuf {
    if path.exists() {
        path.to_path_buf()
    } else {
        with_ext(path, "table")
    }
}

pub fn solve(a: &SolveArgs) -> CmdResult {
    let cfg = a.problem.config()?;
    let sol = backward_solve(&cfg)?;
    let table_path = with_ext(&a.out, "table");
    let cost_path = with_ext(&a.out, "cost");
    format::save_table(&table_path, &sol.table)?;
    format::save_costs(&cost_path, &sol.costs)?;
    println!("C_g(r0={}) = {:.6}", a.r0, sol.global_cost(a.r0));
    match feedback_onset(&sol.table) {
        Some(t) => println!("feedback onset t = {t:.4}"),
        None => println!("feedback never applied"),
    }
    println!("wrote {} and {}", table_path.display(), cost_path.display());
    Ok(())
}

fn strategy_for(a: &SimulateArgs) -> Result<(Strategy, SolveConfig, Option<PathBuf>), Failure> {
    if a.strategy == StrategyArg::Global {
        let path = a
            .table
            .as_deref()
            .map(resolve_table)
            .ok_or_else(|| qpurify::Error::Config("--strategy global needs --table".into()))?;
        let table: ControlTable = format::load_table(&path)?;
        let cfg = a.problem.config_from_table(table.meta())?;
        return Ok((Strategy::lookup(table), cfg, Some(path)));
    }
    let cfg = a.problem.config()?;
    let eta = cfg.eta();
    let s = match a.strategy {
        StrategyArg::U0 => Strategy::ConstantU0,
        StrategyArg::U1 => Strategy::ConstantU1,
        StrategyArg::Local => Strategy::LocalBloch { eta },
        StrategyArg::LocalPurity => Strategy::LocalPurity { eta },
        StrategyArg::Global => unreachable!(),
    };
    Ok((s, cfg, None))
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let (strategy, cfg, table) = strategy_for(a)?;
    let ens = run_ensemble(&strategy, a.r0, &cfg, a.n)?;
    let mut m = Manifest::new("simulate");
    m.with_config(&cfg)
        .push("strategy", strategy.name())
        .push("n", a.n)
        .push("r0", a.r0);
    if let Some(p) = &table {
        m.push("table", p.display());
    }
    let summary = format!(
        "C_MC={} dC_MC={} rel={}",
        sci(ens.c_mc),
        sci(ens.se_c),
        sci(ens.relative_se())
    );
    let mut w = sink(a.out.as_deref())?;
    m.write(&mut w)?;
    writeln!(w, "t,mean_r,se")?;
    for j in 0..=cfg.steps() {
        writeln!(w, "{},{},{}", sci(cfg.time(j)), sci(ens.mean_r[j]), sci(ens.se_r[j]))?;
    }
    writeln!(w, "# {summary}")?;
    w.flush()?;
    if a.out.is_some() {
        println!("{summary}");
    }
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> CmdResult {
    let etas = parse_etas(&a.etas)?;
    let mut w = sink(a.out.as_deref())?;
    let mut m = Manifest::new("validate");
    m.push("etas", &a.etas).push("n", a.n).push("r0", a.r0);
    m.write(&mut w)?;
    writeln!(w, "eta,C_g,C_MC,dC_MC,Delta,pass")?;
    let mut failed = Vec::new();
    for eta in etas {
        let cfg = a.problem(eta).config()?;
        let sol = backward_solve(&cfg)?;
        let ens = run_ensemble(&Strategy::lookup(sol.table.clone()), a.r0, &cfg, a.n)?;
        let c_g = sol.global_cost(a.r0);
        let rel = ens.relative_se();
        let delta = if ens.c_mc == 0.0 { 0.0 } else { (c_g - ens.c_mc).abs() / ens.c_mc };
        let pass = delta < 3.0 * rel || (delta == 0.0 && rel == 0.0);
        if !pass {
            failed.push(eta);
        }
        writeln!(w, "{eta},{},{},{},{},{pass}", sci(c_g), sci(ens.c_mc), sci(rel), sci(delta))?;
        w.flush()?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("Delta >= 3 dC_MC at eta = {failed:?}")))
    }
}

pub fn error_analysis(a: &ErrorArgs) -> CmdResult {
    let cfg = a.problem.config()?;
    let (errs, report) = refinement_check(&cfg)?;
    let mut w = sink(a.out.as_deref())?;
    let mut m = Manifest::new("error-analysis");
    m.with_config(&cfg)
        .push("u0_quadrature", "sigma * |dC/dr|")
        .push("u1_quadrature", "(dr / 2) * sum_l m_l |dC/dr|_l");
    m.write(&mut w)?;
    writeln!(w, "t,r_boundary,delta_r,delta_r_over_dr")?;
    if errs.boundary_err.is_empty() {
        writeln!(w, "# no feedback boundary above r = 0 at any step")?;
    }
    for b in &errs.boundary_err {
        let (d, rel) = match b.delta_r {
            Some(d) => (sci(d), sci(d / cfg.dr())),
            None => ("inf".to_string(), "inf".to_string()),
        };
        writeln!(w, "{},{},{d},{rel}", sci(b.t), sci(b.r))?;
    }
    let line = format!(
        "refinement: {} ({} steps compared at dr = {}, {} mismatches)",
        if report.stable() { "stable" } else { "unstable" },
        report.compared,
        report.coarse_dr,
        report.mismatches.len()
    );
    writeln!(w, "# {line}")?;
    if let Some(f) = errs.fraction_below_step() {
        writeln!(w, "# fraction with delta_r < dr: {f}")?;
    }
    w.flush()?;
    if a.out.is_some() {
        println!("{line}");
    }
    if report.stable() {
        Ok(())
    } else {
        Err(Failure::Validation("boundary moved under grid refinement".into()))
    }
}

pub fn compare(a: &CompareArgs) -> CmdResult {
    let cfg = a.problem.config()?;
    let sol = backward_solve(&cfg)?;
    let rows = compare_strategies(&cfg, &sol.table, a.r0, a.n)?;
    let global = &rows.last().expect("global row present").ensemble;
    let mut w = sink(a.out.as_deref())?;
    let mut m = Manifest::new("compare");
    m.with_config(&cfg).push("n", a.n).push("r0", a.r0);
    m.write(&mut w)?;
    writeln!(w, "strategy,mean_r_T,se,global_minus_strategy,se_paired")?;
    for row in &rows {
        let (d, se) = paired_difference(global, &row.ensemble)?;
        writeln!(
            w,
            "{},{},{},{},{}",
            row.strategy.name(),
            sci(row.mean_final()),
            sci(row.se_final()),
            sci(d),
            sci(se)
        )?;
    }
    w.flush()?;
    Ok(())
}
