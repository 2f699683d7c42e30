//! CSV serialization of results. Floats use 17 significant digits so values
//! survive a text round trip.

use std::io::{self, Write};

use crate::analytics::VarianceReport;
use crate::montecarlo::{ConvergenceRow, EstimateWithError, ExpansionRow, LossDistribution};

/// Shortest text that round-trips is not stable across formatters, so every
/// float is written with exactly 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_loss_csv<W: Write>(loss: &LossDistribution, mut out: W) -> io::Result<()> {
    writeln!(out, "defaults,probability,stderr")?;
    for (k, (p, se)) in loss.probabilities.iter().zip(&loss.stderr).enumerate() {
        writeln!(out, "{k},{},{}", fmt_f64(*p), fmt_f64(*se))?;
    }
    Ok(())
}

/// `log_rate` and `gap` are left empty when no replication hit the event.
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "N,p_hat,log_rate,asymptote,gap")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.n_agents,
            fmt_f64(row.estimate.estimate),
            fmt_opt(row.log_rate()),
            fmt_f64(row.asymptote),
            fmt_opt(row.relative_gap),
        )?;
    }
    Ok(())
}

pub fn write_expansion_csv<W: Write>(rows: &[ExpansionRow], mut out: W) -> io::Result<()> {
    writeln!(out, "delta,v2_quad,v2_hat,abs_error")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(row.delta),
            fmt_f64(row.v2_quadrature),
            fmt_f64(row.v2_expansion),
            fmt_f64(row.abs_error),
        )?;
    }
    Ok(())
}

/// One row per applicable method; `tol` is only meaningful for quadrature.
pub fn write_variance_csv<W: Write>(report: &VarianceReport, mut out: W) -> io::Result<()> {
    writeln!(out, "method,value,T,tol")?;
    let t = fmt_f64(report.horizon);
    writeln!(
        out,
        "quadrature,{},{t},{}",
        fmt_f64(report.quadrature.value),
        fmt_f64(report.quadrature_tol)
    )?;
    let others = [
        ("closed_form_k2", report.closed_form_k2),
        ("homogeneous", report.homogeneous),
        ("expansion", report.expansion),
    ];
    for (name, value) in others {
        if let Some(v) = value {
            writeln!(out, "{name},{},{t},", fmt_f64(v))?;
        }
    }
    Ok(())
}

/// Monte Carlo exceedance frequency against the analytic bound; the bound
/// cell is empty when the rates are not all equal.
pub fn write_flocking_csv<W: Write>(
    rows: &[(f64, EstimateWithError, Option<f64>)],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "delta,frequency,stderr,bound")?;
    for (delta, est, bound) in rows {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(*delta),
            fmt_f64(est.estimate),
            fmt_f64(est.stderr),
            fmt_opt(*bound)
        )?;
    }
    Ok(())
}
