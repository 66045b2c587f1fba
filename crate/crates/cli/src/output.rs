//! CSV emission. Floats print with 17 significant digits so files
//! round-trip losslessly and regression-diff cleanly.

use std::io::{self, Write};

use sps_core::amplitudes::AmplitudeResult;
use sps_core::master::MasterResult;
use sps_core::model::DrivePulse;
use sps_core::montecarlo::TrajectoryStats;
use sps_core::optimize::{OptimizationOutcome, SweepRow, SweepParam};

/// 17 significant digits; NaN renders as an empty cell.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

pub fn write_amplitude_csv(w: &mut dyn Write, r: &AmplitudeResult, pulse: &DrivePulse) -> io::Result<()> {
    writeln!(
        w,
        "t,omega,re_alpha_u,im_alpha_u,re_alpha_e,im_alpha_e,re_alpha_g,im_alpha_g,emission_flux"
    )?;
    for i in 0..r.ts.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt(r.ts[i]),
            fmt(pulse.omega(r.ts[i])),
            fmt(r.alpha_u[i].re),
            fmt(r.alpha_u[i].im),
            fmt(r.alpha_e[i].re),
            fmt(r.alpha_e[i].im),
            fmt(r.alpha_g[i].re),
            fmt(r.alpha_g[i].im),
            fmt(r.emission_profile[i]),
        )?;
    }
    Ok(())
}

pub fn write_master_csv(w: &mut dyn Write, r: &MasterResult, pulse: &DrivePulse) -> io::Result<()> {
    writeln!(
        w,
        "t,omega,rho_uu,rho_ee,rho_g1g1,p_g0,p_o0,f_ex,f_in,f_g,f_o,f_u,min_eig,emission_flux"
    )?;
    let s = &r.series;
    for i in 0..s.ts.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt(s.ts[i]),
            fmt(pulse.omega(s.ts[i])),
            fmt(s.pop_u[i]),
            fmt(s.pop_e[i]),
            fmt(s.pop_g1[i]),
            fmt(s.p_g0[i]),
            fmt(s.p_o0[i]),
            fmt(s.f_ex[i]),
            fmt(s.f_in[i]),
            fmt(s.f_g[i]),
            fmt(s.f_o[i]),
            fmt(s.f_u[i]),
            fmt(s.min_eig[i]),
            fmt(s.emission_flux[i]),
        )?;
    }
    Ok(())
}

pub fn write_trajectory_csv(w: &mut dyn Write, s: &TrajectoryStats) -> io::Result<()> {
    writeln!(w, "n_repumps,count")?;
    for (k, c) in s.repump_histogram.iter().enumerate() {
        writeln!(w, "{k},{c}")?;
    }
    Ok(())
}

pub fn write_sweep_csv(w: &mut dyn Write, axes: &[(SweepParam, Vec<f64>)], rows: &[SweepRow]) -> io::Result<()> {
    let mut header: Vec<String> = axes.iter().map(|(p, _)| p.name().to_string()).collect();
    header.extend(
        ["p_s", "stderr", "ps_upper", "pf_lower", "eta_esc", "c", "c_in", "adiabaticity", "p_rep", "status"]
            .map(String::from),
    );
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let mut cells: Vec<String> = row.values.iter().map(|&v| fmt(v)).collect();
        cells.push(fmt_opt(row.p_s));
        cells.push(fmt_opt(row.stderr));
        cells.push(fmt(row.ps_upper));
        cells.push(fmt(row.pf_lower));
        cells.push(fmt(row.eta_esc));
        cells.push(fmt(row.c));
        cells.push(fmt(row.c_in));
        cells.push(fmt_opt(row.adiabaticity));
        cells.push(fmt_opt(row.p_rep));
        cells.push(match &row.error {
            None => "ok".to_string(),
            Some(e) => format!("failed: {}", e.replace(',', ";")),
        });
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_trace_csv(w: &mut dyn Write, names: &[&str], o: &OptimizationOutcome) -> io::Result<()> {
    let mut header = vec!["eval".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    header.push("p_s".to_string());
    writeln!(w, "{}", header.join(","))?;
    for (i, (x, v)) in o.trace.iter().enumerate() {
        let mut cells = vec![i.to_string()];
        cells.extend(x.iter().map(|&xi| fmt(xi)));
        cells.push(fmt(*v));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.5, 2.0 / 3.0, 1e-300, 101f64.sqrt(), -1.23456789e17] {
            let s = fmt(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
        assert_eq!(fmt(f64::NAN), "");
    }
}
