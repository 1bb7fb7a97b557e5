//! File formats: CSV series, JSONL avalanche logs, fit JSON, surface and
//! scenario reports. Commas, `.` decimals, LF endings, UTF-8 throughout;
//! every file starts with a comment line carrying the config hash and the
//! master seed so outputs are traceable to their exact configuration.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use econet_core::measures::TimeSeries;
use econet_core::tail::ks_critical_5pct;
use econet_core::TailFit;
use serde_json::json;

use crate::config::config_hash;
use crate::experiments::{RunResult, ScenarioReport, SweepSurface};

/// `# config=<fnv1a hex> seed=<master>` — the provenance stamp.
pub fn header_line(cfg_text: &str, seed: u64) -> String {
    format!("# config={:016x} seed={}\n", config_hash(cfg_text), seed)
}

fn series_csv(header: &str, cols: &str, s: &TimeSeries) -> String {
    let mut out = String::with_capacity(s.len() * 24 + 64);
    out.push_str(header);
    out.push_str(cols);
    out.push('\n');
    for (t, v) in s.t.iter().zip(&s.v) {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

pub fn fit_json(fit: Option<&TailFit>, warning: Option<&str>) -> serde_json::Value {
    match fit {
        Some(f) => json!({
            "m_density": f.m_density,
            "m_ccdf": f.m_ccdf,
            "m_err": f.m_err,
            "s_min": f.s_min,
            "ks": f.ks,
            "n_tail": f.n_tail,
        }),
        None => json!({
            "error": warning.unwrap_or("no fit"),
        }),
    }
}

/// Empirical complementary CDF over the full sample: `P_c(s) = #{x > s}/n`
/// at every distinct size.
pub fn ccdf_csv(header: &str, sizes: &[u64]) -> String {
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut out = String::from(header);
    out.push_str("s,pc\n");
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == s {
            j += 1;
        }
        let pc = (sorted.len() - j) as f64 / n;
        let _ = writeln!(out, "{s},{pc}");
        i = j;
    }
    out
}

/// Writes the full artifact set for one run into `dir`:
/// `effective.cfg`, `u_t.csv`, `omega.csv`, `avalanches.jsonl`,
/// `fit.json`, `ccdf.csv`.
pub fn write_run(dir: &Path, cfg_text: &str, r: &RunResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let h = header_line(cfg_text, r.config.seed);
    fs::write(dir.join("effective.cfg"), cfg_text)?;
    fs::write(dir.join("u_t.csv"), series_csv(&h, "t,u_t", &r.u_series))?;
    fs::write(dir.join("omega.csv"), series_csv(&h, "t,omega", &r.omega_series))?;

    let mut jl = String::with_capacity(r.avalanches.len() * 48);
    for a in &r.avalanches {
        let _ = writeln!(
            jl,
            "{}",
            json!({"t": a.t, "size": a.size, "n_agents": a.n_agents, "generations": a.generations})
        );
    }
    fs::write(dir.join("avalanches.jsonl"), jl)?;

    let mut fj = fit_json(r.fit.as_ref(), r.fit_warning.as_deref());
    fj["omega_mean"] = json!(r.omega_mean);
    fs::write(dir.join("fit.json"), format!("{:#}\n", fj))?;

    let sizes: Vec<u64> = r.avalanches.iter().map(|a| a.size).collect();
    fs::write(dir.join("ccdf.csv"), ccdf_csv(&h, &sizes))?;
    Ok(())
}

/// `surface.csv`: one row per grid cell, `L,c_th,m_ccdf,m_err,omega_mean,n_tail`.
/// Cells without a fit carry `nan` exponents and `n_tail = 0`.
pub fn surface_csv(cfg_text: &str, seed: u64, surface: &SweepSurface) -> String {
    let mut out = header_line(cfg_text, seed);
    out.push_str("L,c_th,m_ccdf,m_err,omega_mean,n_tail\n");
    for c in &surface.cells {
        match &c.fit {
            Some(f) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.l, c.c_th, f.m_ccdf, f.m_err, c.omega_mean, f.n_tail
                );
            }
            None => {
                let _ = writeln!(out, "{},{},nan,nan,{},0", c.l, c.c_th, c.omega_mean);
            }
        }
    }
    out
}

pub fn write_surface(
    dir: &Path,
    cfg_text: &str,
    seed: u64,
    surface: &SweepSurface,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("effective.cfg"), cfg_text)?;
    fs::write(dir.join("surface.csv"), surface_csv(cfg_text, seed, surface))?;
    Ok(())
}

fn state_json(label: &str, r: &RunResult) -> serde_json::Value {
    let mut v = json!({
        "label": label,
        "l": r.config.l,
        "c_th": r.config.c_th,
        "omega_mean": r.omega_mean,
    });
    v["fit"] = fit_json(r.fit.as_ref(), r.fit_warning.as_deref());
    v
}

/// `scenario.json`: the three labelled fits side by side.
pub fn scenario_json(cfg_text: &str, seed: u64, rep: &ScenarioReport) -> String {
    let v = json!({
        "config_hash": format!("{:016x}", config_hash(cfg_text)),
        "seed": seed,
        "l_omega": rep.l_omega,
        "f_0": state_json("F_0", &rep.f_0),
        "f_l": state_json("F_L", &rep.f_l),
        "f_omega": state_json("F_Omega", &rep.f_omega),
    });
    format!("{v:#}\n")
}

pub fn write_scenario(
    dir: &Path,
    cfg_text: &str,
    seed: u64,
    rep: &ScenarioReport,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("effective.cfg"), cfg_text)?;
    fs::write(dir.join("scenario.json"), scenario_json(cfg_text, seed, rep))?;
    // per-state artifact sets for downstream analysis
    for (name, r) in [("f_0", &rep.f_0), ("f_l", &rep.f_l), ("f_omega", &rep.f_omega)] {
        write_run(&dir.join(name), cfg_text, r)?;
    }
    Ok(())
}

/// Reads avalanche sizes back from either a CSV (`s` or `s,pc`-style first
/// column; header and `#` comments skipped) or a JSONL avalanche log.
pub fn read_sizes(path: &Path) -> io::Result<Vec<u64>> {
    let text = fs::read_to_string(path)?;
    let mut sizes = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('{') {
            let v: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            let s = v["size"].as_u64().ok_or_else(|| {
                io::Error::new(io::ErrorKind::InvalidData, "JSONL line without a numeric `size`")
            })?;
            sizes.push(s);
            continue;
        }
        let first = line.split(',').next().unwrap_or("").trim();
        if first.parse::<u64>().map(|s| sizes.push(s)).is_err() {
            // header row or stray label; numeric rows must parse
            if !first.chars().next().map(char::is_alphabetic).unwrap_or(false) {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("cannot parse size from line `{line}`"),
                ));
            }
        }
    }
    Ok(sizes)
}

/// True when the fitted tail passes the 5% KS goodness bar.
pub fn fit_passes_ks(fit: &TailFit) -> bool {
    fit.ks <= ks_critical_5pct(fit.n_tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ccdf_is_monotone_and_normalized() {
        let h = String::new();
        let csv = ccdf_csv(&h, &[1, 1, 2, 5, 5, 5, 9]);
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows[0], "1,0.7142857142857143"); // 5 of 7 above 1
        let pcs: Vec<f64> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(pcs.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*pcs.last().unwrap(), 0.0);
    }

    #[test]
    fn sizes_round_trip_through_csv_and_jsonl() {
        let dir = std::env::temp_dir().join(format!("econet-out-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let csv_path = dir.join("sizes.csv");
        fs::write(&csv_path, "# stamp\ns\n3\n7\n7\n").unwrap();
        assert_eq!(read_sizes(&csv_path).unwrap(), vec![3, 7, 7]);
        let jl_path = dir.join("a.jsonl");
        fs::write(&jl_path, "{\"t\":5,\"size\":12,\"n_agents\":3,\"generations\":1}\n").unwrap();
        assert_eq!(read_sizes(&jl_path).unwrap(), vec![12]);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn header_is_stable() {
        let a = header_line("l = 5\n", 7);
        assert_eq!(a, header_line("l = 5\n", 7));
        assert!(a.starts_with("# config="));
        assert!(a.contains(" seed=7"));
    }
}
