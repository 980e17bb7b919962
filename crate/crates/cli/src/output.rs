//! Writing a run to disk: data files, `summary.txt`, `summary.csv` and a
//! gnuplot script over every CSV.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::ScenarioConfig;
use crate::scenario::RunOutput;

/// Environment variable holding the root under which runs are written.
pub const OUTPUT_ROOT_VAR: &str = "POWERSHAPE_OUTPUT_ROOT";
const DEFAULT_ROOT: &str = "powershape-out";

/// `output` from the config, else `$POWERSHAPE_OUTPUT_ROOT/<name>`.
pub fn output_dir(cfg: &ScenarioConfig) -> PathBuf {
    if let Some(dir) = &cfg.output {
        return PathBuf::from(dir);
    }
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| DEFAULT_ROOT.into());
    root.join(&cfg.name)
}

pub fn summary_text(out: &RunOutput) -> String {
    let mut s = String::new();
    for (k, v) in &out.summary {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn summary_csv(out: &RunOutput) -> String {
    let mut s = String::from("key,value\n");
    for (k, v) in &out.summary {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

/// One plot per CSV, every column against the first.
pub fn plot_script(out: &RunOutput) -> String {
    let mut s = String::from(
        "# gnuplot script; run with `gnuplot plot.gp` inside this directory\n\
         set datafile separator ','\n\
         set key autotitle columnhead outside\n\
         set terminal pngcairo size 1000,600\n",
    );
    for (name, contents) in out.files.iter().filter(|(n, _)| n.ends_with(".csv")) {
        let cols = contents.lines().next().map(|h| h.split(',').count()).unwrap_or(0);
        if cols < 2 {
            continue;
        }
        let stem = name.trim_end_matches(".csv");
        let _ = writeln!(s, "\nset output '{stem}.png'");
        let _ = writeln!(s, "set xlabel 't'");
        let _ = writeln!(s, "plot for [c=2:{cols}] '{name}' using 1:c with lines");
    }
    s
}

pub fn write_run(dir: &Path, out: &RunOutput) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in &out.files {
        std::fs::write(dir.join(name), contents)?;
    }
    std::fs::write(dir.join("summary.txt"), summary_text(out))?;
    std::fs::write(dir.join("summary.csv"), summary_csv(out))?;
    std::fs::write(dir.join("plot.gp"), plot_script(out))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_script_covers_every_csv() {
        let out = RunOutput {
            files: vec![
                ("trajectory.csv".into(), "t,a,b\n0,1,2\n".into()),
                ("snapshot_final.txt".into(), "# z i v\n".into()),
            ],
            summary: vec![("x".into(), "1".into())],
            checks: vec![],
        };
        let gp = plot_script(&out);
        assert!(gp.contains("plot for [c=2:3] 'trajectory.csv' using 1:c with lines"));
        assert!(!gp.contains("snapshot"));
        assert_eq!(summary_csv(&out), "key,value\nx,1\n");
    }
}
