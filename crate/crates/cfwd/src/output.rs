//! Artifact persistence. Every file is written atomically (temp file in the
//! target directory, then rename), carries a `format_version` marker, and is
//! byte-identical across reruns of the same configuration — except the
//! manifest, whose wall-time field is inherently run-dependent.

use crate::config::FORMAT_VERSION;
use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::stats::StatReport;
use crate::xi::WeightedSample;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Write `bytes` to `path` via a temp file in the same directory + rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// trajectory.csv: one row per snapshot — time, particle positions, cluster
/// count, center of mass.
pub fn write_trajectory_csv(dir: &Path, traj: &Trajectory) -> Result<PathBuf> {
    let n = traj.masses.len();
    let mut out = format!("# format_version={FORMAT_VERSION}\n");
    out.push('t');
    for i in 1..=n {
        write!(out, ",x{i}").unwrap();
    }
    out.push_str(",atom_count,com\n");
    for s in &traj.snapshots {
        write!(out, "{}", s.time).unwrap();
        for x in &s.positions {
            write!(out, ",{x}").unwrap();
        }
        writeln!(out, ",{},{}", s.atom_count, s.center_of_mass).unwrap();
    }
    let path = dir.join("trajectory.csv");
    atomic_write(&path, out.as_bytes())?;
    Ok(path)
}

/// partitions.csv (long format): one row per interior block boundary per
/// snapshot, in cumulative-mass coordinates.
pub fn write_partitions_csv(dir: &Path, traj: &Trajectory) -> Result<PathBuf> {
    let mut out = format!("# format_version={FORMAT_VERSION}\nt,boundary\n");
    for s in &traj.snapshots {
        for b in &s.boundaries {
            writeln!(out, "{},{b}", s.time).unwrap();
        }
    }
    let path = dir.join("partitions.csv");
    atomic_write(&path, out.as_bytes())?;
    Ok(path)
}

/// measures.jsonl: the empirical measure per snapshot, one JSON object per
/// line with `atoms` as (position, mass) pairs.
pub fn write_measures_jsonl(dir: &Path, traj: &Trajectory) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Line {
        format_version: u32,
        t: f64,
        atoms: Vec<(f64, f64)>,
    }
    let mut out = String::new();
    for s in &traj.snapshots {
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for (x, m) in s.positions.iter().zip(traj.masses.as_slice()) {
            match atoms.last_mut() {
                // block members are snapped to the identical average
                Some(last) if last.0 == *x => last.1 += m,
                _ => atoms.push((*x, *m)),
            }
        }
        let line = Line { format_version: FORMAT_VERSION, t: s.time, atoms };
        out.push_str(&serde_json::to_string(&line).expect("serializable"));
        out.push('\n');
    }
    let path = dir.join("measures.jsonl");
    atomic_write(&path, out.as_bytes())?;
    Ok(path)
}

/// samples.jsonl: one invariant-measure sample per line with breakpoints,
/// values and importance weight.
pub fn write_samples_jsonl(dir: &Path, samples: &[WeightedSample]) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Line<'a> {
        format_version: u32,
        stratum: u32,
        q: &'a [f64],
        x: &'a [f64],
        weight: f64,
    }
    let mut out = String::new();
    for s in samples {
        let line = Line {
            format_version: FORMAT_VERSION,
            stratum: s.stratum,
            q: s.g.breaks(),
            x: s.g.values(),
            weight: s.weight,
        };
        out.push_str(&serde_json::to_string(&line).expect("serializable"));
        out.push('\n');
    }
    let path = dir.join("samples.jsonl");
    atomic_write(&path, out.as_bytes())?;
    Ok(path)
}

/// report.json: the verification suite outcome.
pub fn write_report_json(dir: &Path, suite: &str, reports: &[StatReport]) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Doc<'a> {
        format_version: u32,
        suite: &'a str,
        all_pass: bool,
        reports: &'a [StatReport],
    }
    let doc = Doc {
        format_version: FORMAT_VERSION,
        suite,
        all_pass: reports.iter().all(|r| r.pass),
        reports,
    };
    let path = dir.join("report.json");
    atomic_write(&path, serde_json::to_string_pretty(&doc).expect("serializable").as_bytes())?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub format_version: u32,
    pub mode: String,
    pub seed: u64,
    pub config_sha256: String,
    pub package_version: String,
    pub wall_time_s: f64,
}

impl Manifest {
    pub fn new(mode: &str, seed: u64, config_text: &str, wall_time_s: f64) -> Self {
        let mut h = Sha256::new();
        h.update(config_text.as_bytes());
        Manifest {
            format_version: FORMAT_VERSION,
            mode: mode.to_string(),
            seed,
            config_sha256: format!("{:x}", h.finalize()),
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s,
        }
    }
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    atomic_write(
        &path,
        serde_json::to_string_pretty(manifest).expect("serializable").as_bytes(),
    )?;
    Ok(path)
}

const PLOT_POSITIONS: &str = r##"#!/usr/bin/env python3
"""Atom positions over time, grayscale-coded by atom mass, with the center
of mass overlaid. Reads trajectory.csv from the script's directory."""
import csv, os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = []
with open(os.path.join(here, "trajectory.csv")) as f:
    for row in csv.DictReader(r for r in f if not r.startswith("#")):
        rows.append(row)
xcols = [c for c in rows[0] if c.startswith("x")]
n = len(xcols)
t = [float(r["t"]) for r in rows]
fig, ax = plt.subplots(figsize=(8, 5))
for r in rows:
    xs = [float(r[c]) for c in xcols]
    # particles sharing a position form one atom; shade by its mass
    k = 0
    while k < n:
        j = k
        while j + 1 < n and xs[j + 1] == xs[k]:
            j += 1
        mass = (j - k + 1) / n
        ax.plot(float(r["t"]), xs[k], ".", ms=2, color=str(max(0.0, 0.85 - mass)))
        k = j + 1
ax.plot(t, [float(r["com"]) for r in rows], "r-", lw=1, label="center of mass")
ax.set_xlabel("t"); ax.set_ylabel("position"); ax.legend()
fig.savefig(os.path.join(here, "positions.png"), dpi=150)
print("wrote positions.png")
"##;

const PLOT_ATOM_COUNT: &str = r##"#!/usr/bin/env python3
"""Atom-count trajectory with a moving average. Reads trajectory.csv."""
import csv, os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
t, counts = [], []
with open(os.path.join(here, "trajectory.csv")) as f:
    for row in csv.DictReader(r for r in f if not r.startswith("#")):
        t.append(float(row["t"]))
        counts.append(int(row["atom_count"]))
w = max(1, len(counts) // 50)
avg = [sum(counts[max(0, i - w):i + 1]) / len(counts[max(0, i - w):i + 1])
       for i in range(len(counts))]
fig, ax = plt.subplots(figsize=(8, 4))
ax.step(t, counts, where="post", lw=0.8, label="atom count")
ax.plot(t, avg, "r-", lw=1.5, label=f"moving average (w={w})")
ax.set_xlabel("t"); ax.set_ylabel("atoms"); ax.legend()
fig.savefig(os.path.join(here, "atom_count.png"), dpi=150)
print("wrote atom_count.png")
"##;

const PLOT_PARTITIONS: &str = r##"#!/usr/bin/env python3
"""History of the induced partition of [0,1] in mass coordinates. Reads
partitions.csv (long format: one row per interior boundary per time)."""
import csv, os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
t, b = [], []
with open(os.path.join(here, "partitions.csv")) as f:
    for row in csv.DictReader(r for r in f if not r.startswith("#")):
        t.append(float(row["t"]))
        b.append(float(row["boundary"]))
fig, ax = plt.subplots(figsize=(8, 4))
ax.plot(t, b, "k.", ms=1)
ax.set_xlabel("t"); ax.set_ylabel("mass coordinate"); ax.set_ylim(0, 1)
fig.savefig(os.path.join(here, "partitions.png"), dpi=150)
print("wrote partitions.png")
"##;

/// Emit the three figure scripts next to the CSV artifacts.
pub fn write_plot_scripts(dir: &Path) -> Result<Vec<PathBuf>> {
    let scripts = [
        ("plot_positions.py", PLOT_POSITIONS),
        ("plot_atom_count.py", PLOT_ATOM_COUNT),
        ("plot_partitions.py", PLOT_PARTITIONS),
    ];
    let mut paths = Vec::new();
    for (name, body) in scripts {
        let path = dir.join(name);
        atomic_write(&path, body.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}
