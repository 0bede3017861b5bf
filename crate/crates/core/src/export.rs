//! Trajectory export from a cached run.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::flow::{
    flow_segment, flow_until_rest, write_trajectory_csv, IntegratorOptions, Trajectory, DEFAULT_HORIZON,
};
use crate::geometry::{riemannian_gradient, EmbeddedManifold, ScalarField};
use crate::pipeline::{perturb, Cache, CachedFlowLine, CachedJumpLine, Scenario};

/// File name of the cache written next to a run's report.
pub const CACHE_FILE: &str = "cache.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    All,
    FlowLines,
    JumpLines,
}

/// The complete flow line: traced back to its source when the stored start
/// lies next to the target, and forward to the target. The forward part ends
/// at its closest approach to the target, before round-off can carry it away
/// from a saddle.
pub fn flow_line_trajectory(
    m: &EmbeddedManifold,
    f: &ScalarField,
    line: &CachedFlowLine,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let start = DVector::from_column_slice(&line.start);
    let mut forward = flow_until_rest(m, f, &start, DEFAULT_HORIZON, false, opts)?;
    let target = DVector::from_column_slice(&line.target_location);
    let closest = forward
        .samples
        .iter()
        .map(|(_, p)| (p - &target).norm())
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(i, _)| i);
    forward.samples.truncate(closest + 1);
    if !line.backward {
        return Ok(forward);
    }
    let back = flow_until_rest(m, f, &start, DEFAULT_HORIZON, true, opts)?;
    let mut samples: Vec<(f64, DVector<f64>)> = back.samples.into_iter().rev().map(|(t, p)| (-t, p)).collect();
    samples.extend(forward.samples.into_iter().skip(1));
    Ok(Trajectory {
        samples,
        end: forward.end,
    })
}

/// The segments of a jump line, each in its own time frame starting at 0.
pub fn jump_line_trajectory(
    m: &EmbeddedManifold,
    f: &ScalarField,
    line: &CachedJumpLine,
    opts: &IntegratorOptions,
) -> Result<Vec<Trajectory>> {
    line.segments
        .iter()
        .map(|s| {
            let start = DVector::from_column_slice(&s.start);
            match s.duration {
                Some(t) => flow_segment(m, f, &start, t, opts),
                None => flow_until_rest(m, f, &start, DEFAULT_HORIZON, false, opts),
            }
        })
        .collect()
}

/// Rebuilds the scenario and function a cache was produced with.
pub fn cached_scenario(cache: &Cache) -> Result<Scenario> {
    let mut s = Scenario::new(&cache.config)?;
    if let Some(seed) = cache.perturbation_seed {
        s.function = perturb(
            &s.function,
            s.manifold.ambient_dim(),
            seed,
            cache.config.perturbation.amplitude,
        );
    }
    Ok(s)
}

pub fn read_cache(dir: &Path) -> Result<Cache> {
    let path = dir.join(CACHE_FILE);
    let text = fs::read_to_string(&path).map_err(|_| {
        Error::Cache(format!(
            "no cache at {}; run `eqmorse verify` (or `homology`) with the same --out-dir first",
            path.display()
        ))
    })?;
    Cache::from_toml(&text)
}

fn write_segments_csv<W: Write>(w: W, m: &EmbeddedManifold, f: &ScalarField, segs: &[Trajectory]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["segment".to_string(), "t".to_string()];
    header.extend((1..=m.ambient_dim()).map(|i| format!("x{i}")));
    header.push("f".into());
    header.push("grad_norm".into());
    out.write_record(&header)?;
    for (i, t) in segs.iter().enumerate() {
        for (time, p) in &t.samples {
            let mut row = vec![i.to_string(), format!("{time:.12e}")];
            row.extend(p.iter().map(|v| format!("{v:.15e}")));
            row.push(format!("{:.15e}", f.value(p)));
            row.push(format!("{:.6e}", riemannian_gradient(m, f, p).norm()));
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes one CSV per selected line plus `jumps.csv` (jump records) and
/// `certificates.csv`; returns the paths written.
pub fn export_trajectories(cache: &Cache, selection: Selection, dir: &Path) -> Result<Vec<PathBuf>> {
    let s = cached_scenario(cache)?;
    let (m, f) = (&s.manifold, &s.function);
    let opts = IntegratorOptions {
        record: true,
        ..s.config.settings().integrator()
    };
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if selection != Selection::JumpLines {
        for (i, l) in cache.flow_lines.iter().enumerate() {
            let t = flow_line_trajectory(m, f, l, &opts)?;
            let path = dir.join(format!("flow_{}_{}_{i}.csv", l.source, l.target));
            write_trajectory_csv(File::create(&path)?, m, f, &t)?;
            written.push(path);
        }
    }
    if selection != Selection::FlowLines && !cache.jump_lines.is_empty() {
        let mut jumps = csv::Writer::from_path(dir.join("jumps.csv"))?;
        let mut header = vec!["line".to_string(), "k".into(), "segment".into(), "s".into()];
        header.extend((1..=m.ambient_dim()).map(|i| format!("before_x{i}")));
        header.extend((1..=m.ambient_dim()).map(|i| format!("after_x{i}")));
        jumps.write_record(&header)?;
        let mut certs = csv::Writer::from_path(dir.join("certificates.csv"))?;
        certs.write_record(["line", "source", "target", "k", "residual", "sigma_min", "isolation"])?;
        for (i, l) in cache.jump_lines.iter().enumerate() {
            let name = format!("jump_k{}_{}_{}_{i}", l.k, l.source, l.target);
            let segs = jump_line_trajectory(m, f, l, &opts)?;
            let path = dir.join(format!("{name}.csv"));
            write_segments_csv(File::create(&path)?, m, f, &segs)?;
            written.push(path);
            for (j, seg) in l.segments.iter().enumerate() {
                if let (Some(sv), Some(before)) = (seg.jump, &seg.before_jump) {
                    let mut row = vec![name.clone(), l.k.to_string(), j.to_string(), format!("{sv:.15e}")];
                    row.extend(before.iter().map(|v| format!("{v:.15e}")));
                    row.extend(seg.start.iter().map(|v| format!("{v:.15e}")));
                    jumps.write_record(&row)?;
                }
            }
            certs.write_record([
                name,
                l.source.clone(),
                l.target.clone(),
                l.k.to_string(),
                format!("{:.3e}", l.residual),
                format!("{:.3e}", l.sigma_min),
                format!("{:.3e}", l.isolation),
            ])?;
        }
        jumps.flush()?;
        certs.flush()?;
        written.push(dir.join("jumps.csv"));
        written.push(dir.join("certificates.csv"));
    }
    Ok(written)
}
