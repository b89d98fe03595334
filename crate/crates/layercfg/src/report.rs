//! Turns a finished run directory into figure-ready CSV files plus simple
//! SVG line plots. All inputs are parsed before anything is written, so a
//! bad or missing log never leaves a partial report behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Number of episode trajectories sampled for the per-episode figures.
pub const EPISODE_SERIES: usize = 15;

struct PendingFile {
    name: String,
    contents: String,
}

/// One named line: `(label, points)`.
type Series = (String, Vec<(f64, f64)>);

/// Reads the logs under `run_dir` (as written by the harness) and writes
/// figure CSVs and SVGs into `out_dir`. Returns the paths written.
pub fn emit_report(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let meta_path = run_dir.join("meta.txt");
    let meta = fs::read_to_string(&meta_path)
        .map_err(|_| Error::MissingLogs(format!("{} not found", meta_path.display())))?;
    let kind = meta
        .lines()
        .find_map(|l| l.strip_prefix("kind="))
        .ok_or_else(|| Error::MissingLogs("meta.txt has no kind= line".into()))?
        .trim()
        .to_string();

    let mut pending: Vec<PendingFile> = Vec::new();
    match kind.as_str() {
        "train" => {
            let episodes = read_episode_rows(&run_dir.join("episodes.csv"))?;
            let picked = pick_episodes(&episodes, EPISODE_SERIES);
            push_series_files(
                &mut pending,
                "fig5_episode_loss",
                "training loss by step",
                series_by_episode(&episodes, &picked, |r| r.loss),
            );
            push_series_files(
                &mut pending,
                "fig6_episode_layer",
                "layer count by step",
                series_by_episode(&episodes, &picked, |r| r.layer as f64),
            );
            let updates = read_update_rows(&run_dir.join("updates.csv"))?;
            push_series_files(
                &mut pending,
                "fig11_actor_loss",
                "actor loss by update",
                vec![(
                    "actor".to_string(),
                    updates
                        .iter()
                        .map(|u| (u.index as f64, u.actor_loss))
                        .collect(),
                )],
            );
            push_series_files(
                &mut pending,
                "fig12_critic_loss",
                "critic loss by update",
                vec![(
                    "critic".to_string(),
                    updates
                        .iter()
                        .map(|u| (u.index as f64, u.critic_loss))
                        .collect(),
                )],
            );
        }
        "validate" => {
            let episodes = read_episode_rows(&run_dir.join("episodes.csv"))?;
            let picked = pick_episodes(&episodes, usize::MAX);
            push_series_files(
                &mut pending,
                "fig9_validation_loss",
                "validation loss by step",
                series_by_episode(&episodes, &picked, |r| r.loss),
            );
            push_series_files(
                &mut pending,
                "fig10_validation_layer",
                "validation layer by step",
                series_by_episode(&episodes, &picked, |r| r.layer as f64),
            );
        }
        "surrogate" => {
            let sweep = find_sweep(run_dir)?;
            push_series_files(
                &mut pending,
                "fig7_sweep_loss",
                "loss by step for each init",
                sweep_series(&sweep, |r| r.loss),
            );
            push_series_files(
                &mut pending,
                "fig8_sweep_layer",
                "layer by step for each init",
                sweep_series(&sweep, |r| r.layer as f64),
            );
        }
        other => {
            return Err(Error::MissingLogs(format!(
                "unsupported run kind {other:?}"
            )))
        }
    }

    fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(pending.len());
    for f in pending {
        let path = out_dir.join(&f.name);
        fs::write(&path, f.contents)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone)]
struct EpisodeRow {
    episode: usize,
    t: usize,
    layer: u32,
    loss: f64,
}

fn read_episode_rows(path: &Path) -> Result<Vec<EpisodeRow>> {
    if !path.exists() {
        return Err(Error::MissingLogs(format!("{} not found", path.display())));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        rows.push(EpisodeRow {
            episode: parse_field(&r, 0)? as usize,
            t: parse_field(&r, 1)? as usize,
            layer: parse_field(&r, 2)? as u32,
            loss: parse_field(&r, 3)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::MissingLogs(format!("{} is empty", path.display())));
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
struct UpdateRow {
    index: usize,
    actor_loss: f64,
    critic_loss: f64,
}

fn read_update_rows(path: &Path) -> Result<Vec<UpdateRow>> {
    if !path.exists() {
        return Err(Error::MissingLogs(format!("{} not found", path.display())));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        rows.push(UpdateRow {
            index: parse_field(&r, 0)? as usize,
            actor_loss: parse_field(&r, 3)?,
            critic_loss: parse_field(&r, 4)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::MissingLogs(format!("{} is empty", path.display())));
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
struct SweepRow {
    init: u32,
    t: usize,
    layer: u32,
    loss: f64,
}

fn find_sweep(run_dir: &Path) -> Result<Vec<SweepRow>> {
    let mut seed_dirs: Vec<PathBuf> = fs::read_dir(run_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("sweep.csv").exists())
        .collect();
    seed_dirs.sort();
    let dir = seed_dirs.first().ok_or_else(|| {
        Error::MissingLogs(format!("no sweep.csv under {}", run_dir.display()))
    })?;
    let mut reader = csv::Reader::from_path(dir.join("sweep.csv"))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        rows.push(SweepRow {
            init: parse_field(&r, 0)? as u32,
            t: parse_field(&r, 1)? as usize,
            layer: parse_field(&r, 2)? as u32,
            loss: parse_field(&r, 3)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::MissingLogs("sweep.csv is empty".into()));
    }
    Ok(rows)
}

fn parse_field(record: &csv::StringRecord, idx: usize) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    raw.parse::<f64>().map_err(|_| Error::CsvCell {
        row: record.position().map(|p| p.line() as usize).unwrap_or(0),
        col: idx,
        msg: format!("expected number, got {raw:?}"),
    })
}

/// Picks up to `max` evenly spaced episode indices so long runs still yield
/// a readable figure.
fn pick_episodes(rows: &[EpisodeRow], max: usize) -> Vec<usize> {
    let mut all: Vec<usize> = rows.iter().map(|r| r.episode).collect();
    all.sort_unstable();
    all.dedup();
    if all.len() <= max {
        return all;
    }
    (0..max)
        .map(|i| all[i * (all.len() - 1) / (max - 1)])
        .collect()
}

fn series_by_episode(
    rows: &[EpisodeRow],
    picked: &[usize],
    value: impl Fn(&EpisodeRow) -> f64,
) -> Vec<Series> {
    let mut by_episode: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        if picked.contains(&r.episode) {
            by_episode
                .entry(r.episode)
                .or_default()
                .push((r.t as f64, value(r)));
        }
    }
    by_episode
        .into_iter()
        .map(|(e, pts)| (format!("episode_{e}"), pts))
        .collect()
}

fn sweep_series(rows: &[SweepRow], value: impl Fn(&SweepRow) -> f64) -> Vec<Series> {
    let mut by_init: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        by_init
            .entry(r.init)
            .or_default()
            .push((r.t as f64, value(r)));
    }
    by_init
        .into_iter()
        .map(|(i, pts)| (format!("init_{i}"), pts))
        .collect()
}

fn push_series_files(pending: &mut Vec<PendingFile>, stem: &str, title: &str, series: Vec<Series>) {
    let mut csv = String::from("series,x,y\n");
    for (label, pts) in &series {
        for (x, y) in pts {
            csv.push_str(&format!("{label},{x},{y}\n"));
        }
    }
    pending.push(PendingFile {
        name: format!("{stem}.csv"),
        contents: csv,
    });
    pending.push(PendingFile {
        name: format!("{stem}.svg"),
        contents: render_svg(title, &series),
    });
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 50.0;

/// Minimal multi-series line plot; enough for eyeballing trends without an
/// external plotting dependency.
fn render_svg(title: &str, series: &[Series]) -> String {
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if points.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(title)
    ));
    // axes
    s.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    ));
    for (label, value, x, y, anchor) in [
        ("xmin", x0, MARGIN, HEIGHT - MARGIN + 18.0, "middle"),
        ("xmax", x1, WIDTH - MARGIN, HEIGHT - MARGIN + 18.0, "middle"),
        ("ymin", y0, MARGIN - 6.0, HEIGHT - MARGIN, "end"),
        ("ymax", y1, MARGIN - 6.0, MARGIN + 4.0, "end"),
    ] {
        let _ = label;
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{value:.4}</text>\n"
        ));
    }
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            s.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                path.join(" ")
            ));
        }
        let ly = 40.0 + 14.0 * i as f64;
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{ly}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN + 4.0 - 120.0,
            xml_escape(label)
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_train_logs(dir: &Path) {
        fs::write(dir.join("meta.txt"), "kind=train\nseed=1\n").unwrap();
        let mut ep = String::from(
            "episode,t,layer,loss,reward,action,epsilon,actor_loss,critic_loss,fault\n",
        );
        for e in 0..20 {
            ep.push_str(&format!("{e},0,5,1.0,,,,,,0\n"));
            for t in 1..=3 {
                ep.push_str(&format!("{e},{t},{},{},0.1,1,0.1,0.01,0.02,0\n", 5 + t, 1.0 / t as f64));
            }
        }
        fs::write(dir.join("episodes.csv"), ep).unwrap();
        let mut up = String::from("update_index,episode,t,actor_loss,critic_loss\n");
        for i in 0..10 {
            up.push_str(&format!("{i},0,{},{},{}\n", i + 1, 0.5 / (i + 1) as f64, 0.3));
        }
        fs::write(dir.join("updates.csv"), up).unwrap();
    }

    #[test]
    fn train_report_emits_figures() {
        let dir = tempfile::tempdir().unwrap();
        write_train_logs(dir.path());
        let out = dir.path().join("report");
        let written = emit_report(dir.path(), &out).unwrap();
        assert!(written.iter().any(|p| p.ends_with("fig5_episode_loss.csv")));
        assert!(written.iter().any(|p| p.ends_with("fig11_actor_loss.svg")));
        let fig5 = fs::read_to_string(out.join("fig5_episode_loss.csv")).unwrap();
        let mut series: Vec<&str> = fig5
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        series.sort_unstable();
        series.dedup();
        assert_eq!(series.len(), EPISODE_SERIES);
    }

    #[test]
    fn missing_logs_error_and_no_partial_output() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("meta.txt"), "kind=train\nseed=1\n").unwrap();
        let out = dir.path().join("report");
        assert!(emit_report(dir.path(), &out).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn missing_meta_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report");
        match emit_report(dir.path(), &out) {
            Err(Error::MissingLogs(_)) => {}
            other => panic!("expected MissingLogs, got {other:?}"),
        }
    }

    #[test]
    fn svg_handles_constant_series() {
        let svg = render_svg("flat", &[("a".to_string(), vec![(0.0, 2.0), (1.0, 2.0)])]);
        assert!(svg.contains("polyline"));
        assert!(svg.starts_with("<svg"));
    }
}
