use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use precip_sr::data::io::{load_field_dir, MANIFEST_NAME};
use precip_sr::data::{upsample_field, Split};
use precip_sr::evaluation::{
    critic_scores, evaluate_method, histogram, spectrum_aggregate, write_spectrum_csv,
    MethodEvaluation, CSI_THRESHOLDS,
};
use precip_sr::networks::read_network;
use precip_sr::{NetworkParams, PrecipField, Role, UpsampleMode};

use super::{load_config, load_split, open_corpus};
use crate::config::invalid;
use crate::exit::{with_code, EXIT_MISMATCH};
use crate::Global;

pub const POOLED_CSI_FILE: &str = "csi_pooled.csv";
pub const HR_SPECTRUM_FILE: &str = "spectrum_hr.csv";
pub const CRITIC_HISTOGRAM_FILE: &str = "critic_histogram.csv";

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference fields: a corpus directory (its `--split` is used) or a
    /// plain directory of field files.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Predictions as NAME=DIR; repeat for several methods. Coarser fields
    /// are interpolated onto the reference grid first.
    #[arg(long = "pred", value_name = "NAME=DIR", required = true)]
    pub preds: Vec<String>,
    /// Critic network used for scores and score differences.
    #[arg(long)]
    pub critic: Option<PathBuf>,
    /// Bins of the critic score histogram.
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
}

fn load_critic(path: &Path) -> Result<NetworkParams> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let net = read_network(&mut BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
        .map_err(with_code(EXIT_MISMATCH))?;
    if net.role() != Role::Critic {
        return Err(anyhow::anyhow!(
            "{} holds a {}, not a critic",
            path.display(),
            net.role()
        ))
        .map_err(with_code(EXIT_MISMATCH));
    }
    Ok(net)
}

fn parse_pred(spec: &str) -> Result<(String, PathBuf)> {
    let (name, dir) = spec
        .split_once('=')
        .ok_or_else(|| invalid(format!("--pred '{spec}' is not NAME=DIR")))?;
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if !ok || name == "hr" {
        return Err(invalid(format!("bad method name '{name}'")));
    }
    Ok((name.to_string(), PathBuf::from(dir)))
}

/// Brings coarse predictions onto the `side` grid.
fn to_grid(fields: Vec<(String, PrecipField)>, side: usize) -> Result<Vec<(String, PrecipField)>> {
    fields
        .into_iter()
        .map(|(id, f)| {
            if f.size() == side {
                return Ok((id, f));
            }
            if f.size() == 0 || !side.is_multiple_of(f.size()) {
                return Err(anyhow::anyhow!(
                    "field {id} is {0}x{0}, reference is {side}x{side}",
                    f.size()
                ))
                .map_err(with_code(EXIT_MISMATCH));
            }
            let up = upsample_field(&f, side / f.size(), UpsampleMode::Bilinear)
                .map_err(anyhow::Error::from)?;
            Ok((id, up))
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_pooled(path: &Path, evals: &[(String, MethodEvaluation)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "method,threshold,hits,false_alarms,misses,csi")?;
    for (name, e) in evals {
        for (t, c) in CSI_THRESHOLDS.iter().zip(&e.pooled) {
            let csi = c.csi().map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{name},{t},{},{},{},{csi}",
                c.hits, c.false_alarms, c.misses
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_histogram(path: &Path, columns: &[(String, Vec<f64>)], bins: usize) -> Result<()> {
    let all = columns.iter().flat_map(|(_, v)| v.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let counts: Vec<Vec<usize>> = columns
        .iter()
        .map(|(_, v)| histogram(v, lo, hi, bins))
        .collect();
    let width = if bins > 0 {
        (hi - lo) / bins as f64
    } else {
        0.0
    };
    let mut w = create(path)?;
    let names: Vec<&str> = columns.iter().map(|(n, _)| n.as_str()).collect();
    writeln!(w, "bin_lo,bin_hi,{}", names.join(","))?;
    for b in 0..bins {
        let row: Vec<String> = counts.iter().map(|c| c[b].to_string()).collect();
        let edge = |k: usize| if k == bins { hi } else { lo + k as f64 * width };
        writeln!(w, "{},{},{}", edge(b), edge(b + 1), row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(global: &Global, args: &EvaluateArgs) -> Result<()> {
    let mut cfg = load_config(global)?;
    if args.bins == 0 {
        return Err(invalid("--bins must be positive"));
    }
    let preds = args
        .preds
        .iter()
        .map(|p| parse_pred(p))
        .collect::<Result<Vec<_>>>()?;
    for (i, (name, _)) in preds.iter().enumerate() {
        if preds[..i].iter().any(|(n, _)| n == name) {
            return Err(invalid(format!("method '{name}' given twice")));
        }
    }
    let truth = if args.truth.join(MANIFEST_NAME).exists() {
        let split: Split = cfg.get("split", args.split)?;
        load_split(&open_corpus(&args.truth)?, split)?
    } else {
        load_field_dir(&args.truth).with_context(|| format!("reading {}", args.truth.display()))?
    };
    let side = truth
        .first()
        .map(|(_, f)| f.size())
        .ok_or_else(|| invalid(format!("no reference fields in {}", args.truth.display())))?;
    let critic = args.critic.as_deref().map(load_critic).transpose()?;
    cfg.write_resolved(&global.out)?;
    fs::create_dir_all(&global.out)?;

    let mut evals = Vec::with_capacity(preds.len());
    for (name, dir) in &preds {
        let fields = load_field_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
        let fields = to_grid(fields, side)?;
        let e = evaluate_method(name, &truth, &fields, critic.as_ref())
            .with_context(|| format!("evaluating {name}"))?;
        let mut w = create(&global.out.join(format!("report_{name}.csv")))?;
        e.report.write_csv(&mut w)?;
        w.flush()?;
        let mut w = create(&global.out.join(format!("spectrum_{name}.csv")))?;
        write_spectrum_csv(&mut w, &e.spectrum)?;
        w.flush()?;
        let agg = e.report.aggregate();
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{name}: rmse {:.4} csi10 {} csi15 {} critic {} critic_diff {}",
            agg.rmse,
            opt(agg.csi10),
            opt(agg.csi15),
            opt(agg.critic_score),
            opt(agg.critic_diff)
        );
        evals.push((name.clone(), e));
    }

    let grids: Vec<Vec<f64>> = truth.iter().map(|(_, f)| f.values_f64()).collect();
    if grids.len() >= 2 {
        let mut w = create(&global.out.join(HR_SPECTRUM_FILE))?;
        write_spectrum_csv(&mut w, &spectrum_aggregate(&grids, side)?)?;
        w.flush()?;
    }
    write_pooled(&global.out.join(POOLED_CSI_FILE), &evals)?;

    if let Some(c) = &critic {
        let mut ids: Vec<usize> = (0..truth.len()).collect();
        ids.sort_by(|&a, &b| truth[a].0.cmp(&truth[b].0));
        let refs: Vec<&PrecipField> = ids.iter().map(|&i| &truth[i].1).collect();
        let mut columns = vec![("hr".to_string(), critic_scores(c, &refs)?)];
        for (name, e) in &evals {
            columns.push((name.clone(), e.scores.clone().unwrap_or_default()));
        }
        write_histogram(&global.out.join(CRITIC_HISTOGRAM_FILE), &columns, args.bins)?;
    }
    Ok(())
}
