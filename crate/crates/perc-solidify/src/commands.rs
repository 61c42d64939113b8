use crate::manifest::{digest_file, now, sidecar, RunManifest};
use crate::{Cli, Command, ConfigSource, Outcome, SizeArg, U1Source, VariantArg};
use serde::Serialize;
use serde_json::{json, Value};
use solidify::cluster_graph::{ClusterGraph, VertexSet};
use solidify::density::{oblique_half_space, subsample, vertices_in_box, DensityContext, Variant};
use solidify::percolation::{
    label_clusters, largest_cluster, read_config, seed_etas, seed_event_frequencies, spanning_cluster, write_config,
    Model, PercConfig,
};
use solidify::potential::{extrapolate_inverse_side, singleton_capacity, DirichletSystem};
use solidify::resonance::{
    cascade_experiment, estimate_phi, one_step_experiment, read_vertex_set, resonance_set, write_vertex_set,
    absorption_experiment,
};
use solidify::schedule::{alpha_tilde, intervals, ScaleSchedule, ScheduleParams};
use solidify::verify::{run_suite, solidification_entries, Size};
use solidify::walk::CascadePlan;
use solidify::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

fn tagged(estimator: &str, result: impl Serialize) -> Value {
    json!({ "estimator": estimator, "result": result })
}

fn load(src: &ConfigSource) -> Result<(PercConfig, Vec<PathBuf>)> {
    match &src.config {
        Some(path) => {
            let mut r = BufReader::new(File::open(path)?);
            Ok((read_config(&mut r)?, vec![path.clone()]))
        }
        None => Ok((PercConfig::generate(Model::parse(&src.model)?, src.dim, src.side, src.p, src.seed)?, vec![])),
    }
}

fn cluster_of(cfg: &PercConfig) -> Result<ClusterGraph> {
    largest_cluster(cfg, &label_clusters(cfg))
}

fn u1_set(g: &ClusterGraph, u: &U1Source, inputs: &mut Vec<PathBuf>) -> Result<VertexSet> {
    match &u.u1 {
        Some(path) => {
            inputs.push(path.clone());
            read_vertex_set(g, BufReader::new(File::open(path)?))
        }
        None => {
            if u.normal.len() != g.dim() {
                return Err(Error::Usage(format!("--normal has {} entries for dimension {}", u.normal.len(), g.dim())));
            }
            Ok(oblique_half_space(g, &u.normal, u.offset))
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn origin_box(g: &ClusterGraph, half: i64) -> Vec<u32> {
    let lo = vec![-half; g.dim()];
    let hi = vec![half; g.dim()];
    vertices_in_box(g, &lo, &hi)
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let mut inputs = Vec::new();
    let out = |summary: Value, seed: Option<u64>, inputs: Vec<PathBuf>| Outcome { summary, pass: true, seed, inputs };
    Ok(match &cli.command {
        Command::Generate { src } => {
            let path = cli.out.as_ref().ok_or_else(|| Error::Usage("generate needs --out".into()))?;
            let cfg = PercConfig::generate(Model::parse(&src.model)?, src.dim, src.side, src.p, src.seed)?;
            let mut w = create(path)?;
            write_config(&cfg, &mut w)?;
            w.flush()?;
            let s = json!({
                "model": src.model, "dim": src.dim, "side": src.side, "p": src.p, "seed": src.seed,
                "open_fraction": cfg.open_fraction(),
            });
            out(s, Some(src.seed), inputs)
        }
        Command::Cluster { src, edges } => {
            let (cfg, ins) = load(src)?;
            let lab = label_clusters(&cfg);
            let g = largest_cluster(&cfg, &lab)?;
            let span = spanning_cluster(&cfg, &lab)?;
            if let Some(p) = edges {
                let mut w = create(p)?;
                g.export_edges(&mut w)?;
                w.flush()?;
            }
            let largest = lab.largest().map(|l| lab.diameters()[l as usize]);
            let s = json!({
                "side": cfg.window().side(), "p": cfg.p(), "seed": cfg.seed(),
                "open_fraction": cfg.open_fraction(),
                "clusters": lab.count(),
                "largest_size": g.len(),
                "largest_diameter": largest,
                "largest_density": g.len() as f64 / cfg.window().len() as f64,
                "spanning_size": span.map(|c| c.len()),
            });
            out(tagged("exact", s), Some(cfg.seed()), ins)
        }
        Command::Density { src, u1, ell, variant, csv } => {
            let (cfg, mut ins) = load(src)?;
            let g = cluster_of(&cfg)?;
            let u = u1_set(&g, u1, &mut ins)?;
            let var = match variant {
                VariantArg::Sigma => Variant::Sigma,
                VariantArg::SigmaTilde => Variant::SigmaTilde,
            };
            let ctx = DensityContext::new(&g);
            let id = u1.u1.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "half-space".into());
            let f = ctx.field(&u, &id, *ell, var);
            if let Some(p) = csv {
                let mut w = create(p)?;
                f.write_csv(&g, &mut w)?;
                w.flush()?;
            }
            let n = f.values.len() as f64;
            let s = json!({
                "variant": var.name(), "ell": ell, "radius": var.radius(*ell), "vertices": f.values.len(),
                "u1_size": u.count(),
                "mean": f.values.iter().sum::<f64>() / n,
                "min": f.values.iter().copied().fold(f64::INFINITY, f64::min),
                "max": f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "truncated": f.truncated.iter().filter(|&&t| t).count(),
            });
            out(tagged("exact", s), Some(cfg.seed()), ins)
        }
        Command::Schedule { j, dim, eta, ell_star, c2, delta_s, kappa_reg, l, i } => {
            let p = ScheduleParams {
                j: *j,
                dim: *dim,
                eta: *eta,
                ell_star: *ell_star,
                delta_s: *delta_s,
                kappa_reg: *kappa_reg,
                c2: *c2,
                l_override: *l,
                i_override: *i,
            };
            out(tagged("exact", ScaleSchedule::build(&p)?), None, inputs)
        }
        Command::Resonance { src, u1, scales, j, alpha_tilde: at, starts, replicas, set_out } => {
            let (cfg, mut ins) = load(src)?;
            let g = cluster_of(&cfg)?;
            let u = u1_set(&g, u1, &mut ins)?;
            let ctx = DensityContext::new(&g);
            let at = at.unwrap_or_else(|| alpha_tilde(g.dim()));
            let res = resonance_set(&ctx, &u, scales, *j, at)?;
            if let Some(p) = set_out {
                let mut w = create(p)?;
                write_vertex_set(&g, &res, &mut w)?;
                w.flush()?;
            }
            let phi = if *starts > 0 {
                let pool = origin_box(&g, 2);
                Some(tagged("mc", estimate_phi(&g, &res, &subsample(pool, *starts, cfg.seed()), *replicas, cfg.seed())?))
            } else {
                None
            };
            let s = json!({ "scales": scales, "J": j, "alpha_tilde": at, "size": res.count(), "phi": phi });
            out(s, Some(cfg.seed()), ins)
        }
        Command::Absorb { n, hole_fraction, seed, chi, starts, replicas, delta_s } => {
            let entries = solidification_entries(n, *hole_fraction, *seed);
            let r = absorption_experiment(&entries, *chi, *starts, *replicas, *delta_s)?;
            out(tagged("mc+exact", r), Some(*seed), inputs)
        }
        Command::Capacity { src, set, singleton_sides } => {
            if let Some(path) = set {
                let (cfg, mut ins) = load(src)?;
                let g = cluster_of(&cfg)?;
                ins.push(path.clone());
                let a = read_vertex_set(&g, BufReader::new(File::open(path)?))?;
                let sys = DirichletSystem::window(&g)?;
                let eq = sys.equilibrium(&a)?;
                out(tagged("exact", json!({ "size": a.count(), "capacity": eq.capacity })), Some(cfg.seed()), ins)
            } else if !singleton_sides.is_empty() {
                let mut pts = Vec::new();
                for &s in singleton_sides {
                    pts.push((s, singleton_capacity(3, s)?));
                }
                let fit = (pts.len() >= 2).then(|| extrapolate_inverse_side(&pts)).transpose()?;
                let s = json!({ "sides": pts, "extrapolated": fit.map(|f| f.0), "slope": fit.map(|f| f.1) });
                out(tagged("exact", s), None, inputs)
            } else {
                return Err(Error::Usage("capacity needs --set or --singleton-sides".into()));
            }
        }
        Command::Onestep { src, u1, ell, ell_prime, delta, probes, replicas, probe_half } => {
            let (cfg, mut ins) = load(src)?;
            let g = cluster_of(&cfg)?;
            let u = u1_set(&g, u1, &mut ins)?;
            let ctx = DensityContext::new(&g);
            let p = subsample(origin_box(&g, *probe_half), *probes, cfg.seed());
            let r = one_step_experiment(&ctx, &u, *ell, *ell_prime, *delta, &p, *replicas, cfg.seed())?;
            out(tagged("mc", r), Some(cfg.seed()), ins)
        }
        Command::Cascade { src, u1, ells, probes, replicas, probe_half, step_budget } => {
            if ells.len() < 2 {
                return Err(Error::Usage("cascade needs at least two scales".into()));
            }
            let (cfg, mut ins) = load(src)?;
            let g = cluster_of(&cfg)?;
            let u = u1_set(&g, u1, &mut ins)?;
            let ctx = DensityContext::new(&g);
            let iv = intervals(ells.len() as u32 - 1)?;
            let plan = CascadePlan::new(&ctx, &u, ells, &iv, alpha_tilde(g.dim()))?;
            let pool: Vec<u32> = origin_box(&g, *probe_half)
                .into_iter()
                .filter(|&v| {
                    let s = plan.sigma(0, v);
                    s >= iv[0].0 && s <= iv[0].1
                })
                .collect();
            let starts = subsample(pool, *probes, cfg.seed());
            let r = cascade_experiment(&g, &plan, &starts, iv[0].1 - 0.5, *replicas, cfg.seed(), *step_budget)?;
            out(tagged("mc", json!({ "intervals": iv, "report": r })), Some(cfg.seed()), ins)
        }
        Command::SeedEvents { src, l0, alpha } => {
            let (cfg, ins) = load(src)?;
            let lab = label_clusters(&cfg);
            let g = largest_cluster(&cfg, &lab)?;
            let eta = g.len() as f64 / cfg.window().len() as f64;
            let (e1, e2) = seed_etas(*alpha, eta);
            let rows = l0.iter().map(|&l| seed_event_frequencies(&cfg, &lab, l, e1, e2)).collect::<Result<Vec<_>>>()?;
            out(tagged("mc", json!({ "eta": eta, "eta1": e1, "eta2": e2, "rows": rows })), Some(cfg.seed()), ins)
        }
        Command::Verify { suite, size } => {
            let size = match size {
                SizeArg::Quick => Size::Quick,
                SizeArg::Full => Size::Full,
            };
            let r = run_suite(suite, size)?;
            inputs.clear();
            Outcome { pass: r.pass, summary: serde_json::to_value(&r).expect("report serializes"), seed: None, inputs }
        }
    })
}

pub fn run(cli: &Cli) -> Result<bool> {
    let started = now();
    let o = execute(cli)?;
    let text = serde_json::to_string_pretty(&o.summary).expect("summary serializes");
    match (&cli.command, &cli.out) {
        (Command::Generate { .. }, _) | (_, None) => println!("{text}"),
        (_, Some(path)) => {
            let mut w = create(path)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
    }
    if let Some(path) = &cli.out {
        let m = RunManifest {
            command: std::env::args().collect::<Vec<_>>().join(" "),
            parameters: serde_json::to_value(&cli.command).expect("arguments serialize"),
            seed: o.seed,
            code_version: env!("CARGO_PKG_VERSION").into(),
            inputs: o.inputs.iter().map(|p| digest_file(p)).collect::<std::io::Result<_>>()?,
            started,
            finished: now(),
        };
        let mut w = create(&sidecar(path))?;
        writeln!(w, "{}", serde_json::to_string_pretty(&m).expect("manifest serializes"))?;
        w.flush()?;
    }
    Ok(o.pass)
}
