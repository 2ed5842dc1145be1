use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ghair_core::camera::CameraView;
use ghair_core::edit::{render_image, RenderMode};
use ghair_core::io::{self, ghair, ghopt, images};
use ghair_core::loss;
use ghair_core::mesh::TriMesh;
use ghair_core::model::HairModel;
use ghair_core::optim::OptimState;
use ghair_core::pipeline::{self, PipelineConfig};
use ghair_core::raster::{render_model, Payload};
use ghair_core::scatter::LightSource;
use ghair_core::synthetic::{self, WigConfig};
use ghair_service::{Salon, ServiceConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "ghair", version, about = "Strand-based Gaussian hair reconstruction and rendering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Model file (GHAIR), overriding `data.model`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Camera file, overriding `data.cameras`.
    #[arg(long)]
    cameras: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the oriented Gaussian field to the capture.
    Ogf(Common),
    /// Trace coarse strands through a fitted field.
    Strands {
        #[command(flatten)]
        common: Common,
        /// Field file written by `ogf`, overriding `data.field`.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Fine optimization of the strand model.
    Fine {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Render one PNG per camera.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "color")]
        mode: String,
        #[arg(long)]
        lights: Option<PathBuf>,
    },
    /// Render one PNG per camera under point lights.
    Relight {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lights: Option<PathBuf>,
    },
    /// Render a directory of GHAIR frames from one camera.
    Play {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sequence: PathBuf,
        /// Camera id (default: the first camera).
        #[arg(long)]
        camera: Option<u64>,
        #[arg(long, default_value = "color")]
        mode: String,
        #[arg(long)]
        lights: Option<PathBuf>,
    },
    /// Write strand polylines as PLY.
    ExportPly(Common),
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1")]
        addr: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        lights: Option<PathBuf>,
    },
    /// Write a synthetic capture (wig on a sphere) with a ready config.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        strands: Option<usize>,
        #[arg(long)]
        views: Option<usize>,
        #[arg(long)]
        size: Option<u32>,
    },
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = &c.model {
        cfg.data.model = Some(m.clone());
    }
    if let Some(m) = &c.cameras {
        cfg.data.cameras = Some(m.clone());
    }
    Ok(cfg)
}

fn need<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref().with_context(|| format!("no {what} given (set data.{what} in the config or pass a flag)"))
}

fn out_dir(c: &Common) -> Result<&Path> {
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    Ok(&c.out)
}

fn read_model(cfg: &PipelineConfig) -> Result<HairModel> {
    let p = need(&cfg.data.model, "model")?;
    let mut m = ghair::read(p).with_context(|| format!("reading {}", p.display()))?;
    if let Some(s) = &cfg.data.scalp_mesh {
        m.scalp = Some(TriMesh::read_obj(s)?);
    }
    Ok(m)
}

fn read_lights(cfg: &PipelineConfig, flag: &Option<PathBuf>) -> Result<Vec<LightSource>> {
    match flag.as_ref().or(cfg.data.lights.as_ref()) {
        Some(p) => io::read_lights(p).with_context(|| format!("reading lights {}", p.display())),
        None => Ok(Vec::new()),
    }
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn cmd_ogf(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let out = out_dir(c)?;
    let mut views = pipeline::load_views(&cfg)?;
    pipeline::compute_orientations(&mut views, &cfg.gabor)?;
    let head = TriMesh::read_obj(need(&cfg.data.head_mesh, "head_mesh")?)?;
    let hair = TriMesh::read_obj(need(&cfg.data.hair_mesh, "hair_mesh")?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut field = pipeline::init_field(&head, &hair, &cfg.ogf, cfg.sh_degree, cfg.diameter, &mut rng)?;
    let r = pipeline::fit_ogf(&mut field, &views, Some(&head), &cfg.ogf, &cfg.weights, &cfg.render, &mut rng, |it, l| {
        if it % 100 == 0 {
            log::info!("ogf {it}: loss {l:.6}");
        }
    })?;
    ghair::write(&pipeline::field_to_model(&field), &out.join("field.ghair"))?;
    write_json(
        &out.join("ogf.json"),
        &json!({ "gaussians": field.len(), "removed_inside_head": r.removed, "losses": r.losses }),
    )?;
    println!("field: {} gaussians ({} removed inside the head)", field.len(), r.removed);
    Ok(())
}

fn cmd_strands(c: &Common, field: &Option<PathBuf>) -> Result<()> {
    let mut cfg = load_config(c)?;
    if let Some(f) = field {
        cfg.data.field = Some(f.clone());
    }
    let out = out_dir(c)?;
    let field = pipeline::field_from_model(&ghair::read(need(&cfg.data.field, "field")?)?)?;
    let scalp = TriMesh::read_obj(need(&cfg.data.scalp_mesh, "scalp_mesh")?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = pipeline::strands_from_field(&field, &scalp, &cfg.strands, cfg.weights.geo_pos, cfg.weights.geo_dir, &mut rng)?;
    if let Some(p) = &cfg.data.model {
        model.head = ghair::read(p)?.head;
    }
    ghair::write(&model, &out.join("strands.ghair"))?;
    println!("strands: {} traced", model.strands.len());
    Ok(())
}

fn cmd_fine(c: &Common, iterations: Option<u64>) -> Result<()> {
    let mut cfg = load_config(c)?;
    if let Some(n) = iterations {
        cfg.fine.iterations = n;
    }
    let out = out_dir(c)?;
    let mut model = read_model(&cfg)?;
    let views = pipeline::load_views(&cfg)?;
    let (train, test) = pipeline::split_views(views, &cfg.fine.holdout);
    let mut state = OptimState::new(&model, &cfg.optim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = pipeline::run_fine(
        &mut model,
        &train,
        &cfg.fine,
        &cfg.weights,
        &cfg.render,
        &cfg.optim.density,
        &mut state,
        &mut rng,
        |it, l| {
            if it % 100 == 0 {
                log::info!("fine {it}: loss {l:.6}");
            }
        },
    )?;
    ghair::write(&model, &out.join("fine.ghair"))?;
    ghopt::write(&state, &out.join("fine.ghopt"))?;
    let mut held = Vec::new();
    for v in &test {
        let f = render_model(&model, &v.cam, Payload::ShColor, &cfg.render).frame;
        let alpha = loss::alpha_loss(&f.alpha, &v.alpha)?.0 / f.alpha.len() as f64;
        held.push(json!({ "camera": v.cam.id, "psnr": loss::psnr(&f.color, &v.image), "alpha_mean": alpha }));
    }
    write_json(
        &out.join("fine.json"),
        &json!({
            "iterations": state.iteration,
            "strands": model.strands.len(),
            "final_loss": r.losses.last(),
            "density": r.density.iter().map(|(it, d)| json!({"iteration": it, "pruned": d.pruned, "duplicated": d.duplicated})).collect::<Vec<_>>(),
            "held_out": held,
        }),
    )?;
    println!("fine: {} steps, {} strands", state.iteration, model.strands.len());
    Ok(())
}

fn render_all(c: &Common, mode: RenderMode, lights_flag: &Option<PathBuf>) -> Result<()> {
    let cfg = load_config(c)?;
    let out = out_dir(c)?;
    let model = read_model(&cfg)?;
    let cams = io::read_cameras(need(&cfg.data.cameras, "cameras")?)?;
    let lights = read_lights(&cfg, lights_flag)?;
    if mode == RenderMode::Relight && lights.is_empty() {
        bail!("relighting needs at least one light (--lights or data.lights)");
    }
    for cam in &cams {
        let f = render_image(&model, cam, mode, &lights, &cfg.scatter, &cfg.render, &cfg.light_pass)?;
        f.save_png(&out.join(format!("{}.png", cam.id)))?;
    }
    println!("rendered {} views", cams.len());
    Ok(())
}

fn cmd_play(c: &Common, sequence: &Path, camera: Option<u64>, mode: RenderMode, lights_flag: &Option<PathBuf>) -> Result<()> {
    let cfg = load_config(c)?;
    let out = out_dir(c)?;
    let cams = io::read_cameras(need(&cfg.data.cameras, "cameras")?)?;
    let cam: &CameraView = match camera {
        Some(id) => cams.iter().find(|v| v.id == id).with_context(|| format!("no camera with id {id}"))?,
        None => cams.first().context("camera file is empty")?,
    };
    let lights = read_lights(&cfg, lights_flag)?;
    let mut frames: Vec<PathBuf> = fs::read_dir(sequence)
        .with_context(|| format!("reading {}", sequence.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "ghair"))
        .collect();
    frames.sort();
    if frames.is_empty() {
        bail!("no .ghair frames in {}", sequence.display());
    }
    let head = match &cfg.data.model {
        Some(p) => ghair::read(p)?.head,
        None => Vec::new(),
    };
    for (i, p) in frames.iter().enumerate() {
        let mut m = ghair::read(p).with_context(|| format!("reading {}", p.display()))?;
        if m.head.is_empty() {
            m.head.clone_from(&head);
        }
        let f = render_image(&m, cam, mode, &lights, &cfg.scatter, &cfg.render, &cfg.light_pass)?;
        f.save_png(&out.join(format!("frame_{i:04}.png")))?;
    }
    println!("played {} frames", frames.len());
    Ok(())
}

fn cmd_export(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let out = out_dir(c)?;
    let model = read_model(&cfg)?;
    fs::write(out.join("strands.ply"), io::ply::polylines_to_ply(&model))?;
    println!("exported {} strands", model.strands.len());
    Ok(())
}

fn cmd_serve(c: &Common, addr: &str, port: u16, lights_flag: &Option<PathBuf>) -> Result<()> {
    let cfg = load_config(c)?;
    let path = need(&cfg.data.model, "model")?.to_path_buf();
    let lights = read_lights(&cfg, lights_flag)?;
    let addr: SocketAddr = format!("{addr}:{port}").parse().context("bad --addr/--port")?;
    let scfg = ServiceConfig {
        render: cfg.render.clone(),
        light_pass: cfg.light_pass.clone(),
        ..ServiceConfig::default()
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let salon = Salon::loading(scfg);
        salon.spawn_load(path, cfg.scatter.clone(), lights);
        ghair_service::serve(salon, addr).await
    })?;
    Ok(())
}

fn cmd_synth(c: &Common, strands: Option<usize>, views: Option<usize>, size: Option<u32>) -> Result<()> {
    let cfg = load_config(c)?;
    let out = out_dir(c)?;
    let mut w = WigConfig {
        seed: cfg.seed,
        ..WigConfig::default()
    };
    if let Some(n) = strands {
        w.strands = n;
    }
    if let Some(n) = views {
        w.views = n;
    }
    if let Some(n) = size {
        w.width = n;
        w.height = n;
    }
    let scene = synthetic::wig_scene(&w, &cfg.render);
    fs::create_dir_all(out.join("images"))?;
    for ((cam, img), alpha) in scene.cameras.iter().zip(&scene.images).zip(&scene.alphas) {
        images::write_rgba(&out.join("images").join(format!("{}.png", cam.id)), img, alpha, cam.width, cam.height)?;
    }
    io::write_cameras(&scene.cameras, &out.join("cameras.json"))?;
    fs::write(out.join("head.obj"), scene.head_mesh.to_obj())?;
    fs::write(out.join("hair.obj"), scene.hair_mesh.to_obj())?;
    let scalp = scene.model.scalp.clone().expect("synthetic wig has a scalp");
    fs::write(out.join("scalp.obj"), scalp.to_obj())?;
    ghair::write(&scene.model, &out.join("gt.ghair"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let init = synthetic::perturb(&scene.model, 10f64.to_radians(), &mut rng);
    ghair::write(&init, &out.join("init.ghair"))?;
    let lights = vec![
        LightSource::new(ghair_core::math::Vec3::new(0.6, 0.8, 0.6), [3.0, 3.0, 3.0]),
        LightSource::new(ghair_core::math::Vec3::new(-0.7, 0.2, 0.5), [0.8, 0.8, 1.0]),
    ];
    fs::write(out.join("lights.json"), io::lights::lights_to_string(&lights))?;
    let holdout: Vec<u64> = scene.cameras.iter().map(|c| c.id).filter(|id| id % 6 == 3).collect();
    write_json(
        &out.join("config.json"),
        &json!({
            "data": {
                "cameras": "cameras.json",
                "images": "images",
                "head_mesh": "head.obj",
                "hair_mesh": "hair.obj",
                "scalp_mesh": "scalp.obj",
                "model": "init.ghair",
                "lights": "lights.json"
            },
            "fine": { "holdout": holdout },
            "seed": cfg.seed
        }),
    )?;
    println!("synthetic capture: {} strands, {} views", scene.model.strands.len(), scene.cameras.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ogf(c) => cmd_ogf(&c),
        Command::Strands { common, field } => cmd_strands(&common, &field),
        Command::Fine { common, iterations } => cmd_fine(&common, iterations),
        Command::Render { common, mode, lights } => render_all(&common, mode.parse()?, &lights),
        Command::Relight { common, lights } => render_all(&common, RenderMode::Relight, &lights),
        Command::Play {
            common,
            sequence,
            camera,
            mode,
            lights,
        } => cmd_play(&common, &sequence, camera, mode.parse()?, &lights),
        Command::ExportPly(c) => cmd_export(&c),
        Command::Serve { common, addr, port, lights } => cmd_serve(&common, &addr, port, &lights),
        Command::Synth {
            common,
            strands,
            views,
            size,
        } => cmd_synth(&common, strands, views, size),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
