//! Command implementations: wire the configuration to the core routines and
//! serialize every emitted series/table with full provenance.

use anyhow::{anyhow, bail, Context};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

use rotor_core::floquet::{NekhoroshevConfig, NekhoroshevResult};
use rotor_core::lyapunov::{benettin_run, lambda_vs_m, LyapunovConfig, Pairing};
use rotor_core::manybody;
use rotor_core::observables::{constant_sigma_check, fit_power_law, sigma_series, CoarseGrainConfig, PowerLawFit};
use rotor_core::propagator::{evolve, KickMethod, NoiseModel};
use rotor_core::{momentum_eigenstate, uniform_phase_state, ModelParams, RotorState, SeriesMeta};

use crate::config::FileConfig;
use crate::series_io::{
    read_series_csv, write_series_csv, write_series_json, write_table_csv, write_table_json,
};

pub struct OutputOptions {
    pub dir: PathBuf,
    pub json: bool,
}

impl OutputOptions {
    fn prepare(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating output directory {}", self.dir.display()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

fn parse_method(name: &str) -> anyhow::Result<KickMethod> {
    match name {
        "bessel" => Ok(KickMethod::Bessel),
        "spectral" => Ok(KickMethod::Spectral),
        other => bail!("unknown kick method '{other}' (expected bessel|spectral)"),
    }
}

fn initial_state(
    params: ModelParams,
    initial: &str,
    m0: i64,
    seed: u64,
) -> anyhow::Result<(RotorState, String)> {
    match initial {
        "momentum" => Ok((momentum_eigenstate(params, m0)?, format!("momentum m0={m0}"))),
        "uniform-phase" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phases: Vec<f64> = (0..params.lattice_len())
                .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
                .collect();
            Ok((uniform_phase_state(params, &phases)?, "uniform-phase".into()))
        }
        other => bail!("unknown initial state '{other}' (expected momentum|uniform-phase)"),
    }
}

pub fn cmd_evolve(cfg: &FileConfig, out: &OutputOptions) -> anyhow::Result<()> {
    let ev = cfg
        .evolve
        .as_ref()
        .ok_or_else(|| anyhow!("config is missing the [evolve] table"))?;
    let params = cfg.params.build()?;
    let method = parse_method(&ev.method)?;
    let noise = match &ev.noise {
        None => NoiseModel::none(),
        Some(n) => match n.kind.as_str() {
            "none" => NoiseModel::none(),
            "gaussian-iid" => NoiseModel::gaussian(n.sigma, cfg.seed)?,
            other => bail!("unknown noise kind '{other}' (expected none|gaussian-iid)"),
        },
    };
    let (state, init_desc) = initial_state(params, &ev.initial, ev.m0, cfg.seed)?;

    let mut outcome = evolve(state, ev.n_kicks, ev.record_every, &noise, method)?;
    for series_meta in [&mut outcome.energy.meta, &mut outcome.order.meta] {
        series_meta.seed = Some(cfg.seed);
        series_meta.push_extra("initial", &init_desc);
    }

    out.prepare()?;
    write_series_csv(&out.path("energy.csv"), "evolve", &outcome.energy)?;
    write_series_csv(&out.path("order_parameter.csv"), "evolve", &outcome.order)?;
    if out.json {
        write_series_json(&out.path("energy.json"), "evolve", &outcome.energy)?;
        write_series_json(&out.path("order_parameter.json"), "evolve", &outcome.order)?;
    }

    let final_energy = outcome.energy.values().last().copied().unwrap_or(0.0);
    println!(
        "evolve | K={} eps={} kbar={} M={} kicks={} | final e = {:.6}",
        params.kick, params.interaction, params.kbar, params.m_max, ev.n_kicks, final_energy
    );
    println!(
        "       | e_inf(M) = {:.6}, norm defect = {:.3e}, max |Im F| = {:.3e}",
        params.infinite_temperature_energy(),
        (outcome.final_state.norm_sqr() - 1.0).abs(),
        outcome.max_im_order
    );
    if let Some(t) = outcome.truncation_warning_at {
        println!("       | WARNING: edge occupation exceeded 1e-6 at kick {t}; truncation-limited");
    }
    println!("       | wrote {}", out.dir.display());
    Ok(())
}

fn parse_pairing(name: &str) -> anyhow::Result<Pairing> {
    match name {
        "m0-perturbed" => Ok(Pairing::MomentumPerturbed),
        "uniform-perturbed" => Ok(Pairing::UniformPerturbed),
        other => bail!("unknown pairing '{other}' (expected m0-perturbed|uniform-perturbed)"),
    }
}

pub fn cmd_lyapunov(cfg: &FileConfig, out: &OutputOptions) -> anyhow::Result<()> {
    let ly = cfg
        .lyapunov
        .as_ref()
        .ok_or_else(|| anyhow!("config is missing the [lyapunov] table"))?;
    let base = cfg.params.build()?;
    let pairing = parse_pairing(&ly.pairing)?;
    let m_values = ly.m_values.clone().unwrap_or_else(|| vec![base.m_max]);
    if m_values.is_empty() {
        bail!("m_values must not be empty");
    }

    let core_cfg = LyapunovConfig {
        delta: ly.delta,
        n_periods: ly.n_periods,
        record_every: ly.record_every,
        pairing,
    };

    let runs: Vec<anyhow::Result<_>> = m_values
        .par_iter()
        .map(|&m| {
            let params = ModelParams::new(base.kick, base.interaction, base.kbar, m)?;
            let outcome = benettin_run(&params, &core_cfg)?;
            Ok((m, params, outcome))
        })
        .collect();

    out.prepare()?;
    let mut plateau_rows = Vec::new();
    println!("lyapunov | K={} eps={} kbar={} delta={} periods={}", base.kick, base.interaction, base.kbar, ly.delta, ly.n_periods);
    for run in runs {
        let (m, params, outcome) = run?;
        let suffix = format!("M{m}");
        write_series_csv(&out.path(&format!("lambda_{suffix}.csv")), "lyapunov", &outcome.lambda)?;
        write_series_csv(&out.path(&format!("energy_{suffix}.csv")), "lyapunov", &outcome.energy)?;
        if out.json {
            write_series_json(&out.path(&format!("lambda_{suffix}.json")), "lyapunov", &outcome.lambda)?;
        }
        let pairs = lambda_vs_m(&outcome.lambda, &outcome.energy, params.kbar)?;
        let rows: Vec<Vec<f64>> = pairs.iter().map(|&(m_t, l)| vec![m_t, l]).collect();
        let meta = SeriesMeta::with_params(params);
        write_table_csv(
            &out.path(&format!("lambda_vs_m_{suffix}.csv")),
            "lyapunov",
            "lambda_vs_m",
            &meta,
            &["m", "lambda"],
            &rows,
        )?;
        if outcome.zero_distance_periods > 0 {
            println!(
                "         | WARNING: {} periods had zero separation (log-ratio counted as 0)",
                outcome.zero_distance_periods
            );
        }
        println!("         | M={m}: lambda plateau = {:.6e}", outcome.plateau);
        plateau_rows.push(vec![(2 * m + 1) as f64, outcome.plateau]);
    }
    let meta = SeriesMeta::with_params(base);
    write_table_csv(
        &out.path("plateau_vs_size.csv"),
        "lyapunov",
        "plateau_vs_size",
        &meta,
        &["lattice_size", "lambda_plateau"],
        &plateau_rows,
    )?;
    if out.json {
        write_table_json(&out.path("plateau_vs_size.json"), "lyapunov", "plateau_vs_size", &["lattice_size", "lambda_plateau"], &plateau_rows)?;
    }
    println!("         | wrote {}", out.dir.display());
    Ok(())
}

pub fn cmd_nekhoroshev(cfg: &FileConfig, out: &OutputOptions) -> anyhow::Result<()> {
    let nk = cfg
        .nekhoroshev
        .as_ref()
        .ok_or_else(|| anyhow!("config is missing the [nekhoroshev] table"))?;
    let params = cfg.params.build()?;
    let core_cfg = NekhoroshevConfig {
        eps_list: nk.eps.clone(),
        n_disorder: nk.n_disorder,
        n_kicks: nk.n_kicks,
        seed: cfg.seed,
        b: nk.b,
        fit_t_min: nk.fit_t_min,
        record_every: nk.record_every,
    };
    let result = rotor_core::floquet::nekhoroshev_experiment(&params, &core_cfg)?;

    out.prepare()?;
    write_nekhoroshev(&result, &core_cfg, out)?;

    println!(
        "nekhoroshev | K={} kbar={} M={} N_diso={} kicks={}",
        params.kick, params.kbar, params.m_max, nk.n_disorder, nk.n_kicks
    );
    for (f, (_, t_star)) in result.fits.iter().zip(&result.t_star) {
        println!(
            "            | eps={:<6} A={:.4} (+-{:.4})  B={:.4} (+-{:.4})  t*={:.4e}",
            f.eps, f.a_mean, f.a_stderr, f.b_mean, f.b_stderr, t_star
        );
    }
    if let Some(fit) = &result.exponent_a {
        println!(
            "            | log(-B) vs log(eps): slope = {:.4} +- {:.4}",
            fit.exponent, fit.stderr
        );
    }
    println!("            | wrote {}", out.dir.display());
    Ok(())
}

fn write_nekhoroshev(
    result: &NekhoroshevResult,
    cfg: &NekhoroshevConfig,
    out: &OutputOptions,
) -> anyhow::Result<()> {
    for (eps, eta) in cfg.eps_list.iter().zip(&result.eta) {
        let n_modes = eta.ncols();
        let mut names: Vec<String> = vec!["t".into()];
        names.extend((0..n_modes).map(|j| format!("eta_{j}")));
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let rows: Vec<Vec<f64>> = result
            .times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut row = Vec::with_capacity(n_modes + 1);
                row.push(t);
                row.extend(eta.row(i).iter().copied());
                row
            })
            .collect();
        write_table_csv(
            &out.path(&format!("eta_eps{eps}.csv")),
            "nekhoroshev",
            "eta",
            &result.meta,
            &name_refs,
            &rows,
        )?;
    }

    let fit_rows: Vec<Vec<f64>> = result
        .fits
        .iter()
        .zip(&result.t_star)
        .map(|(f, &(_, t_star))| {
            vec![f.eps, f.a_mean, f.b_mean, f.a_stderr, f.b_stderr, f.mean_break_time, t_star]
        })
        .collect();
    write_table_csv(
        &out.path("nekhoroshev_fits.csv"),
        "nekhoroshev",
        "fits",
        &result.meta,
        &["eps", "A", "B", "A_stderr", "B_stderr", "mean_break_time", "t_star"],
        &fit_rows,
    )?;
    if out.json {
        write_table_json(
            &out.path("nekhoroshev_fits.json"),
            "nekhoroshev",
            "fits",
            &["eps", "A", "B", "A_stderr", "B_stderr", "mean_break_time", "t_star"],
            &fit_rows,
        )?;
    }

    if let Some(fit) = &result.exponent_a {
        write_table_csv(
            &out.path("nekhoroshev_exponent.csv"),
            "nekhoroshev",
            "exponent_a",
            &result.meta,
            &["slope", "intercept", "stderr"],
            &[vec![fit.exponent, fit.prefactor_log, fit.stderr]],
        )?;
    }
    Ok(())
}

pub fn cmd_ed_scan(cfg: &FileConfig, out: &OutputOptions) -> anyhow::Result<()> {
    let ed = cfg
        .ed
        .as_ref()
        .ok_or_else(|| anyhow!("config is missing the [ed] table"))?;
    let params = cfg.params.build()?;

    let rows = manybody::r_vs_k_scan(
        ed.n_bosons,
        params.m_max,
        &ed.k_grid,
        params.interaction,
        params.kbar,
        ed.max_dim,
    )?;

    out.prepare()?;
    let mut meta = SeriesMeta::with_params(params);
    meta.push_extra("n_bosons", ed.n_bosons);
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.kick, r.r, r.r_check, r.dim as f64, if r.converged { 1.0 } else { 0.0 }])
        .collect();
    write_table_csv(
        &out.path("r_vs_k.csv"),
        "ed-scan",
        "r_vs_k",
        &meta,
        &["K", "r", "r_check", "dim", "converged"],
        &table,
    )?;
    if out.json {
        write_table_json(&out.path("r_vs_k.json"), "ed-scan", "r_vs_k", &["K", "r", "r_check", "dim", "converged"], &table)?;
    }

    println!(
        "ed-scan | N={} M={} eps={} kbar={} (sector dim {})",
        ed.n_bosons, params.m_max, params.interaction, params.kbar, rows[0].dim
    );
    for r in &rows {
        println!(
            "        | K={:<6} r={:.4} (M+2: {:.4}) converged={}",
            r.kick, r.r, r.r_check, r.converged
        );
    }

    if ed.dump_spectra {
        let basis = manybody::enumerate_basis(ed.n_bosons, params.m_max, ed.max_dim)?;
        let sym = manybody::project_even_sector(&basis);
        for &k in &ed.k_grid {
            let kp = ModelParams::new(k, params.interaction, params.kbar, params.m_max)?;
            let u = manybody::build_floquet(&kp, &sym)?;
            let spec = manybody::quasienergies(&u)?;
            let rows: Vec<Vec<f64>> = spec.mu.iter().enumerate().map(|(i, &mu)| vec![i as f64, mu]).collect();
            write_table_csv(
                &out.path(&format!("quasienergies_K{k}.csv")),
                "ed-scan",
                "quasienergies",
                &meta,
                &["index", "mu"],
                &rows,
            )?;
        }
    }
    println!("        | wrote {}", out.dir.display());
    Ok(())
}

fn print_fit(tag: &str, fit: &PowerLawFit) {
    println!(
        "{tag} | exponent = {:.6} +- {:.6}, prefactor_log = {:.6}, window = [{}, {}]",
        fit.exponent, fit.stderr, fit.prefactor_log, fit.window.0, fit.window.1
    );
}

pub fn cmd_analyze(cfg: &FileConfig, out: &OutputOptions) -> anyhow::Result<()> {
    let an = cfg
        .analyze
        .as_ref()
        .ok_or_else(|| anyhow!("config is missing the [analyze] table"))?;
    let params = cfg.params.build()?;
    let input = Path::new(&an.input);
    if !input.exists() {
        bail!("input series {} does not exist", input.display());
    }
    let parsed = read_series_csv(input)?;
    out.prepare()?;

    match an.op.as_str() {
        "power-law" | "diffusion-check" => {
            let series = parsed.into_real_series()?;
            let t_min = an.t_min.ok_or_else(|| anyhow!("[analyze] t_min is required for fits"))?;
            let t_max = an.t_max.ok_or_else(|| anyhow!("[analyze] t_max is required for fits"))?;
            let fit = if an.op == "power-law" {
                fit_power_law(&series, t_min, t_max)?
            } else {
                constant_sigma_check(&series, t_min, t_max)?
            };
            print_fit(&an.op, &fit);
            let meta = series.meta.clone();
            write_table_csv(
                &out.path("fit.csv"),
                "analyze",
                &an.op,
                &meta,
                &["exponent", "prefactor_log", "stderr", "t_min", "t_max"],
                &[vec![fit.exponent, fit.prefactor_log, fit.stderr, t_min, t_max]],
            )?;
            if out.json {
                write_table_json(&out.path("fit.json"), "analyze", &an.op, &["exponent", "prefactor_log", "stderr", "t_min", "t_max"], &[vec![fit.exponent, fit.prefactor_log, fit.stderr, t_min, t_max]])?;
            }
        }
        "sigma" => {
            let series = parsed.into_complex_series()?;
            let run_params = series.meta.params.unwrap_or(params);
            let cg = CoarseGrainConfig::new(an.window, an.stride)?;
            let sigma = sigma_series(
                &series,
                &cg,
                run_params.interaction,
                run_params.kick,
                an.g,
                an.centered,
            )?;
            write_series_csv(&out.path("sigma.csv"), "analyze", &sigma)?;
            if out.json {
                write_series_json(&out.path("sigma.json"), "analyze", &sigma)?;
            }
            println!(
                "sigma | window = {}, stride = {}, {} samples -> {}",
                an.window,
                an.stride,
                series.len(),
                sigma.len()
            );
            if let (Some(t_min), Some(t_max)) = (an.t_min, an.t_max) {
                let fit = fit_power_law(&sigma, t_min, t_max)?;
                print_fit("sigma", &fit);
                write_table_csv(
                    &out.path("sigma_fit.csv"),
                    "analyze",
                    "sigma-fit",
                    &sigma.meta,
                    &["exponent", "prefactor_log", "stderr", "t_min", "t_max"],
                    &[vec![fit.exponent, fit.prefactor_log, fit.stderr, t_min, t_max]],
                )?;
            }
        }
        other => bail!("unknown analyze op '{other}' (expected power-law|sigma|diffusion-check)"),
    }
    println!("analyze | wrote {}", out.dir.display());
    Ok(())
}
