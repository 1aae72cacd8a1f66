// Scratch parameter probe; not part of the deliverable surface.
use rotor_core::floquet::{
    build_floquet_operator, diagonalize_floquet, nekhoroshev_experiment, project_onto_modes,
    NekhoroshevConfig,
};
use rotor_core::lyapunov::{benettin_run, LyapunovConfig, Pairing};
use rotor_core::manybody;
use rotor_core::observables::{fit_power_law, sigma_series, CoarseGrainConfig};
use rotor_core::propagator::{evolve, KickMethod, NoiseModel, Stepper};
use rotor_core::{momentum_eigenstate, uniform_phase_state, ModelParams};

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    let t0 = std::time::Instant::now();
    match which.as_str() {
        "subdiff" => {
            let p = ModelParams::new(6.0, 0.52, 1.7, 4096).unwrap();
            let s = momentum_eigenstate(p, 0).unwrap();
            let out = evolve(s, 30_000, 10, &NoiseModel::none(), KickMethod::Spectral).unwrap();
            println!("evolve done in {:?}", t0.elapsed());
            let fit = fit_power_law(&out.energy, 3_000.0, 30_000.0).unwrap();
            println!("gamma_e = {:.4} +- {:.4}", fit.exponent, fit.stderr);
            let cfg = CoarseGrainConfig::new(50, 10).unwrap();
            let sigma = sigma_series(&out.order, &cfg, p.interaction, p.kick, 1.0, false).unwrap();
            let sfit = fit_power_law(&sigma, 3_000.0, 30_000.0).unwrap();
            println!("gamma_sigma = {:.4} +- {:.4}", sfit.exponent, sfit.stderr);
            println!("consistency |g_s + g_e/2| = {:.4}", (sfit.exponent + fit.exponent / 2.0).abs());
            println!("edge warning: {:?}", out.truncation_warning_at);
            println!("final e = {:.2}, e_inf = {:.2}", out.energy.values().last().unwrap(), p.infinite_temperature_energy());
        }
        "thermal" => {
            let p = ModelParams::new(6.0, 0.52, 1.7, 128).unwrap();
            let s = momentum_eigenstate(p, 0).unwrap();
            let out = evolve(s, 100_000, 100, &NoiseModel::none(), KickMethod::Bessel).unwrap();
            let e_inf = p.infinite_temperature_energy();
            let e_final = *out.energy.values().last().unwrap();
            println!("thermal in {:?}: e_final={:.2} e_inf={:.2} ratio={:.4}", t0.elapsed(), e_final, e_inf, e_final / e_inf);
            // also look at e at several times
            for frac in [0.25, 0.5, 0.75, 1.0] {
                let idx = ((out.energy.len() - 1) as f64 * frac) as usize;
                println!("  t={} e/e_inf={:.4}", out.energy.times()[idx], out.energy.values()[idx] / e_inf);
            }
        }
        "localized" => {
            let p = ModelParams::new(6.0, 0.0, 1.7, 512).unwrap();
            let s = momentum_eigenstate(p, 0).unwrap();
            let out = evolve(s, 10_000, 10, &NoiseModel::none(), KickMethod::Bessel).unwrap();
            let e_max = out.energy.values().iter().cloned().fold(0.0f64, f64::max);
            println!("localized in {:?}: max e = {:.3}, e_inf/10 = {:.1}, norm defect {:.2e}", t0.elapsed(), e_max, p.infinite_temperature_energy() / 10.0, (out.final_state.norm_sqr()-1.0).abs());
        }
        "noisy" => {
            let p = ModelParams::new(6.0, 0.0, 1.7, 1024).unwrap();
            let s = momentum_eigenstate(p, 0).unwrap();
            let noise = NoiseModel::gaussian(0.5, 99).unwrap();
            let out = evolve(s, 10_000, 10, &noise, KickMethod::Bessel).unwrap();
            let fit = fit_power_law(&out.energy, 100.0, 10_000.0).unwrap();
            println!("noisy in {:?}: exponent = {:.4} +- {:.4}", t0.elapsed(), fit.exponent, fit.stderr);
            println!("  final e = {:.2} (edge warn {:?})", out.energy.values().last().unwrap(), out.truncation_warning_at);
        }
        "lyap" => {
            for m in [8usize, 16, 32, 64] {
                let t = std::time::Instant::now();
                let p = ModelParams::new(6.0, 0.52, 1.7, m).unwrap();
                let cfg = LyapunovConfig { delta: 1e-10, n_periods: 100_000, record_every: 10_000, pairing: Pairing::MomentumPerturbed };
                let out = benettin_run(&p, &cfg).unwrap();
                println!("M={m}: plateau={:.5e} ({:?})", out.plateau, t.elapsed());
            }
        }
        "conserve" => {
            use rayon::prelude::*;
            let p = ModelParams::new(6.0, 0.0, 1.7, 153).unwrap();
            let spec = diagonalize_floquet(&build_floquet_operator(&p)).unwrap();
            println!("diag + orthonormality residual {:.2e} in {:?}", spec.involution_residual(), t0.elapsed());
            let worst: f64 = (0..10u64)
                .into_par_iter()
                .map(|s| {
                    use rand::{Rng, SeedableRng};
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + s);
                    let phases: Vec<f64> =
                        (0..p.lattice_len()).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
                    let mut state = uniform_phase_state(p, &phases).unwrap();
                    let o0: Vec<f64> =
                        project_onto_modes(&spec, &state).unwrap().iter().map(|z| z.norm()).collect();
                    let mut stepper = Stepper::new(&p, KickMethod::Bessel);
                    let mut worst = 0.0f64;
                    for _ in 0..10_000 {
                        stepper.step(&mut state, 0.0);
                        let o = project_onto_modes(&spec, &state).unwrap();
                        for (a, &b) in o.iter().zip(&o0) {
                            worst = worst.max((a.norm() - b).abs());
                        }
                    }
                    worst
                })
                .reduce(|| 0.0, f64::max);
            println!("conserve in {:?}: max deviation {:.3e}", t0.elapsed(), worst);
        }
        "neko" => {
            let p = ModelParams::new(6.0, 0.0, 1.7, 153).unwrap();
            let cfg = NekhoroshevConfig {
                eps_list: vec![0.02, 0.05, 0.1, 0.2],
                n_disorder: 32,
                n_kicks: 10_000,
                seed: 2024,
                b: 0.7,
                fit_t_min: 10.0,
                record_every: 1,
            };
            let res = nekhoroshev_experiment(&p, &cfg).unwrap();
            println!("neko in {:?}", t0.elapsed());
            for (f, (_, ts)) in res.fits.iter().zip(&res.t_star) {
                println!(
                    "  eps={:<5} A={:.4}+-{:.4} B={:.4}+-{:.4} break~{:.0} shrunk={} t*={:.4e}",
                    f.eps, f.a_mean, f.a_stderr, f.b_mean, f.b_stderr, f.mean_break_time, f.shrunk_windows, ts
                );
            }
            if let Some(fit) = &res.exponent_a {
                println!("  a-slope = {:.4} +- {:.4}", fit.exponent, fit.stderr);
            }
        }
        "ed" => {
            let kbar = 1.7;
            let eps = 0.52;
            for n in [4usize, 5] {
                for m in [4usize, 6] {
                    let t = std::time::Instant::now();
                    match manybody::r_vs_k_scan(n, m, &[0.5, 1.0, 2.0, 4.0, 6.0], eps, kbar, 50_000) {
                        Ok(rows) => {
                            print!("N={n} M={m} dim={} ({:?}):", rows[0].dim, t.elapsed());
                            for r in &rows {
                                print!(" K={}: r={:.4}/{:.4}{}", r.kick, r.r, r.r_check, if r.converged { "*" } else { "" });
                            }
                            println!();
                        }
                        Err(e) => println!("N={n} M={m}: {e}"),
                    }
                }
            }
        }
        other => eprintln!("unknown probe '{other}'"),
    }
}
