use rand::Rng;

use crate::env::{dbm_to_watt, generate_scenario, rate, sinr, BeamformerSet};
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::nn::{Activation, Mlp};
use crate::{seed, Complex64};

/// Quick numerical checks run by the `check` subcommand: backprop against
/// finite differences, SINR against a term-by-term expansion, exact rate
/// and unit-conversion values. Returns one line per passed check.
pub fn self_check(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let mut rng = seed::rng(seed::derive(cfg.seed, "self-check", 0));
    let mut report = Vec::new();

    let mut sizes = vec![crate::env::BsState::dim(cfg.antennas.min(8))];
    sizes.extend(cfg.neurons.iter().map(|&w| w.min(24)));
    sizes.push(2 * cfg.antennas.min(8));
    let mut net = Mlp::new(&sizes, Activation::Relu, Activation::Tanh, &mut rng)?;
    let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
    let up: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = |net: &Mlp| -> Result<f64> { Ok(net.forward(&x)?.iter().zip(&up).map(|(a, b)| a * b).sum()) };
    let grad = net.backward(&x, &up)?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..net.num_params() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let fp = f(&net)?;
        net.params_mut()[i] = orig - h;
        let fm = f(&net)?;
        net.params_mut()[i] = orig;
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - grad.params[i]).abs() / fd.abs().max(grad.params[i].abs()).max(1e-6));
    }
    if worst >= 1e-4 {
        return Err(Error::Domain(format!("backprop check failed: relative error {worst:e}")));
    }
    report.push(format!("backprop vs finite differences: max relative error {worst:.2e}"));

    let scenario = generate_scenario(&mut rng, &cfg.scenario_config())?;
    let beams = BeamformerSet(
        (0..cfg.cells)
            .map(|_| {
                let v: Vec<Complex64> = (0..cfg.antennas)
                    .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                v.into_iter().map(|z| z / norm).collect()
            })
            .collect(),
    );
    let mut worst = 0.0f64;
    for k in 0..cfg.cells {
        let power = |j: usize| {
            let h = scenario.channel(j, k);
            let s: Complex64 = (0..cfg.antennas).map(|n| h[n].conj() * beams.0[j][n]).sum();
            scenario.tx_power_w * s.norm_sqr()
        };
        let interference: f64 = (0..cfg.cells).filter(|&j| j != k).map(power).sum();
        let want = power(k) / (interference + scenario.noise_w);
        worst = worst.max((sinr(&scenario, &beams, k)? - want).abs() / want);
    }
    if worst >= 1e-12 {
        return Err(Error::Domain(format!("SINR check failed: relative error {worst:e}")));
    }
    report.push(format!("SINR vs direct expansion: max relative error {worst:.2e}"));

    if rate(1.0)? != 1.0 || rate(3.0)? != 2.0 {
        return Err(Error::Domain("rate check failed".into()));
    }
    if dbm_to_watt(10.0) != 0.01 || dbm_to_watt(-74.0) != 10f64.powf(-10.4) {
        return Err(Error::Domain("dBm conversion check failed".into()));
    }
    report.push("rate and dBm conversions exact".into());
    Ok(report)
}
