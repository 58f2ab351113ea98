#![allow(dead_code)]

use std::sync::Arc;

use impdde::config::load_system;
use impdde::grid::{Grid, GridFunction};
use impdde::{Side, SystemSpec};
use rand::Rng;

/// Every zoo entry, plus the nonimpulsive planar system.
pub fn zoo_specs() -> Vec<(String, SystemSpec)> {
    let mut out: Vec<(String, SystemSpec)> = impdde::zoo::all().into_iter().map(|e| (e.id.to_string(), e.spec)).collect();
    let planar0 = impdde::zoo::planar_autonomous(impdde::zoo::planar_default_omega(), [0.0, 0.0]).unwrap();
    out.push(("planar_autonomous(eta=0)".into(), planar0.spec));
    out
}

/// `x_i(t) = c_i (sigma_i + (1 - sigma_i) u_i(t))` with `u_i` in `[0, 1]`
/// built from a few random harmonics, and independent random jumps at
/// impulse nodes. Such `x` lies in the cone for `sigma`.
pub fn random_cone_element(grid: Arc<Grid>, sigma: &[f64], rng: &mut impl Rng) -> GridFunction {
    let n = sigma.len();
    let omega = grid.omega();
    let params: Vec<(f64, Vec<(f64, f64)>)> = (0..n)
        .map(|_| {
            let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
            let harmonics = (1..=3).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU))).collect();
            (scale, harmonics)
        })
        .collect();
    let jumps: Vec<f64> = (0..n * grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let m = grid.len();
    let g2 = grid.clone();
    GridFunction::from_fn(grid, n, move |i, t, side| {
        let (c, h) = &params[i];
        let total: f64 = h.iter().map(|(a, _)| a).sum::<f64>().max(1e-12);
        let raw: f64 =
            h.iter().enumerate().map(|(k, (a, p))| a * (0.5 + 0.5 * ((k + 1) as f64 * std::f64::consts::TAU * t / omega + p).sin())).sum();
        let mut u = (raw / total).clamp(0.0, 1.0);
        if side == Side::Right {
            if let Some(j) = g2.snap(t) {
                let j = j.rem_euclid(m as isize) as usize;
                if g2.is_jump(j) {
                    u = jumps[i * m + j];
                }
            }
        }
        c * (sigma[i] + (1.0 - sigma[i]) * u)
    })
}

/// Constant-coefficient system with `g = 4` everywhere and `d = 2`: the
/// unique periodic solution is `x = 2`.
pub fn constant_forcing(omega: f64) -> SystemSpec {
    load_system(&format!(
        r#"
omega = {omega}
[[component]]
death = 2.0
[component.nonlinearity]
kind = "hematopoiesis_discrete"
terms = [{{ beta = 4.0, tau = 0.5, c = 0.0 }}]
"#
    ))
    .unwrap()
}

/// `x' = -d x` with `g = 0`.
pub fn linear_decay(d: f64, omega: f64, impulse: Option<(f64, f64)>) -> SystemSpec {
    let imp = match impulse {
        Some((t, _)) => format!("impulse_instants = [{t}]\n"),
        None => String::new(),
    };
    let maps = match impulse {
        Some((_, eta)) => format!("impulses = [{{ kind = \"linear\", eta = {eta} }}]\n"),
        None => String::new(),
    };
    load_system(&format!(
        r#"
omega = {omega}
{imp}
[[component]]
death = {d}
{maps}
[component.nonlinearity]
kind = "nicholson_discrete"
terms = [{{ beta = 0.0, tau = 1.0 }}]
"#
    ))
    .unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Composite Simpson, written here independently of the library.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels + panels % 2;
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Random nonimpulsive planar Nicholson system with envelope data for the
/// reduction checks.
pub struct Instance {
    pub spec: SystemSpec,
    pub d: Vec<(f64, f64)>,
    pub a: [f64; 2],
    pub b1: Vec<(f64, f64)>,
    pub b2: Vec<f64>,
    pub v: [f64; 2],
}

pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let d: Vec<(f64, f64)> = (0..2).map(|_| (rng.gen_range(1.0..1.4), rng.gen_range(-0.3..0.3))).collect();
    let a = [rng.gen_range(0.0..0.3), rng.gen_range(0.0..0.3)];
    let b1 = (0..2).map(|_| (rng.gen_range(1.5..4.0), rng.gen_range(-0.2..0.2))).collect();
    let b2 = (0..2).map(|_| rng.gen_range(0.0..0.9)).collect();
    let v = [1.0, rng.gen_range(0.5..2.0)];
    let text = format!(
        r#"
omega = 1.0
[[component]]
death = {{ mean = {}, cos = [{}] }}
nonlinearity = {{ kind = "nicholson_discrete", terms = [{{ beta = 1.0, tau = 0.5 }}] }}
[[component]]
death = {{ mean = {}, cos = [{}] }}
nonlinearity = {{ kind = "nicholson_discrete", terms = [{{ beta = 1.0, tau = 0.5 }}] }}
[[coupling]]
i = 1
j = 2
a = {}
[[coupling]]
i = 2
j = 1
a = {}
"#,
        d[0].0, d[0].1, d[1].0, d[1].1, a[0], a[1]
    );
    Instance { spec: load_system(&text).unwrap(), d, a, b1, b2, v }
}

/// Independent evaluation of the nonimpulsive pointwise and averaged forms,
/// returning their margins.
pub fn reduction_oracle(x: &Instance) -> (f64, f64) {
    let tau = std::f64::consts::TAU;
    let mut pw = f64::INFINITY;
    let mut avg = f64::INFINITY;
    for i in 0..2 {
        let j = 1 - i;
        let ratio = x.v[j] / x.v[i];
        let (dm, dc) = x.d[i];
        let (bm, bc) = x.b1[i];
        for k in 0..8192 {
            let t = k as f64 / 8192.0;
            let net = dm + dc * (tau * t).cos() - ratio * x.a[i];
            pw = pw.min(net - x.b2[i]).min(bm + bc * (tau * t).cos() - net);
        }
        let e = dm.exp();
        avg = avg.min(1.0 - 1.0 / e - (x.b2[i] + ratio * x.a[i])).min(bm + ratio * x.a[i] - (e - 1.0));
    }
    (pw, avg)
}
