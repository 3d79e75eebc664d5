use std::path::Path;

use proptest::prelude::*;
use sulphsim::config::{apply, parse_config, RunConfig};
use sulphsim::driver::{load_sweep, run, sweep, Simulation};
use sulphsim::output::{read_profile_csv, read_vtk_scalars};

fn config(pairs: &[(&str, &str)], dir: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    let owned: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    apply(&mut c, &owned).unwrap();
    c.output.out_dir = dir.to_path_buf();
    c.validate().unwrap();
    c
}

#[test]
fn rest_configuration_emits_rest_profiles() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        &[("sbar", "0"), ("nx", "17"), ("ny", "17"), ("n_steps", "15"), ("snapshot_steps", "0,5,15")],
        tmp.path(),
    );
    run(&cfg).unwrap();
    let rows = read_profile_csv(&std::fs::read_to_string(tmp.path().join("profiles_vertical.csv")).unwrap()).unwrap();
    let r_at_start: Vec<f64> = rows.iter().filter(|r| r.0 == 0.0 && r.3 == "r").map(|r| r.4).collect();
    assert_eq!(r_at_start.len(), 17);
    for (t, _, x2, field, v) in &rows {
        match field.as_str() {
            "s" => assert_eq!(*v, 0.0),
            "c" => assert_eq!(*v, 1.0),
            "r" => {
                let j = (x2 * 16.0).round() as usize;
                assert_eq!(*v, r_at_start[j], "r moved at t={t}");
            }
            f => panic!("unexpected field {f}"),
        }
    }
    let horiz = std::fs::read_to_string(tmp.path().join("profiles_horizontal.csv")).unwrap();
    assert_eq!(read_profile_csv(&horiz).unwrap().len(), 3 * 2 * 2 * 17);
}

#[test]
fn high_permeability_half_takes_up_more_so2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        &[
            ("nu_law", "parabolic"),
            ("rl", "0.25"),
            ("nx", "33"),
            ("ny", "33"),
            ("n_steps", "15"),
            ("snapshot_steps", "5,15"),
            ("formats", "vtk"),
        ],
        tmp.path(),
    );
    run(&cfg).unwrap();
    for step in [5, 15] {
        let text = std::fs::read_to_string(tmp.path().join(format!("snapshot_{step:06}.vtk"))).unwrap();
        let s = read_vtk_scalars(&text, "s").unwrap();
        // left edge: nodes j*33, x2 = j/32; rugosity is high for x2 >= 0.5
        let low_half: Vec<f64> = (0..16).map(|j| s[j * 33]).collect();
        let high_half: Vec<f64> = (16..33).map(|j| s[j * 33]).collect();
        let low_max = low_half.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let high_min = high_half.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(high_min > low_max, "step {step}: {high_min} vs {low_max}");
    }
}

#[test]
fn default_run_has_no_flags() {
    let cfg = config(&[("n_steps", "200"), ("snapshot_steps", "")], Path::new("unused"));
    let mut sim = Simulation::new(&cfg).unwrap();
    for _ in 0..200 {
        sim.advance().unwrap();
    }
    assert!(sim.report().passed(), "{:?}", sim.report().violations.first());
    assert_eq!(sim.report().entries.len(), 201);
}

#[test]
fn manifest_reproduces_the_run_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        &[
            ("nx", "9"),
            ("ny", "9"),
            ("n_steps", "3"),
            ("snapshot_steps", "3"),
            ("r_init", "weibull"),
            ("seed", "31337"),
            ("dt", "0.000123"),
        ],
        tmp.path(),
    );
    run(&cfg).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("manifest.ini")).unwrap();
    assert!(text.starts_with("# sulphsim "));
    assert!(text.contains("# status = ok"));
    assert_eq!(parse_config(&text, &[]).unwrap(), cfg);
}

#[test]
fn sweep_compares_permeability_laws() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("base.ini"),
        "# fast exchange\na = 0.6\nb = -0.2\nnu0 = 1\nnul = 10\nrl = 0.25\n\
         nx = 33\nny = 33\nn_steps = 150\nsnapshot_steps = 5\nformats = csv\n",
    )
    .unwrap();
    std::fs::write(
        tmp.path().join("sweep.ini"),
        "[linear]\nconfig = base.ini\n[parabolic]\nconfig = base.ini\nnu_law = parabolic\n\
         [parabolic_again]\nconfig = base.ini\nnu_law = parabolic\n",
    )
    .unwrap();
    let plan = load_sweep(&tmp.path().join("sweep.ini")).unwrap();
    let st = sweep(&plan.entries, 2);
    let lin = st[0].result.as_ref().unwrap();
    let par = st[1].result.as_ref().unwrap();
    assert!(par.edge_gradient.unwrap() > lin.edge_gradient.unwrap());
    let (kl, _) = lin.threshold.unwrap();
    let (kp, _) = par.threshold.unwrap();
    assert!(kp < kl);
    let read = |name: &str| std::fs::read(tmp.path().join(name).join("profiles_vertical.csv")).unwrap();
    assert_eq!(read("parabolic"), read("parabolic_again"));
}

fn arb_config() -> impl Strategy<Value = Vec<(String, String)>> {
    (
        0.05f64..2.0,
        -0.5f64..0.0,
        1.0f64..500.0,
        prop::bool::ANY,
        any::<u64>(),
        1e-6f64..1e-2,
        prop_oneof![Just("constant"), Just("piecewise"), Just("weibull")],
        1usize..5,
    )
        .prop_map(|(a, b, lambda, par, seed, dt, init, picard)| {
            vec![
                ("a".into(), a.to_string()),
                ("b".into(), (b * a).to_string()),
                ("lambda".into(), lambda.to_string()),
                ("nu_law".into(), if par { "parabolic" } else { "linear" }.into()),
                ("seed".into(), seed.to_string()),
                ("dt".into(), dt.to_string()),
                ("r_init".into(), init.into()),
                ("picard_iters".into(), picard.to_string()),
            ]
        })
}

proptest! {
    #[test]
    fn resolved_config_round_trips(pairs in arb_config()) {
        let cfg = parse_config("", &pairs).unwrap();
        prop_assert_eq!(parse_config(&cfg.to_ini(), &[]).unwrap(), cfg);
    }
}
