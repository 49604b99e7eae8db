//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line with the
//! measured values, then asserts.

use std::time::{Duration, Instant};

use rand::Rng;
use xbar_mann::device::DeviceParams;
use xbar_mann::harness::data::{synth, FeatureDataset, SyntheticSpec};
use xbar_mann::harness::experiments::{
    current_quartiles, hash_correlation, sense_margin_monte_carlo, tcam_linearity, unstable_bits,
    vector_pairs, CorrelationSpec, HashVariant,
};
use xbar_mann::hashing::{HashConfig, HashMode, Ternary, TernaryWord, Threshold};
use xbar_mann::mann::{map_f, run_task, DistanceMode, EpisodeConfig, MemoryBank, Pipeline};
use xbar_mann::metrics::{
    energy, latency_layers, run_fluctuation_sweep, CostModel, SweepRow, SweepSpec,
};
use xbar_mann::stats::paired_t_test;
use xbar_mann::tcam::{
    max_word_length, sense_margin_closed_form, SenseMarginParams, TcamArray, TcamConfig,
};
use xbar_mann::units::{FEMTO, MICRO, NANO};
use xbar_mann::{rng_from_seed, SimRng};

fn report(id: u32, name: &str, ok: bool, detail: impl AsRef<str>) {
    println!(
        "criterion {id:>2} {name}: {} ({})",
        if ok { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
}

fn within(t: Instant, limit: Duration) -> bool {
    t.elapsed() < limit
}

fn dataset(noise: f64, vectors_per_class: usize) -> FeatureDataset {
    let spec = SyntheticSpec {
        within_class_noise: noise,
        vectors_per_class,
        seed: 1,
        ..Default::default()
    };
    synth(&spec, &mut rng_from_seed(spec.seed)).unwrap()
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

#[test]
fn criterion_01_02_tcam_linearity_and_separation() {
    let t = Instant::now();
    let tcam = TcamConfig::default();
    let noisy = tcam_linearity(8, 8, 100, &tcam, &DeviceParams::default(), 11).unwrap();
    let target = tcam.v_search * tcam.g_on;
    let slope_err = (noisy.slope / target - 1.0).abs();

    let clean = tcam_linearity(8, 8, 100, &tcam, &DeviceParams::noise_free(), 11).unwrap();
    let worst_exact = clean
        .samples
        .iter()
        .map(|s| {
            let expect = target * s.mismatches as f64;
            if expect == 0.0 {
                s.current.abs()
            } else {
                (s.current / expect - 1.0).abs()
            }
        })
        .fold(0.0, f64::max);
    let elapsed_ok = within(t, Duration::from_secs(5));
    let ok1 = slope_err < 0.10 && worst_exact < 1e-9 && elapsed_ok;
    report(
        1,
        "tcam linearity",
        ok1,
        format!(
            "slope {:.3} uA/bit, rel err {:.4}, noise-free worst rel err {:.2e}, {:?}",
            noisy.slope / MICRO,
            slope_err,
            worst_exact,
            t.elapsed()
        ),
    );

    let q = current_quartiles(&noisy.samples);
    let present: Vec<usize> = q.iter().map(|c| c.mismatches).collect();
    let separated = q.windows(2).all(|w| w[0].q3 < w[1].q1);
    let ok2 = present == (0..=8).collect::<Vec<_>>() && separated;
    let gaps: Vec<String> = q
        .windows(2)
        .map(|w| format!("{:.1}", (w[1].q1 - w[0].q3) / MICRO))
        .collect();
    report(
        2,
        "distribution separability",
        ok2,
        format!("IQR gaps uA [{}]", gaps.join(", ")),
    );
    assert!(ok1 && ok2);
}

#[test]
fn criterion_03_hash_correlation_trend() {
    let t = Instant::now();
    let bits = [16, 32, 64, 128];
    let rows = hash_correlation(
        &bits,
        &CorrelationSpec::default(),
        &HashConfig::default(),
        &DeviceParams::default(),
    )
    .unwrap();
    let series = |v: HashVariant, normalized: bool| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.variant == v)
            .map(|r| {
                if normalized {
                    r.pearson_normalized.mean
                } else {
                    r.pearson.mean
                }
            })
            .collect()
    };
    let ideal = series(HashVariant::Ideal, true);
    let lsh = series(HashVariant::HardwareLsh, true);
    let tlsh = series(HashVariant::HardwareTlsh, true);
    let tlsh_raw = series(HashVariant::HardwareTlsh, false);
    let trend =
        strictly_increasing(&ideal) && strictly_increasing(&lsh) && strictly_increasing(&tlsh);
    let order = tlsh[3] >= lsh[3];
    let ok = trend && order && within(t, Duration::from_secs(60));
    let fmt = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    report(
        3,
        "hash/cosine correlation trend",
        ok,
        format!(
            "ideal [{}] lsh [{}] tlsh [{}] tlsh raw-THD [{}], {:?}",
            fmt(&ideal),
            fmt(&lsh),
            fmt(&tlsh),
            fmt(&tlsh_raw),
            t.elapsed()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_04_unstable_bits() {
    let t = Instant::now();
    let vectors: Vec<Vec<f64>> = vector_pairs(500, 64, &mut rng_from_seed(0))
        .into_iter()
        .map(|p| p.0)
        .collect();
    let hashing = HashConfig {
        threshold: Threshold::Fixed { amps: 4.0 * MICRO },
        ..Default::default()
    };
    let res = unstable_bits(&vectors, 100, &hashing, &DeviceParams::default(), 0).unwrap();
    let lsh = res.iter().find(|u| u.mode == HashMode::Lsh).unwrap();
    let tlsh = res.iter().find(|u| u.mode == HashMode::Tlsh).unwrap();
    let ok = tlsh.mean_flipping < lsh.mean_flipping && within(t, Duration::from_secs(60));
    report(
        4,
        "unstable-bit reduction",
        ok,
        format!(
            "flipping bits lsh {:.2} tlsh {:.2} (any change: tlsh {:.2}), {:?}",
            lsh.mean_flipping,
            tlsh.mean_flipping,
            tlsh.mean_changing,
            t.elapsed()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_05_sense_margin() {
    let t = Instant::now();
    let n_max = max_word_length(100.0, 0.5).unwrap();
    let at = |n| {
        sense_margin_closed_form(&SenseMarginParams {
            r: 100.0,
            n,
            m: 0,
            k: 0,
        })
        .unwrap()
    };
    let n_ok = n_max == 198 && at(198) >= 0.5 && at(199) < 0.5;
    let checks = sense_margin_monte_carlo(100, 256, &TcamConfig::default(), 5).unwrap();
    let worst = checks
        .iter()
        .map(|c| (c.measured - c.closed_form).abs())
        .fold(0.0, f64::max);
    let ok = n_ok && checks.len() == 100 && worst < 1e-9 && within(t, Duration::from_secs(10));
    report(
        5,
        "sense-margin formulas",
        ok,
        format!(
            "N_max {n_max}, worst |measured - closed form| {worst:.2e} over 100 instances, {:?}",
            t.elapsed()
        ),
    );
    assert!(ok);
}

fn random_word(len: usize, rng: &mut SimRng) -> TernaryWord {
    (0..len)
        .map(|_| match rng.random_range(0..3) {
            0 => Ternary::Zero,
            1 => Ternary::One,
            _ => Ternary::X,
        })
        .collect::<Vec<_>>()
        .into()
}

fn brute_majority(seq: &[TernaryWord]) -> TernaryWord {
    let len = seq[0].len();
    (0..len)
        .map(|i| {
            let ones = seq.iter().filter(|w| w.bits()[i] == Ternary::One).count();
            let zeros = seq.iter().filter(|w| w.bits()[i] == Ternary::Zero).count();
            match ones.cmp(&zeros) {
                std::cmp::Ordering::Greater => Ternary::One,
                std::cmp::Ordering::Less => Ternary::Zero,
                std::cmp::Ordering::Equal => Ternary::X,
            }
        })
        .collect::<Vec<_>>()
        .into()
}

#[test]
fn criterion_06_majority_update_oracle() {
    let t = Instant::now();
    let mut rng = rng_from_seed(6);
    let tcam = TcamConfig {
        word_len: 32,
        ..Default::default()
    };
    let device = DeviceParams::noise_free();
    let mut agree = 0;
    let cases = 10_000;
    for _ in 0..cases {
        let n = rng.random_range(1..=20);
        let seq: Vec<TernaryWord> = (0..n).map(|_| random_word(32, &mut rng)).collect();
        let mut bank = MemoryBank::new(tcam, device, 1).unwrap();
        for w in &seq {
            bank.learn(w, 0, DistanceMode::ExactOracle, &device, &mut rng)
                .unwrap();
        }
        let expect = brute_majority(&seq);
        if *bank.word(0) == expect && *bank.tcam().word(0) == expect {
            agree += 1;
        }
    }
    let ok = agree == cases && within(t, Duration::from_secs(10));
    report(
        6,
        "majority-update oracle",
        ok,
        format!("{agree}/{cases} sequences agree, {:?}", t.elapsed()),
    );
    assert!(ok);
}

#[test]
fn criterion_07_mapped_vector_fixture() {
    let w: TernaryWord = "101X0".parse().unwrap();
    let got = map_f(&w);
    let ok = got == vec![1, -1, 1, 0, -1];
    report(7, "mapped-vector fixture", ok, format!("{got:?}"));
    assert!(ok);
}

#[test]
fn criterion_08_update_count_profile() {
    let t = Instant::now();
    let data = dataset(0.05, 25);
    let cfg = EpisodeConfig {
        n_way: 25,
        k_shot: 20,
        repeats: 20,
        capacity: 1024,
        seed: 8,
        ..Default::default()
    };
    let r = run_task(&cfg, &Pipeline::default(), &data).unwrap();
    let ok = r.frac_written_once >= 0.70
        && r.frac_rewritten_over_3 <= 0.10
        && within(t, Duration::from_secs(120));
    report(
        8,
        "update-count profile",
        ok,
        format!(
            "written once {:.3}, rewritten >3 times {:.3}, accuracy {:.3}, {:?}",
            r.frac_written_once,
            r.frac_rewritten_over_3,
            r.accuracy.mean,
            t.elapsed()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_end_to_end_fidelity() {
    let t = Instant::now();
    let data = dataset(0.1, 20);
    let pipe = Pipeline::default();
    let mut diffs = Vec::new();
    for n_way in [5, 25] {
        let acc = |distance| {
            let cfg = EpisodeConfig {
                n_way,
                repeats: 200,
                distance,
                seed: 9,
                ..Default::default()
            };
            run_task(&cfg, &pipe, &data).unwrap().accuracy.mean
        };
        let xbar = acc(DistanceMode::Crossbar);
        let oracle = acc(DistanceMode::ExactOracle);
        diffs.push((n_way, xbar, oracle));
    }
    let fidelity = diffs.iter().all(|(_, x, o)| (x - o).abs() < 0.02);

    let cfg = EpisodeConfig {
        n_way: 25,
        repeats: 200,
        seed: 9,
        ..Default::default()
    };
    let cosine = run_task(
        &EpisodeConfig {
            distance: DistanceMode::CosineBaseline,
            ..cfg
        },
        &pipe,
        &data,
    )
    .unwrap()
    .accuracy
    .mean;
    let gaps: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|&b| {
            let mut p = pipe.clone();
            p.hashing.bits = b;
            p.tcam.word_len = b;
            cosine - run_task(&cfg, &p, &data).unwrap().accuracy.mean
        })
        .collect();
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    let ok = fidelity && shrinking && within(t, Duration::from_secs(600));
    let d: Vec<String> = diffs
        .iter()
        .map(|(n, x, o)| format!("{n}-way crossbar {x:.4} oracle {o:.4}"))
        .collect();
    report(
        9,
        "end-to-end fidelity",
        ok,
        format!(
            "{}; cosine gap at 128/256/512 bits {:.4} {:.4} {:.4}, {:?}",
            d.join(", "),
            gaps[0],
            gaps[1],
            gaps[2],
            t.elapsed()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_fluctuation_sweep_shape() {
    let t = Instant::now();
    let data = dataset(0.1, 20);
    let spec = SweepSpec::default();
    assert!(spec.repeats >= 50);
    let reference = 0.1 * MICRO;
    let worst = 1.0 * MICRO;
    assert!(spec.levels.contains(&reference) && spec.levels.contains(&worst));
    let cfg = EpisodeConfig {
        seed: 10,
        ..Default::default()
    };
    let rows = run_fluctuation_sweep(&spec, &cfg, &Pipeline::default(), &data).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for task in &spec.tasks {
        for mode in [HashMode::Lsh, HashMode::Tlsh] {
            let base = SweepRow::find(&rows, reference, mode, task.n_way).unwrap();
            let high = SweepRow::find(&rows, worst, mode, task.n_way).unwrap();
            let test = paired_t_test(&base.episode_accuracies, &high.episode_accuracies).unwrap();
            ok &= test.mean_diff > 0.0 && test.p_greater < 0.05;
            details.push(format!(
                "{}-way {:?} {:.4}->{:.4} p={:.1e}",
                task.n_way, mode, base.mean, high.mean, test.p_greater
            ));
        }
        for &level in spec.levels.iter().filter(|&&l| l > reference) {
            let lsh = SweepRow::find(&rows, level, HashMode::Lsh, task.n_way).unwrap();
            let tlsh = SweepRow::find(&rows, level, HashMode::Tlsh, task.n_way).unwrap();
            if tlsh.mean < lsh.mean {
                ok = false;
                details.push(format!(
                    "{}-way at {:.2} uS: tlsh {:.4} < lsh {:.4}",
                    task.n_way,
                    level / MICRO,
                    tlsh.mean,
                    lsh.mean
                ));
            }
        }
    }
    ok &= within(t, Duration::from_secs(900));
    report(
        10,
        "fluctuation sweep shape",
        ok,
        format!("{}, {:?}", details.join("; "), t.elapsed()),
    );
    assert!(ok);
}

#[test]
fn criterion_11_cost_model_fixtures() {
    let cm = CostModel::default();
    let lat = latency_layers(&[784, 784, 196, 196], &cm);
    let lat_ok = (lat - 19.6e-6).abs() <= 1e-18;
    let search_ok = (cm.search_latency(true, true) - 25.0 * NANO).abs() <= 1e-21;
    let cell = energy(&[vec![0.2]], &ndarray::array![[150.0 * MICRO]], 10.0 * NANO).unwrap();
    let cell_ok = (cell - 60.0 * FEMTO).abs() <= 1e-27;

    let search_energy = |v_search: f64| {
        let cfg = TcamConfig {
            v_search,
            word_len: 64,
            ..Default::default()
        };
        let device = DeviceParams::default();
        let mut rng = rng_from_seed(11);
        let mut array = TcamArray::new(cfg, device).unwrap();
        for _ in 0..16 {
            array.append(&random_word(64, &mut rng), &mut rng).unwrap();
        }
        let q = random_word(64, &mut rng);
        array.search(&q, &device, &mut rng).unwrap().energy
    };
    let ratio = search_energy(0.2) / search_energy(0.02);

    let task_energy = |v_search: f64| {
        let mut p = Pipeline::default();
        p.tcam.v_search = v_search;
        let cfg = EpisodeConfig {
            repeats: 5,
            seed: 11,
            ..Default::default()
        };
        run_task(&cfg, &p, &dataset(0.1, 20))
            .unwrap()
            .energy_per_search
    };
    let task_ratio = task_energy(0.2) / task_energy(0.02);
    let scale_ok = (ratio / 100.0 - 1.0).abs() < 1e-9 && (task_ratio / 100.0 - 1.0).abs() < 1e-9;
    let ok = lat_ok && search_ok && cell_ok && scale_ok;
    report(
        11,
        "cost-model fixtures",
        ok,
        format!(
            "latency {:.4} us, search {:.2} ns, cell {:.3} fJ, search energy ratio {ratio:.9} (episodes {task_ratio:.9})",
            lat / MICRO,
            cm.search_latency(true, true) / NANO,
            cell / FEMTO
        ),
    );
    assert!(ok);
}
