//! Acceptance criteria, one line each. Exits nonzero if any fails.

mod common;

use std::cell::Cell;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use proptest::test_runner::{Config, TestCaseError, TestRunner};

use pouch_rig::control::{
    parse_program, parse_program_for, preset, validate_program, Limits, PRESET_NAMES,
};
use pouch_rig::gateway::{run_headless, serve, Rig, RigConfig, RunOptions};
use pouch_rig::plant::{PlantConfig, PlantState};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn headless(program: &str, duration: f64, out: &Path, seed: u64, rate: u32) -> Result<(), String> {
    run_headless(RunOptions {
        program: program.parse().unwrap(),
        duration: Some(duration),
        out: out.to_path_buf(),
        seed: Some(seed),
        rate: Some(rate),
        config: RigConfig::default(),
    })
    .map(|_| ())
    .map_err(|e| e.to_string())
}

fn validation_run() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("fig7.csv");
    let started = Instant::now();
    headless("preset:fig7_validation", 400.0, &path, 42, 1000)?;
    let elapsed = started.elapsed().as_secs_f64();
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let mut peak = [0.0f64; 5];
    let mut rows = 0;
    for line in text.lines().skip(1) {
        rows += 1;
        for (p, v) in peak.iter_mut().zip(line.split(',').skip(1)) {
            let v: f64 = v.parse().map_err(|_| format!("bad field in {line}"))?;
            *p = p.max(v.abs());
        }
    }
    let quiet = peak[..3].iter().cloned().fold(0.0, f64::max);
    let driven = (24.0..=36.0).contains(&peak[3]) && (24.0..=36.0).contains(&peak[4]);
    ensure(
        quiet < 5.0 && driven && rows == 400_000 && elapsed < 10.0,
        format!(
            "max|P1..P3| {quiet:.3} kPa (< 5), peak P4 {:.3} P5 {:.3} kPa (24..36), {rows} rows, {elapsed:.2} s (< 10)",
            peak[3], peak[4]
        ),
    )
}

fn fill_oracle() -> Outcome {
    let cfg = PlantConfig {
        regulator_tau: 1e-9,
        sensor_noise_sigma: 0.0,
        adc_bits: 31,
        ..PlantConfig::default()
    };
    let tau = cfg.fill_time_constant();
    let mut plant = PlantState::new(&cfg).map_err(|e| e.to_string())?;
    plant.set_regulator(&cfg, 1, 30.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..3000 {
        plant.step(&cfg);
        let expected = 30.0 * -(-plant.sim_time() / tau).exp_m1();
        let sampled = plant.read_sensor(&cfg, 1).map_err(|e| e.to_string())?.gauge;
        let state = plant.gauge(1).map_err(|e| e.to_string())?;
        for got in [sampled, state] {
            worst = worst.max((got - expected).abs() / expected);
        }
    }
    ensure(
        worst < 0.01,
        format!("tau_fill {tau:.4} s, worst relative error {:.4}% over 3000 samples (< 1%)", worst * 100.0),
    )
}

fn divider() -> Outcome {
    let cfg = PlantConfig {
        sensor_noise_sigma: 0.0,
        ..PlantConfig::default()
    };
    let mut plant = PlantState::new(&cfg).map_err(|e| e.to_string())?;
    plant.set_regulator(&cfg, 1, 30.0).map_err(|e| e.to_string())?;
    plant.set_valve(1, true).map_err(|e| e.to_string())?;
    for _ in 0..5000 {
        plant.step(&cfg);
    }
    let g = plant.gauge(1).map_err(|e| e.to_string())?;
    ensure((g - 10.0).abs() <= 0.3, format!("steady state {g:.4} kPa (10.0 ± 0.3)"))
}

fn conservation() -> Outcome {
    let cfg = PlantConfig::default();
    let mut plant = PlantState::new(&cfg).map_err(|e| e.to_string())?;
    for (ch, kpa) in [(1, 30.0), (2, 120.0), (4, 5.0)] {
        plant.set_regulator(&cfg, ch, kpa).map_err(|e| e.to_string())?;
    }
    for _ in 0..5000 {
        plant.step(&cfg);
    }
    let sealed = PlantConfig {
        fill_conductance: 0.0,
        ..cfg
    };
    let before = plant.total_mass(&sealed);
    for _ in 0..1_000_000 {
        plant.step(&sealed);
    }
    let drift = (plant.total_mass(&sealed) - before).abs() / before;
    ensure(drift < 1e-9, format!("relative drift {drift:.3e} over 10^6 steps (< 1e-9)"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    headless("preset:peristaltic_cut", 65.0, &a, 42, 1000)?;
    headless("preset:peristaltic_cut", 65.0, &b, 42, 1000)?;
    let a = std::fs::read(&a).map_err(|e| e.to_string())?;
    let b = std::fs::read(&b).map_err(|e| e.to_string())?;
    if a != b {
        return Err("identical runs produced different CSVs".into());
    }
    let text = String::from_utf8(a).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    if lines.next() != Some("time_s,P1_kPa,P2_kPa,P3_kPa,P4_kPa,P5_kPa") {
        return Err("header mismatch".into());
    }
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let fixed = fields.len() == 6
            && fields.iter().all(|f| {
                f.split_once('.').is_some_and(|(int, frac)| {
                    !int.is_empty()
                        && int.bytes().all(|c| c.is_ascii_digit())
                        && frac.len() == 6
                        && frac.bytes().all(|c| c.is_ascii_digit())
                })
            });
        if !fixed || fields[0] != format!("{:.6}", (i + 1) as f64 * 0.001) {
            return Err(format!("row {} malformed: {line}", i + 1));
        }
    }
    let rates = [1000, 500, 250, 200, 125, 100, 50, 40, 25, 20, 10, 8, 5, 4, 2, 1];
    for rate in rates {
        let path = dir.path().join(format!("r{rate}.csv"));
        headless("preset:diarrhea_seal", 4.0, &path, 0, rate)?;
        let rows = std::fs::read_to_string(&path).map_err(|e| e.to_string())?.lines().count() - 1;
        if rows != 4 * rate as usize {
            return Err(format!("rate {rate}: {rows} rows, expected {}", 4 * rate));
        }
    }
    Ok(format!(
        "{} bytes identical, all rows %.6f, row count exact at {} divisor rates",
        text.len(),
        rates.len()
    ))
}

fn parser_suite() -> Outcome {
    let cases = Cell::new(0u32);
    let mut runner = TestRunner::new(Config {
        cases: 1024,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&(common::program(), 0u8..16), |(p, variant)| {
            cases.set(cases.get() + 1);
            let text = p.render();
            let back = parse_program(&common::respell(&text, variant))
                .map_err(|d| TestCaseError::fail(format!("{d:?}")))?;
            if back != p {
                return Err(TestCaseError::fail(format!("round trip changed\n{text}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let rejections = [
        ("bad channel", "AT 0.0 REG 9 SET 10", (1, 12)),
        ("time >= period", "LOOP 3 PERIOD 1.0 {\n    AT 1.5 VALVE 1 OPEN\n}", (2, 8)),
        ("negative value", "AT 0.0 REG 1 SET -5", (1, 18)),
    ];
    for (what, text, (line, column)) in rejections {
        let diags = parse_program_for(text, 5).err().ok_or(format!("{what} accepted"))?;
        let at = diags.first().and_then(|d| d.position).map(|p| (p.line, p.column));
        if at != Some((line, column)) {
            return Err(format!("{what}: diagnostic at {at:?}, expected {:?}", (line, column)));
        }
    }
    let limits = Limits::default();
    for name in PRESET_NAMES {
        let p = preset(name).map_err(|e| e.to_string())?;
        let diags = validate_program(&p, &limits);
        if !diags.is_empty() {
            return Err(format!("preset {name}: {diags:?}"));
        }
    }
    Ok(format!(
        "{} round trips, 3 positioned rejections, {} presets clean",
        cases.get(),
        PRESET_NAMES.len()
    ))
}

fn protocol_fuzz_and_startup() -> Outcome {
    let server = serve(RigConfig::default(), 0).map_err(|e| e.to_string())?;
    let report = common::wire::fuzz_random_lines(server.local_addr(), 100_000, 2024);
    if !report.non_err.is_empty() || !report.alive_after {
        return Err(format!(
            "{} non-err replies, alive after: {}",
            report.non_err.len(),
            report.alive_after
        ));
    }

    let mut rig = Rig::bring_up(RigConfig::default()).map_err(|e| e.to_string())?;
    let program = parse_program_for("AT 0 REG 4 SET 30\nAT 0 REG 5 SET 30\nAT 10 END", 5)
        .map_err(|d| format!("{d:?}"))?;
    rig.load_program(program);
    rig.run().map_err(|e| e.to_string())?;
    rig.advance(3000).map_err(|e| e.to_string())?;
    let before = rig.plant().gauges().iter().cloned().fold(0.0, f64::max);
    rig.enable_supply();
    rig.advance(3000).map_err(|e| e.to_string())?;
    let after = rig.plant().gauges();
    ensure(
        before < 1.0 && after[3] > 25.0 && after[4] > 25.0,
        format!(
            "{} lines, {} err replies, {} disconnects, server alive; gauges {before:.3} kPa before supply, P4 {:.2} P5 {:.2} kPa after",
            report.lines, report.replies, report.disconnects, after[3], after[4]
        ),
    )
}

fn scheduler_property() -> Outcome {
    let cases = Cell::new(0u32);
    let mut runner = TestRunner::new(Config {
        cases: 1024,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&(common::grid_program(), common::cadence()), |(p, gaps)| {
            cases.set(cases.get() + 1);
            common::check_ticks(&p, 0.0, &gaps).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{} programs, exactly-once ordered emission at random cadence", cases.get()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("Validation run", validation_run),
        ("Fill oracle", fill_oracle),
        ("Steady-state divider", divider),
        ("Conservation", conservation),
        ("Determinism", determinism),
        ("Parser suite", parser_suite),
        ("Protocol fuzz + startup order", protocol_fuzz_and_startup),
        ("Scheduler", scheduler_property),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
