//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. Pass criterion
//! numbers as arguments to run a subset: `cargo test --test acceptance -- 1 4`.
//!
//! A FAIL line does not change the exit status unless `ACCEPTANCE_STRICT=1` is set, so
//! one unmet criterion does not stop cargo from running the remaining test binaries.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use geomae::harness::*;
use geomae::masking::*;
use geomae::metrics::{evaluate, read_rows, write_rows};
use geomae::objective::*;
use geomae::preprocess::build_hint;
use geomae::rng::rng_from;
use geomae::stafn::{random_input, ModelConfig, StafnModel};
use geomae_tensor::gradcheck::{central_difference, max_relative_error};
use geomae_tensor::{Tape, Tensor};
use rand::Rng as _;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_tensor(shape: &[usize], rng: &mut geomae::rng::Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)).unwrap()
}

/// N_l=4, N_in=3, N_out=2, d_model=8, two heads, one block.
fn gradient_model(seed: u64) -> StafnModel {
    let mut c = ModelConfig::desk(2, 1, 3, 2);
    c.d_model = 8;
    c.n_heads = 2;
    c.n_blocks = 1;
    StafnModel::new(c, 4, seed).unwrap()
}

fn gradient_batch(model: &StafnModel, k: usize, seed: u64) -> TrainBatch {
    let cfg = model.config().clone();
    let mut rng = rng_from(&[seed]);
    let base = random_input(&cfg, 4, &[2], &mut rng);
    let variants = (0..k).map(|_| random_input(&cfg, 4, &[2], &mut rng)).collect();
    let shape = [2, cfg.n_out, 4, cfg.d_out];
    let target = random_tensor(&shape, &mut rng);
    let target_missing = Some(Tensor::from_fn(&shape, |i| (i % 4 == 1) as u8 as f64).unwrap());
    TrainBatch { base, variants, target, target_missing }
}

fn fd_against_surrogate(model: &StafnModel, b: &TrainBatch, cfg: &LossConfig, grads: &[Tensor]) -> f64 {
    let sur = Surrogate::at(model, b);
    let mut worst: f64 = 0.0;
    for (p, g) in grads.iter().enumerate() {
        let fd = central_difference(
            |probe| {
                let mut m = model.clone();
                m.params_mut().values_mut()[p] = probe.clone();
                sur.value(&m, b, cfg)
            },
            &model.params().values()[p],
            1e-4,
        );
        worst = worst.max(max_relative_error(g.data(), fd.data(), 1e-6));
    }
    worst
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (seed, norm) in [(1u64, RegressionNorm::L1), (2, RegressionNorm::L2)] {
        let model = gradient_model(seed);
        let cfg = LossConfig { k: 2, norm, ..LossConfig::default() };
        let b = gradient_batch(&model, 2, seed + 10);
        let out = training_objective(&model, &b, &cfg).unwrap();
        worst = worst.max(fd_against_surrogate(&model, &b, &cfg, &out.grads));
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-4, format!("max relative error {:.2e}", worst))?;
    check(secs < 60.0, format!("took {:.1} s", secs))?;
    Ok(format!("max relative error {:.2e} over every parameter, {:.1} s", worst, secs))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for trial in 0..50u64 {
        let mut rng = rng_from(&[trial, 2]);
        let (d, n_in, n_out, nodes) = (2 * rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..4), rng.random_range(1..5));
        let cfg = literal_config(d, n_in, n_out);
        let model = StafnModel::new(cfg.clone(), nodes, trial).unwrap();
        let tape = Tape::new();
        let b = model.bind(&tape, false);
        let h = random_tensor(&[n_in, nodes, d], &mut rng);
        let hf = random_tensor(&[n_out, nodes, d], &mut rng);
        let (enc, dec) = (model.encoder_block(0), model.decoder_block(0));

        let s = b.spatial_attention(tape.constant(h.clone()), &enc.spatial).unwrap();
        let want = spatial_loops(&rep_from(&h), &AttnRef::load(&model, "enc.0.spatial"), &cfg);
        worst = worst.max(max_rep_diff(&rep_from(&s.to_tensor()), &want));

        let t = b.temporal_attention(tape.constant(h.clone()), &enc.temporal).unwrap();
        let want = temporal_loops(&rep_from(&h), &AttnRef::load(&model, "enc.0.temporal"), &cfg);
        worst = worst.max(max_rep_diff(&rep_from(&t.to_tensor()), &want));

        let f = b.forecast_attention(tape.constant(hf.clone()), tape.constant(h.clone()), &dec.forecast).unwrap();
        let want = forecast_loops(&rep_from(&hf), &rep_from(&h), &AttnRef::load(&model, "dec.0.forecast"), &cfg);
        worst = worst.max(max_rep_diff(&rep_from(&f.to_tensor()), &want));
    }
    check(worst < 1e-10, format!("max deviation {:.2e}", worst))?;
    Ok(format!("50 instances x 3 modules, max deviation {:.2e}", worst))
}

/// Auxiliary loss with the variant representations held constant, so only the
/// base-side branch can carry gradient.
fn base_side_gradient(model: &StafnModel, b: &TrainBatch, phi: f64) -> Vec<Tensor> {
    let hs: Vec<Tensor> = b.variants.iter().map(|v| forward(model, v).1).collect();
    let tape = Tape::new();
    let bound = model.bind(&tape, true);
    let hb = bound.forward(&b.base).unwrap().h_fur;
    let consts: Vec<_> = hs.into_iter().map(|h| tape.constant(h)).collect();
    let loss = mae_aux_loss(hb, &consts, phi).unwrap();
    let mut g = tape.backward(loss).unwrap();
    bound.param_vars().iter().map(|&p| g.take(p)).collect()
}

fn criterion_3() -> Outcome {
    let model = gradient_model(3);
    let b = gradient_batch(&model, 2, 30);
    let zero = base_side_gradient(&model, &b, 0.0);
    let nonzero = zero.iter().flat_map(|g| g.data()).filter(|&&v| v != 0.0).count();
    check(nonzero == 0, format!("{} nonzero base-side entries at phi=0", nonzero))?;

    let phi = 0.5;
    let live = base_side_gradient(&model, &b, phi);
    let mass: f64 = live.iter().flat_map(|g| g.data()).map(|v| v.abs()).sum();
    check(mass > 0.0, "phi branch carries no gradient")?;
    let hs: Vec<Tensor> = b.variants.iter().map(|v| forward(&model, v).1).collect();
    let mut worst: f64 = 0.0;
    for (p, g) in live.iter().enumerate() {
        let fd = central_difference(
            |probe| {
                let mut m = model.clone();
                m.params_mut().values_mut()[p] = probe.clone();
                let hb = forward(&m, &b.base).1;
                hs.iter().map(|h| phi * mse(&hb, h)).sum::<f64>() / hs.len() as f64
            },
            &model.params().values()[p],
            1e-4,
        );
        worst = worst.max(max_relative_error(g.data(), fd.data(), 1e-6));
    }
    check(worst < 1e-4, format!("phi branch relative error {:.2e}", worst))?;
    Ok(format!("phi=0 base-side gradient exactly zero; phi=0.5 branch matches differences to {:.2e}", worst))
}

fn criterion_4() -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (ri, &rate) in [0.05, 0.25, 0.5, 0.75, 0.95].iter().enumerate() {
        for i in 0..1000u64 {
            let mut rng = rng_from(&[4, ri as u64, i]);
            let shape = [rng.random_range(1..9), rng.random_range(1..13), rng.random_range(1..5)];
            let pattern = Pattern::ALL[(i % 4) as usize];
            let m = generate(pattern, &shape, rate, BlockLengths { min_len: 1, max_len: None }, &mut rng).unwrap();
            let missing = m.sum();
            if missing == 0.0 || missing == m.len() as f64 {
                continue;
            }
            let h = build_hint(&m).unwrap().h;
            let n = h.len() as f64;
            let mean = h.data().iter().sum::<f64>() / n;
            let std = (h.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            worst = worst.max(mean.abs()).max((std - 1.0).abs());
            checked += 1;
        }
    }
    check(worst <= 1e-12, format!("worst deviation {:.2e}", worst))?;
    Ok(format!("{} non-degenerate hints, worst deviation {:.2e}", checked, worst))
}

fn runs(col: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut len = 0;
    for &v in col {
        if v == 1.0 {
            len += 1;
        } else if len > 0 {
            out.push(len);
            len = 0;
        }
    }
    if len > 0 {
        out.push(len);
    }
    out
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();
    // entry-level rate within four binomial standard deviations of the sampling unit
    let bound = |rate: f64, units: usize| (4.0 * (rate * (1.0 - rate) / units as f64).sqrt()).max(1e-12);
    for &rate in &[0.1f64, 0.5, 0.9] {
        let mut rng = rng_from(&[5, rate.to_bits()]);
        let p = gen_point(&[100, 100, 10], rate, &mut rng).unwrap();
        let f = missing_fraction(&p);
        check((f - rate).abs() <= 0.01, format!("point {} realized {}", rate, f))?;

        let r = gen_row(&[200, 100, 3], rate, &mut rng).unwrap();
        let f = missing_fraction(&r);
        check((f - rate).abs() <= bound(rate, 200 * 100), format!("row {} realized {}", rate, f))?;
        check(r.data().chunks(3).all(|c| c.iter().all(|&v| v == c[0])), "row mask not constant over features")?;

        let c = gen_column(&[500, 12, 20], rate, &mut rng).unwrap();
        let f = missing_fraction(&c);
        check((f - rate).abs() <= bound(rate, 500 * 20), format!("column {} realized {}", rate, f))?;
        for node in 0..500 {
            for feat in 0..20 {
                let v = c.get(&[node, 0, feat]);
                check((0..12).all(|s| c.get(&[node, s, feat]) == v), "column mask varies in time")?;
            }
        }

        let (n, t, min_len) = (400, 24, 3);
        let b = gen_block(&[n, t, 5], rate, &mut rng, min_len, t).unwrap();
        let f = missing_fraction(&b);
        check(f >= rate && f <= rate + t as f64 / (n * t) as f64, format!("block {} realized {}", rate, f))?;
        for node in 0..n {
            let col: Vec<f64> = (0..t).map(|s| b.get(&[node, s, 0])).collect();
            check(runs(&col).iter().all(|&l| l >= min_len), "block run shorter than min_len")?;
            for s in 0..t {
                check((0..5).all(|d| b.get(&[node, s, d]) == col[s]), "block mask not constant over features")?;
            }
        }
        notes.push(format!("{}: point {:.4}", rate, missing_fraction(&p)));
    }
    Ok(format!("all four generators calibrated and structured at 0.1/0.5/0.9 ({})", notes.join(", ")))
}

fn permute_nodes(t: &Tensor, perm: &[usize]) -> Tensor {
    let s = t.shape().to_vec();
    let inner: usize = s[1..].iter().product();
    let mut out = Vec::with_capacity(t.len());
    for &p in perm {
        out.extend_from_slice(&t.data()[p * inner..(p + 1) * inner]);
    }
    Tensor::new(s, out).unwrap()
}

fn permute_axis1(t: &Tensor, perm: &[usize]) -> Tensor {
    permute_nodes(&t.permute(&[1, 0, 2]).unwrap(), perm).permute(&[1, 0, 2]).unwrap()
}

fn criterion_6() -> Outcome {
    // node permutation at desk scale
    let cfg = ModelConfig::desk(3, 1, 12, 12);
    let nodes = 8;
    let model = StafnModel::new(cfg.clone(), nodes, 6).unwrap();
    let perm = [3, 7, 0, 5, 1, 6, 2, 4];
    let mut permuted = model.clone();
    let v = model.params().get("node_embedding").unwrap().clone();
    permuted.params_mut().set("node_embedding", permute_nodes(&v, &perm)).unwrap();
    let input = random_input(&cfg, nodes, &[], &mut rng_from(&[6]));
    let mut pin = input.clone();
    pin.x_hat = permute_nodes(&input.x_hat, &perm);
    pin.hint = permute_nodes(&input.hint, &perm);
    let (a, ah) = forward(&model, &input);
    let (b, bh) = forward(&permuted, &pin);
    let dev = permute_axis1(&a, &perm).max_abs_diff(&b).max(permute_axis1(&ah, &perm).max_abs_diff(&bh));
    check(dev < 1e-8, format!("permutation deviation {:.2e}", dev))?;

    // locality: spatial attention mixes only within a step, temporal/forecast only within a node
    let small = {
        let mut c = ModelConfig::desk(2, 1, 3, 2);
        c.d_model = 8;
        c
    };
    let m = StafnModel::new(small, 4, 7).unwrap();
    let tape = Tape::new();
    let bd = m.bind(&tape, false);
    let mut rng = rng_from(&[6, 1]);
    let h = random_tensor(&[3, 4, 8], &mut rng);
    let fur = tape.constant(random_tensor(&[2, 4, 8], &mut rng));
    let enc = m.encoder_block(0);
    let fw = &m.decoder_block(0).forecast;
    for t in 0..3 {
        let mut z = h.clone();
        for n in 0..4 {
            for c in 0..8 {
                z.set(&[t, n, c], 0.0);
            }
        }
        let x = bd.spatial_attention(tape.constant(h.clone()), &enc.spatial).unwrap().to_tensor();
        let y = bd.spatial_attention(tape.constant(z), &enc.spatial).unwrap().to_tensor();
        for s in 0..3 {
            check((x.index_first(s) == y.index_first(s)) == (s != t), "spatial attention leaks across time")?;
        }
    }
    for j in 0..4 {
        let mut p = h.clone();
        for s in 0..3 {
            for c in 0..8 {
                p.set(&[s, j, c], p.get(&[s, j, c]) + 0.5);
            }
        }
        let pairs = [
            (
                bd.temporal_attention(tape.constant(h.clone()), &enc.temporal).unwrap().to_tensor(),
                bd.temporal_attention(tape.constant(p.clone()), &enc.temporal).unwrap().to_tensor(),
            ),
            (
                bd.forecast_attention(fur, tape.constant(h.clone()), fw).unwrap().to_tensor(),
                bd.forecast_attention(fur, tape.constant(p.clone()), fw).unwrap().to_tensor(),
            ),
        ];
        for (x, y) in pairs {
            let (x, y) = (x.permute(&[1, 0, 2]).unwrap(), y.permute(&[1, 0, 2]).unwrap());
            for n in 0..4 {
                check((x.index_first(n) == y.index_first(n)) == (n != j), "temporal attention leaks across nodes")?;
            }
        }
    }

    // without blocks the decoder state depends on the future calendar only
    let mut c0 = ModelConfig::desk(3, 1, 12, 12);
    c0.n_blocks = 0;
    let m0 = StafnModel::new(c0.clone(), 5, 8).unwrap();
    let a = random_input(&c0, 5, &[], &mut rng_from(&[60]));
    let mut other = random_input(&c0, 5, &[], &mut rng_from(&[61]));
    other.calendar_fur = a.calendar_fur.clone();
    check(forward(&m0, &a).1 == forward(&m0, &other).1, "decoder init depends on readings")?;
    Ok(format!("permutation deviation {:.2e} at N_l=8; locality and decoder-init independence hold", dev))
}

fn criterion_7() -> Outcome {
    let t = |v: &[f64]| Tensor::new(vec![v.len()], v.to_vec()).unwrap();
    let r = evaluate(&t(&[1.0, 2.0, 6.0]), &t(&[2.0, 2.0, 2.0]), None).unwrap();
    check((r.mae - 5.0 / 3.0).abs() < 1e-12, "worked MAE")?;
    check((r.rmse - (17.0f64 / 3.0).sqrt()).abs() < 1e-12, "worked RMSE")?;
    check((r.smape - (2.0 / 3.0 + 1.0) / 3.0).abs() < 1e-8, "worked SMAPE")?;
    let r = evaluate(&t(&[3.0, -1.0]), &t(&[1.0, 1.0]), Some(&t(&[0.0, 1.0]))).unwrap();
    check(r.mae == 2.0 && r.rmse == 2.0 && r.count == 1, "worked masked example")?;

    for i in 0..1000u64 {
        let mut rng = rng_from(&[7, i]);
        let n = rng.random_range(1..50);
        let yh = random_tensor(&[n], &mut rng).map(|v| v * 50.0).unwrap();
        let y = random_tensor(&[n], &mut rng).map(|v| v * 50.0).unwrap();
        let mut m = Tensor::from_fn(&[n], |_| (rng.random::<f64>() < 0.4) as u8 as f64).unwrap();
        m.data_mut()[0] = 0.0;
        let a = evaluate(&yh, &y, Some(&m)).unwrap();
        check(a.rmse >= a.mae - 1e-12, format!("RMSE < MAE on batch {}", i))?;
        // adversarial: masked targets pushed to huge values, masked predictions too
        let mut y2 = y.clone();
        let mut yh2 = yh.clone();
        for j in 0..n {
            if m.data()[j] == 1.0 {
                y2.data_mut()[j] = 1e12;
                yh2.data_mut()[j] = -1e12;
            }
        }
        check(evaluate(&yh2, &y2, Some(&m)).unwrap() == a, format!("masked entries leaked on batch {}", i))?;
    }
    Ok("worked examples exact; RMSE >= MAE and mask honesty on 1000 random batches".into())
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let cfg = TrainConfig { train: TrainSchedule { epochs: 30, ..TrainConfig::desk().train }, ..TrainConfig::desk() };
    let splits = prepare(&cfg, &load_data(&cfg).unwrap()).unwrap();
    let mut t = Trainer::new(&cfg, &splits).unwrap();
    let initial = t.history().initial_val.unwrap().mae;
    let mut best = initial;
    while !t.finished() {
        let rec = t.run_epoch().unwrap();
        best = best.min(rec.val.mae);
        if best <= 0.75 * initial {
            break;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let drop = 1.0 - best / initial;
    let summary = format!(
        "validation MAE {:.3} -> {:.3} ({:.1}% lower) after {} epoch(s), {:.0} s",
        initial,
        best,
        100.0 * drop,
        t.epoch(),
        secs
    );
    check(drop >= 0.25, summary.clone())?;
    check(secs < 600.0, summary.clone())?;
    Ok(summary)
}

/// Desk model on a shortened schedule so twenty trainings fit on one core.
fn ablation_config() -> TrainConfig {
    let mut cfg = TrainConfig::desk();
    cfg.train.batch_size = 16;
    cfg.train.steps_per_epoch = 15;
    cfg.train.epochs = 8;
    cfg.eval.patterns = vec![Pattern::Point];
    cfg.eval.rates = vec![0.25, 0.5, 0.75, 0.9];
    cfg
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let cfg = ablation_config();
    let splits = prepare(&cfg, &load_data(&cfg).unwrap()).unwrap();
    let rows = ablate(&cfg, &splits, &Variant::ALL, &[0, 1, 2, 3, 4], None).unwrap();
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_ablation");
    std::fs::create_dir_all(&dir).unwrap();
    let (md, charts) = render(&rows);
    let checks = ordering_checks(&rows);
    let mut report = md;
    report.push_str("### Ordering\n\n");
    for c in &checks {
        report.push_str(&format!("- {} {}\n", if c.holds { "PASS" } else { "FAIL" }, c.description));
    }
    std::fs::write(dir.join("ablation.csv"), write_rows(&rows)).unwrap();
    std::fs::write(dir.join("report.md"), &report).unwrap();
    for (stem, svg) in &charts {
        std::fs::write(dir.join(format!("{}.svg", stem)), svg).unwrap();
    }
    for c in &checks {
        println!("      {} {}", if c.holds { "ok  " } else { "FAIL" }, c.description);
    }
    let held = checks.iter().filter(|c| c.holds).count();
    let summary = format!(
        "{}/{} orderings hold over 5 seeds, report at {}, {:.0} s",
        held,
        checks.len(),
        dir.display(),
        start.elapsed().as_secs_f64()
    );
    check(!checks.is_empty() && held == checks.len(), summary.clone())?;
    Ok(summary)
}

fn criterion_10() -> Outcome {
    let mut cfg = TrainConfig::desk();
    cfg.model.d_model = 8;
    cfg.model.mlp_hidden = 16;
    cfg.train.batch_size = 8;
    cfg.train.steps_per_epoch = 4;
    cfg.train.epochs = 3;
    cfg.eval.seeds = 2;
    let splits = prepare(&cfg, &load_data(&cfg).unwrap()).unwrap();
    let a = train(&cfg, &splits, None).unwrap();
    let b = train(&cfg, &splits, None).unwrap();
    let bits = |h: &History| h.loss_curve().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    check(bits(&a.history) == bits(&b.history), "loss curves differ")?;
    check(a.history == b.history, "histories differ")?;
    let ra = write_rows(&evaluate_grid(&a.model, &splits.stats, &splits.test, &cfg, "full").unwrap());
    let rb = write_rows(&evaluate_grid(&b.model, &splits.stats, &splits.test, &cfg, "full").unwrap());
    check(ra == rb, "result tables differ")?;
    check(read_rows(&ra).is_ok(), "result table does not parse")?;

    let mut straight = Trainer::new(&cfg, &splits).unwrap();
    straight.run_epoch().unwrap();
    let bytes = straight.checkpoint().to_bytes().unwrap();
    let next = straight.peek_next_loss().unwrap();
    straight.run_epoch().unwrap();
    let mut resumed = Trainer::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap(), &splits).unwrap();
    check(resumed.peek_next_loss().unwrap().to_bits() == next.to_bits(), "resumed next-step loss differs")?;
    resumed.run_epoch().unwrap();
    check(resumed.model().params().values() == straight.model().params().values(), "resumed weights differ")?;
    check(resumed.history() == straight.history(), "resumed history differs")?;
    Ok("identical loss curves and result tables; resume bit-exact for the next step and epoch".into())
}

const CRITERIA: [(usize, &str, fn() -> Outcome); 10] = [
    (1, "gradient oracle", criterion_1),
    (2, "attention oracles", criterion_2),
    (3, "stop-gradient semantics", criterion_3),
    (4, "hint invariance", criterion_4),
    (5, "generator calibration", criterion_5),
    (6, "structural invariants", criterion_6),
    (7, "metric correctness", criterion_7),
    (8, "end-to-end learnability", criterion_8),
    (9, "directional ablation", criterion_9),
    (10, "reproducibility", criterion_10),
];

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (n, name, f) in CRITERIA {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        ran += 1;
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {}", msg))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({}): {}", n, name, detail),
            Err(detail) => {
                failed.push(n.to_string());
                println!("FAIL criterion {} ({}): {}", n, name, detail);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", ran - failed.len(), ran);
    if !failed.is_empty() {
        println!("acceptance: failing criteria {}", failed.join(", "));
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
