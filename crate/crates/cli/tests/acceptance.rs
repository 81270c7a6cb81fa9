//! Acceptance suite: one pass/fail line per criterion.
//!
//! Run with `cargo test -p gptw --test acceptance`.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gptw_cli::{ReportDocument, TheoryDocument};
use gptw_core::composites::{self, BipartiteState, CompositeRule, CompositeSpace};
use gptw_core::convex::{StateSpace, StateVector};
use gptw_core::groups::{self, ClauseStatus, GroupKind, Transformation, TransformationGroup};
use gptw_core::postulates::{self, CheckOptions, Status};
use gptw_core::sampling;
use gptw_core::theories::{self, builtin, Builtin, EffectDeclaration, Theory};
use nalgebra::{Complex, DMatrix, DVector};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn gptw(args: &[&str], path: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gptw"))
        .env_remove(gptw_cli::SEED_ENV)
        .args(args)
        .arg(path)
        .output()
        .expect("binary runs")
}

fn postulate_matrix() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    // None: the criterion does not constrain that check.
    let expect: [(&str, [Option<Status>; 5]); 6] = {
        const P: Option<Status> = Some(Status::Pass);
        const F: Option<Status> = Some(Status::Fail);
        [
            ("qubit", [P, P, P, P, P]),
            ("classical(2)", [F, P, P, P, None]),
            ("square_gbit", [F, None, F, None, None]),
            ("ball(2)", [P, P, P, P, F]),
            ("ball(4)", [P, P, P, P, F]),
            ("ball(5)", [P, P, P, P, F]),
        ]
    };
    for (name, want) in expect {
        let doc = dir.path().join(format!("{name}.json"));
        let out = Command::new(env!("CARGO_BIN_EXE_gptw"))
            .args(["builtin", name, "--out"])
            .arg(&doc)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "builtin {name} failed");
        let report_path = dir.path().join(format!("{name}.report.json"));
        let out = gptw(&["check", "--out", report_path.to_str().unwrap()], &doc);
        let text = std::fs::read_to_string(&report_path).map_err(|e| format!("{name}: {e}"))?;
        let report: ReportDocument = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        ensure!(out.status.code() == Some(report.exit_code), "{name}: exit code mismatch");
        ensure!(report.checks.len() == 5, "{name}: {} checks", report.checks.len());
        for (entry, want) in report.checks.iter().zip(want) {
            let r = &entry.report;
            if let Some(want) = want {
                ensure!(r.status == want, "{name} {}: {:?}, wanted {:?} ({})", r.id, r.status, want, r.reason);
            }
        }
        if name == "classical(2)" {
            ensure!(report.checks[0].report.reason.contains("disconnected"), "classical(2) cr reason");
        }
        if name == "square_gbit" {
            let nse = &report.checks[2].report;
            let w = nse.witness.as_ref().ok_or("square nse has no witness")?;
            let theory = TheoryDocument::load(&doc).map_err(|e| e.to_string())?.to_theory().map_err(|e| e.to_string())?;
            let replay = w.replay(&theory, 2.0 * nse.tolerance).map_err(|e| e.to_string())?;
            ensure!(replay.reproduced, "square nse witness does not replay");
        }
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(60), "took {t:?}");
    Ok(format!("6 theories, square witness replays, {:.1} s", t.as_secs_f64()))
}

fn interaction_scan() -> Outcome {
    let mut notes = Vec::new();
    for (d, want) in [(2, Some(2)), (4, Some(12)), (3, None)] {
        let r = postulates::interaction_scan(d, 0, 0).map_err(|e| e.to_string())?;
        ensure!(r.stable, "d={d}: rank not stable {:?}", r.dims_by_level);
        let n = r.dims_by_level.len();
        ensure!(n >= 3, "d={d}: fewer than two doublings");
        let tail = &r.dims_by_level[n - 3..];
        ensure!(tail.iter().all(|&x| x == tail[0]), "d={d}: no plateau {:?}", r.dims_by_level);
        match want {
            Some(dim) => {
                ensure!(
                    r.solution_dim == dim && r.local_dim == dim,
                    "d={d}: solution {} local {}",
                    r.solution_dim,
                    r.local_dim
                );
            }
            None => {
                ensure!(r.solution_dim >= 15 && r.solution_dim > r.local_dim, "d=3: solution {}", r.solution_dim);
                ensure!(r.contains_quantum == Some(true), "d=3: su(4) not contained");
                let res = r.quantum_constraint_residual.unwrap_or(f64::INFINITY);
                ensure!(res < 1e-10, "d=3: quantum residual {res:e}");
            }
        }
        notes.push(format!("d={d}: {}", r.solution_dim));
    }
    Ok(notes.join(", "))
}

fn distortion(rng: &mut sampling::SeededRng, cond: f64, i: usize) -> DMatrix<f64> {
    let u = sampling::random_rotation(rng, 4);
    let v = sampling::random_rotation(rng, 4);
    let mut s = DVector::from_element(4, 1.0);
    s[1] = cond;
    s[2] = 1.0 + (cond - 1.0) * ((i as f64 * 0.618_033_988_75) % 1.0);
    s[3] = 1.0 + (cond - 1.0) * ((i as f64 * 0.414_213_562_37) % 1.0);
    u * DMatrix::from_diagonal(&s) * v
}

fn reconstruction() -> Outcome {
    let start = Instant::now();
    let mut rng = sampling::rng(2024);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let cond = 1.5 + 8.5 * (i as f64 / 19.0);
        let l0 = distortion(&mut rng, cond, i);
        let space = StateSpace::ellipsoid(l0.clone()).map_err(|e| e.to_string())?;
        let group = TransformationGroup::named_ball(3)
            .and_then(|g| g.conjugated(&l0))
            .map_err(|e| e.to_string())?;
        let theory = Theory::new(
            format!("distortion {i}"),
            space,
            group,
            EffectDeclaration::FullDual,
            CompositeRule::SeparableHull,
        )
        .map_err(|e| e.to_string())?;
        let report = postulates::reconstruct_pipeline(&theory, &CheckOptions::default()).map_err(|e| e.to_string())?;
        ensure!(
            report.passed,
            "distortion {i}: {:?}",
            report.stages.iter().map(|s| (s.id.clone(), s.status)).collect::<Vec<_>>()
        );
        let l = report.frame_matrix().ok_or("no frame map")?;
        // Pure states of the distorted space are L0 (1, n) for unit n.
        for _ in 0..200 {
            let n = sampling::unit_vector(&mut rng, 3);
            let b = DVector::from_iterator(4, std::iter::once(1.0).chain(n.iter().copied()));
            let y = &l * (&l0 * b);
            let norm = y.rows(1, 3).norm() / y[0];
            worst = worst.max((norm - 1.0).abs());
        }
    }
    let t = start.elapsed();
    ensure!(worst < 1e-7, "max | |ω̂| - 1 | = {worst:e}");
    ensure!(t < Duration::from_secs(30), "took {t:?}");
    Ok(format!("20 distortions, max | |ω̂| - 1 | = {worst:.1e}, {:.1} s", t.as_secs_f64()))
}

fn encodings() -> Outcome {
    let mut worst: f64 = 0.0;
    for (s, t) in [
        (Builtin::Classical(2), Builtin::Quantum(1)),
        (Builtin::Classical(3), Builtin::Quantum(2)),
        (Builtin::Ball(3), Builtin::Qubit),
    ] {
        let (src, tgt) = (builtin(s).map_err(|e| e.to_string())?, builtin(t).map_err(|e| e.to_string())?);
        let enc = theories::canonical_encoding(&src, &tgt).map_err(|e| e.to_string())?;
        let r = groups::check_reversible_pair(&enc.t, &enc.f, &enc.source, &enc.target, 1000, 0)
            .map_err(|e| e.to_string())?;
        for c in &r.clauses {
            ensure!(c.status != ClauseStatus::Fail, "{s}->{t}: clause {} residual {:e}", c.clause, c.residual);
            ensure!(c.residual < 1e-10, "{s}->{t}: clause {} residual {:e}", c.clause, c.residual);
            worst = worst.max(c.residual);
        }
        ensure!(r.encoding_residual < 1e-10, "{s}->{t}: F∘T residual {:e}", r.encoding_residual);
    }

    let src = builtin(Builtin::Classical(2)).map_err(|e| e.to_string())?;
    let tgt = builtin(Builtin::Qubit).map_err(|e| e.to_string())?;
    let enc = theories::canonical_encoding(&src, &tgt).map_err(|e| e.to_string())?;
    let mut f = enc.f.matrix.clone();
    let last = f.nrows() - 1;
    f.row_mut(last).fill(0.0);
    let f = Transformation::new(f);
    let r = groups::check_reversible_pair(&enc.t, &f, &enc.source, &enc.target, 1000, 0).map_err(|e| e.to_string())?;
    let c4 = r.clause(4);
    ensure!(c4.status == ClauseStatus::Fail, "truncated F passes clause 4");
    ensure!(r.require_encoding().is_err(), "truncated F accepted as an encoding");
    let w = c4.witness.as_ref().ok_or("clause 4 has no witness")?;
    let back = &enc.t.matrix * (&f.matrix * w);
    let miss = (back - w).amax();
    ensure!(miss > r.tolerance, "clause 4 witness does not replay ({miss:e})");
    Ok(format!("3 encodings, max residual {worst:.1e}, truncated F replays at {miss:.2}"))
}

fn composites() -> Outcome {
    let names = [
        Builtin::Classical(2),
        Builtin::Classical(3),
        Builtin::SquareGbit,
        Builtin::Qubit,
        Builtin::Ball(4),
        Builtin::Quantum(2),
    ];
    let spaces: Vec<StateSpace> = names
        .iter()
        .map(|&b| builtin(b).map(|t| t.space))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for a in &spaces {
        for b in &spaces {
            let c = CompositeSpace::new(vec![a.clone(), b.clone()], CompositeRule::SeparableHull)
                .map_err(|e| e.to_string())?;
            ensure!(c.k == a.k() * b.k(), "k_AB {} != {} * {}", c.k, a.k(), b.k());
        }
    }

    let mut rng = sampling::rng(7);
    let mut round_trip: f64 = 0.0;
    for a in &spaces {
        for b in &spaces {
            for _ in 0..20 {
                let (x, y) = (a.random_normalized(&mut rng), b.random_normalized(&mut rng));
                let (ma, mb) = composites::marginals(&composites::tensor_state(&x, &y), a, b).map_err(|e| e.to_string())?;
                round_trip = round_trip.max((ma.coords - &x.coords).amax()).max((mb.coords - &y.coords).amax());
            }
        }
    }
    ensure!(round_trip < 1e-12, "tensor/marginal round trip {round_trip:e}");

    let q = StateSpace::quantum(1).map_err(|e| e.to_string())?;
    let singlet = BipartiteState::singlet().to_vector();
    let (ma, mb) = composites::marginals(&singlet, &q, &q).map_err(|e| e.to_string())?;
    let half = DMatrix::<Complex<f64>>::identity(2, 2) * Complex::new(0.5, 0.0);
    for m in [ma, mb] {
        let rho = theories::bloch_to_density(&m, 1).map_err(|e| e.to_string())?.matrix;
        let dev = (rho - &half).camax();
        ensure!(dev < 1e-12, "singlet marginal off by {dev:e}");
    }

    let start = Instant::now();
    for i in 0..10_000u64 {
        let w = composites::random_separable(&q, &q, &mut rng);
        let v = composites::product_effect_consistency(&w, &q, &q, &[], &[], 1e-9, i)
            .map_err(|e| e.to_string())?;
        ensure!(v.passed, "separable state {i} fails: [{}, {}]", v.min_value, v.max_value);
    }
    let separable_time = start.elapsed();
    let foil = BipartiteState {
        u: 1.0,
        alpha: DVector::zeros(3),
        beta: DVector::zeros(3),
        gamma: DMatrix::identity(3, 3) * -1.5,
    }
    .to_vector();
    let v = composites::product_effect_consistency(&foil, &q, &q, &[], &[], 1e-9, 0).map_err(|e| e.to_string())?;
    ensure!(!v.passed && v.witness.is_some(), "γ = -1.5 I foil passes");
    Ok(format!(
        "{} pairs, 10^4 separable in {:.1} s, foil min {:.3}",
        spaces.len() * spaces.len(),
        separable_time.as_secs_f64(),
        v.min_value
    ))
}

fn invariant_metric() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut which: Vec<Builtin> = (2..=8).map(Builtin::Classical).collect();
    which.push(Builtin::SquareGbit);
    for b in which {
        let t = builtin(b).map_err(|e| e.to_string())?;
        ensure!(matches!(t.group.kind(), GroupKind::Finite(_)), "{b}: group is not finite");
        let exact = groups::haar_average_metric(&t.group).map_err(|e| format!("{b}: {e}"))?;
        let comm = groups::commutant_metric(&t.group, 0).map_err(|e| format!("{b}: {e}"))?;
        // Compare up to scale.
        let scale = exact.dot(&comm) / comm.dot(&comm);
        let dev = (&exact - &comm * scale).norm() / exact.norm();
        ensure!(dev < 1e-8, "{b}: relative deviation {dev:e}");
        worst = worst.max(dev);
        count += 1;
    }
    Ok(format!("{count} finite groups, max relative deviation {worst:.1e}"))
}

fn basis_state(space: &StateSpace, index: usize) -> StateVector {
    let p = space.pauli().expect("quantum space");
    let mut psi = DVector::from_element(4, Complex::new(0.0, 0.0));
    psi[index] = Complex::new(1.0, 0.0);
    StateVector::new(p.pure_coefficients(&psi))
}

fn quantum_self_consistency() -> Outcome {
    let space = StateSpace::quantum(2).map_err(|e| e.to_string())?;
    let mut candidates: Vec<StateVector> = (0..4).map(|i| basis_state(&space, i)).collect();
    candidates.extend(space.sample_pure(2, 3));
    let d = space.max_distinguishable(&candidates).map_err(|e| e.to_string())?;
    ensure!(d.c == 4 && !d.lower_bound, "c = {} (lower bound {})", d.c, d.lower_bound);
    ensure!(space.k() == 16 && space.k() == d.c * d.c, "k = {}", space.k());
    let r = postulates::verify_quantum_generators(10_000, 0, 1e-9).map_err(|e| e.to_string())?;
    ensure!(r.status == Status::Pass, "generators: {}", r.reason);
    let violations = r.details.get("violations").map(String::as_str);
    ensure!(violations == Some("0"), "violations: {violations:?}");
    Ok("c = 4, k = 16, 0 generator violations at 10^4 samples".into())
}

fn main() -> ExitCode {
    // Honour the standard harness flags cargo may forward.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("postulate matrix", postulate_matrix),
        ("interaction scan", interaction_scan),
        ("reconstruction", reconstruction),
        ("encodings", encodings),
        ("composites", composites),
        ("invariant metric", invariant_metric),
        ("quantum self-consistency", quantum_self_consistency),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({secs:.1} s) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({secs:.1} s) {why}", i + 1);
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
