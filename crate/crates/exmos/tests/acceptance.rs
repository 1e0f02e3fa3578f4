//! End-to-end acceptance criteria, driven through the CLI binary and the
//! HTTP router. Each criterion prints one PASS/FAIL line.

mod support;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use exmos_core::dataset::{DataTable, FeatureMeta, SplitSpec};
use exmos_core::quality::{correct_issue, quality_score, IssueKind, IssueReport, QualityConfig, QualityLevel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use support::{app, exmos, exmos_json, get, new_session, pima, pima_csv, pima_meta, post, post_empty};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    // Written to the raw stderr handle so the lines show without --nocapture.
    let line = match &result {
        Ok(detail) => format!("PASS {name}: {detail}"),
        Err(detail) => format!("FAIL {name}: {detail}"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    result.is_ok()
}

fn block_on<F: std::future::Future>(f: F) -> F::Output {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap().block_on(f)
}

fn paths() -> (String, String) {
    (pima_csv().display().to_string(), pima_meta().display().to_string())
}

fn baseline() -> Outcome {
    let (csv, meta) = paths();
    let start = Instant::now();
    let out = exmos(&["train", "--data", &csv, "--meta", &meta]);
    let elapsed = start.elapsed();
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let m: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let (train, test) = (m["train_accuracy"].as_f64().unwrap(), m["test_accuracy"].as_f64().unwrap());
    ensure((0.74..=0.84).contains(&test), || format!("test accuracy {test} outside [0.74, 0.84]"))?;
    ensure(train >= test, || format!("train {train} < test {test}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("test {test:.4}, train {train:.4}, {} samples, {elapsed:.2?}", m["n_train_samples"]))
}

fn expected_level(score: f64) -> QualityLevel {
    if score > 80.0 {
        QualityLevel::Good
    } else if score >= 50.0 {
        QualityLevel::Moderate
    } else {
        QualityLevel::Poor
    }
}

fn reports(subs: &[f64; 6]) -> Vec<IssueReport> {
    IssueKind::ALL
        .iter()
        .zip(subs)
        .map(|(&kind, &subscore)| IssueReport {
            kind,
            subscore,
            impact: 100.0 - subscore,
            affected_features: vec![],
            affected_row_ids: vec![],
            correctable: kind.is_correctable(),
            description: String::new(),
        })
        .collect()
}

fn quality_thresholds() -> Outcome {
    let boundaries = [(80.0, QualityLevel::Moderate), (80.01, QualityLevel::Good), (50.0, QualityLevel::Moderate), (49.99, QualityLevel::Poor)];
    for (score, level) in boundaries {
        let q = quality_score(reports(&[score; 6])).map_err(|e| e.to_string())?;
        ensure(q.level == level, || format!("score {score}: {:?}, expected {level:?}", q.level))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = 20_000;
    for _ in 0..cases {
        let mut subs = [0.0; 6];
        for s in &mut subs {
            *s = match rng.gen_range(0..4) {
                0 => rng.gen_range(0.0..=100.0),
                1 => [0.0, 50.0, 80.0, 100.0][rng.gen_range(0..4)],
                2 => 80.0 + rng.gen_range(-1e-6..1e-6),
                _ => 50.0 + rng.gen_range(-1e-6..1e-6),
            };
        }
        let q = quality_score(reports(&subs)).map_err(|e| e.to_string())?;
        let mean = subs.iter().sum::<f64>() / 6.0;
        ensure((q.score - mean).abs() <= 1e-9, || format!("{subs:?}: score {} vs mean {mean}", q.score))?;
        ensure(q.level == expected_level(q.score), || format!("{subs:?}: level {:?} for {}", q.level, q.score))?;
    }
    Ok(format!("4 boundaries and {cases} random subscore vectors"))
}

fn detector_oracles() -> Outcome {
    let start = Instant::now();
    let report = support::oracles::check_corpus(2000, 2024);
    let elapsed = start.elapsed();
    ensure(report.mismatches.is_empty(), || {
        format!("{} mismatches; first: {}", report.mismatches.len(), report.mismatches[0])
    })?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{} tables, {} detector checks, 0 mismatches, {elapsed:.2?}", report.tables, report.checks))
}

fn imbalanced_table(rng: &mut ChaCha8Rng) -> DataTable {
    let n = rng.gen_range(6..=40);
    let minority = rng.gen_range(1..=(n - 1) / 2);
    let p = rng.gen_range(1..=4);
    let mut schema: Vec<FeatureMeta> = (0..p).map(|c| FeatureMeta::numeric(format!("x{c}"))).collect();
    schema.push(FeatureMeta::binary("flag"));
    schema.push(FeatureMeta::binary("y"));
    let rows = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..p).map(|_| rng.gen_range(-50.0..50.0)).collect();
            row.push(f64::from(rng.gen_range(0..=1u8)));
            row.push(if i < minority { 1.0 } else { 0.0 });
            row
        })
        .collect();
    DataTable::new(schema, rows, (0..n as u64).collect()).unwrap()
}

fn smote_properties() -> Outcome {
    let cfg = QualityConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut synthetic = 0;
    let cases = 300;
    for case in 0..cases {
        let t = imbalanced_table(&mut rng);
        let seed = rng.gen();
        let out = correct_issue(&t, IssueKind::ClassImbalance, &t, seed, &cfg).map_err(|e| e.to_string())?;
        let counts = out.table_after.class_counts();
        ensure(counts.len() == 2 && counts[0].1 == counts[1].1, || format!("case {case}: counts {counts:?}"))?;
        let by_id = out.table_after.row_index_by_id();
        let rows = out.table_after.rows();
        let first_new = t.n_rows() as u64;
        for (k, &(pa, pb)) in out.synthetic_parents.iter().enumerate() {
            let s = &rows[by_id[&(first_new + k as u64)]];
            let (a, b) = (&rows[by_id[&pa]], &rows[by_id[&pb]]);
            for c in 0..s.len() {
                let (lo, hi) = (a[c].min(b[c]), a[c].max(b[c]));
                ensure(lo <= s[c] && s[c] <= hi, || format!("case {case}: column {c} value {} outside [{lo}, {hi}]", s[c]))?;
            }
            synthetic += 1;
        }
        let again = correct_issue(&t, IssueKind::ClassImbalance, &t, seed, &cfg).map_err(|e| e.to_string())?;
        ensure(again.table_after == out.table_after, || format!("case {case}: same seed, different table"))?;
    }
    let pima_added = block_on(async {
        let app = app(pima(), None);
        let (id, _) = new_session(&app, "DCE").await;
        let (status, body) = post(&app, &format!("/sessions/{id}/config/auto"), json!({ "selected_issues": ["ClassImbalance"] })).await;
        ensure(status.is_success(), || body.to_string())?;
        let o = &body["outcomes"][0];
        ensure(o["after"]["subscore"] == 100.0, || format!("Pima after SMOTE: {o}"))?;
        Ok::<_, String>(o["rows_added"].as_u64().unwrap())
    })?;
    ensure(pima_added == 232, || format!("Pima rows_added {pima_added}"))?;
    Ok(format!("{cases} random tables, {synthetic} synthetic rows in parent boxes; Pima +{pima_added} rows, balanced"))
}

fn bundle_features(bundle: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for s in bundle["importances"]["scores"].as_array().unwrap() {
        out.push(("importances".into(), s["feature"].as_str().unwrap().into()));
    }
    for r in bundle["rules"].as_array().unwrap() {
        for c in r["conditions"].as_array().unwrap() {
            out.push(("rules".into(), c["feature"].as_str().unwrap().into()));
        }
    }
    for part in ["top", "rest"] {
        for k in bundle["key_insights"][part].as_array().unwrap() {
            out.push(("insights".into(), k["feature"].as_str().unwrap().into()));
        }
    }
    for d in bundle["density"].as_array().unwrap() {
        out.push(("density".into(), d["feature"].as_str().unwrap().into()));
    }
    out
}

fn recalibration() -> Outcome {
    block_on(async {
        let app = app(pima(), None);
        let (id, created) = new_session(&app, "HYB").await;
        let dropped = "Glucose";
        let before = bundle_features(&created["bundle"]);
        for tile in ["importances", "rules", "density"] {
            ensure(before.iter().any(|(t, f)| t == tile && f == dropped), || format!("{dropped} missing from v0 {tile}"))?;
        }
        let keep: Vec<&str> = ["Pregnancies", "BloodPressure", "SkinThickness", "Insulin", "BMI", "DiabetesPedigreeFunction", "Age"].to_vec();
        let (status, body) = post(&app, &format!("/sessions/{id}/config/manual"), json!({ "included_features": keep, "ranges": {} })).await;
        ensure(status.is_success(), || body.to_string())?;
        let (status, body) = post_empty(&app, &format!("/sessions/{id}/retrain")).await;
        ensure(status.is_success(), || body.to_string())?;
        let bundle = &body["version"]["bundle"];
        let leaks: Vec<String> = bundle_features(bundle).into_iter().filter(|(_, f)| f == dropped).map(|(t, _)| t).collect();
        ensure(leaks.is_empty(), || format!("{dropped} still in {leaks:?}"))?;
        let n_features = bundle["header"]["metrics"]["n_features"].as_u64().unwrap();
        ensure(n_features == 7, || format!("n_features {n_features}"))?;
        let (_, dash) = get(&app, &format!("/sessions/{id}/dashboard")).await;
        ensure(&dash["bundle"] == bundle, || "dashboard shows a different bundle".into())?;
        Ok(format!(
            "{dropped} absent from importances, rules, insights and density after retrain ({} tiles)",
            ["key_insights", "density", "quality", "rules", "importances"].iter().filter(|k| bundle.get(**k).is_some()).count()
        ))
    })
}

fn rollback() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (id, v0_metrics, v0_digest, retrained_digests) = block_on(async {
        let app = app(pima(), Some(dir.path().to_path_buf()));
        let (id, created) = new_session(&app, "HYB").await;
        let v0_metrics = created["bundle"]["header"]["metrics"].clone();
        let (_, hist) = get(&app, &format!("/sessions/{id}/history")).await;
        let v0_digest = hist["versions"][0]["table_digest"].clone();

        let all = json!(["Pregnancies", "Glucose", "BloodPressure", "SkinThickness", "Insulin", "BMI", "DiabetesPedigreeFunction", "Age"]);
        let mut digests = Vec::new();
        let (s, b) = post(&app, &format!("/sessions/{id}/config/manual"), json!({ "included_features": all, "ranges": { "Age": { "lower": 21, "upper": 60 } } })).await;
        ensure(s.is_success(), || b.to_string())?;
        let (s, b) = post_empty(&app, &format!("/sessions/{id}/retrain")).await;
        ensure(s.is_success(), || b.to_string())?;
        digests.push(b["version"]["table_digest"].clone());
        let (s, b) = post(&app, &format!("/sessions/{id}/config/auto"), json!({ "selected_issues": ["RedundantRows", "Outliers", "ClassImbalance"] })).await;
        ensure(s.is_success(), || b.to_string())?;
        let (s, b) = post_empty(&app, &format!("/sessions/{id}/retrain")).await;
        ensure(s.is_success(), || b.to_string())?;
        digests.push(b["version"]["table_digest"].clone());
        ensure(digests[0] != digests[1] && digests[1] != v0_digest, || "configurations did not change the table".into())?;

        let (s, b) = post_empty(&app, &format!("/sessions/{id}/revert/0")).await;
        ensure(s.is_success(), || b.to_string())?;
        ensure(b["version_id"] == 0, || format!("head after revert: {}", b["version_id"]))?;
        ensure(b["version"]["table_digest"] == v0_digest, || "reverted digest differs from v0".into())?;
        let (_, dash) = get(&app, &format!("/sessions/{id}/dashboard")).await;
        ensure(dash["bundle"]["header"]["metrics"] == v0_metrics, || {
            format!("metrics {} vs v0 {}", dash["bundle"]["header"]["metrics"], v0_metrics)
        })?;
        Ok::<_, String>((id, v0_metrics, v0_digest, digests))
    })?;

    let journal = dir.path().join(format!("{id}.history.jsonl"));
    let (csv, meta) = paths();
    let out = exmos(&["history", journal.to_str().unwrap(), "--data", &csv, "--meta", &meta]);
    ensure(out.status.success(), || format!("history replay failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    let report: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let replayed: Vec<&Value> = report["replayed"].as_array().unwrap().iter().map(|v| &v["table_digest"]).collect();
    let mut expected = vec![&v0_digest];
    expected.extend(retrained_digests.iter());
    ensure(replayed == expected, || format!("replayed digests {replayed:?} vs {expected:?}"))?;
    ensure(report["head_id"] == 0 && report["versions"][0]["metrics"] == v0_metrics, || {
        format!("replayed head {} metrics {}", report["head_id"], report["versions"][0]["metrics"])
    })?;
    Ok(format!(
        "revert to 0 restores digest {}.. and metrics bit-exactly; journal replay reproduces {} digests",
        &v0_digest.as_str().unwrap()[..12],
        replayed.len()
    ))
}

fn steerability() -> Outcome {
    block_on(async {
        let app = app(pima(), None);
        let (id, created) = new_session(&app, "HYB").await;
        let v0 = created["bundle"]["header"]["metrics"]["test_accuracy"].as_f64().unwrap();
        let (s, b) = post(&app, &format!("/sessions/{id}/config/auto"), json!({ "selected_issues": ["ClassImbalance"] })).await;
        ensure(s.is_success(), || b.to_string())?;
        let (s, b) = post_empty(&app, &format!("/sessions/{id}/retrain")).await;
        ensure(s.is_success(), || b.to_string())?;
        let acc = b["version"]["metrics"]["test_accuracy"].as_f64().unwrap();
        ensure(acc > v0, || format!("accuracy {acc} does not beat v0 {v0}"))?;
        ensure(b["attempt"]["success"] == true, || format!("attempt {}", b["attempt"]))?;
        let (_, a) = get(&app, &format!("/analytics?session_id={id}")).await;
        ensure(a["summary"]["mechanisms"]["automated"]["effectiveness"] == 1.0, || a["summary"].to_string())?;
        Ok(format!("auto ClassImbalance: test accuracy {v0:.4} -> {acc:.4}, attempt counted as a success"))
    })
}

fn analytics() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let attempt = |id: u64, user: &str, mechanism: &str, success: bool| {
        json!({ "type": "attempt", "attempt_id": id, "session_id": user, "mechanism": mechanism,
                "resulting_test_accuracy": if success { 0.85 } else { 0.80 }, "success": success })
    };
    let hover = |user: &str, target: &str, secs: f64, ts: u64| {
        json!({ "type": "event", "session_id": user, "event": { "kind": "hover", "target": target, "duration_s": secs, "timestamp": ts } })
    };
    let lines = [
        attempt(1, "u1", "manual", true),
        attempt(2, "u1", "manual", false),
        attempt(3, "u2", "manual", true),
        attempt(4, "u2", "manual", true),
        hover("u1", "auto.issues", 25.0, 10),
        hover("u2", "auto.apply", 35.0, 20),
        hover("u2", "KI", 8.0, 30),
        attempt(5, "u1", "automated", true),
        attempt(6, "u1", "automated", true),
        attempt(7, "u2", "automated", true),
        attempt(8, "u2", "automated", true),
    ];
    let path = dir.path().join("journal.jsonl");
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(&path, text).map_err(|e| e.to_string())?;
    let s = exmos_json(&["replay", path.to_str().unwrap()]);
    let eff = s["mechanisms"]["manual"]["effectiveness"].as_f64();
    let efficiency = s["mechanisms"]["automated"]["efficiency"].as_f64();
    ensure(eff == Some(0.75), || format!("manual effectiveness {eff:?}"))?;
    ensure(efficiency == Some(15.0), || format!("automated efficiency {efficiency:?}"))?;
    ensure(s["avg_htpu"] == 34.0, || format!("HTPU {}", s["avg_htpu"]))?;
    Ok("effectiveness 3/4 = 0.75, efficiency 60 s / 4 = 15.0".into())
}

fn recheck_rules(rules: &[Value], table: &DataTable) -> Result<usize, String> {
    let yi = table.target_index();
    for (i, r) in rules.iter().enumerate() {
        let class = r["predicted_class"].as_f64().unwrap();
        let conds: Vec<(usize, &str, f64)> = r["conditions"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| {
                let idx = table.feature_index(c["feature"].as_str().unwrap()).expect("known feature");
                (idx, c["op"].as_str().unwrap(), c["threshold"].as_f64().unwrap())
            })
            .collect();
        let (mut support, mut hits, mut positives) = (0u64, 0u64, 0u64);
        for row in table.rows() {
            let fires = conds.iter().all(|&(idx, op, t)| if op == ">" { row[idx] > t } else { row[idx] <= t });
            positives += u64::from(row[yi] == class);
            if fires {
                support += 1;
                hits += u64::from(row[yi] == class);
            }
        }
        let precision = hits as f64 / support as f64;
        let recall = hits as f64 / positives as f64;
        ensure(r["support"] == support, || format!("rule {i}: support {} vs {support}", r["support"]))?;
        ensure(r["precision"].as_f64() == Some(precision), || format!("rule {i}: precision {} vs {precision}", r["precision"]))?;
        ensure(r["recall"].as_f64() == Some(recall), || format!("rule {i}: recall {} vs {recall}", r["recall"]))?;
    }
    Ok(rules.len())
}

fn rule_validity() -> Outcome {
    let (csv, meta) = paths();
    let bundle = exmos_json(&["explain", "--data", &csv, "--meta", &meta, "--variant", "MCE"]);
    let (train, _) = pima().canonicalized().split_train_test(&SplitSpec { seed: 42, ..SplitSpec::default() }).map_err(|e| e.to_string())?;
    let rules = bundle["rules"].as_array().unwrap();
    ensure(!rules.is_empty(), || "no Pima rules".into())?;
    let n_pima = recheck_rules(rules, &train)?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("step.csv");
    let mut text = String::from("x,y\n");
    for _ in 0..4 {
        for x in 0..=10 {
            text.push_str(&format!("{x},{}\n", u8::from(x > 5)));
        }
    }
    std::fs::write(&path, text).map_err(|e| e.to_string())?;
    let step = exmos_json(&["explain", "--data", path.to_str().unwrap(), "--variant", "MCE"]);
    let step_rules = step["rules"].as_array().unwrap();
    let step_table = exmos::io::load_table(&path, None).map_err(|e| e.to_string())?;
    let (step_train, _) = step_table.canonicalized().split_train_test(&SplitSpec { seed: 42, ..SplitSpec::default() }).map_err(|e| e.to_string())?;
    recheck_rules(step_rules, &step_train)?;
    let top = step_rules.iter().find(|r| r["predicted_class"] == 1.0).ok_or("no class-1 rule")?;
    let threshold = top["conditions"][0]["threshold"].as_f64().unwrap();
    ensure(top["conditions"].as_array().unwrap().len() == 1 && top["conditions"][0]["op"] == ">", || format!("top rule {top}"))?;
    ensure((4.5..=5.5).contains(&threshold), || format!("threshold {threshold}"))?;
    ensure(top["precision"] == 1.0, || format!("precision {}", top["precision"]))?;
    let first = &step_rules[0];
    ensure(first["precision"] == 1.0, || format!("first rule {first}"))?;
    Ok(format!("{n_pima} Pima rules re-evaluated exactly; step data: x > {threshold} with precision 1.0"))
}

#[test]
fn primary_criteria() {
    let results = [
        run("baseline reproduction", baseline),
        run("quality thresholds", quality_thresholds),
        run("detector oracle equivalence", detector_oracles),
        run("SMOTE properties", smote_properties),
        run("recalibration", recalibration),
        run("rollback fidelity", rollback),
        run("steerability", steerability),
        run("analytics formulas", analytics),
        run("rule validity", rule_validity),
    ];
    let passed = results.iter().filter(|r| **r).count();
    let _ = writeln!(std::io::stderr(), "{passed}/{} criteria passed", results.len());
    assert_eq!(passed, results.len());
}
