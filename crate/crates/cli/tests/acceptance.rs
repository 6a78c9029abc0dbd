//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use calcaudit::address::column_name;
use calcaudit::analyze::{scan, CheckConfig, CheckId};
use calcaudit::container::sha256_hex;
use calcaudit::filter::match_wildcard;
use calcaudit::fixtures::{self, random_edit_script, write_ods, ScriptOptions, UriFamily};
use calcaudit::formula::{
    classify_content, fold_constant, parse_formula, print_expr, relative_shape, BinaryOp, CellRef,
    ContentClass, Expr, UnaryOp,
};
use calcaudit::reconstruct::{replay_to, revert_all, Checkpoint};
use calcaudit::{CellAddress, CellContent, ChangeKind, Grid, SheetGrid, Workbook};
use chrono::NaiveDate;
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{RngExt, SeedableRng};
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Files {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Files {
    fn new() -> Files {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("files");
        std::fs::create_dir(&root).unwrap();
        for (name, bytes) in [
            ("fixture.ods", fixtures::cashflow_ods()),
            ("fixture.sxc", fixtures::cashflow_sxc()),
            ("nohistory.ods", fixtures::no_history_ods()),
            ("constant.ods", fixtures::constant_equation_ods()),
            ("holiday.ods", fixtures::multi_author_ods(11)),
        ] {
            std::fs::write(root.join(name), bytes).unwrap();
        }
        std::fs::write(dir.path().join("secret.ods"), fixtures::cashflow_ods()).unwrap();
        Files { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn digests(&self) -> Vec<(String, String)> {
        let mut out: Vec<_> = std::fs::read_dir(&self.root)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    sha256_hex(&std::fs::read(&p).unwrap()),
                )
            })
            .collect();
        out.sort();
        out
    }
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calcaudit"))
        .args(args)
        .output()
        .unwrap()
}

fn ndjson(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn cashflow_listing(files: &Files) -> Outcome {
    let start = Instant::now();
    let out = cli(&[
        "changes",
        files.path("fixture.ods").to_str().unwrap(),
        "--format",
        "ndjson",
    ]);
    let elapsed = start.elapsed();
    ensure(out.status.success(), || {
        format!("exit {:?}", out.status.code())
    })?;
    let rows = ndjson(&out);
    ensure(rows.len() == 23, || format!("{} records", rows.len()))?;
    let content = rows
        .iter()
        .filter(|r| r["change"] == "Cell content")
        .count();
    let inserts = rows.iter().filter(|r| r["change"] == "Insertion").count();
    ensure((content, inserts) == (22, 1), || {
        format!("{content} content, {inserts} insertions")
    })?;
    ensure(
        rows.iter()
            .all(|r| r["author"] == "Neil Smith" && r["date"] == "2003-03-28"),
        || "author/date".into(),
    )?;
    let k22 = rows
        .iter()
        .find(|r| r["address"] == "K22")
        .ok_or("no K22")?;
    ensure(
        k22["details"] == "<empty> -> =K8-K18-K20 {$5,150 (currency)}",
        || format!("K22 {}", k22["details"]),
    )?;
    let ins = rows.iter().find(|r| r["change"] == "Insertion").unwrap();
    ensure(ins["details"] == "1 row at row 17", || {
        format!("insertion {}", ins["details"])
    })?;
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "23 records (22+1), exact details, {} ms",
        elapsed.as_millis()
    ))
}

fn oracle_match(p: &[u8], s: &[u8]) -> bool {
    match p.split_first() {
        None => s.is_empty(),
        Some((b'*', rest)) => (0..=s.len()).any(|k| oracle_match(rest, &s[k..])),
        Some((b'?', rest)) => !s.is_empty() && oracle_match(rest, &s[1..]),
        Some((c, rest)) => s.first() == Some(c) && oracle_match(rest, &s[1..]),
    }
}

fn filter_suite(files: &Files) -> Outcome {
    let start = Instant::now();
    let fixture = files.path("fixture.ods");
    let count = |filters: &[&str], file: &Path| -> Result<Vec<Value>, String> {
        let mut args = vec!["changes", file.to_str().unwrap(), "--format", "ndjson"];
        for f in filters {
            args.extend(["--filter", f]);
        }
        let out = cli(&args);
        ensure(out.status.success(), || {
            format!("{filters:?}: exit {:?}", out.status.code())
        })?;
        Ok(ndjson(&out))
    };
    let one = count(&["+kind=row-insert"], &fixture)?.len();
    let fifteen = count(&["-transition=empty->any"], &fixture)?.len();
    ensure(one == 1, || format!("row-insert gave {one}"))?;
    ensure(fifteen == 15, || format!("exclude initial gave {fifteen}"))?;

    let holiday = files.path("holiday.ods");
    let wb = Workbook::open(&holiday).map_err(|e| e.to_string())?;
    ensure(wb.changes.len() >= 200, || {
        format!("synthetic fixture has {} records", wb.changes.len())
    })?;
    let got = count(
        &[
            "+author=J* Doe,ci",
            "+date=2001-12-24..2002-01-01",
            "-transition=empty->any",
        ],
        &holiday,
    )?;
    let (lo, hi) = (
        NaiveDate::from_ymd_opt(2001, 12, 24).unwrap(),
        NaiveDate::from_ymd_opt(2002, 1, 1).unwrap(),
    );
    let expected: Vec<String> = wb
        .changes
        .iter()
        .filter(|r| {
            let author = oracle_match(b"j* doe", r.author.to_lowercase().as_bytes());
            let day = r.timestamp.date();
            let initial = r.kind == ChangeKind::CellContent && r.before.is_empty();
            author && lo <= day && day <= hi && !initial
        })
        .map(|r| {
            format!(
                "{}|{}|{}",
                r.location_label(),
                r.timestamp.format("%Y-%m-%d %H:%M:%S"),
                r.author
            )
        })
        .collect();
    let got: Vec<String> = got
        .iter()
        .map(|r| {
            format!(
                "{}|{} {}|{}",
                r["address"].as_str().unwrap(),
                r["date"].as_str().unwrap(),
                r["time"].as_str().unwrap(),
                r["author"].as_str().unwrap()
            )
        })
        .collect();
    ensure(!expected.is_empty(), || "scenario selects nothing".into())?;
    ensure(got == expected, || {
        format!("scenario: {} vs oracle {}", got.len(), expected.len())
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "1 / 15 / scenario {} of {} records = oracle, {} ms",
        got.len(),
        wb.changes.len(),
        elapsed.as_millis()
    ))
}

fn all_strings(alphabet: &[u8], max: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for s in &layer {
            for &c in alphabet {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

fn wildcard_exhaustive() -> Outcome {
    let start = Instant::now();
    let patterns = all_strings(b"abc*?", 6);
    let subjects: Vec<String> = all_strings(b"abc", 6)
        .into_iter()
        .map(|s| String::from_utf8(s).unwrap())
        .collect();
    let workers = thread::available_parallelism().map_or(4, |n| n.get());
    let chunk = patterns.len().div_ceil(workers);
    let mismatches: Vec<String> = thread::scope(|scope| {
        let handles: Vec<_> = patterns
            .chunks(chunk)
            .map(|part| {
                let subjects = &subjects;
                scope.spawn(move || {
                    let mut bad = Vec::new();
                    for p in part {
                        let text = std::str::from_utf8(p).unwrap();
                        for s in subjects {
                            if match_wildcard(text, s, false) != oracle_match(p, s.as_bytes()) {
                                bad.push(format!("{text:?} vs {s:?}"));
                            }
                        }
                    }
                    bad
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect()
    });
    let elapsed = start.elapsed();
    let pairs = patterns.len() * subjects.len();
    ensure(mismatches.is_empty(), || {
        format!("{} mismatches, first {}", mismatches.len(), mismatches[0])
    })?;
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{pairs} pairs agree, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn random_ref(rng: &mut StdRng) -> CellRef {
    CellRef {
        sheet: if rng.random_bool(0.2) {
            Some(["Data", "Cash Flow"].choose(rng).unwrap().to_string())
        } else {
            None
        },
        column: rng.random_range(0..200),
        row: rng.random_range(0..5000),
        col_absolute: rng.random_bool(0.3),
        row_absolute: rng.random_bool(0.3),
    }
}

fn random_expr(rng: &mut StdRng, depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.3) {
        return match rng.random_range(0..7) {
            0 => Expr::Number(f64::from(rng.random_range(0..10000u32))),
            1 => Expr::Number(f64::from(rng.random_range(0..10000u32)) / 8.0),
            2 => Expr::Text(
                ["", "a b", "say \"x\"", "Travel"]
                    .choose(rng)
                    .unwrap()
                    .to_string(),
            ),
            3 => Expr::Boolean(rng.random_bool(0.5)),
            4 => Expr::Cell(random_ref(rng)),
            5 => {
                let start = random_ref(rng);
                let mut end = random_ref(rng);
                end.sheet = None;
                Expr::Range(start, end)
            }
            _ => Expr::Error(
                ["#REF!", "#DIV/0!", "#NAME?"]
                    .choose(rng)
                    .unwrap()
                    .to_string(),
            ),
        };
    }
    let ops = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
        BinaryOp::Concat,
        BinaryOp::Eq,
        BinaryOp::Lt,
        BinaryOp::Ge,
    ];
    match rng.random_range(0..4) {
        0 => Expr::Unary(
            if rng.random_bool(0.5) {
                UnaryOp::Neg
            } else {
                UnaryOp::Plus
            },
            Box::new(random_expr(rng, depth - 1)),
        ),
        1 => Expr::Percent(Box::new(random_expr(rng, depth - 1))),
        2 => {
            let n = rng.random_range(0..4);
            Expr::Call(
                ["SUM", "NPV", "IF", "MAX"].choose(rng).unwrap().to_string(),
                (0..n).map(|_| random_expr(rng, depth - 1)).collect(),
            )
        }
        _ => Expr::Binary(
            *ops.choose(rng).unwrap(),
            Box::new(random_expr(rng, depth - 1)),
            Box::new(random_expr(rng, depth - 1)),
        ),
    }
}

fn formula_engine() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2003);
    let host = CellAddress::new("Data", 2, 2);
    for i in 0..1000 {
        let e = random_expr(&mut rng, 5);
        let text = format!("={}", print_expr(&e));
        let ast = parse_formula(&text, &host).map_err(|err| format!("case {i}: {text}: {err}"))?;
        ensure(ast.root == e, || {
            format!("case {i}: {text} parsed to a different tree")
        })?;
    }
    let d4 = CellAddress::new("Sheet1", 3, 3);
    let constant = CellContent::formula("=1+2+3", None);
    ensure(
        classify_content(&constant, &d4) == ContentClass::ConstantFormula,
        || "=1+2+3 not constant".into(),
    )?;
    let folded =
        fold_constant(&parse_formula("=1+2+3", &d4).unwrap()).map_err(|e| e.to_string())?;
    ensure(folded.numeric == Some(6.0), || format!("folded {folded:?}"))?;
    let b18 = CellAddress::parse_a1("Cash Flow", "B18").unwrap();
    let c18 = CellAddress::parse_a1("Cash Flow", "C18").unwrap();
    let sb = relative_shape(&parse_formula("=SUM(B11:B17)", &b18).unwrap(), &b18);
    let sc = relative_shape(&parse_formula("=SUM(C11:C17)", &c18).unwrap(), &c18);
    ensure(sb == sc, || format!("{sb} != {sc}"))?;
    Ok(format!("1000 round-trips exact, =1+2+3 -> 6, shape {sb}"))
}

fn same(a: &[SheetGrid], b: &[SheetGrid]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.name == y.name && x.grid.same_content(&y.grid))
}

fn reconstruction(files: &Files) -> Outcome {
    let wb = Workbook::open(files.path("fixture.ods")).map_err(|e| e.to_string())?;
    let base = revert_all(&wb).map_err(|e| e.to_string())?;
    let last = Checkpoint::Record(wb.changes.last().unwrap().id.clone());
    let full = replay_to(&base, &wb, &last).map_err(|e| e.to_string())?;
    ensure(full.same_content(&wb.sheets), || {
        "fixture: full replay differs from grid".into()
    })?;

    let at = Checkpoint::At(
        NaiveDate::from_ymd_opt(2003, 3, 28)
            .unwrap()
            .and_hms_opt(21, 55, 0)
            .unwrap(),
    );
    let snap = replay_to(&base, &wb, &at).map_err(|e| e.to_string())?;
    let cell = |a1: &str| {
        snap.content_at(&CellAddress::parse_a1("Cash Flow", a1).unwrap())
            .plain_text()
    };
    ensure(cell("E18") == "=SUM(E11:E16)", || {
        format!("E18 = {}", cell("E18"))
    })?;
    ensure(cell("A17") == "Travel", || format!("A17 = {}", cell("A17")))?;

    for seed in 0..100u64 {
        let script = random_edit_script(seed, &ScriptOptions::default());
        let wb = Workbook::from_bytes(write_ods(&script.document, UriFamily::Odf))
            .map_err(|e| e.to_string())?;
        let base = revert_all(&wb).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(same(&base.sheets, &script.base), || {
            format!("seed {seed}: base differs from generator")
        })?;
        let last = Checkpoint::Record(wb.changes.last().unwrap().id.clone());
        let full = replay_to(&base, &wb, &last).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(full.same_content(&wb.sheets), || {
            format!("seed {seed}: replay differs")
        })?;
    }
    Ok("fixture + 100 scripts round-trip, 21:55 E18/A17 exact".into())
}

fn static_analyzer(files: &Files) -> Outcome {
    let out = cli(&[
        "scan",
        files.path("constant.ods").to_str().unwrap(),
        "--format",
        "ndjson",
    ]);
    let found = ndjson(&out);
    ensure(
        found
            .iter()
            .any(|f| f["check_id"] == "SA1-constant-equation" && f["evidence"]["value"] == "6"),
        || "no SA1 with value 6".into(),
    )?;

    let out = cli(&[
        "scan",
        files.path("fixture.ods").to_str().unwrap(),
        "--at",
        "2003-03-28T21:55:00",
        "--format",
        "ndjson",
    ]);
    ensure(out.status.success(), || {
        format!("scan --at exit {:?}", out.status.code())
    })?;
    let sa4: BTreeSet<String> = ndjson(&out)
        .iter()
        .filter(|f| f["check_id"] == "SA4-range-boundary")
        .map(|f| {
            format!(
                "{}{}",
                column_name(f["address"]["column"].as_u64().unwrap() as u32),
                f["address"]["row"].as_u64().unwrap() + 1
            )
        })
        .collect();
    let wb = Workbook::open(files.path("fixture.ods")).map_err(|e| e.to_string())?;
    let at = Checkpoint::At(
        NaiveDate::from_ymd_opt(2003, 3, 28)
            .unwrap()
            .and_hms_opt(21, 55, 0)
            .unwrap(),
    );
    let snap = calcaudit::reconstruct::snapshot_at(&wb, &at).map_err(|e| e.to_string())?;
    let grid = &snap.sheets[0].grid;
    // Sum columns over rows 11-16 whose row-17 cell now holds numeric content.
    let oracle: BTreeSet<String> = (0..40)
        .filter(|&c| {
            let name = column_name(c);
            grid.get(17, c).plain_text() == format!("=SUM({name}11:{name}16)")
                && grid.get(16, c).is_numeric_like()
        })
        .map(|c| format!("{}18", column_name(c)))
        .collect();
    ensure(!oracle.is_empty(), || {
        "oracle found no boundary columns".into()
    })?;
    ensure(sa4 == oracle, || {
        format!("SA4 at {sa4:?}, oracle {oracle:?}")
    })?;

    let mut rng = StdRng::seed_from_u64(7);
    let trials = 2000;
    for t in 0..trials {
        let (w, h) = (rng.random_range(1..=20u32), rng.random_range(1..=20u32));
        let mut rect = || {
            let (a, b) = (rng.random_range(0..w), rng.random_range(0..w));
            let (c, d) = (rng.random_range(0..h), rng.random_range(0..h));
            (a.min(b), c.min(d), a.max(b), c.max(d))
        };
        let (r1, r2) = (rect(), rect());
        let a1 = |r: (u32, u32, u32, u32)| {
            format!(
                "{}{}:{}{}",
                column_name(r.0),
                r.1 + 1,
                column_name(r.2),
                r.3 + 1
            )
        };
        let mut g = Grid::new();
        g.set(
            h + 2,
            0,
            CellContent::formula(format!("=SUM({})+SUM({})", a1(r1), a1(r2)), None),
        );
        let sheets = vec![SheetGrid {
            name: "S".into(),
            protected: false,
            grid: g,
        }];
        let found = scan(&sheets, &CheckConfig::default());
        let got: Vec<&Value> = found
            .iter()
            .filter(|f| f.check_id == CheckId::OverlappingRanges)
            .map(|f| &f.evidence["intersection"])
            .collect();
        let inside = |r: (u32, u32, u32, u32), c: u32, row: u32| {
            r.0 <= c && c <= r.2 && r.1 <= row && row <= r.3
        };
        let cells: Vec<(u32, u32)> = (0..w)
            .flat_map(|c| (0..h).map(move |r| (c, r)))
            .filter(|&(c, r)| inside(r1, c, r) && inside(r2, c, r))
            .collect();
        let want = if cells.is_empty() {
            None
        } else {
            let bound = (
                cells.iter().map(|p| p.0).min().unwrap(),
                cells.iter().map(|p| p.1).min().unwrap(),
                cells.iter().map(|p| p.0).max().unwrap(),
                cells.iter().map(|p| p.1).max().unwrap(),
            );
            Some(a1(bound))
        };
        let got = got.first().and_then(|v| v.as_str()).map(str::to_owned);
        ensure(got == want, || {
            format!("trial {t}: SA7 {got:?}, enumeration {want:?}")
        })?;
    }
    Ok(format!(
        "SA1 value 6; SA4 = {sa4:?} = oracle; SA7 = enumeration on {trials} grids"
    ))
}

struct Server {
    child: Child,
    port: u16,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start_server(root: &Path) -> Result<Server, String> {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let child = Command::new(env!("CARGO_BIN_EXE_calcaudit"))
        .args([
            "serve",
            "--root",
            root.to_str().unwrap(),
            "--port",
            &port.to_string(),
        ])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let server = Server { child, port };
    for _ in 0..100 {
        if TcpStream::connect(("127.0.0.1", port)).is_ok() {
            return Ok(server);
        }
        thread::sleep(Duration::from_millis(50));
    }
    Err("server did not start".into())
}

fn http(port: u16, method: &str, path: &str, body: Option<&str>) -> Result<(u16, Value), String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).map_err(|e| e.to_string())?;
    let body = body.unwrap_or("");
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .map_err(|e| e.to_string())?;
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&raw);
    let (head, payload) = text.split_once("\r\n\r\n").ok_or("malformed response")?;
    let status: u16 = head
        .split(' ')
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or("no status")?;
    let payload = if head
        .to_ascii_lowercase()
        .contains("transfer-encoding: chunked")
    {
        let mut out = String::new();
        let mut rest = payload;
        while let Some((size, tail)) = rest.split_once("\r\n") {
            let n = usize::from_str_radix(size.trim(), 16).map_err(|e| e.to_string())?;
            if n == 0 {
                break;
            }
            out.push_str(&tail[..n]);
            rest = &tail[n + 2..];
        }
        out
    } else {
        payload.to_owned()
    };
    Ok((
        status,
        serde_json::from_str(&payload).unwrap_or(Value::Null),
    ))
}

fn read_only(files: &Files) -> Outcome {
    let before = files.digests();
    let fixture = files.path("fixture.ods");
    let f = fixture.to_str().unwrap();
    let nh = files.path("nohistory.ods");
    let sxc = files.path("fixture.sxc");
    let out_dir = files._dir.path().join("snapshot");
    let export = files._dir.path().join("changes.ndjson");
    let commands: Vec<Vec<&str>> = vec![
        vec!["changes", f],
        vec![
            "changes",
            f,
            "--filter",
            "-transition=empty->any",
            "--format",
            "csv",
        ],
        vec!["scan", f],
        vec!["scan", f, "--at", "2003-03-28T21:55:00"],
        vec!["scan", nh.to_str().unwrap(), "--at", "2003-03-28"],
        vec!["summary", f],
        vec![
            "reconstruct",
            f,
            "--at",
            "2003-03-28T21:55:00",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        vec!["export-changes", f],
        vec!["export-changes", f, "--out", export.to_str().unwrap()],
        vec!["export-changes", f, "--out", f],
        vec!["verify", f],
        vec!["verify", nh.to_str().unwrap()],
        vec!["changes", sxc.to_str().unwrap()],
    ];
    let mut checked = 0;
    for args in &commands {
        cli(args);
        checked += 1;
        ensure(files.digests() == before, || {
            format!("{args:?} changed an input file")
        })?;
    }

    let server = start_server(&files.root)?;
    checked += 1;
    let mut requests = 0;
    for name in [
        "fixture.ods",
        "fixture.sxc",
        "nohistory.ods",
        "constant.ods",
        "holiday.ods",
    ] {
        let (status, body) = http(
            server.port,
            "POST",
            "/sessions",
            Some(&format!("{{\"path\":\"{name}\"}}")),
        )?;
        ensure(status == 201, || format!("POST {name}: {status}"))?;
        let id = body["session_id"].as_str().unwrap().to_owned();
        requests += 1;
        for uri in [
            "changes",
            "changes?filter=-transition%3Dempty-%3Eany",
            "summary",
            "findings",
            "snapshot",
            "findings?at=2003-03-28T21:55:00",
            "snapshot?at=2003-03-28T21:55:00",
        ] {
            http(server.port, "GET", &format!("/sessions/{id}/{uri}"), None)?;
            requests += 1;
            ensure(files.digests() == before, || {
                format!("{name} {uri} changed an input file")
            })?;
        }
    }
    drop(server);
    ensure(files.digests() == before, || "input files changed".into())?;
    Ok(format!(
        "{} files unchanged across {checked} commands and {requests} requests",
        before.len()
    ))
}

fn service_consistency(files: &Files) -> Outcome {
    let server = start_server(&files.root)?;
    let mut compared = 0;
    for name in ["fixture.ods", "holiday.ods", "nohistory.ods"] {
        let (status, body) = http(
            server.port,
            "POST",
            "/sessions",
            Some(&format!("{{\"path\":\"{name}\"}}")),
        )?;
        ensure(status == 201, || format!("POST {name}: {status}"))?;
        let id = body["session_id"].as_str().unwrap();
        let (_, summary) = http(server.port, "GET", &format!("/sessions/{id}/summary"), None)?;
        let (_, changes) = http(server.port, "GET", &format!("/sessions/{id}/changes"), None)?;
        ensure(summary["summary"] == changes["summary"], || {
            format!("{name}: summary differs")
        })?;
        ensure(
            summary["summary"]["total"].as_u64()
                == Some(changes["records"].as_array().unwrap().len() as u64),
            || format!("{name}: totals differ"),
        )?;
        compared += 1;
    }
    let escapes = [
        "../secret.ods",
        "../../etc/passwd",
        "/etc/passwd",
        "./../secret.ods",
        "fixture.ods/../../secret.ods",
        "%2e%2e/secret.ods",
    ];
    for path in escapes {
        let (status, _) = http(
            server.port,
            "POST",
            "/sessions",
            Some(&format!("{{\"path\":\"{path}\"}}")),
        )?;
        ensure(status == 404, || format!("{path}: status {status}"))?;
    }
    Ok(format!(
        "{compared} sessions consistent, {} escape attempts -> 404",
        escapes.len()
    ))
}

fn main() {
    let files = Files::new();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (
            "cashflow change listing",
            Box::new(|| cashflow_listing(&files)),
        ),
        ("filter suite", Box::new(|| filter_suite(&files))),
        ("wildcard exhaustive", Box::new(wildcard_exhaustive)),
        ("formula engine", Box::new(formula_engine)),
        ("reconstruction", Box::new(|| reconstruction(&files))),
        ("static analyzer", Box::new(|| static_analyzer(&files))),
        ("read-only guarantee", Box::new(|| read_only(&files))),
        (
            "service consistency",
            Box::new(|| service_consistency(&files)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
