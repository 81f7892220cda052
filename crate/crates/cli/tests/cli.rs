use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pixforge::image::{load_pnm, save_pnm, Image};

fn pixforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pixforge")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_gray(path: &Path, w: usize, h: usize, f: impl FnMut(usize, usize) -> u8) {
    fs::write(path, save_pnm(&Image::from_fn(w, h, f).unwrap(), false)).unwrap();
}

fn read(path: &Path) -> Image {
    load_pnm(&fs::read(path).unwrap()).unwrap()
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn no_arguments_prints_usage_and_fails() {
    let out = pixforge(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_and_flag_are_usage_errors() {
    assert_eq!(pixforge(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(pixforge(&["hist", "x.pgm", "--bogus"]).status.code(), Some(1));
}

#[test]
fn help_succeeds_for_every_subcommand() {
    for sub in [
        "hist", "equalize", "pointop", "warp", "filter", "edges", "fft", "corners", "train", "classify", "attack",
        "dream", "style", "gen-dataset",
    ] {
        let out = pixforge(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(!out.stdout.is_empty(), "{sub}");
    }
}

#[test]
fn hist_writes_256_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    let csv = dir.path().join("h.csv");
    write_gray(&input, 8, 4, |x, y| (x * 30 + y) as u8);
    let out = pixforge(&["hist", s(&input), "--out", s(&csv)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "intensity,count");
    assert_eq!(lines.len(), 257);
    let total: u64 = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 32);
}

#[test]
fn missing_or_corrupt_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pgm");
    fs::write(&bad, b"P5\n2 2\n255\n\x01").unwrap();
    assert_eq!(pixforge(&["hist", s(&bad)]).status.code(), Some(2));
    assert_eq!(pixforge(&["hist", s(&dir.path().join("absent.pgm"))]).status.code(), Some(2));
}

#[test]
fn bad_mask_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    write_gray(&input, 4, 4, |x, _| x as u8);
    let out = dir.path().join("o.pgm");
    assert_eq!(pixforge(&["filter", s(&input), "--mask", "median:3", "--out", s(&out)]).status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn image_commands_produce_images() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    write_gray(&input, 12, 10, |x, y| if (3..9).contains(&x) && (2..8).contains(&y) { 200 } else { 30 });
    let o = |n: &str| dir.path().join(n);
    let runs: Vec<Vec<String>> = vec![
        vec!["equalize".into(), s(&input).into(), "--out".into(), s(&o("eq.pgm")).into()],
        vec!["pointop".into(), s(&input).into(), "--gain".into(), "1".into(), "--bias".into(), "-10".into(), "--out".into(), s(&o("pt.pgm")).into()],
        vec!["warp".into(), s(&input).into(), "--rotate".into(), "30".into(), "--out".into(), s(&o("rot.pgm")).into()],
        vec!["warp".into(), s(&input).into(), "--scale".into(), "0.5,2".into(), "--interp".into(), "nearest".into(), "--out".into(), s(&o("sc.pgm")).into()],
        vec!["filter".into(), s(&input).into(), "--mask".into(), "gaussian:1".into(), "--out".into(), s(&o("g.pgm")).into()],
        vec!["edges".into(), s(&input).into(), "--threshold".into(), "0.3".into(), "--out".into(), s(&o("e.pgm")).into()],
    ];
    for args in runs {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = pixforge(&refs);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let img = read(Path::new(args.last().unwrap()));
        assert_eq!((img.width(), img.height()), (12, 10), "{args:?}");
    }
    assert_eq!(read(&o("pt.pgm")).get(0, 0, 0), 20);
}

#[test]
fn warp_requires_exactly_one_transform() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    write_gray(&input, 4, 4, |x, _| x as u8);
    let out = s(&dir.path().join("o.pgm")).to_string();
    assert_eq!(pixforge(&["warp", s(&input), "--out", &out]).status.code(), Some(1));
    assert_eq!(pixforge(&["warp", s(&input), "--rotate", "90", "--reflect", "x", "--out", &out]).status.code(), Some(1));
}

#[test]
fn warp_rotation_turns_counterclockwise() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    let out = dir.path().join("o.pgm");
    fs::write(&input, save_pnm(&Image::gray(2, 2, vec![1, 2, 3, 4]).unwrap(), true)).unwrap();
    let r = pixforge(&["warp", s(&input), "--rotate", "90", "--interp", "nearest", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(read(&out).data(), &[2, 4, 1, 3]);
}

#[test]
fn fft_writes_spectrum_and_filtered_image() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.pgm");
    write_gray(&input, 6, 5, |x, y| ((x * 40 + y * 20) % 256) as u8);
    let csv = dir.path().join("s.csv");
    let filtered = dir.path().join("f.pgm");
    let spec_img = dir.path().join("s.pgm");
    let out = pixforge(&[
        "fft", s(&input), "--out-spectrum", s(&csv), "--spectrum-image", s(&spec_img), "--lowpass", "1", "--out-filtered",
        s(&filtered),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("u,v,re,im"));
    assert_eq!(text.lines().count(), 1 + 8 * 8);
    assert_eq!(read(&filtered), read(&input));
    assert_eq!(read(&spec_img).width(), 8);
}

#[test]
fn corners_on_square_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("sq.pgm");
    write_gray(&input, 32, 32, |x, y| if (10..22).contains(&x) && (10..22).contains(&y) { 255 } else { 0 });
    for det in ["harris", "moravec"] {
        let out = pixforge(&["corners", s(&input), "--detector", det]);
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().next(), Some("x,y,score"));
        assert_eq!(text.lines().count(), 5, "{det}: {text}");
    }
}

#[test]
fn gen_dataset_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = pixforge(&["gen-dataset", "--out", s(d), "--n", "40", "--seed", "7"]);
        assert_eq!(out.status.code(), Some(0));
    }
    let ta = tree(&a);
    assert_eq!(ta.len(), 40);
    assert_eq!(ta, tree(&b));
    assert!(ta.iter().filter(|(n, _)| n.starts_with("circle")).count() == 20);
}

#[test]
fn train_classify_attack_dream_style_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let data = p("data");
    assert_eq!(pixforge(&["gen-dataset", "--out", s(&data), "--n", "60", "--seed", "3"]).status.code(), Some(0));
    let model = p("m.pxf");
    let metrics = p("metrics.csv");
    let out = pixforge(&[
        "train", "--data", s(&data), "--epochs", "2", "--out", s(&model), "--metrics", s(&metrics), "--seed", "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(&fs::read(&model).unwrap()[..5], b"PXFG1");
    assert_eq!(fs::read_to_string(&metrics).unwrap().lines().count(), 3);

    let sample = data.join("square").join("00001.pgm");
    let out = pixforge(&["classify", "--model", s(&model), "--classes", "circle,square", s(&sample)]);
    assert_eq!(out.status.code(), Some(0));
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.contains("circle") && line.contains("square") && line.contains('%'), "{line}");

    let adv = p("adv.pgm");
    let losses = p("attack.csv");
    let out = pixforge(&["attack", "--model", s(&model), "--eps", "0.1", s(&sample), "--out", s(&adv), "--losses", s(&losses)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&losses).unwrap().lines().count(), 3);
    let (a, b) = (read(&adv), read(&sample));
    assert!(a.data().iter().zip(b.data()).all(|(x, y)| (*x as i32 - *y as i32).abs() <= 26));

    let dream = p("dream.pgm");
    let dl = p("dream.csv");
    let out = pixforge(&[
        "dream", "--model", s(&model), "--layers", "0,1", "--steps", "3", "--octaves", "2", s(&sample), "--out", s(&dream),
        "--losses", s(&dl),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&dl).unwrap().lines().count(), 1 + 6);

    let styled = p("style.pgm");
    let other = data.join("circle").join("00000.pgm");
    let out = pixforge(&[
        "style", "--model", s(&model), "--content", s(&sample), "--style", s(&other), "--steps", "5", "--out", s(&styled),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&styled).width(), 16);

    let out = pixforge(&["dream", "--model", s(&model), "--layers", "9", s(&sample), "--out", s(&dream)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(pixforge(&["classify", "--model", s(&sample), s(&sample)]).status.code(), Some(2));
}
