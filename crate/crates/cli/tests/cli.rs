use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::Vector3;
use raylight::pipeline::{format_pose, orbit_pose};
use raylight::radiance::write_gaussian_scene;
use raylight::{DisplayProfile, GaussianScene, Image};

fn raylight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_raylight"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(
            f.path("poses.txt"),
            format!(
                "# two frames\n{}\n{}\n",
                format_pose(&orbit_pose(8.0, 0.0)),
                format_pose(&orbit_pose(8.0, 0.1))
            ),
        )
        .unwrap();
        let scene = GaussianScene::new(
            vec![Vector3::zeros(), Vector3::new(0.5, 0.0, -1.0)],
            vec![Vector3::repeat(0.8), Vector3::new(0.3, 0.6, 0.4)],
            vec![[1.0, 0.0, 0.0, 0.0]; 2],
            vec![0.9, 0.6],
            0,
            vec![[1.2, 0.3, -0.5], [-0.4, 0.8, 0.9]],
        )
        .unwrap();
        write_gaussian_scene(&scene, f.path("scene.ply")).unwrap();
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn precompute(&self, name: &str) -> PathBuf {
        let cache = self.path(name);
        let out = raylight(&[
            "precompute",
            "--profile",
            "desk",
            "--pw",
            "2",
            "--out",
            s(&cache),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        cache
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&raylight(&["--help"])), 0);
    assert_eq!(code(&raylight(&["--version"])), 0);
    assert_eq!(code(&raylight(&["render", "--help"])), 0);
}

#[test]
fn bad_usage_exits_one() {
    assert_eq!(code(&raylight(&[])), 1);
    assert_eq!(code(&raylight(&["frobnicate"])), 1);
    assert_eq!(code(&raylight(&["precompute", "--profile", "desk"])), 1);
    assert_eq!(
        code(&raylight(&[
            "precompute",
            "--profile",
            "desk",
            "--pw",
            "0",
            "--out",
            "x"
        ])),
        1
    );
    let f = Fixture::new();
    let poses = f.path("poses.txt");
    let out = f.path("out");
    // scene and analytic are exclusive
    let r = raylight(&[
        "render",
        "--mode",
        "standard",
        "--profile",
        "desk",
        "--analytic",
        "two-spheres",
        "--scene",
        "x.ply",
        "--poses",
        s(&poses),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 1);
    // ray-order mode without a cache
    let r = raylight(&[
        "render",
        "--mode",
        "directl",
        "--profile",
        "desk",
        "--analytic",
        "two-spheres",
        "--poses",
        s(&poses),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 1);
    let r = raylight(&[
        "render",
        "--mode",
        "standard",
        "--profile",
        "desk",
        "--analytic",
        "two-spheres",
        "--poses",
        s(&poses),
        "--out",
        s(&out),
        "--radius",
        "-1",
    ]);
    assert_eq!(code(&r), 1);
    assert!(!out.exists());
}

#[test]
fn precompute_reports_beta_and_is_deterministic() {
    let f = Fixture::new();
    let a = f.precompute("a.bin");
    let b = f.precompute("b.bin");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());

    let plain = f.path("plain.bin");
    let out = raylight(&[
        "precompute",
        "--profile",
        "desk",
        "--no-repurpose",
        "--out",
        s(&plain),
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("beta 3.0000"), "{text}");
    assert!(
        text.contains(&format!("n_rays {}", 3 * 192 * 128)),
        "{text}"
    );
}

#[test]
fn render_writes_frames_and_timing() {
    let f = Fixture::new();
    let cache = f.precompute("c.bin");
    let poses = f.path("poses.txt");
    let scene = f.path("scene.ply");
    let out = f.path("frames");
    let r = raylight(&[
        "render",
        "--mode",
        "directl",
        "--profile",
        "desk",
        "--cache",
        s(&cache),
        "--scene",
        s(&scene),
        "--poses",
        s(&poses),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    for i in 0..2 {
        let img = Image::read(out.join(format!("frame_{i:04}.png"))).unwrap();
        assert_eq!(img.dims(), (128, 192));
        assert!(img.as_slice().iter().any(|v| *v > 0.0));
    }
    let timing = std::fs::read_to_string(out.join("timing.json")).unwrap();
    assert!(timing.contains("\"directl\""));

    let cmp = raylight(&[
        "compare",
        s(&out.join("frame_0000.png")),
        s(&out.join("frame_0000.png")),
    ]);
    assert_eq!(code(&cmp), 0);
    assert_eq!(stdout(&cmp).trim(), "0.000");
}

#[test]
fn standard_mode_with_profile_file() {
    let f = Fixture::new();
    let profile = f.path("panel.toml");
    std::fs::write(&profile, DisplayProfile::desk().to_toml()).unwrap();
    let out = f.path("std");
    let r = raylight(&[
        "render",
        "--mode",
        "standard",
        "--view-res",
        "lr",
        "--profile",
        s(&profile),
        "--analytic",
        "constant-sphere",
        "--samples",
        "32",
        "--poses",
        s(&f.path("poses.txt")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("frame_0001.png").exists());
}

#[test]
fn data_errors_exit_two_without_outputs() {
    let f = Fixture::new();
    let cache = f.precompute("c.bin");
    let poses = f.path("poses.txt");
    let out = f.path("never");

    let render = |extra: &[&str]| {
        let mut args = vec!["render", "--poses", s(&poses), "--out", s(&out)];
        args.extend_from_slice(extra);
        raylight(&args)
    };

    // cache built for another panel
    let r = render(&[
        "--mode",
        "directl",
        "--profile",
        "7.9-inch",
        "--cache",
        s(&cache),
        "--analytic",
        "two-spheres",
    ]);
    assert_eq!(code(&r), 2);

    // truncated scene
    let bytes = std::fs::read(f.path("scene.ply")).unwrap();
    let broken = f.path("broken.ply");
    std::fs::write(&broken, &bytes[..bytes.len() - 7]).unwrap();
    let r = render(&[
        "--mode",
        "directl",
        "--profile",
        "desk",
        "--cache",
        s(&cache),
        "--scene",
        s(&broken),
    ]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("record"));

    // corrupt cache
    let mut raw = std::fs::read(&cache).unwrap();
    raw.truncate(raw.len() / 2);
    let bad_cache = f.path("bad.bin");
    std::fs::write(&bad_cache, raw).unwrap();
    let r = render(&[
        "--mode",
        "directl",
        "--profile",
        "desk",
        "--cache",
        s(&bad_cache),
        "--analytic",
        "two-spheres",
    ]);
    assert_eq!(code(&r), 2);

    // missing and malformed pose files
    let r = raylight(&[
        "render",
        "--mode",
        "standard",
        "--profile",
        "desk",
        "--analytic",
        "two-spheres",
        "--poses",
        s(&f.path("nope.txt")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 2);
    let skew = f.path("skew.txt");
    std::fs::write(&skew, "2 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n").unwrap();
    let r = raylight(&[
        "render",
        "--mode",
        "standard",
        "--profile",
        "desk",
        "--analytic",
        "two-spheres",
        "--poses",
        s(&skew),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 2);

    // broken profile file
    let profile = f.path("bad.toml");
    std::fs::write(&profile, "width_px = \"wide\"\n").unwrap();
    let r = raylight(&[
        "precompute",
        "--profile",
        s(&profile),
        "--out",
        s(&f.path("p.bin")),
    ]);
    assert_eq!(code(&r), 2);
    assert!(!f.path("p.bin").exists());

    let r = raylight(&["compare", s(&f.path("x.png")), s(&f.path("y.png"))]);
    assert_eq!(code(&r), 2);

    assert!(!out.exists());
}

#[test]
fn bench_reports_throughput() {
    let f = Fixture::new();
    let cache = f.precompute("c.bin");
    let r = raylight(&[
        "bench",
        "--mode",
        "directl",
        "--profile",
        "desk",
        "--cache",
        s(&cache),
        "--analytic",
        "gradient-box",
        "--samples",
        "16",
        "--poses",
        s(&f.path("poses.txt")),
        "--frames",
        "2",
        "--compare-standard",
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let text = stdout(&r);
    for key in [
        "mean_frame_secs",
        "rays_per_sec",
        "three_over_beta",
        "standard_over_directl",
    ] {
        assert!(text.contains(key), "{text}");
    }
}
