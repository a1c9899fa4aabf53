use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn flowrl(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowrl"))
        .args(args)
        .env("FLOWRL_OUTPUT_ROOT", root)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn small_config(extra: &str) -> String {
    format!(
        "[run]\nseed = 3\noutput_dir = run\n\n[dataset]\nkind = ring\nmodes = 8\nradius = 2\nstd = 0.1\n\n\
         [pretrain]\nsteps = 50\nbatch = 32\nwarn_loss = 100\n\n\
         [rl]\niterations = 2\nbatch_prompts = 2\nm_max = 3\nbins = 2\ngroup_size = 3\neval_interval = 1\neval_samples = 4\n{extra}"
    )
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

#[test]
fn pretrain_then_train_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, small_config("")).unwrap();
    let cfg = cfg.to_str().unwrap();

    let out = flowrl(tmp.path(), &["pretrain", cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("run/pretrained.ckpt").exists());
    assert!(tmp.path().join("run/pretrain_loss.csv").exists());

    let out = flowrl(tmp.path(), &["train", cfg, "--variant", "flow_grpo"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("run/flow_grpo/train_log.csv").exists());

    let out = flowrl(tmp.path(), &["report", tmp.path().join("run").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().nth(1).unwrap().ends_with(",match"), "{stdout}");
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, small_config("learning_rate = 0.1\n")).unwrap();
    let out = flowrl(tmp.path(), &["pretrain", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("learning_rate"), "{stderr}");

    let out = flowrl(tmp.path(), &["pretrain", tmp.path().join("absent.cfg").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_checkpoint_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, small_config("")).unwrap();
    let out = flowrl(tmp.path(), &["train", cfg.to_str().unwrap(), "--variant", "superflow"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pretrained.ckpt"));
}

#[test]
fn divergence_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("huge.cfg");
    fs::write(&cfg, small_config("").replace("radius = 2", "radius = 1e200")).unwrap();
    let out = flowrl(tmp.path(), &["pretrain", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}
