//! Run directories and CLI invocation shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub const PHANTOM_SCENE: &str = r#"{"bodies":[{"shape":{"type":"cylinder","radius_m":0.1,"height_m":0.2,"axis":"z"},"translation_m":[0,0,0],"rotation_deg":[0,0,0],"material":"water","is_patient":true}],"ambient":"air"}"#;
pub const VACUUM_SCENE: &str = r#"{"bodies":[],"ambient":"vacuum"}"#;
pub const AIR_SCENE: &str = r#"{"bodies":[],"ambient":"air"}"#;
pub const SPECTRUM: &str = "energy_keV,relative_intensity\n20,0\n40,0.6\n60,1\n90,0.5\n120,0\n";

pub struct RunDir {
    pub dir: tempfile::TempDir,
}

impl RunDir {
    pub fn new(scene: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("scene.json"), scene).unwrap();
        std::fs::write(dir.path().join("spectrum.csv"), SPECTRUM).unwrap();
        RunDir { dir }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Config with a 10 degree cone one meter in front of the origin along +x.
    pub fn base_config(&self, output: &str) -> Value {
        json!({
            "scene_path": "scene.json",
            "spectrum_path": "spectrum.csv",
            "source": {"position_m": [-1.0, 0.0, 0.0], "direction": [1.0, 0.0, 0.0],
                       "shape": {"type": "cone", "opening_angle_deg": 10.0}},
            "epsilon_threshold": 0.05,
            "max_photons": 50000,
            "seed": 42,
            "workers": 1,
            "output_path": output,
        })
    }

    pub fn write_config(&self, name: &str, config: &Value) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, serde_json::to_vec_pretty(config).unwrap()).unwrap();
        p
    }
}

pub fn radfield(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_radfield"));
    cmd.args(args).env_remove("RADFIELD_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

pub fn simulate(config: &Path, envs: &[(&str, &str)]) -> Output {
    radfield(&["simulate", "--config", config.to_str().unwrap()], envs)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}
