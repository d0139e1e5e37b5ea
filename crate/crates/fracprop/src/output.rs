//! CSV tables, run manifests and atomic file writes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fracprop_core::circuit::Circuit;
use fracprop_core::dynamics::Trajectory;
use fracprop_core::eqprop::{GradientEstimate, TrainingLog};
use fracprop_core::frac_ops::Scalar;
use fracprop_core::lagrangian::{ElResidual, LagrangianValue};
use fracprop_core::topology::Topology;
use sha2::{Digest, Sha256};

use crate::netlist::format_number;

fn num(x: f64) -> String {
    format_number(x)
}

fn table(header: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing into a Vec cannot fail
    w.write_record(&header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// `t, coord_<name>_phi, coord_<name>_v, coord_<name>_psi, ...,
/// coord_<name>_q, coord_<name>_i, coord_<name>_r, ..., out_<k>_v, out_<k>_T`
pub fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let mut header = vec!["t".to_string()];
    for c in &traj.cutset {
        for s in ["phi", "v", "psi"] {
            header.push(format!("coord_{}_{s}", c.name));
        }
    }
    for c in &traj.loops {
        for s in ["q", "i", "r"] {
            header.push(format!("coord_{}_{s}", c.name));
        }
    }
    for o in &traj.outputs {
        header.push(format!("out_{}_v", o.name));
        header.push(format!("out_{}_T", o.name));
    }
    let rows = (0..traj.grid.count()).map(|n| {
        let mut r = vec![num(traj.grid.time(n))];
        for c in traj.cutset.iter().chain(&traj.loops) {
            r.push(num(c.value.values()[n]));
            r.push(num(c.rate.values()[n]));
            r.push(num(c.half.values()[n]));
        }
        for o in &traj.outputs {
            r.push(num(o.voltage.values()[n]));
            r.push(num(o.target.values()[n]));
        }
        r
    });
    table(header, rows)
}

fn matrix_csv(circuit: &Circuit, rows: &[usize], m: &[Vec<i64>]) -> Vec<u8> {
    let mut header = vec!["row".to_string()];
    header.extend(circuit.elements().iter().map(|e| e.name.clone()));
    let body = rows.iter().zip(m).map(|(&b, row)| {
        let mut r = vec![circuit.elements()[b].name.clone()];
        r.extend(row.iter().map(|x| x.to_string()));
        r
    });
    table(header, body)
}

/// Cut-set matrix `Q`, loop matrix `B` and the tree/link partition.
pub fn topology_csvs(circuit: &Circuit, topo: &Topology) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let m = &topo.coords.matrices;
    let q = matrix_csv(circuit, &topo.partition.tree, &m.q);
    let b = matrix_csv(circuit, &topo.partition.cotree, &m.b);
    let part = table(
        vec!["branch".into(), "kind".into(), "role".into()],
        circuit.elements().iter().enumerate().map(|(i, e)| {
            let role = if topo.partition.tree.contains(&i) { "tree" } else { "link" };
            vec![e.name.clone(), e.kind.tag().to_string(), role.to_string()]
        }),
    );
    (q, b, part)
}

pub fn action_csv(traj: &Trajectory, values: &[LagrangianValue]) -> Vec<u8> {
    let header = [
        "t",
        "total_re",
        "total_im",
        "inductive",
        "capacitive",
        "memristive_im",
        "synaptic_im",
        "output",
        "hidden_im",
        "extrapolated",
    ]
    .map(String::from)
    .to_vec();
    let rows = values.iter().enumerate().map(|(n, l)| {
        let p = &l.parts;
        vec![
            num(traj.grid.time(n)),
            num(l.total.re),
            num(l.total.im),
            num(p.inductive.re),
            num(p.capacitive.re),
            num(p.memristive.im),
            num(p.synaptic.im),
            num(p.output.re),
            num(p.hidden.im),
            l.extrapolated.to_string(),
        ]
    });
    table(header, rows)
}

pub fn el_residual_csv(circuit: &Circuit, res: &[ElResidual]) -> Vec<u8> {
    table(
        vec!["coordinate".into(), "interior_max".into(), "endpoint_abs".into()],
        res.iter().map(|r| {
            vec![
                circuit.elements()[r.branch].name.clone(),
                num(r.interior_max(1)),
                num(r.signal.values().last().map(|z| z.norm()).unwrap_or(0.0)),
            ]
        }),
    )
}

pub fn gradcheck_csv(circuit: &Circuit, est: &GradientEstimate, oracle: &[f64]) -> Vec<u8> {
    let header = [
        "synapse", "g", "estimate", "oracle", "ratio", "sign_match", "E_beta", "E_free",
    ]
    .map(String::from)
    .to_vec();
    let rows = est.synapses.iter().enumerate().map(|(k, &l)| {
        let (e, o) = (est.values[k], oracle[k]);
        let (eb, e0) = est.raw_half_energies[k];
        vec![
            circuit.elements()[l].name.clone(),
            num(circuit.conductance(l).unwrap_or(f64::NAN)),
            num(e),
            num(o),
            num(e / o),
            ((e >= 0.0) == (o >= 0.0)).to_string(),
            num(eb),
            num(e0),
        ]
    });
    table(header, rows)
}

/// Key/value summary of a gradient check.
pub fn summary_csv(pairs: &[(&str, String)]) -> Vec<u8> {
    table(
        vec!["key".into(), "value".into()],
        pairs.iter().map(|(k, v)| vec![k.to_string(), v.clone()]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub dt: f64,
    pub cosine: f64,
    pub scale: f64,
    pub signs_match: bool,
}

pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    table(
        ["beta", "dt", "cosine", "scale", "all_signs_match"].map(String::from).to_vec(),
        rows.iter().map(|r| {
            vec![
                num(r.beta),
                num(r.dt),
                num(r.cosine),
                num(r.scale),
                r.signs_match.to_string(),
            ]
        }),
    )
}

/// `epoch, example, J, grad_norm, g_<name>...` and, when the oracle ran,
/// `cosine`.
pub fn training_csv(log: &TrainingLog) -> Vec<u8> {
    let with_oracle = log.records.iter().any(|r| r.estimate.agreement.is_some());
    let mut header: Vec<String> = ["epoch", "example", "J", "grad_norm"].map(String::from).to_vec();
    header.extend(log.synapse_names.iter().map(|n| format!("g_{n}")));
    if with_oracle {
        header.push("cosine".into());
    }
    let rows = log.records.iter().map(|r| {
        let mut row = vec![r.epoch.to_string(), r.example.to_string(), num(r.loss), num(r.grad_norm)];
        row.extend(r.conductances.iter().map(|&g| num(g)));
        if with_oracle {
            row.push(r.estimate.agreement.map(|a| num(a.cosine)).unwrap_or_default());
        }
        row
    });
    table(header, rows)
}

pub fn series_csv(times: impl Iterator<Item = f64>, values: &[f64]) -> Vec<u8> {
    table(
        vec!["t".into(), "value".into()],
        times.zip(values).map(|(t, v)| vec![num(t), num(*v)]),
    )
}

/// Reads a `t,value` table; returns the columns.
pub fn read_series(bytes: &[u8]) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| format!("row {}: {e}", i + 2))?;
        if rec.len() < 2 {
            return Err(format!("row {}: expected `t,value`", i + 2));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("row {}: `{s}` is not a number", i + 2))
        };
        t.push(parse(&rec[0])?);
        v.push(parse(&rec[1])?);
    }
    Ok((t, v))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a sibling temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Plain `key=value` record of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<(PathBuf, String)>,
    pub config: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        Self {
            command: command.into(),
            args,
            version: env!("CARGO_PKG_VERSION").into(),
            ..Default::default()
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push((path.to_path_buf(), sha256_hex(bytes)));
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.into(), value.to_string()));
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("command={}\nversion={}\n", self.command, self.version);
        s.push_str(&format!("args={}\n", self.args.join(" ")));
        for (i, (p, h)) in self.inputs.iter().enumerate() {
            s.push_str(&format!("input.{i}.path={}\ninput.{i}.sha256={h}\n", p.display()));
        }
        if let Some(seed) = self.seed {
            s.push_str(&format!("seed={seed}\n"));
        }
        for (k, v) in &self.config {
            s.push_str(&format!("config.{k}={v}\n"));
        }
        for (i, p) in self.outputs.iter().enumerate() {
            s.push_str(&format!("output.{i}={}\n", p.display()));
        }
        s
    }
}

/// Collects outputs, then commits the manifest followed by every file.
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((self.dir.join(name), bytes));
    }

    pub fn commit(self, mut manifest: RunManifest) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)?;
        manifest.outputs = self.files.iter().map(|(p, _)| p.clone()).collect();
        let mpath = self.dir.join("manifest.txt");
        atomic_write(&mpath, manifest.to_text().as_bytes())?;
        for (p, b) in &self.files {
            atomic_write(p, b)?;
        }
        let mut out = manifest.outputs;
        out.push(mpath);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip() {
        let bytes = series_csv([0.0, 0.5, 1.0].into_iter(), &[1.0, -2.5, 3e-9]);
        let (t, v) = read_series(&bytes).unwrap();
        assert_eq!(t, vec![0.0, 0.5, 1.0]);
        assert_eq!(v, vec![1.0, -2.5, 3e-9]);
        assert!(read_series(b"t,value\n0,x\n").is_err());
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
