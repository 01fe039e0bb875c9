use std::io::{Read, Write};

use rand::SeedableRng;

use super::{ControlProblem, MarkovEmbedding, ScenarioRng};
use crate::error::{check_dim, Error, Result};

/// One sampled initial state and augmented-uncertainty path `ζ_0..ζ_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub x0: Vec<f64>,
    /// `T + 1` entries.
    pub zeta: Vec<Vec<f64>>,
    /// Innovations `w_1..w_T`; `innovations[t - 1]` produced `zeta[t]`.
    pub innovations: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.zeta.len() - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.scenarios.first().map_or(0, Scenario::horizon)
    }

    /// Columnar dump: one row per `(s, t)`. Innovation columns are empty at `t = 0`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let Some(first) = self.scenarios.first() else {
            return Ok(());
        };
        let nx = first.x0.len();
        let nz = first.zeta[0].len();
        let nw = first.innovations.first().map_or(0, Vec::len);
        let mut header = vec!["s".to_string(), "t".to_string()];
        header.extend((1..=nx).map(|i| format!("xbar_{i}")));
        header.extend((1..=nz).map(|i| format!("zeta_{i}")));
        header.extend((1..=nw).map(|i| format!("w_{i}")));
        w.write_record(&header)?;
        for (s, sc) in self.scenarios.iter().enumerate() {
            for (t, z) in sc.zeta.iter().enumerate() {
                let mut row = vec![s.to_string(), t.to_string()];
                row.extend(sc.x0.iter().map(|v| format!("{v:e}")));
                row.extend(z.iter().map(|v| format!("{v:e}")));
                if t == 0 {
                    row.extend(std::iter::repeat_n(String::new(), nw));
                } else {
                    row.extend(sc.innovations[t - 1].iter().map(|v| format!("{v:e}")));
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, seed: u64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
        let (nx, nz, nw) = (count("xbar_"), count("zeta_"), count("w_"));
        check_dim("scenario csv columns", 2 + nx + nz + nw, header.len())?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("bad number {s:?}: {e}")))
        };
        let mut scenarios: Vec<Scenario> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let s: usize = rec[0]
                .parse()
                .map_err(|e| Error::Format(format!("bad scenario index: {e}")))?;
            let t: usize = rec[1]
                .parse()
                .map_err(|e| Error::Format(format!("bad stage index: {e}")))?;
            let x0 = (0..nx).map(|i| parse(&rec[2 + i])).collect::<Result<Vec<_>>>()?;
            let z = (0..nz)
                .map(|i| parse(&rec[2 + nx + i]))
                .collect::<Result<Vec<_>>>()?;
            if t == 0 {
                if s != scenarios.len() {
                    return Err(Error::Format(format!("scenario {s} out of order")));
                }
                scenarios.push(Scenario {
                    x0,
                    zeta: vec![z],
                    innovations: Vec::new(),
                });
            } else {
                let sc = scenarios
                    .get_mut(s)
                    .ok_or_else(|| Error::Format(format!("scenario {s} has no t = 0 row")))?;
                if sc.zeta.len() != t {
                    return Err(Error::Format(format!("scenario {s} stage {t} out of order")));
                }
                let w = (0..nw)
                    .map(|i| parse(&rec[2 + nx + nz + i]))
                    .collect::<Result<Vec<_>>>()?;
                sc.zeta.push(z);
                sc.innovations.push(w);
            }
        }
        Ok(Self { scenarios, seed })
    }
}

/// Generator for scenario `s` under `seed`: one independent ChaCha stream per scenario.
pub(crate) fn scenario_rng(seed: u64, s: usize) -> ScenarioRng {
    let mut rng = ScenarioRng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

/// Draw `count` scenarios of horizon `horizon` (paths `ζ_0..ζ_T`).
pub fn sample_scenarios<P, E>(
    problem: &P,
    emb: &E,
    count: usize,
    horizon: usize,
    seed: u64,
) -> Result<ScenarioSet>
where
    P: ControlProblem + ?Sized,
    E: MarkovEmbedding + ?Sized,
{
    if count == 0 || horizon == 0 {
        return Err(Error::InvalidArgument(
            "scenario count and horizon must be at least 1".into(),
        ));
    }
    check_dim("embedding vs problem augmented dimension", problem.aug_dim(), emb.aug_dim())?;
    let scenarios = (0..count)
        .map(|s| {
            let mut rng = scenario_rng(seed, s);
            let x0 = problem.sample_initial_state(&mut rng);
            check_dim("sampled initial state", problem.state_dim(), x0.len())?;
            let z0 = problem.sample_initial_aug(&mut rng);
            check_dim("sampled initial augmented state", emb.aug_dim(), z0.len())?;
            let mut zeta = Vec::with_capacity(horizon + 1);
            let mut innovations = Vec::with_capacity(horizon);
            zeta.push(z0);
            for t in 1..=horizon {
                let w = emb.sample_innovation(&mut rng);
                let next = emb.step(&zeta[t - 1], &w);
                zeta.push(next);
                innovations.push(w);
            }
            Ok(Scenario {
                x0,
                zeta,
                innovations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioSet { scenarios, seed })
}
