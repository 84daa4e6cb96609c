//! Desk-scale reruns of published error tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kronpde::benchmarks::{benchmark_by_name, relative_l2_values};
use kronpde::{Error, Result};
use rayon::prelude::*;

use crate::commands::Prepared;
use crate::manifest::{RunManifest, Resolved};

pub const TABLE_IDS: [&str; 4] = ["easy-small", "hard-small", "fd-comparison", "fill-distance-trend"];

/// Tolerance band for optimizer-dependent results.
pub const SKS_BAND: f64 = 10.0;
/// Tolerance band for deterministic finite-difference results.
pub const FD_BAND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Sks,
    Fd,
}

/// One configuration with its published error.
#[derive(Debug, Clone)]
pub struct Recipe {
    pub row: String,
    pub method: Method,
    pub config: Resolved,
    pub published: f64,
    /// `None` for rows that only feed a trend check.
    pub band: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub row: String,
    pub published: f64,
    pub obtained: Option<f64>,
    pub band: Option<f64>,
    pub pass: bool,
    pub note: String,
}

impl Outcome {
    pub fn ratio(&self) -> Option<f64> {
        self.obtained.map(|o| o / self.published)
    }
}

/// Tuned SKS configuration for a benchmark and grid.
pub fn sks_config(benchmark: &str, param: Option<f64>, shape: &[usize], out: &Path) -> Result<Resolved> {
    let mut m = RunManifest::default();
    m.benchmark.name = benchmark.into();
    match benchmark {
        "burgers" => m.benchmark.nu = param,
        "allen-cahn" => m.benchmark.a = param,
        "eikonal" => m.benchmark.eps = param,
        _ => {}
    }
    m.grid.shape = Some(shape.to_vec());
    m.optimizer.max_iters = Some(500_000);
    m.optimizer.patience = Some(50_000);
    m.optimizer.log_every = Some(5_000);
    m.output.dir = out.to_path_buf();
    m.resolve()
}

fn sks(row: &str, benchmark: &str, param: Option<f64>, n: [usize; 2], band: Option<f64>, out: &Path) -> Result<Recipe> {
    let config = sks_config(benchmark, param, &n, out)?;
    let published = published_value(&config, "sks", &n)?;
    Ok(Recipe {
        row: row.into(),
        method: Method::Sks,
        config,
        published,
        band,
    })
}

fn fd(row: &str, benchmark: &str, param: Option<f64>, n: [usize; 2], out: &Path) -> Result<Recipe> {
    let config = sks_config(benchmark, param, &n, out)?;
    let published = published_value(&config, "fd", &n)?;
    Ok(Recipe {
        row: row.into(),
        method: Method::Fd,
        config,
        published,
        band: Some(FD_BAND),
    })
}

fn published_value(config: &Resolved, label: &str, shape: &[usize]) -> Result<f64> {
    let spec = config.spec()?;
    spec.anchors
        .iter()
        .find(|a| a.label == label && a.shape == shape)
        .map(|a| a.value)
        .ok_or_else(|| Error::Config(format!("no published {label} value for {} on {shape:?}", spec.name)))
}

/// Configurations behind a table id.
pub fn recipes(id: &str, out: &Path) -> Result<Vec<Recipe>> {
    let b = Some(SKS_BAND);
    match id {
        "easy-small" => Ok(vec![
            sks("elliptic-1200", "elliptic", None, [35, 35], b, out)?,
            sks("eikonal-600", "eikonal", Some(0.1), [25, 25], b, out)?,
            sks("burgers-0.02-2400", "burgers", Some(0.02), [49, 49], b, out)?,
        ]),
        "hard-small" => Ok(vec![sks("allen-cahn-15-2400", "allen-cahn", Some(15.0), [49, 49], b, out)?]),
        "fd-comparison" => Ok(vec![
            fd("elliptic-fd-300", "elliptic", None, [18, 18], out)?,
            fd("elliptic-fd-600", "elliptic", None, [25, 25], out)?,
            fd("elliptic-fd-1200", "elliptic", None, [35, 35], out)?,
            fd("elliptic-fd-2400", "elliptic", None, [49, 49], out)?,
            fd("allen-cahn-15-fd-6400", "allen-cahn", Some(15.0), [80, 80], out)?,
        ]),
        "fill-distance-trend" => Ok(vec![
            sks("elliptic-300", "elliptic", None, [18, 18], None, out)?,
            sks("elliptic-600", "elliptic", None, [25, 25], None, out)?,
            sks("elliptic-1200", "elliptic", None, [35, 35], None, out)?,
        ]),
        other => Err(Error::Config(format!(
            "unknown table {other:?}; expected one of {}",
            TABLE_IDS.join(", ")
        ))),
    }
}

fn obtain(recipe: &Recipe) -> Result<f64> {
    match recipe.method {
        Method::Sks => {
            let p = Prepared::new(recipe.config.clone())?;
            let r = p.solve()?;
            r.best_rel_l2_over_trace
                .ok_or_else(|| Error::Config(format!("{} has no ground truth", recipe.row)))
        }
        Method::Fd => {
            let spec = benchmark_by_name(&recipe.config.benchmark, recipe.config.param)?;
            let grid = spec.grid(&recipe.config.shape)?;
            let u = spec.fd_solve(&grid, 1e-10, 50)?;
            let truth = spec
                .problem
                .ground_truth
                .clone()
                .ok_or_else(|| Error::Config(format!("{} has no ground truth", recipe.row)))?;
            let t: Vec<f64> = grid.points().iter().map(|x| truth(x)).collect();
            relative_l2_values(u.as_slice(), &t)
        }
    }
}

/// Runs every recipe of `id` and judges each against its band.
pub fn reproduce(id: &str, threads: usize, out: &Path) -> Result<Vec<Outcome>> {
    let recipes = recipes(id, out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<f64>> = pool.install(|| recipes.par_iter().map(obtain).collect());
    let mut outcomes: Vec<Outcome> = recipes
        .iter()
        .zip(results)
        .map(|(r, res)| {
            let (obtained, note) = match res {
                Ok(v) => (Some(v), String::new()),
                Err(e) => (None, e.to_string()),
            };
            let pass = match (obtained, r.band) {
                (Some(v), Some(band)) => v <= r.published * band,
                (Some(_), None) => true,
                (None, _) => false,
            };
            Outcome {
                row: r.row.clone(),
                published: r.published,
                obtained,
                band: r.band,
                pass,
                note,
            }
        })
        .collect();
    if id == "fill-distance-trend" {
        let errs: Vec<Option<f64>> = outcomes.iter().map(|o| o.obtained).collect();
        let decreasing = errs.windows(2).all(|w| matches!(w, [Some(a), Some(b)] if b < a));
        let shown: Vec<String> = errs
            .iter()
            .map(|e| e.map(|v| format!("{v:.2e}")).unwrap_or_else(|| "n/a".into()))
            .collect();
        outcomes.push(Outcome {
            row: "strictly-decreasing".into(),
            published: f64::NAN,
            obtained: None,
            band: None,
            pass: decreasing,
            note: shown.join(" > "),
        });
    }
    Ok(outcomes)
}

pub const REPORT_HEADER: &str = "row,published,obtained,ratio,band,pass,note";

/// Side-by-side table, as printed and as CSV.
pub fn render(outcomes: &[Outcome]) -> (String, String) {
    let mut table = String::new();
    let mut csv = format!("{REPORT_HEADER}\n");
    let _ = writeln!(
        table,
        "{:<24} {:>10} {:>10} {:>8} {:>6}  result",
        "row", "published", "obtained", "ratio", "band"
    );
    let num = |v: Option<f64>, prec: usize| match v {
        Some(x) if x.is_finite() => format!("{x:.prec$e}"),
        _ => "-".to_string(),
    };
    for o in outcomes {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let band = o.band.map(|b| format!("x{b}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            table,
            "{:<24} {:>10} {:>10} {:>8} {:>6}  {verdict} {}",
            o.row,
            num(Some(o.published), 2),
            num(o.obtained, 2),
            o.ratio().filter(|r| r.is_finite()).map(|r| format!("{r:.2}")).unwrap_or_else(|| "-".into()),
            band,
            o.note
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            o.row,
            num(Some(o.published), 6),
            num(o.obtained, 6),
            o.ratio().filter(|r| r.is_finite()).map(|r| r.to_string()).unwrap_or_default(),
            o.band.map(|b| b.to_string()).unwrap_or_default(),
            verdict,
            o.note.replace(',', ";")
        );
    }
    (table, csv)
}

pub fn write_report(outcomes: &[Outcome], out: &Path, id: &str) -> Result<String> {
    let (table, csv) = render(outcomes);
    fs::create_dir_all(out)?;
    fs::write(out.join(format!("{id}.csv")), csv)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_table_resolves() {
        let out = Path::new("unused");
        for id in TABLE_IDS {
            let r = recipes(id, out).unwrap();
            assert!(!r.is_empty(), "{id}");
        }
    }

    #[test]
    fn unknown_table_is_rejected() {
        let err = recipes("nope", Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("easy-small"), "{err}");
    }

    #[test]
    fn render_emits_one_csv_row_per_outcome() {
        let o = |v: f64| Outcome {
            row: "r".into(),
            published: 1.0,
            obtained: Some(v),
            band: None,
            pass: true,
            note: String::new(),
        };
        let (table, csv) = render(&[o(1e-2), o(2e-2)]);
        assert!(table.contains("PASS"));
        assert_eq!(csv.lines().count(), 3);
    }
}
