//! Reading discretized curves and coefficient series, least-squares fitting
//! onto an orthonormal Fourier basis, and report serialization.

use std::f64::consts::PI;
use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};
use crate::model::CoefSeries;
use crate::simulate::{AlphaRate, McResult};
use crate::test::TestReport;

/// Curves sampled on a common grid in `[0, 1]`; row `t` is curve `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    pub values: DMatrix<f64>,
    pub grid: Vec<f64>,
}

impl GridSeries {
    pub fn new(values: DMatrix<f64>, grid: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
        }
        if values.ncols() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.ncols(),
            });
        }
        if !is_unit_grid(&grid) {
            return Err(Error::InvalidArgument(
                "grid must be strictly increasing within [0, 1]".into(),
            ));
        }
        Ok(GridSeries { values, grid })
    }

    /// `m` equispaced points `i/m`, `i = 0..m`.
    pub fn uniform_grid(m: usize) -> Vec<f64> {
        (0..m).map(|i| i as f64 / m as f64).collect()
    }

    /// Element-wise square root; fails on negative values.
    pub fn sqrt_transform(&self) -> Result<GridSeries> {
        if let Some((idx, v)) = self.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            let (row, col) = (idx % self.values.nrows(), idx / self.values.nrows());
            return Err(Error::InvalidArgument(format!(
                "square root of negative value {v} at curve {}, point {}",
                row + 1,
                col + 1
            )));
        }
        Ok(GridSeries {
            values: self.values.map(f64::sqrt),
            grid: self.grid.clone(),
        })
    }
}

fn is_unit_grid(grid: &[f64]) -> bool {
    grid.windows(2).all(|w| w[0] < w[1]) && grid.iter().all(|&u| (0.0..=1.0).contains(&u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeaderMode {
    /// Treat the first row as grid points when it is strictly increasing
    /// within `[0, 1]` and more rows follow.
    Auto,
    Present,
    Absent,
}

/// Orthonormal Fourier system on `[0, 1]` of odd size `p`:
/// `1, √2 sin(2πu), √2 cos(2πu), √2 sin(4πu), …`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    pub size: usize,
}

impl BasisSpec {
    pub fn fourier(size: usize) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "Fourier basis size must be odd and positive, got {size}"
            )));
        }
        Ok(BasisSpec { size })
    }

    /// Basis functions evaluated at `u`.
    pub fn eval(&self, u: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.size);
        out.push(1.0);
        let r2 = std::f64::consts::SQRT_2;
        for k in 1..=(self.size - 1) / 2 {
            let arg = 2.0 * PI * k as f64 * u;
            out.push(r2 * arg.sin());
            out.push(r2 * arg.cos());
        }
        out
    }

    pub fn design(&self, grid: &[f64]) -> DMatrix<f64> {
        let rows: Vec<Vec<f64>> = grid.iter().map(|&u| self.eval(u)).collect();
        DMatrix::from_fn(grid.len(), self.size, |i, k| rows[i][k])
    }
}

fn parse_cell(path: &Path, row: usize, column: usize, cell: &str) -> Result<f64> {
    let trimmed = cell.trim();
    trimmed
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            row,
            column,
            message: format!("not a finite number: {trimmed:?}"),
        })
}

/// Rectangular numeric CSV; rows and columns in error messages are 1-based.
fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(j, c)| parse_cell(path, row, j + 1, c))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if values.len() != first.len() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    row,
                    column: values.len().min(first.len()) + 1,
                    message: format!(
                        "ragged row: {} fields, expected {}",
                        values.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            row: 0,
            column: 0,
            message: "file contains no data".into(),
        });
    }
    Ok(rows)
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

pub fn read_grid_csv(path: impl AsRef<Path>) -> Result<GridSeries> {
    read_grid_csv_with(path, HeaderMode::Auto)
}

pub fn read_grid_csv_with(path: impl AsRef<Path>, header: HeaderMode) -> Result<GridSeries> {
    let path = path.as_ref();
    let mut rows = read_numeric_csv(path)?;
    let has_header = match header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => rows.len() > 1 && rows[0].len() >= 2 && is_unit_grid(&rows[0]),
    };
    let grid = if has_header {
        let grid = rows.remove(0);
        if rows.is_empty() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                row: 1,
                column: 0,
                message: "header present but no curves follow".into(),
            });
        }
        grid
    } else {
        GridSeries::uniform_grid(rows[0].len())
    };
    GridSeries::new(to_matrix(&rows), grid)
}

/// Coefficient CSV: `n` rows × `p` columns, no header, time-ordered.
pub fn read_coef_csv(path: impl AsRef<Path>) -> Result<CoefSeries> {
    let rows = read_numeric_csv(path.as_ref())?;
    CoefSeries::new(to_matrix(&rows))
}

fn push_row<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let line: Vec<String> = values.map(|v| format!("{v:?}")).collect();
    out.push_str(&line.join(","));
    out.push('\n');
}

/// Values are written in shortest round-trip form, so reading back is exact.
pub fn render_coef_csv(series: &CoefSeries) -> String {
    let mut out = String::new();
    for row in series.matrix().row_iter() {
        push_row(&mut out, row.iter());
    }
    out
}

pub fn write_coef_csv(series: &CoefSeries, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), render_coef_csv(series))?;
    Ok(())
}

/// Grid points as the first row, then one row per curve.
pub fn write_grid_csv(series: &GridSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    push_row(&mut out, series.grid.iter());
    for row in series.values.row_iter() {
        push_row(&mut out, row.iter());
    }
    std::fs::write(path.as_ref(), out)?;
    Ok(())
}

/// Least-squares coefficients of every curve in the basis.
pub fn fit_basis(series: &GridSeries, basis: BasisSpec) -> Result<CoefSeries> {
    let m = series.grid.len();
    let p = basis.size;
    if m < p {
        return Err(Error::InvalidArgument(format!(
            "{m} grid points cannot determine {p} basis coefficients"
        )));
    }
    let design = basis.design(&series.grid);
    let svd = design.svd(true, true);
    let largest = svd.singular_values.max();
    let smallest = svd.singular_values.min();
    if smallest <= 1e-10 * largest {
        return Err(Error::InvalidArgument(format!(
            "basis of size {p} is collinear on this grid"
        )));
    }
    let pinv = svd
        .pseudo_inverse(0.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    CoefSeries::new(&series.values * pinv.transpose())
}

/// Basis expansion of every coefficient row evaluated on `grid`.
pub fn evaluate_basis(coefs: &CoefSeries, basis: BasisSpec, grid: &[f64]) -> Result<DMatrix<f64>> {
    if coefs.p() != basis.size {
        return Err(Error::DimensionMismatch {
            expected: basis.size,
            found: coefs.p(),
        });
    }
    Ok(coefs.matrix() * basis.design(grid).transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

pub fn render_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), render_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let file = File::open(path.as_ref())?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Spectrum table `j, omega, t_n_j`, followed by one `crit_<alpha>` column
/// per requested level.
pub fn render_spectrum_csv(report: &TestReport, alphas: &[f64]) -> Result<Vec<u8>> {
    let crits = alphas
        .iter()
        .map(|&a| crate::distributions::gumbel_quantile(1.0 - a))
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["j".to_string(), "omega".into(), "t_n_j".into()];
    header.extend(alphas.iter().map(|a| format!("crit_{a}")));
    w.write_record(&header)?;
    for row in report.spectrum() {
        let mut rec = vec![row.j.to_string(), format!("{:?}", row.omega), format!("{:?}", row.t_n_j)];
        rec.extend(crits.iter().map(|c| format!("{c:?}")));
        w.write_record(&rec)?;
    }
    finish_csv(w)
}

pub fn write_spectrum_csv(report: &TestReport, alphas: &[f64], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), render_spectrum_csv(report, alphas)?)?;
    Ok(())
}

pub fn render_report(report: &TestReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => render_json(report),
        Format::Csv => render_spectrum_csv(report, &[]),
    }
}

pub fn write_report(report: &TestReport, path: impl AsRef<Path>, format: Format) -> Result<()> {
    std::fs::write(path.as_ref(), render_report(report, format)?)?;
    Ok(())
}

pub const MC_CSV_HEADER: [&str; 5] = ["alpha", "rate", "standard_error", "replications", "failures"];

pub(crate) fn mc_csv_fields(result: &McResult, a: &AlphaRate) -> [String; 5] {
    [
        format!("{:?}", a.alpha),
        format!("{:?}", a.rate),
        format!("{:?}", a.standard_error),
        result.replications.to_string(),
        result.failures.to_string(),
    ]
}

/// One row per level: `alpha, rate, standard_error, replications, failures`.
pub fn render_mc_result(result: &McResult, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => render_json(result),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(MC_CSV_HEADER)?;
            for a in &result.per_alpha {
                w.write_record(mc_csv_fields(result, a))?;
            }
            finish_csv(w)
        }
    }
}

pub fn write_mc_result(result: &McResult, path: impl AsRef<Path>, format: Format) -> Result<()> {
    std::fs::write(path.as_ref(), render_mc_result(result, format)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn reads_plain_grid() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "g.csv", "1,2,3,4\n5,6,7,8\n9,10,11,12\n");
        let g = read_grid_csv(&p).unwrap();
        assert_eq!(g.values.shape(), (3, 4));
        assert_eq!(g.grid, vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(g.values[(2, 3)], 12.0);
    }

    #[test]
    fn reads_header_grid() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "g.csv", "0,0.25,0.5,1\n5,6,7,8\n9,10,11,12\n");
        let g = read_grid_csv(&p).unwrap();
        assert_eq!(g.grid, vec![0.0, 0.25, 0.5, 1.0]);
        assert_eq!(g.values.nrows(), 2);
        let g = read_grid_csv_with(&p, HeaderMode::Absent).unwrap();
        assert_eq!(g.values.nrows(), 3);
    }

    #[test]
    fn reports_ragged_and_bad_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "g.csv", "1,2,3\n4,5\n");
        match read_grid_csv(&p).unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            e => panic!("unexpected {e}"),
        }
        let p = write_file(&dir, "h.csv", "1,2,3\n4,x,6\n");
        match read_grid_csv(&p).unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (2, 2)),
            e => panic!("unexpected {e}"),
        }
        let p = write_file(&dir, "e.csv", "");
        assert!(matches!(read_grid_csv(&p), Err(Error::Parse { .. })));
        assert!(matches!(
            read_coef_csv(dir.path().join("missing.csv")),
            Err(Error::Csv(_)) | Err(Error::Io(_))
        ));
    }

    #[test]
    fn constant_curve_fits_first_coefficient() {
        for m in [5, 13, 48] {
            let grid = GridSeries::uniform_grid(m);
            let g = GridSeries::new(DMatrix::from_element(2, m, 1.0), grid).unwrap();
            let c = fit_basis(&g, BasisSpec::fourier(5).unwrap()).unwrap();
            assert!((c.matrix()[(0, 0)] - 1.0).abs() < 1e-12);
            assert!(c.matrix().columns(1, 4).amax() < 1e-12);
        }
    }

    #[test]
    fn cosine_recovers_unit_coefficient() {
        let grid = GridSeries::uniform_grid(48);
        let values = DMatrix::from_fn(1, 48, |_, i| 2f64.sqrt() * (2.0 * PI * grid[i]).cos());
        let g = GridSeries::new(values, grid).unwrap();
        let c = fit_basis(&g, BasisSpec::fourier(21).unwrap()).unwrap();
        for k in 0..21 {
            let want = if k == 2 { 1.0 } else { 0.0 };
            assert!((c.matrix()[(0, k)] - want).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn fit_is_a_contraction() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let grid = GridSeries::uniform_grid(48);
        let values = DMatrix::from_fn(20, 48, |_, _| rng.random_range(-1.0..1.0));
        let g = GridSeries::new(values.clone(), grid.clone()).unwrap();
        let basis = BasisSpec::fourier(21).unwrap();
        let c = fit_basis(&g, basis).unwrap();
        let fitted = evaluate_basis(&c, basis, &grid).unwrap();
        for t in 0..20 {
            let resid = (values.row(t) - fitted.row(t)).norm();
            assert!(resid <= values.row(t).norm());
        }
    }

    #[test]
    fn in_span_curves_are_reproduced() {
        let basis = BasisSpec::fourier(7).unwrap();
        let coefs = CoefSeries::from_rows(&[vec![0.3, -1.0, 0.5, 0.0, 2.0, 0.1, -0.7]]).unwrap();
        let mut norms = Vec::new();
        for m in [48, 480] {
            let grid = GridSeries::uniform_grid(m);
            let values = evaluate_basis(&coefs, basis, &grid).unwrap();
            let g = GridSeries::new(values.clone(), grid.clone()).unwrap();
            let fit = fit_basis(&g, basis).unwrap();
            let back = evaluate_basis(&fit, basis, &grid).unwrap();
            assert!((back - values).amax() < 1e-10);
            norms.push(fit.row(0).norm());
        }
        assert!((norms[0] - norms[1]).abs() < 1e-10);
    }

    #[test]
    fn fit_errors() {
        let g = GridSeries::new(DMatrix::zeros(1, 4), GridSeries::uniform_grid(4)).unwrap();
        assert!(fit_basis(&g, BasisSpec::fourier(5).unwrap()).is_err());
        // sin(2π·2u) vanishes on the 4-point grid
        let g = GridSeries::new(DMatrix::zeros(1, 4), GridSeries::uniform_grid(4)).unwrap();
        assert!(fit_basis(&g, BasisSpec { size: 5 }).is_err());
        let g = GridSeries::new(DMatrix::zeros(1, 6), GridSeries::uniform_grid(6)).unwrap();
        assert!(fit_basis(&g, BasisSpec { size: 5 }).is_ok());
        assert!(BasisSpec::fourier(4).is_err());
        assert!(BasisSpec::fourier(0).is_err());
    }

    #[test]
    fn sqrt_transform_rejects_negatives() {
        let g = GridSeries::new(DMatrix::from_row_slice(1, 2, &[4.0, 9.0]), vec![0.0, 0.5]).unwrap();
        assert_eq!(g.sqrt_transform().unwrap().values[(0, 1)], 3.0);
        let g = GridSeries::new(DMatrix::from_row_slice(1, 2, &[4.0, -1.0]), vec![0.0, 0.5]).unwrap();
        assert!(g.sqrt_transform().is_err());
    }

    #[test]
    fn coefficient_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let s = CoefSeries::from_rows(&[
            vec![0.1, -1.0 / 3.0, 1e-300],
            vec![std::f64::consts::PI, 12345.678901234567, -0.0],
        ])
        .unwrap();
        let p = dir.path().join("c.csv");
        write_coef_csv(&s, &p).unwrap();
        assert_eq!(read_coef_csv(&p).unwrap(), s);
    }

    #[test]
    fn report_serialization() {
        let dir = tempfile::tempdir().unwrap();
        let report = TestReport {
            t_n: 3.123456789012345,
            p_value: 0.04,
            reject: true,
            alpha: 0.05,
            critical_value: 2.97,
            a_n: 3,
            argmax_j: 2,
            implied_period: 4.5,
            n: 9,
            q: 4,
            lambda_hats: vec![1.0, 0.5],
            rho_norm: 0.2,
            k_used: 2,
            per_freq: vec![0.1, 3.123456789012345, -1.0, 0.0],
            warnings: vec![],
        };
        let p = dir.path().join("r.json");
        write_report(&report, &p, Format::Json).unwrap();
        let back: TestReport = read_json(&p).unwrap();
        assert!((back.t_n - report.t_n).abs() < 1e-12);
        let text = std::fs::read_to_string(&p).unwrap();
        for key in ["t_n", "p_value", "reject", "alpha", "a_n", "argmax_j", "implied_period", "lambda_hats", "per_freq", "warnings"] {
            assert!(text.contains(&format!("\"{key}\"")), "{key}");
        }

        let p = dir.path().join("s.csv");
        write_spectrum_csv(&report, &[0.05], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + report.q);
        assert_eq!(lines[0], "j,omega,t_n_j,crit_0.05");

        let mc = McResult {
            replications: 10,
            failures: 0,
            per_alpha: vec![AlphaRate { alpha: 0.05, rate: 0.1, standard_error: 0.0949 }],
            mean_period: None,
        };
        let p = dir.path().join("m.csv");
        write_mc_result(&mc, &p, Format::Csv).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("alpha,rate,standard_error"));
        assert!(text.contains("0.0949"));
        let p = dir.path().join("m.json");
        write_mc_result(&mc, &p, Format::Json).unwrap();
        let back: McResult = read_json(&p).unwrap();
        assert_eq!(back, mc);
    }
}
