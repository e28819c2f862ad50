//! Return/factor panels: CSV ingestion, excess returns, rolling windows and a
//! seeded factor-model market generator.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Dated T×p matrix of simple (excess) returns, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    pub dates: Vec<String>,
    pub assets: Vec<String>,
    pub values: DMatrix<f64>,
}

/// Dated T×K matrix of observed factor values.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    pub dates: Vec<String>,
    pub factors: Vec<String>,
    pub values: DMatrix<f64>,
}

/// Per-period risk-free rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskFreeSeries {
    pub dates: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelKind {
    Returns,
    Factors,
    RiskFree,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedPanel {
    Returns(ReturnsPanel),
    Factors(FactorPanel),
    RiskFree(RiskFreeSeries),
}

fn check_shape(dates: &[String], labels: &[String], values: &DMatrix<f64>) -> Result<()> {
    if values.nrows() != dates.len() || values.ncols() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} dates and {} labels for a {}x{} matrix",
            dates.len(),
            labels.len(),
            values.nrows(),
            values.ncols()
        )));
    }
    check_dates(dates)?;
    if let Some((i, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        let (row, col) = (i % values.nrows(), i / values.nrows());
        return Err(Error::Data(format!(
            "non-finite value at ({},{})",
            row + 1,
            col + 2
        )));
    }
    Ok(())
}

fn check_dates(dates: &[String]) -> Result<()> {
    for (i, pair) in dates.windows(2).enumerate() {
        match pair[0].cmp(&pair[1]) {
            std::cmp::Ordering::Less => {}
            std::cmp::Ordering::Equal => {
                return Err(Error::DuplicateDate {
                    row: i + 2,
                    date: pair[1].clone(),
                })
            }
            std::cmp::Ordering::Greater => {
                return Err(Error::NonMonotoneDates {
                    row: i + 2,
                    prev: pair[0].clone(),
                    next: pair[1].clone(),
                })
            }
        }
    }
    Ok(())
}

impl ReturnsPanel {
    pub fn new(dates: Vec<String>, assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        check_shape(&dates, &assets, &values)?;
        Ok(Self {
            dates,
            assets,
            values,
        })
    }

    pub fn n_periods(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    /// Restrict to the given row range `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            dates: self.dates[start..end].to_vec(),
            assets: self.assets.clone(),
            values: self.values.rows(start, end - start).into_owned(),
        }
    }
}

impl FactorPanel {
    pub fn new(dates: Vec<String>, factors: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        check_shape(&dates, &factors, &values)?;
        if factors.is_empty() {
            return Err(Error::Data("factor panel needs at least one factor".into()));
        }
        Ok(Self {
            dates,
            factors,
            values,
        })
    }

    pub fn n_factors(&self) -> usize {
        self.values.ncols()
    }
}

impl RiskFreeSeries {
    pub fn new(dates: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Dimension(
                "risk-free dates and values differ in length".into(),
            ));
        }
        check_dates(&dates)?;
        Ok(Self { dates, values })
    }
}

/// Normalize a period label to `YYYY-MM`.
///
/// Accepts `YYYY-MM`, `YYYY/MM`, `YYYYMM` and full dates (`YYYY-MM-DD`), which
/// are truncated to the month.
pub fn normalize_date(raw: &str) -> Result<String> {
    let s = raw.trim();
    let bad = || {
        Error::Data(format!(
            "unrecognized date label {raw:?} (expected YYYY-MM)"
        ))
    };
    let (year, month) = if s.len() == 6 && s.bytes().all(|b| b.is_ascii_digit()) {
        (&s[..4], &s[4..])
    } else if s.len() >= 7 && (s.as_bytes()[4] == b'-' || s.as_bytes()[4] == b'/') {
        (&s[..4], &s[5..7])
    } else {
        return Err(bad());
    };
    if !year.bytes().all(|b| b.is_ascii_digit()) || !month.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let m: u32 = month.parse().map_err(|_| bad())?;
    if !(1..=12).contains(&m) {
        return Err(bad());
    }
    Ok(format!("{year}-{month}"))
}

struct RawTable {
    labels: Vec<String>,
    dates: Vec<String>,
    values: DMatrix<f64>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Data(format!(
            "{}: expected a date column followed by at least one value column",
            path.display()
        )));
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let width = labels.len();
    let mut dates = Vec::new();
    let mut data = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let date = record
            .get(0)
            .filter(|d| !d.is_empty())
            .ok_or(Error::MissingValue { row, col: 1 })?;
        dates.push(normalize_date(date)?);
        for c in 0..width {
            let cell = record
                .get(c + 1)
                .filter(|v| !v.is_empty())
                .ok_or(Error::MissingValue { row, col: c + 2 })?;
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!("unparsable number {cell:?} at ({row},{})", c + 2))
            })?;
            data.push(v);
        }
        if record.len() > width + 1 {
            return Err(Error::Data(format!(
                "row {row} has {} cells, header has {}",
                record.len(),
                width + 1
            )));
        }
    }
    check_dates(&dates)?;
    let values = DMatrix::from_row_slice(dates.len(), width, &data);
    Ok(RawTable {
        labels,
        dates,
        values,
    })
}

pub fn load_returns(path: impl AsRef<Path>) -> Result<ReturnsPanel> {
    let t = read_table(path.as_ref())?;
    ReturnsPanel::new(t.dates, t.labels, t.values)
}

pub fn load_factors(path: impl AsRef<Path>) -> Result<FactorPanel> {
    let t = read_table(path.as_ref())?;
    FactorPanel::new(t.dates, t.labels, t.values)
}

pub fn load_riskfree(path: impl AsRef<Path>) -> Result<RiskFreeSeries> {
    let t = read_table(path.as_ref())?;
    if t.labels.len() != 1 {
        return Err(Error::Data(format!(
            "risk-free file must have exactly two columns (date,rf), found {}",
            t.labels.len() + 1
        )));
    }
    RiskFreeSeries::new(t.dates, t.values.column(0).iter().copied().collect())
}

pub fn load_panel(path: impl AsRef<Path>, kind: PanelKind) -> Result<LoadedPanel> {
    Ok(match kind {
        PanelKind::Returns => LoadedPanel::Returns(load_returns(path)?),
        PanelKind::Factors => LoadedPanel::Factors(load_factors(path)?),
        PanelKind::RiskFree => LoadedPanel::RiskFree(load_riskfree(path)?),
    })
}

/// Subtract the same-period risk-free rate from every cell.
pub fn to_excess(returns: &ReturnsPanel, riskfree: &RiskFreeSeries) -> Result<ReturnsPanel> {
    let lookup: HashMap<&str, f64> = riskfree
        .dates
        .iter()
        .map(String::as_str)
        .zip(riskfree.values.iter().copied())
        .collect();
    let mut values = returns.values.clone();
    for (t, date) in returns.dates.iter().enumerate() {
        let rf = *lookup
            .get(date.as_str())
            .ok_or_else(|| Error::Alignment(format!("no risk-free rate for {date}")))?;
        values.row_mut(t).add_scalar_mut(-rf);
    }
    Ok(ReturnsPanel {
        dates: returns.dates.clone(),
        assets: returns.assets.clone(),
        values,
    })
}

/// Restrict a return panel and a factor panel to their common dates.
pub fn align(returns: &ReturnsPanel, factors: &FactorPanel) -> Result<(ReturnsPanel, FactorPanel)> {
    let factor_rows: HashMap<&str, usize> = factors
        .dates
        .iter()
        .enumerate()
        .map(|(i, d)| (d.as_str(), i))
        .collect();
    let pairs: Vec<(usize, usize)> = returns
        .dates
        .iter()
        .enumerate()
        .filter_map(|(i, d)| factor_rows.get(d.as_str()).map(|&j| (i, j)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Alignment(
            "returns and factors share no dates".into(),
        ));
    }
    let r = ReturnsPanel {
        dates: pairs
            .iter()
            .map(|&(i, _)| returns.dates[i].clone())
            .collect(),
        assets: returns.assets.clone(),
        values: returns.values.select_rows(pairs.iter().map(|(i, _)| i)),
    };
    let f = FactorPanel {
        dates: r.dates.clone(),
        factors: factors.factors.clone(),
        values: factors.values.select_rows(pairs.iter().map(|(_, j)| j)),
    };
    Ok((r, f))
}

/// One rolling estimation window: train on `[train_start, train_end]`, evaluate
/// on `test_index = train_end + 1`.
#[derive(Debug, Clone, Copy)]
pub struct WindowView<'a> {
    pub train_start: usize,
    pub train_end: usize,
    pub test_index: usize,
    returns: &'a ReturnsPanel,
    factors: Option<&'a FactorPanel>,
}

impl<'a> WindowView<'a> {
    pub fn len(&self) -> usize {
        self.train_end + 1 - self.train_start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn train_returns(&self) -> DMatrix<f64> {
        self.returns
            .values
            .rows(self.train_start, self.len())
            .into_owned()
    }

    pub fn train_factors(&self) -> Option<DMatrix<f64>> {
        self.factors
            .map(|f| f.values.rows(self.train_start, self.len()).into_owned())
    }

    pub fn test_returns(&self) -> DVector<f64> {
        self.returns.values.row(self.test_index).transpose()
    }

    pub fn train_dates(&self) -> &'a [String] {
        &self.returns.dates[self.train_start..=self.train_end]
    }

    pub fn test_date(&self) -> &'a str {
        &self.returns.dates[self.test_index]
    }
}

/// Cut `T - T_I` no-look-ahead windows of length `T_I`.
pub fn rolling_windows<'a>(
    returns: &'a ReturnsPanel,
    factors: Option<&'a FactorPanel>,
    window_len: usize,
) -> Result<Vec<WindowView<'a>>> {
    let t = returns.n_periods();
    if window_len == 0 {
        return Err(Error::InvalidParameter(
            "window length must be positive".into(),
        ));
    }
    if t <= window_len {
        return Err(Error::InsufficientHistory {
            required: window_len,
            actual: t,
        });
    }
    if let Some(f) = factors {
        if f.dates != returns.dates {
            return Err(Error::Alignment(
                "factor dates differ from return dates; align the panels first".into(),
            ));
        }
    }
    Ok((0..t - window_len)
        .map(|i| WindowView {
            train_start: i,
            train_end: i + window_len - 1,
            test_index: i + window_len,
            returns,
            factors,
        })
        .collect())
}

/// Structure of the idiosyncratic error covariance Σ_u in a synthetic market.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorStructure {
    /// Σ_u = sd² I.
    Diagonal { sd: f64 },
    /// Σ_u = Ω⁻¹ with Ω unit-diagonal and `value` on every off-diagonal within
    /// `bandwidth` of the diagonal.
    BandedPrecision { bandwidth: usize, value: f64 },
    /// Unit-diagonal Σ_u whose off-diagonal pairs are nonzero with probability `density`.
    SparseCov { density: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarketSpec {
    pub p: usize,
    pub t: usize,
    pub k: usize,
    pub factor_cov: DMatrix<f64>,
    /// Mean of the factor draws; zero gives mean-zero returns.
    pub factor_mean: DVector<f64>,
    pub loading_scale: f64,
    pub error_structure: ErrorStructure,
    pub seed: u64,
}

impl SyntheticMarketSpec {
    /// Unit-variance independent factors with zero mean.
    pub fn new(
        p: usize,
        t: usize,
        k: usize,
        loading_scale: f64,
        error_structure: ErrorStructure,
        seed: u64,
    ) -> Self {
        Self {
            p,
            t,
            k,
            factor_cov: DMatrix::identity(k, k),
            factor_mean: DVector::zeros(k),
            loading_scale,
            error_structure,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub returns: ReturnsPanel,
    pub factors: FactorPanel,
    pub loadings: DMatrix<f64>,
    pub error_cov: DMatrix<f64>,
    pub true_cov: DMatrix<f64>,
    pub true_precision: DMatrix<f64>,
}

/// Monthly labels starting at 2000-01.
pub fn monthly_dates(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| format!("{:04}-{:02}", 2000 + i / 12, i % 12 + 1))
        .collect()
}

fn error_covariance(
    p: usize,
    structure: &ErrorStructure,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    match *structure {
        ErrorStructure::Diagonal { sd } => {
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::Spec(format!("error sd must be positive, got {sd}")));
            }
            Ok(DMatrix::identity(p, p) * (sd * sd))
        }
        ErrorStructure::BandedPrecision { bandwidth, value } => {
            let omega = DMatrix::from_fn(p, p, |i, j| {
                let d = i.abs_diff(j);
                if d == 0 {
                    1.0
                } else if d <= bandwidth {
                    value
                } else {
                    0.0
                }
            });
            linalg::spd_inverse(&omega).map_err(|_| {
                Error::Spec(format!(
                    "banded precision (bandwidth {bandwidth}, value {value}) is not SPD"
                ))
            })
        }
        ErrorStructure::SparseCov { density } => {
            if !(0.0..=1.0).contains(&density) {
                return Err(Error::Spec(format!(
                    "density must be in [0,1], got {density}"
                )));
            }
            let mut m = DMatrix::identity(p, p);
            for i in 0..p {
                for j in (i + 1)..p {
                    if rng.random::<f64>() < density {
                        let magnitude = 0.15 + 0.15 * rng.random::<f64>();
                        let v = if rng.random::<bool>() {
                            magnitude
                        } else {
                            -magnitude
                        };
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
            }
            Ok(m)
        }
    }
}

fn gaussian_rows(n: usize, chol: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let d = chol.nrows();
    let z = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    z * chol.transpose()
}

/// Draw a market from `y_t = B f_t + u_t` with Gaussian factors and errors.
///
/// Draw order (loadings, error structure, factors, errors) is fixed so a seed
/// reproduces the same panel bit for bit.
pub fn generate_synthetic(spec: &SyntheticMarketSpec) -> Result<SyntheticMarket> {
    let SyntheticMarketSpec { p, t, k, .. } = *spec;
    if p == 0 || t == 0 {
        return Err(Error::Spec("p and T must be positive".into()));
    }
    if spec.factor_cov.shape() != (k, k) || spec.factor_mean.len() != k {
        return Err(Error::Spec(format!(
            "factor covariance/mean must be sized for K={k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let loadings = DMatrix::from_fn(p, k, |_, _| {
        spec.loading_scale * rng.sample::<f64, _>(StandardNormal)
    });
    let error_cov = error_covariance(p, &spec.error_structure, &mut rng)?;

    let true_cov =
        linalg::symmetrize(&(&loadings * &spec.factor_cov * loadings.transpose() + &error_cov));
    let true_precision = linalg::spd_inverse(&true_cov)
        .map_err(|_| Error::Spec("implied covariance is not SPD".into()))?;
    let error_chol = error_cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Spec("error covariance is not SPD".into()))?
        .l();
    let factor_chol = if k == 0 {
        DMatrix::zeros(0, 0)
    } else {
        spec.factor_cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Spec("factor covariance is not SPD".into()))?
            .l()
    };

    let mut f = gaussian_rows(t, &factor_chol, &mut rng);
    for mut row in f.row_iter_mut() {
        row += spec.factor_mean.transpose();
    }
    let u = gaussian_rows(t, &error_chol, &mut rng);
    let y = &f * loadings.transpose() + u;

    let dates = monthly_dates(t);
    let returns = ReturnsPanel {
        dates: dates.clone(),
        assets: (1..=p).map(|i| format!("A{i:03}")).collect(),
        values: y,
    };
    let factors = FactorPanel {
        dates,
        factors: (1..=k).map(|i| format!("F{i}")).collect(),
        values: f,
    };
    Ok(SyntheticMarket {
        returns,
        factors,
        loadings,
        error_cov,
        true_cov,
        true_precision,
    })
}

fn write_rows<W: Write>(
    out: W,
    first: &str,
    labels: &[String],
    row_names: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![first.to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in row_names.iter().zip(values.row_iter()) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_returns_csv(path: impl AsRef<Path>, panel: &ReturnsPanel) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_rows(file, "date", &panel.assets, &panel.dates, &panel.values)
}

pub fn write_factors_csv(path: impl AsRef<Path>, panel: &FactorPanel) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_rows(file, "date", &panel.factors, &panel.dates, &panel.values)
}

/// Square matrix with asset labels on both axes.
pub fn write_matrix_csv(path: impl AsRef<Path>, labels: &[String], m: &DMatrix<f64>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_rows(file, "asset", labels, labels, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_panel() {
        let f = csv_file("date,AAA,BBB\n2000-01,0.01,0.02\n2000-02,-0.03,0.00\n2000-03,0.5,1e-3\n");
        let panel = load_returns(f.path()).unwrap();
        assert_eq!(panel.n_periods(), 3);
        assert_eq!(panel.n_assets(), 2);
        assert_eq!(panel.assets, vec!["AAA", "BBB"]);
        assert_eq!(panel.values[(2, 1)], 1e-3);
    }

    #[test]
    fn blank_cell_names_position() {
        let f = csv_file("date,A,B\n2000-01,0.01,0.02\n2000-02,,0.00\n");
        let err = load_returns(f.path()).unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 2, col: 2 }));
        assert_eq!(err.to_string(), "missing value at (2,2)");
    }

    #[test]
    fn rejects_decreasing_and_duplicate_dates() {
        let f = csv_file("date,A,B\n2000-02,0.01,0.02\n2000-01,0.0,0.00\n");
        assert!(matches!(
            load_returns(f.path()),
            Err(Error::NonMonotoneDates { .. })
        ));
        let f = csv_file("date,A,B\n2000-01,0.01,0.02\n2000-01,0.0,0.00\n");
        assert!(matches!(
            load_returns(f.path()),
            Err(Error::DuplicateDate { .. })
        ));
    }

    #[test]
    fn date_normalization() {
        assert_eq!(normalize_date("199912").unwrap(), "1999-12");
        assert_eq!(normalize_date("2001-03-31").unwrap(), "2001-03");
        assert_eq!(normalize_date("2001/07").unwrap(), "2001-07");
        assert!(normalize_date("2001-13").is_err());
        assert!(normalize_date("March 2001").is_err());
    }

    #[test]
    fn riskfree_requires_two_columns() {
        let f = csv_file("date,rf,extra\n2000-01,0.01,0.02\n");
        assert!(load_riskfree(f.path()).is_err());
        let f = csv_file("date,rf\n2000-01,0.004\n");
        assert_eq!(load_riskfree(f.path()).unwrap().values, vec![0.004]);
    }

    #[test]
    fn excess_return_example() {
        let panel = ReturnsPanel::new(
            vec!["2025-07".into()],
            vec!["NVDA".into()],
            DMatrix::from_element(1, 1, 0.2118),
        )
        .unwrap();
        let rf = RiskFreeSeries::new(vec!["2025-07".into()], vec![0.0425]).unwrap();
        let ex = to_excess(&panel, &rf).unwrap();
        assert!((ex.values[(0, 0)] - 0.1693).abs() < 1e-12);

        let rf = RiskFreeSeries::new(vec!["2025-07".into()], vec![0.2118]).unwrap();
        assert_eq!(to_excess(&panel, &rf).unwrap().values[(0, 0)], 0.0);
    }

    #[test]
    fn excess_with_zero_rate_is_identity_and_mismatch_errors() {
        let panel = ReturnsPanel::new(
            vec!["2000-01".into(), "2000-02".into()],
            vec!["A".into(), "B".into()],
            DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]),
        )
        .unwrap();
        let rf = RiskFreeSeries::new(panel.dates.clone(), vec![0.0, 0.0]).unwrap();
        assert_eq!(to_excess(&panel, &rf).unwrap(), panel);
        let rf = RiskFreeSeries::new(vec!["2000-01".into()], vec![0.0]).unwrap();
        assert!(matches!(to_excess(&panel, &rf), Err(Error::Alignment(_))));
    }

    #[test]
    fn align_keeps_common_dates() {
        let r = ReturnsPanel::new(
            monthly_dates(4),
            vec!["A".into(), "B".into()],
            DMatrix::from_fn(4, 2, |i, j| (i * 2 + j) as f64),
        )
        .unwrap();
        let f = FactorPanel::new(
            monthly_dates(6)[1..].to_vec(),
            vec!["MKT".into()],
            DMatrix::from_fn(5, 1, |i, _| i as f64),
        )
        .unwrap();
        let (r2, f2) = align(&r, &f).unwrap();
        assert_eq!(r2.dates, f2.dates);
        assert_eq!(r2.n_periods(), 3);
        assert_eq!(r2.values[(0, 0)], 2.0);
        assert_eq!(f2.values[(0, 0)], 0.0);
    }

    fn panel_with_rows(t: usize) -> ReturnsPanel {
        ReturnsPanel::new(
            monthly_dates(t),
            vec!["A".into(), "B".into()],
            DMatrix::from_fn(t, 2, |i, j| (i as f64) * 0.001 + j as f64 * 0.01),
        )
        .unwrap()
    }

    #[test]
    fn rolling_window_counts() {
        let p = panel_with_rows(181);
        let w = rolling_windows(&p, None, 180).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].test_index, 180);

        let p = panel_with_rows(240);
        let w = rolling_windows(&p, None, 180).unwrap();
        assert_eq!(w.len(), 60);
        for win in &w {
            assert_eq!(win.len(), 180);
            assert_eq!(win.train_end + 1, win.test_index);
            assert!(win
                .train_dates()
                .iter()
                .all(|d| d.as_str() < win.test_date()));
        }

        let p = panel_with_rows(180);
        assert!(matches!(
            rolling_windows(&p, None, 180),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn synthetic_identity_when_no_loadings() {
        let spec = SyntheticMarketSpec::new(4, 10, 1, 0.0, ErrorStructure::Diagonal { sd: 1.0 }, 1);
        let m = generate_synthetic(&spec).unwrap();
        assert_eq!(m.true_cov, DMatrix::identity(4, 4));
        assert_eq!(m.true_precision, DMatrix::identity(4, 4));
    }

    #[test]
    fn synthetic_banded_precision_is_tridiagonal() {
        let spec = SyntheticMarketSpec::new(
            8,
            10,
            1,
            0.0,
            ErrorStructure::BandedPrecision {
                bandwidth: 1,
                value: 0.4,
            },
            2,
        );
        let m = generate_synthetic(&spec).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let v = m.true_precision[(i, j)];
                match i.abs_diff(j) {
                    0 => assert!((v - 1.0).abs() < 1e-12),
                    1 => assert!((v - 0.4).abs() < 1e-12),
                    _ => assert!(v.abs() < 1e-12),
                }
            }
        }
    }

    #[test]
    fn synthetic_is_deterministic_per_seed() {
        let spec = SyntheticMarketSpec::new(
            6,
            50,
            2,
            1.0,
            ErrorStructure::SparseCov { density: 0.2 },
            99,
        );
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.returns, b.returns);
        assert_eq!(a.factors, b.factors);
        let mut other = spec.clone();
        other.seed = 100;
        assert_ne!(generate_synthetic(&other).unwrap().returns, a.returns);
    }

    #[test]
    fn synthetic_rejects_non_spd() {
        let spec = SyntheticMarketSpec::new(
            6,
            10,
            1,
            1.0,
            ErrorStructure::BandedPrecision {
                bandwidth: 2,
                value: 0.9,
            },
            1,
        );
        assert!(matches!(generate_synthetic(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn synthetic_sample_covariance_close_to_truth() {
        let mut spec =
            SyntheticMarketSpec::new(5, 100_000, 2, 1.0, ErrorStructure::Diagonal { sd: 0.8 }, 17);
        spec.factor_cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let m = generate_synthetic(&spec).unwrap();
        let s = linalg::sample_covariance(&m.returns.values, true).unwrap();
        let rel = (&s - &m.true_cov).norm() / m.true_cov.norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }

    #[test]
    fn csv_round_trip() {
        let spec = SyntheticMarketSpec::new(3, 4, 1, 1.0, ErrorStructure::Diagonal { sd: 1.0 }, 5);
        let m = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_returns_csv(&path, &m.returns).unwrap();
        assert_eq!(load_returns(&path).unwrap(), m.returns);
    }
}
