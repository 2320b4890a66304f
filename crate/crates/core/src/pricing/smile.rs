use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::black_scholes::implied_vol_of;
use super::fourier::{price_otm_fourier, QuadratureConfig};
use crate::error::{Error, Result};
use crate::params::HestonParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmileSource {
    Priced,
    Synthetic,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmilePoint {
    /// Log-moneyness `log(K / F)`.
    pub k: f64,
    pub vol: f64,
}

/// Implied volatilities at one maturity, sorted by strictly increasing `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smile {
    #[serde(rename = "T")]
    pub maturity: f64,
    pub points: Vec<SmilePoint>,
    pub source: SmileSource,
}

impl Smile {
    /// Sorts the points by `k`; rejects duplicates, non-finite values and
    /// non-positive vols or maturity.
    pub fn new(maturity: f64, mut points: Vec<SmilePoint>, source: SmileSource) -> Result<Self> {
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(Error::Domain(format!("T = {maturity} must be > 0")));
        }
        for pt in &points {
            if !pt.k.is_finite() || !(pt.vol.is_finite() && pt.vol > 0.0) {
                return Err(Error::MalformedInput(format!(
                    "smile point (k = {}, vol = {}) needs finite k and a positive finite vol",
                    pt.k, pt.vol
                )));
            }
        }
        points.sort_by(|a, b| a.k.total_cmp(&b.k));
        if let Some(w) = points.windows(2).find(|w| w[0].k == w[1].k) {
            return Err(Error::MalformedInput(format!(
                "duplicate log-moneyness {}",
                w[0].k
            )));
        }
        Ok(Self {
            maturity,
            points,
            source,
        })
    }

    /// Samples `vol(k)` from a total-variance function `w(k)`.
    pub fn from_total_variance<F: Fn(f64) -> f64>(
        maturity: f64,
        ks: &[f64],
        total_variance: F,
    ) -> Result<Self> {
        let points = ks
            .iter()
            .map(|&k| SmilePoint {
                k,
                vol: (total_variance(k) / maturity).sqrt(),
            })
            .collect();
        Self::new(maturity, points, SmileSource::Synthetic)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn log_moneyness(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.k).collect()
    }

    pub fn total_variances(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.vol * p.vol * self.maturity)
            .collect()
    }

    /// CSV with a `# T=<value>` metadata line and a `k,vol` header. Numbers carry
    /// 17 significant digits so they read back bit for bit.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# T={}", fmt17(self.maturity)).unwrap();
        out.push_str("k,vol\n");
        for p in &self.points {
            writeln!(out, "{},{}", fmt17(p.k), fmt17(p.vol)).unwrap();
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// Parses the CSV format of [`Smile::to_csv`]. `maturity` overrides or
    /// supplies `T` when the file has no metadata line.
    pub fn read_csv<R: BufRead>(reader: R, maturity: Option<f64>) -> Result<Self> {
        let mut file_t = None;
        let mut body = String::new();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            let trimmed = line.trim();
            if let Some(meta) = trimmed.strip_prefix('#') {
                if let Some(v) = meta.trim().strip_prefix("T=") {
                    let t: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad maturity line `{line}`")))?;
                    file_t = Some(t);
                }
            } else if !trimmed.is_empty() {
                body.push_str(trimmed);
                body.push('\n');
            }
        }
        let maturity = maturity
            .or(file_t)
            .ok_or_else(|| Error::Parse("no maturity: expected a `# T=<value>` line".into()))?;
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Parse(format!("missing `{name}` column")))
        };
        let (ki, vi) = (col("k")?, col("vol")?);
        let mut points = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse(format!("row {}: bad number", row + 1)))
            };
            points.push(SmilePoint {
                k: field(ki)?,
                vol: field(vi)?,
            });
        }
        Self::new(maturity, points, SmileSource::File)
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmileFailure {
    pub x: f64,
    pub k: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmileReport {
    pub smile: Smile,
    pub failures: Vec<SmileFailure>,
}

/// Implied volatility at `k` from the out-of-the-money Heston price.
pub fn heston_implied_vol(
    p: &HestonParams,
    k: f64,
    maturity: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    let otm = price_otm_fourier(p, k, maturity, q)?;
    implied_vol_of(otm.kind, otm.price, k, maturity)
}

/// Heston implied vols at `k = x T` for each `x` of the grid. Points are priced in
/// parallel; points that fail to price or invert are listed in `failures` and left
/// out of the smile.
pub fn heston_smile(
    p: &HestonParams,
    maturity: f64,
    x_grid: &[f64],
    q: &QuadratureConfig,
) -> Result<SmileReport> {
    p.require_structural()?;
    q.check()?;
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(Error::Domain(format!("T = {maturity} must be > 0")));
    }
    if let Some(x) = x_grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::MalformedInput(format!(
            "grid value {x} is not finite"
        )));
    }
    let results: Vec<(f64, f64, Result<f64>)> = x_grid
        .par_iter()
        .map(|&x| {
            let k = x * maturity;
            (x, k, heston_implied_vol(p, k, maturity, q))
        })
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (x, k, r) in results {
        match r {
            Ok(vol) => points.push(SmilePoint { k, vol }),
            Err(e) => failures.push(SmileFailure {
                x,
                k,
                error: e.to_string(),
            }),
        }
    }
    Ok(SmileReport {
        smile: Smile::new(maturity, points, SmileSource::Priced)?,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::linspace;
    use crate::params::heston_to_svi_omega;

    const P0: HestonParams = HestonParams::new(1.0, 0.04, 0.25, -0.5, 0.04);

    fn pts(v: &[(f64, f64)]) -> Vec<SmilePoint> {
        v.iter().map(|&(k, vol)| SmilePoint { k, vol }).collect()
    }

    #[test]
    fn construction_sorts_and_validates() {
        let s = Smile::new(
            1.0,
            pts(&[(0.1, 0.2), (-0.1, 0.25)]),
            SmileSource::Synthetic,
        )
        .unwrap();
        assert_eq!(s.log_moneyness(), vec![-0.1, 0.1]);
        assert!(Smile::new(1.0, pts(&[(0.1, 0.2), (0.1, 0.3)]), SmileSource::File).is_err());
        assert!(Smile::new(1.0, pts(&[(0.1, 0.0)]), SmileSource::File).is_err());
        assert!(Smile::new(0.0, vec![], SmileSource::File).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = Smile::new(
            2.5,
            pts(&[
                (-0.3, 0.213_456_789_012_345_67),
                (0.1 / 3.0, 0.2),
                (1e-9, 0.19),
            ]),
            SmileSource::Priced,
        )
        .unwrap();
        let text = s.to_csv();
        assert!(text.starts_with("# T=2.5000000000000000e0\nk,vol\n"));
        let back = Smile::read_csv(text.as_bytes(), None).unwrap();
        assert_eq!(back.maturity, s.maturity);
        assert_eq!(back.points, s.points);
        assert_eq!(back.source, SmileSource::File);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            Smile::read_csv("k,vol\n0,0.2\n".as_bytes(), None),
            Err(Error::Parse(_))
        ));
        assert!(Smile::read_csv("k,vol\n0,0.2\n".as_bytes(), Some(1.0)).is_ok());
        assert!(Smile::read_csv("# T=1\nk,vol\n0,abc\n".as_bytes(), None).is_err());
        assert!(Smile::read_csv("# T=1\nstrike,vol\n0,0.2\n".as_bytes(), None).is_err());
    }

    #[test]
    fn atm_vol_band() {
        let r = heston_smile(&P0, 1.0, &[0.0], &QuadratureConfig::default()).unwrap();
        assert!(r.failures.is_empty());
        let vol = r.smile.points[0].vol;
        assert!(vol > 0.18 && vol < 0.22, "{vol}");
    }

    #[test]
    fn uncorrelated_smile_is_symmetric() {
        let p = HestonParams { rho: 0.0, ..P0 };
        let grid = linspace(-0.3, 0.3, 7);
        let r = heston_smile(&p, 2.0, &grid, &QuadratureConfig::default()).unwrap();
        let v = &r.smile.points;
        for i in 0..v.len() {
            let j = v.len() - 1 - i;
            assert!((v[i].vol - v[j].vol).abs() < 1e-8, "k={}", v[i].k);
        }
    }

    #[test]
    fn long_maturity_atm_variance_near_omega1() {
        let omega1 = heston_to_svi_omega(&P0).unwrap().omega1;
        let r = heston_smile(&P0, 100.0, &[0.0], &QuadratureConfig::default()).unwrap();
        let var = r.smile.points[0].vol.powi(2);
        assert!(((var - omega1) / omega1).abs() < 0.01, "{var} vs {omega1}");
    }

    #[test]
    fn grid_order_is_preserved() {
        let grid = [0.1, -0.1, 0.0];
        let r = heston_smile(&P0, 1.0, &grid, &QuadratureConfig::default()).unwrap();
        assert_eq!(r.smile.log_moneyness(), vec![-0.1, 0.0, 0.1]);
    }
}
