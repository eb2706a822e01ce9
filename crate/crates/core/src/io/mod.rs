//! File formats: the medium-description JSON schema, the CSV tables
//! written by every study, and the binary system dump.
//!
//! All floating-point columns use C-style `%.12e` formatting with `.` as
//! the decimal separator, which keeps repeated runs byte-identical.

pub mod expr;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::effective::ComplexGridField;
use crate::error::{CoreError, Result};
use crate::geom::Domain;
use crate::linalg::DenseMatrix;
use crate::medium::{CSampler, MediumSpec, PackingBound, RSampler};
use crate::placement::ScattererConfig;
use crate::scalar::{Cplx, Scalar};

/// C-style `%.12e`: twelve fractional digits, two-digit signed exponent.
pub fn fmt_e12(x: f64) -> String {
    if x == 0.0 {
        return "0.000000000000e+00".into();
    }
    let s = format!("{:.12e}", x);
    let (mantissa, exp) = s.split_once('e').expect("exponential format");
    let e: i32 = exp.parse().expect("exponent parses");
    format!("{mantissa}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn fmt_t<T: Scalar>(x: T) -> String {
    fmt_e12(x.to_f64_lossy())
}

// ---------------------------------------------------------------------
// Medium description JSON.
// ---------------------------------------------------------------------

/// Complex value encoded as one number (real) or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexDto {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexDto {
    pub fn to_complex(self) -> Complex<f64> {
        match self {
            ComplexDto::Real(re) => Complex::new(re, 0.0),
            ComplexDto::Pair([re, im]) => Complex::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxValueDto {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub value: ComplexDto,
}

/// Position-dependent sampler description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerDto {
    /// Constant value over the domain.
    Constant { value: ComplexDto },
    /// Background value overridden inside axis-aligned boxes (first match
    /// wins).
    PiecewiseBox {
        background: ComplexDto,
        boxes: Vec<BoxValueDto>,
    },
    /// Arithmetic expressions in x, y, z for the real and imaginary parts.
    Expression {
        re: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<String>,
    },
}

impl SamplerDto {
    /// Compile into a complex sampler (unrestricted; the medium applies
    /// the domain restriction).
    pub fn compile_complex<T: Scalar>(&self) -> Result<CSampler<T>> {
        match self {
            SamplerDto::Constant { value } => {
                let v = value.to_complex();
                let c = Complex::new(T::of(v.re), T::of(v.im));
                Ok(Arc::new(move |_| c))
            }
            SamplerDto::PiecewiseBox { background, boxes } => {
                let bg = background.to_complex();
                let bg = Complex::new(T::of(bg.re), T::of(bg.im));
                let compiled: Vec<([T; 3], [T; 3], Cplx<T>)> = boxes
                    .iter()
                    .map(|b| {
                        let v = b.value.to_complex();
                        (
                            [T::of(b.lo[0]), T::of(b.lo[1]), T::of(b.lo[2])],
                            [T::of(b.hi[0]), T::of(b.hi[1]), T::of(b.hi[2])],
                            Complex::new(T::of(v.re), T::of(v.im)),
                        )
                    })
                    .collect();
                Ok(Arc::new(move |x| {
                    for (lo, hi, v) in &compiled {
                        if (0..3).all(|d| x[d] >= lo[d] && x[d] < hi[d]) {
                            return *v;
                        }
                    }
                    bg
                }))
            }
            SamplerDto::Expression { re, im } => {
                let re_ast = expr::parse(re)?;
                let im_ast = im.as_deref().map(expr::parse).transpose()?;
                Ok(Arc::new(move |x| {
                    let p = [
                        x[0].to_f64_lossy(),
                        x[1].to_f64_lossy(),
                        x[2].to_f64_lossy(),
                    ];
                    let re_v = re_ast.eval(p);
                    let im_v = im_ast.as_ref().map(|a| a.eval(p)).unwrap_or(0.0);
                    Complex::new(T::of(re_v), T::of(im_v))
                }))
            }
        }
    }

    /// Compile into a real sampler; imaginary content is rejected.
    pub fn compile_real<T: Scalar>(&self) -> Result<RSampler<T>> {
        match self {
            SamplerDto::Constant { value } => {
                let v = value.to_complex();
                if v.im != 0.0 {
                    return Err(CoreError::Parse(
                        "real-valued sampler has an imaginary part".into(),
                    ));
                }
                let c = T::of(v.re);
                Ok(Arc::new(move |_| c))
            }
            SamplerDto::PiecewiseBox { background, boxes } => {
                if background.to_complex().im != 0.0
                    || boxes.iter().any(|b| b.value.to_complex().im != 0.0)
                {
                    return Err(CoreError::Parse(
                        "real-valued sampler has an imaginary part".into(),
                    ));
                }
                let c = self.compile_complex::<T>()?;
                Ok(Arc::new(move |x| c(x).re))
            }
            SamplerDto::Expression { re, im } => {
                if im.is_some() {
                    return Err(CoreError::Parse(
                        "real-valued sampler has an imaginary part".into(),
                    ));
                }
                let ast = expr::parse(re)?;
                Ok(Arc::new(move |x| {
                    T::of(ast.eval([
                        x[0].to_f64_lossy(),
                        x[1].to_f64_lossy(),
                        x[2].to_f64_lossy(),
                    ]))
                }))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainDto {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub nvox: [usize; 3],
}

impl DomainDto {
    pub fn to_domain<T: Scalar>(&self) -> Result<Domain<T>> {
        Domain::new(
            [T::of(self.lo[0]), T::of(self.lo[1]), T::of(self.lo[2])],
            [T::of(self.hi[0]), T::of(self.hi[1]), T::of(self.hi[2])],
            self.nvox,
        )
    }

    pub fn from_domain<T: Scalar>(d: &Domain<T>) -> Self {
        Self {
            lo: [
                d.lo()[0].to_f64_lossy(),
                d.lo()[1].to_f64_lossy(),
                d.lo()[2].to_f64_lossy(),
            ],
            hi: [
                d.hi()[0].to_f64_lossy(),
                d.hi()[1].to_f64_lossy(),
                d.hi()[2].to_f64_lossy(),
            ],
            nvox: d.nvox(),
        }
    }
}

/// On-disk medium description. Exactly one of `q` (potential) and `n2`
/// (refraction coefficient) must be present; `N` is the number density
/// used by placement and design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MediumDto {
    pub domain: DomainDto,
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<SamplerDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<SamplerDto>,
    #[serde(
        default,
        rename = "N",
        skip_serializing_if = "Option::is_none"
    )]
    pub density: Option<SamplerDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
}

impl MediumDto {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CoreError::Parse(format!("medium JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("medium DTO serializes")
    }

    pub fn to_medium<T: Scalar>(&self) -> Result<MediumSpec<T>> {
        let domain = self.domain.to_domain::<T>()?;
        let k = T::of(self.k);
        let packing = match self.p_max {
            Some(p) => PackingBound::new(T::of(p))?,
            None => PackingBound::default(),
        };
        let mut spec = match (&self.q, &self.n2) {
            (Some(q), None) => {
                MediumSpec::from_potential(domain, k, q.compile_complex()?, packing)?
            }
            (None, Some(n2)) => {
                MediumSpec::from_refraction(domain, k, n2.compile_complex()?, packing)?
            }
            (Some(_), Some(_)) => {
                return Err(CoreError::Parse(
                    "medium defines both q and n2; give exactly one".into(),
                ))
            }
            (None, None) => {
                return Err(CoreError::Parse(
                    "medium defines neither q nor n2".into(),
                ))
            }
        };
        if let Some(d) = &self.density {
            spec = spec.with_density(d.compile_real()?);
        }
        Ok(spec)
    }
}

pub fn read_medium_file<T: Scalar>(path: &Path) -> Result<MediumSpec<T>> {
    let text = std::fs::read_to_string(path)?;
    MediumDto::from_json(&text)?.to_medium()
}

// ---------------------------------------------------------------------
// Scatterer configuration CSV + JSON sidecar.
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigSidecar {
    pub a: f64,
    pub k: f64,
}

/// Sidecar path convention: the CSV path with `.json` appended.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    let mut os = csv_path.as_os_str().to_owned();
    os.push(".json");
    os.into()
}

pub fn write_config_csv<T: Scalar>(
    config: &ScattererConfig<T>,
    k: T,
    csv_path: &Path,
) -> Result<()> {
    let mut out = String::from("m,x,y,z,A_re,A_im\n");
    for (m, (c, a)) in config
        .centers
        .iter()
        .zip(config.amplitudes.iter())
        .enumerate()
    {
        out.push_str(&format!(
            "{m},{},{},{},{},{}\n",
            fmt_t(c[0]),
            fmt_t(c[1]),
            fmt_t(c[2]),
            fmt_t(a.re),
            fmt_t(a.im)
        ));
    }
    std::fs::write(csv_path, out)?;
    let sidecar = ConfigSidecar {
        a: config.a.to_f64_lossy(),
        k: k.to_f64_lossy(),
    };
    std::fs::write(
        sidecar_path(csv_path),
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
    )?;
    Ok(())
}

pub fn read_config_csv<T: Scalar>(csv_path: &Path) -> Result<(ScattererConfig<T>, T)> {
    let sidecar_text = std::fs::read_to_string(sidecar_path(csv_path))?;
    let sidecar: ConfigSidecar = serde_json::from_str(&sidecar_text)
        .map_err(|e| CoreError::Parse(format!("config sidecar: {e}")))?;
    let text = std::fs::read_to_string(csv_path)?;
    let mut centers = Vec::new();
    let mut amplitudes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "m,x,y,z,A_re,A_im" {
                return Err(CoreError::Parse(format!(
                    "unexpected config CSV header {line:?}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CoreError::Parse(format!(
                "config CSV line {} has {} fields",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CoreError::Parse(format!("bad number {s:?} on line {}", lineno + 1)))
        };
        centers.push([
            T::of(parse(fields[1])?),
            T::of(parse(fields[2])?),
            T::of(parse(fields[3])?),
        ]);
        amplitudes.push(Complex::new(T::of(parse(fields[4])?), T::of(parse(fields[5])?)));
    }
    let config = ScattererConfig::new(T::of(sidecar.a), centers, amplitudes)?;
    Ok((config, T::of(sidecar.k)))
}

// ---------------------------------------------------------------------
// Field tables.
// ---------------------------------------------------------------------

pub fn write_center_field_csv<T: Scalar>(values: &[Cplx<T>], path: &Path) -> Result<()> {
    let mut out = String::from("m,u_re,u_im\n");
    for (m, v) in values.iter().enumerate() {
        out.push_str(&format!("{m},{},{}\n", fmt_t(v.re), fmt_t(v.im)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Grid field CSV: `i,j,l,x,y,z,<prefix>_re,<prefix>_im`.
pub fn write_grid_field_csv<T: Scalar>(
    field: &ComplexGridField<T>,
    prefix: &str,
    path: &Path,
) -> Result<()> {
    let grid = &field.grid;
    let mut out = format!("i,j,l,x,y,z,{prefix}_re,{prefix}_im\n");
    for flat in 0..grid.n_voxels() {
        let idx = grid.unflatten(flat);
        let x = grid.voxel_center(idx);
        let v = field.values[flat];
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            idx[0],
            idx[1],
            idx[2],
            fmt_t(x[0]),
            fmt_t(x[1]),
            fmt_t(x[2]),
            fmt_t(v.re),
            fmt_t(v.im)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a grid field CSV (any value-column prefix); the grid geometry is
/// reconstructed from the index and coordinate columns, which needs at
/// least two voxels per axis.
pub fn read_grid_field_csv<T: Scalar>(path: &Path) -> Result<ComplexGridField<T>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<([usize; 3], [f64; 3], Complex<f64>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            let ok = line.starts_with("i,j,l,x,y,z,");
            if !ok {
                return Err(CoreError::Parse(format!(
                    "unexpected grid CSV header {line:?}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(CoreError::Parse(format!(
                "grid CSV line {} has {} fields",
                lineno + 1,
                fields.len()
            )));
        }
        let pu = |s: &str| -> Result<usize> {
            s.trim()
                .parse()
                .map_err(|_| CoreError::Parse(format!("bad index {s:?}")))
        };
        let pf = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| CoreError::Parse(format!("bad number {s:?}")))
        };
        rows.push((
            [pu(fields[0])?, pu(fields[1])?, pu(fields[2])?],
            [pf(fields[3])?, pf(fields[4])?, pf(fields[5])?],
            Complex::new(pf(fields[6])?, pf(fields[7])?),
        ));
    }
    if rows.is_empty() {
        return Err(CoreError::Parse("grid CSV has no data rows".into()));
    }
    let mut nvox = [0usize; 3];
    for (idx, _, _) in &rows {
        for d in 0..3 {
            nvox[d] = nvox[d].max(idx[d] + 1);
        }
    }
    if nvox.iter().any(|&n| n < 2) {
        return Err(CoreError::Parse(
            "grid CSV needs at least two voxels per axis to recover spacing".into(),
        ));
    }
    // Spacing from rows adjacent along each axis; origin from any row.
    let mut h = [0.0f64; 3];
    for d in 0..3 {
        let base = rows
            .iter()
            .find(|(idx, _, _)| idx[d] == 0)
            .ok_or_else(|| CoreError::Parse("grid CSV missing index 0 row".into()))?;
        let next = rows
            .iter()
            .find(|(idx, _, _)| {
                idx[d] == 1 && (0..3).all(|o| o == d || idx[o] == base.0[o])
            })
            .ok_or_else(|| CoreError::Parse("grid CSV missing adjacent row".into()))?;
        h[d] = next.1[d] - base.1[d];
        if h[d] <= 0.0 {
            return Err(CoreError::Parse("grid CSV spacing not positive".into()));
        }
    }
    let first = &rows[0];
    let mut lo = [0.0f64; 3];
    for d in 0..3 {
        lo[d] = first.1[d] - h[d] * (first.0[d] as f64 + 0.5);
    }
    let hi = [
        lo[0] + h[0] * nvox[0] as f64,
        lo[1] + h[1] * nvox[1] as f64,
        lo[2] + h[2] * nvox[2] as f64,
    ];
    let grid = Domain::new(
        [T::of(lo[0]), T::of(lo[1]), T::of(lo[2])],
        [T::of(hi[0]), T::of(hi[1]), T::of(hi[2])],
        nvox,
    )?;
    let mut values = vec![Complex::new(T::zero(), T::zero()); grid.n_voxels()];
    let mut seen = vec![false; grid.n_voxels()];
    for (idx, _, v) in rows {
        let flat = grid.flat_index(idx);
        values[flat] = Complex::new(T::of(v.re), T::of(v.im));
        seen[flat] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(CoreError::Parse("grid CSV is missing voxels".into()));
    }
    ComplexGridField::new(grid, values)
}

// ---------------------------------------------------------------------
// Analysis tables.
// ---------------------------------------------------------------------

pub fn write_farfield_csv<T: Scalar>(
    pattern: &crate::analysis::FarFieldPattern<T>,
    path: &Path,
) -> Result<()> {
    let mut out = String::from("theta,phi,weight,A_re,A_im\n");
    for ((angles, w), v) in pattern
        .set
        .angles
        .iter()
        .zip(pattern.set.weights.iter())
        .zip(pattern.values.iter())
    {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_t(angles.0),
            fmt_t(angles.1),
            fmt_t(*w),
            fmt_t(v.re),
            fmt_t(v.im)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_convergence_csv<T: Scalar>(
    report: &crate::analysis::ConvergenceReport<T>,
    record_timing: bool,
    path: &Path,
) -> Result<()> {
    let mut out = String::from("a,M,sup_err,seconds\n");
    for row in &report.rows {
        let seconds = if record_timing { row.seconds } else { 0.0 };
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_t(row.a),
            row.m,
            fmt_t(row.sup_err),
            fmt_e12(seconds)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_bands_csv<T: Scalar>(bands: &[(T, T)], path: &Path) -> Result<()> {
    let mut out = String::from("omega_lo,omega_hi\n");
    for (lo, hi) in bands {
        out.push_str(&format!("{},{}\n", fmt_t(*lo), fmt_t(*hi)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_counts_csv<T: Scalar>(
    rows: &[(T, T, crate::analysis::CountComparison<T>)],
    path: &Path,
) -> Result<()> {
    let mut out = String::from("a,kappa,m1,m2,ratio\n");
    for (a, kappa, c) in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_t(*a),
            fmt_t(*kappa),
            fmt_t(c.m1),
            fmt_t(c.m2),
            fmt_t(c.ratio)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------
// Binary system dump.
// ---------------------------------------------------------------------

/// Debug dump of a dense system: 32-byte header (magic `EMD1`, four
/// reserved zero bytes, u64 dimension, f64 wavenumber, f64 radius, all
/// little-endian) followed by row-major complex doubles.
pub fn write_system_dump<T: Scalar>(
    matrix: &DenseMatrix<T>,
    k: T,
    a: T,
    path: &Path,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(b"EMD1")?;
    w.write_all(&[0u8; 4])?;
    w.write_all(&(matrix.n() as u64).to_le_bytes())?;
    w.write_all(&k.to_f64_lossy().to_le_bytes())?;
    w.write_all(&a.to_f64_lossy().to_le_bytes())?;
    for v in matrix.data() {
        w.write_all(&v.re.to_f64_lossy().to_le_bytes())?;
        w.write_all(&v.im.to_f64_lossy().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a system dump (used by tests and downstream tooling).
pub fn read_system_dump(path: &Path) -> Result<(DenseMatrix<f64>, f64, f64)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 32 || &bytes[0..4] != b"EMD1" {
        return Err(CoreError::Parse("bad system dump header".into()));
    }
    let m = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let k = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let a = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let expected = 32 + m * m * 16;
    if bytes.len() != expected {
        return Err(CoreError::Parse(format!(
            "system dump length {} does not match dimension {m}",
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(m * m);
    for chunk in bytes[32..].chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
        data.push(Complex::new(re, im));
    }
    Ok((DenseMatrix::from_rows(m, data), k, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::constant_r;
    use crate::placement::place_inhomogeneities;

    #[test]
    fn e12_format_matches_c_style() {
        assert_eq!(fmt_e12(0.0), "0.000000000000e+00");
        assert_eq!(fmt_e12(1.0), "1.000000000000e+00");
        assert_eq!(fmt_e12(-0.5), "-5.000000000000e-01");
        assert_eq!(fmt_e12(1.23456789e-13), "1.234567890000e-13");
        assert_eq!(fmt_e12(9.999999999999999e9), "1.000000000000e+10");
    }

    #[test]
    fn medium_json_roundtrip_and_compile() {
        let text = r#"{
            "domain": {"lo": [0,0,0], "hi": [1,1,1], "nvox": [4,4,4]},
            "k": 1.0,
            "q": {"kind": "constant", "value": [0.3, 0.0]},
            "N": {"kind": "constant", "value": 0.3},
            "p_max": 0.7
        }"#;
        let dto = MediumDto::from_json(text).unwrap();
        let spec = dto.to_medium::<f64>().unwrap();
        let q = spec.q();
        assert!((q([0.5, 0.5, 0.5]) - Complex::new(0.3, 0.0)).norm() < 1e-15);
        assert_eq!(q([2.0, 0.5, 0.5]), Complex::new(0.0, 0.0)); // outside D
        let n2 = spec.n2();
        assert!((n2([0.5, 0.5, 0.5]) - Complex::new(0.7, 0.0)).norm() < 1e-15);
        let density = spec.density().unwrap();
        assert_eq!(density([0.5, 0.5, 0.5]), 0.3);

        let back = MediumDto::from_json(&dto.to_json()).unwrap();
        assert_eq!(back.k, dto.k);
    }

    #[test]
    fn medium_json_rejects_ambiguous_definitions() {
        let both = r#"{
            "domain": {"lo": [0,0,0], "hi": [1,1,1], "nvox": [2,2,2]},
            "k": 1.0,
            "q": {"kind": "constant", "value": 0.1},
            "n2": {"kind": "constant", "value": 0.9}
        }"#;
        assert!(MediumDto::from_json(both).unwrap().to_medium::<f64>().is_err());
        let neither = r#"{
            "domain": {"lo": [0,0,0], "hi": [1,1,1], "nvox": [2,2,2]},
            "k": 1.0
        }"#;
        assert!(MediumDto::from_json(neither)
            .unwrap()
            .to_medium::<f64>()
            .is_err());
    }

    #[test]
    fn expression_sampler_compiles() {
        let dto = SamplerDto::Expression {
            re: "0.3*sin(3.0*x)*z".into(),
            im: Some("-0.1*y".into()),
        };
        let f = dto.compile_complex::<f64>().unwrap();
        let v = f([0.5, 0.2, 0.8]);
        assert!((v.re - 0.3 * 1.5f64.sin() * 0.8).abs() < 1e-15);
        assert!((v.im + 0.02).abs() < 1e-15);
        // Real compile must reject the imaginary part.
        assert!(dto.compile_real::<f64>().is_err());
    }

    #[test]
    fn piecewise_box_sampler() {
        let dto = SamplerDto::PiecewiseBox {
            background: ComplexDto::Real(0.0),
            boxes: vec![BoxValueDto {
                lo: [0.0, 0.0, 0.0],
                hi: [0.5, 1.0, 1.0],
                value: ComplexDto::Pair([1.0, -0.5]),
            }],
        };
        let f = dto.compile_complex::<f64>().unwrap();
        assert_eq!(f([0.25, 0.5, 0.5]), Complex::new(1.0, -0.5));
        assert_eq!(f([0.75, 0.5, 0.5]), Complex::new(0.0, 0.0));
    }

    #[test]
    fn config_csv_roundtrip() {
        let dir = std::env::temp_dir().join("effmed-io-test-config");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.csv");
        let d = Domain::<f64>::unit_cube(4);
        let config = place_inhomogeneities(&constant_r(0.2), 0.05, &d)
            .unwrap()
            .with_amplitudes_from(&crate::medium::constant_c(Complex::new(1.5, -0.25)));
        write_config_csv(&config, 1.0, &path).unwrap();
        let (back, k) = read_config_csv::<f64>(&path).unwrap();
        assert_eq!(k, 1.0);
        assert_eq!(back.len(), config.len());
        for (a, b) in back.centers.iter().zip(config.centers.iter()) {
            for d in 0..3 {
                assert!((a[d] - b[d]).abs() < 1e-12);
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn grid_field_csv_roundtrip() {
        let dir = std::env::temp_dir().join("effmed-io-test-grid");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.csv");
        let grid = Domain::<f64>::new([0.0, -1.0, 2.0], [1.0, 1.0, 3.0], [3, 4, 2]).unwrap();
        let values: Vec<Complex<f64>> = (0..grid.n_voxels())
            .map(|i| Complex::new(i as f64, -0.5 * i as f64))
            .collect();
        let field = ComplexGridField::new(grid.clone(), values).unwrap();
        write_grid_field_csv(&field, "q", &path).unwrap();
        let back = read_grid_field_csv::<f64>(&path).unwrap();
        assert_eq!(back.grid.nvox(), grid.nvox());
        for d in 0..3 {
            assert!((back.grid.lo()[d] - grid.lo()[d]).abs() < 1e-9);
            assert!((back.grid.hi()[d] - grid.hi()[d]).abs() < 1e-9);
        }
        for (a, b) in back.values.iter().zip(field.values.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn system_dump_roundtrip() {
        let dir = std::env::temp_dir().join("effmed-io-test-dump");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("system.emd");
        let mut m = DenseMatrix::<f64>::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, Complex::new(i as f64, j as f64));
            }
        }
        write_system_dump(&m, 1.5, 0.01, &path).unwrap();
        let (back, k, a) = read_system_dump(&path).unwrap();
        assert_eq!(k, 1.5);
        assert_eq!(a, 0.01);
        assert_eq!(back.n(), 3);
        assert_eq!(back.get(1, 2), Complex::new(1.0, 2.0));
        // Header is exactly 32 bytes.
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 32 + 9 * 16);
        assert_eq!(&bytes[0..4], b"EMD1");
        std::fs::remove_dir_all(&dir).ok();
    }
}
