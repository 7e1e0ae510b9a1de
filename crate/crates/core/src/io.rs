//! CSV artifacts: moment series, speed profiles, ensemble snapshots, scaling
//! maps and L¹ decay curves.
//!
//! Floats are written in scientific notation with enough significant digits
//! for a lossless round trip. Every file may start with a
//! `# config_hash: <hex>` line, which readers skip.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::ensemble::{MomentRecord, MomentSeries, VelocityEnsemble};
use crate::error::{input, Error, Result};
use crate::num::Real;
use crate::profile::ProfileHistogram;
use crate::scaling::ScalingMap;

/// Round-trip formatting of a scalar.
pub fn fmt_real<T: Real>(x: T) -> String {
    format!("{:.*e}", T::ROUND_TRIP_DIGITS - 1, x)
}

fn write_hash<W: Write>(w: &mut W, hash: Option<&str>) -> Result<()> {
    if let Some(h) = hash {
        writeln!(w, "# config_hash: {h}")?;
    }
    Ok(())
}

fn reader<R: Read>(r: R, headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(headers)
        .flexible(!headers)
        .from_reader(r)
}

fn parse<T: Real>(field: &str, what: &str) -> Result<T> {
    T::from_str_radix(field.trim(), 10).map_err(|_| Error::Input(format!("cannot parse {what} from {field:?}")))
}

fn momentum_names(dim: usize) -> Vec<String> {
    (0..dim)
        .map(|k| match k {
            0 => "px".to_string(),
            1 => "py".to_string(),
            2 => "pz".to_string(),
            _ => format!("p{k}"),
        })
        .collect()
}

/// Columns `t,E,m_half,m_three_half,px,py,pz,...,n_coll,dt`; absent moments
/// are empty fields.
pub fn write_series<T: Real, W: Write>(series: &MomentSeries<T>, mut w: W, hash: Option<&str>) -> Result<()> {
    write_hash(&mut w, hash)?;
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string(), "E".into(), "m_half".into(), "m_three_half".into()];
    header.extend(momentum_names(series.dim()));
    header.extend(["n_coll".to_string(), "dt".to_string()]);
    csv.write_record(&header)?;
    for r in series.records() {
        let mut row = vec![fmt_real(r.t), fmt_real(r.energy)];
        row.push(r.m_half.map(fmt_real).unwrap_or_default());
        row.push(r.m_three_half.map(fmt_real).unwrap_or_default());
        row.extend(r.momentum.iter().map(|&p| fmt_real(p)));
        row.push(r.n_collisions.to_string());
        row.push(fmt_real(r.dt));
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_series<T: Real, R: Read>(r: R) -> Result<MomentSeries<T>> {
    let mut rdr = reader(r, true);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let fixed = ["t", "E", "m_half", "m_three_half"];
    if cols.len() < 8 || cols[..4] != fixed || cols[cols.len() - 2..] != ["n_coll", "dt"] {
        return input(format!("unexpected series header {cols:?}"));
    }
    let dim = cols.len() - 6;
    if cols[4..4 + dim] != momentum_names(dim).iter().map(String::as_str).collect::<Vec<_>>()[..] {
        return input(format!("unexpected momentum columns {:?}", &cols[4..4 + dim]));
    }
    let optional = |f: &str, what: &str| -> Result<Option<T>> {
        if f.trim().is_empty() {
            Ok(None)
        } else {
            parse(f, what).map(Some)
        }
    };
    let mut series = MomentSeries::new(dim);
    for rec in rdr.records() {
        let rec = rec?;
        let momentum = (0..dim).map(|k| parse(&rec[4 + k], "momentum")).collect::<Result<Vec<T>>>()?;
        series.push(MomentRecord {
            t: parse(&rec[0], "t")?,
            energy: parse(&rec[1], "E")?,
            m_half: optional(&rec[2], "m_half")?,
            m_three_half: optional(&rec[3], "m_three_half")?,
            momentum,
            n_collisions: rec[4 + dim]
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("cannot parse n_coll from {:?}", &rec[4 + dim])))?,
            dt: parse(&rec[5 + dim], "dt")?,
        })?;
    }
    Ok(series)
}

/// Columns `bin_lo,bin_hi,mass`; the overflow bin is a final row whose upper
/// edge is `inf`.
pub fn write_profile<W: Write>(h: &ProfileHistogram, mut w: W, hash: Option<&str>) -> Result<()> {
    write_hash(&mut w, hash)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["bin_lo", "bin_hi", "mass"])?;
    for (e, m) in h.bin_edges().windows(2).zip(h.masses()) {
        csv.write_record([fmt_real(e[0]), fmt_real(e[1]), fmt_real(*m)])?;
    }
    let top = *h.bin_edges().last().expect("histogram has edges");
    csv.write_record([fmt_real(top), "inf".to_string(), fmt_real(h.overflow())])?;
    csv.flush()?;
    Ok(())
}

pub fn read_profile<R: Read>(r: R) -> Result<ProfileHistogram> {
    let mut rdr = reader(r, true);
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["bin_lo", "bin_hi", "mass"] {
        return input("unexpected profile header");
    }
    let rows: Vec<(f64, f64, f64)> = rdr
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok((parse(&rec[0], "bin_lo")?, parse(&rec[1], "bin_hi")?, parse(&rec[2], "mass")?))
        })
        .collect::<Result<_>>()?;
    let Some((&(_, hi, overflow), bins)) = rows.split_last() else {
        return input("empty profile");
    };
    if hi != f64::INFINITY || bins.is_empty() {
        return input("profile must end with an overflow row");
    }
    let mut edges: Vec<f64> = bins.iter().map(|b| b.0).collect();
    edges.push(bins[bins.len() - 1].1);
    let masses = bins.iter().map(|b| b.2).collect();
    ProfileHistogram::from_parts(edges, masses, overflow, 0)
}

/// First record `d,N`, then one velocity per row.
pub fn write_ensemble<T: Real, W: Write>(ens: &VelocityEnsemble<T>, mut w: W, hash: Option<&str>) -> Result<()> {
    write_hash(&mut w, hash)?;
    let mut csv = csv::WriterBuilder::new().flexible(true).from_writer(w);
    csv.write_record([ens.dim().to_string(), ens.len().to_string()])?;
    for v in ens.velocities() {
        csv.write_record(v.iter().map(|&x| fmt_real(x)))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_ensemble<T: Real, R: Read>(r: R) -> Result<VelocityEnsemble<T>> {
    let mut rdr = reader(r, false);
    let mut records = rdr.records();
    let head = records.next().ok_or_else(|| Error::Input("empty snapshot".into()))??;
    if head.len() != 2 {
        return input("snapshot must start with a `d,N` line");
    }
    let parse_usize = |f: &str| f.trim().parse::<usize>().map_err(|_| Error::Input(format!("bad count {f:?}")));
    let (dim, n) = (parse_usize(&head[0])?, parse_usize(&head[1])?);
    let mut data = Vec::with_capacity(dim * n);
    for rec in records {
        let rec = rec?;
        if rec.len() != dim {
            return input(format!("velocity row has {} components, expected {dim}", rec.len()));
        }
        for f in rec.iter() {
            data.push(parse(f, "velocity")?);
        }
    }
    if data.len() != dim * n {
        return input(format!("snapshot declares {n} particles but holds {}", data.len() / dim.max(1)));
    }
    VelocityEnsemble::from_flat(dim, data)
}

/// Columns `t,V,T`.
pub fn write_scaling<W: Write>(map: &ScalingMap, mut w: W, hash: Option<&str>) -> Result<()> {
    write_hash(&mut w, hash)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["t", "V", "T"])?;
    for k in 0..map.len() {
        csv.write_record([fmt_real(map.t[k]), fmt_real(map.v[k]), fmt_real(map.s[k])])?;
    }
    csv.flush()?;
    Ok(())
}

/// Columns `s,l1`.
pub fn write_l1<W: Write>(points: &[(f64, f64)], mut w: W, hash: Option<&str>) -> Result<()> {
    write_hash(&mut w, hash)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["s", "l1"])?;
    for &(s, d) in points {
        csv.write_record([fmt_real(s), fmt_real(d)])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_l1<R: Read>(r: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = reader(r, true);
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["s", "l1"] {
        return input("unexpected L¹ header");
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok((parse(&rec[0], "s")?, parse(&rec[1], "l1")?))
        })
        .collect()
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}
