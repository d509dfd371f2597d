use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{BerPoint, TimingPoint};
use crate::error::{Error, Result};

pub const BER_CSV_HEADER: &str = "detector,inr_db,sinr_db,interferer_sf,trials,symbol_errors,ber,ber_sigma";

#[derive(Serialize, Deserialize)]
struct BerRow {
    detector: String,
    inr_db: f64,
    sinr_db: f64,
    interferer_sf: u8,
    trials: usize,
    symbol_errors: usize,
    ber: f64,
    ber_sigma: f64,
}

fn csv_error(e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::format(offset, format!("{kind:?}")),
    }
}

pub fn write_ber_csv(w: impl Write, points: &[BerPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(BerRow {
            detector: p.detector.name().to_string(),
            inr_db: p.inr_db,
            sinr_db: p.sinr_db,
            interferer_sf: p.interferer_sf,
            trials: p.trials,
            symbol_errors: p.symbol_errors,
            ber: p.ber,
            ber_sigma: p.ber_sigma,
        })
        .map_err(csv_error)?;
    }
    if points.is_empty() {
        out.write_record(BER_CSV_HEADER.split(',')).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ber_csv(r: impl Read) -> Result<Vec<BerPoint>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_error)?.iter().collect::<Vec<_>>().join(",");
    if header != BER_CSV_HEADER {
        return Err(Error::format(0, format!("unexpected header '{header}'")));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<BerRow>() {
        let row = row.map_err(csv_error)?;
        out.push(BerPoint {
            detector: row.detector.parse()?,
            inr_db: row.inr_db,
            sinr_db: row.sinr_db,
            interferer_sf: row.interferer_sf,
            trials: row.trials,
            symbol_errors: row.symbol_errors,
            ber: row.ber,
            ber_sigma: row.ber_sigma,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct TimingRow<'a> {
    network: &'a str,
    num_symbols: usize,
    wall_time_s: f64,
}

pub fn write_timing_csv(w: impl Write, points: &[TimingPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(TimingRow {
            network: p.network.name(),
            num_symbols: p.num_symbols,
            wall_time_s: p.wall_time_s,
        })
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::DetectorKind;

    #[test]
    fn ber_csv_round_trip() {
        let pts = vec![
            BerPoint::new(DetectorKind::Coherent, -10.0, -15.0, 7, 20_000, 123, 128),
            BerPoint::new(DetectorKind::Hybnet, 27.5, -15.0, 8, 20_000, 0, 128),
            BerPoint::new(DetectorKind::Noncoherent, f64::NEG_INFINITY, -3.5, 7, 1000, 999, 128),
        ];
        let mut buf = Vec::new();
        write_ber_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&format!("{BER_CSV_HEADER}\n")));
        assert!(text.is_ascii());
        assert_eq!(read_ber_csv(buf.as_slice()).unwrap(), pts);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(read_ber_csv("a,b\n1,2\n".as_bytes()).is_err());
        let bad = format!("{BER_CSV_HEADER}\ncoherent,x,-15,7,1,0,0,0\n");
        assert!(matches!(read_ber_csv(bad.as_bytes()), Err(Error::Format { .. })));
        let unknown = format!("{BER_CSV_HEADER}\nmystery,0,-15,7,1,0,0,0\n");
        assert!(read_ber_csv(unknown.as_bytes()).is_err());
    }
}
