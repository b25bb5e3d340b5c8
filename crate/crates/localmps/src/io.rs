//! JSON and CSV serialization for states, Hamiltonians, circuits, and
//! reports.
//!
//! Formats:
//!
//! - MPS: `{"d", "N", "log_norm", "tensors"}` with each site tensor a
//!   nested array in `(left, physical, right)` index order and complex
//!   entries as `[re, im]` pairs.  The reader rebuilds through
//!   [`Mps::from_tensors`], so inconsistent bonds are rejected.
//! - Hamiltonian: `{"N", "d", "translation_invariant", "terms"}` with
//!   `d²×d²` matrices as nested `[re, im]` arrays.
//! - Circuit: `{"d", "N", "layers"}`; each layer is a list of
//!   `{"start", "width", "unitary"}` objects.
//! - Reports: any `Serialize` type via [`report_json`].
//!
//! All writers emit pretty-printed JSON with lexicographically sorted
//! keys and a trailing newline; CSV output uses a header row, `.`
//! decimals, UTF-8, and LF line endings.  Identical inputs produce
//! byte-identical files.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::circuit_approx::{CircuitElement, LocalCircuit};
use crate::error::{Error, Result};
use crate::hamiltonian::NnHamiltonian;
use crate::mps::{Mps, SiteTensor};
use crate::{C64, CMat};

fn complex_to_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn complex_from_json(v: &Value) -> Result<C64> {
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Io(format!("expected [re, im], got {v}")))?;
    let re = pair[0]
        .as_f64()
        .ok_or_else(|| Error::Io(format!("non-numeric real part {}", pair[0])))?;
    let im = pair[1]
        .as_f64()
        .ok_or_else(|| Error::Io(format!("non-numeric imaginary part {}", pair[1])))?;
    Ok(C64::new(re, im))
}

fn matrix_to_json(m: &CMat) -> Value {
    Value::Array(
        m.rows()
            .into_iter()
            .map(|row| Value::Array(row.iter().map(|&z| complex_to_json(z)).collect()))
            .collect(),
    )
}

fn matrix_from_json(v: &Value) -> Result<CMat> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Io(format!("expected a matrix (array of rows), got {v}")))?;
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Io("empty matrix".into()));
    }
    let first = rows[0]
        .as_array()
        .ok_or_else(|| Error::Io("matrix row is not an array".into()))?;
    let ncols = first.len();
    let mut m = CMat::zeros((nrows, ncols));
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .filter(|r| r.len() == ncols)
            .ok_or_else(|| Error::Io(format!("ragged matrix row {i}")))?;
        for (j, entry) in row.iter().enumerate() {
            m[(i, j)] = complex_from_json(entry)?;
        }
    }
    Ok(m)
}

/// MPS as a JSON value.
pub fn mps_to_json(m: &Mps) -> Value {
    let tensors: Vec<Value> = m
        .tensors
        .iter()
        .map(|t| {
            let (l, p, r) = t.dim();
            Value::Array(
                (0..l)
                    .map(|a| {
                        Value::Array(
                            (0..p)
                                .map(|q| {
                                    Value::Array(
                                        (0..r).map(|b| complex_to_json(t[(a, q, b)])).collect(),
                                    )
                                })
                                .collect(),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    json!({
        "d": m.site_dim(),
        "N": m.n_sites(),
        "log_norm": m.log_norm(),
        "tensors": tensors,
    })
}

/// Rebuild an MPS from its JSON form, revalidating bond consistency.
pub fn mps_from_json(v: &Value) -> Result<Mps> {
    let d = field_usize(v, "d")?;
    let n = field_usize(v, "N")?;
    let log_norm = v
        .get("log_norm")
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Io("missing or non-numeric log_norm".into()))?;
    let raw = v
        .get("tensors")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Io("missing tensors array".into()))?;
    if raw.len() != n {
        return Err(Error::Io(format!(
            "N = {n} but {} site tensors present",
            raw.len()
        )));
    }
    let mut tensors: Vec<SiteTensor> = Vec::with_capacity(n);
    for (site, tv) in raw.iter().enumerate() {
        let lrows = tv
            .as_array()
            .ok_or_else(|| Error::Io(format!("site {site}: tensor is not an array")))?;
        let l = lrows.len();
        let phys = lrows
            .first()
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Io(format!("site {site}: empty tensor")))?;
        let p = phys.len();
        let r = phys
            .first()
            .and_then(Value::as_array)
            .map(|a| a.len())
            .ok_or_else(|| Error::Io(format!("site {site}: empty physical row")))?;
        if p != d {
            return Err(Error::Io(format!(
                "site {site}: physical dimension {p} != d = {d}"
            )));
        }
        let mut t = SiteTensor::zeros((l, p, r));
        for (a, pv) in lrows.iter().enumerate() {
            let pv = pv
                .as_array()
                .filter(|x| x.len() == p)
                .ok_or_else(|| Error::Io(format!("site {site}: ragged tensor")))?;
            for (q, rv) in pv.iter().enumerate() {
                let rv = rv
                    .as_array()
                    .filter(|x| x.len() == r)
                    .ok_or_else(|| Error::Io(format!("site {site}: ragged tensor")))?;
                for (b, ev) in rv.iter().enumerate() {
                    t[(a, q, b)] = complex_from_json(ev)?;
                }
            }
        }
        tensors.push(t);
    }
    Mps::from_tensors(d, tensors, log_norm)
}

/// Hamiltonian as a JSON value.
pub fn hamiltonian_to_json(h: &NnHamiltonian) -> Value {
    json!({
        "N": h.n_sites,
        "d": h.site_dim,
        "translation_invariant": h.translation_invariant,
        "terms": h.terms.iter().map(matrix_to_json).collect::<Vec<_>>(),
    })
}

/// Rebuild a Hamiltonian from JSON, revalidating Hermiticity.
pub fn hamiltonian_from_json(v: &Value) -> Result<NnHamiltonian> {
    let n = field_usize(v, "N")?;
    let d = field_usize(v, "d")?;
    let raw = v
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Io("missing terms array".into()))?;
    let terms = raw.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?;
    NnHamiltonian::new(n, d, terms)
}

/// Circuit as a JSON value.
pub fn circuit_to_json(c: &LocalCircuit) -> Value {
    let layers: Vec<Value> = c
        .layers
        .iter()
        .map(|layer| {
            Value::Array(
                layer
                    .iter()
                    .map(|el| {
                        json!({
                            "start": el.start,
                            "width": el.width,
                            "unitary": matrix_to_json(&el.unitary),
                        })
                    })
                    .collect(),
            )
        })
        .collect();
    json!({
        "d": c.site_dim,
        "N": c.n_sites,
        "layers": layers,
    })
}

/// Rebuild a circuit from JSON and revalidate unitarity/disjointness.
pub fn circuit_from_json(v: &Value) -> Result<LocalCircuit> {
    let d = field_usize(v, "d")?;
    let n = field_usize(v, "N")?;
    let raw = v
        .get("layers")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Io("missing layers array".into()))?;
    let mut layers = Vec::with_capacity(raw.len());
    for lv in raw {
        let els = lv
            .as_array()
            .ok_or_else(|| Error::Io("layer is not an array".into()))?;
        let mut layer = Vec::with_capacity(els.len());
        for el in els {
            layer.push(CircuitElement {
                start: field_usize(el, "start")?,
                width: field_usize(el, "width")?,
                unitary: matrix_from_json(
                    el.get("unitary")
                        .ok_or_else(|| Error::Io("element missing unitary".into()))?,
                )?,
            });
        }
        layers.push(layer);
    }
    let c = LocalCircuit { site_dim: d, n_sites: n, layers };
    c.validate()?;
    Ok(c)
}

fn field_usize(v: &Value, key: &str) -> Result<usize> {
    v.get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .ok_or_else(|| Error::Io(format!("missing or invalid field {key:?}")))
}

/// Any serializable report as a JSON value (keys come out sorted when
/// written through [`write_json`]).
pub fn report_json<T: Serialize>(t: &T) -> Result<Value> {
    Ok(serde_json::to_value(t)?)
}

/// Pretty-print a JSON value with sorted keys and a trailing newline.
pub fn render_json(v: &Value) -> String {
    // serde_json's default map is ordered (BTreeMap), so a re-parse
    // through Value already sorts object keys.
    let mut s = serde_json::to_string_pretty(v).expect("JSON rendering cannot fail");
    s.push('\n');
    s
}

/// Write a JSON value to a file (pretty, sorted keys, LF endings).
pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    fs::write(path, render_json(v))?;
    Ok(())
}

/// Read and parse a JSON file.
pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Write a CSV file: header row plus data rows, UTF-8, LF endings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::Io(format!(
                "CSV row {i} has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_approx;
    use crate::hamiltonian::build_tfim;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn mps_round_trips_exactly() {
        let m = Mps::random(&mut StdRng::seed_from_u64(5), 6, 2, 3).unwrap();
        let v = mps_to_json(&m);
        let back = mps_from_json(&v).unwrap();
        assert_eq!(back.n_sites(), 6);
        let ov = Mps::inner(&m.normalized().unwrap(), &back.normalized().unwrap())
            .unwrap()
            .norm();
        assert!(ov > 1.0 - 1e-12, "overlap {ov}");
        assert!((m.norm() - back.norm()).abs() < 1e-12);
    }

    #[test]
    fn the_mps_reader_rejects_inconsistent_bonds() {
        let m = Mps::random(&mut StdRng::seed_from_u64(5), 4, 2, 2).unwrap();
        let mut v = mps_to_json(&m);
        // Drop one site tensor: the chain no longer matches N.
        v["tensors"].as_array_mut().unwrap().pop();
        assert!(mps_from_json(&v).is_err());
    }

    #[test]
    fn hamiltonians_round_trip_with_flags() {
        let open = build_tfim(5, 1.0, 2.0).unwrap();
        assert!(!hamiltonian_from_json(&hamiltonian_to_json(&open))
            .unwrap()
            .translation_invariant);
        let h = crate::hamiltonian::build_tfim_ti(5, 1.0, 2.0).unwrap();
        let back = hamiltonian_from_json(&hamiltonian_to_json(&h)).unwrap();
        assert!(back.translation_invariant);
        assert!(back.normalized);
        assert_eq!(back.n_sites, 5);
        for (a, b) in h.terms.iter().zip(back.terms.iter()) {
            assert!(crate::numerics::fro_dist(a, b) < 1e-15);
        }
    }

    #[test]
    fn circuits_round_trip_and_revalidate() {
        let psi = Mps::basis_state(2, &[0; 8]).unwrap();
        let psi = psi
            .apply_local_operator(&crate::numerics::identity(4), 2, 2)
            .unwrap();
        let b = circuit_approx::build_theorem2_detailed(&psi, 2).unwrap();
        let v = circuit_to_json(&b.circuit);
        let back = circuit_from_json(&v).unwrap();
        assert_eq!(back.layers.len(), 2);
        let zero = Mps::basis_state(2, &[0; 8]).unwrap();
        let a = b.circuit.apply(&zero).unwrap();
        let c = back.apply(&zero).unwrap();
        assert!(Mps::inner(&a, &c).unwrap().norm() > 1.0 - 1e-12);
    }

    #[test]
    fn rendered_json_is_stable_and_sorted() {
        let m = Mps::basis_state(2, &[0, 1]).unwrap();
        let a = render_json(&mps_to_json(&m));
        let b = render_json(&mps_to_json(&m));
        assert_eq!(a, b);
        // Keys appear in lexicographic order.
        let nn = a.find("\"N\"").unwrap();
        let dd = a.find("\"d\"").unwrap();
        let ln = a.find("\"log_norm\"").unwrap();
        let ts = a.find("\"tensors\"").unwrap();
        assert!(nn < dd && dd < ln && ln < ts);
        assert!(a.ends_with('\n'));
    }

    #[test]
    fn csv_rows_must_match_the_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&path, &["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1,2\n");
        assert!(write_csv(&path, &["a"], &[vec!["1".into(), "2".into()]]).is_err());
    }
}
