mod common;

use std::fs;
use std::path::Path;

use proptest::prelude::*;
use voxcert::special::Dof;
use voxcert::volume::{
    import_csv, read_container, read_dof_sidecar, t_to_p, write_container, CsvSchema, Geometry,
    ReplicationSet, ValueKind, VolumeContainer,
};
use voxcert::Error;

fn nu() -> Dof {
    Dof::new(122.0).unwrap()
}

fn awkward_values(n: usize) -> Vec<f64> {
    let specials = [1e-12, 1.0 - 1e-12, 0.5, f64::MIN_POSITIVE, 0.1 + 0.2, 1.0 / 3.0];
    (0..n).map(|i| specials[i % specials.len()] * (1.0 - i as f64 * 1e-17)).collect()
}

#[test]
fn round_trip_is_bit_exact_for_every_kind() {
    let dir = tempfile::tempdir().unwrap();
    let mask = vec![true, false, true, true, false, true, true, false];
    let g = Geometry::new([2, 2, 2], mask).unwrap();
    for kind in ValueKind::ALL {
        let (m, dofs) = if kind == ValueKind::Pvalue || kind == ValueKind::Tstat {
            (3, vec![nu(), Dof::new(60.5).unwrap(), nu()])
        } else {
            (1, Vec::new())
        };
        let c = VolumeContainer::new(g.clone(), kind, m, dofs, awkward_values(m * 5)).unwrap();
        let path = dir.path().join(format!("{kind}.vol"));
        write_container(&path, &c).unwrap();
        let back = read_container(&path).unwrap();
        assert_eq!(back.header(), c.header());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.values), bits(&c.values));
        assert_eq!(back.geometry, c.geometry);
        assert_eq!(fs::read(&path).unwrap(), c.to_bytes());
    }
}

#[test]
fn payload_length_follows_mask_and_m() {
    let mut mask = vec![false; 8];
    mask[1] = true;
    mask[4] = true;
    mask[7] = true;
    let g = Geometry::new([2, 2, 2], mask).unwrap();
    let set = ReplicationSet::new(g, vec![nu(); 12], vec![0.4; 36]).unwrap();
    let c = VolumeContainer::from_replications(&set);
    assert_eq!(c.values.len(), 36);
    assert_eq!(c.to_bytes().len() - c.header().len(), 36 * 8);
    assert_eq!(c.to_replications().unwrap(), set);
}

fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, bytes).unwrap();
    p
}

fn sample() -> VolumeContainer {
    let g = Geometry::full([2, 2, 2]).unwrap();
    VolumeContainer::map(g, ValueKind::Lambda, (0..8).map(|i| i as f64 / 10.0).collect()).unwrap()
}

#[test]
fn truncation_names_expected_and_actual() {
    let dir = tempfile::tempdir().unwrap();
    let bytes = sample().to_bytes();
    let p = write_bytes(dir.path(), "short.vol", &bytes[..bytes.len() - 8]);
    match read_container(&p) {
        Err(Error::Truncated { expected, actual, offset, .. }) => {
            assert_eq!((expected, actual), (64, 56));
            assert_eq!(offset, bytes.len() as u64 - 8);
        }
        other => panic!("expected truncation error, got {other:?}"),
    }
    let mut long = bytes.clone();
    long.extend_from_slice(&[0; 3]);
    let p = write_bytes(dir.path(), "long.vol", &long);
    assert!(matches!(read_container(&p), Err(Error::Trailing { extra: 3, .. })));
}

#[test]
fn header_errors_carry_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let good = String::from_utf8_lossy(&sample().to_bytes()[..sample().header().len()]).into_owned();
    let cases = [
        good.replacen("FMRICERT", "FMRICERX", 1),
        good.replacen("version=1", "version=2", 1),
        good.replacen("dims=2 2 2", "dims=2 2", 1),
        good.replacen("mask=0 8", "mask=0 9", 1),
        good.replacen("endian=little", "endian=big", 1),
        good.replacen("kind=lambda", "kind=beta", 1),
    ];
    for (k, text) in cases.iter().enumerate() {
        let mut bytes = text.clone().into_bytes();
        bytes.extend_from_slice(&[0; 64]);
        let p = write_bytes(dir.path(), &format!("bad{k}.vol"), &bytes);
        match read_container(&p) {
            Err(Error::Header { offset, .. }) => assert!(offset < text.len() as u64),
            Err(Error::Shape(_)) if k == 3 => {}
            other => panic!("case {k}: {other:?}"),
        }
    }
}

#[test]
fn t_statistics_convert_to_upper_tail_p() {
    let (p, flagged) = t_to_p(&[1.9799, 0.0, 40.0], nu());
    assert!((p[0] - (1.0 - common::t_cdf(1.9799, 122.0))).abs() < 1e-12);
    assert!((p[0] - 0.025).abs() < 1e-4);
    assert_eq!(p[1], 0.5);
    assert!(p[2] < 1e-30);
    assert!(flagged.is_empty());
}

#[test]
fn csv_one_voxel_twelve_reps() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("x,y,z,rep,pvalue\n");
    for r in 0..12 {
        text.push_str(&format!("3,1,0,{},{}\n", r + 1, 0.01 * (r + 1) as f64));
    }
    let p = write_bytes(dir.path(), "one.csv", text.as_bytes());
    let schema = CsvSchema { value: ValueKind::Pvalue, dofs: vec![nu()], dims: Some([4, 2, 1]) };
    let set = import_csv(&p, &schema).unwrap();
    assert_eq!((set.m(), set.n_masked()), (12, 1));
    assert_eq!(set.geometry().grid_index(0), 3 + 4);
    assert_eq!(set.voxel(0).values()[11], 0.12);
}

#[test]
fn csv_duplicate_and_missing_rows() {
    let dir = tempfile::tempdir().unwrap();
    let schema = CsvSchema { value: ValueKind::Pvalue, dofs: vec![nu()], dims: None };
    let dup = write_bytes(dir.path(), "dup.csv", b"x,y,z,rep,pvalue\n0,0,0,1,0.1\n1,2,0,1,0.2\n1,2,0,1,0.3\n");
    match import_csv(&dup, &schema) {
        Err(Error::Schema(msg)) => assert!(msg.contains("(1, 2, 0)"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let missing = write_bytes(dir.path(), "miss.csv", b"x,y,z,rep,pvalue\n0,0,0,1,0.1\n0,0,0,2,0.2\n1,0,0,1,0.3\n");
    assert!(matches!(import_csv(&missing, &schema), Err(Error::Schema(_))));
    let header = write_bytes(dir.path(), "hdr.csv", b"x,y,z,replicate,p\n0,0,0,1,0.1\n");
    assert!(matches!(import_csv(&header, &schema), Err(Error::Schema(_))));
}

#[test]
fn csv_tstats_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let side = write_bytes(dir.path(), "dof.txt", b"122\n");
    let dofs = read_dof_sidecar(&side).unwrap();
    let ts = [[2.1, -0.4], [0.0, 3.7]];
    let mut text = String::from("x,y,z,rep,tstat\n");
    for (v, row) in ts.iter().enumerate() {
        for (r, t) in row.iter().enumerate() {
            text.push_str(&format!("{v},0,0,{r},{t}\n"));
        }
    }
    let p = write_bytes(dir.path(), "t.csv", text.as_bytes());
    let set = import_csv(&p, &CsvSchema { value: ValueKind::Tstat, dofs, dims: None }).unwrap();
    for (v, row) in ts.iter().enumerate() {
        for (r, &t) in row.iter().enumerate() {
            let want = t_to_p(&[t], nu()).0[0];
            assert_eq!(set.voxel(v).values()[r], want);
            assert!((want - common::t_sf(t, 122.0)).abs() < 1e-12);
        }
    }
    let bad = write_bytes(dir.path(), "bad.txt", b"122 abc\n");
    assert!(read_dof_sidecar(&bad).is_err());
}

#[test]
fn replication_values_are_validated() {
    let g = Geometry::full([2, 1, 1]).unwrap();
    assert!(ReplicationSet::new(g.clone(), vec![nu()], vec![0.1, 1.2]).is_err());
    assert!(ReplicationSet::new(g.clone(), vec![nu()], vec![0.1]).is_err());
    let set = ReplicationSet::new(g, vec![nu()], vec![0.0, 0.5]).unwrap();
    assert_eq!(set.clamped(), 1);
}

proptest! {
    #[test]
    fn expand_then_compress_is_identity(mask in proptest::collection::vec(any::<bool>(), 24)) {
        let g = Geometry::new([2, 3, 4], mask).unwrap();
        let vals: Vec<f64> = (0..g.n_masked()).map(|i| i as f64 + 0.25).collect();
        let grid = g.expand(&vals, f64::NAN).unwrap();
        prop_assert_eq!(g.compress(&grid).unwrap(), vals);
    }

    #[test]
    fn t_to_p_reverses_order(mut ts in proptest::collection::vec(-30.0f64..30.0, 2..50)) {
        ts.sort_by(f64::total_cmp);
        let (p, _) = t_to_p(&ts, nu());
        for w in p.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn arbitrary_bits_round_trip(vals in proptest::collection::vec(any::<f64>(), 6)) {
        let g = Geometry::full([3, 2, 1]).unwrap();
        let c = VolumeContainer::map(g, ValueKind::Tau, vals).unwrap();
        let back = VolumeContainer::from_bytes(&c.to_bytes(), Path::new("mem")).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.values), bits(&c.values));
    }
}
