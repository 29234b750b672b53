mod common;

use common::NiftiFixture;
use gbmseg::io::rvol::{Payload, RvolHeader, HEADER_LEN};
use gbmseg::io::{parse_nifti1, read_nifti1, read_nifti1_labels, DType, Rvol};
use gbmseg::volume::Dims;
use gbmseg::Error;
use proptest::prelude::*;

#[test]
fn nifti_f32_with_scaling() {
    let raw: Vec<f32> = (0..8).map(|i| i as f32 * 0.5 - 1.0).collect();
    let mut fx = NiftiFixture::f32([2, 2, 2], &raw, true);
    fx.slope = 2.0;
    fx.inter = 1.0;
    let nv = parse_nifti1(&fx.bytes()).unwrap();
    assert_eq!(nv.volume.dims(), Dims::cube(2).unwrap());
    for (i, &r) in raw.iter().enumerate() {
        assert_eq!(nv.volume.data()[i], f64::from(r) * 2.0 + 1.0);
    }
    assert_eq!(nv.meta.scl_slope, 2.0);
    assert_eq!(nv.meta.qform_code, 1);
    assert_eq!(nv.meta.quatern[3], 1.5);
    assert_eq!(nv.meta.pixdim, [1.0, 1.0, 1.0]);
}

#[test]
fn nifti_both_byte_orders_agree() {
    let raw: Vec<i16> = vec![-300, -1, 0, 1, 2, 700, 12000, -32768, 5, 6, 7, 8];
    let le = parse_nifti1(&NiftiFixture::i16([3, 2, 2], &raw, true).bytes()).unwrap();
    let be = parse_nifti1(&NiftiFixture::i16([3, 2, 2], &raw, false).bytes()).unwrap();
    assert!(!be.meta.little_endian);
    assert_eq!(le.volume, be.volume);
    assert_eq!(le.volume.get(2, 0, 0), 0.0);
    assert_eq!(le.volume.get(0, 1, 1), 6.0);
    assert_eq!(le.volume.data()[7], -32768.0);
}

#[test]
fn nifti_zero_slope_means_unscaled() {
    let mut fx = NiftiFixture::u8([2, 1, 1], &[3, 250]);
    fx.inter = 100.0;
    let nv = parse_nifti1(&fx.bytes()).unwrap();
    assert_eq!(nv.volume.data(), &[3.0, 250.0]);
}

#[test]
fn nifti_errors_name_the_field() {
    let good = NiftiFixture::u8([2, 1, 1], &[1, 2]).bytes();

    let mut no_magic = good.clone();
    no_magic[344..348].copy_from_slice(b"ni1\0");
    assert!(matches!(parse_nifti1(&no_magic), Err(Error::UnsupportedFormat { field: "magic", .. })));

    let gz = [0x1f, 0x8b, 8, 0, 0, 0];
    assert!(matches!(parse_nifti1(&gz), Err(Error::UnsupportedFormat { field: "compression", .. })));

    let mut bad_dt = good.clone();
    bad_dt[70] = 64;
    assert!(matches!(parse_nifti1(&bad_dt), Err(Error::UnsupportedFormat { field: "datatype", .. })));

    let mut four_d = good.clone();
    four_d[40] = 4;
    four_d[48] = 3;
    assert!(matches!(parse_nifti1(&four_d), Err(Error::UnsupportedFormat { field: "dim", .. })));

    assert!(matches!(parse_nifti1(&good[..100]), Err(Error::Format { offset: 100, .. })));
    assert!(matches!(parse_nifti1(&good[..353]), Err(Error::Format { .. })));
}

#[test]
fn nifti_files_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("seg.nii");
    std::fs::write(&p, NiftiFixture::u8([2, 2, 1], &[0, 1, 2, 4]).bytes()).unwrap();
    assert_eq!(read_nifti1_labels(&p).unwrap().labels(), &[0, 1, 2, 4]);
    assert_eq!(read_nifti1(&p).unwrap().volume.sum(), 7.0);

    let bad = dir.path().join("bad.nii");
    std::fs::write(&bad, NiftiFixture::u8([2, 1, 1], &[0, 5]).bytes()).unwrap();
    assert!(read_nifti1_labels(&bad).is_err());

    let missing = dir.path().join("missing.nii");
    let msg = read_nifti1(&missing).unwrap_err().to_string();
    assert!(msg.contains("missing.nii"), "{msg}");
}

fn dtype() -> impl Strategy<Value = DType> {
    prop_oneof![Just(DType::F32), Just(DType::F64), Just(DType::U8)]
}

fn record() -> impl Strategy<Value = Vec<u8>> {
    (1usize..5, 1usize..5, 1usize..4, 1usize..3, dtype()).prop_flat_map(|(nx, ny, nz, nc, dt)| {
        let header = RvolHeader { dims: Dims::new(nx, ny, nz).unwrap(), channels: nc, dtype: dt };
        let len = header.payload_len().unwrap();
        prop::collection::vec(any::<u8>(), len).prop_map(move |payload| {
            let mut b = header.encode().unwrap().to_vec();
            b.extend(payload);
            b
        })
    })
}

proptest! {
    #[test]
    fn rvol_round_trip_is_bitwise(bytes in record()) {
        let r = Rvol::decode(&bytes).unwrap();
        prop_assert_eq!(r.encode().unwrap(), bytes.clone());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.rvol");
        gbmseg::io::write_rvol(&r, &p).unwrap();
        prop_assert_eq!(std::fs::read(&p).unwrap(), bytes);
    }

    #[test]
    fn rvol_truncations_are_rejected(bytes in record(), cut in 0usize..1000) {
        let cut = cut % bytes.len();
        prop_assert!(Rvol::decode(&bytes[..cut]).is_err());
    }

    #[test]
    fn nifti_parser_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..600)) {
        let _ = parse_nifti1(&bytes);
    }
}

#[test]
fn rvol_header_layout() {
    let r = Rvol {
        header: RvolHeader { dims: Dims::new(2, 1, 1).unwrap(), channels: 1, dtype: DType::F32 },
        payload: Payload::F32(vec![1.0, -2.5]),
    };
    let b = r.encode().unwrap();
    assert_eq!(b.len(), HEADER_LEN + 8);
    assert_eq!(&b[..4], b"RVL1");
    assert_eq!(&b[20..24], &1u32.to_le_bytes());
    assert_eq!(&b[24..28], &1f32.to_le_bytes());
}
