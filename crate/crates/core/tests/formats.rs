use proptest::prelude::*;

use metaset::formats::{
    decode_kmat, decode_pbm, decode_pc3d, decode_vxc, encode_kmat, encode_pbm_ascii, encode_pbm_binary, encode_pc3d,
    encode_vxc, FormatError,
};
use metaset::metrics::SquareMatrix;
use metaset::{KernelKind, PointCloud, UnitCell2D, VoxelCell};

fn symmetric(n: usize, vals: &[f64]) -> SquareMatrix {
    SquareMatrix::symmetric_from_fn(n, |i, j| vals[(i * 7 + j * 3 + i * j) % vals.len()])
}

proptest! {
    #[test]
    fn vxc_round_trip(n in 1usize..9, bits in prop::collection::vec(any::<bool>(), 512)) {
        let cell = VoxelCell::from_solid(n, bits[..n * n * n].to_vec());
        let back = decode_vxc(&encode_vxc(&cell)).unwrap();
        prop_assert_eq!(back.n, n);
        prop_assert_eq!(&back.solid, &cell.solid);
        prop_assert_eq!(back.density, cell.density);
    }

    #[test]
    fn pc3d_round_trip(points in prop::collection::vec(prop::array::uniform3(0.0f32..1.0), 0..64)) {
        let cloud = PointCloud::new(points.iter().map(|p| p.map(f64::from)).collect());
        let back = decode_pc3d(&encode_pc3d(&cloud)).unwrap();
        prop_assert_eq!(back.points, cloud.points);
    }

    #[test]
    fn kmat_round_trip(n in 1usize..8, vals in prop::collection::vec(-1e3f64..1e3, 1..20), code in 0u8..4) {
        let m = symmetric(n, &vals);
        let kind = KernelKind::from_code(code).unwrap();
        let (back, k) = decode_kmat(&encode_kmat(&m, kind)).unwrap();
        prop_assert_eq!(k, kind);
        prop_assert_eq!(back, m);
    }

    #[test]
    fn pbm_round_trip(w in 1usize..20, h in 1usize..20, bits in prop::collection::vec(any::<bool>(), 400)) {
        let cell = UnitCell2D::new(w, h, bits[..w * h].to_vec());
        let ascii = decode_pbm(encode_pbm_ascii(&cell).as_bytes()).unwrap();
        let binary = decode_pbm(&encode_pbm_binary(&cell)).unwrap();
        prop_assert_eq!(&ascii.solid, &cell.solid);
        prop_assert_eq!(&binary.solid, &cell.solid);
        prop_assert_eq!((binary.width, binary.height), (w, h));
    }
}

#[test]
fn truncated_inputs_rejected() {
    let cell = VoxelCell::from_solid(4, vec![true; 64]);
    let bytes = encode_vxc(&cell);
    assert!(matches!(decode_vxc(&bytes[..bytes.len() - 1]), Err(FormatError::Length)));
    assert!(matches!(decode_vxc(b"VXC2\x04\0\0\0"), Err(FormatError::BadMagic(_))));
    let m = SquareMatrix::identity(3);
    let bytes = encode_kmat(&m, KernelKind::Shape);
    assert!(decode_kmat(&bytes[..bytes.len() - 8]).is_err());
}

#[test]
fn asymmetric_kmat_rejected() {
    let mut m = SquareMatrix::identity(2);
    m.set(0, 1, 0.5);
    assert!(decode_kmat(&encode_kmat(&m, KernelKind::Joint)).is_err());
}

#[test]
fn pbm_with_comments() {
    let cell = decode_pbm(b"P1\n# comment\n3 2\n1 0 1\n0 1 0\n").unwrap();
    assert_eq!(cell.solid, vec![true, false, true, false, true, false]);
}
