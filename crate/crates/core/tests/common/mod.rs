#![allow(dead_code)]

/// Hand-assembled single-file NIfTI-1 image; `data` is already encoded in
/// the requested byte order.
pub struct NiftiFixture {
    pub dims: [i16; 3],
    pub datatype: i16,
    pub bitpix: i16,
    pub slope: f32,
    pub inter: f32,
    pub little_endian: bool,
    pub data: Vec<u8>,
}

impl NiftiFixture {
    pub fn f32(dims: [i16; 3], values: &[f32], little_endian: bool) -> Self {
        let data = values
            .iter()
            .flat_map(|v| if little_endian { v.to_le_bytes() } else { v.to_be_bytes() })
            .collect();
        NiftiFixture { dims, datatype: 16, bitpix: 32, slope: 0.0, inter: 0.0, little_endian, data }
    }

    pub fn i16(dims: [i16; 3], values: &[i16], little_endian: bool) -> Self {
        let data = values
            .iter()
            .flat_map(|v| if little_endian { v.to_le_bytes() } else { v.to_be_bytes() })
            .collect();
        NiftiFixture { dims, datatype: 4, bitpix: 16, slope: 0.0, inter: 0.0, little_endian, data }
    }

    pub fn u8(dims: [i16; 3], values: &[u8]) -> Self {
        NiftiFixture { dims, datatype: 2, bitpix: 8, slope: 0.0, inter: 0.0, little_endian: true, data: values.to_vec() }
    }

    pub fn bytes(&self) -> Vec<u8> {
        let le = self.little_endian;
        let mut h = vec![0u8; 352];
        let put_i16 = |h: &mut Vec<u8>, o: usize, v: i16| {
            h[o..o + 2].copy_from_slice(&if le { v.to_le_bytes() } else { v.to_be_bytes() })
        };
        let put_i32 = |h: &mut Vec<u8>, o: usize, v: i32| {
            h[o..o + 4].copy_from_slice(&if le { v.to_le_bytes() } else { v.to_be_bytes() })
        };
        let put_f32 = |h: &mut Vec<u8>, o: usize, v: f32| {
            h[o..o + 4].copy_from_slice(&if le { v.to_le_bytes() } else { v.to_be_bytes() })
        };
        put_i32(&mut h, 0, 348);
        let dim = [3, self.dims[0], self.dims[1], self.dims[2], 1, 1, 1, 1];
        for (i, d) in dim.iter().enumerate() {
            put_i16(&mut h, 40 + 2 * i, *d);
        }
        put_i16(&mut h, 70, self.datatype);
        put_i16(&mut h, 72, self.bitpix);
        for i in 0..4 {
            put_f32(&mut h, 76 + 4 * i, 1.0);
        }
        put_f32(&mut h, 108, 352.0);
        put_f32(&mut h, 112, self.slope);
        put_f32(&mut h, 116, self.inter);
        put_i16(&mut h, 252, 1);
        put_f32(&mut h, 268, 1.5);
        h[344..348].copy_from_slice(b"n+1\0");
        h.extend_from_slice(&self.data);
        h
    }
}
