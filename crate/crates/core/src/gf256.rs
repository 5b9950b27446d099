//! GF(2^8) arithmetic with reduction polynomial x^8 + x^4 + x^3 + x + 1
//! (0x11B) and generator 0x03. Log/antilog tables are built at compile time.

use crate::{Error, Result};

pub const POLY: u16 = 0x11B;
pub const GENERATOR: u8 = 0x03;

/// Log/antilog tables. `exp` is doubled in length so `exp[log a + log b]`
/// needs no modular reduction.
#[derive(Clone)]
pub struct Tables {
    exp: [u8; 512],
    log: [u8; 256],
}

impl Tables {
    pub const fn build() -> Self {
        let mut exp = [0u8; 512];
        let mut log = [0u8; 256];
        let mut x: u16 = 1;
        let mut i = 0;
        while i < 255 {
            exp[i] = x as u8;
            exp[i + 255] = x as u8;
            log[x as usize] = i as u8;
            // x *= 3, i.e. x ^ (x << 1) reduced
            let mut doubled = x << 1;
            if doubled & 0x100 != 0 {
                doubled ^= POLY;
            }
            x ^= doubled;
            i += 1;
        }
        exp[510] = exp[0];
        Self { exp, log }
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    pub fn inv(&self, a: u8) -> Result<u8> {
        if a == 0 {
            return Err(Error::ZeroInverse);
        }
        Ok(self.exp[255 - self.log[a as usize] as usize])
    }

    /// Overwrites one antilog entry. Only used to inject faults into self-tests.
    pub fn corrupt_exp(&mut self, index: usize, value: u8) {
        self.exp[index] = value;
        if index < 255 {
            self.exp[index + 255] = value;
        }
    }
}

static TABLES: Tables = Tables::build();

pub fn tables() -> &'static Tables {
    &TABLES
}

#[inline]
pub fn mul(a: u8, b: u8) -> u8 {
    TABLES.mul(a, b)
}

pub fn inv(a: u8) -> Result<u8> {
    TABLES.inv(a)
}

/// `dst += coef * src`, element-wise.
pub fn mul_add_slice(dst: &mut [u8], src: &[u8], coef: u8) {
    debug_assert_eq!(dst.len(), src.len());
    match coef {
        0 => {}
        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s),
        _ => {
            let lc = TABLES.log[coef as usize] as usize;
            for (d, &s) in dst.iter_mut().zip(src) {
                if s != 0 {
                    *d ^= TABLES.exp[lc + TABLES.log[s as usize] as usize];
                }
            }
        }
    }
}

/// `buf *= coef`, element-wise.
pub fn scale_slice(buf: &mut [u8], coef: u8) {
    match coef {
        1 => {}
        0 => buf.fill(0),
        _ => buf.iter_mut().for_each(|b| *b = mul(*b, coef)),
    }
}
