//! The scalar abstraction shared by every numerical routine in the crate.
//!
//! All math is written against [`Real`], which is implemented for `f32` and
//! `f64`. Linear algebra goes through nalgebra's `RealField`; spectral
//! transforms are dispatched to `rustfft` per concrete type so that the
//! generic code never sees two competing `abs`/`signum` methods.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};
use rustfft::{FftNum, FftPlanner};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Real:
    RealField + Copy + Default + FromPrimitive + ToPrimitive + Serialize + DeserializeOwned
{
    /// Machine epsilon of the concrete type.
    const EPSILON: f64;

    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// A tolerance stated for double precision, widened so that it stays
    /// meaningful at the precision of `Self`.
    fn tol(x: f64) -> Self {
        Self::lit(x.max(100.0 * Self::EPSILON))
    }

    /// In-place n-dimensional FFT over a row-major buffer of the given shape.
    /// The inverse transform is normalized by the number of samples.
    fn fft_nd(buf: &mut [Complex<Self>], shape: &[usize], inverse: bool);
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            const EPSILON: f64 = <$t>::EPSILON as f64;

            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn fft_nd(buf: &mut [Complex<Self>], shape: &[usize], inverse: bool) {
                fft_nd_impl::<$t>(buf, shape, inverse)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

fn fft_nd_impl<T: FftNum>(buf: &mut [Complex<T>], shape: &[usize], inverse: bool) {
    let total: usize = shape.iter().product();
    assert_eq!(buf.len(), total, "fft buffer does not match shape");
    let mut planner = FftPlanner::<T>::new();
    let mut line = Vec::new();
    for (axis, &len) in shape.iter().enumerate() {
        if len <= 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let stride: usize = shape[axis + 1..].iter().product();
        let outer = total / (len * stride);
        line.resize(len, Complex::new(T::zero(), T::zero()));
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * len * stride + s;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = buf[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    buf[base + k * stride] = *v;
                }
            }
        }
    }
    if inverse {
        let scale = T::one() / T::from_usize(total).expect("grid size representable");
        for v in buf.iter_mut() {
            *v = *v * scale;
        }
    }
}

/// Euclidean norm of a slice.
pub fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
