use proptest::prelude::*;

use ramanquant::preprocess::{median_repeats, savitzky_golay};
use ramanquant::spectral::{Spectrum, WavenumberGrid};

fn spectrum(values: Vec<f64>) -> Spectrum {
    let grid = WavenumberGrid::uniform(400.0, 1600.0, values.len()).unwrap();
    Spectrum::new(grid, values).unwrap()
}

proptest! {
    #[test]
    fn cubic_polynomials_pass_unchanged(
        c in prop::array::uniform4(-5.0f64..5.0),
        n in 21usize..200,
    ) {
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64 * 2.0 - 1.0;
                c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t
            })
            .collect();
        let s = savitzky_golay(&spectrum(y.clone()), 21, 3).unwrap();
        for (a, b) in s.intensity().iter().zip(&y) {
            prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
        }
    }

    #[test]
    fn smoothing_is_linear(
        a in prop::collection::vec(-10.0f64..10.0, 40),
        b in prop::collection::vec(-10.0f64..10.0, 40),
        k in -3.0f64..3.0,
    ) {
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + k * y).collect();
        let sa = savitzky_golay(&spectrum(a), 21, 3).unwrap();
        let sb = savitzky_golay(&spectrum(b), 21, 3).unwrap();
        let ss = savitzky_golay(&spectrum(sum), 21, 3).unwrap();
        for i in 0..40 {
            prop_assert!((ss.intensity()[i] - sa.intensity()[i] - k * sb.intensity()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn median_removes_one_spike(
        base in prop::collection::vec(0.0f64..100.0, 30),
        at in 0usize..30,
        which in 0usize..5,
        height in 100.0f64..1e4,
    ) {
        let mut repeats = vec![spectrum(base.clone()); 5];
        let mut spiked = base.clone();
        spiked[at] += height;
        repeats[which] = spectrum(spiked);
        let m = median_repeats(&repeats).unwrap();
        prop_assert_eq!(m.intensity(), &base[..]);
    }
}
